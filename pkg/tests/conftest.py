import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _strict_float_errors():
    """Fail loudly on invalid float ops inside any test."""
    with np.errstate(invalid="raise", divide="raise", over="raise"):
        yield
