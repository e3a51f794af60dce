"""CholeskyQR2 orthogonalization of tall-skinny complex blocks.

A single Cholesky-QR pass (Gram matrix, Cholesky, triangular solve) loses
orthogonality proportionally to the squared condition number of the input.
Running the pass twice repairs that: the second pass sees an almost
orthonormal block and pushes the defect down to round-off.  The algorithm
is attractive here because every heavy step is a matrix product, which is
exactly what the operation counters and the target hardware like.

The composite triangular factor comes out upper triangular and satisfies
q @ r == a: if the first pass gives a = q1 @ l1^H and the second gives
q1 = q @ l2^H, then r = l2^H @ l1^H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    CholeskyBreakdownError,
    DimensionMismatchError,
    cholesky,
    gemm,
    trsm_right_upper_ct,
)

__all__ = ["CholQRResult", "RankDeficiencyError", "cholesky_qr2"]


class RankDeficiencyError(ArithmeticError):
    """The block is numerically rank deficient even after a shifted retry."""


@dataclass
class CholQRResult:
    """Orthonormal factor, composite triangular factor, and diagnostics.

    q : (n, k) block with orthonormal columns.
    r : (k, k) upper triangular, q @ r reconstructs the input.
    first_factor, second_factor : the lower Cholesky factors of the two
        Gram passes, kept for diagnostics.
    shift : diagonal shift applied on the single Cholesky retry (0.0 when
        both factorizations succeeded directly).
    """

    q: np.ndarray
    r: np.ndarray
    first_factor: np.ndarray
    second_factor: np.ndarray
    shift: float


def _chol_with_retry(w, counter, retry_allowed):
    """Cholesky with at most one diagonal-shift retry before giving up.

    The retry budget is shared by both passes of cholesky_qr2: a genuinely
    rank-deficient block breaks down again on the second Gram even after a
    shifted first pass, and that second breakdown must surface as an error
    instead of silently returning a block with dead columns.
    """
    try:
        return cholesky(w, counter=counter), 0.0
    except CholeskyBreakdownError as first:
        if not retry_allowed:
            raise RankDeficiencyError(
                "gram matrix is not positive definite (pivot %d, shift retry "
                "already spent)" % first.index) from first
        shift = 1e-12 * float(np.real(np.trace(w))) / w.shape[0]
        try:
            shifted = w + shift * np.eye(w.shape[0], dtype=np.complex128)
            return cholesky(shifted, counter=counter), shift
        except CholeskyBreakdownError as second:
            raise RankDeficiencyError(
                "gram matrix is not positive definite (pivot %d after shift %.3e)"
                % (second.index, shift)) from first


def cholesky_qr2(a, counter=None):
    """Orthonormalize the columns of a tall-skinny block by CholeskyQR2.

    Parameters
    ----------
    a : (n, k) complex ndarray with n >= k >= 1.  Must have numerically
        full column rank; condition numbers up to roughly 1e7 are fine.
    counter : FlopCounter, optional
        Charged through the four matrix products, two Cholesky
        factorizations and two triangular solves.

    Returns
    -------
    CholQRResult

    Raises
    ------
    RankDeficiencyError
        When a Gram Cholesky breaks down after the one diagonal-shift
        retry (shift = 1e-12 * trace / k) allowed per call.  Exactly
        dependent columns take this path: the shifted first pass produces
        a dead direction whose second-pass Gram breaks down again.
    """
    if a.ndim != 2:
        raise DimensionMismatchError("expected a 2-D block")
    n, k = a.shape
    if k < 1 or n < k:
        raise DimensionMismatchError(
            "need n >= k >= 1 for a tall-skinny block, got %s" % ((n, k),))

    w = gemm(a, a, conj_a=True, counter=counter)
    l1, s1 = _chol_with_retry(w, counter, retry_allowed=True)
    q1 = trsm_right_upper_ct(a, l1, counter=counter)

    w2 = gemm(q1, q1, conj_a=True, counter=counter)
    l2, s2 = _chol_with_retry(w2, counter, retry_allowed=s1 == 0.0)
    q2 = trsm_right_upper_ct(q1, l2, counter=counter)

    r = gemm(l2, l1, conj_a=True, conj_b=True, counter=counter)
    return CholQRResult(q=q2, r=r, first_factor=l1, second_factor=l2,
                        shift=s1 + s2)
