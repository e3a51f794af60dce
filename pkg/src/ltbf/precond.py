"""Low-rank Woodbury preconditioner for clustered-spectrum systems.

The system matrices handled here are an identity plus a positive
semidefinite update, so all but a handful of eigenvalues sit in a tight
cluster.  Approximating the matrix by

    qhat = sigma2 * I + U (Lambda - sigma2 I) U^H

with (U, Lambda) the top eigenpairs and sigma2 the mean diagonal level
makes qhat invertible in closed form by the Woodbury identity.  The
preconditioner is exactly that inverse, and it is only ever applied
implicitly:

    M R = R / sigma2 - U (w * (U^H R)),   w_k = 1/sigma2 - 1/lambda_k

evaluated strictly right to left so the cost stays at two thin products
per application instead of an n^2 rebuild.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DimensionMismatchError
from .randevd import randomized_evd

__all__ = ["InvalidSpectrumError", "LowRankPreconditioner", "build_preconditioner",
           "from_eigenpairs"]


class InvalidSpectrumError(ArithmeticError):
    """The sketched spectrum is unusable (non-positive eigenvalue)."""


@dataclass
class LowRankPreconditioner:
    """Implicit inverse of the low-rank spectral surrogate.

    eigvecs : (n, rank) orthonormal columns of the sketched eigenbasis.
    eigvals : (rank,) positive sketched eigenvalues, descending.
    sigma2 : the cluster level, mean diagonal of the source matrix.
    weights : (rank,) real, 1/sigma2 - 1/eigvals, precomputed once.
    """

    eigvecs: np.ndarray
    eigvals: np.ndarray
    sigma2: float
    weights: np.ndarray

    def apply(self, block, counter=None):
        """Apply the preconditioner to an (n, m) block.

        Never forms the dense operator; two thin products and a diagonal
        scaling, charged to the counter under "precond_apply".
        """
        if block.ndim != 2 or block.shape[0] != self.eigvecs.shape[0]:
            raise DimensionMismatchError(
                "block must have %d rows, got shape %s"
                % (self.eigvecs.shape[0], (block.shape,)))
        proj = np.matmul(self.eigvecs.conj().T, block)
        out = block / self.sigma2 - np.matmul(self.eigvecs, self.weights[:, None] * proj)
        if counter is not None:
            n, m = block.shape
            rank = self.eigvals.shape[0]
            counter.add("precond_apply",
                        2 * rank * n * m + rank * m + n * m,
                        2 * rank * n * m + n * m)
        return out

    def explicit_matrix(self):
        """Dense preconditioner matrix, for tests and diagnostics only."""
        n = self.eigvecs.shape[0]
        return (np.eye(n, dtype=np.complex128) / self.sigma2
                - (self.eigvecs * self.weights) @ self.eigvecs.conj().T)

    def surrogate_matrix(self):
        """Dense low-rank surrogate qhat, for tests and diagnostics only."""
        n = self.eigvecs.shape[0]
        return (self.sigma2 * np.eye(n, dtype=np.complex128)
                + (self.eigvecs * (self.eigvals - self.sigma2)) @ self.eigvecs.conj().T)


def from_eigenpairs(eigvecs, eigvals, sigma2):
    """Wrap already-known eigenpairs without sketching.

    Useful when the low-rank structure is known exactly, e.g. matrices
    assembled from a prescribed spectrum.  With exact eigenpairs the
    apply() of the result inverts the surrogate exactly.

    Raises
    ------
    InvalidSpectrumError
        If sigma2 or any supplied eigenvalue is non-positive.
    """
    eigvals = np.asarray(eigvals, dtype=np.float64)
    sigma2 = float(sigma2)
    if sigma2 <= 0.0:
        raise InvalidSpectrumError("cluster level sigma2 must be positive, got %g" % sigma2)
    if eigvals.size and float(np.min(eigvals)) <= 0.0:
        raise InvalidSpectrumError(
            "eigenvalue %.3e is not positive" % float(np.min(eigvals)))
    weights = 1.0 / sigma2 - 1.0 / eigvals
    return LowRankPreconditioner(eigvecs=np.asarray(eigvecs, dtype=np.complex128),
                                 eigvals=eigvals, sigma2=sigma2, weights=weights)


def build_preconditioner(system, rank, power_iters, seed, counter=None):
    """Sketch the top eigenpairs of a system matrix and wrap them.

    Parameters
    ----------
    system : SystemMatrix
        Hermitian positive definite system in either domain.  When the
        solve runs in beamspace, pass the transformed system so the
        preconditioner lives in the same coordinates as the iteration.
    rank, power_iters, seed : sketch parameters for randomized_evd.
    counter : FlopCounter, optional.

    Raises
    ------
    InvalidSpectrumError
        If the sketched spectrum has a non-positive eigenvalue or the
        cluster level is non-positive; reciprocals would be meaningless.
    """
    sigma2 = float(system.sigma2)
    if sigma2 <= 0.0:
        raise InvalidSpectrumError("cluster level sigma2 must be positive, got %g" % sigma2)
    sketch = randomized_evd(system.matrix, rank, power_iters, seed, counter=counter)
    if float(np.min(sketch.eigvals)) <= 0.0:
        raise InvalidSpectrumError(
            "sketched eigenvalue %.3e is not positive" % float(np.min(sketch.eigvals)))
    weights = 1.0 / sigma2 - 1.0 / sketch.eigvals
    return LowRankPreconditioner(eigvecs=sketch.eigvecs, eigvals=sketch.eigvals,
                                 sigma2=sigma2, weights=weights)
