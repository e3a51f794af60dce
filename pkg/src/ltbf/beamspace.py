"""Two-dimensional DFT beamspace transform for square planar arrays.

For a T x T array the transform is the Kronecker product F = F_x kron F_y
of two unitary T-point DFT matrices, applied as a similarity Q_b = F Q F^H.
The spectrum is untouched; what changes is the coordinate system, which
concentrates quasi-plane-wave channel energy into few beams and makes the
transformed matrix numerically sparse.  Solvers run unchanged on Q_b and
the solution maps back as F^H X_b F.

Two evaluation paths are provided.  The dense path multiplies the explicit
DFT matrix with counted products and serves as the correctness reference;
the fft path factors the Kronecker structure through numpy's FFT and is
the one to use at scale.  Both must agree to 1e-11 and the tests hold them
to that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DimensionMismatchError, gemm
from .scenario import SystemMatrix

__all__ = ["BeamspaceOperator", "build_operator", "to_beamspace",
           "from_beamspace", "sparsity_ratio"]


@dataclass
class BeamspaceOperator:
    """Unitary 2-D DFT operator for one array side length.

    side : T, the array side; the operator acts on N = T*T coordinates.
    f : (N, N) explicit transform matrix, F_x kron F_y.
    axis_dft : (T, T) unitary one-axis DFT block.
    """

    side: int
    f: np.ndarray
    axis_dft: np.ndarray


def build_operator(side):
    """Construct the unitary beamspace operator for a T x T array."""
    if side < 1:
        raise DimensionMismatchError("array side must be >= 1, got %d" % side)
    j = np.arange(side)
    axis = np.exp(-2j * np.pi * np.outer(j, j) / side) / np.sqrt(side)
    f = np.kron(axis, axis)
    return BeamspaceOperator(side=side, f=f, axis_dft=axis)


def _as_grid(a, side):
    n = side * side
    if a.shape != (n, n):
        raise DimensionMismatchError(
            "expected a (%d, %d) matrix for side %d, got %s" % (n, n, side, a.shape))
    return a.reshape(side, side, side, side)


def _forward_similarity(op, a, method, counter):
    """F a F^H by the requested path."""
    if method == "dense":
        t = gemm(op.f, a, counter=counter)
        return gemm(t, op.f, conj_b=True, counter=counter)
    if method == "fft":
        grid = _as_grid(a, op.side)
        out = np.fft.ifft2(np.fft.fft2(grid, axes=(0, 1)), axes=(2, 3))
        return np.ascontiguousarray(out.reshape(a.shape))
    raise ValueError("unknown method %r, expected 'dense' or 'fft'" % method)


def _inverse_similarity(op, a, method, counter):
    """F^H a F by the requested path."""
    if method == "dense":
        t = gemm(op.f, a, conj_a=True, counter=counter)
        return gemm(t, op.f, counter=counter)
    if method == "fft":
        grid = _as_grid(a, op.side)
        out = np.fft.fft2(np.fft.ifft2(grid, axes=(0, 1)), axes=(2, 3))
        return np.ascontiguousarray(out.reshape(a.shape))
    raise ValueError("unknown method %r, expected 'dense' or 'fft'" % method)


def to_beamspace(op, system, method="dense", counter=None):
    """Transform an antenna-domain system matrix into beamspace.

    The result is re-symmetrized (the transform of a Hermitian matrix is
    Hermitian; averaging with its adjoint removes round-off drift) and
    tagged with the beamspace domain.  Trace and spectrum are preserved.

    The fft path charges nothing to the counter; its asymptotic cost is
    N^2 log N scalar multiplies against the dense path's 2 N^3.
    """
    if system.domain != "antenna":
        raise ValueError("to_beamspace expects an antenna-domain system, got %r"
                         % system.domain)
    qb = _forward_similarity(op, system.matrix, method, counter)
    qb = 0.5 * (qb + qb.conj().T)
    n = qb.shape[0]
    sigma2 = float(np.real(np.trace(qb))) / n
    return SystemMatrix(matrix=qb, sigma2=sigma2, domain="beamspace")


def from_beamspace(op, x_b, method="dense", counter=None):
    """Map a beamspace solution block back to the antenna domain."""
    return _inverse_similarity(op, x_b, method, counter)


def sparsity_ratio(a, threshold=0.005):
    """Fraction of entries below threshold times the peak magnitude.

    The all-zero matrix is fully sparse by convention (ratio 1.0).
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive, got %g" % threshold)
    peak = float(np.max(np.abs(a))) if a.size else 0.0
    if peak == 0.0:
        return 1.0
    return float(np.mean(np.abs(a) < threshold * peak))
