"""Block conjugate-gradient solver for Q X = I with per-column steps.

All identity columns are driven simultaneously.  Each column j keeps its
own step scalars: alpha_j = (r_j^H z_j)/(p_j^H s_j) and the matching
Fletcher-Reeves beta_j, applied as diagonal column scalings of the shared
direction block.  The residual is recomputed explicitly as I - Q X every
iteration rather than updated recursively; that costs one extra product
but keeps the stopping decision honest about the true algebraic residual,
which matters because downstream quality bounds are stated in terms of it.

Stopping is on the scaled Frobenius norm ||Q X - I||_F / sqrt(N), so a
run that starts at X = 0 always starts at residual exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import fro_norm, gemm

__all__ = [
    "CGConfig",
    "CGState",
    "NumericalBreakdownError",
    "cg_inverse",
    "residual_norm",
    "iteration_bound_estimate",
    "write_trajectory",
]

_FREEZE_EPS = 1e-300


class NumericalBreakdownError(ArithmeticError):
    """Non-finite value produced by the iteration; carries the index."""

    def __init__(self, iteration, detail=""):
        super().__init__("numerical breakdown at iteration %d %s" % (iteration, detail))
        self.iteration = iteration


@dataclass
class CGConfig:
    """Iteration budget and stopping control.

    max_iters : hard iteration budget, 0 <= max_iters <= 10 * N.
    epsilon : stopping threshold on ||Q X - I||_F / sqrt(N), in (0, 1).
    recompute_residual : must stay True; the recursive residual update is
        not supported because the stopping rule tracks the true residual.
    record_trajectory : additionally keep per-iteration alpha snapshots
        (one per iteration) and beta snapshots (one per iteration
        transition, so one fewer) on the state for diagnostics.
    """

    max_iters: int
    epsilon: float
    recompute_residual: bool = True
    record_trajectory: bool = False


@dataclass
class CGState:
    """Iterate block and scratch blocks after the last iteration."""

    x: np.ndarray
    r: np.ndarray
    z: np.ndarray
    p: np.ndarray
    s: np.ndarray | None
    alpha: np.ndarray
    beta: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    frozen: np.ndarray | None = None
    alpha_history: list | None = None
    beta_history: list | None = None


def _colwise_dot(a, b, counter):
    if counter is not None:
        counter.add("colwise_dot", a.size, a.size - a.shape[1])
    return np.einsum("ij,ij->j", a.conj(), b)


def _validate(config, n):
    if not (0.0 < config.epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1), got %g" % config.epsilon)
    if not (0 <= config.max_iters <= 10 * n):
        raise ValueError("max_iters must lie in [0, %d], got %d" % (10 * n, config.max_iters))
    if not config.recompute_residual:
        raise ValueError("recursive residual updates are not supported; "
                         "recompute_residual must stay True")


def cg_inverse(system, preconditioner=None, config=None, counter=None):
    """Approximate the inverse of a Hermitian positive definite system.

    Parameters
    ----------
    system : SystemMatrix
        The matrix to invert, in whichever domain the caller works.
    preconditioner : object with apply(block, counter), optional
        Typically a LowRankPreconditioner.  None runs plain CG, which is
        identical to preconditioning with any positive multiple of the
        identity.
    config : CGConfig, optional
        Defaults to the full 10N iteration budget at epsilon 1e-6.
    counter : FlopCounter, optional.

    Returns
    -------
    CGState whose x field is the approximate inverse and whose
        residual_history holds exactly one scaled residual per iteration
        performed.
    """
    q = system.matrix
    n = q.shape[0]
    if config is None:
        config = CGConfig(max_iters=10 * n, epsilon=1e-6)
    _validate(config, n)

    eye = np.eye(n, dtype=np.complex128)
    x = np.zeros((n, n), dtype=np.complex128)
    r = eye.copy()
    if preconditioner is not None:
        z = preconditioner.apply(r, counter=counter)
    else:
        z = r.copy()
    p = z.copy()
    rz = _colwise_dot(r, z, counter)
    frozen = np.zeros(n, dtype=bool)
    alpha = np.zeros(n, dtype=np.complex128)
    beta = np.zeros(n, dtype=np.complex128)
    history = []
    alpha_hist = [] if config.record_trajectory else None
    beta_hist = [] if config.record_trajectory else None
    s = None
    iterations = 0

    for it in range(config.max_iters):
        s = gemm(q, p, counter=counter)
        ps = _colwise_dot(p, s, counter)
        frozen |= np.abs(ps) < _FREEZE_EPS
        denom = np.where(frozen, 1.0, ps)
        alpha = np.where(frozen, 0.0, rz / denom)
        x = x + p * alpha[None, :]
        if counter is not None:
            counter.add("col_scale", n * n, n * n)
        qx = gemm(q, x, counter=counter)
        r = eye - qx
        res = float(fro_norm(r) / np.sqrt(n))
        history.append(res)
        iterations = it + 1
        if not np.isfinite(res) or not np.all(np.isfinite(alpha)):
            raise NumericalBreakdownError(iterations, "(residual %r)" % res)
        if config.record_trajectory:
            alpha_hist.append(alpha.copy())
        if res < config.epsilon:
            break
        if iterations == config.max_iters:
            break
        if preconditioner is not None:
            z = preconditioner.apply(r, counter=counter)
        else:
            z = r
        rz_new = _colwise_dot(r, z, counter)
        frozen |= np.abs(rz) < _FREEZE_EPS
        denom = np.where(frozen, 1.0, rz)
        beta = np.where(frozen, 0.0, rz_new / denom)
        if config.record_trajectory:
            beta_hist.append(beta.copy())
        if np.any(frozen):
            z = np.where(frozen[None, :], 0.0, z)
        p = z + p * beta[None, :]
        if counter is not None:
            counter.add("col_scale", n * n, n * n)
        rz = rz_new

    state = CGState(x=x, r=r, z=z, p=p, s=s, alpha=alpha, beta=beta,
                    iterations=iterations, residual_history=history,
                    frozen=frozen, alpha_history=alpha_hist, beta_history=beta_hist)
    return state


def residual_norm(system, x, counter=None):
    """Scaled true residual ||Q X - I||_F / sqrt(N) of a candidate inverse."""
    q = system.matrix
    n = q.shape[0]
    r = np.eye(n, dtype=np.complex128) - gemm(q, x, counter=counter)
    return fro_norm(r) / np.sqrt(n)


def iteration_bound_estimate(kappa, epsilon):
    """Classic CG iteration estimate sqrt(kappa) * ln(2/epsilon) / 2.

    A planning aid only; clustered spectra converge much faster than this
    worst-case figure suggests.
    """
    if kappa < 1.0:
        raise ValueError("condition number must be >= 1, got %g" % kappa)
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1), got %g" % epsilon)
    return float(np.sqrt(kappa) * np.log(2.0 / epsilon) / 2.0)


def write_trajectory(path, state, config_id):
    """Dump the residual history as CSV rows (iter, residual, config_id)."""
    lines = ["iter,residual,config_id"]
    for i, res in enumerate(state.residual_history):
        lines.append("%d,%s,%s" % (i + 1, repr(float(res)), config_id))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)
