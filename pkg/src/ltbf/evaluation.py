"""Link-level evaluation of approximate inverses.

The receive chain under test projects each user's observations onto the
dominant eigenvectors of that user's long-term covariance and applies the
(approximate) whitened front-end built from the system-matrix inverse.
Post-combining SINR per stream comes from the reduced-space MMSE identity
gamma = e*u / (1 - e*u) with u = g^H T^{-1} g, where T is the reduced
covariance of the total received signal including the stream itself.  A
full-dimension MMSE receiver with the same statistics serves as the
upper baseline, and a direct signal-over-interference quotient for a
single resource element is kept as an independent cross-check of the
batched path.

Degradation under an inexact inverse is compared against the algebraic
guarantee rhs = gamma0 * (1-eps)^2 / ((1+eps)^2 + 4*eps*mean(gamma0)),
with eps the spectral norm of Q X - I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cg import CGConfig, cg_inverse

__all__ = [
    "build_projector",
    "inverse_error",
    "scenario_gammas",
    "mmse_baseline_sinr",
    "post_beamforming_sinr",
    "BoundCheck",
    "check_sinr_bound",
    "capacity",
    "capacity_vs_iterations",
    "sinr_cdf",
    "SINRReport",
    "make_report",
    "write_capacity_csv",
    "write_cdf_csv",
    "write_bound_csv",
]


def build_projector(covariance, rank):
    """Dominant-eigenvector basis of a user covariance.

    Returns an (N, rank) orthonormal matrix whose columns are the top
    eigenvectors in descending eigenvalue order.
    """
    cov = np.asarray(covariance)
    n = cov.shape[0]
    if not 1 <= rank <= n:
        raise ValueError("rank must be in [1, %d], got %d" % (n, rank))
    _, vecs = np.linalg.eigh(0.5 * (cov + cov.conj().T))
    return np.ascontiguousarray(vecs[:, ::-1][:, :rank])


def inverse_error(system, x):
    """Residual sizes of an approximate inverse: (relative Frobenius, spectral).

    The Frobenius figure is ||Q X - I||_F / sqrt(N), matching the solver's
    stopping rule; the spectral norm of Q X - I is the operator-level eps
    entering the SINR guarantee.
    """
    q = system.matrix
    n = q.shape[0]
    resid = q @ x - np.eye(n, dtype=q.dtype)
    fro = float(np.linalg.norm(resid)) / np.sqrt(n)
    spec = float(np.linalg.norm(resid, 2))
    return fro, spec


def _stacked_channels(channels):
    # (subcarriers, N, n_ue * n_streams), user-major column order
    return np.concatenate([ch.h for ch in channels], axis=2)


def _stream_energies(stats, n_streams):
    return np.repeat([st.symbol_energy for st in stats], n_streams)


def scenario_gammas(stats, channels, x, noise_psd, rank=4):
    """Post-combining SINR of every stream under a given inverse.

    Parameters
    ----------
    stats, channels : per-user lists from the scenario generator.
    x : (N, N) approximate inverse of the system matrix.
    noise_psd : noise power spectral density N0.
    rank : dimension of each user's long-term projection subspace.

    Returns
    -------
    (n_ue, subcarriers, n_streams) array of linear SINR values.
    """
    n_ue = len(stats)
    n_streams = channels[0].h.shape[2]
    k_sc = channels[0].h.shape[0]
    big_h = _stacked_channels(channels)
    energies = _stream_energies(stats, n_streams)
    gammas = np.zeros((n_ue, k_sc, n_streams))
    for i, st in enumerate(stats):
        basis = build_projector(st.covariance, rank)
        front = basis.conj().T @ x
        if not np.any(front):
            continue  # zero inverse: nothing received
        noise_cov = noise_psd * (front @ front.conj().T)
        g_all = np.einsum("rn,knm->krm", front, big_h)
        t_mat = noise_cov[None, :, :] + np.einsum(
            "krm,m,ksm->krs", g_all, energies, g_all.conj())
        own = slice(i * n_streams, (i + 1) * n_streams)
        g_own = g_all[:, :, own]
        sol = np.linalg.solve(t_mat, g_own)
        u = np.real(np.einsum("krs,krs->ks", g_own.conj(), sol))
        # e*u < 1 holds exactly; clip shields the quotient from roundoff
        eu = np.clip(st.symbol_energy * u, 0.0, 1.0 - 1e-15)
        gammas[i] = eu / (1.0 - eu)
    return gammas


def mmse_baseline_sinr(stats, channels, noise_psd):
    """Stream SINR of the unreduced MMSE receiver, the upper reference.

    Works on the full N-dimensional observation with exact statistics, so
    it upper-bounds the projected receiver for every stream.
    """
    n_ue = len(stats)
    n_streams = channels[0].h.shape[2]
    k_sc, n, _ = channels[0].h.shape
    big_h = _stacked_channels(channels)
    energies = _stream_energies(stats, n_streams)
    t_mat = noise_psd * np.eye(n, dtype=np.complex128)[None, :, :] + np.einsum(
        "knm,m,kpm->knp", big_h, energies, big_h.conj())
    sol = np.linalg.solve(t_mat, big_h)
    u = np.real(np.einsum("knm,knm->km", big_h.conj(), sol))
    eu = np.clip(energies[None, :] * u, 0.0, 1.0 - 1e-15)
    gam = eu / (1.0 - eu)
    return np.ascontiguousarray(gam.reshape(k_sc, n_ue, n_streams).transpose(1, 0, 2))


def post_beamforming_sinr(g_target, g_others, energy_target, energies_others,
                          noise_cov):
    """Single-element SINR from the explicit beamformed quotient.

    Forms the MMSE beamformer for one stream and evaluates signal power
    over interference-plus-noise power term by term.  Independent of the
    solve-based identity used in scenario_gammas, hence usable to verify
    it.
    """
    g_target = np.asarray(g_target).reshape(-1)
    g_others = np.asarray(g_others)
    t_mat = np.asarray(noise_cov, dtype=np.complex128).copy()
    t_mat += energy_target * np.outer(g_target, g_target.conj())
    for e_j, g_j in zip(energies_others, g_others.T):
        t_mat += e_j * np.outer(g_j, g_j.conj())
    w = np.linalg.solve(t_mat, g_target)
    signal = energy_target * np.abs(w.conj() @ g_target) ** 2
    interference = float(np.real(w.conj() @ noise_cov @ w))
    for e_j, g_j in zip(energies_others, g_others.T):
        interference += e_j * np.abs(w.conj() @ g_j) ** 2
    return float(signal / interference)


@dataclass
class BoundCheck:
    """Outcome of testing gammas against the perturbation guarantee."""

    epsilon: float
    rhs: np.ndarray
    fraction_ok: float
    min_margin: float


def check_sinr_bound(gamma_exact, gamma_approx, epsilon):
    """Check approximate-inverse SINRs against the algebraic lower bound.

    Arrays are shaped (n_ue, ...); for every resource element of user i
    the guarantee is
        gamma_approx >= gamma_exact * (1-eps)^2
                        / ((1+eps)^2 + 4*eps*mean_i(gamma_exact))
    where the mean runs over user i's own elements (the expectation over
    small-scale fading) and eps is the spectral residual norm of the
    inverse.
    """
    g0 = np.asarray(gamma_exact, dtype=float)
    g1 = np.asarray(gamma_approx, dtype=float)
    if g0.shape != g1.shape:
        raise ValueError("exact and approximate SINR sets differ in shape")
    eps = float(epsilon)
    user_mean = np.mean(g0.reshape(g0.shape[0], -1), axis=1)
    shape = (g0.shape[0],) + (1,) * (g0.ndim - 1)
    rhs = g0 * (1.0 - eps) ** 2 / ((1.0 + eps) ** 2
                                   + 4.0 * eps * user_mean.reshape(shape))
    margin = g1 - rhs
    return BoundCheck(epsilon=eps, rhs=rhs,
                      fraction_ok=float(np.mean(margin >= 0.0)),
                      min_margin=float(np.min(margin)))


def capacity(gammas):
    """Mean spectral efficiency in bits: per-user mean of log2(1 + gamma),
    averaged over users."""
    g = np.asarray(gammas, dtype=float)
    per_user = np.mean(np.log2(1.0 + g), axis=tuple(range(1, g.ndim)))
    return float(np.mean(per_user))


def capacity_vs_iterations(system, stats, channels, noise_psd, checkpoints,
                           preconditioner=None, rank=4, transform=None,
                           counter=None):
    """Capacity achieved by the solver truncated at given iteration counts.

    Reruns the solver with each iteration budget (the iterate sequence is
    deterministic, so prefixes agree) and evaluates the scenario at each
    truncation point.  When the system lives in a transformed domain,
    transform maps the solver iterate back to the antenna domain before
    evaluation.

    Returns a list of dicts with keys requested, iterations, residual,
    capacity.
    """
    rows = []
    for budget in checkpoints:
        cfg = CGConfig(max_iters=int(budget), epsilon=1e-16)
        state = cg_inverse(system, preconditioner=preconditioner, config=cfg,
                           counter=counter)
        x = transform(state.x) if transform is not None else state.x
        gam = scenario_gammas(stats, channels, x, noise_psd, rank=rank)
        residual = state.residual_history[-1] if state.residual_history else float("nan")
        rows.append({"requested": int(budget),
                     "iterations": state.iterations,
                     "residual": float(residual),
                     "capacity": capacity(gam)})
    return rows


def sinr_cdf(gammas):
    """Empirical CDF of stream SINRs in dB.

    Returns (sorted dB values, plotting positions (i+1)/n).
    """
    flat = np.sort(np.asarray(gammas, dtype=float).reshape(-1))
    flat = np.maximum(flat, 1e-30)  # log of a hard zero
    probs = np.arange(1, flat.size + 1) / flat.size
    return 10.0 * np.log10(flat), probs


@dataclass
class SINRReport:
    """Headline numbers of one evaluated scenario."""

    capacity_bits: float
    per_user_mean_db: list
    worst_db: float
    best_db: float
    n_points: int


def make_report(gammas):
    g = np.asarray(gammas, dtype=float)
    safe = np.maximum(g, 1e-30)
    per_user = [float(10.0 * np.log10(np.mean(safe[i])))
                for i in range(g.shape[0])]
    return SINRReport(capacity_bits=capacity(g),
                      per_user_mean_db=per_user,
                      worst_db=float(10.0 * np.log10(np.min(safe))),
                      best_db=float(10.0 * np.log10(np.max(safe))),
                      n_points=int(g.size))


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(cell) for cell in row) + "\n")


def _format_cell(cell):
    # repr of a builtin float round-trips; numpy scalars repr differently
    if isinstance(cell, (float, np.floating)):
        return repr(float(cell))
    return str(cell)


def write_capacity_csv(path, rows):
    """rows: (config_id, iters, capacity)."""
    _write_csv(path, "config_id,iters,capacity", rows)


def write_cdf_csv(path, rows):
    """rows: (gamma_db, cdf, config_id)."""
    _write_csv(path, "gamma_db,cdf,config_id", rows)


def write_bound_csv(path, rows):
    """rows: (user, epsilon, gamma, bound_rhs, margin)."""
    _write_csv(path, "user,epsilon,gamma,bound_rhs,margin", rows)
