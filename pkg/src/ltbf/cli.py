"""Command-line front end.

Four subcommands cover the batch workflow:

    ltbf gen CONFIG OUT          make a scenario file from a key=value config
    ltbf invert SCENARIO         solve one scenario and store the inverse
    ltbf sweep SCENARIO          run solver configurations, emit CSV tables
    ltbf report RUN_DIR          condense sweep CSVs into a text summary

All output is plain CSV plus key-value stdout lines; plotting is left to
external tooling.  Exit codes: 0 success, 2 configuration problem,
3 numerical failure, 4 file I/O problem.

The sweep config file holds one solver configuration per line:

    NAME domain=antenna|beamspace precond=none|lowrank [q=8] [p=4]

'#' starts a comment.  Without a config file the four standard
combinations (antenna/beamspace crossed with plain/low-rank) are run.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from .beamspace import build_operator, from_beamspace, sparsity_ratio, to_beamspace
from .cg import CGConfig, NumericalBreakdownError, cg_inverse, write_trajectory
from .cholqr import RankDeficiencyError
from .evaluation import (capacity, capacity_vs_iterations, check_sinr_bound,
                         inverse_error, scenario_gammas, sinr_cdf,
                         write_bound_csv, write_capacity_csv, write_cdf_csv)
from .linalg import (CholeskyBreakdownError, FlopCounter,
                     JacobiConvergenceError, SingularTriangularError,
                     direct_inverse_oracle)
from .precond import InvalidSpectrumError, build_preconditioner
from .scenario import (ConfigError, FileFormatError, assemble_q,
                       generate_scenario, load_scenario, read_config_file,
                       save_matrix, save_scenario)

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_NUMERICAL = 3
_EXIT_IO = 4

_NUMERICAL_ERRORS = (RankDeficiencyError, NumericalBreakdownError,
                     CholeskyBreakdownError, SingularTriangularError,
                     JacobiConvergenceError, InvalidSpectrumError,
                     np.linalg.LinAlgError)

_BOUND_EPSILONS = (0.1, 0.01)


class SolverSetup:
    """One named solver configuration of a sweep run."""

    def __init__(self, name, domain="antenna", precond="none", q=8, p=4):
        if domain not in ("antenna", "beamspace"):
            raise ConfigError("config %s: unknown domain %r" % (name, domain))
        if precond not in ("none", "lowrank"):
            raise ConfigError("config %s: unknown precond %r" % (name, precond))
        self.name = name
        self.domain = domain
        self.precond = precond
        self.q = int(q)
        self.p = int(p)


_DEFAULT_SETUPS = (
    SolverSetup("antenna_plain", "antenna", "none"),
    SolverSetup("antenna_precond", "antenna", "lowrank"),
    SolverSetup("beamspace_plain", "beamspace", "none"),
    SolverSetup("beamspace_precond", "beamspace", "lowrank"),
)


def read_sweep_configs(path):
    """Parse the sweep config file into SolverSetup objects."""
    setups = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            name = tokens[0]
            if "=" in name:
                raise ConfigError("%s:%d: first token must be the config id"
                                  % (path, lineno))
            if name in seen:
                raise ConfigError("%s:%d: duplicate config id %r"
                                  % (path, lineno, name))
            seen.add(name)
            kwargs = {}
            for tok in tokens[1:]:
                if "=" not in tok:
                    raise ConfigError("%s:%d: expected key=value, got %r"
                                      % (path, lineno, tok))
                key, value = tok.split("=", 1)
                if key not in ("domain", "precond", "q", "p"):
                    raise ConfigError("%s:%d: unknown config key %r"
                                      % (path, lineno, key))
                kwargs[key] = value
            try:
                setups.append(SolverSetup(name, **kwargs))
            except ValueError as err:
                raise ConfigError("%s:%d: %s" % (path, lineno, err)) from err
    if not setups:
        raise ConfigError("%s: no solver configurations found" % path)
    return setups


def _cluster_stats(eigvals):
    """(cluster count, cluster edge) of eigenvalues hugging 1 from above."""
    excess = float(np.max(eigvals)) - 1.0
    edge = 1.0 + 0.05 * max(excess, 0.0)
    inside = int(np.sum((eigvals >= 1.0 - 1e-9) & (eigvals <= edge)))
    return inside, edge


def _cmd_gen(args):
    cfg = read_config_file(args.config_file)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validate()
    stats, channels = generate_scenario(cfg)
    save_scenario(args.out_path, cfg, stats, channels)
    system = assemble_q(stats, n_antennas=cfg.n_antennas)
    eigvals = np.linalg.eigvalsh(system.matrix)
    clustered, edge = _cluster_stats(eigvals)
    print("out=%s" % args.out_path)
    print("N=%d" % cfg.n_antennas)
    print("N_UE=%d" % cfg.n_ue)
    print("seed=%d" % cfg.seed)
    print("sigma2=%r" % system.sigma2)
    print("kappa=%r" % float(eigvals[-1] / eigvals[0]))
    print("clustered_eigs=%d" % clustered)
    print("cluster_edge=%r" % edge)
    return _EXIT_OK


def _build_pipeline(system_ant, setup, seed, operator, counter=None):
    """(system in the working domain, preconditioner or None)."""
    if setup.domain == "beamspace":
        system = to_beamspace(operator, system_ant, method="fft")
    else:
        system = system_ant
    precond = None
    if setup.precond == "lowrank":
        precond = build_preconditioner(system, rank=setup.q, power_iters=setup.p,
                                       seed=seed, counter=counter)
    return system, precond


def _cmd_invert(args):
    cfg, stats, _ = load_scenario(args.scenario)
    if not (1 <= args.q <= min(64, cfg.n_antennas)):
        raise ConfigError("sketch rank q must lie in [1, %d], got %d"
                          % (min(64, cfg.n_antennas), args.q))
    if args.p < 1:
        raise ConfigError("power iteration count p must be >= 1, got %d" % args.p)
    system_ant = assemble_q(stats, n_antennas=cfg.n_antennas)
    operator = build_operator(cfg.side)
    setup = SolverSetup("invert", domain=args.domain, precond=args.precond,
                        q=args.q, p=args.p)
    counter = FlopCounter()
    system, precond = _build_pipeline(system_ant, setup, cfg.seed, operator,
                                      counter=counter)
    n = system.matrix.shape[0]
    max_iters = args.max_iters if args.max_iters is not None else 10 * n
    cg_cfg = CGConfig(max_iters=max_iters, epsilon=args.eps,
                      record_trajectory=bool(args.trace))
    state = cg_inverse(system, preconditioner=precond, config=cg_cfg,
                       counter=counter)
    x = state.x
    if setup.domain == "beamspace":
        x = from_beamspace(operator, x, method="fft")
    out_path = args.out if args.out else args.scenario + ".inv"
    save_matrix(out_path, x)
    if args.trace:
        write_trajectory(args.trace, state, "%s_%s" % (args.domain, args.precond))
    residual = state.residual_history[-1] if state.residual_history else float("nan")
    print("out=%s" % out_path)
    print("domain=%s" % setup.domain)
    print("precond=%s" % setup.precond)
    print("iterations=%d" % state.iterations)
    print("residual=%r" % residual)
    print("complex_mults=%d" % counter.mults)
    print("complex_adds=%d" % counter.adds)
    if residual >= args.eps:
        print("warning=target %r not reached in %d iterations"
              % (args.eps, state.iterations))
    return _EXIT_OK


def _converged_inverse(system, precond, eps, transform=None):
    n = system.matrix.shape[0]
    state = cg_inverse(system, preconditioner=precond,
                       config=CGConfig(max_iters=10 * n, epsilon=eps))
    x = transform(state.x) if transform is not None else state.x
    return x, state


def _cmd_sweep(args):
    cfg, stats, channels = load_scenario(args.scenario)
    setups = read_sweep_configs(args.configs) if args.configs else list(_DEFAULT_SETUPS)
    budgets = [int(tok) for tok in args.iters.split(",") if tok.strip()]
    os.makedirs(args.out_dir, exist_ok=True)
    if not budgets:
        # nothing to sweep; leave well-formed empty tables behind
        write_capacity_csv(os.path.join(args.out_dir, "capacity.csv"), [])
        write_cdf_csv(os.path.join(args.out_dir, "cdf.csv"), [])
        write_bound_csv(os.path.join(args.out_dir, "bound.csv"), [])
        _write_rows(os.path.join(args.out_dir, "run_meta.csv"),
                    "config_id,domain,precond,q,p,iters_to_eps,"
                    "residual_fro,residual_spectral,capacity", [])
        _write_rows(os.path.join(args.out_dir, "sparsity.csv"),
                    "domain,threshold,sparsity_ratio", [])
        print("out_dir=%s" % args.out_dir)
        print("configs=%d" % len(setups))
        print("budgets=")
        return _EXIT_OK
    system_ant = assemble_q(stats, n_antennas=cfg.n_antennas)
    operator = build_operator(cfg.side)
    rank = args.eval_rank

    x_exact = direct_inverse_oracle(system_ant.matrix)
    gam_exact = scenario_gammas(stats, channels, x_exact, cfg.noise_psd, rank=rank)

    capacity_rows = []
    cdf_rows = []
    meta_rows = []
    for setup in setups:
        system, precond = _build_pipeline(system_ant, setup, cfg.seed, operator)
        transform = None
        if setup.domain == "beamspace":
            transform = lambda xb: from_beamspace(operator, xb, method="fft")
        for row in capacity_vs_iterations(system, stats, channels, cfg.noise_psd,
                                          budgets, preconditioner=precond,
                                          rank=rank, transform=transform):
            capacity_rows.append((setup.name, row["iterations"], row["capacity"]))
        x_conv, state = _converged_inverse(system, precond, args.eps, transform)
        gam = scenario_gammas(stats, channels, x_conv, cfg.noise_psd, rank=rank)
        for db, pr in zip(*sinr_cdf(gam)):
            cdf_rows.append((db, pr, setup.name))
        fro, spec = inverse_error(system_ant, x_conv)
        meta_rows.append((setup.name, setup.domain, setup.precond, setup.q,
                          setup.p, state.iterations, fro, spec, capacity(gam)))
    for db, pr in zip(*sinr_cdf(gam_exact)):
        cdf_rows.append((db, pr, "exact"))

    # bound rows come from deliberately loose solves at the probe tolerances
    bound_rows = []
    bound_setup = SolverSetup("bound_probe", "antenna", "lowrank")
    system, precond = _build_pipeline(system_ant, bound_setup, cfg.seed, operator)
    for eps_target in _BOUND_EPSILONS:
        x_loose, _ = _converged_inverse(system, precond, eps_target)
        _, spec = inverse_error(system_ant, x_loose)
        gam = scenario_gammas(stats, channels, x_loose, cfg.noise_psd, rank=rank)
        bound = check_sinr_bound(gam_exact, gam, spec)
        n_ue = gam.shape[0]
        for user in range(n_ue):
            g_u = gam[user].reshape(-1)
            rhs_u = bound.rhs[user].reshape(-1)
            for g_val, rhs_val in zip(g_u, rhs_u):
                bound_rows.append((user, spec, g_val, rhs_val, g_val - rhs_val))

    write_capacity_csv(os.path.join(args.out_dir, "capacity.csv"), capacity_rows)
    write_cdf_csv(os.path.join(args.out_dir, "cdf.csv"), cdf_rows)
    write_bound_csv(os.path.join(args.out_dir, "bound.csv"), bound_rows)
    _write_rows(os.path.join(args.out_dir, "run_meta.csv"),
                "config_id,domain,precond,q,p,iters_to_eps,"
                "residual_fro,residual_spectral,capacity",
                meta_rows)
    _write_rows(os.path.join(args.out_dir, "sparsity.csv"),
                "domain,threshold,sparsity_ratio",
                [("antenna", 0.005, sparsity_ratio(system_ant.matrix)),
                 ("beamspace", 0.005,
                  sparsity_ratio(to_beamspace(operator, system_ant,
                                              method="fft").matrix))])
    print("out_dir=%s" % args.out_dir)
    print("configs=%d" % len(setups))
    print("budgets=%s" % ",".join(str(b) for b in budgets))
    return _EXIT_OK


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(c)) if isinstance(c, (float, np.floating))
                              else str(c) for c in row) + "\n")


def _read_table(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _cmd_report(args):
    names = os.listdir(args.run_dir)
    if "run_meta.csv" not in names:
        print("no runs found in %s" % args.run_dir)
        return _EXIT_OK
    meta = _read_table(os.path.join(args.run_dir, "run_meta.csv"))
    cap = _read_table(os.path.join(args.run_dir, "capacity.csv"))
    bound = _read_table(os.path.join(args.run_dir, "bound.csv"))
    sparsity = _read_table(os.path.join(args.run_dir, "sparsity.csv"))

    lines = ["solver configurations: %d" % len(meta)]
    baseline = next((r for r in meta if r["domain"] == "antenna"
                     and r["precond"] == "none"), None)
    for row in meta:
        note = ""
        if baseline is not None and row is not baseline:
            saved = int(baseline["iters_to_eps"]) - int(row["iters_to_eps"])
            note = "  (saves %d vs plain antenna)" % saved
        lines.append("%s: %s iterations to target, capacity %.4f%s"
                     % (row["config_id"], row["iters_to_eps"],
                        float(row["capacity"]), note))

    by_config = {}
    for row in cap:
        by_config.setdefault(row["config_id"], []).append(
            (int(row["iters"]), float(row["capacity"])))
    if baseline is not None and by_config:
        base_curve = dict(by_config.get(baseline["config_id"], ()))
        for name, curve in sorted(by_config.items()):
            if name == baseline["config_id"]:
                continue
            deltas = ["%+.1f%% @%d" % (100.0 * (c - base_curve[b]) /
                                       max(base_curve[b], 1e-12), b)
                      for b, c in sorted(curve) if b in base_curve][:3]
            if deltas:
                lines.append("capacity delta %s vs plain antenna: %s"
                             % (name, ", ".join(deltas)))

    if bound:
        margins = np.array([float(r["margin"]) for r in bound])
        lines.append("SINR bound: %d rows, worst margin %.3e, violations %d"
                     % (len(bound), margins.min(), int(np.sum(margins < 0))))
    for row in sparsity:
        lines.append("sparsity ratio (%s, threshold %s): %.3f"
                     % (row["domain"], row["threshold"],
                        float(row["sparsity_ratio"])))

    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print("out=%s" % args.out)
    else:
        sys.stdout.write(text)
    return _EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ltbf",
        description="low-rank preconditioned inversion workflows for "
                    "long-term beamforming studies")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a scenario file")
    gen.add_argument("config_file", help="key=value scenario config file")
    gen.add_argument("out_path", help="output scenario path")
    gen.add_argument("--seed", type=int, help="override the config seed")

    inv = sub.add_parser("invert", help="solve one scenario for its inverse")
    inv.add_argument("scenario", help="scenario file from gen")
    inv.add_argument("--domain", choices=("antenna", "beamspace"),
                     default="antenna")
    inv.add_argument("--precond", choices=("none", "lowrank"), default="lowrank")
    inv.add_argument("--q", type=int, default=8,
                     help="preconditioner rank (default 8)")
    inv.add_argument("--p", type=int, default=4,
                     help="power iterations of the sketch (default 4)")
    inv.add_argument("--eps", type=float, default=1e-6,
                     help="relative residual target (default 1e-6)")
    inv.add_argument("--max-iters", type=int, default=None,
                     help="iteration budget (default 10N)")
    inv.add_argument("--trace", help="write per-iteration residual CSV here")
    inv.add_argument("--out", help="output matrix path (default SCENARIO.inv)")

    swp = sub.add_parser("sweep", help="run solver configs, emit CSV tables")
    swp.add_argument("scenario", help="scenario file from gen")
    swp.add_argument("--configs", help="solver config file (see module help)")
    swp.add_argument("--iters", default="2,4,6,8,12,16,24,32",
                     help="comma list of iteration budgets")
    swp.add_argument("--out-dir", required=True, help="directory for the tables")
    swp.add_argument("--eps", type=float, default=1e-6,
                     help="convergence target for the CDF solves")
    swp.add_argument("--eval-rank", type=int, default=4,
                     help="projection rank of the evaluated receiver")

    rep = sub.add_parser("report", help="summarize sweep CSVs as text")
    rep.add_argument("run_dir", help="directory written by sweep")
    rep.add_argument("--out", help="write the summary here instead of stdout")

    return parser


_COMMANDS = {
    "gen": _cmd_gen,
    "invert": _cmd_invert,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print("config error: %s" % err, file=sys.stderr)
        return _EXIT_CONFIG
    except _NUMERICAL_ERRORS as err:
        print("numerical failure: %s" % err, file=sys.stderr)
        return _EXIT_NUMERICAL
    except FileFormatError as err:
        print("file error: %s" % err, file=sys.stderr)
        return _EXIT_IO
    except OSError as err:
        print("file error: %s" % err, file=sys.stderr)
        return _EXIT_IO


if __name__ == "__main__":
    sys.exit(run())
