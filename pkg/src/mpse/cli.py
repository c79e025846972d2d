"""Command-line interface: ``mpse <command> [options]``.

Exit codes: 0 ok, 2 parse error, 3 validation error, 4 non-convergence,
5 no stage equilibrium in some grid cell.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .backward import backward_recursion
from .forward import construct_strategy, monte_carlo_value, simulate_episode
from .game import ParseError, SpecValidationError, example_security_game, load_spec
from .grid import build_grid
from .backward import TooManyFailures
from .infinite import NotConverged, convergence_report, solve_ih
from .io import load_tables, save_tables
from .oracle import cross_check
from .security import CURVE_COLUMNS, security_curves, summarize_curves
from .stage import PESSIMISTIC, STRONG, NoStageEquilibrium, StageSearch

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NONCONVERGENCE = 4
EXIT_NO_EQUILIBRIUM = 5

OUT_ENV = "MPSE_OUT_DIR"
BUILTIN_PREFIX = "builtin:"

log = logging.getLogger("mpse")


@dataclass
class RunConfig:
    command: str
    spec: str | None
    grid: int
    leader_res: int
    tol: float
    ih_tol: float
    max_sweeps: int
    seed: int
    out: Path
    tie_break: str
    swap_payoffs: bool
    threads: int
    horizon: int | None = None
    nearest: bool = False

    def __post_init__(self):
        if self.grid < 1 or self.leader_res < 1:
            raise ValueError("resolutions must be >= 1")
        if self.tol <= 0 or self.ih_tol <= 0:
            raise ValueError("tolerances must be > 0")

    def search(self) -> StageSearch:
        return StageSearch(leader_resolution=self.leader_res, tol=self.tol,
                           tie_break=self.tie_break)


def builtin_spec_path(name: str) -> Path:
    return Path(str(resources.files("mpse") / "data" / f"{name}.yaml"))


def _load(cfg: RunConfig, default_security: bool = False):
    if cfg.spec is None:
        if not default_security:
            raise ParseError("--spec is required")
        spec = example_security_game()
    elif cfg.spec.startswith(BUILTIN_PREFIX):
        spec = load_spec(builtin_spec_path(cfg.spec[len(BUILTIN_PREFIX):]))
    else:
        spec = load_spec(cfg.spec)
    if cfg.horizon is not None:
        spec = spec.with_horizon(cfg.horizon)
    if cfg.swap_payoffs:
        spec = spec.swapped_payoffs()
    return spec


def _write_report(path: Path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}: {_fmt(v)}\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _values_rows(grid, v_l, v_f, t=None):
    for i in range(len(grid.leader)):
        for j in range(len(grid.follower)):
            lead = [] if t is None else [t]
            yield lead + list(grid.leader.points[i]) + list(grid.follower.points[j]) \
                + list(v_l[i, j]) + list(v_f[i, j])


def _values_header(spec, with_t=False):
    return (["t"] if with_t else []) + [f"pi_l_{s}" for s in spec.x_l_states] \
        + [f"pi_f_{s}" for s in spec.x_f_states] + [f"V_l_{s}" for s in spec.x_l_states] \
        + [f"V_f_{s}" for s in spec.x_f_states]


# --- commands -------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    spec = _load(cfg)
    print(f"ok: {spec.name} |X_l|={spec.n_xl} |X_f|={spec.n_xf} "
          f"|A_l|={spec.n_al} |A_f|={spec.n_af} delta={spec.delta} "
          f"horizon={'infinite' if spec.horizon is None else spec.horizon}")
    return EXIT_OK


def cmd_solve_finite(cfg: RunConfig) -> int:
    spec = _load(cfg)
    if spec.horizon is None:
        raise SpecValidationError(["solve-finite needs a finite horizon (use --horizon)"])
    grid = build_grid(spec, cfg.grid)
    res = backward_recursion(spec, grid, cfg.search(), cfg.nearest, cfg.threads)
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_tables(cfg.out / "tables.npz", res, spec)
    rows = []
    for t in range(1, spec.horizon + 1):
        rows.extend(_values_rows(grid, res.v_l[t - 1], res.v_f[t - 1], t))
    _write_csv(cfg.out / "values.csv", _values_header(spec, True), rows)
    failures = res.failure_report()
    _write_report(cfg.out / "report.txt", {
        "command": "solve-finite", "horizon": spec.horizon, "grid": cfg.grid,
        "leader_res": cfg.leader_res, "tie_break": cfg.tie_break,
        "failed_cells": len(failures),
    })
    if failures:
        (cfg.out / "failures.txt").write_text("\n".join(failures) + "\n")
        print(f"{len(failures)} cells without stage equilibrium", file=sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    return EXIT_OK


def _solve_ih(cfg: RunConfig, spec):
    if spec.horizon is not None:
        spec = spec.with_horizon(None)
    grid = build_grid(spec, cfg.grid)
    sol = solve_ih(spec, grid, cfg.ih_tol, cfg.max_sweeps, cfg.search(), cfg.nearest,
                   cfg.threads)
    return spec, sol


def _ih_outputs(cfg: RunConfig, spec, sol) -> dict:
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_tables(cfg.out / "tables.npz", sol, spec)
    _write_csv(cfg.out / "residuals.csv", ["sweep", "residual"],
               enumerate(sol.residual_history, start=1))
    rep = convergence_report(sol, spec.delta) if len(sol.residual_history) >= 3 else None
    if sol.failed is not None and sol.failed.any():
        cells = [f"cell {i},{j}: no stage equilibrium, myopic fallback used"
                 for i, j in zip(*np.nonzero(sol.failed))]
        (cfg.out / "failures.txt").write_text("\n".join(cells) + "\n")
    return {
        "converged": sol.converged,
        "sweeps": sol.iterations,
        "final_residual": sol.residual_history[-1],
        "fitted_ratio": rep.fitted_ratio if rep else float("nan"),
        "max_ratio_after_burn_in": rep.max_ratio if rep else float("nan"),
        "failed_cells": 0 if sol.failed is None else int(sol.failed.sum()),
    }


def _ih_exit(sol) -> int:
    if not sol.converged:
        print("infinite-horizon sweeps did not converge", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if sol.failed is not None and sol.failed.any():
        print(f"{int(sol.failed.sum())} cells without stage equilibrium", file=sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    return EXIT_OK


def cmd_solve_infinite(cfg: RunConfig) -> int:
    spec, sol = _solve_ih(cfg, _load(cfg))
    info = _ih_outputs(cfg, spec, sol)
    _write_csv(cfg.out / "values.csv", _values_header(spec),
               _values_rows(sol.grid, sol.v_l, sol.v_f))
    _write_report(cfg.out / "report.txt", {"command": "solve-infinite", "grid": cfg.grid,
                                           "leader_res": cfg.leader_res, **info})
    return _ih_exit(sol)


def cmd_example_security(cfg: RunConfig) -> int:
    spec = example_security_game()
    if cfg.swap_payoffs:
        spec = spec.swapped_payoffs()
    spec, sol = _solve_ih(cfg, spec)
    info = _ih_outputs(cfg, spec, sol)
    rows = security_curves(sol)
    _write_csv(cfg.out / "curves.csv", CURVE_COLUMNS, rows)
    summary = summarize_curves(rows)
    _write_report(cfg.out / "summary.txt", {"command": "example-security", "grid": cfg.grid,
                                            "leader_res": cfg.leader_res,
                                            "tie_break": cfg.tie_break,
                                            "swap_payoffs": cfg.swap_payoffs,
                                            **info, **summary.as_dict()})
    print(f"pure fraction {summary.pure_fraction:.3f}; "
          f"V_l(pi_f_high=1)={summary.v_l_at_high:.6f}; V_l(pi_f_high=0)={summary.v_l_at_low:.6f}")
    return _ih_exit(sol)


def cmd_simulate(cfg: RunConfig, tables_path: str | None, episodes: int, mc: int) -> int:
    if tables_path:
        tables, stored = load_tables(tables_path)
        spec = stored if cfg.spec is None else _load(cfg)
        if spec is None:
            raise ParseError("tables file carries no spec; pass --spec")
        if cfg.horizon is not None:
            spec = spec.with_horizon(cfg.horizon)
    else:
        spec = _load(cfg)
        grid = build_grid(spec, cfg.grid)
        if spec.horizon is None:
            tables = solve_ih(spec, grid, cfg.ih_tol, cfg.max_sweeps, cfg.search(),
                              cfg.nearest, cfg.threads)
        else:
            tables = backward_recursion(spec, grid, cfg.search(), cfg.nearest, cfg.threads)
    horizon = spec.horizon or cfg.horizon
    if horizon is None:
        raise SpecValidationError(["simulating a stationary strategy needs --horizon"])
    ev = construct_strategy(tables)
    cfg.out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(episodes)
    header = ["episode", "t", "x_l", "x_f", "pi_l", "pi_f", "a_l", "a_f", "r_l", "r_f"]
    rows = []
    for e, s in enumerate(seeds):
        trace = simulate_episode(ev, spec, int(s), horizon=horizon)
        for step in trace.steps:
            rows.append([e] + list(step.as_row().values()))
    _write_csv(cfg.out / "trace.csv", header, rows)
    if mc:
        res = monte_carlo_value(ev, spec, mc, cfg.seed, horizon=horizon)
        items = {"episodes": mc, "horizon": horizon}
        for x, name in enumerate(spec.x_l_states):
            items[f"V_l_{name}"] = res.mean_l[x]
            items[f"SE_l_{name}"] = res.se_l[x]
        for x, name in enumerate(spec.x_f_states):
            items[f"V_f_{name}"] = res.mean_f[x]
            items[f"SE_f_{name}"] = res.se_f[x]
        _write_report(cfg.out / "mc.txt", items)
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, tables_path: str | None, gate: float) -> int:
    """Compare last-stage tables (or fresh stage solves) against the brute-force oracle."""
    from .oracle import brute_force_stackelberg_t1

    if tables_path:
        tables, stored = load_tables(tables_path)
        spec = stored if cfg.spec is None else _load(cfg)
        if tables.gamma_l.ndim != 5:
            raise SpecValidationError(["oracle-check needs finite-horizon tables"])
        T = tables.gamma_l.shape[0]
        grid = tables.grid
        worst = 0.0
        for i, j in grid.cells():
            pair = grid.pair(i, j)
            stored_val = float(tables.v_l[T - 1, i, j] @ pair.pi_l)
            orc = brute_force_stackelberg_t1(pair, spec, cfg.leader_res, cfg.tie_break, T)
            worst = max(worst, abs(stored_val - orc.leader_weighted))
        items = {"source": "tables", "stage": T, "cells": grid.size,
                 "max_discrepancy": worst, "gate": gate, "pass": worst <= gate}
    else:
        spec = _load(cfg)
        grid = build_grid(spec, cfg.grid)
        worst, disagree = 0.0, 0
        for i, j in grid.cells():
            rep = cross_check(grid.pair(i, j), spec, cfg.leader_res,
                              StageSearch(leader_resolution=cfg.leader_res, tol=cfg.tol,
                                          tie_break=cfg.tie_break))
            worst = max(worst, rep.discrepancy)
            disagree += not rep.agree
        items = {"source": "stage-solver", "cells": grid.size, "max_discrepancy": worst,
                 "follower_disagreements": disagree, "gate": gate,
                 "pass": worst <= gate and disagree == 0}
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_report(cfg.out / "oracle_report.txt", {"command": "oracle-check",
                                                  "leader_res": cfg.leader_res, **items})
    print(f"max leader value discrepancy {worst:.3e} (gate {gate:g})")
    return EXIT_OK


# --- argument parsing -----------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="game spec file, or builtin:security")
    common.add_argument("--grid", type=int, default=None, help="belief grid resolution G")
    common.add_argument("--leader-res", type=int, default=None,
                        help="leader commitment lattice resolution M")
    common.add_argument("--tol", type=float, default=1e-9, help="stage value tolerance")
    common.add_argument("--ih-tol", type=float, default=1e-6,
                        help="sup-norm stopping tolerance for infinite-horizon sweeps")
    common.add_argument("--max-sweeps", type=int, default=200)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None,
                        help=f"output directory (default ${OUT_ENV} or ./mpse_out)")
    common.add_argument("--pessimistic", action="store_true",
                        help="break follower ties against the leader")
    common.add_argument("--swap-payoffs", action="store_true",
                        help="exchange leader and follower reward tensors")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--horizon", type=int, default=None, help="override the game horizon")
    common.add_argument("--nearest", action="store_true",
                        help="nearest-neighbour continuation lookup (diagnostic)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mpse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a game spec")
    sub.add_parser("solve-finite", parents=[common], help="finite-horizon backward recursion")
    sub.add_parser("solve-infinite", parents=[common], help="stationary equilibrium")
    sim = sub.add_parser("simulate", parents=[common], help="simulate equilibrium play")
    sim.add_argument("--tables", help="tables.npz from a solve command")
    sim.add_argument("--episodes", type=int, default=1, help="episodes written to trace.csv")
    sim.add_argument("--mc", type=int, default=0, help="Monte-Carlo episodes for value estimates")
    sub.add_parser("example-security", parents=[common],
                   help="stationary equilibrium curves of the security example")
    orc = sub.add_parser("oracle-check", parents=[common],
                         help="compare stage solutions with brute-force commitment search")
    orc.add_argument("--tables", help="finite-horizon tables.npz to check (last stage)")
    orc.add_argument("--gate", type=float, default=2e-3)
    return p


_DEFAULTS = {
    "oracle-check": {"grid": 10, "leader_res": 1000},
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    defaults = _DEFAULTS.get(args.command, {})
    out = Path(args.out or os.environ.get(OUT_ENV) or "mpse_out")
    try:
        cfg = RunConfig(
            command=args.command, spec=args.spec,
            grid=args.grid or defaults.get("grid", 100),
            leader_res=args.leader_res or defaults.get("leader_res", 100),
            tol=args.tol, ih_tol=args.ih_tol, max_sweeps=args.max_sweeps, seed=args.seed,
            out=out, tie_break=PESSIMISTIC if args.pessimistic else STRONG,
            swap_payoffs=args.swap_payoffs, threads=max(1, args.threads),
            horizon=args.horizon, nearest=args.nearest)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "solve-finite":
            return cmd_solve_finite(cfg)
        if args.command == "solve-infinite":
            return cmd_solve_infinite(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.tables, args.episodes, args.mc)
        if args.command == "example-security":
            return cmd_example_security(cfg)
        if args.command == "oracle-check":
            return cmd_oracle_check(cfg, args.tables, args.gate)
    except (ParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SpecValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (NoStageEquilibrium, TooManyFailures) as exc:
        print(f"no equilibrium: {exc}", file=sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
