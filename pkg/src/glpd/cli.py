"""Command line front end.

    glpd solve CONFIG [--out DIR] [--seed N] [--quiet]
    glpd verify CONFIG [--out DIR] [--seed N] [--eps 0.1,0.01] [--quiet]
    glpd conjugate-check [CONFIG] [--out DIR]
    glpd sweep CONFIG [--eps ...]
    glpd scan CONFIG

Exit status: 0 verified/ok, 1 verification failed, 2 theorem hypotheses not
satisfied, 3 solver non-convergence, 4 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from glpd.config import ConfigError, ExperimentConfig
from glpd.conjugates import conjugate_table
from glpd.energy import DENSE_LIMIT, Params, eval_primal
from glpd.mesh import GridSpec
from glpd.serialize import format_csv, write_field, write_report
from glpd.solve import CriticalPoint, newton_primal
from glpd.theorem import DEFAULT_EPS_LIST, concavity_radius, epsilon_sweep, scaling_ratio_errors, verify_theorem

log = logging.getLogger("glpd")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_NOT_APPLICABLE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CONFIG = 4

SWEEP_COLUMNS = ("epsilon", "gap", "dual_grad_norm", "min_eig_dual", "max_eig_dual", "predicted_min_eig_dual")
CONJUGATE_COLUMNS = ("term", "s", "closed", "oracle", "abs_error")
DEFAULT_SCAN = {"n_directions": 8, "t_max": 1.0}


class Timer:
    def __init__(self):
        self.phases: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = time.perf_counter() - start


def _critical_point_summary(cp: CriticalPoint, p: Params) -> dict:
    return {
        "converged": cp.converged,
        "primal_grad_norm": cp.primal_grad_norm,
        "tol": cp.tol,
        "iterations": cp.iterations,
        "residual_history": cp.history,
        "message": cp.message,
        "energy": eval_primal(p, cp.u0),
        "u0": cp.u0.ravel(),
    }


def _solve(cfg: ExperimentConfig, timer: Timer) -> Tuple[Params, CriticalPoint]:
    p = cfg.build_params()
    u_init = cfg.initial_field()
    with timer.phase("solve"):
        cp = newton_primal(p, u_init, cfg.solver.tol, cfg.solver.max_iter)
    return p, cp


def _eps_list(cfg: ExperimentConfig):
    return tuple(cfg.sweep.eps_list) if cfg.sweep.eps_list is not None else DEFAULT_EPS_LIST


def _new_report(cfg: ExperimentConfig, command: str) -> dict:
    return {"command": command, "config": cfg.to_dict()}


def cmd_solve(cfg: ExperimentConfig) -> Tuple[dict, int, dict]:
    """Newton solve only.  Returns ``(report, exit_status, fields)``."""
    timer = Timer()
    report = _new_report(cfg, "solve")
    p, cp = _solve(cfg, timer)
    report["critical_point"] = _critical_point_summary(cp, p)
    report["timing"] = timer.phases
    status = EXIT_OK if cp.converged else EXIT_NO_CONVERGENCE
    report["status"] = status
    return report, status, {"u0": (cp.u0, p.grid)}


def cmd_verify(cfg: ExperimentConfig) -> Tuple[dict, int, dict]:
    timer = Timer()
    report = _new_report(cfg, "verify")
    p, cp = _solve(cfg, timer)
    report["critical_point"] = _critical_point_summary(cp, p)
    fields = {"u0": (cp.u0, p.grid)}
    if not cp.converged:
        report["timing"] = timer.phases
        report["status"] = EXIT_NO_CONVERGENCE
        return report, EXIT_NO_CONVERGENCE, fields
    if p.grid.size > DENSE_LIMIT:
        raise ConfigError("grid.interior_counts", f"verification needs at most {DENSE_LIMIT} unknowns")
    with timer.phase("verify"):
        thm = verify_theorem(p, cp, eps_list=_eps_list(cfg), seed=cfg.solver.seed)
    report["theorem"] = thm
    if cfg.scan.n_directions is not None or cfg.scan.t_max is not None:
        with timer.phase("scan"):
            report["scan"] = _scan(cfg, p, cp)
    if not thm.hypothesis_satisfied:
        status = EXIT_NOT_APPLICABLE
        report["verdict"] = "not applicable: primal Hessian is not positive definite at u0"
    elif thm.passed:
        status = EXIT_OK
        report["verdict"] = "verified"
    else:
        status = EXIT_FAILED
        failed = sorted(k for k, v in thm.clauses.items() if not v)
        report["verdict"] = "failed: " + ", ".join(failed)
    report["timing"] = timer.phases
    report["status"] = status
    return report, status, fields


def _scan(cfg: ExperimentConfig, p: Params, cp: CriticalPoint):
    n_dir = cfg.scan.n_directions or DEFAULT_SCAN["n_directions"]
    t_max = cfg.scan.t_max if cfg.scan.t_max is not None else DEFAULT_SCAN["t_max"]
    return concavity_radius(p, cp, n_dir, t_max, cfg.solver.seed)


def cmd_scan(cfg: ExperimentConfig) -> Tuple[dict, int, dict]:
    timer = Timer()
    report = _new_report(cfg, "scan")
    p, cp = _solve(cfg, timer)
    report["critical_point"] = _critical_point_summary(cp, p)
    status = EXIT_OK
    if cp.converged:
        with timer.phase("scan"):
            report["scan"] = _scan(cfg, p, cp)
    else:
        status = EXIT_NO_CONVERGENCE
    report["timing"] = timer.phases
    report["status"] = status
    return report, status, {"u0": (cp.u0, p.grid)}


def cmd_sweep(cfg: ExperimentConfig) -> Tuple[dict, int, dict, str]:
    """Epsilon sweep at the Newton critical point; also returns the CSV text."""
    timer = Timer()
    report = _new_report(cfg, "sweep")
    p, cp = _solve(cfg, timer)
    report["critical_point"] = _critical_point_summary(cp, p)
    csv_text = format_csv([], SWEEP_COLUMNS)
    status = EXIT_OK
    if cp.converged:
        with timer.phase("sweep"):
            rows = epsilon_sweep(p, cp, _eps_list(cfg))
        report["sweep"] = rows
        report["scaling_ratio_errors"] = scaling_ratio_errors(rows)
        csv_text = format_csv([vars(r) for r in rows], SWEEP_COLUMNS)
    else:
        status = EXIT_NO_CONVERGENCE
    report["timing"] = timer.phases
    report["status"] = status
    return report, status, {"u0": (cp.u0, p.grid)}, csv_text


def conjugate_params(cfg: Optional[ExperimentConfig]) -> Params:
    if cfg is None:
        return Params(GridSpec((1,)), gamma=1.0, alpha=1.0, beta=9.0, epsilon=0.5, K=10.0)
    return cfg.build_params()


def cmd_conjugate_check(cfg: Optional[ExperimentConfig] = None, args: Sequence[float] = None
                        ) -> Tuple[dict, int, str]:
    if args is None:
        args = np.union1d(np.linspace(-10.0, 10.0, 50), [-1.0, 0.0, 1.0])
    p = conjugate_params(cfg)
    timer = Timer()
    with timer.phase("conjugates"):
        rows = conjugate_table(p, args)
    report = {
        "command": "conjugate-check",
        "params": {"gamma": p.gamma, "alpha": p.alpha, "beta": p.beta, "epsilon": p.epsilon, "K": p.K},
        "max_abs_error": max(r["abs_error"] for r in rows),
        "max_abs_error_by_term": {
            t: max(r["abs_error"] for r in rows if r["term"] == t) for t in dict.fromkeys(r["term"] for r in rows)
        },
        "rows": rows,
        "timing": timer.phases,
        "status": EXIT_OK,
    }
    return report, EXIT_OK, format_csv(rows, CONJUGATE_COLUMNS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glpd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "conjugate-check", "sweep", "scan"):
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?" if name == "conjugate-check" else None,
                        help="experiment config (TOML)")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, help="override solver.seed")
        sp.add_argument("--eps", help="comma-separated epsilon list, overrides sweep.eps_list")
        sp.add_argument("--quiet", action="store_true")
    return parser


def _parse_eps(text: str):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError("--eps", str(exc)) from exc
    if not values:
        raise ConfigError("--eps", "empty list")
    return values


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else None
        if cfg is not None:
            if args.seed is not None:
                cfg.solver.seed = args.seed
            if args.eps is not None:
                cfg.sweep.eps_list = _parse_eps(args.eps)
            cfg.validate()
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "conjugate-check":
            report, status, csv_text = cmd_conjugate_check(cfg)
            (out / "conjugates.csv").write_text(csv_text)
        elif args.command == "sweep":
            report, status, fields, csv_text = cmd_sweep(cfg)
            (out / "sweep.csv").write_text(csv_text)
        else:
            command = {"solve": cmd_solve, "verify": cmd_verify, "scan": cmd_scan}[args.command]
            report, status, fields = command(cfg)
        if args.command != "conjugate-check":
            for name, (u, grid) in fields.items():
                write_field(out / f"{name}.field", u, grid)
        write_report(out / "report.json", report)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "report.json", {"command": args.command, "status": EXIT_CONFIG,
                                           "error": str(exc), "error_path": exc.path})
        return EXIT_CONFIG
    if not args.quiet:
        print(_summary(args.command, report))
    return status


def _summary(command: str, report: dict) -> str:
    parts = [f"{command}: status {report['status']}"]
    cp = report.get("critical_point")
    if cp:
        parts.append(f"converged={cp['converged']} residual={cp['primal_grad_norm']:.3e} "
                     f"iterations={cp['iterations']}")
    if "verdict" in report:
        parts.append(report["verdict"])
    if "max_abs_error" in report:
        parts.append(f"max |closed - oracle| = {report['max_abs_error']:.3e}")
    return "; ".join(parts)


if __name__ == "__main__":
    sys.exit(main())
