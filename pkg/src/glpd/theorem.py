"""Numerical verification of the local primal-dual correspondence at a critical point.

Given a converged critical point ``u0`` of the primal energy, :func:`verify_theorem`
measures

(a) the primal gradient,              (e) the dual Hessian identity,
(b) positivity of the primal Hessian, (f) negativity of the dual Hessian,
(c) the dual gradient,                (g) the 1/eps growth of the dual curvature,
(d) the primal-dual gap,              (h) sampled local min/max behaviour,

and records each against a tolerance stored in the report.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from glpd.energy import (
    DENSE_LIMIT,
    Params,
    dual_eigenvalue_map,
    dual_hessian_formula,
    eval_dual,
    eval_primal,
    grad_dual,
    grad_primal,
    hess_dual,
    hess_primal,
    shifted_operator_norm,
)
from glpd.solve import CriticalPoint, eigenvalues

DEFAULT_EPS_LIST = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class Tolerances:
    gap_rel: float = 1e-10
    hessian_identity_rel: float = 1e-8
    spectral_map_rel: float = 1e-8
    sweep_rel: float = 0.15
    perturbation_radius: float = 1e-3
    perturbation_slack: float = 1e-12
    n_perturbations: int = 100


@dataclass
class SweepRow:
    epsilon: float
    gap: float
    dual_grad_norm: float
    min_eig_dual: float
    max_eig_dual: float
    predicted_min_eig_dual: float


@dataclass
class TheoremReport:
    epsilon: float
    primal_value: float
    dual_value: float
    primal_grad_norm: float
    primal_grad_tol: float
    min_eig_primal_hessian: float
    max_eig_primal_hessian: float
    dual_grad_norm: float
    dual_grad_tol: float
    duality_gap: float
    gap_tol: float
    hessian_identity_residual: float
    hessian_identity_tol: float
    spectral_map_residual: float
    max_eig_dual_hessian: float
    min_eig_dual_hessian: float
    epsilon_scaling: List[SweepRow]
    sweep_max_rel_error: float
    perturbation_primal_violations: int
    perturbation_dual_violations: int
    n_perturbations: int
    hypothesis_satisfied: bool
    small_epsilon_regime: bool
    clauses: Dict[str, bool]
    tolerances: Dict[str, float]
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _require_dense(p: Params):
    if p.grid.size > DENSE_LIMIT:
        raise ValueError(f"grid has {p.grid.size} unknowns; dense checks need <= {DENSE_LIMIT}")


def _unit_directions(shape, n: int, rng) -> List[np.ndarray]:
    out = []
    for _ in range(n):
        d = rng.standard_normal(shape)
        out.append(d / np.linalg.norm(d))
    return out


def epsilon_sweep(p: Params, cp: CriticalPoint, eps_list: Sequence[float] = DEFAULT_EPS_LIST
                  ) -> List[SweepRow]:
    """Gap, dual gradient and dual curvature at ``cp.u0`` for each epsilon.

    ``K`` is re-derived as ``beta + eps + 1`` at every point of the sweep.
    """
    _require_dense(p)
    u0 = cp.u0
    mu = eigenvalues(hess_primal(p, u0))
    J = eval_primal(p, u0)
    rows = []
    for eps in eps_list:
        q = p.with_epsilon(eps)
        w = eigenvalues(hess_dual(q, u0))
        rows.append(SweepRow(
            epsilon=float(eps),
            gap=float(J - eval_dual(q, u0)),
            dual_grad_norm=float(np.max(np.abs(grad_dual(q, u0)))),
            min_eig_dual=float(w[0]),
            max_eig_dual=float(w[-1]),
            predicted_min_eig_dual=float(-(mu[-1] - eps) ** 2 / eps),
        ))
    return rows


def scaling_ratio_errors(rows: Sequence[SweepRow]) -> List[float]:
    """Relative mismatch between successive ``min_eig_dual`` ratios and the inverse epsilon ratios."""
    errs = []
    for a, b in zip(rows, rows[1:]):
        expected = a.epsilon / b.epsilon
        errs.append(abs(b.min_eig_dual / a.min_eig_dual - expected) / expected)
    return errs


def verify_theorem(p: Params, cp: CriticalPoint, tolerances: Optional[Tolerances] = None,
                   eps_list: Sequence[float] = DEFAULT_EPS_LIST, seed: int = 0) -> TheoremReport:
    if not cp.converged:
        raise ValueError("critical point did not converge; refusing to verify")
    _require_dense(p)
    tol = tolerances or Tolerances()
    grid = p.grid
    u0 = cp.u0
    eps = p.epsilon

    g = grad_primal(p, u0)
    primal_grad_norm = float(np.max(np.abs(g)))
    H = hess_primal(p, u0).dense()
    mu = eigenvalues(H)

    dual_grad_norm = float(np.max(np.abs(grad_dual(p, u0))))
    dual_grad_tol = shifted_operator_norm(p, u0) / eps * cp.tol

    J = eval_primal(p, u0)
    Jd = eval_dual(p, u0)
    gap = J - Jd
    gap_tol = tol.gap_rel * (1.0 + abs(J))

    Hd = hess_dual(p, u0).dense()
    h_scale = float(np.max(np.abs(H)))
    identity_residual = float(np.max(np.abs(Hd - dual_hessian_formula(H, eps))))
    identity_tol = tol.hessian_identity_rel * h_scale
    nu = eigenvalues(Hd)
    spectral_map_residual = float(np.max(np.abs(np.sort(dual_eigenvalue_map(mu, eps)) - nu)))

    rows = epsilon_sweep(p, cp, eps_list)
    sweep_err = max(
        (abs(r.min_eig_dual - r.predicted_min_eig_dual) / abs(r.predicted_min_eig_dual) for r in rows),
        default=0.0,
    )

    rng = np.random.default_rng(seed)
    bad_primal = bad_dual = 0
    for d in _unit_directions(grid.shape, tol.n_perturbations, rng):
        du = u0 + tol.perturbation_radius * d
        bad_primal += eval_primal(p, du) < J - tol.perturbation_slack
        bad_dual += eval_dual(p, du) > Jd + tol.perturbation_slack

    clauses = {
        "primal_stationary": primal_grad_norm <= cp.tol,
        "primal_hessian_positive": bool(mu[0] > 0),
        "dual_stationary": dual_grad_norm <= dual_grad_tol,
        "zero_gap": abs(gap) <= gap_tol,
        "hessian_identity": identity_residual <= identity_tol,
        "spectral_map": spectral_map_residual <= tol.spectral_map_rel * h_scale,
        "dual_hessian_negative": bool(nu[-1] < 0),
        "epsilon_scaling": sweep_err <= tol.sweep_rel,
        "local_correspondence": bad_primal == 0 and bad_dual == 0,
    }
    return TheoremReport(
        epsilon=eps,
        primal_value=J,
        dual_value=Jd,
        primal_grad_norm=primal_grad_norm,
        primal_grad_tol=cp.tol,
        min_eig_primal_hessian=float(mu[0]),
        max_eig_primal_hessian=float(mu[-1]),
        dual_grad_norm=dual_grad_norm,
        dual_grad_tol=dual_grad_tol,
        duality_gap=gap,
        gap_tol=gap_tol,
        hessian_identity_residual=identity_residual,
        hessian_identity_tol=identity_tol,
        spectral_map_residual=spectral_map_residual,
        max_eig_dual_hessian=float(nu[-1]),
        min_eig_dual_hessian=float(nu[0]),
        epsilon_scaling=rows,
        sweep_max_rel_error=float(sweep_err),
        perturbation_primal_violations=int(bad_primal),
        perturbation_dual_violations=int(bad_dual),
        n_perturbations=tol.n_perturbations,
        hypothesis_satisfied=bool(mu[0] > 0),
        small_epsilon_regime=bool(eps <= mu[0] / 2),
        clauses={k: bool(v) for k, v in clauses.items()},
        tolerances=asdict(tol),
        passed=all(clauses.values()),
    )


@dataclass
class ConcavityScan:
    directions: int
    t_max: float
    t_per_direction: List[float] = field(default_factory=list)
    primal_convexity_t: List[float] = field(default_factory=list)

    @property
    def min_dual_radius(self) -> float:
        return min(self.t_per_direction, default=0.0)

    @property
    def min_primal_radius(self) -> float:
        return min(self.primal_convexity_t, default=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["min_dual_radius"] = self.min_dual_radius
        d["min_primal_radius"] = self.min_primal_radius
        return d


def _largest_t(pred, t_max: float, steps: int = 20, n_scan: int = 32) -> float:
    """Largest ``t`` in ``[0, t_max]`` such that ``pred`` holds on all of ``[0, t]``.

    A uniform scan of ``n_scan`` points locates the first failure, then
    ``steps`` bisection steps refine it.
    """
    if t_max <= 0 or not pred(0.0):
        return 0.0
    lo = 0.0
    for t in np.linspace(0.0, t_max, n_scan + 1)[1:]:
        if not pred(t):
            hi = t
            break
        lo = t
    else:
        return t_max
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def concavity_radius(p: Params, cp: CriticalPoint, n_directions: int = 8, t_max: float = 1.0,
                     seed: int = 0, directions: Optional[Sequence[np.ndarray]] = None) -> ConcavityScan:
    """Measure how far the dual Hessian stays negative semidefinite (and the
    primal Hessian positive semidefinite) along random unit rays from ``u0``.

    Directions are unit vectors in the Euclidean norm of the nodal values;
    each radius comes from a coarse scan of ``[0, t_max]`` refined by 20
    bisection steps.
    """
    _require_dense(p)
    u0 = cp.u0
    if directions is None:
        directions = _unit_directions(p.grid.shape, n_directions, np.random.default_rng(seed))
    scan = ConcavityScan(len(directions), float(t_max))
    for d in directions:
        d = p.grid.check_scalar(d, "direction")

        def dual_ok(t):
            return eigenvalues(hess_dual(p, u0 + t * d))[-1] <= 0

        def primal_ok(t):
            return eigenvalues(hess_primal(p, u0 + t * d))[0] >= 0

        scan.t_per_direction.append(_largest_t(dual_ok, t_max))
        scan.primal_convexity_t.append(_largest_t(primal_ok, t_max))
    return scan
