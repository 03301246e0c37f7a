"""Fenchel conjugates of the energy's pieces and the unreduced dual functional.

The primal energy splits as ``G0(grad u) + G1(u) + G2(u) + G3(u) - F(u) - <u, f>``
with

    G0(v) = gamma/2 |v|^2          G1(u) = alpha/4 u^4
    G2(u) = (K-beta-eps)/2 u^2     G3(u) = eps/2 u^2        F(u) = K/2 u^2

(all integrated with the mesh quadrature).  Each conjugate below is the
closed form of ``sup_y <y, s> - G(y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Sequence

import numpy as np

from glpd.energy import Params, residual_shifted
from glpd.mesh import VectorField


def g0(p: Params, v: Sequence[np.ndarray]) -> float:
    return 0.5 * p.gamma * p.grid.inner_edges(v, v)


def g1(p: Params, u: np.ndarray) -> float:
    return 0.25 * p.alpha * p.grid.integrate(np.asarray(u) ** 4)


def g2(p: Params, u: np.ndarray) -> float:
    return 0.5 * (p.K - p.beta - p.epsilon) * p.grid.inner(u, u)


def g3(p: Params, u: np.ndarray) -> float:
    return 0.5 * p.epsilon * p.grid.inner(u, u)


def f_quad(p: Params, u: np.ndarray) -> float:
    return 0.5 * p.K * p.grid.inner(u, u)


def g0_star(p: Params, w: Sequence[np.ndarray]) -> float:
    return p.grid.inner_edges(w, w) / (2.0 * p.gamma)


def g1_star(p: Params, s: np.ndarray) -> float:
    s = p.grid.check_scalar(s)
    return 0.75 / np.cbrt(p.alpha) * p.grid.integrate(np.abs(s) ** (4.0 / 3.0))


def g2_star(p: Params, s: np.ndarray) -> float:
    return p.grid.inner(s, s) / (2.0 * (p.K - p.beta - p.epsilon))


def g3_star(p: Params, s: np.ndarray) -> float:
    return p.grid.inner(s, s) / (2.0 * p.epsilon)


def f_star(p: Params, s: np.ndarray) -> float:
    return p.grid.inner(s, s) / (2.0 * p.K)


@dataclass(frozen=True)
class DualPoint:
    """Dual variables ``v* = (v0, v1, v2)`` and ``z* = (z0, z1, z2)``.

    ``uhat`` is the field the point was built from; admissibility means
    ``-div z0 + z1 + z2 = K * uhat``.
    """

    uhat: np.ndarray
    v0: VectorField
    v1: np.ndarray
    v2: np.ndarray
    z0: VectorField
    z1: np.ndarray
    z2: np.ndarray

    def admissibility_residual(self, p: Params) -> float:
        lhs = -p.grid.divergence(self.z0) + self.z1 + self.z2
        return float(np.max(np.abs(lhs - p.K * self.uhat)))

    def is_admissible(self, p: Params) -> bool:
        scale = max(1.0, p.K * float(np.max(np.abs(self.uhat))))
        return self.admissibility_residual(p) <= 1e-12 * scale


def reconstruct_dual_point(p: Params, uhat: np.ndarray, z0=None, z1=None) -> DualPoint:
    """Dual point attached to ``uhat`` by the stationarity relations in ``z*``.

    ``z0`` and ``z1`` are free (defaults ``0`` and ``K * uhat``); ``z2`` is
    solved from the admissibility constraint and then

        v0 = -z0 + gamma grad(uhat)
        v1 = -z1 + alpha uhat^3
        v2 = -z2 + (K - beta - eps) uhat
    """
    grid = p.grid
    uhat = grid.check_scalar(uhat, "uhat")
    z0 = grid.zero_edges() if z0 is None else grid.check_vector(z0, "z0")
    z1 = p.K * uhat if z1 is None else grid.check_scalar(z1, "z1")
    z2 = p.K * uhat + grid.divergence(z0) - z1
    grad = grid.gradient(uhat)
    v0 = tuple(-za + p.gamma * ga for za, ga in zip(z0, grad))
    v1 = -z1 + p.alpha * uhat**3
    v2 = -z2 + (p.K - p.beta - p.epsilon) * uhat
    return DualPoint(uhat, v0, v1, v2, z0, z1, z2)


def _arguments(p: Params, d: DualPoint):
    """Arguments of the five conjugates, in the order G0*, G1*, G2*, G3*, F*."""
    div = p.grid.divergence
    return (
        tuple(a + b for a, b in zip(d.v0, d.z0)),
        d.v1 + d.z1,
        d.v2 + d.z2,
        div(d.v0) - d.v1 - d.v2 + p.f,
        -div(d.z0) + d.z1 + d.z2,
    )


def eval_Jstar(p: Params, d: DualPoint) -> float:
    """``-G0* - G1* - G2* - G3* + F*`` evaluated at an admissible dual point."""
    if not d.is_admissible(p):
        raise ValueError(
            f"dual point is not admissible (residual {d.admissibility_residual(p):.3e})"
        )
    w0, s1, s2, s3, sf = _arguments(p, d)
    return -g0_star(p, w0) - g1_star(p, s1) - g2_star(p, s2) - g3_star(p, s3) + f_star(p, sf)


def scalar_conjugate_oracle(integrand: Callable[[np.ndarray], np.ndarray], s: float,
                            t_lo: float = -10.0, t_hi: float = 10.0, step: float = 1e-4) -> float:
    """Brute-force ``max_t s*t - integrand(t)`` over a uniform sample of ``[t_lo, t_hi]``."""
    if not t_lo < t_hi or step <= 0:
        raise ValueError("need t_lo < t_hi and step > 0")
    t = np.linspace(t_lo, t_hi, int(round((t_hi - t_lo) / step)) + 1)
    return float(np.max(s * t - integrand(t)))


def pointwise_conjugates(p: Params) -> Dict[str, tuple]:
    """Scalar integrands and their closed-form conjugates, keyed by term name."""
    c2 = p.K - p.beta - p.epsilon
    return {
        "G0": (lambda t: 0.5 * p.gamma * t * t, lambda s: s * s / (2 * p.gamma)),
        "G1": (lambda t: 0.25 * p.alpha * t**4, lambda s: 0.75 / np.cbrt(p.alpha) * np.abs(s) ** (4 / 3)),
        "G2": (lambda t: 0.5 * c2 * t * t, lambda s: s * s / (2 * c2)),
        "G3": (lambda t: 0.5 * p.epsilon * t * t, lambda s: s * s / (2 * p.epsilon)),
        "F": (lambda t: 0.5 * p.K * t * t, lambda s: s * s / (2 * p.K)),
    }


@dataclass
class FenchelYoungReport:
    equalities: Dict[str, bool]
    residuals: Dict[str, float]
    inequalities: Dict[str, bool]
    tol: float

    @property
    def passed(self) -> bool:
        return all(self.equalities.values()) and all(self.inequalities.values())


def fenchel_young_check(p: Params, uhat: np.ndarray, d: DualPoint, n_random: int = 50,
                        seed: int = 0, tol: float = 1e-10) -> FenchelYoungReport:
    """Fenchel-Young equalities at ``uhat`` and inequalities at random pairs.

    For each term the primal argument is ``uhat`` (``grad uhat`` for G0) and
    the dual argument is the one appearing in ``eval_Jstar``.  The G3 pairing
    is exact only when ``uhat`` is a primal critical point, because its
    dual argument equals ``-residual_shifted(uhat)``, which is ``eps * uhat``
    there and nothing in particular elsewhere.

    The inequality half draws ``n_random`` pairs ``(y, s)`` around the
    reconstructed ones and checks ``conj(s) >= <y, s> - G(y)`` for every term.
    """
    grid = p.grid
    uhat = grid.check_scalar(uhat, "uhat")
    grad = grid.gradient(uhat)
    w0, s1, s2, s3, sf = _arguments(p, d)
    terms = {
        "G0": (g0_star, g0, grad, w0, grid.inner_edges),
        "G1": (g1_star, g1, uhat, s1, grid.inner),
        "G2": (g2_star, g2, uhat, s2, grid.inner),
        "G3": (g3_star, g3, uhat, s3, grid.inner),
        "F": (f_star, f_quad, uhat, sf, grid.inner),
    }
    rng = np.random.default_rng(seed)
    equalities, residuals, inequalities = {}, {}, {}
    for name, (conj, prim, y, s, pair) in terms.items():
        lhs = conj(p, s)
        rhs = pair(y, s) - prim(p, y)
        residuals[name] = float(abs(lhs - rhs))
        equalities[name] = bool(residuals[name] <= tol * max(1.0, abs(lhs)))
        ok = True
        for _ in range(n_random):
            ys = _perturb(y, rng)
            ss = _perturb(s, rng)
            gap = conj(p, ss) - (pair(ys, ss) - prim(p, ys))
            ok &= gap >= -1e-12 * max(1.0, abs(conj(p, ss)))
        inequalities[name] = bool(ok)
    return FenchelYoungReport(equalities, residuals, inequalities, tol)


def _perturb(x, rng):
    if isinstance(x, tuple):
        return tuple(_perturb(c, rng) for c in x)
    scale = 1.0 + float(np.max(np.abs(x)))
    return x + scale * rng.standard_normal(x.shape)


def dual_argument_identity(p: Params, d: DualPoint) -> np.ndarray:
    """``div v0 - v1 - v2 + f + residual_shifted(uhat)``; identically zero on reconstructed points."""
    return p.grid.divergence(d.v0) - d.v1 - d.v2 + p.f + residual_shifted(p, d.uhat)


def _oracle_interior(integrand, s: float, half_width: float = 10.0, step: float = 1e-4) -> float:
    """Brute-force sup, widening the window until the maximizer is interior."""
    while True:
        t = np.linspace(-half_width, half_width, int(round(2 * half_width / step)) + 1)
        vals = s * t - integrand(t)
        k = int(np.argmax(vals))
        if 0 < k < len(t) - 1:
            return float(vals[k])
        half_width *= 2.0


def conjugate_table(p: Params, args: Sequence[float], step: float = 1e-4) -> list:
    """Closed-form pointwise conjugates against the brute-force oracle, one row per (term, s)."""
    rows = []
    for name, (integrand, closed) in pointwise_conjugates(p).items():
        for s in args:
            c = float(closed(float(s)))
            o = _oracle_interior(integrand, float(s), step=step)
            rows.append({"term": name, "s": float(s), "closed": c, "oracle": o, "abs_error": abs(c - o)})
    return rows
