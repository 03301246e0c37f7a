"""Primal energy, reduced dual energy, and their first and second variations.

All gradients are taken with respect to the quadrature-weighted inner product
``GridSpec.inner``, so the gradient of the primal energy is exactly the
strong-form Euler-Lagrange residual ``-gamma*lap(u) + alpha*u**3 - beta*u - f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from glpd.mesh import GridSpec

DENSE_LIMIT = 2048


@dataclass(frozen=True)
class Params:
    """Coefficients of the double-well energy and its dual.

    ``K`` defaults to ``beta + epsilon + 1`` and ``f`` to the zero field.
    """

    grid: GridSpec
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    epsilon: float = 1e-2
    K: Optional[float] = None
    f: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta", "epsilon"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a finite positive number, got {value}")
            object.__setattr__(self, name, value)
        K = self.beta + self.epsilon + 1.0 if self.K is None else float(self.K)
        if not K > self.beta + self.epsilon:
            raise ValueError(f"K must exceed beta + epsilon = {self.beta + self.epsilon}, got {K}")
        object.__setattr__(self, "K", K)
        f = self.grid.zeros() if self.f is None else self.grid.check_scalar(self.f, "f").copy()
        if not np.all(np.isfinite(f)):
            raise ValueError("f must be finite")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    def with_epsilon(self, epsilon: float) -> "Params":
        """Same problem at another epsilon, with ``K`` re-derived as ``beta + epsilon + 1``."""
        return replace(self, epsilon=epsilon, K=None)


class SymmetricOperator:
    """Self-adjoint operator on scalar fields of a grid.

    ``apply`` acts on fields of shape ``grid.shape``; ``matvec`` on flattened
    vectors.  ``dense()`` assembles the matrix for at most ``DENSE_LIMIT``
    unknowns and symmetrizes it so it equals its transpose bit for bit.
    """

    def __init__(self, grid: GridSpec, apply: Callable[[np.ndarray], np.ndarray],
                 assemble: Callable[[], np.ndarray]):
        self.grid = grid
        self._apply = apply
        self._assemble = assemble

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.grid.size, self.grid.size)

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self._apply(self.grid.check_scalar(w, "direction"))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.apply(np.asarray(x, dtype=float).reshape(self.grid.shape)).ravel()

    def dense(self) -> np.ndarray:
        if self.grid.size > DENSE_LIMIT:
            raise ValueError(
                f"dense assembly refused for {self.grid.size} unknowns (limit {DENSE_LIMIT})"
            )
        m = np.asarray(self._assemble(), dtype=float)
        return 0.5 * (m + m.T)


def _lap_dense(grid: GridSpec) -> np.ndarray:
    return grid.laplacian_matrix.toarray()


def eval_primal(p: Params, u: np.ndarray) -> float:
    g = p.grid
    u = g.check_scalar(u)
    return (
        0.5 * p.gamma * g.dirichlet_energy(u)
        + 0.25 * p.alpha * g.integrate(u**4)
        - 0.5 * p.beta * g.inner(u, u)
        - g.inner(u, p.f)
    )


def grad_primal(p: Params, u: np.ndarray) -> np.ndarray:
    u = p.grid.check_scalar(u)
    return -p.gamma * p.grid.laplacian(u) + p.alpha * u**3 - p.beta * u - p.f


def hess_primal(p: Params, u: np.ndarray) -> SymmetricOperator:
    """Second variation ``-gamma*lap + 3*alpha*u**2 - beta``."""
    g = p.grid
    u = g.check_scalar(u).copy()
    diag = 3.0 * p.alpha * u**2 - p.beta

    def apply(w):
        return -p.gamma * g.laplacian(w) + diag * w

    def assemble():
        return -p.gamma * _lap_dense(g) + np.diag(diag.ravel())

    return SymmetricOperator(g, apply, assemble)


def hess_primal_sparse(p: Params, u: np.ndarray) -> sp.csr_matrix:
    u = p.grid.check_scalar(u)
    diag = (3.0 * p.alpha * u**2 - p.beta).ravel()
    return sp.csr_matrix(-p.gamma * p.grid.laplacian_matrix + sp.diags(diag))


def residual_shifted(p: Params, u: np.ndarray) -> np.ndarray:
    """``-gamma*lap(u) + alpha*u**3 - (beta+epsilon)*u - f``; equals ``-epsilon*u`` at critical points."""
    u = p.grid.check_scalar(u)
    return -p.gamma * p.grid.laplacian(u) + p.alpha * u**3 - (p.beta + p.epsilon) * u - p.f


def shifted_operator(p: Params, u: np.ndarray) -> SymmetricOperator:
    """Linearization of :func:`residual_shifted`, ``-gamma*lap + 3*alpha*u**2 - (beta+epsilon)``."""
    g = p.grid
    u = g.check_scalar(u).copy()
    diag = 3.0 * p.alpha * u**2 - (p.beta + p.epsilon)

    def apply(w):
        return -p.gamma * g.laplacian(w) + diag * w

    def assemble():
        return -p.gamma * _lap_dense(g) + np.diag(diag.ravel())

    return SymmetricOperator(g, apply, assemble)


def shifted_operator_norm(p: Params, u: np.ndarray) -> float:
    """Infinity-norm (max absolute row sum) of :func:`shifted_operator`."""
    u = p.grid.check_scalar(u)
    diag = (3.0 * p.alpha * u**2 - (p.beta + p.epsilon)).ravel()
    m = -p.gamma * p.grid.laplacian_matrix + sp.diags(diag)
    return float(np.max(np.asarray(abs(m).sum(axis=1)).ravel()))


def eval_dual(p: Params, uhat: np.ndarray) -> float:
    g = p.grid
    uhat = g.check_scalar(uhat)
    r = residual_shifted(p, uhat)
    return (
        -0.5 * p.gamma * g.dirichlet_energy(uhat)
        - 0.75 * p.alpha * g.integrate(uhat**4)
        + 0.5 * (p.beta + p.epsilon) * g.inner(uhat, uhat)
        - g.inner(r, r) / (2.0 * p.epsilon)
    )


def grad_dual(p: Params, uhat: np.ndarray) -> np.ndarray:
    """Gradient of the reduced dual energy.

    Expanding ``gamma*lap(u) - 3*alpha*u**3 + (beta+eps)*u - A(u) r(u) / eps``
    with ``r(u) = grad_primal(u) - eps*u`` collapses it to
    ``-A(u) grad_primal(u) / eps``, where ``A`` is :func:`shifted_operator`.
    The collapsed form is used: it avoids cancelling two O(1/h^2) terms and
    makes the dual gradient vanish exactly where the primal one does.
    """
    uhat = p.grid.check_scalar(uhat)
    return -shifted_operator(p, uhat).apply(grad_primal(p, uhat)) / p.epsilon


def hess_dual(p: Params, uhat: np.ndarray) -> SymmetricOperator:
    """Second variation of the reduced dual energy at an arbitrary point.

    ``gamma*lap - 9*alpha*u**2 + (beta+eps) - (A**2 + 6*alpha*diag(u*r)) / eps``
    """
    g = p.grid
    uhat = g.check_scalar(uhat).copy()
    A = shifted_operator(p, uhat)
    r = residual_shifted(p, uhat)
    local = -9.0 * p.alpha * uhat**2 + (p.beta + p.epsilon) - 6.0 * p.alpha * uhat * r / p.epsilon

    def apply(w):
        return p.gamma * g.laplacian(w) + local * w - A.apply(A.apply(w)) / p.epsilon

    def assemble():
        a = A.dense()
        return p.gamma * _lap_dense(g) + np.diag(local.ravel()) - (a @ a) / p.epsilon

    return SymmetricOperator(g, apply, assemble)


def dual_hessian_formula(H: np.ndarray, epsilon: float) -> np.ndarray:
    """``-(H - eps I) - (H - eps I)^2 / eps`` for a dense symmetric ``H``."""
    s = H - epsilon * np.eye(H.shape[0])
    m = -s - (s @ s) / epsilon
    return 0.5 * (m + m.T)


def dual_eigenvalue_map(mu, epsilon: float):
    """Image of primal Hessian eigenvalues under the dual Hessian identity."""
    s = np.asarray(mu, dtype=float) - epsilon
    return -s - s * s / epsilon
