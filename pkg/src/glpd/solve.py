"""Solvers: Newton for the primal critical point, line-search ascent for the dual,
extreme eigenvalues of second variations, and a brute-force minimum for tiny grids."""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from glpd.energy import (
    DENSE_LIMIT,
    Params,
    SymmetricOperator,
    eval_dual,
    eval_primal,
    grad_dual,
    grad_primal,
    hess_dual,
    hess_primal,
    hess_primal_sparse,
)

log = logging.getLogger(__name__)

DAMPING_FLOOR = 1e-4
ARMIJO_SLOPE = 1e-4
ARMIJO_SHRINK = 0.5
MAX_HALVINGS = 60
INIT_RANGE = 3.0
COARSE_STEP = 0.25


@dataclass
class CriticalPoint:
    u0: np.ndarray
    primal_grad_norm: float
    converged: bool
    tol: float
    iterations: int = 0
    history: List[float] = field(default_factory=list)
    message: str = ""

    def __post_init__(self):
        if self.converged and not self.primal_grad_norm <= self.tol:
            raise ValueError("converged critical point must satisfy its tolerance")


def _sup(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def newton_primal(p: Params, u_init: np.ndarray, tol: float = 1e-12,
                  max_iter: int = 50) -> CriticalPoint:
    """Damped Newton iteration on ``grad_primal(u) = 0``.

    Each step solves ``H(u) d = -g(u)`` with the sparse primal Hessian.  If
    ``d`` increases the energy (possible when ``H`` is indefinite) it is
    reversed, which steers the iteration toward minimizers rather than
    saddles.  The step is halved until the sup-norm residual decreases; a
    step fraction below ``DAMPING_FLOOR`` ends the run unconverged.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    u = p.grid.check_scalar(u_init, "u_init").copy()
    g = grad_primal(p, u)
    res = _sup(g)
    history = [res]
    for it in range(max_iter + 1):
        if res <= tol:
            return CriticalPoint(u, res, True, tol, it, history, "converged")
        if it == max_iter:
            break
        H = hess_primal_sparse(p, u)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                d = spla.spsolve(H.tocsc(), -g.ravel()).reshape(u.shape)
            except RuntimeError as exc:
                return CriticalPoint(u, res, False, tol, it, history, f"singular Newton system: {exc}")
        if not np.all(np.isfinite(d)):
            return CriticalPoint(u, res, False, tol, it, history, "singular Newton system")
        if np.sum(g * d) > 0:
            d = -d
        t = 1.0
        while True:
            trial = u + t * d
            g_trial = grad_primal(p, trial)
            if _sup(g_trial) < res:
                break
            t *= 0.5
            if t < DAMPING_FLOOR:
                return CriticalPoint(u, res, False, tol, it, history,
                                     f"damping floor reached at residual {res:.3e}")
        u, g = trial, g_trial
        res = _sup(g)
        history.append(res)
        log.debug("newton it=%d step=%g residual=%.3e", it + 1, t, res)
    return CriticalPoint(u, res, False, tol, max_iter, history, "max_iter reached")


@dataclass
class AscentResult:
    uhat: np.ndarray
    grad_norm: float
    converged: bool
    iterations: int
    values: List[float]
    line_search_failed: bool = False
    newton_steps: int = 0


def _negative_definite(m: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(-m)
    except np.linalg.LinAlgError:
        return False
    return True


def ascend_dual(p: Params, uhat_init: np.ndarray, tol: float = 1e-8, max_iter: int = 500,
                newton: bool = False, max_step: float = 0.1) -> AscentResult:
    """Maximize the reduced dual energy by backtracking line search.

    The default direction is the dual gradient, with the trial step taken
    from the Barzilai-Borwein quotient of the last two iterates.  With ``newton=True`` the
    Newton direction ``-Hd^{-1} grad`` replaces it whenever the dense dual
    Hessian is negative definite at the current iterate.  Steps satisfy the
    Armijo condition with slope ``ARMIJO_SLOPE`` and shrink factor
    ``ARMIJO_SHRINK``; ``MAX_HALVINGS`` failed halvings stop the run.

    The dual is only concave near a critical point and has other local
    maxima, so no step may move any node by more than
    ``max_step * max(1, ||uhat||_inf)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = p.grid
    u = grid.check_scalar(uhat_init, "uhat_init").copy()
    value = eval_dual(p, u)
    values = [value]
    step = 1.0
    newton_steps = 0
    prev = None
    for it in range(max_iter + 1):
        gd = grad_dual(p, u)
        gnorm = _sup(gd)
        if gnorm <= tol:
            return AscentResult(u, gnorm, True, it, values, newton_steps=newton_steps)
        if it == max_iter:
            break
        direction = gd
        is_newton = False
        if newton and grid.size <= DENSE_LIMIT:
            m = hess_dual(p, u).dense()
            if _negative_definite(m):
                direction = -np.linalg.solve(m, gd.ravel()).reshape(u.shape)
                is_newton = True
        slope = grid.inner(gd, direction)
        if is_newton:
            t = 1.0
        else:
            t = min(1.0, 2.0 * step)
            if prev is not None:
                s_k, y_k = u - prev[0], gd - prev[1]
                curv = -grid.inner(s_k, y_k)
                if curv > 0:
                    t = grid.inner(s_k, s_k) / curv
            prev = (u, gd)
        reach = max_step * max(1.0, _sup(u))
        t = min(t, reach / _sup(direction))
        for _ in range(MAX_HALVINGS):
            trial = u + t * direction
            trial_value = eval_dual(p, trial)
            if trial_value >= value + ARMIJO_SLOPE * t * slope:
                break
            t *= ARMIJO_SHRINK
        else:
            return AscentResult(u, gnorm, False, it, values, True, newton_steps)
        if not is_newton:
            step = t
        newton_steps += is_newton
        u, value = trial, trial_value
        values.append(value)
    return AscentResult(u, _sup(grad_dual(p, u)), False, max_iter, values, newton_steps=newton_steps)


@dataclass
class SpectrumReport:
    min_eig: float
    max_eig: float
    method: str
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True

    def __post_init__(self):
        if self.min_eig > self.max_eig:
            raise ValueError("min_eig exceeds max_eig")


Operator = Union[SymmetricOperator, np.ndarray]


def _as_matvec(op: Operator):
    if isinstance(op, SymmetricOperator):
        return op.matvec, op.shape[0]
    m = np.asarray(op, dtype=float)
    return (lambda x: m @ x), m.shape[0]


def _block_power(matvec, n: int, shift: float, tol: float, max_iter: int, rng, block: int = 8):
    """Shifted block power iteration with Rayleigh-Ritz extraction.

    Iterates on ``A - shift*I`` and returns the Ritz value of ``A`` whose
    shifted value has the largest modulus, with its residual norm.
    """
    b = min(n, block)
    X, _ = np.linalg.qr(rng.standard_normal((n, b)))
    lam, res = shift, np.inf
    for it in range(1, max_iter + 1):
        AX = np.column_stack([matvec(X[:, j]) for j in range(b)])
        T = X.T @ AX
        w, S = np.linalg.eigh(0.5 * (T + T.T))
        k = int(np.argmax(np.abs(w - shift)))
        v = X @ S[:, k]
        lam = float(w[k])
        res = float(np.linalg.norm(AX @ S[:, k] - lam * v))
        if res <= tol:
            return lam, res, it, True
        Y = AX - shift * X
        if not np.any(Y):
            return lam, res, it, False
        X, _ = np.linalg.qr(Y)
    return lam, res, max_iter, False


def spectrum(op: Operator, mode: str = "dense", tol: float = 1e-10, seed: int = 0) -> SpectrumReport:
    """Extreme eigenvalues of a symmetric operator.

    ``dense`` diagonalizes the assembled matrix.  ``iterative`` runs power
    iteration for the eigenvalue of largest modulus, then again on the
    operator shifted by that eigenvalue to reach the opposite end of the
    spectrum.  Each run stops once ``||A v - lambda v|| <= tol`` or after
    ``10 * N`` iterations, in which case ``converged`` is False.
    """
    if mode == "dense":
        m = op.dense() if isinstance(op, SymmetricOperator) else np.asarray(op, dtype=float)
        if m.shape[0] < 1:
            raise ValueError("operator dimension must be >= 1")
        w = scipy.linalg.eigvalsh(m)
        return SpectrumReport(float(w[0]), float(w[-1]), "dense")
    if mode != "iterative":
        raise ValueError(f"unknown spectrum mode {mode!r}")
    matvec, n = _as_matvec(op)
    if n < 1:
        raise ValueError("operator dimension must be >= 1")
    rng = np.random.default_rng(seed)
    budget = 10 * n
    lam1, res1, it1, ok1 = _block_power(matvec, n, 0.0, tol, budget, rng)
    lam2, res2, it2, ok2 = _block_power(matvec, n, lam1, tol, budget, rng)
    lo, hi = sorted((lam1, lam2))
    return SpectrumReport(lo, hi, "iterative", it1 + it2, max(res1, res2), ok1 and ok2)


def eigenvalues(op: Operator) -> np.ndarray:
    """Full ascending spectrum (dense)."""
    m = op.dense() if isinstance(op, SymmetricOperator) else np.asarray(op, dtype=float)
    return scipy.linalg.eigvalsh(m)


def _descent_newton(p: Params, u: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Energy-decreasing Newton: shifted Hessian plus Armijo backtracking on J."""
    value = eval_primal(p, u)
    for _ in range(max_iter):
        g = grad_primal(p, u)
        if _sup(g) <= tol:
            break
        H = hess_primal(p, u).dense()
        shift = 0.0
        while True:
            try:
                c = scipy.linalg.cho_factor(H + shift * np.eye(H.shape[0]))
                break
            except np.linalg.LinAlgError:
                shift = max(2.0 * shift, 1e-3 * (1.0 + np.max(np.abs(H))))
        d = -scipy.linalg.cho_solve(c, g.ravel()).reshape(u.shape)
        slope = p.grid.inner(g, d)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            trial = u + t * d
            trial_value = eval_primal(p, trial)
            if trial_value <= value + ARMIJO_SLOPE * t * slope:
                break
            t *= 0.5
        else:
            break
        u, value = trial, trial_value
    return u


def multistart_oracle(p: Params, n_starts: int = 16, seed: int = 0, max_iter: int = 200) -> float:
    """Best primal energy over random-start descent runs and a coarse grid search.

    Tiny grids only (at most 8 unknowns).  Starts are uniform in
    ``[-INIT_RANGE, INIT_RANGE]^N``; for ``N <= 4`` every point of the
    ``COARSE_STEP`` lattice on that box is also evaluated and the best lattice
    point is polished by the same descent iteration.
    """
    grid = p.grid
    n = grid.size
    if n > 8:
        raise ValueError(f"multistart_oracle is limited to 8 unknowns, grid has {n}")
    rng = np.random.default_rng(seed)
    starts = [rng.uniform(-INIT_RANGE, INIT_RANGE, size=grid.shape) for _ in range(n_starts)]
    best = np.inf
    if n <= 4:
        ticks = np.arange(-INIT_RANGE, INIT_RANGE + COARSE_STEP / 2, COARSE_STEP)
        lattice = np.array(list(itertools.product(ticks, repeat=n)))
        energies = _lattice_energies(p, lattice)
        k = int(np.argmin(energies))
        best = float(energies[k])
        starts.append(lattice[k].reshape(grid.shape))
    for u in starts:
        u = _descent_newton(p, u, 1e-13, max_iter)
        best = min(best, eval_primal(p, u))
    return best


def _lattice_energies(p: Params, lattice: np.ndarray) -> np.ndarray:
    """Vectorized primal energy for many flattened fields at once."""
    grid = p.grid
    L = grid.laplacian_matrix
    w = grid.cell_volume
    x = lattice
    lap = (L @ x.T).T
    f = p.f.ravel()
    return w * (
        -0.5 * p.gamma * np.sum(x * lap, axis=1)
        + 0.25 * p.alpha * np.sum(x**4, axis=1)
        - 0.5 * p.beta * np.sum(x * x, axis=1)
        - x @ f
    )
