"""Finite-difference geometry on the unit box with homogeneous Dirichlet data.

Scalar fields live on the interior nodes and are plain ``ndarray`` objects of
shape ``grid.shape``; flattening is row-major (C order).  Vector fields are
tuples with one array per axis; the axis-``a`` array has ``n_a + 1`` entries
along axis ``a`` (one per edge, including the two edges touching the
boundary) and ``n_b`` entries along every other axis.

The gradient is a forward difference onto edges and the divergence is its
exact negative adjoint, so ``inner_edges(gradient(u), p) == -inner(u,
divergence(p))`` holds up to roundoff for every pair of fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp

VectorField = Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of interior nodes on ``(0, 1)^d``.

    Parameters
    ----------
    interior_counts : tuple of int
        Number of interior nodes per axis; the spacing along axis ``a`` is
        ``1 / (n_a + 1)``.
    """

    interior_counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(n) for n in self.interior_counts)
        if not 1 <= len(counts) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(counts)}")
        if any(n < 1 for n in counts):
            raise ValueError(f"interior counts must be >= 1, got {counts}")
        object.__setattr__(self, "interior_counts", counts)

    @classmethod
    def uniform(cls, dimension: int, n: int) -> "GridSpec":
        return cls((n,) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.interior_counts)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.interior_counts

    @property
    def size(self) -> int:
        return math.prod(self.interior_counts)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(1.0 / (n + 1) for n in self.interior_counts)

    @property
    def cell_volume(self) -> float:
        """Quadrature weight attached to every node and every edge."""
        return math.prod(self.spacing)

    def edge_shape(self, axis: int) -> Tuple[int, ...]:
        shape = list(self.shape)
        shape[axis] += 1
        return tuple(shape)

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Interior node coordinates as an ``indexing="ij"`` meshgrid."""
        axes = [h * np.arange(1, n + 1) for n, h in zip(self.shape, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    # -- field constructors -------------------------------------------------

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def zero_edges(self) -> VectorField:
        return tuple(np.zeros(self.edge_shape(a)) for a in range(self.dimension))

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def bump(self) -> np.ndarray:
        """Product of ``sin(pi x_a)``, rescaled so the largest node value is 1."""
        u = np.ones(self.shape)
        for x in self.coordinates():
            u = u * np.sin(np.pi * x)
        return u / np.max(u)

    # -- validation ---------------------------------------------------------

    def check_scalar(self, u: np.ndarray, name: str = "field") -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ValueError(f"{name} has shape {u.shape}, grid expects {self.shape}")
        return u

    def check_vector(self, p: Sequence[np.ndarray], name: str = "vector field") -> VectorField:
        if len(p) != self.dimension:
            raise ValueError(f"{name} has {len(p)} components, grid dimension is {self.dimension}")
        out = []
        for a, comp in enumerate(p):
            comp = np.asarray(comp, dtype=float)
            if comp.shape != self.edge_shape(a):
                raise ValueError(
                    f"{name}[{a}] has shape {comp.shape}, expected {self.edge_shape(a)}"
                )
            out.append(comp)
        return tuple(out)

    # -- difference operators -----------------------------------------------

    def gradient(self, u: np.ndarray) -> VectorField:
        u = self.check_scalar(u)
        out = []
        for a, h in enumerate(self.spacing):
            pad = [(0, 0)] * self.dimension
            pad[a] = (1, 1)
            out.append(np.diff(np.pad(u, pad), axis=a) / h)
        return tuple(out)

    def divergence(self, p: Sequence[np.ndarray]) -> np.ndarray:
        p = self.check_vector(p)
        out = np.zeros(self.shape)
        for a, h in enumerate(self.spacing):
            out = out + np.diff(p[a], axis=a) / h
        return out

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.divergence(self.gradient(u))

    # -- quadrature ---------------------------------------------------------

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        u = self.check_scalar(u, "left operand")
        v = self.check_scalar(v, "right operand")
        return float(np.sum(u * v)) * self.cell_volume

    def inner_edges(self, p: Sequence[np.ndarray], q: Sequence[np.ndarray]) -> float:
        p = self.check_vector(p, "left operand")
        q = self.check_vector(q, "right operand")
        return sum(float(np.sum(pa * qa)) for pa, qa in zip(p, q)) * self.cell_volume

    def integrate(self, u: np.ndarray) -> float:
        return float(np.sum(self.check_scalar(u))) * self.cell_volume

    def norm(self, u: np.ndarray) -> float:
        """Discrete L2 norm."""
        return math.sqrt(self.inner(u, u))

    def dirichlet_energy(self, u: np.ndarray) -> float:
        g = self.gradient(u)
        return self.inner_edges(g, g)

    # -- matrices -----------------------------------------------------------

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of :meth:`laplacian` acting on row-major flattened fields."""
        mats = []
        for a, (n, h) in enumerate(zip(self.shape, self.spacing)):
            d = sp.diags(
                [np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]
            ) / (h * h)
            factors = [sp.identity(m) for m in self.shape]
            factors[a] = d
            op = factors[0]
            for f in factors[1:]:
                op = sp.kron(op, f)
            mats.append(op)
        return sp.csr_matrix(sum(mats))

    def laplacian_eigenvalues(self) -> np.ndarray:
        """Closed-form spectrum of the discrete Laplacian, ascending."""
        per_axis = [
            -(4.0 / h**2) * np.sin(np.arange(1, n + 1) * np.pi * h / 2) ** 2
            for n, h in zip(self.shape, self.spacing)
        ]
        total = per_axis[0]
        for lam in per_axis[1:]:
            total = np.add.outer(total, lam).ravel()
        return np.sort(np.asarray(total).ravel())
