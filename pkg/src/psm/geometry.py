"""Dense numerical differential geometry primitives.

Points and linear maps are plain numpy arrays (1-D for vectors, 2-D for
matrices).  Smooth maps carry their dimensions and an optional analytic
Jacobian; when the Jacobian is absent, requests fall back to central finite
differences.  Manifolds are described either by an embedding chart (a map
from parameter space into the ambient space) or by a dual chart (a
submersion whose zero set is the manifold).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import ChartError, EvaluationError

Vector = np.ndarray
Matrix = np.ndarray

BASE_TOL = 1e-12
ORTHO_TOL = 1e-10


def as_vector(x, dim: int | None = None) -> Vector:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_matrix(a, shape: tuple[int, int] | None = None) -> Matrix:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if shape is not None and m.shape != shape:
        raise ValueError(f"expected shape {shape}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def sample_ball(rng: np.random.Generator, dim: int, radius: float, n: int) -> np.ndarray:
    """n points drawn uniformly from the closed ball of the given radius."""
    if n < 0:
        raise ValueError("sample count must be nonnegative")
    if dim == 0:
        return np.zeros((n, 0))
    directions = rng.standard_normal((n, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.random(n) ** (1.0 / dim)
    return directions / norms * radii[:, None]


@dataclass(frozen=True)
class SmoothMap:
    """A map between Euclidean spaces with an optional analytic Jacobian."""

    evaluate: Callable[[Vector], Vector]
    in_dim: int
    out_dim: int
    jacobian: Callable[[Vector], Matrix] | None = None
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.in_dim < 0 or self.out_dim < 0:
            raise ValueError("dimensions must be nonnegative")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")

    def __call__(self, x) -> Vector:
        x = as_vector(x, self.in_dim)
        y = np.atleast_1d(np.asarray(self.evaluate(x), dtype=float))
        if y.shape != (self.out_dim,):
            raise ValueError(
                f"map returned shape {y.shape}, expected ({self.out_dim},)"
            )
        return y

    def jac(self, x) -> Matrix:
        """Jacobian at x: analytic when supplied, central differences otherwise."""
        x = as_vector(x, self.in_dim)
        if self.jacobian is None:
            return fd_jacobian(self, x)
        j = as_matrix(self.jacobian(x), (self.out_dim, self.in_dim))
        return j


def fd_jacobian(m: SmoothMap, x) -> Matrix:
    """Central-difference Jacobian with step fd_step * (1 + ||x||_inf)."""
    x = as_vector(x, m.in_dim)
    h = m.fd_step * (1.0 + (np.max(np.abs(x)) if x.size else 0.0))
    cols = np.empty((m.out_dim, m.in_dim))
    for j in range(m.in_dim):
        e = np.zeros(m.in_dim)
        e[j] = h
        fp = np.asarray(m.evaluate(x + e), dtype=float)
        fm = np.asarray(m.evaluate(x - e), dtype=float)
        col = (fp - fm) / (2.0 * h)
        if not np.all(np.isfinite(col)):
            raise EvaluationError(f"non-finite evaluation in column {j}")
        cols[:, j] = col
    return cols


def numerical_rank(a, tol: float | None = None) -> int:
    """Number of singular values above tol.

    The default tolerance is max(rows, cols) * machine_eps * sigma_max, so
    the zero matrix has rank 0 and well-separated spectra are counted
    exactly.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("rank is defined for 2-D arrays")
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0:
        return 0
    if tol is None:
        tol = max(a.shape) * np.finfo(float).eps * s[0]
    return int(np.count_nonzero(s > tol))


def orthonormal_range(a, rank: int | None = None) -> Matrix:
    """Orthonormal basis of the column space, via column-pivoted QR."""
    a = np.asarray(a, dtype=float)
    r = numerical_rank(a) if rank is None else rank
    if r == 0:
        return np.zeros((a.shape[0], 0))
    q, _, _ = scipy.linalg.qr(a, mode="economic", pivoting=True)
    return q[:, :r]


def null_space_basis(a, tol: float | None = None) -> Matrix:
    """Orthonormal basis of the null space (columns)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    if a.shape[0] == 0 or a.size == 0:
        return np.eye(n)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    if tol is None:
        tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int(np.count_nonzero(s > tol))
    return vh[r:].T.copy()


@dataclass(frozen=True)
class Subspace:
    """A linear subspace given by an orthonormal column basis."""

    basis: Matrix
    ambient_dim: int

    def __post_init__(self):
        b = frozen(as_matrix(self.basis))
        object.__setattr__(self, "basis", b)
        if b.shape[0] != self.ambient_dim:
            raise ValueError("basis rows must match the ambient dimension")
        gram = b.T @ b
        if gram.size and np.max(np.abs(gram - np.eye(b.shape[1]))) > ORTHO_TOL:
            raise ValueError("basis columns are not orthonormal")

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v) -> Vector:
        v = as_vector(v, self.ambient_dim)
        return self.basis @ (self.basis.T @ v)


@dataclass(frozen=True)
class Chart:
    """An embedding h: parameter space -> ambient space with h(0) = base."""

    h: SmoothMap
    base: Vector = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        base = self.base if self.base is not None else self.h(np.zeros(self.h.in_dim))
        base = frozen(as_vector(base, self.h.out_dim))
        object.__setattr__(self, "base", base)
        at_zero = self.h(np.zeros(self.h.in_dim))
        if np.max(np.abs(at_zero - base), initial=0.0) > BASE_TOL:
            raise ChartError("chart does not map 0 to its base point")
        j = self.h.jac(np.zeros(self.h.in_dim))
        if numerical_rank(j) != self.h.in_dim:
            raise ChartError("chart differential is not injective at the base")

    @property
    def dim(self) -> int:
        return self.h.in_dim

    @property
    def ambient_dim(self) -> int:
        return self.h.out_dim


@dataclass(frozen=True)
class DualChart:
    """A submersion p with p(base) = 0; the manifold is its local zero set."""

    p: SmoothMap
    base: Vector

    def __post_init__(self):
        base = frozen(as_vector(self.base, self.p.in_dim))
        object.__setattr__(self, "base", base)
        if np.linalg.norm(self.p(base)) > BASE_TOL:
            raise ChartError("dual chart does not vanish at its base point")
        j = self.p.jac(base)
        if numerical_rank(j) != self.p.out_dim:
            raise ChartError("dual chart differential is not surjective at the base")

    @property
    def codim(self) -> int:
        return self.p.out_dim

    @property
    def ambient_dim(self) -> int:
        return self.p.in_dim


def tangent_space(c: Chart, w) -> Subspace:
    """Orthonormal basis of the range of the chart differential at w."""
    w = as_vector(w, c.h.in_dim)
    j = c.h.jac(w)
    if numerical_rank(j) != c.h.in_dim:
        raise ChartError(f"chart differential loses rank at w={w}")
    return Subspace(orthonormal_range(j, rank=c.h.in_dim), c.ambient_dim)


def normal_space(d: DualChart, u) -> Subspace:
    """Orthonormal basis of the range of the adjoint submersion differential."""
    u = as_vector(u, d.p.in_dim)
    j = d.p.jac(u)
    if numerical_rank(j) != d.p.out_dim:
        raise ChartError(f"dual chart differential loses surjectivity at u={u}")
    return Subspace(orthonormal_range(j.T, rank=d.p.out_dim), d.ambient_dim)


def tangent_space_at(d: DualChart, u) -> Subspace:
    """Tangent space from a dual chart: the null space of its differential."""
    u = as_vector(u, d.p.in_dim)
    j = d.p.jac(u)
    if numerical_rank(j) != d.p.out_dim:
        raise ChartError(f"dual chart differential loses surjectivity at u={u}")
    return Subspace(null_space_basis(j), d.ambient_dim)


def chart_inverse_check(c: Chart, g: SmoothMap, samples: int, radius: float, seed: int) -> float:
    """Max residual ||g(h(w)) - w|| over sampled parameters w."""
    if g.in_dim != c.h.out_dim or g.out_dim != c.h.in_dim:
        raise ValueError("inverse candidate has mismatched dimensions")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for w in sample_ball(rng, c.h.in_dim, radius, samples):
        worst = max(worst, float(np.linalg.norm(g(c.h(w)) - w)))
    return worst


def chart_parameter(c: Chart, u, tol: float = 1e-12, max_iter: int = 50) -> Vector:
    """Solve h(w) = u by Gauss-Newton, for u on the manifold near the base."""
    u = as_vector(u, c.ambient_dim)
    w = np.zeros(c.h.in_dim)
    for _ in range(max_iter):
        r = u - c.h(w)
        if np.linalg.norm(r) <= tol:
            return w
        step, *_ = np.linalg.lstsq(c.h.jac(w), r, rcond=None)
        w = w + step
    r = u - c.h(w)
    if np.linalg.norm(r) <= tol:
        return w
    raise ChartError(
        f"chart inversion did not converge (residual {np.linalg.norm(r):.3e})"
    )
