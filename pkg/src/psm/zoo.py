"""Named builtin manifolds, graph representations, and smooth maps.

Everything here carries analytic Jacobians so that rank decisions in the
probes are made on exact derivative values, and finite-difference checks
have a trusted reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Chart, DualChart, SmoothMap, as_matrix, as_vector, null_space_basis
from .graphs import CoordGraphRep


@dataclass(frozen=True)
class ManifoldPair:
    """A manifold described both by an embedding and by a submersion."""

    name: str
    chart: Chart
    dual: DualChart

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def ambient_dim(self) -> int:
        return self.chart.ambient_dim


def circle(base_angle: float = 0.0) -> ManifoldPair:
    """Unit circle in the plane, chart anchored at the given angle."""
    t0 = float(base_angle)

    def h(w):
        return np.array([np.cos(t0 + w[0]), np.sin(t0 + w[0])])

    def h_jac(w):
        return np.array([[-np.sin(t0 + w[0])], [np.cos(t0 + w[0])]])

    base = h(np.zeros(1))
    chart = Chart(SmoothMap(h, 1, 2, jacobian=h_jac), base)
    dual = DualChart(
        SmoothMap(
            lambda u: np.array([u @ u - 1.0]),
            2,
            1,
            jacobian=lambda u: 2.0 * u[None, :],
        ),
        base,
    )
    return ManifoldPair("circle", chart, dual)


def sphere() -> ManifoldPair:
    """Unit 2-sphere in R^3, chart anchored at (1, 0, 0)."""

    def h(w):
        return np.array(
            [
                np.cos(w[0]) * np.cos(w[1]),
                np.sin(w[0]) * np.cos(w[1]),
                np.sin(w[1]),
            ]
        )

    def h_jac(w):
        c0, s0 = np.cos(w[0]), np.sin(w[0])
        c1, s1 = np.cos(w[1]), np.sin(w[1])
        return np.array([[-s0 * c1, -c0 * s1], [c0 * c1, -s0 * s1], [0.0, c1]])

    base = np.array([1.0, 0.0, 0.0])
    chart = Chart(SmoothMap(h, 2, 3, jacobian=h_jac), base)
    dual = DualChart(
        SmoothMap(
            lambda u: np.array([u @ u - 1.0]),
            3,
            1,
            jacobian=lambda u: 2.0 * u[None, :],
        ),
        base,
    )
    return ManifoldPair("sphere", chart, dual)


def axis_line() -> ManifoldPair:
    """The vertical axis {0} x R in the plane."""
    chart = Chart(
        SmoothMap(
            lambda w: np.array([0.0, w[0]]),
            1,
            2,
            jacobian=lambda w: np.array([[0.0], [1.0]]),
        ),
        np.zeros(2),
    )
    dual = DualChart(
        SmoothMap(
            lambda u: np.array([u[0]]),
            2,
            1,
            jacobian=lambda u: np.array([[1.0, 0.0]]),
        ),
        np.zeros(2),
    )
    return ManifoldPair("axis-line", chart, dual)


def hyperplane(normal) -> ManifoldPair:
    """The hyperplane through the origin orthogonal to the given vector."""
    a = as_vector(normal)
    if np.linalg.norm(a) == 0:
        raise ValueError("hyperplane normal must be nonzero")
    n = a.shape[0]
    basis = null_space_basis(a[None, :])
    chart = Chart(
        SmoothMap(lambda w: basis @ w, n - 1, n, jacobian=lambda w: basis),
        np.zeros(n),
    )
    dual = DualChart(
        SmoothMap(lambda u: np.array([a @ u]), n, 1, jacobian=lambda u: a[None, :].copy()),
        np.zeros(n),
    )
    return ManifoldPair("hyperplane", chart, dual)


def full_space(dim: int) -> ManifoldPair:
    """All of R^n, with a trivial submersion into a zero-dimensional space."""
    eye = np.eye(dim)
    chart = Chart(
        SmoothMap(lambda w: w.copy(), dim, dim, jacobian=lambda w: eye.copy()),
        np.zeros(dim),
    )
    dual = DualChart(
        SmoothMap(lambda u: np.zeros(0), dim, 0, jacobian=lambda u: np.zeros((0, dim))),
        np.zeros(dim),
    )
    return ManifoldPair("full-space", chart, dual)


def paraboloid() -> ManifoldPair:
    """The paraboloid u3 = u1^2 + u2^2 in R^3."""

    def h(w):
        return np.array([w[0], w[1], w[0] ** 2 + w[1] ** 2])

    def h_jac(w):
        return np.array([[1.0, 0.0], [0.0, 1.0], [2.0 * w[0], 2.0 * w[1]]])

    chart = Chart(SmoothMap(h, 2, 3, jacobian=h_jac), np.zeros(3))
    dual = DualChart(
        SmoothMap(
            lambda u: np.array([u[2] - u[0] ** 2 - u[1] ** 2]),
            3,
            1,
            jacobian=lambda u: np.array([[-2.0 * u[0], -2.0 * u[1], 1.0]]),
        ),
        np.zeros(3),
    )
    return ManifoldPair("paraboloid", chart, dual)


def sqrt_branch_rep() -> CoordGraphRep:
    """Graph {(w^2, w)}: the two square-root branches over the half line.

    The projected tangent rank drops to zero exactly at the origin, so a
    constant-rank probe must report a varying rank.
    """
    h = SmoothMap(
        lambda w: np.array([w[0] ** 2]),
        1,
        1,
        jacobian=lambda w: np.array([[2.0 * w[0]]]),
    )
    g = SmoothMap(
        lambda w: np.array([w[0]]), 1, 1, jacobian=lambda w: np.array([[1.0]])
    )
    return CoordGraphRep(h, g, np.zeros(1), np.zeros(1))


def abs_plus_square_rep() -> CoordGraphRep:
    """Subdifferential graph of (x, y) -> |x| + y^2 at the origin.

    Points are ((0, w), (z, 2w)) with |z| < 1: the vertical-axis sheet
    with its interval of horizontal subgradients.
    """
    h = SmoothMap(
        lambda w: np.array([0.0, w[0]]),
        1,
        2,
        jacobian=lambda w: np.array([[0.0], [1.0]]),
    )
    g = SmoothMap(
        lambda wz: np.array([wz[1], 2.0 * wz[0]]),
        2,
        2,
        jacobian=lambda wz: np.array([[0.0, 1.0], [2.0, 0.0]]),
    )
    return CoordGraphRep(h, g, np.zeros(2), np.zeros(2))


def quadratic_form(dim: int, quad=None, lin=None, const: float = 0.0) -> SmoothMap:
    """Scalar map x -> x^T Q x / 2 + b . x + c with analytic gradient."""
    q = np.zeros((dim, dim)) if quad is None else as_matrix(quad, (dim, dim))
    q = 0.5 * (q + q.T)
    b = np.zeros(dim) if lin is None else as_vector(lin, dim)
    c = float(const)

    def value(x):
        return np.array([0.5 * x @ q @ x + b @ x + c])

    return SmoothMap(value, dim, 1, jacobian=lambda x: (q @ x + b)[None, :])


def quadratic_vector_map(quads, lin, const=None) -> SmoothMap:
    """Vector map with components x^T Q_i x / 2 + B_i . x + c_i."""
    b = as_matrix(lin)
    out_dim, in_dim = b.shape
    qs = [0.5 * (as_matrix(q, (in_dim, in_dim)) + as_matrix(q, (in_dim, in_dim)).T) for q in quads]
    if len(qs) != out_dim:
        raise ValueError("one quadratic block per output component is required")
    c = np.zeros(out_dim) if const is None else as_vector(const, out_dim)

    def value(x):
        return np.array([0.5 * x @ q @ x for q in qs]) + b @ x + c

    def jac(x):
        return np.vstack([(q @ x)[None, :] for q in qs]) + b

    return SmoothMap(value, in_dim, out_dim, jacobian=jac)


_BUILTIN_MANIFOLDS = {
    "circle": circle,
    "sphere": sphere,
    "axis-line": axis_line,
    "hyperplane": hyperplane,
    "full-space": full_space,
    "paraboloid": paraboloid,
}


def builtin_manifold(name: str, **params) -> ManifoldPair:
    """Look up a named builtin manifold; extra parameters are forwarded."""
    try:
        factory = _BUILTIN_MANIFOLDS[name]
    except KeyError:
        raise ValueError(f"unknown builtin manifold {name!r}") from None
    return factory(**params)
