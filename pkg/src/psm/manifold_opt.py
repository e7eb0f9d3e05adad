"""Smooth objectives restricted to an embedded manifold.

An objective pairs a chart/dual-chart description of one manifold with a
smooth ambient extension of the function to optimize on it.  Covariant
derivatives are computed extrinsically: the covariant gradient is the
tangential projection of the ambient gradient, and the covariant Hessian
(defined here only at critical points, where it is chart-invariant and
needs no connection) is the Hessian of the chart pullback transported
through an orthonormalized chart differential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartError, OffManifoldError, PreconditionError, PsmError
from .geometry import (
    Chart,
    DualChart,
    SmoothMap,
    Subspace,
    Vector,
    as_vector,
    chart_parameter,
    normal_space,
    numerical_rank,
    orthonormal_range,
    sample_ball,
    tangent_space_at,
)
from .graphs import CoordGraphRep

ON_MANIFOLD_TOL = 1e-8


@dataclass(frozen=True)
class TangentMap:
    """A self-adjoint linear map on a tangent space, in an orthonormal basis."""

    matrix: np.ndarray
    basis: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class ManifoldObjective:
    """A smooth function on a manifold given by consistent chart descriptions."""

    chart: Chart
    dual: DualChart
    f: SmoothMap
    check_radius: float = 0.1
    check_samples: int = 20

    def __post_init__(self):
        if self.chart.ambient_dim != self.dual.ambient_dim:
            raise ValueError("chart and dual chart ambient dimensions differ")
        if self.f.in_dim != self.chart.ambient_dim or self.f.out_dim != 1:
            raise ValueError("objective must be scalar on the ambient space")
        if np.linalg.norm(self.chart.base - self.dual.base) > 1e-9:
            raise ChartError("chart and dual chart have different base points")
        rng = np.random.default_rng(0)
        for w in sample_ball(rng, self.chart.dim, self.check_radius, self.check_samples):
            r = float(np.linalg.norm(self.dual.p(self.chart.h(w))))
            if r > ON_MANIFOLD_TOL:
                raise ChartError(
                    f"charts are inconsistent: ||p(h(w))|| = {r:.3e} at a sample"
                )

    @property
    def ambient_dim(self) -> int:
        return self.chart.ambient_dim

    @property
    def manifold_dim(self) -> int:
        return self.chart.dim

    def require_on_manifold(self, u) -> Vector:
        u = as_vector(u, self.ambient_dim)
        r = float(np.linalg.norm(self.dual.p(u)))
        if r > ON_MANIFOLD_TOL:
            raise OffManifoldError("point is off the manifold", r)
        return u


def covariant_gradient(mo: ManifoldObjective, u) -> Vector:
    """Tangential projection of the ambient gradient at a manifold point."""
    u = mo.require_on_manifold(u)
    grad = mo.f.jac(u).ravel()
    return tangent_space_at(mo.dual, u).project(grad)


def covariant_hessian(mo: ManifoldObjective, u, crit_tol: float = 1e-6) -> TangentMap:
    """Covariant Hessian at a critical point of the restricted function.

    Computed as the Hessian of f(h(.)) at the chart parameter of u, pulled
    back through the QR-orthonormalized chart differential.  Away from
    critical points the chart pullback is not chart-invariant, so calls
    there are rejected.
    """
    u = mo.require_on_manifold(u)
    cg = covariant_gradient(mo, u)
    if np.linalg.norm(cg) > crit_tol:
        raise PreconditionError(
            f"covariant gradient norm {np.linalg.norm(cg):.3e} exceeds {crit_tol:.1e}; "
            "the covariant Hessian is only defined at critical points"
        )
    w_bar = chart_parameter(mo.chart, u)
    h = mo.chart.h
    k = mo.manifold_dim

    def pullback_gradient(w):
        pt = h(w_bar + w)
        return h.jac(w_bar + w).T @ mo.f.jac(pt).ravel()

    grad_map = SmoothMap(pullback_gradient, k, k)
    raw = grad_map.jac(np.zeros(k))
    asym = float(np.max(np.abs(raw - raw.T), initial=0.0))
    if asym > 1e-8:
        raise PsmError(f"pullback Hessian asymmetry {asym:.3e} exceeds 1e-8")
    sym = 0.5 * (raw + raw.T)
    b = h.jac(w_bar)
    q, r = np.linalg.qr(b)
    r_inv = np.linalg.inv(r)
    mat = r_inv.T @ sym @ r_inv
    return TangentMap(0.5 * (mat + mat.T), q)


def second_order_check(mo: ManifoldObjective, u, tol: float = 1e-8) -> bool:
    """True iff the covariant Hessian at the critical point is positive definite."""
    hess = covariant_hessian(mo, u)
    return bool(hess.eigenvalues().min() > tol)


def quadratic_growth_margin(
    mo: ManifoldObjective, u, radius: float, n_samples: int, seed: int
) -> float:
    """Smallest sampled ratio (f(h(w)) - f(u)) / ||h(w) - u||^2 near u."""
    u = mo.require_on_manifold(u)
    w_bar = chart_parameter(mo.chart, u)
    f0 = float(mo.f(u)[0])
    rng = np.random.default_rng(seed)
    worst = float("inf")
    for dw in sample_ball(rng, mo.manifold_dim, radius, n_samples):
        pt = mo.chart.h(w_bar + dw)
        d2 = float(np.sum((pt - u) ** 2))
        if d2 == 0.0:
            continue
        worst = min(worst, (float(mo.f(pt)[0]) - f0) / d2)
    return worst


def extended_subdiff_rep(mo: ManifoldObjective, u_bar, v_bar, tol: float = 1e-8) -> CoordGraphRep:
    """Graph representation of the subdifferential of the +infinity extension.

    Values along the sheet are the covariant gradient plus the range of the
    adjoint submersion differential, offset so that the base value is v_bar.
    Requires v_bar - covariant_gradient(u_bar) to lie in the normal space.
    """
    u_bar = mo.require_on_manifold(u_bar)
    v_bar = as_vector(v_bar, mo.ambient_dim)
    w_bar = chart_parameter(mo.chart, u_bar)
    cg = covariant_gradient(mo, u_bar)
    jp_t = mo.dual.p.jac(u_bar).T
    x_bar, *_ = np.linalg.lstsq(jp_t, v_bar - cg, rcond=None)
    if np.linalg.norm(jp_t @ x_bar - (v_bar - cg)) > tol:
        raise PreconditionError("v_bar - covariant gradient is not a normal vector")

    h0, p, k = mo.chart.h, mo.dual.p, mo.manifold_dim
    x_dim = mo.dual.codim
    h = SmoothMap(
        lambda w: h0(w_bar + w), k, mo.ambient_dim, jacobian=lambda w: h0.jac(w_bar + w)
    )

    def values(wz):
        pt = h(wz[:k])
        tangent = tangent_space_at(mo.dual, pt)
        grad = tangent.project(mo.f.jac(pt).ravel())
        return grad + p.jac(pt).T @ (x_bar + wz[k:])

    g = SmoothMap(values, k + x_dim, mo.ambient_dim)
    return CoordGraphRep(h, g, u_bar, g(np.zeros(g.in_dim)))


def graph_normal_space(mo: ManifoldObjective, u_bar) -> Subspace:
    """Normal space of the extended subdifferential graph at (u_bar, 0).

    Pairs (z, w) with w tangent and z + Hessian(w) normal; assembled from
    the tangent/normal bases and the covariant Hessian, then orthonormalized.
    """
    u_bar = mo.require_on_manifold(u_bar)
    hess = covariant_hessian(mo, u_bar)
    q = hess.basis
    nb = normal_space(mo.dual, u_bar).basis
    n, k = q.shape
    cols = np.block(
        [
            [-q @ hess.matrix, nb],
            [q, np.zeros((n, nb.shape[1]))],
        ]
    )
    return Subspace(orthonormal_range(cols, rank=cols.shape[1]), 2 * n)


def transversality_check(mo: ManifoldObjective, u_bar) -> bool:
    """True iff the subdifferential graph crosses the zero-value slice cleanly.

    Computed directly: the graph's normal space at (u_bar, 0) must intersect
    the normal space of the slice (which is {0} x ambient) only at zero,
    i.e. the stacked bases have full column rank.
    """
    u_bar = mo.require_on_manifold(u_bar)
    n = mo.ambient_dim
    b1 = graph_normal_space(mo, u_bar).basis
    b2 = np.vstack([np.zeros((n, n)), np.eye(n)])
    stacked = np.hstack([b1, b2])
    return numerical_rank(stacked) == b1.shape[1] + n


def project_to_manifold(d: DualChart, u0, tol: float = 1e-12, max_iter: int = 50) -> Vector:
    """Gauss-Newton projection of a nearby point onto the zero set of p."""
    u = as_vector(u0, d.p.in_dim).copy()
    for _ in range(max_iter):
        r = d.p(u)
        if np.linalg.norm(r) <= tol:
            return u
        step, *_ = np.linalg.lstsq(d.p.jac(u), -r, rcond=None)
        u = u + step
    if np.linalg.norm(d.p(u)) <= tol:
        return u
    raise OffManifoldError("projection did not converge", float(np.linalg.norm(d.p(u))))
