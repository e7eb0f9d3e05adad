"""Constant-rank certification of set-valued mappings.

A mapping's graph is supplied either in coordinate form, parameterized as
(h(w), g(w, z)), or in dual form as the zero set {p(u) = 0, q(u, v) = 0}.
Partial smoothness is probed by sampling the parameter space and measuring
the rank of the projected graph tangent space; the projection of the graph
tangent at (h(w), g(w, z)) onto the domain is the range of the chart
differential at w, so the measured quantity is the rank of that
differential.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ChartError
from .geometry import (
    BASE_TOL,
    Chart,
    DualChart,
    SmoothMap,
    Vector,
    as_vector,
    frozen,
    null_space_basis,
    numerical_rank,
    sample_ball,
)

CONSTANT_RANK = "constant-rank"
RANK_VARIES = "rank-varies"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CoordGraphRep:
    """Graph parameterized as (h(w), g(w, z)) around (base_u, base_v)."""

    h: SmoothMap
    g: SmoothMap
    base_u: Vector
    base_v: Vector

    def __post_init__(self):
        if self.g.in_dim < self.h.in_dim:
            raise ValueError("g must accept at least the chart parameters")
        bu = frozen(as_vector(self.base_u, self.h.out_dim))
        bv = frozen(as_vector(self.base_v, self.g.out_dim))
        object.__setattr__(self, "base_u", bu)
        object.__setattr__(self, "base_v", bv)
        if np.max(np.abs(self.h(np.zeros(self.w_dim)) - bu), initial=0.0) > BASE_TOL:
            raise ValueError("h(0) does not match base_u")
        if np.max(np.abs(self.g(np.zeros(self.g.in_dim)) - bv), initial=0.0) > BASE_TOL:
            raise ValueError("g(0, 0) does not match base_v")

    @property
    def w_dim(self) -> int:
        return self.h.in_dim

    @property
    def z_dim(self) -> int:
        return self.g.in_dim - self.h.in_dim

    @property
    def u_dim(self) -> int:
        return self.h.out_dim

    @property
    def v_dim(self) -> int:
        return self.g.out_dim

    def point(self, w, z) -> tuple[Vector, Vector]:
        """Graph point (u, v) at parameters (w, z)."""
        w = as_vector(w, self.w_dim) if self.w_dim else np.zeros(0)
        z = as_vector(z, self.z_dim) if self.z_dim else np.zeros(0)
        return self.h(w), self.g(np.concatenate([w, z]))


@dataclass(frozen=True)
class DualGraphRep:
    """Graph given as the local zero set {p(u) = 0, q(u, v) = 0}."""

    p: SmoothMap
    q: SmoothMap
    base_u: Vector
    base_v: Vector

    def __post_init__(self):
        bu = frozen(as_vector(self.base_u, self.p.in_dim))
        bv = frozen(as_vector(self.base_v, self.q.in_dim - self.p.in_dim))
        object.__setattr__(self, "base_u", bu)
        object.__setattr__(self, "base_v", bv)
        if np.linalg.norm(self.p(bu)) > BASE_TOL:
            raise ValueError("p(base_u) must vanish")
        if np.linalg.norm(self.q(np.concatenate([bu, bv]))) > BASE_TOL:
            raise ValueError("q(base_u, base_v) must vanish")
        if numerical_rank(self.p.jac(bu)) != self.x_dim:
            raise ChartError("p is not a submersion at the base point")
        jq = self.q.jac(np.concatenate([bu, bv]))
        if numerical_rank(jq[:, self.u_dim:]) != self.y_dim:
            raise ChartError("q is not a submersion in v at the base point")

    @property
    def u_dim(self) -> int:
        return self.p.in_dim

    @property
    def v_dim(self) -> int:
        return self.q.in_dim - self.p.in_dim

    @property
    def x_dim(self) -> int:
        return self.p.out_dim

    @property
    def y_dim(self) -> int:
        return self.q.out_dim

    def residual(self, point: Vector) -> Vector:
        return np.concatenate([self.p(point[: self.u_dim]), self.q(point)])

    def residual_jacobian(self, point: Vector) -> np.ndarray:
        jp = self.p.jac(point[: self.u_dim])
        top = np.hstack([jp, np.zeros((self.x_dim, self.v_dim))])
        return np.vstack([top, self.q.jac(point)])


@dataclass(frozen=True)
class RankProfile:
    """Projected-tangent ranks at sampled graph parameters."""

    samples: tuple[tuple[Vector, int], ...]
    radius: float
    seed: int

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValueError("a rank profile needs at least one sample")
        object.__setattr__(
            self,
            "samples",
            tuple((frozen(np.atleast_1d(pt)), int(r)) for pt, r in self.samples),
        )

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(r for _, r in self.samples)


@dataclass(frozen=True)
class PartialSmoothCertificate:
    """Verdict of a constant-rank probe, with the audited rank profile."""

    verdict: str
    graph_dim: int | None
    manifold_dim: int | None
    coderiv_dim: int | None
    profile: RankProfile | None

    def __post_init__(self):
        if self.verdict not in (CONSTANT_RANK, RANK_VARIES, DEGENERATE):
            raise ValueError(f"unknown verdict {self.verdict!r}")


def regularity_check(rep: CoordGraphRep) -> bool:
    """True iff the stacked differential (w, z) -> (h'(0)w, g'(0)(w, z)) is injective."""
    d = rep.w_dim + rep.z_dim
    jh = rep.h.jac(np.zeros(rep.w_dim))
    jg = rep.g.jac(np.zeros(d))
    top = np.hstack([jh, np.zeros((rep.u_dim, rep.z_dim))])
    stacked = np.vstack([top, jg])
    return numerical_rank(stacked) == d


def projected_tangent_rank(rep: CoordGraphRep, w, z=None, tol: float | None = None) -> int:
    """Rank of the domain projection of the graph tangent at parameters (w, z).

    The projected tangent space equals the range of the chart differential,
    so the result depends on w only; z is accepted for interface symmetry.
    """
    w = as_vector(w, rep.w_dim) if rep.w_dim else np.zeros(0)
    return numerical_rank(rep.h.jac(w), tol)


def coderivative_dim(rep: CoordGraphRep, w, z=None) -> int:
    """Dimension of the coderivative subspace: the projected rank's complement."""
    return rep.u_dim - projected_tangent_rank(rep, w, z)


def constant_rank_probe(
    rep: CoordGraphRep,
    radius: float,
    n_samples: int,
    seed: int,
    rank_tol: float | None = None,
) -> PartialSmoothCertificate:
    """Sample parameters in a ball (plus the center) and compare projected ranks."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not regularity_check(rep):
        return PartialSmoothCertificate(DEGENERATE, None, None, None, None)
    d = rep.w_dim + rep.z_dim
    rng = np.random.default_rng(seed)
    points = np.vstack([np.zeros((1, d)), sample_ball(rng, d, radius, n_samples)])
    samples = []
    for pt in points:
        r = projected_tangent_rank(rep, pt[: rep.w_dim], pt[rep.w_dim:], tol=rank_tol)
        samples.append((pt, r))
    profile = RankProfile(tuple(samples), radius, seed)
    ranks = set(profile.ranks)
    graph_dim = rep.w_dim + rep.z_dim
    if len(ranks) == 1:
        m = ranks.pop()
        return PartialSmoothCertificate(CONSTANT_RANK, graph_dim, m, rep.u_dim - m, profile)
    return PartialSmoothCertificate(RANK_VARIES, graph_dim, None, None, profile)


def smooth_selection(rep: CoordGraphRep, w) -> Vector:
    """The z = 0 selection: g(w, 0), which pairs with h(w) on the graph."""
    w = as_vector(w, rep.w_dim) if rep.w_dim else np.zeros(0)
    return rep.g(np.concatenate([w, np.zeros(rep.z_dim)]))


def identifiability_test(
    rep: CoordGraphRep,
    member: Callable[[Vector], bool],
    radius: float,
    n_samples: int,
    seed: int,
) -> bool:
    """Sampled check that graph points near the base have domain part in the set."""
    rng = np.random.default_rng(seed)
    d = rep.w_dim + rep.z_dim
    points = np.vstack([np.zeros((1, d)), sample_ball(rng, d, radius, n_samples)])
    for pt in points:
        u, v = rep.point(pt[: rep.w_dim], pt[rep.w_dim:])
        if np.linalg.norm(u - rep.base_u) > radius:
            continue
        if np.linalg.norm(v - rep.base_v) > radius:
            continue
        if not member(u):
            return False
    return True


def sum_rule_transform(rep: CoordGraphRep, f: SmoothMap) -> CoordGraphRep:
    """Representation of the mapping shifted by a single-valued smooth map."""
    if f.in_dim != rep.u_dim or f.out_dim != rep.v_dim:
        raise ValueError("perturbation dimensions do not match the representation")
    h, g, w_dim, z_dim = rep.h, rep.g, rep.w_dim, rep.z_dim

    def shifted(wz):
        return g(wz) + f(h(wz[:w_dim]))

    def shifted_jac(wz):
        w = wz[:w_dim]
        jf_h = f.jac(h(w)) @ h.jac(w)
        return g.jac(wz) + np.hstack([jf_h, np.zeros((rep.v_dim, z_dim))])

    g_new = SmoothMap(shifted, g.in_dim, g.out_dim, jacobian=shifted_jac)
    return CoordGraphRep(h, g_new, rep.base_u, rep.base_v + f(rep.base_u))


def _project_to_graph(rep: DualGraphRep, start: Vector, max_iter: int = 50) -> Vector | None:
    """Damped Gauss-Newton projection onto {p = 0, q = 0}; None on failure."""
    point = start.copy()
    res = rep.residual(point)
    for _ in range(max_iter):
        nrm = np.linalg.norm(res)
        if nrm <= 1e-10:
            return point
        jac = rep.residual_jacobian(point)
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        t = 1.0
        while t >= 2.0**-20:
            cand = point + t * step
            cand_res = rep.residual(cand)
            if np.linalg.norm(cand_res) < nrm:
                point, res = cand, cand_res
                break
            t /= 2.0
        else:
            return None
    return point if np.linalg.norm(res) <= 1e-10 else None


def dual_rep_check(
    rep: DualGraphRep,
    radius: float,
    n_samples: int,
    seed: int,
    rank_tol: float | None = None,
) -> PartialSmoothCertificate:
    """Probe a dual representation at Newton-projected graph points.

    Seeds near the base point are projected onto the zero set; at each
    projected point the submersion conditions are re-verified and the rank
    of the domain projection of Null(residual Jacobian) is recorded.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    base = np.concatenate([rep.base_u, rep.base_v])
    d = rep.u_dim + rep.v_dim
    seeds = np.vstack([np.zeros((1, d)), sample_ball(rng, d, radius, n_samples)])
    samples = []
    for offset in seeds:
        point = _project_to_graph(rep, base + offset)
        if point is None:
            return PartialSmoothCertificate(DEGENERATE, None, None, None, None)
        jp = rep.p.jac(point[: rep.u_dim])
        jq = rep.q.jac(point)
        if numerical_rank(jp) != rep.x_dim or numerical_rank(jq[:, rep.u_dim:]) != rep.y_dim:
            return PartialSmoothCertificate(DEGENERATE, None, None, None, None)
        kernel = null_space_basis(rep.residual_jacobian(point))
        samples.append((point, numerical_rank(kernel[: rep.u_dim, :], rank_tol)))
    profile = RankProfile(tuple(samples), radius, seed)
    ranks = set(profile.ranks)
    graph_dim = rep.u_dim + rep.v_dim - rep.x_dim - rep.y_dim
    if len(ranks) == 1:
        m = ranks.pop()
        return PartialSmoothCertificate(CONSTANT_RANK, graph_dim, m, rep.u_dim - m, profile)
    return PartialSmoothCertificate(RANK_VARIES, graph_dim, None, None, profile)


def normal_bundle_rep(d: DualChart, c: Chart, x_bar) -> CoordGraphRep:
    """Coordinate representation of the normal-space mapping of a manifold.

    The chart and dual chart must describe the same manifold; the graph is
    parameterized as (h(w), p'(h(w))^T (x_bar + z)).
    """
    if c.ambient_dim != d.ambient_dim:
        raise ValueError("chart and dual chart live in different ambient spaces")
    if np.linalg.norm(c.base - d.base) > 1e-9:
        raise ChartError("chart and dual chart have different base points")
    x_bar = as_vector(x_bar, d.codim)
    rng = np.random.default_rng(0)
    for w in sample_ball(rng, c.dim, 0.1, 20):
        if np.linalg.norm(d.p(c.h(w))) > 1e-8:
            raise ChartError("inconsistent charts: embedded points leave the zero set")

    h, p, w_dim, x_dim = c.h, d.p, c.dim, d.codim

    def normal_field(wz):
        return p.jac(h(wz[:w_dim])).T @ (x_bar + wz[w_dim:])

    g = SmoothMap(normal_field, w_dim + x_dim, c.ambient_dim)
    base_v = p.jac(c.base).T @ x_bar
    return CoordGraphRep(h, g, c.base, base_v)
