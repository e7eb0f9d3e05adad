"""Primal-dual splitting with active-manifold identification monitoring.

Solves inf_x sup_y (f + p)(x) + <A x, y> - (g + q)(y) for convex f, g with
exact prox maps and smooth convex p, q.  The residual tracked per iterate
is the exact distance from the origin to the saddle operator value

    (df(x) + grad p(x) + A^T y)  x  (-A x + dg(y) + grad q(y)),

which is computable in closed form because each factor is a translated
convex set with a known distance function.  The trace records the discrete
manifold patterns of the iterates; the identification index is the first
recorded iterate from which the patterns never change again.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, PreconditionError
from .geometry import Matrix, SmoothMap, Vector, as_matrix, as_vector, frozen
from .proxfn import ManifoldPattern, ProxFn


def operator_norm(a: Matrix, iters: int = 100) -> float:
    """Largest singular value estimated by power iteration on a^T a."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    v = np.ones(a.shape[1]) / np.sqrt(a.shape[1])
    sigma = 0.0
    for _ in range(iters):
        w = a @ v
        sigma = float(np.linalg.norm(w))
        if sigma == 0.0:
            return 0.0
        u = a.T @ w
        nrm = float(np.linalg.norm(u))
        if nrm == 0.0:
            return 0.0
        v = u / nrm
    return sigma


def _gradient(m: SmoothMap, x: Vector) -> Vector:
    return m.jac(x).ravel()


def _estimate_curvature(m: SmoothMap) -> float:
    """Spectral norm of the Hessian at the origin, via FD on the gradient."""
    grad_map = SmoothMap(lambda x: m.jac(x).ravel(), m.in_dim, m.in_dim)
    hess = grad_map.jac(np.zeros(m.in_dim))
    return operator_norm(hess)


@dataclass(frozen=True)
class SaddleProblem:
    """Problem data for the splitting iteration.

    p and q are scalar smooth maps whose Jacobians supply the gradients; a
    is the coupling matrix mapping the primal space into the dual space.
    Step sizes violating gamma * mu * ||a||^2 <= 1 or exceeding the inverse
    curvature of p or q trigger a warning, not an error.
    """

    f: ProxFn
    g: ProxFn
    p: SmoothMap
    q: SmoothMap
    a: Matrix
    gamma: float
    mu: float
    lip_p: float | None = None
    lip_q: float | None = None

    def __post_init__(self):
        a = frozen(as_matrix(self.a, (self.g.dim, self.f.dim)))
        object.__setattr__(self, "a", a)
        if self.p.in_dim != self.f.dim or self.p.out_dim != 1:
            raise ValueError("p must be scalar on the primal space")
        if self.q.in_dim != self.g.dim or self.q.out_dim != 1:
            raise ValueError("q must be scalar on the dual space")
        if self.gamma <= 0 or self.mu <= 0:
            raise ValueError("step sizes must be positive")
        object.__setattr__(self, "a_norm", operator_norm(a))
        lip_p = self.lip_p if self.lip_p is not None else _estimate_curvature(self.p)
        lip_q = self.lip_q if self.lip_q is not None else _estimate_curvature(self.q)
        object.__setattr__(self, "lip_p", lip_p)
        object.__setattr__(self, "lip_q", lip_q)
        slack = 1e-12
        if self.gamma * self.mu * self.a_norm**2 > 1.0 + slack:
            warnings.warn(
                "step sizes violate gamma * mu * ||A||^2 <= 1; "
                "convergence is not expected",
                RuntimeWarning,
                stacklevel=2,
            )
        if (lip_p > 0 and self.gamma > 1.0 / lip_p + slack) or (
            lip_q > 0 and self.mu > 1.0 / lip_q + slack
        ):
            warnings.warn(
                "a step size exceeds the inverse curvature of its smooth term",
                RuntimeWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class IterateRecord:
    k: int
    x: Vector
    y: Vector
    residual: float
    pattern_x: ManifoldPattern
    pattern_y: ManifoldPattern


@dataclass(frozen=True)
class Trace:
    records: tuple[IterateRecord, ...]
    converged: bool
    identification_index: int | None


def saddle_residual(pr: SaddleProblem, x, y) -> float:
    """Distance from the origin to the saddle operator value at (x, y)."""
    x = as_vector(x, pr.f.dim)
    y = as_vector(y, pr.g.dim)
    primal = pr.f.subdiff_dist(x, -_gradient(pr.p, x) - pr.a.T @ y)
    dual = pr.g.subdiff_dist(y, pr.a @ x - _gradient(pr.q, y))
    if np.isinf(primal) or np.isinf(dual):
        return float("inf")
    return float(np.hypot(primal, dual))


def pd_step(pr: SaddleProblem, x, y) -> tuple[Vector, Vector]:
    """One splitting step; the primal update feeds the dual extrapolation."""
    x = as_vector(x, pr.f.dim)
    y = as_vector(y, pr.g.dim)
    x_next = pr.f.prox(
        pr.gamma, x - pr.gamma * _gradient(pr.p, x) - pr.gamma * (pr.a.T @ y)
    )
    y_next = pr.g.prox(
        pr.mu, y - pr.mu * _gradient(pr.q, y) + pr.mu * (pr.a @ (2.0 * x_next - x))
    )
    return x_next, y_next


def identification_index(records) -> int | None:
    """First recorded k whose pattern pair persists through the final record.

    Returns None when the last two recorded pattern pairs differ (the trace
    gives no evidence of identification).
    """
    records = list(records.records) if isinstance(records, Trace) else list(records)
    if not records:
        raise ValueError("trace is empty")
    final = (records[-1].pattern_x, records[-1].pattern_y)
    start = len(records) - 1
    while start > 0 and (records[start - 1].pattern_x, records[start - 1].pattern_y) == final:
        start -= 1
    if start == len(records) - 1 and len(records) >= 2:
        return None
    return records[start].k


def solve(
    pr: SaddleProblem,
    x0,
    y0,
    max_iter: int,
    tol: float,
    record_every: int = 1,
) -> Trace:
    """Iterate pd_step until the saddle residual falls below tol.

    Records every record_every-th iterate plus the first and the last, then
    computes the identification index from the recorded patterns.  Raises
    DivergenceError when the iterate norm exceeds 1e12.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    x = as_vector(x0, pr.f.dim).copy()
    y = as_vector(y0, pr.g.dim).copy()

    records: list[IterateRecord] = []

    def snap(k: int, res: float) -> None:
        records.append(
            IterateRecord(k, x.copy(), y.copy(), res, pr.f.pattern(x), pr.g.pattern(y))
        )

    res = saddle_residual(pr, x, y)
    snap(0, res)
    converged = res <= tol
    k = 0
    while k < max_iter and not converged:
        x, y = pd_step(pr, x, y)
        k += 1
        nrm = float(np.hypot(np.linalg.norm(x), np.linalg.norm(y)))
        if nrm > 1e12:
            raise DivergenceError(k, nrm)
        res = saddle_residual(pr, x, y)
        converged = res <= tol
        if k % record_every == 0 or converged or k == max_iter:
            snap(k, res)
    return Trace(tuple(records), converged, identification_index(records))


def nondegeneracy_report(pr: SaddleProblem, x, y, tol: float = 1e-8) -> tuple[float, float]:
    """Margins of the two optimality subgradients at an approximate saddle point."""
    x = as_vector(x, pr.f.dim)
    y = as_vector(y, pr.g.dim)
    res = saddle_residual(pr, x, y)
    if not res <= tol:
        raise PreconditionError(
            f"saddle residual {res:.3e} exceeds tolerance {tol:.3e}"
        )
    sub_tol = max(tol, 1e-9)
    margin_f = pr.f.nondeg_margin(x, -_gradient(pr.p, x) - pr.a.T @ y, sub_tol)
    margin_g = pr.g.nondeg_margin(y, pr.a @ x - _gradient(pr.q, y), sub_tol)
    return margin_f, margin_g
