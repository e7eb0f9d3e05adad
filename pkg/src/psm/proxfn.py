"""Structured convex functions with exact proximal maps.

Each function knows, besides its value and prox, the Euclidean distance
from a candidate vector to its subdifferential, a discrete pattern labeling
the active-manifold sheet through a point (signed support, box face, active
groups), and the margin of a subgradient to the relative boundary of the
subdifferential.  Those four ingredients are everything the solver and the
rank prober consume; subdifferentials are never enumerated as sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError
from .geometry import SmoothMap, Vector, as_vector
from .graphs import CoordGraphRep

SUBGRADIENT_TOL = 1e-9

_SIGNED_CHARS = {-1: "-", 0: "0", 1: "+"}
_FACE_CHARS = {0: "l", 1: "f", 2: "u"}
_GROUP_CHARS = {0: ".", 1: "#"}


@dataclass(frozen=True)
class ManifoldPattern:
    """Discrete label of an active-manifold sheet.

    kind is one of "signed-support", "face", "group-support", "full-space"
    or "product" (for block-separable functions, with per-block children).
    Patterns compare by value and serialize to compact strings with
    kind-specific, mutually disjoint alphabets so parsing is unambiguous:
    signed support uses "-0+", faces "lfu", groups ".#", the full space "*",
    and products join their children with "|".
    """

    kind: str
    data: tuple

    def compact(self) -> str:
        if self.kind == "full-space":
            return "*"
        if self.kind == "signed-support":
            return "".join(_SIGNED_CHARS[v] for v in self.data)
        if self.kind == "face":
            return "".join(_FACE_CHARS[v] for v in self.data)
        if self.kind == "group-support":
            return "".join(_GROUP_CHARS[v] for v in self.data)
        if self.kind == "product":
            return "|".join(child.compact() for child in self.data)
        raise ValueError(f"unknown pattern kind {self.kind!r}")

    @staticmethod
    def from_compact(s: str) -> "ManifoldPattern":
        if "|" in s:
            children = tuple(ManifoldPattern.from_compact(part) for part in s.split("|"))
            return ManifoldPattern("product", children)
        if s == "*":
            return ManifoldPattern("full-space", ())
        for kind, chars in (
            ("signed-support", _SIGNED_CHARS),
            ("face", _FACE_CHARS),
            ("group-support", _GROUP_CHARS),
        ):
            inverse = {c: v for v, c in chars.items()}
            if s and all(c in inverse for c in s):
                return ManifoldPattern(kind, tuple(inverse[c] for c in s))
        raise ValueError(f"unparseable pattern string {s!r}")


def product_pattern(children: Sequence[ManifoldPattern]) -> ManifoldPattern:
    """Product pattern with nested products flattened for stable round-trips."""
    flat: list[ManifoldPattern] = []
    for child in children:
        if child.kind == "product":
            flat.extend(child.data)
        else:
            flat.append(child)
    return ManifoldPattern("product", tuple(flat))


FULL_SPACE = ManifoldPattern("full-space", ())


@dataclass(frozen=True)
class LocalModel:
    """Local description of the pattern sheet through a point.

    tangent and normal are coordinate embeddings (orthonormal columns) of
    the sheet's tangent and normal spaces; smooth_grad is the gradient of a
    twice-smooth extension of the function off the sheet.
    """

    tangent: np.ndarray
    normal: np.ndarray
    smooth_grad: Callable[[Vector], Vector]


class ProxFn:
    """Base class: a convex function with an exact prox and pattern calculus."""

    def __init__(self, name: str, dim: int):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.name = name
        self.dim = dim

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, gamma: float, x) -> Vector:
        raise NotImplementedError

    def pattern(self, x) -> ManifoldPattern:
        raise NotImplementedError

    def subdiff_dist(self, x, v) -> float:
        raise NotImplementedError

    def nondeg_margin(self, x, v, tol: float = SUBGRADIENT_TOL) -> float:
        raise NotImplementedError

    def local_model(self, u) -> LocalModel:
        raise NotImplementedError

    def _check_gamma(self, gamma: float) -> float:
        if gamma <= 0:
            raise ValueError("prox parameter must be positive")
        return float(gamma)

    def _require_subgradient(self, x, v, tol: float = SUBGRADIENT_TOL) -> None:
        d = self.subdiff_dist(x, v)
        if not d <= tol:
            raise PreconditionError(
                f"{self.name}: vector is not a subgradient (distance {d:.3e})"
            )

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, dim={self.dim})"


class L1(ProxFn):
    """Weighted absolute-value sum: lam * sum |x_i|."""

    def __init__(self, lam: float, dim: int):
        if lam <= 0:
            raise ValueError("weight must be positive")
        super().__init__(f"l1({lam:g})", dim)
        self.lam = float(lam)

    def value(self, x) -> float:
        return self.lam * float(np.sum(np.abs(as_vector(x, self.dim))))

    def prox(self, gamma, x) -> Vector:
        gamma = self._check_gamma(gamma)
        x = as_vector(x, self.dim)
        return np.sign(x) * np.maximum(np.abs(x) - gamma * self.lam, 0.0)

    def pattern(self, x) -> ManifoldPattern:
        x = as_vector(x, self.dim)
        return ManifoldPattern("signed-support", tuple(int(np.sign(t)) for t in x))

    def subdiff_dist(self, x, v) -> float:
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        on = x != 0.0
        d = np.where(on, v - self.lam * np.sign(x), np.maximum(np.abs(v) - self.lam, 0.0))
        return float(np.linalg.norm(d))

    def nondeg_margin(self, x, v, tol: float = SUBGRADIENT_TOL) -> float:
        self._require_subgradient(x, v, tol)
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        off = x == 0.0
        if not np.any(off):
            return float("inf")
        return float(np.min(self.lam - np.abs(v[off])))

    def local_model(self, u) -> LocalModel:
        u = as_vector(u, self.dim)
        support = np.flatnonzero(u != 0.0)
        complement = np.flatnonzero(u == 0.0)
        eye = np.eye(self.dim)
        grad = self.lam * np.sign(u)
        return LocalModel(eye[:, support], eye[:, complement], lambda _u: grad)


class Box(ProxFn):
    """Indicator of the box [lower, upper]^n; prox is the clamp."""

    def __init__(self, lower, upper, dim: int):
        super().__init__("box", dim)
        self.lower = np.broadcast_to(np.asarray(lower, dtype=float), (dim,)).copy()
        self.upper = np.broadcast_to(np.asarray(upper, dtype=float), (dim,)).copy()
        if not np.all(self.lower < self.upper):
            raise ValueError("box bounds must satisfy lower < upper")

    def value(self, x) -> float:
        x = as_vector(x, self.dim)
        inside = np.all(x >= self.lower) and np.all(x <= self.upper)
        return 0.0 if inside else float("inf")

    def prox(self, gamma, x) -> Vector:
        self._check_gamma(gamma)
        return np.clip(as_vector(x, self.dim), self.lower, self.upper)

    def pattern(self, x) -> ManifoldPattern:
        x = as_vector(x, self.dim)
        face = np.where(x <= self.lower, 0, np.where(x >= self.upper, 2, 1))
        return ManifoldPattern("face", tuple(int(t) for t in face))

    def subdiff_dist(self, x, v) -> float:
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        if self.value(x) == float("inf"):
            return float("inf")
        at_lower = x == self.lower
        at_upper = x == self.upper
        d = np.abs(v).astype(float)
        d[at_lower] = np.maximum(v[at_lower], 0.0)
        d[at_upper] = np.maximum(-v[at_upper], 0.0)
        return float(np.linalg.norm(d))

    def nondeg_margin(self, x, v, tol: float = SUBGRADIENT_TOL) -> float:
        self._require_subgradient(x, v, tol)
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        margins = []
        margins.extend(-v[x == self.lower])
        margins.extend(v[x == self.upper])
        return float(min(margins)) if margins else float("inf")

    def local_model(self, u) -> LocalModel:
        u = as_vector(u, self.dim)
        active = (u == self.lower) | (u == self.upper)
        eye = np.eye(self.dim)
        zero = np.zeros(self.dim)
        return LocalModel(eye[:, ~active], eye[:, active], lambda _u: zero)


class GroupL1(ProxFn):
    """Sum of Euclidean norms over a partition of the coordinates."""

    def __init__(self, groups: Sequence[Sequence[int]], lam: float, dim: int):
        if lam <= 0:
            raise ValueError("weight must be positive")
        super().__init__(f"group-l1({lam:g})", dim)
        self.lam = float(lam)
        self.groups = tuple(tuple(int(i) for i in g) for g in groups)
        seen: set[int] = set()
        for g in self.groups:
            if not g:
                raise ValueError("groups must be nonempty")
            if seen & set(g):
                raise ValueError("groups must not overlap")
            seen |= set(g)
        if seen != set(range(dim)):
            raise ValueError("groups must partition the coordinates")

    def value(self, x) -> float:
        x = as_vector(x, self.dim)
        return self.lam * float(sum(np.linalg.norm(x[list(g)]) for g in self.groups))

    def prox(self, gamma, x) -> Vector:
        gamma = self._check_gamma(gamma)
        x = as_vector(x, self.dim)
        out = np.zeros(self.dim)
        for g in self.groups:
            idx = list(g)
            nrm = np.linalg.norm(x[idx])
            if nrm > gamma * self.lam:
                out[idx] = (1.0 - gamma * self.lam / nrm) * x[idx]
        return out

    def pattern(self, x) -> ManifoldPattern:
        x = as_vector(x, self.dim)
        bits = tuple(int(np.any(x[list(g)] != 0.0)) for g in self.groups)
        return ManifoldPattern("group-support", bits)

    def subdiff_dist(self, x, v) -> float:
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        total = 0.0
        for g in self.groups:
            idx = list(g)
            nrm = np.linalg.norm(x[idx])
            if nrm > 0.0:
                total += float(np.sum((v[idx] - self.lam * x[idx] / nrm) ** 2))
            else:
                total += max(float(np.linalg.norm(v[idx])) - self.lam, 0.0) ** 2
        return float(np.sqrt(total))

    def nondeg_margin(self, x, v, tol: float = SUBGRADIENT_TOL) -> float:
        self._require_subgradient(x, v, tol)
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        margins = []
        for g in self.groups:
            idx = list(g)
            if np.linalg.norm(x[idx]) == 0.0:
                margins.append(self.lam - float(np.linalg.norm(v[idx])))
        return float(min(margins)) if margins else float("inf")

    def local_model(self, u) -> LocalModel:
        u = as_vector(u, self.dim)
        active: list[int] = []
        inactive: list[int] = []
        active_groups = []
        for g in self.groups:
            idx = list(g)
            if np.linalg.norm(u[idx]) > 0.0:
                active.extend(idx)
                active_groups.append(idx)
            else:
                inactive.extend(idx)
        eye = np.eye(self.dim)

        def grad(point: Vector) -> Vector:
            out = np.zeros(self.dim)
            for idx in active_groups:
                out[idx] = self.lam * point[idx] / np.linalg.norm(point[idx])
            return out

        return LocalModel(eye[:, active], eye[:, inactive], grad)


class Zero(ProxFn):
    """The zero function; its subdifferential is the origin everywhere."""

    def __init__(self, dim: int):
        super().__init__("zero", dim)

    def value(self, x) -> float:
        as_vector(x, self.dim)
        return 0.0

    def prox(self, gamma, x) -> Vector:
        self._check_gamma(gamma)
        return as_vector(x, self.dim).copy()

    def pattern(self, x) -> ManifoldPattern:
        return FULL_SPACE

    def subdiff_dist(self, x, v) -> float:
        as_vector(x, self.dim)
        return float(np.linalg.norm(as_vector(v, self.dim)))

    def nondeg_margin(self, x, v, tol: float = SUBGRADIENT_TOL) -> float:
        self._require_subgradient(x, v, tol)
        return float("inf")

    def local_model(self, u) -> LocalModel:
        zero = np.zeros(self.dim)
        return LocalModel(np.eye(self.dim), np.zeros((self.dim, 0)), lambda _u: zero)


class QuadraticShift(ProxFn):
    """The smooth member q(x) = ||x - center||^2 / 2, for composite tests."""

    def __init__(self, center):
        center = as_vector(center)
        super().__init__("quadratic-shift", center.shape[0])
        self.center = center

    def value(self, x) -> float:
        x = as_vector(x, self.dim)
        return 0.5 * float(np.sum((x - self.center) ** 2))

    def prox(self, gamma, x) -> Vector:
        gamma = self._check_gamma(gamma)
        x = as_vector(x, self.dim)
        return (x + gamma * self.center) / (1.0 + gamma)

    def pattern(self, x) -> ManifoldPattern:
        return FULL_SPACE

    def subdiff_dist(self, x, v) -> float:
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        return float(np.linalg.norm(v - (x - self.center)))

    def nondeg_margin(self, x, v, tol: float = SUBGRADIENT_TOL) -> float:
        self._require_subgradient(x, v, tol)
        return float("inf")

    def local_model(self, u) -> LocalModel:
        return LocalModel(
            np.eye(self.dim), np.zeros((self.dim, 0)), lambda p: p - self.center
        )


class Separable(ProxFn):
    """Block-separable direct sum of prox functions on disjoint coordinates."""

    def __init__(self, blocks: Sequence[tuple[ProxFn, Sequence[int]]]):
        dim = sum(len(coords) for _, coords in blocks)
        super().__init__("separable", dim)
        self.blocks = tuple((fn, tuple(int(i) for i in coords)) for fn, coords in blocks)
        seen: set[int] = set()
        for fn, coords in self.blocks:
            if fn.dim != len(coords):
                raise ValueError(f"block {fn.name} does not match its coordinate count")
            if seen & set(coords):
                raise ValueError("blocks must not share coordinates")
            seen |= set(coords)
        if seen != set(range(dim)):
            raise ValueError("blocks must partition the coordinates")

    def value(self, x) -> float:
        x = as_vector(x, self.dim)
        return float(sum(fn.value(x[list(c)]) for fn, c in self.blocks))

    def prox(self, gamma, x) -> Vector:
        gamma = self._check_gamma(gamma)
        x = as_vector(x, self.dim)
        out = np.empty(self.dim)
        for fn, coords in self.blocks:
            out[list(coords)] = fn.prox(gamma, x[list(coords)])
        return out

    def pattern(self, x) -> ManifoldPattern:
        x = as_vector(x, self.dim)
        return product_pattern([fn.pattern(x[list(c)]) for fn, c in self.blocks])

    def subdiff_dist(self, x, v) -> float:
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        parts = [fn.subdiff_dist(x[list(c)], v[list(c)]) for fn, c in self.blocks]
        if any(np.isinf(p) for p in parts):
            return float("inf")
        return float(np.sqrt(sum(p * p for p in parts)))

    def nondeg_margin(self, x, v, tol: float = SUBGRADIENT_TOL) -> float:
        x = as_vector(x, self.dim)
        v = as_vector(v, self.dim)
        return float(
            min(fn.nondeg_margin(x[list(c)], v[list(c)], tol) for fn, c in self.blocks)
        )

    def local_model(self, u) -> LocalModel:
        u = as_vector(u, self.dim)
        t_cols: list[np.ndarray] = []
        n_cols: list[np.ndarray] = []
        grads = []
        for fn, coords in self.blocks:
            idx = list(coords)
            model = fn.local_model(u[idx])
            embed_t = np.zeros((self.dim, model.tangent.shape[1]))
            embed_t[idx, :] = model.tangent
            embed_n = np.zeros((self.dim, model.normal.shape[1]))
            embed_n[idx, :] = model.normal
            t_cols.append(embed_t)
            n_cols.append(embed_n)
            grads.append((idx, model.smooth_grad))

        def grad(point: Vector) -> Vector:
            out = np.zeros(self.dim)
            for idx, g in grads:
                out[idx] = g(point[idx])
            return out

        return LocalModel(np.hstack(t_cols), np.hstack(n_cols), grad)


def subdiff_graph_rep(
    f: ProxFn,
    smooth_part: SmoothMap | None,
    u_bar,
    v_bar,
    tol: float = SUBGRADIENT_TOL,
) -> CoordGraphRep:
    """Coordinate representation of the subdifferential graph of f + smooth_part.

    The chart parameterizes the pattern sheet through u_bar; values are the
    gradient of the smooth extension along the sheet plus a normal-space
    offset parameterized around v_bar.  Requires v_bar (minus the smooth
    gradient) to be a subgradient with positive nondegeneracy margin.
    """
    u_bar = as_vector(u_bar, f.dim)
    v_bar = as_vector(v_bar, f.dim)
    if smooth_part is not None and (smooth_part.in_dim != f.dim or smooth_part.out_dim != 1):
        raise ValueError("smooth part must be a scalar function on the same space")

    def grad_smooth(u: Vector) -> Vector:
        if smooth_part is None:
            return np.zeros(f.dim)
        return smooth_part.jac(u).ravel()

    s_bar = v_bar - grad_smooth(u_bar)
    dist = f.subdiff_dist(u_bar, s_bar)
    if not dist <= tol:
        raise PreconditionError(
            f"v_bar is not a subgradient at u_bar (distance {dist:.3e})"
        )
    margin = f.nondeg_margin(u_bar, s_bar)
    if not margin > 0:
        raise PreconditionError(
            f"nondegeneracy margin is {margin:.3e}; the sheet is not identifiable here"
        )
    model = f.local_model(u_bar)
    tangent, normal = model.tangent, model.normal
    k = tangent.shape[1]

    def total_grad(u: Vector) -> Vector:
        return model.smooth_grad(u) + grad_smooth(u)

    offset = v_bar - total_grad(u_bar)
    residual = tangent.T @ offset
    if residual.size and np.max(np.abs(residual)) > 10 * tol:
        raise PreconditionError("v_bar has a tangential component off the sheet")

    h = SmoothMap(lambda w: u_bar + tangent @ w, k, f.dim, jacobian=lambda w: tangent)

    def values(wz):
        return total_grad(u_bar + tangent @ wz[:k]) + offset + normal @ wz[k:]

    g = SmoothMap(values, k + normal.shape[1], f.dim)
    return CoordGraphRep(h, g, u_bar, g(np.zeros(g.in_dim)))
