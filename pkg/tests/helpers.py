"""Shared test oracles, independent of the library code paths they check."""

import numpy as np

from psm import zoo


def prox_1d_brute(value_fn, gamma, x, lo, hi, step=1e-4, zoom_rounds=3):
    """Brute-force minimizer of value_fn(t) + (t - x)^2 / (2 gamma) on [lo, hi].

    Dense grid at the given step, then repeated zooming around the best
    grid point.  value_fn must be vectorized and may return +inf.
    """
    lo0, hi0 = float(lo), float(hi)

    def scan(a, b, n):
        grid = np.linspace(a, b, n)
        obj = value_fn(grid) + (grid - x) ** 2 / (2.0 * gamma)
        return grid, grid[int(np.argmin(obj))]

    n0 = max(int(np.ceil((hi0 - lo0) / step)) + 1, 3)
    grid, best = scan(lo0, hi0, n0)
    width = grid[1] - grid[0]
    for _ in range(zoom_rounds):
        a = max(lo0, best - width)
        b = min(hi0, best + width)
        grid, best = scan(a, b, 201)
        width = grid[1] - grid[0]
    return float(best)


def l1_prox_oracle(lam, gamma, x):
    span = abs(x) + gamma * lam + 1.0
    return prox_1d_brute(lambda t: lam * np.abs(t), gamma, x, -span, span)


def box_prox_oracle(lo, hi, gamma, x):
    def value(t):
        return np.where((t >= lo) & (t <= hi), 0.0, np.inf)

    return prox_1d_brute(value, gamma, x, lo, hi)


def group_prox_radial_oracle(lam, gamma, norm_x):
    """Radial reduction: block prox shrinks the norm by the 1-D weighted prox."""
    return prox_1d_brute(
        lambda r: np.where(r >= 0, lam * r, np.inf), gamma, norm_x, 0.0, norm_x + 1.0
    )


def random_quadratic_map(rng, in_dim, out_dim, scale=1.0):
    """Seeded smooth vector map with analytic Jacobian, for perturbation tests."""
    quads = [scale * rng.standard_normal((in_dim, in_dim)) for _ in range(out_dim)]
    lin = scale * rng.standard_normal((out_dim, in_dim))
    const = scale * rng.standard_normal(out_dim)
    return zoo.quadratic_vector_map(quads, lin, const)


def jacobian_rel_error(m, x):
    """Relative gap between the analytic and finite-difference Jacobians."""
    from psm import fd_jacobian

    analytic = m.jacobian(np.asarray(x, dtype=float))
    fd = fd_jacobian(m, x)
    denom = max(1.0, float(np.max(np.abs(analytic))))
    return float(np.max(np.abs(fd - analytic))) / denom


def records_equal(a, b):
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        if ra.k != rb.k:
            return False
        if ra.residual != rb.residual:
            return False
        if ra.pattern_x != rb.pattern_x or ra.pattern_y != rb.pattern_y:
            return False
        if not np.array_equal(ra.x, rb.x) or not np.array_equal(ra.y, rb.y):
            return False
    return True
