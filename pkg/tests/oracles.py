"""Independent brute-force references used by the test-suite."""

import itertools
import math

import numpy as np


def grid_minimize_1d(f, lo, hi, step=1e-7, n=41):
    """Minimize a unimodal ``f`` on [lo, hi] by repeated grid refinement.

    ``f`` is called with an array of candidates and returns their values.
    """
    if hi <= lo:
        return lo
    while True:
        xs = np.linspace(lo, hi, n)
        vals = np.asarray(f(xs), dtype=float)
        k = int(np.argmin(vals))
        h = xs[1] - xs[0]
        if h <= step:
            return xs[k]
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, n - 1)]


def coordinate_descent_barycenter(points, lam, p, step=1e-7, sweeps=2000):
    """Minimize sum_i lam_i |x_i - z|^p by coordinate-wise grid refinement."""
    points = np.asarray(points, float)
    lam = np.asarray(lam, float)
    box_lo, box_hi = points.min(axis=0), points.max(axis=0)
    z = lam @ points

    def F(V):
        r = np.linalg.norm(points[None, :, :] - V[:, None, :], axis=2)
        return (r ** p) @ lam

    for _ in range(sweeps):
        z_old = z.copy()
        for k in range(points.shape[1]):
            def fk(ts, k=k):
                V = np.repeat(z[None], len(ts), axis=0)
                V[:, k] = ts
                return F(V)
            z[k] = grid_minimize_1d(fk, box_lo[k], box_hi[k], step)
        if np.max(np.abs(z - z_old)) <= step / 10:
            break
    return z


def normal_cdf_bisection_ppf(y, tol=1e-14):
    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(-mid / math.sqrt(2)) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def permutation_min_cost(cost_matrix):
    """Minimum over permutation couplings (uniform two-marginal case)."""
    n = cost_matrix.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(cost_matrix[i, perm[i]] for i in range(n)) / n)
    return best
