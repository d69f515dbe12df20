"""Pointwise p-barycenters: argmin_z sum_i lam_i |x_i - z|^p.

The batched routines operate on arrays of shape ``(B, N, d)`` so that the
multi-marginal solver can price thousands of point tuples at once; the
single-configuration API wraps them with ``B = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import SolverError, ValidationError

MAX_ITER = 10_000
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class PointConfiguration:
    """N points in R^d with convex weights and an exponent ``1 < p < inf``."""

    points: np.ndarray
    weights: np.ndarray
    p: float

    def __post_init__(self):
        pts, lam = _check_points_weights(self.points, self.weights)
        p = float(self.p)
        if not 1.0 < p < np.inf:
            raise ValidationError(f"exponent p={p!r} must satisfy 1 < p < inf")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", lam)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class BarycenterResult:
    z: np.ndarray
    eta: np.ndarray
    residual: float
    singular_set: frozenset
    n_iter: int = 0


def _check_points_weights(points, weights=None):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValidationError("points must be a non-empty (N, d) array")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points must be finite")
    n = pts.shape[0]
    if weights is None:
        lam = np.full(n, 1.0 / n)
    else:
        lam = np.asarray(weights, dtype=float).ravel()
    if lam.shape != (n,):
        raise ValidationError(f"expected {n} weights, got {lam.size}")
    if np.any(lam <= 0):
        raise ValidationError("weights must be strictly positive")
    if abs(lam.sum() - 1.0) > 1e-12:
        raise ValidationError(f"weights sum to {lam.sum()!r}, expected 1")
    return pts, lam


# ---------------------------------------------------------------------------
# batched core

def objective(x: np.ndarray, lam: np.ndarray, p: float,
              z: np.ndarray) -> np.ndarray:
    """F_p(z) = sum_i lam_i |x_i - z|^p for ``x`` (B, N, d), ``z`` (B, d)."""
    r = np.linalg.norm(x - z[:, None, :], axis=2)
    return (lam * r ** p).sum(axis=1)


def euler_lagrange(x: np.ndarray, lam: np.ndarray, p: float,
                   z: np.ndarray) -> np.ndarray:
    """sum_i lam_i p |x_i - z|^{p-2} (x_i - z), shape (B, d).

    Terms with ``x_i == z`` contribute zero (the gradient of |.|^p vanishes at
    the origin for p > 1).
    """
    diff = x - z[:, None, :]
    r = np.linalg.norm(diff, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(r > 0, lam * p * r ** (p - 2.0), 0.0)
    return (coef[..., None] * diff).sum(axis=1)


def _solve_1d(x: np.ndarray, lam: np.ndarray, p: float):
    """Bisection on the decreasing 1D Euler-Lagrange function."""
    lo = x.min(axis=1)
    hi = x.max(axis=1)

    def g(z):
        d = x - z[:, None]
        return (lam * p * np.sign(d) * np.abs(d) ** (p - 1.0)).sum(axis=1)

    n_iter = 0
    active = hi > lo
    while np.any(active) and n_iter < MAX_ITER:
        n_iter += 1
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        go_right = active & (gm > 0)
        go_left = active & (gm < 0)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_left, mid, hi)
        exact = active & (gm == 0)
        lo = np.where(exact, mid, lo)
        hi = np.where(exact, mid, hi)
        mid2 = 0.5 * (lo + hi)
        active = (hi > lo) & (mid2 > lo) & (mid2 < hi)
    if np.any(active):
        raise SolverError("1D bisection did not converge")
    glo, ghi = g(lo), g(hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        sec = np.where(glo > ghi, lo + glo * (hi - lo) / (glo - ghi), lo)
    sec = np.clip(sec, lo, hi)
    cands = np.stack([lo, hi, sec], axis=1)
    gc = np.abs(np.stack([glo, ghi, g(sec)], axis=1))
    z = cands[np.arange(len(lo)), np.argmin(gc, axis=1)]
    return z[:, None], n_iter


def _solve_nd(x: np.ndarray, lam: np.ndarray, p: float, tol: float):
    """Damped fixed-point iteration z <- sum_i eta_i(z) x_i.

    The eta-step equals a gradient step scaled by 1 / (p sum_i w_i) with
    w_i = lam_i |x_i - z|^{p-2}. Points coinciding with the iterate are
    dropped from the weights, which turns the step into the descent step of
    the reduced objective. The trial step length is halved until F_p
    decreases; it grows back by a factor 2 (capped at 1) after a success.
    For p > 2 each iteration first tries a full Newton step and keeps it when
    it lowers F_p, which restores fast local convergence where the eta-step
    alone is poorly scaled. For p < 2 the Hessian blows up at the data points
    and Newton oscillates, so only the eta-step is used.

    Close to the optimum F_p stops resolving progress in floating point, so
    a trial is also accepted when F_p is unchanged up to rounding and the
    Euler-Lagrange residual shrinks.
    """
    B, _, d = x.shape
    eye = np.eye(d)
    z = (lam[None, :, None] * x).sum(axis=1)  # p = 2 barycenter as start
    scale = np.maximum(np.ptp(x, axis=1).max(axis=1), 1e-300)

    def state(z):
        diff = x - z[:, None, :]
        r = np.linalg.norm(diff, axis=2)
        snap = r <= 1e-15 * scale[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(snap, 0.0, lam * r ** (p - 2.0))
        grad = (p * w[..., None] * diff).sum(axis=1)
        f = (lam * r ** p).sum(axis=1)
        return diff, r, snap, w, grad, f

    diff, r, snap, w, grad, fz = state(z)
    res = np.linalg.norm(grad, axis=1)
    step = np.ones(B)
    done = res <= tol
    n_iter = 0
    while not np.all(done):
        n_iter += 1
        if n_iter > MAX_ITER:
            raise SolverError(
                f"p-barycenter iteration did not converge in {MAX_ITER} steps")
        wsum = w.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            eta_dir = (w[..., None] * diff).sum(axis=1) / wsum[:, None]
        eta_dir[~np.isfinite(eta_dir).all(axis=1)] = 0.0

        newton = np.zeros_like(z)
        if p > 2:
            u = np.where(snap[..., None], 0.0,
                         diff / np.where(snap, 1.0, r)[..., None])
            hess = (p * w[..., None, None] * (
                eye + (p - 2.0) * u[..., :, None] * u[..., None, :])).sum(axis=1)
            hess[done] = eye
            try:
                newton = np.linalg.solve(hess, grad[..., None])[..., 0]
            except np.linalg.LinAlgError:
                pass

        accepted = done.copy()
        new_z = z.copy()
        tries = [(newton, np.ones(B), False)] if p > 2 else []
        t = step.copy()
        for _ in range(60):
            tries.append((eta_dir, t.copy(), True))
            t = 0.5 * t
        for direction, tt, is_eta in tries:
            trial = z + tt[:, None] * direction
            _, _, _, _, g_t, f_t = state(trial)
            r_t = np.linalg.norm(g_t, axis=1)
            finite = np.isfinite(f_t) & np.isfinite(r_t)
            better = (f_t < fz) | ((f_t <= fz + 1e-14 * np.abs(fz)) & (r_t < res))
            ok = ~accepted & finite & better
            new_z[ok] = trial[ok]
            if is_eta:
                step = np.where(ok, np.minimum(1.0, 2.0 * tt), step)
            accepted |= ok
            if np.all(accepted):
                break
        # no representable progress left: machine-precision optimum
        done |= ~accepted
        z = new_z
        diff, r, snap, w, grad, fz = state(z)
        res = np.linalg.norm(grad, axis=1)
        done |= res <= tol
    return z, n_iter


def _snap_to_points(x: np.ndarray, lam: np.ndarray, p: float,
                    z: np.ndarray, rel: float = 1e-9) -> np.ndarray:
    """Move z onto a nearby input point when that does not raise F_p.

    Near a coincidence the optimum for p close to 1 can sit far below the
    float spacing from x_i; landing exactly on x_i makes the singular set
    detectable.
    """
    scale = np.ptp(x, axis=1).max(axis=1)
    r = np.linalg.norm(x - z[:, None, :], axis=2)
    near = (r <= rel * scale[:, None]) & (r > 0)
    if not np.any(near):
        return z
    rows = np.flatnonzero(near.any(axis=1))
    fz = objective(x[rows], lam, p, z[rows])
    for i in range(x.shape[1]):
        cand = x[rows, i, :]
        fc = objective(x[rows], lam, p, cand)
        take = near[rows, i] & (fc <= fz)
        z[rows[take]] = cand[take]
        fz = np.where(take, fc, fz)
    return z


def solve_batch(x: np.ndarray, lam: np.ndarray, p: float,
                tol: float = DEFAULT_TOL) -> np.ndarray:
    """p-barycenters of a batch of point tuples.

    Parameters
    ----------
    x : ndarray, shape (B, N, d)
    lam : ndarray, shape (N,)
    p : float
        Exponent, ``1 < p < inf``.

    Returns
    -------
    z : ndarray, shape (B, d)
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValidationError("expected a (B, N, d) array")
    if x.shape[0] == 0:
        return np.zeros((0, x.shape[2]))
    if p == 2.0:
        return (lam[None, :, None] * x).sum(axis=1)
    if x.shape[2] == 1:
        z, _ = _solve_1d(x[:, :, 0], lam, p)
    else:
        z, _ = _solve_nd(x, lam, p, tol)
    return _snap_to_points(x, lam, p, z)


def cost_batch(x: np.ndarray, lam: np.ndarray, p: float,
               tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(c_p, z)`` for every tuple in ``x`` (B, N, d)."""
    z = solve_batch(x, lam, p, tol)
    return objective(x, lam, p, z), z


# ---------------------------------------------------------------------------
# single configuration API

def _singular_threshold(points: np.ndarray, p: float, tol: float) -> float:
    diam = 0.0
    if len(points) > 1:
        d = points[:, None, :] - points[None, :, :]
        diam = float(np.sqrt((d ** 2).sum(axis=2)).max())
    return tol ** (1.0 / (p - 1.0)) * diam


def convex_weights(points: np.ndarray, weights: np.ndarray, p: float,
                   z: np.ndarray, singular=()) -> np.ndarray:
    """Convex-combination weights eta_i with z = sum_i eta_i x_i.

    With an empty singular set eta_i is proportional to
    lam_i |x_i - z|^{p-2}. For p < 2 a coincident point carries infinite
    weight, so the mass is shared equally over the singular set instead.
    """
    singular = sorted(singular)
    if singular and p < 2:
        eta = np.zeros(len(points))
        eta[singular] = 1.0 / len(singular)
        return eta
    r = np.linalg.norm(points - z, axis=1)
    w = weights * r ** (p - 2.0)
    if not np.all(np.isfinite(w)) or w.sum() == 0:
        eta = np.zeros(len(points))
        idx = singular or [int(np.argmin(r))]
        eta[idx] = 1.0 / len(idx)
        return eta
    return w / w.sum()


def solve_point_barycenter(cfg: PointConfiguration,
                           tol: float = DEFAULT_TOL) -> BarycenterResult:
    """p-barycenter of one configuration with diagnostics.

    Examples
    --------
    >>> cfg = PointConfiguration([[0.0], [1.0]], [0.5, 0.5], 2.0)
    >>> float(solve_point_barycenter(cfg).z[0])
    0.5
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    x = cfg.points[None]
    lam, p = cfg.weights, cfg.p
    n_iter = 0
    if p == 2.0:
        z = lam @ cfg.points
    elif cfg.dim == 1:
        z, n_iter = _solve_1d(x[:, :, 0], lam, p)
        z = z[0]
    else:
        z, n_iter = _solve_nd(x, lam, p, tol)
        z = z[0]
    if p != 2.0:
        z = _snap_to_points(x, lam, p, z[None].copy())[0]
    residual = float(np.linalg.norm(euler_lagrange(x, lam, p, z[None])[0]))
    thr = _singular_threshold(cfg.points, p, tol)
    r = np.linalg.norm(cfg.points - z, axis=1)
    singular = frozenset(int(i) for i in np.flatnonzero(r <= thr))
    eta = convex_weights(cfg.points, lam, p, z, singular)
    return BarycenterResult(z=z, eta=eta, residual=residual,
                            singular_set=singular, n_iter=n_iter)


def point_barycenter(points, weights=None, p: float = 2.0,
                     tol: float = DEFAULT_TOL) -> np.ndarray:
    """Convenience wrapper returning only the barycenter coordinates."""
    return solve_point_barycenter(PointConfiguration(
        *_check_points_weights(points, weights), p), tol).z


def cost_cp(cfg: PointConfiguration, tol: float = DEFAULT_TOL) -> float:
    """c_p(x_1, ..., x_N) = min_z sum_i lam_i |x_i - z|^p."""
    res = solve_point_barycenter(cfg, tol)
    r = np.linalg.norm(cfg.points - res.z, axis=1)
    return float(cfg.weights @ r ** cfg.p)


def _as_line(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 2:
        if pts.shape[1] != 1:
            raise ValidationError("limit barycenters are defined for dim = 1")
        pts = pts[:, 0]
    if pts.ndim != 1 or pts.size == 0:
        raise ValidationError("expected a non-empty list of reals")
    return pts


def barycenter_limit_p1(points, weights=None) -> float:
    """Weighted median: minimizer of sum_i lam_i |x_i - z| on the line.

    Ties (a whole interval of minimizers) resolve to the smallest
    minimizing atom.
    """
    pts = _as_line(points)
    _, lam = _check_points_weights(pts, weights)
    order = np.argsort(pts, kind="stable")
    cw = np.cumsum(lam[order])
    k = int(np.searchsorted(cw, 0.5 - 1e-12, side="left"))
    return float(pts[order][min(k, len(pts) - 1)])


def barycenter_limit_pinf(points) -> float:
    """Midrange (min + max) / 2, the minimizer of max_i |x_i - z|."""
    pts = _as_line(points)
    return float(0.5 * (pts.min() + pts.max()))
