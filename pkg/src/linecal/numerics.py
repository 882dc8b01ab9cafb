"""Complex linear least squares and box-constrained linear least squares."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from linecal.exceptions import CalibrationError, IllConditionedError

RANK_TOL = 1e-10


def condition_number(a: np.ndarray) -> float:
    s = np.linalg.svd(np.asarray(a), compute_uv=False)
    if s.size == 0 or s[-1] == 0:
        return float("inf")
    return float(s[0] / s[-1])


def complex_lse(a, b) -> np.ndarray:
    """Minimise ``||A X - B||_F`` through a QR factorisation of ``A``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    n, m = a.shape
    if n < m:
        raise CalibrationError(f"need at least {m} rows, got {n}")
    if b.shape[0] != n:
        raise CalibrationError("A and B have different row counts")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] < RANK_TOL * s[0]:
        cond = float("inf") if s[-1] == 0 else float(s[0] / s[-1])
        raise IllConditionedError("regression matrix is rank deficient", cond)
    q, r = np.linalg.qr(a)
    x = solve_triangular(r, q.conj().T @ b)
    return x[:, 0] if vector else x


def _objective(g, h, k):
    r = g @ k - h
    return float(r @ r)


def box_qp(g, h, lower, upper, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Minimise ``||G k - h||^2`` subject to ``lower <= k <= upper``.

    Active-set iteration: the free variables are minimised exactly on their
    subspace and the step is cut at the first bound it crosses.  When no
    progress is possible that way, a projected-gradient step with exact line
    search changes the active set.  Stops when the projected gradient norm
    drops below ``tol * max(1, ||G^T h||)``.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = g.shape[1]
    if lower.shape != (d,) or upper.shape != (d,):
        raise CalibrationError("bounds must match the number of columns of G")
    if np.any(lower > upper):
        raise CalibrationError(f"lower bound exceeds upper bound at {np.flatnonzero(lower > upper).tolist()}")
    for arr in (g, h):
        if not np.all(np.isfinite(arr)):
            raise CalibrationError("non-finite input to box_qp")
    if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
        raise CalibrationError("non-finite input to box_qp")

    hess = g.T @ g
    lin = g.T @ h
    stop = tol * max(1.0, float(np.linalg.norm(lin)))

    k0 = np.linalg.lstsq(g, h, rcond=None)[0]
    k = np.clip(k0, lower, upper)
    for _ in range(max_iter):
        grad = 2.0 * (hess @ k - lin)
        pg = k - np.clip(k - grad, lower, upper)
        if np.linalg.norm(pg) <= stop:
            break
        binding = ((k <= lower) & (grad > 0)) | ((k >= upper) & (grad < 0))
        free = ~binding
        moved = False
        if free.any():
            rhs = h - g[:, binding] @ k[binding]
            target = np.linalg.lstsq(g[:, free], rhs, rcond=None)[0]
            step = target - k[free]
            lo, hi = lower[free], upper[free]
            cur = k[free]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hi = np.where(step > 0, (hi - cur) / step, np.inf)
                t_lo = np.where(step < 0, (lo - cur) / step, np.inf)
            t = min(1.0, float(np.min(np.minimum(t_hi, t_lo))))
            if t > 0 and np.linalg.norm(step) > 0:
                new = cur + t * step
                if t < 1.0:
                    # snap coordinates that reached a bound
                    new = np.where(np.isclose(new, hi, rtol=0, atol=1e-15) | (new > hi), hi, new)
                    new = np.where(np.isclose(new, lo, rtol=0, atol=1e-15) | (new < lo), lo, new)
                k_new = k.copy()
                k_new[free] = new
                if _objective(g, h, k_new) <= _objective(g, h, k) + 1e-15 * max(1.0, _objective(g, h, k)):
                    moved = not np.array_equal(k_new, k)
                    k = k_new
        if not moved:
            # projected gradient step with exact line search along -grad
            p = -grad
            p[((k <= lower) & (p < 0)) | ((k >= upper) & (p > 0))] = 0.0
            curv = float(p @ hess @ p)
            if curv <= 0 or not np.any(p):
                break
            t_star = float(-(grad @ p) / (2.0 * curv))
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hi = np.where(p > 0, (upper - k) / p, np.inf)
                t_lo = np.where(p < 0, (lower - k) / p, np.inf)
            t = min(t_star, float(np.min(np.minimum(t_hi, t_lo))))
            k = np.clip(k + t * p, lower, upper)
    return k
