"""Numpy implementation of the kernel API, used when the extension is absent.

Same signatures and status codes as the compiled module; the share profile
bisects all signal nodes at once instead of looping.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _u(fam, p1, p2, s, c):
    if fam == 0:
        return s * np.power(c, 1.0 - p1) / (1.0 - p1)
    if fam == 1:
        return -s * np.expm1(-p1 * c)
    return s * (p1 * c - 0.5 * p2 * c * c)


def _du(fam, p1, p2, s, c):
    if fam == 0:
        return s * np.power(c, -p1)
    if fam == 1:
        return s * p1 * np.exp(-p1 * c)
    return s * (p1 - p2 * c)


def _wsum(w, x):
    # sequential reduction over the noise axis, same order as the C loop
    acc = w[0] * x[..., 0]
    for j in range(1, x.shape[-1]):
        acc = acc + w[j] * x[..., j]
    return acc


def eu_theta(fam, p1, p2, s, c0, d, w, theta):
    return float(_wsum(w, _u(fam, p1, p2, s, c0 + theta * d)))


def foc_theta(fam, p1, p2, s, c0, d, w, theta):
    return float(_wsum(w, _du(fam, p1, p2, s, c0 + theta * d) * d))


def _bisect_rows(fam, p1, p2, s, c0, d, w, rtol, max_iter):
    """Vectorised bisection; ``c0`` and ``d`` have shape (nodes, noise)."""
    n = c0.shape[0]

    def foc(t):
        return _wsum(w, _du(fam, p1, p2, s, c0 + t[:, None] * d) * d)

    theta = np.zeros(n)
    status = np.full(n, -9, dtype=np.int64)
    f0 = foc(np.zeros(n))
    f1 = foc(np.ones(n))

    status[np.isnan(f0)] = -1
    corner0 = (status == -9) & (f0 <= 0.0)
    status[corner0] = 0
    bad1 = (status == -9) & np.isnan(f1)
    status[bad1] = -1
    theta[bad1] = 1.0
    corner1 = (status == -9) & (f1 >= 0.0)
    status[corner1] = 1
    theta[corner1] = 1.0

    active = status == -9
    tol = rtol * np.abs(f0)
    lo = np.zeros(n)
    hi = np.ones(n)
    for _ in range(max_iter):
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        fm = foc(mid)
        nan = active & np.isnan(fm)
        met = active & ~nan & (np.abs(fm) <= tol)
        flat = active & ~nan & ~met & ((mid <= lo) | (mid >= hi))
        for mask, code in ((nan, -1), (met, 2), (flat, 3)):
            theta[mask] = mid[mask]
            status[mask] = code
        active &= ~(nan | met | flat)
        up = active & (fm > 0.0)
        down = active & ~(fm > 0.0)
        lo = np.where(up, mid, lo)
        hi = np.where(down, mid, hi)
    theta[active] = 0.5 * (lo[active] + hi[active])
    status[active] = 3
    return theta, status


def optimal_share(fam, p1, p2, s, c0, d, w, rtol, max_iter):
    theta, status = _bisect_rows(fam, p1, p2, s, c0[None, :], d[None, :], w, rtol, max_iter)
    return float(theta[0]), int(status[0])


def grid_argmax(fam, p1, p2, s, c0, d, w, n):
    step = 1.0 / (n - 1)
    thetas = np.arange(n) * step
    vals = _wsum(w, _u(fam, p1, p2, s, c0[None, :] + thetas[:, None] * d[None, :]))
    k = int(np.argmax(vals))  # first maximum, so ties go to the smaller share
    if k == n - 1:
        return 1.0
    return k * step


def share_profile(fam, p1, p2, s, ys, eps, we, A, omega, R, abar, binary, rtol, max_iter):
    a = ys[:, None] + eps[None, :]
    c0 = (A + a) * omega - R * a / abar
    d = R * (a / abar - 1.0)
    if binary:
        one = _wsum(we, _u(fam, p1, p2, s, c0 + d))
        zero = _wsum(we, _u(fam, p1, p2, s, c0))
        pick = one > zero
        return pick.astype(np.float64), pick.astype(np.int64)
    return _bisect_rows(fam, p1, p2, s, c0, d, we, rtol, max_iter)


def uniforms(seed, start, n, stride, offset):
    counters = (np.arange(n, dtype=np.uint64) + np.uint64(start)) * np.uint64(stride) + np.uint64(offset)
    z = np.uint64(seed) + (counters + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
