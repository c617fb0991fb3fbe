"""Shape-preserving cubic interpolation on a uniform grid starting at 0.

The sampled functions are even in their argument, so the stencil at the left
end is closed by reflection: the slope at 0 is always zero.
"""

import numpy as np


def pchip_slopes(y, h, even=True):
    """Fritsch-Butland slopes for samples `y` spaced `h` apart.

    Interior slopes are the harmonic mean of the neighbouring secants, or zero
    where the data has a local extremum. The right end uses the one-sided
    three-point formula with the usual shape-preserving limits.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    m = np.zeros(n)
    if n < 2:
        return m
    delta = np.diff(y) / h
    if n == 2:
        m[:] = delta[0]
        if even:
            m[0] = 0.0
        return m
    d0, d1 = delta[:-1], delta[1:]
    same = d0 * d1 > 0
    # tiny secants overflow 1/d to inf, which correctly yields a zero slope
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hm = np.where(same, 2.0 / (1.0 / d0 + 1.0 / d1), 0.0)
    m[1:-1] = hm
    m[0] = 0.0 if even else _edge(delta[0], delta[1])
    m[-1] = _edge(delta[-1], delta[-2])
    return m


def _edge(d_near, d_far):
    s = 0.5 * (3.0 * d_near - d_far)
    if np.sign(s) != np.sign(d_near):
        return 0.0
    if np.sign(d_near) != np.sign(d_far) and abs(s) > abs(3.0 * d_near):
        return 3.0 * d_near
    return s


def hermite_eval(y, m, h, idx, t):
    """Evaluate the cubic Hermite interpolant on cell `idx` at fraction `t`."""
    t2 = t * t
    t3 = t2 * t
    h01 = 3.0 * t2 - 2.0 * t3
    h10 = t3 - 2.0 * t2 + t
    h11 = t3 - t2
    y0 = y[idx]
    y1 = y[idx + 1]
    return y0 + h01 * (y1 - y0) + h * (h10 * m[idx] + h11 * m[idx + 1])


def locate(x, h, n):
    """Cell index and in-cell fraction of points `x` on an `n`-point grid.

    Points within ``1e-9 h`` beyond the last node are clamped onto it;
    anything further out raises ``ValueError``.
    """
    u = np.asarray(x, dtype=float) / h
    top = n - 1
    if np.any(u > top + 1e-9) or np.any(u < -1e-9):
        raise ValueError("interpolation requested outside the grid")
    u = np.clip(u, 0.0, top)
    idx = np.minimum(np.floor(u).astype(np.intp), top - 1)
    return idx, u - idx


def interpolate(y, h, x, even=True):
    """Monotone cubic interpolation of uniform samples `y` (spacing `h`) at `x`."""
    y = np.asarray(y, dtype=float)
    m = pchip_slopes(y, h, even=even)
    idx, t = locate(x, h, y.size)
    return hermite_eval(y, m, h, idx, t)
