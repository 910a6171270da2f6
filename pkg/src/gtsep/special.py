"""Binary information measures and a one-dimensional minimiser."""
import math

import numpy as np

LOG2 = math.log(2.0)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _xlogy(x, y):
    return 0.0 if x == 0.0 else x * math.log(y)


def binary_entropy(x):
    """H2(x) in nats, with 0 log 0 = 0."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy needs x in [0, 1], got {x}")
    return -_xlogy(x, x) - _xlogy(1.0 - x, 1.0 - x)


def kl_binary(a, b):
    """D2(a || b) in nats; +inf when b is 0 or 1 and a disagrees."""
    a, b = float(a), float(b)
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError(f"kl_binary needs a, b in [0, 1], got {a}, {b}")
    total = 0.0
    for s, t in ((a, b), (1.0 - a, 1.0 - b)):
        if s == 0.0:
            continue
        if t == 0.0:
            return math.inf
        total += s * math.log(s / t)
    return total


def binary_conv(a, b):
    """a * b = a(1-b) + b(1-a): the crossover of two cascaded binary channels."""
    return a * (1.0 - b) + b * (1.0 - a)


def golden_section(f, lo, hi, tol=1e-10, max_iter=500):
    """Minimise a unimodal f on [lo, hi]; returns (x, f(x))."""
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def grid_golden_min(f, lo, hi, points=2048, tol=1e-10):
    """Grid scan followed by golden-section refinement around the best cell.

    The scan guards against local traps; the returned point is never worse
    than the best grid point.
    """
    grid = np.linspace(lo, hi, points)
    vals = np.array([f(x) for x in grid])
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, points - 1)]
    x, fx = golden_section(f, a, b, tol=tol)
    if vals[i] < fx:
        return float(grid[i]), float(vals[i])
    return x, fx
