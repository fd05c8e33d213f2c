import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f, lo, hi, tol=1e-10, maxiter=500):
    """Minimize a unimodal scalar function on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
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
    fx = f(x)
    # the bracket endpoints may beat the midpoint when the minimum sits on an edge
    for edge in (lo, hi):
        fe = f(edge)
        if fe < fx:
            x, fx = edge, fe
    return x, fx


def grid_then_golden(f, lo, hi, points=401, tol=1e-12):
    """Coarse scan followed by golden-section refinement around the best node.

    Guards against multiple local minima that a bare golden search could miss.
    """
    step = (hi - lo) / (points - 1)
    best_i, best_v = 0, math.inf
    for i in range(points):
        v = f(min(lo + i * step, hi))
        if v < best_v:
            best_i, best_v = i, v
    a = lo + max(best_i - 1, 0) * step
    b = lo + min(best_i + 1, points - 1) * step
    x, fx = golden_section_min(f, a, b, tol=tol)
    if best_v < fx:
        return min(lo + best_i * step, hi), best_v
    return x, fx
