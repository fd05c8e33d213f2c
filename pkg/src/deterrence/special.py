"""Upper incomplete gamma and generalized exponential integral for real orders.

Both functions are evaluated with a modified-Lentz continued fraction when
x is large enough for it to converge quickly, and with the lower-gamma power
series otherwise.  Negative (or zero) orders are reached from a positive
order by downward recurrence.
"""
import math

_EPS = 1e-16
_TINY = 1e-300
_MAXIT = 10000
_EULER = 0.5772156649015329


def _check_x(x):
    if not x > 0:
        raise ValueError(f"x must be > 0, got {x}")


def _cf_upper(a, x):
    # Gamma(a, x) * exp(x) * x**(-a), continued fraction (valid for any real a, x > 0)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"continued fraction did not converge (a={a}, x={x})")


def _series_lower(a, x):
    # gamma(a, x) for a > 0 via the standard power series
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x))
    raise ArithmeticError(f"series did not converge (a={a}, x={x})")


def _e1(x):
    if x < 1.0:
        total = 0.0
        term = 1.0
        k = 1
        while True:
            term *= -x / k
            add = term / k
            total += add
            if abs(add) < _EPS * max(abs(total), 1e-300):
                break
            k += 1
        return -_EULER - math.log(x) - total
    return math.exp(-x) * _cf_upper(0.0, x)


def _upper_positive(a, x):
    if x < a + 1.0:
        return math.gamma(a) - _series_lower(a, x)
    return math.exp(-x + a * math.log(x)) * _cf_upper(a, x)


def upper_gamma(a, x):
    """Upper incomplete gamma function Gamma(a, x) = int_x^inf t^(a-1) e^(-t) dt.

    Any real a is accepted; x must be positive.
    """
    _check_x(x)
    a = float(a)
    x = float(x)
    if a > 0:
        return _upper_positive(a, x)
    if x >= 1.0:
        return math.exp(-x + a * math.log(x)) * _cf_upper(a, x)
    # lift to a0 in (0, 1] (or a0 = 0 for integer orders), then recur downward
    n = math.ceil(-a)
    a0 = a + n
    if a0 == 0.0:
        g = _e1(x)
    else:
        if a0 < 1e-12:
            a0 += 1.0
            n += 1
        g = _upper_positive(a0, x)
    ex = math.exp(-x)
    cur = a0
    for _ in range(n):
        cur -= 1.0
        g = (g - x ** cur * ex) / cur
    return g


def exp_integral_E(order, x):
    """Generalized exponential integral E_n(x) = int_1^inf exp(-t x) t^(-n) dt."""
    _check_x(x)
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if x >= 1.0:
        # direct continued fraction avoids the x**(n-1) prefactor losing range
        return math.exp(-x) * _cf_upper(1.0 - order, x)
    return x ** (order - 1.0) * upper_gamma(1.0 - order, x)
