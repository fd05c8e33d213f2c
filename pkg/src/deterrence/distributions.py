"""Trait distributions for the population and the probability weighting function."""
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NonMonotoneError
from .special import exp_integral_E, upper_gamma  # noqa: F401  (re-exported)

GAMMA_LO, GAMMA_HI = 0.01, 0.99


@dataclass(frozen=True)
class WealthDist:
    alpha: float
    w_m: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if not self.w_m > 0:
            raise ValueError(f"w_m must be > 0, got {self.w_m}")


@dataclass(frozen=True)
class DiscountDist:
    rho: float
    beta: float

    def __post_init__(self):
        if not 0 <= self.rho <= 1:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class GammaDist:
    mu_gamma: float
    sigma_gamma: float = 0.0

    def __post_init__(self):
        if not 0 < self.mu_gamma < 1:
            raise ValueError(f"mu_gamma must be in (0, 1), got {self.mu_gamma}")
        if not self.sigma_gamma >= 0:
            raise ValueError(f"sigma_gamma must be >= 0, got {self.sigma_gamma}")


@dataclass(frozen=True)
class PopulationModel:
    wealth: WealthDist
    discount: DiscountDist
    gamma: GammaDist = field(default_factory=lambda: GammaDist(0.61, 0.0))
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


def pareto_pdf_cdf(d, w):
    """Density and cdf of the Pareto wealth distribution at w."""
    if w < d.w_m:
        raise ValueError(f"wealth {w} below minimum {d.w_m}")
    if math.isinf(w):
        return 0.0, 1.0
    pdf = d.alpha * d.w_m ** d.alpha / w ** (d.alpha + 1)
    cdf = 1.0 - (d.w_m / w) ** d.alpha
    return pdf, cdf


@dataclass(frozen=True)
class ZieValue:
    atom: float        # probability mass sitting exactly at k = 0
    density: float     # continuous part at k
    cdf: float


def zie_pdf_cdf(d, k):
    """Zero-inflated exponential: atom of mass 1 - rho at zero plus rho * Exp(mean beta)."""
    if k < 0:
        raise ValueError(f"discount rate must be >= 0, got {k}")
    atom = 1.0 - d.rho
    dens = d.rho / d.beta * math.exp(-k / d.beta)
    cdf = atom - d.rho * math.expm1(-k / d.beta)
    return ZieValue(atom=atom, density=dens, cdf=cdf)


def _rng(seed):
    return np.random.default_rng(seed)


def sample_wealth(d, count, seed):
    u = _rng(seed).random(count)
    # 1 - u lies in (0, 1], so the draw is finite
    return d.w_m * (1.0 - u) ** (-1.0 / d.alpha)


def sample_discount(d, count, seed):
    g = _rng(seed)
    nonzero = g.random(count) < d.rho
    draws = g.exponential(d.beta, count)
    return np.where(nonzero, draws, 0.0)


def sample_gamma(d, count, seed):
    """Normal draws truncated to (0.01, 0.99) by rejection."""
    g = _rng(seed)
    if d.sigma_gamma == 0:
        return np.full(count, min(max(d.mu_gamma, GAMMA_LO), GAMMA_HI))
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        x = g.normal(d.mu_gamma, d.sigma_gamma, max(2 * need, 16))
        x = x[(x > GAMMA_LO) & (x < GAMMA_HI)][:need]
        out[filled:filled + x.size] = x
        filled += x.size
    return out


def weighting_pi(p, gamma):
    """Inverse-S perceived probability p^g / (p^g + (1-p)^g)^(1/g).

    Works elementwise on arrays; endpoints map exactly to 0 and 1.
    """
    if isinstance(p, float) and isinstance(gamma, float) and 0 < gamma <= 1:
        if p == 0.0 or p == 1.0:
            return p
        if 0 < p < 1:
            num = p ** gamma
            return num / (num + (1.0 - p) ** gamma) ** (1.0 / gamma)
    if not (0 < np.min(gamma) and np.max(gamma) <= 1):
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    pa = np.asarray(p, dtype=float)
    if np.any((pa < 0) | (pa > 1)):
        raise ValueError(f"probability out of [0, 1]: {p}")
    with np.errstate(divide="ignore"):
        num = pa ** gamma
        den = (num + (1.0 - pa) ** gamma) ** (1.0 / gamma)
        out = num / den
    out = np.where(pa == 0, 0.0, np.where(pa == 1, 1.0, out))
    if np.ndim(out) == 0:
        return float(out)
    return out


@lru_cache(maxsize=256)
def is_monotone(gamma, points=10_000):
    grid = np.linspace(0.0, 1.0, points)
    return bool(np.all(np.diff(weighting_pi(grid, gamma)) > 0))


def weighting_pi_inverse(y, gamma, tol=1e-14):
    """Probability p with weighting_pi(p, gamma) == y, by bisection."""
    if not 0 <= y <= 1:
        raise ValueError(f"perceived probability out of [0, 1]: {y}")
    if not is_monotone(float(gamma)):
        raise NonMonotoneError(f"weighting function is not monotone for gamma={gamma}")
    if y == 0 or y == 1:
        return float(y)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if weighting_pi(mid, float(gamma)) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pi_fixed_point(gamma):
    """Interior solution of weighting_pi(p) == p, which lies in (0, 1/2)."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")

    def excess(p):
        # log F(p), F = p^(g(g-1)) / (p^g + (1-p)^g); root of F = 1
        return gamma * (gamma - 1) * math.log(p) - math.log(p ** gamma + (1 - p) ** gamma)

    lo, hi = 1e-300, 0.5
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17:
            break
    return 0.5 * (lo + hi)
