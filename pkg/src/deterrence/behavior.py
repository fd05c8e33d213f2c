"""Individual choice: discounted punishment, deterrence test and the (w, k) partition."""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .distributions import weighting_pi
from .errors import DegenerateStrategyError, NoRootError

_EXP_LIMIT = 700.0


class Label(enum.IntEnum):
    NON_OFFENDER = 0
    FINE_CHOOSER = 1
    PRISON_CHOOSER = 2


@dataclass(frozen=True)
class Agent:
    w: float
    k: float
    gamma: float = 0.61
    informed: bool = True

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"wealth must be > 0, got {self.w}")
        if not self.k >= 0:
            raise ValueError(f"discount rate must be >= 0, got {self.k}")


@dataclass(frozen=True)
class PenalStrategy:
    p: float
    f: float
    t: float
    tau: float
    r: float

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if min(self.f, self.t, self.tau) < 0:
            raise ValueError("fine, delay and term must be >= 0")
        if not self.r > 0:
            raise ValueError(f"harshness must be > 0, got {self.r}")


@dataclass(frozen=True)
class CrimeParams:
    b: float
    s: float
    l: float
    g: float = 1.0
    Lambda: float = 0.0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be > 0")
        if not self.s >= 0:
            raise ValueError("s must be >= 0")
        if not self.b > self.s:
            raise ValueError("b must exceed s")
        if not self.l > 0:
            raise ValueError("l must be > 0")
        if not self.g >= 1:
            raise ValueError("g must be >= 1")


@dataclass(frozen=True)
class StrategyTargets:
    p: float
    w0: float
    k0: float
    t: float
    r: float

    def __post_init__(self):
        if not self.k0 > 0:
            raise ValueError(f"k0 must be > 0, got {self.k0}")
        if not self.r > 0:
            raise ValueError(f"harshness must be > 0, got {self.r}")
        if not 0 < self.p <= 1:
            raise ValueError(f"p must be in (0, 1], got {self.p}")


def _log_term(k, t, tau):
    return math.log1p(k * tau / (1.0 + k * t))


def discounted_disutility(k, r, t, tau):
    """Present value of serving a term of length tau starting after delay t."""
    if k == 0:
        return -r * tau
    return -(r / k) * _log_term(k, t, tau)


def imprisonment_disutility(agent, strategy):
    return agent.w * discounted_disutility(agent.k, strategy.r, strategy.t, strategy.tau)


def net_offense_utility(agent, strategy, crime):
    pi = weighting_pi(float(strategy.p), float(agent.gamma))
    if not agent.informed:
        return (crime.b - pi * crime.s) * agent.w
    prison = -imprisonment_disutility(agent, strategy)
    return crime.b * agent.w - pi * (min(strategy.f, prison) + crime.s * agent.w)


def _net_gain_rate(p, crime, gamma):
    pi = weighting_pi(float(p), float(gamma))
    margin = crime.b - pi * crime.s
    if margin <= 0:
        raise DegenerateStrategyError("stigma alone deters every member (b - pi(p) s <= 0)")
    return pi, margin


def psi(p, crime, r, gamma):
    """Harshness-scaled gain threshold (b - pi s) / (pi r), in hours."""
    pi, margin = _net_gain_rate(p, crime, gamma)
    if pi == 0:
        return math.inf
    return margin / (pi * r)


def target_w0(strategy, crime, gamma):
    """Highest wealth still deterred by the fine."""
    pi, margin = _net_gain_rate(strategy.p, crime, gamma)
    return pi * strategy.f / margin


def _inverse_rate(k, t, tau):
    # k / log(1 + k tau / (1 + k t)), increasing in k; equals 1/tau at k = 0
    if k == 0:
        return 1.0 / tau
    return k / _log_term(k, t, tau)


def solve_k0(psi_value, t, tau, rtol=1e-13):
    """Discount rate at which the prison condition binds for a given psi."""
    if not (t >= 0 and tau > 0):
        raise ValueError("need t >= 0 and tau > 0")
    target = 1.0 / psi_value
    if _inverse_rate(0.0, t, tau) >= target:
        raise NoRootError("imprisonment too weak to deter even k = 0 agents")
    lo, hi = 1e-12, 1.0
    while _inverse_rate(hi, t, tau) < target:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise NoRootError("no bracket for k0")
    if _inverse_rate(lo, t, tau) >= target:
        lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _inverse_rate(mid, t, tau) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def target_k0(strategy, crime, gamma):
    """Highest discount rate still deterred by the prison alternative."""
    if not (strategy.t > 0 and strategy.tau > 0):
        raise ValueError("need t > 0 and tau > 0")
    return solve_k0(psi(strategy.p, crime, strategy.r, gamma), strategy.t, strategy.tau)


def tau_for_target(k0, t, psi_value):
    """Term length that places the prison threshold exactly at k0."""
    if not k0 > 0:
        raise ValueError(f"k0 must be > 0, got {k0}")
    x = psi_value * k0
    if x > _EXP_LIMIT:
        return math.inf
    return math.expm1(x) * (1.0 / k0 + t)


def partition_curve_w(k, f, r, t, tau):
    """Wealth at which an agent with discount rate k is indifferent between fine and prison."""
    if k == 0:
        return f / (r * tau)
    return k * f / (r * _log_term(k, t, tau))


def classify(agent, strategy, crime):
    if agent.informed and net_offense_utility(agent, strategy, crime) < 0:
        return Label.NON_OFFENDER
    if strategy.f <= -imprisonment_disutility(agent, strategy):
        return Label.FINE_CHOOSER
    return Label.PRISON_CHOOSER


def prison_disutility_array(w, k, r, t, tau):
    """Vectorized magnitude of the imprisonment disutility."""
    w = np.asarray(w, dtype=float)
    k = np.asarray(k, dtype=float)
    safe = np.where(k > 0, k, 1.0)
    val = (r / safe) * np.log1p(safe * tau / (1.0 + safe * t))
    return w * np.where(k > 0, val, r * tau)


def classify_arrays(w, k, gamma, informed, strategy, crime):
    """Vectorized version of classify returning an int8 label array."""
    w = np.asarray(w, dtype=float)
    pi = weighting_pi(np.full(w.shape, strategy.p), np.asarray(gamma, dtype=float)) \
        if np.ndim(gamma) else weighting_pi(float(strategy.p), float(gamma))
    prison = prison_disutility_array(w, k, strategy.r, strategy.t, strategy.tau)
    utility = crime.b * w - pi * (np.minimum(strategy.f, prison) + crime.s * w)
    deterred = np.asarray(informed, dtype=bool) & (utility < 0)
    out = np.where(strategy.f <= prison, Label.FINE_CHOOSER, Label.PRISON_CHOOSER).astype(np.int8)
    out[deterred] = Label.NON_OFFENDER
    return out


def burglary_lines(w, gain, strategy):
    """Discount-rate boundaries for a fixed-gain offense with certain apprehension.

    Returns (deterrence line, fine/prison line) evaluated at wealth w.  The
    prison disutility uses its large-k form r w log(1 + tau/t) / k.
    """
    if not (strategy.t > 0 and strategy.tau > 0):
        raise ValueError("need t > 0 and tau > 0")
    slope = strategy.r * w * math.log1p(strategy.tau / strategy.t)
    return slope / gain, slope / strategy.f if strategy.f > 0 else math.inf


def burglary_classify(agent, strategy, gain):
    """Partition for an offense of fixed gain, apprehension certain.

    Returns (label, degenerate) where degenerate flags a fine below the gain,
    for which nobody can be deterred.
    """
    if not gain > 0:
        raise ValueError("gain must be > 0")
    degenerate = strategy.f < gain
    k_deter, k_fine = burglary_lines(agent.w, gain, strategy)
    if agent.informed and strategy.f > gain and agent.k < k_deter:
        return Label.NON_OFFENDER, degenerate
    if agent.k <= k_fine:
        return Label.FINE_CHOOSER, degenerate
    return Label.PRISON_CHOOSER, degenerate


def burglary_classify_arrays(w, k, informed, strategy, gain):
    w = np.asarray(w, dtype=float)
    k = np.asarray(k, dtype=float)
    k_deter, k_fine = burglary_lines(w, gain, strategy)
    out = np.where(k <= k_fine, Label.FINE_CHOOSER, Label.PRISON_CHOOSER).astype(np.int8)
    if strategy.f > gain:
        out[np.asarray(informed, dtype=bool) & (k < k_deter)] = Label.NON_OFFENDER
    return out
