"""Social welfare of a penal strategy.

Three evaluation tiers share one geometry:

* ``welfare_quadrature`` integrates the partition regions numerically and is
  the reference.  It can use either the straight-line partition (which the
  analytic tiers assume) or the exact fine/prison indifference curve.
* ``welfare_closed_form`` uses exponential integrals and upper incomplete
  gamma functions.
* ``welfare_asymptotic`` replaces those special functions by their leading
  large-argument behaviour.

Reconciliation: every term of the closed forms was re-derived from the region
integrals and checked against quadrature on random parameter draws
(tests/test_welfare.py).  No term needed correcting.
"""
import math
import warnings
from dataclasses import dataclass, field

from scipy import integrate

from .behavior import partition_curve_w, psi, tau_for_target
from .distributions import weighting_pi
from .errors import DegenerateStrategyError
from .search import golden_section_min
from .special import exp_integral_E, upper_gamma


@dataclass(frozen=True)
class CostParams:
    c_p: float = 0.0
    c_f: float = 0.0
    c_0: float = 0.0
    c_t: float = 0.0
    c_tau: float = 0.0
    m_options: float = 2.0

    def __post_init__(self):
        for name in ("c_p", "c_f", "c_0", "c_t", "c_tau"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.m_options < 1:
            raise ValueError("m_options must be >= 1")


@dataclass(frozen=True)
class WelfareBreakdown:
    j0: float
    j1: float
    j2: float
    p: float
    detection: float
    tier: str
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def total(self):
        return self.j0 - self.p * (self.j1 + self.j2) - self.detection

    def as_dict(self):
        return {"j0": self.j0, "j1": self.j1, "j2": self.j2, "p": self.p,
                "detection": self.detection, "total": self.total, "tier": self.tier}


def imprisonment_cost_Ci(t, tau, costs):
    if not t > 0:
        raise ValueError("delay must be > 0 (celerity cost diverges at t = 0)")
    return costs.c_0 + costs.c_t / (costs.m_options * t) + costs.c_tau * tau


def punishment_social_cost(w, t, tau, choice, crime, costs, r):
    if choice == "fine":
        return costs.c_f + crime.g * crime.s * w
    if choice == "prison":
        return (imprisonment_cost_Ci(t, tau, costs) + crime.g * w * (crime.s + r * tau)
                - crime.Lambda * tau * (crime.l - crime.b * w))
    raise ValueError(f"choice must be 'fine' or 'prison', got {choice!r}")


@dataclass(frozen=True)
class Geometry:
    """Everything the tiers need, derived once from targets and parameters."""
    p: float
    pi: float
    w0: float
    k0: float
    t: float
    tau: float
    r: float
    psi: float
    fine: float
    v: float
    u: float
    kappa0: float
    kappa_m: float
    # prison-branch cost is prison_const + prison_slope * w
    prison_const: float
    prison_slope: float


def geometry(targets, pop, crime, costs, tau=None):
    wd, dd = pop.wealth, pop.discount
    if targets.w0 < wd.w_m:
        raise DegenerateStrategyError(
            f"w0={targets.w0} below minimum wealth {wd.w_m}: nobody is deterred by the fine")
    gamma = pop.gamma.mu_gamma
    pi = weighting_pi(float(targets.p), float(gamma))
    ps = psi(targets.p, crime, targets.r, gamma)
    if tau is None:
        tau = tau_for_target(targets.k0, targets.t, ps)
    fine = targets.w0 * (crime.b - pi * crime.s) / pi
    v = wd.w_m / targets.w0
    kappa0 = targets.k0 / dd.beta
    const = (costs.c_0 + costs.c_t / (costs.m_options * targets.t)
             + (costs.c_tau - crime.Lambda * crime.l) * tau)
    slope = crime.g * crime.s + (crime.g * targets.r + crime.Lambda * crime.b) * tau
    return Geometry(p=targets.p, pi=pi, w0=targets.w0, k0=targets.k0, t=targets.t, tau=tau,
                    r=targets.r, psi=ps, fine=fine, v=v, u=targets.k0 / targets.w0,
                    kappa0=kappa0, kappa_m=v * kappa0, prison_const=const, prison_slope=slope)


def _breakdown(j0, j1, j2, geo, costs, tier, **extra):
    return WelfareBreakdown(j0=j0, j1=j1, j2=j2, p=geo.p, detection=costs.c_p * geo.p,
                            tier=tier, extra=extra)


# ---------------------------------------------------------------- closed form

def j0_closed(alpha, rho, w_m, v, kappa0, l, b):
    mass_k = 1.0 - rho * math.exp(-kappa0)
    return mass_k * (l * (1.0 - v ** alpha)
                     - alpha / (alpha - 1.0) * b * w_m * (1.0 - v ** (alpha - 1.0)))


def j1_closed(alpha, rho, w_m, v, kappa0, eps, c_f, gs):
    km = v * kappa0
    w0 = w_m / v
    a1 = alpha / (alpha - 1.0)
    fine = c_f * (v ** alpha * (1.0 - alpha * rho * exp_integral_E(alpha + 1.0, kappa0))
                  + eps * (1.0 - alpha * rho * exp_integral_E(alpha + 1.0, km)))
    stig = gs * (a1 * (v ** alpha * w0 + eps * w_m)
                 - alpha * rho * (v ** alpha * w0 * exp_integral_E(alpha, kappa0)
                                  + eps * w_m * exp_integral_E(alpha, km)))
    return fine + stig


def j2_brackets(alpha, v, kappa0, eps):
    """Population weights multiplying the constant and wealth-linear prison costs."""
    km = v * kappa0
    const = (math.exp(-kappa0) - v ** alpha * kappa0 * exp_integral_E(alpha, kappa0)
             + eps * (math.exp(-km) - km * exp_integral_E(alpha, km)))
    lin = (math.exp(-kappa0) + eps * math.exp(-km)
           - km ** (alpha - 1.0) * (upper_gamma(2.0 - alpha, kappa0)
                                    + eps * upper_gamma(2.0 - alpha, km)))
    return const, lin


def j2_from_brackets(alpha, rho, w_m, brackets, prison_const, prison_slope):
    const, lin = brackets
    return rho * (prison_const * const + alpha / (alpha - 1.0) * prison_slope * w_m * lin)


def welfare_closed_form(targets, pop, crime, costs, tau=None):
    geo = geometry(targets, pop, crime, costs, tau)
    a, rho, w_m = pop.wealth.alpha, pop.discount.rho, pop.wealth.w_m
    j0 = j0_closed(a, rho, w_m, geo.v, geo.kappa0, crime.l, crime.b)
    j1 = j1_closed(a, rho, w_m, geo.v, geo.kappa0, pop.epsilon, costs.c_f, crime.g * crime.s)
    br = j2_brackets(a, geo.v, geo.kappa0, pop.epsilon)
    j2 = j2_from_brackets(a, rho, w_m, br, geo.prison_const, geo.prison_slope)
    return _breakdown(j0, j1, j2, geo, costs, "closed", tau=geo.tau)


# ----------------------------------------------------------------- asymptotic

def j1_asymptotic(alpha, rho, w_m, v, kappa0, eps, c_f, gs):
    km = v * kappa0
    a1 = alpha / (alpha - 1.0)
    e0 = math.exp(-kappa0) / kappa0
    em = math.exp(-km) / km
    return (c_f * (v ** alpha * (1.0 - alpha * rho * e0) + eps * (1.0 - alpha * rho * em))
            + gs * (v ** (alpha - 1.0) * w_m * (a1 - alpha * rho * e0)
                    + eps * w_m * (a1 - alpha * rho * em)))


def j2_brackets_asymptotic(alpha, v, kappa0, eps):
    km = v * kappa0
    e0 = math.exp(-kappa0)
    const = ((1.0 - v ** alpha) * e0 + alpha * v ** alpha * e0 / kappa0
             + alpha * eps * math.exp(-km) / km)
    lin = ((1.0 - v ** (alpha - 1.0)) * e0 + (alpha - 1.0) * v ** (alpha - 1.0) * e0 / kappa0
           + (alpha - 1.0) * eps * math.exp(-km) / km)
    return const, lin


def welfare_asymptotic(targets, pop, crime, costs, tau=None):
    geo = geometry(targets, pop, crime, costs, tau)
    a, rho, w_m = pop.wealth.alpha, pop.discount.rho, pop.wealth.w_m
    j0 = j0_closed(a, rho, w_m, geo.v, geo.kappa0, crime.l, crime.b)
    j1 = j1_asymptotic(a, rho, w_m, geo.v, geo.kappa0, pop.epsilon, costs.c_f,
                       crime.g * crime.s)
    br = j2_brackets_asymptotic(a, geo.v, geo.kappa0, pop.epsilon)
    j2 = j2_from_brackets(a, rho, w_m, br, geo.prison_const, geo.prison_slope)
    return _breakdown(j0, j1, j2, geo, costs, "asymptotic", tau=geo.tau)


# ----------------------------------------------------------------- quadrature

class _Integrator:
    """Nested adaptive quadrature over Pareto wealth and zero-inflated discount.

    Wealth is integrated in Pareto-cdf coordinates y, w = w_m (1-y)^(-1/alpha),
    and the continuous discount part in exponential-cdf coordinates x,
    k = -beta log(1-x); both map the infinite tails onto finite intervals and
    turn the densities into unit weights.
    """

    def __init__(self, pop, epsrel=1e-11):
        self.alpha = pop.wealth.alpha
        self.w_m = pop.wealth.w_m
        self.rho = pop.discount.rho
        self.beta = pop.discount.beta
        self.opts = dict(epsabs=0.0, epsrel=epsrel, limit=400)

    def y_of_w(self, w):
        if math.isinf(w):
            return 1.0
        return -math.expm1(self.alpha * math.log(self.w_m / w))

    def w_of_y(self, y):
        if y >= 1.0:
            return math.inf
        return self.w_m * (1.0 - y) ** (-1.0 / self.alpha)

    def x_of_k(self, k):
        if math.isinf(k):
            return 1.0
        return -math.expm1(-k / self.beta)

    def k_of_x(self, x):
        if x >= 1.0:
            return math.inf
        return -self.beta * math.log1p(-x)

    def wealth_integral(self, cost, w_lo, w_hi):
        if w_lo >= w_hi:
            return 0.0
        ya, yb = self.y_of_w(w_lo), self.y_of_w(w_hi)
        if yb <= ya:
            return 0.0
        with warnings.catch_warnings():
            # the (1-y)^(-1/alpha) endpoint singularity triggers harmless roundoff notices
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            # nodes that round onto y = 1 carry no mass
            val, _ = integrate.quad(lambda y: cost(self.w_of_y(y)) if y < 1.0 else 0.0,
                                    ya, yb, **self.opts)
        return val

    def continuous(self, cost, k_lo, k_hi, w_lo, w_hi):
        """rho * int_{k_lo}^{k_hi} Exp density * int_{w_lo(k)}^{w_hi(k)} cost dF_W."""
        xa, xb = self.x_of_k(k_lo), self.x_of_k(k_hi)
        if xb <= xa or self.rho == 0:
            return 0.0

        def outer(x):
            k = self.k_of_x(x)
            return self.wealth_integral(cost, w_lo(k), w_hi(k))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(outer, xa, xb, **self.opts)
        return self.rho * val

    def atom(self, cost, w_lo, w_hi):
        return (1.0 - self.rho) * self.wealth_integral(cost, w_lo, w_hi)


def _const(value):
    return lambda k: value


def _solve_curve_at(wealth, fine, r, t, tau, k_hi):
    # discount rate at which the indifference curve reaches the given wealth
    lo, hi = 0.0, k_hi
    while partition_curve_w(hi, fine, r, t, tau) < wealth:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if partition_curve_w(mid, fine, r, t, tau) < wealth:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def welfare_quadrature(targets, pop, crime, costs, tau=None, partition="linear", epsrel=1e-11):
    """Reference welfare by nested quadrature.

    partition="linear" uses the straight line through the origin and (w0, k0)
    for the fine/prison split, which is what the analytic tiers assume.
    partition="exact" uses the indifference curve itself.
    """
    geo = geometry(targets, pop, crime, costs, tau)
    q = _Integrator(pop, epsrel)
    inf = math.inf
    w_m, eps = q.w_m, pop.epsilon
    w0, k0, u = geo.w0, geo.k0, geo.u

    def benefit(w):
        return crime.l - crime.b * w

    def fine_cost(w):
        return costs.c_f + crime.g * crime.s * w

    def prison_cost(w):
        return geo.prison_const + geo.prison_slope * w

    j0 = q.atom(benefit, w_m, w0) + q.continuous(benefit, 0.0, k0, _const(w_m), _const(w0))

    if partition == "linear":
        k_m = u * w_m
        line = lambda k: k / u  # noqa: E731
        j1 = (q.atom(fine_cost, w0, inf)
              + q.continuous(fine_cost, 0.0, k0, _const(w0), _const(inf))
              + q.continuous(fine_cost, k0, inf, line, _const(inf)))
        j2 = q.continuous(prison_cost, k0, inf, _const(w_m), line)
        if eps:
            j1 += eps * (q.atom(fine_cost, w_m, inf)
                         + q.continuous(fine_cost, 0.0, k_m, _const(w_m), _const(inf))
                         + q.continuous(fine_cost, k_m, inf, line, _const(inf)))
            j2 += eps * q.continuous(prison_cost, k_m, inf, _const(w_m), line)
    elif partition == "exact":
        if math.isinf(geo.tau):
            raise DegenerateStrategyError("term length overflows; exact partition undefined")
        curve = lambda k: partition_curve_w(k, geo.fine, geo.r, geo.t, geo.tau)  # noqa: E731
        j1 = (q.atom(fine_cost, w0, inf)
              + q.continuous(fine_cost, 0.0, k0, _const(w0), _const(inf))
              + q.continuous(fine_cost, k0, inf, curve, _const(inf)))
        j2 = q.continuous(prison_cost, k0, inf, _const(w_m), curve)
        if eps:
            w_c0 = curve(0.0)
            if w_c0 >= w_m:
                k_c = 0.0
            else:
                k_c = _solve_curve_at(w_m, geo.fine, geo.r, geo.t, geo.tau, max(k0, 1e-12))
            j1 += eps * (q.atom(fine_cost, max(w_m, w_c0), inf)
                         + q.continuous(fine_cost, 0.0, k_c, _const(w_m), _const(inf))
                         + q.continuous(fine_cost, k_c, inf, curve, _const(inf)))
            j2 += eps * (q.atom(prison_cost, w_m, max(w_m, w_c0))
                         + q.continuous(prison_cost, k_c, inf, _const(w_m), curve))
    else:
        raise ValueError(f"partition must be 'linear' or 'exact', got {partition!r}")
    return _breakdown(j0, j1, j2, geo, costs, "quadrature", tau=geo.tau, partition=partition)


# ------------------------------------------------------- delay / term trade-off

@dataclass(frozen=True)
class DelayOptimum:
    t: float
    tau: float
    j2_min: float
    psi: float
    # asymptotic exponential rates in kappa0 for log t*, log tau* and log J2_min
    rate_log_t: float
    rate_log_tau: float
    rate_log_j2: float


def optimal_t_tau(kappa0, pop, crime, costs, p, v, r, log_t_bounds=(-30.0, 30.0)):
    """Delay minimizing the prison-branch cost J2 with the term tied to the targets."""
    if not kappa0 > 0:
        raise ValueError("kappa0 must be > 0")
    a, rho, w_m = pop.wealth.alpha, pop.discount.rho, pop.wealth.w_m
    beta = pop.discount.beta
    ps = psi(p, crime, r, pop.gamma.mu_gamma)
    k0 = kappa0 * beta
    br = j2_brackets(a, v, kappa0, pop.epsilon)

    def j2_at(log_t):
        t = math.exp(log_t)
        tau = tau_for_target(k0, t, ps)
        if math.isinf(tau):
            return math.inf
        const = costs.c_0 + costs.c_t / (costs.m_options * t) + (costs.c_tau - crime.Lambda * crime.l) * tau
        slope = crime.g * crime.s + (crime.g * r + crime.Lambda * crime.b) * tau
        return j2_from_brackets(a, rho, w_m, br, const, slope)

    log_t, j2 = golden_section_min(j2_at, *log_t_bounds, tol=1e-12)
    t = math.exp(log_t)
    half = ps * beta / 2.0
    return DelayOptimum(t=t, tau=tau_for_target(k0, t, ps), j2_min=j2, psi=ps,
                        rate_log_t=-half, rate_log_tau=half, rate_log_j2=half - v)


def phase_condition(v, p, pop, crime, r, tau_floor=False):
    """True when the prison-branch cost vanishes as the targeted discount rate grows.

    The default is the rate psi*beta/2 - v, which assumes the optimal delay
    dominates 1/k0 in the term constraint.  With tau_floor=True the 1/k0 floor
    is kept, which is what governs the limit kappa0 -> infinity: the minimal
    cost then scales with rate psi*beta - v.
    """
    pi = weighting_pi(float(p), float(pop.gamma.mu_gamma))
    factor = 1.0 if tau_floor else 2.0
    return v > pop.discount.beta * (crime.b - pi * crime.s) / (factor * pi * r)


def thresholds(pop, crime, r):
    """(minimum harshness for the severe regime, largest fine compatible with it)."""
    beta = pop.discount.beta
    return (crime.b - crime.s) * beta / 2.0, 2.0 * r * pop.wealth.w_m / beta


def welfare_at_kappa(kappa0, v, p, r, pop, crime, costs, log_t_bounds=(-30.0, 30.0)):
    """Closed-form welfare with the delay chosen optimally for the given kappa0."""
    a, rho, w_m = pop.wealth.alpha, pop.discount.rho, pop.wealth.w_m
    opt = optimal_t_tau(kappa0, pop, crime, costs, p, v, r, log_t_bounds)
    j0 = j0_closed(a, rho, w_m, v, kappa0, crime.l, crime.b)
    j1 = j1_closed(a, rho, w_m, v, kappa0, pop.epsilon, costs.c_f, crime.g * crime.s)
    return WelfareBreakdown(j0=j0, j1=j1, j2=opt.j2_min, p=p, detection=costs.c_p * p,
                            tier="closed", extra={"t": opt.t, "tau": opt.tau})


def phase_sweep(pop, crime, costs, p, r_values, f_values, kappa_grid,
                log_t_bounds=(-30.0, 30.0)):
    """Locate the welfare-maximizing kappa0 on a grid for every (r, f) pair.

    A cell is 'severe' when the argmax sits at the top of the kappa0 grid,
    i.e. welfare keeps improving as the targeted discount rate grows.  Cells
    whose fine targets w0 below the minimum wealth (v > 1) are reported with
    severe = None.
    """
    pi = weighting_pi(float(p), float(pop.gamma.mu_gamma))
    rows = []
    for r in r_values:
        for f in f_values:
            w0 = pi * f / (crime.b - pi * crime.s)
            v = pop.wealth.w_m / w0
            row = {"r": r, "f": f, "v": v,
                   "rate_half": psi(p, crime, r, pop.gamma.mu_gamma) * pop.discount.beta / 2.0 - v}
            if v > 1.0:
                row.update(argmax_kappa0=None, severe=None, condition=None,
                           condition_tau_floor=None)
                rows.append(row)
                continue
            totals = [welfare_at_kappa(k, v, p, r, pop, crime, costs, log_t_bounds).total
                      for k in kappa_grid]
            best = max(range(len(totals)), key=lambda i: totals[i])
            row.update(argmax_kappa0=kappa_grid[best], severe=best == len(kappa_grid) - 1,
                       condition=phase_condition(v, p, pop, crime, r),
                       condition_tau_floor=phase_condition(v, p, pop, crime, r, tau_floor=True))
            rows.append(row)
    return rows
