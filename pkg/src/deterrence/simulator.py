"""Monte-Carlo population with Poisson offense opportunities.

Victims are not sampled: each opportunity costs the expected victim loss l,
so the opportunity graph collapses to one Poisson count per agent with mean
n_agents * lambda_rate * delta_t.  Welfare is reported per informed agent and
per expected opportunity, the same units as the analytic welfare tiers.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .behavior import Label, burglary_classify_arrays, classify_arrays
from .distributions import sample_discount, sample_gamma, sample_wealth

CHUNK = 16384


@dataclass(frozen=True)
class SimConfig:
    n_agents: int = 100_000
    delta_t: float = 1.0
    lambda_rate: float = 1e-4
    seed: int = 0
    gamma_mode: str = "shared"  # or "per-agent"
    threads: int = 1

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if not self.delta_t > 0:
            raise ValueError("delta_t must be > 0")
        if not self.lambda_rate >= 0:
            raise ValueError("lambda_rate must be >= 0")
        if self.gamma_mode not in ("shared", "per-agent"):
            raise ValueError("gamma_mode must be 'shared' or 'per-agent'")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def mean_opportunities(self):
        return self.n_agents * self.lambda_rate * self.delta_t


@dataclass
class Population:
    """Agents stored column-wise."""
    w: np.ndarray
    k: np.ndarray
    gamma: np.ndarray
    informed: np.ndarray
    mu_gamma: float

    def __len__(self):
        return self.w.size


@dataclass
class SimReport:
    label_counts: dict
    opportunities: int
    offenses: int
    welfare_per_capita: float
    standard_error: float
    label_welfare: dict
    detection: float
    n_informed: int
    mean_opportunities: float
    analytic_welfare: float = None
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "label_counts": self.label_counts, "opportunities": self.opportunities,
            "offenses": self.offenses, "welfare_per_capita": self.welfare_per_capita,
            "standard_error": self.standard_error, "label_welfare": self.label_welfare,
            "detection": self.detection, "n_informed": self.n_informed,
            "mean_opportunities": self.mean_opportunities,
            "analytic_welfare": self.analytic_welfare, **self.extra,
        }


def build_population(pop, config):
    n = config.n_agents
    ss = np.random.SeedSequence(config.seed)
    s_w, s_k, s_g = ss.spawn(3)
    w = sample_wealth(pop.wealth, n, s_w)
    k = sample_discount(pop.discount, n, s_k)
    g = sample_gamma(pop.gamma, n, s_g)
    informed = np.ones(n, dtype=bool)
    n_un = math.floor(pop.epsilon * n / (1.0 + pop.epsilon))
    informed[:n_un] = False
    return Population(w=w, k=k, gamma=g, informed=informed, mu_gamma=pop.gamma.mu_gamma)


def _chunk_counts(seed, index, size, mean):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7, index)))
    return rng.poisson(mean, size)


def _values(labels, w, p, t, tau, r, crime, costs, gain=None):
    deter = crime.l - (crime.b * w if gain is None else gain)
    fine = -p * (costs.c_f + crime.g * crime.s * w)
    prison = -p * (costs.c_0 + costs.c_t / (costs.m_options * t) + costs.c_tau * tau
                   + crime.g * w * (crime.s + r * tau) - crime.Lambda * tau * (crime.l - crime.b * w))
    return np.choose(labels, [deter, fine, prison])


def _run(population, labels, values, config, p, costs):
    n = len(population)
    mean = config.mean_opportunities
    bounds = [(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]

    def work(item):
        idx, (a, b) = item
        counts = _chunk_counts(config.seed, idx, b - a, mean)
        lab = labels[a:b]
        contrib = counts * values[a:b]
        per_label = [float(np.sum(contrib[lab == j])) for j in range(3)]
        offend = int(np.sum(counts[lab != Label.NON_OFFENDER]))
        return (int(counts.sum()), offend, per_label, float(np.sum(contrib)),
                float(np.sum(contrib * contrib)))

    items = list(enumerate(bounds))
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as ex:
            parts = list(ex.map(work, items))
    else:
        parts = [work(it) for it in items]

    opp = sum(x[0] for x in parts)
    off = sum(x[1] for x in parts)
    per_label = [sum(x[2][j] for x in parts) for j in range(3)]
    s1 = sum(x[3] for x in parts)
    s2 = sum(x[4] for x in parts)
    n_inf = int(population.informed.sum())
    detection = costs.c_p * p
    if mean > 0 and n_inf > 0:
        scale = 1.0 / (n_inf * mean)
        welfare = s1 * scale - detection
        # per-agent contributions y_i / mean are iid; estimate scales by n / n_inf
        mean_y = s1 / n
        var_y = max(s2 / n - mean_y * mean_y, 0.0) * n / max(n - 1, 1)
        se = (n / n_inf) * math.sqrt(var_y / n) / mean
    else:
        welfare, se = -detection, 0.0
    counts = {lab.name: int(np.sum(labels == lab)) for lab in Label}
    by_label = {lab.name: (per_label[lab] / (n_inf * mean) if mean > 0 and n_inf else 0.0)
                for lab in Label}
    return SimReport(label_counts=counts, opportunities=opp, offenses=off,
                     welfare_per_capita=welfare, standard_error=se, label_welfare=by_label,
                     detection=detection, n_informed=n_inf, mean_opportunities=mean)


def simulate(population, strategy, crime, costs, config):
    gamma = population.mu_gamma if config.gamma_mode == "shared" else population.gamma
    labels = classify_arrays(population.w, population.k, gamma, population.informed,
                             strategy, crime)
    values = _values(labels, population.w, strategy.p, strategy.t, strategy.tau, strategy.r,
                     crime, costs)
    return _run(population, labels, values, config, strategy.p, costs)


def burglary_simulate(population, strategy, gain, crime, costs, config):
    """Fixed-gain offense with certain apprehension (p is taken as 1)."""
    labels = burglary_classify_arrays(population.w, population.k, population.informed,
                                      strategy, gain)
    values = _values(labels, population.w, 1.0, strategy.t, strategy.tau, strategy.r,
                     crime, costs, gain=gain)
    report = _run(population, labels, values, config, 1.0, costs)
    report.extra["degenerate"] = strategy.f < gain
    return report


def burglary_region_probabilities(pop, strategy, gain):
    """Analytic (quadrature) probabilities of the three labels for an informed agent."""
    wd, dd = pop.wealth, pop.discount
    slope = strategy.r * math.log1p(strategy.tau / strategy.t)

    def k_cdf(k):
        if math.isinf(k):
            return 1.0
        return (1.0 - dd.rho) - dd.rho * math.expm1(-k / dd.beta)

    def mass_below(coef):
        # P(k < coef * w) with w ~ Pareto, integrated in Pareto-cdf coordinates
        def integrand(y):
            w = wd.w_m * (1.0 - y) ** (-1.0 / wd.alpha)
            return k_cdf(coef * w)
        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=400)
        return val

    fine_line = mass_below(slope / strategy.f) if strategy.f > 0 else 1.0
    if strategy.f > gain:
        deter = mass_below(slope / gain)
        # everyone below the fine line is already deterred; the rest go to prison
        return {"NON_OFFENDER": deter, "FINE_CHOOSER": 0.0, "PRISON_CHOOSER": 1.0 - deter}
    return {"NON_OFFENDER": 0.0, "FINE_CHOOSER": fine_line, "PRISON_CHOOSER": 1.0 - fine_line}
