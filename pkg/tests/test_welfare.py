import math
import random

import numpy as np
import pytest

from deterrence.behavior import CrimeParams, StrategyTargets
from deterrence.distributions import (DiscountDist, GammaDist, PopulationModel, WealthDist,
                                      weighting_pi)
from deterrence.errors import DegenerateStrategyError
from deterrence.search import golden_section_min
from deterrence.welfare import (CostParams, imprisonment_cost_Ci, j0_closed, j1_closed,
                                optimal_t_tau, phase_condition, phase_sweep,
                                punishment_social_cost, thresholds, welfare_asymptotic,
                                welfare_closed_form, welfare_quadrature)


def _pop(alpha=2.0, w_m=100.0, rho=0.66, beta=0.00431, eps=0.0, gamma=0.61):
    return PopulationModel(WealthDist(alpha, w_m), DiscountDist(rho, beta), GammaDist(gamma), eps)


def test_imprisonment_cost():
    c = CostParams(c_0=10, c_t=0, c_tau=1)
    assert imprisonment_cost_Ci(3.0, 5.0, c) == 15
    assert imprisonment_cost_Ci(3.0, 10.0, c) - imprisonment_cost_Ci(3.0, 5.0, c) == 5.0
    c2 = CostParams(c_0=10, c_t=8, c_tau=1, m_options=2)
    assert imprisonment_cost_Ci(4.0, 5.0, c2) == pytest.approx(16.0)


def test_social_cost_branches():
    crime = CrimeParams(b=1, s=0.5, l=100, g=2)
    costs = CostParams(c_f=20, c_0=5, c_t=1, c_tau=0.5)
    assert punishment_social_cost(100, 1, 2, "fine", crime, costs, 0.05) == 120
    assert punishment_social_cost(100, 9, 7, "fine", crime, costs, 0.05) == 120
    a, b, c = (punishment_social_cost(100, 2, tau, "prison", crime, costs, 0.05)
               for tau in (1.0, 2.0, 3.0))
    assert b - a == pytest.approx(c - b)
    with pytest.raises(ValueError):
        punishment_social_cost(100, 1, 1, "probation", crime, costs, 0.05)


def test_deterrence_benefit_hand_value():
    assert j0_closed(2.0, 0.66, 100, 0.5, 1.0, 1000, 1) == pytest.approx(492.18, abs=5e-3)
    pop = _pop()
    crime = CrimeParams(b=1, s=0.5, l=1000)
    tg = StrategyTargets(p=0.5, w0=200, k0=0.00431, t=5, r=0.05)
    q = welfare_quadrature(tg, pop, crime, CostParams())
    c = welfare_closed_form(tg, pop, crime, CostParams())
    assert q.j0 == pytest.approx(492.18, abs=5e-3)
    assert c.j0 == pytest.approx(q.j0, rel=1e-9)


def test_no_deterrence_at_minimum_wealth():
    pop = _pop(eps=0.2)
    crime = CrimeParams(b=1, s=0.5, l=1000)
    tg = StrategyTargets(p=0.5, w0=100, k0=0.01, t=5, r=0.05)
    for fn in (welfare_quadrature, welfare_closed_form, welfare_asymptotic):
        assert fn(tg, pop, crime, CostParams()).j0 == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(DegenerateStrategyError):
        welfare_closed_form(StrategyTargets(0.5, 99.0, 0.01, 5, 0.05), pop, crime, CostParams())


def test_full_deterrence_limit():
    assert j0_closed(3.0, 0.66, 100, 1e-9, 1e4, 1000, 1) == pytest.approx(1000 - 1.5 * 100, rel=1e-9)


def test_fine_cost_without_discounters():
    alpha, v, w_m, c_f, gs = 2.5, 0.4, 100.0, 20.0, 0.6
    got = j1_closed(alpha, 0.0, w_m, v, 3.0, 0.0, c_f, gs)
    assert got == pytest.approx(c_f * v ** alpha + gs * alpha / (alpha - 1) * v ** (alpha - 1) * w_m,
                                rel=1e-13)


def _draw(rng):
    a = rng.uniform(1.2, 4)
    wm = rng.uniform(10, 1000)
    beta = rng.uniform(0.001, 0.1)
    pop = PopulationModel(WealthDist(a, wm), DiscountDist(rng.uniform(0, 1), beta),
                          GammaDist(rng.uniform(0.5, 0.9)), rng.uniform(0, 0.5))
    b = rng.uniform(0.5, 2)
    crime = CrimeParams(b=b, s=rng.uniform(0, 0.9 * b), l=rng.uniform(100, 5000),
                        g=rng.uniform(1, 3), Lambda=rng.uniform(0, 1e-3))
    costs = CostParams(c_p=10, c_f=rng.uniform(0, 100), c_0=rng.uniform(0, 100),
                       c_t=rng.uniform(0, 100), c_tau=rng.uniform(0, 10))
    tg = StrategyTargets(p=rng.uniform(0.05, 1), w0=wm / rng.uniform(0.05, 0.95),
                         k0=rng.uniform(0.1, 20) * beta, t=rng.uniform(0.1, 100),
                         r=rng.uniform(0.01, 1))
    return tg, pop, crime, costs, rng.uniform(1, 100)


def test_closed_form_against_quadrature_sample():
    rng = random.Random(17)
    for _ in range(12):
        tg, pop, crime, costs, tau = _draw(rng)
        c = welfare_closed_form(tg, pop, crime, costs, tau=tau)
        q = welfare_quadrature(tg, pop, crime, costs, tau=tau)
        assert c.j0 == pytest.approx(q.j0, rel=1e-9)
        assert c.j1 == pytest.approx(q.j1, rel=1e-6)
        assert c.j2 == pytest.approx(q.j2, rel=1e-6)


def test_asymptotic_tier_converges():
    pop = _pop(alpha=2.5, eps=0.1)
    crime = CrimeParams(b=1, s=0.4, l=800, g=1.5)
    costs = CostParams(c_p=5, c_f=20, c_0=50, c_t=10, c_tau=1)
    errs = []
    for kappa0 in (5.0, 10.0, 20.0, 50.0, 200.0):
        tg = StrategyTargets(p=0.6, w0=250, k0=kappa0 * pop.discount.beta, t=3, r=0.2)
        c = welfare_closed_form(tg, pop, crime, costs, tau=40.0)
        a = welfare_asymptotic(tg, pop, crime, costs, tau=40.0)
        assert a.j0 == c.j0
        errs.append(max(abs(a.j1 / c.j1 - 1), abs(a.j2 / c.j2 - 1)))
    assert all(x > y for x, y in zip(errs, errs[1:]))
    # leading-order expansions: the relative error shrinks like 1/kappa0
    assert errs[3] < 0.15 and errs[4] < 0.04


def test_exact_partition_differs_from_straight_line():
    pop = _pop(alpha=2.5)
    crime = CrimeParams(b=1, s=0.3, l=800, g=2)
    costs = CostParams(c_p=50, c_f=20, c_0=100, c_t=200, c_tau=0.5)
    tg = StrategyTargets(p=0.6, w0=300, k0=0.01, t=20, r=0.05)
    lin = welfare_quadrature(tg, pop, crime, costs)
    exact = welfare_quadrature(tg, pop, crime, costs, partition="exact")
    assert lin.j0 == pytest.approx(exact.j0, rel=1e-9)
    assert lin.j1 != pytest.approx(exact.j1, rel=1e-6)


def test_reciprocal_plus_linear_kernel():
    a, b = 7.0, 0.3
    t, val = golden_section_min(lambda x: a / x + b * x, 1e-3, 100.0, tol=1e-13)
    assert t == pytest.approx(math.sqrt(a / b), rel=1e-6)
    assert val == pytest.approx(2 * math.sqrt(a * b), rel=1e-12)


def test_delay_optimum_is_a_minimum():
    pop = _pop(alpha=2.5, eps=0.3)
    crime = CrimeParams(b=1, s=0.5, l=1000, g=1.5)
    costs = CostParams(c_0=10, c_t=100, c_tau=1)
    opt = optimal_t_tau(20.0, pop, crime, costs, 1.0, 0.3, 0.05)
    from deterrence.welfare import j2_brackets, j2_from_brackets
    from deterrence.behavior import psi, tau_for_target
    ps = psi(1.0, crime, 0.05, 0.61)

    def j2(t):
        tau = tau_for_target(20 * pop.discount.beta, t, ps)
        const = costs.c_0 + costs.c_t / (2 * t) + costs.c_tau * tau
        slope = crime.g * crime.s + crime.g * 0.05 * tau
        return j2_from_brackets(2.5, 0.66, 100, j2_brackets(2.5, 0.3, 20.0, 0.3), const, slope)

    assert opt.j2_min == pytest.approx(j2(opt.t), rel=1e-12)
    for factor in (0.5, 0.9, 1.1, 2.0):
        assert j2(opt.t * factor) > opt.j2_min


def test_thresholds():
    pop = _pop(beta=0.00431, w_m=100)
    crime = CrimeParams(b=1, s=0.5, l=100)
    r_th, fine = thresholds(pop, crime, 0.0505)
    assert r_th == pytest.approx(0.5 * 0.00431 / 2)
    assert fine / 100 == pytest.approx(23.4, abs=0.05)
    _, fine2 = thresholds(_pop(w_m=300), crime, 0.0505)
    assert fine2 == pytest.approx(3 * fine)
    near = CrimeParams(b=1, s=1 - 1e-12, l=100)
    assert thresholds(pop, near, 0.05)[0] == pytest.approx(0.0, abs=1e-14)


def test_phase_condition_region():
    pop = _pop()
    crime = CrimeParams(b=1, s=0.5, l=100)
    r_th, _ = thresholds(pop, crime, 1.0)
    grid = np.linspace(0.01, 1.0, 60)
    for r, expect in ((0.9 * r_th, False), (1.1 * r_th, True)):
        hit = any(phase_condition(v, p, pop, crime, r) for v in grid for p in grid)
        assert hit is expect
    assert all(phase_condition(v, p, pop, crime, 1e9) for v in (0.01, 0.5) for p in (0.01, 0.5))


def test_phase_boundary_matches_constraint_curve():
    from deterrence.optimizer import v_constraint
    pop = _pop()
    crime = CrimeParams(b=1, s=0.3, l=100)
    r = 0.01
    for p in (0.2, 0.5, 0.9):
        vc = float(v_constraint(p, pop, crime, r))
        assert phase_condition(vc * (1 + 1e-9), p, pop, crime, r)
        assert not phase_condition(vc * (1 - 1e-9), p, pop, crime, r)


def test_severe_cells_need_the_term_floor_condition():
    """In natural units the prison cost only vanishes when v > beta (b - pi s) / (pi r).

    The condition with the factor two assumes the delay dominates 1/k0, which
    fails at survey-scale beta; cells meeting only that weaker condition stay mild.
    """
    pop = PopulationModel(WealthDist(2.5, 100), DiscountDist(0.66, 0.00431), GammaDist(0.61), 0.5)
    crime = CrimeParams(b=1, s=0.5, l=1000, g=1.5)
    costs = CostParams(c_p=1, c_f=10, c_0=10, c_t=100, c_tau=1)
    r_th, _ = thresholds(pop, crime, 1.0)
    rs = np.linspace(0.5, 5, 10) * r_th
    fs = np.linspace(1.0, 3.0, 10) * 50
    rows = phase_sweep(pop, crime, costs, 1.0, rs, fs, list(np.linspace(5, 150, 30)))
    grid = [rows[i * 10:(i + 1) * 10] for i in range(10)]
    weak_only = 0
    for i in range(10):
        for j in range(10):
            cell = grid[i][j]
            if cell["severe"]:
                near = [grid[a][b]["condition_tau_floor"] for a in (i - 1, i, i + 1)
                        for b in (j - 1, j, j + 1) if 0 <= a < 10 and 0 <= b < 10]
                assert any(near)
            weak_only += bool(cell["condition"] and not cell["severe"])
    assert weak_only > 0
