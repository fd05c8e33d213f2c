"""Optimal penal strategies for populations with heterogeneous wealth, discounting and
probability weighting."""
from .behavior import (Agent, CrimeParams, Label, PenalStrategy, StrategyTargets, classify,
                       net_offense_utility)
from .distributions import (DiscountDist, GammaDist, PopulationModel, WealthDist,
                            pi_fixed_point, weighting_pi)
from .errors import DegenerateStrategyError, NoRootError, NonMonotoneError
from .optimizer import PhaseFailure, ReducedSolution, optimize
from .simulator import SimConfig, build_population, simulate
from .welfare import (CostParams, WelfareBreakdown, optimal_t_tau, welfare_asymptotic,
                      welfare_closed_form, welfare_quadrature)

__all__ = [
    "Agent", "CrimeParams", "Label", "PenalStrategy", "StrategyTargets", "classify",
    "net_offense_utility", "DiscountDist", "GammaDist", "PopulationModel", "WealthDist",
    "pi_fixed_point", "weighting_pi", "DegenerateStrategyError", "NoRootError",
    "NonMonotoneError", "PhaseFailure", "ReducedSolution", "optimize", "SimConfig",
    "build_population", "simulate", "CostParams", "WelfareBreakdown", "optimal_t_tau",
    "welfare_asymptotic", "welfare_closed_form", "welfare_quadrature",
]
