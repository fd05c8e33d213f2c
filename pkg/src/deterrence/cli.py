"""Command line entry point: fit-survey, eval-welfare, optimize, phase-sweep, simulate."""
import argparse
import csv
import io
import json
import math
import os
import statistics
import sys

import numpy as np

from . import config as cfgmod
from . import estimation as est
from .behavior import (PenalStrategy, StrategyTargets, burglary_classify_arrays, target_k0,
                       target_w0)
from .errors import DegenerateStrategyError, NoRootError
from .optimizer import PhaseFailure, optimize
from .simulator import build_population, burglary_region_probabilities, burglary_simulate, simulate
from .welfare import (optimal_t_tau, phase_sweep, thresholds, welfare_asymptotic,
                      welfare_closed_form, welfare_quadrature)

EXIT_OK, EXIT_INVALID, EXIT_DEGENERATE = 0, 2, 3
INSUFFICIENT = "insufficient data"


class _Degenerate(Exception):
    def __init__(self, payload):
        super().__init__(payload.get("message", ""))
        self.payload = payload


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _envelope(command, args, cfg, body):
    return {"schema_version": cfgmod.SCHEMA_VERSION, "command": command, "seed": args.seed,
            "config": cfg, **body}


def _emit(args, name, payload):
    text = json.dumps(_clean(payload), indent=2) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{name}.json"), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(args, name, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{name}.csv"), "w") as fh:
            fh.write(buf.getvalue())
    return buf.getvalue()


def _linspace(rng):
    return [float(x) for x in np.linspace(rng["lo"], rng["hi"], rng["count"])]


def _targets(cfg, pop, crime):
    """Targets given directly, or derived from a raw strategy."""
    if "targets" in cfg:
        return StrategyTargets(**cfg["targets"]), None
    if "strategy" not in cfg:
        raise cfgmod.ConfigError("config needs a 'strategy' or 'targets' section")
    strat = PenalStrategy(**cfg["strategy"])
    g = pop.gamma.mu_gamma
    w0 = target_w0(strat, crime, g)
    k0 = target_k0(strat, crime, g)
    return StrategyTargets(p=strat.p, w0=w0, k0=k0, t=strat.t, r=strat.r), strat.tau


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# ------------------------------------------------------------------ commands

def _discount_fitter(items):
    rho, beta = est.estimate_rho_beta(items)
    return {"rho": rho, "beta": beta}


def _weighting_fitter(items):
    B = np.array([[np.nan if x is None else x for x in r.fine_answers] for r in items])
    fit = est.fit_gamma_batch(B)
    mu, sd, _ = est.estimate_gamma_population(fit.gamma, fit.gamma_se)
    return {"mu_gamma": mu, "sigma_gamma": sd}


def _has_delays(r):
    return any(t is not None for t in r.delays)


def _has_fines(r):
    return sum(x is not None for x in r.fine_answers) >= 3


def cmd_fit_survey(args, cfg):
    path = args.input or cfg.get("fit_survey", {}).get("input")
    if not path:
        raise cfgmod.ConfigError("fit-survey needs an input CSV")
    responses = est.parse_survey(path)
    report = {"n_respondents": len(responses)}

    delay_resp = [r for r in responses if _has_delays(r)]
    k_hat = {}
    if len(delay_resp) >= 2:
        for r in delay_resp:
            k_hat[r.respondent_id] = est.discount_detail(r).k
        rho, beta = est.estimate_rho_beta(delay_resp)
        report["discount"] = {"rho": rho.as_dict(), "beta": beta.as_dict()}
    else:
        rho = beta = None
        report["discount"] = INSUFFICIENT

    fine_resp = [r for r in responses if _has_fines(r)]
    gamma_hat = {}
    if len(fine_resp) >= 2:
        B = np.array([[np.nan if x is None else x for x in r.fine_answers] for r in fine_resp])
        fit = est.fit_gamma_batch(B)
        gamma_hat = {r.respondent_id: float(g) for r, g in zip(fine_resp, fit.gamma)}
        mu, sd, var = est.estimate_gamma_population(fit.gamma, fit.gamma_se)
        report["weighting"] = {"mu_gamma": mu.as_dict(), "sigma_gamma": sd.as_dict(),
                               "sigma_gamma_sq": var.as_dict(),
                               "n_boundary": int(fit.boundary.sum())}
    else:
        mu = sd = fit = None
        report["weighting"] = INSUFFICIENT

    harsh = [est.estimate_harshness(r, k_hat[r.respondent_id]) for r in delay_resp
             if r.respondent_id in k_hat]
    harsh = [h for h in harsh if h is not None]
    report["harshness"] = ({"median": statistics.median(harsh), "n_used": len(harsh)}
                           if harsh else INSUFFICIENT)

    # independence of each trait from the others, by median split
    salary = {r.respondent_id: r.salary for r in responses if r.salary is not None}
    splits = {}
    pairs = [("salary", salary, "discount", delay_resp, _discount_fitter),
             ("salary", salary, "weighting", fine_resp, _weighting_fitter),
             ("k", k_hat, "weighting", fine_resp, _weighting_fitter),
             ("gamma", gamma_hat, "discount", delay_resp, _discount_fitter)]
    for a_name, a_map, b_name, b_pool, fitter in pairs:
        items = [r for r in b_pool if r.respondent_id in a_map]
        key = f"{b_name}|{a_name}"
        try:
            splits[key] = est.independence_split([a_map[r.respondent_id] for r in items],
                                                 items, fitter)
        except ValueError:
            splits[key] = INSUFFICIENT
    report["independence"] = splits

    if args.out:
        if rho is not None and not math.isnan(beta.value):
            width = beta.value / 4.0
            values = [k for k in k_hat.values() if k > 0]
            zero = len(k_hat) - len(values)
            cdf = lambda k: rho.value * -math.expm1(-k / beta.value)  # noqa: E731
            rows = [(0.0, 0.0, zero, 1.0 - rho.value)]
            rows += est.histogram_rows(values, width, cdf)
            _write_csv(args, "k_histogram", ["bin_left", "bin_right", "count", "fitted_density"],
                       rows)
        if fit is not None:
            spread = math.sqrt(sd.value ** 2 + float(np.mean(fit.gamma_se ** 2)))
            nd = statistics.NormalDist(mu.value, spread) if spread > 0 else None
            cdf = (lambda g: nd.cdf(g)) if nd else (lambda g: float(g >= mu.value))
            start = 0.02 * math.floor(float(fit.gamma.min()) / 0.02)
            rows = est.histogram_rows(fit.gamma, 0.02, cdf, start=start)
            _write_csv(args, "gamma_histogram",
                       ["bin_left", "bin_right", "count", "fitted_density"], rows)
    return _envelope("fit-survey", args, cfg, {"input": str(path), "report": report})


def _breakdown_dict(b):
    d = b.as_dict()
    d["total"] = b.total
    return d


def cmd_eval_welfare(args, cfg):
    pop, crime, costs = cfgmod.population(cfg), cfgmod.crime(cfg), cfgmod.costs(cfg)
    try:
        targets, tau = _targets(cfg, pop, crime)
        tiers = {"quadrature": welfare_quadrature(targets, pop, crime, costs, tau=tau),
                 "closed": welfare_closed_form(targets, pop, crime, costs, tau=tau),
                 "asymptotic": welfare_asymptotic(targets, pop, crime, costs, tau=tau)}
    except (DegenerateStrategyError, NoRootError) as exc:
        raise _Degenerate(_envelope("eval-welfare", args, cfg, {
            "status": "degenerate", "message": str(exc)}))
    names = list(tiers)
    deviations = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            deviations[f"{a}|{b}"] = {part: _rel(getattr(tiers[a], part), getattr(tiers[b], part))
                                      for part in ("j0", "j1", "j2")}
            deviations[f"{a}|{b}"]["total"] = _rel(tiers[a].total, tiers[b].total)
    return _envelope("eval-welfare", args, cfg, {
        "status": "ok", "targets": vars(targets),
        "tiers": {k: _breakdown_dict(v) for k, v in tiers.items()},
        "relative_deviation": deviations})


def cmd_optimize(args, cfg):
    pop, crime, costs = cfgmod.population(cfg), cfgmod.crime(cfg), cfgmod.costs(cfg)
    opt = cfg["optimize"]
    r = opt["r"]
    r_th, fine_bound = thresholds(pop, crime, r)
    limits = {"r_threshold": r_th, "fine_bound": fine_bound,
              "fine_bound_over_w_m": fine_bound / pop.wealth.w_m}
    sol = optimize(pop, crime, costs, r)
    if isinstance(sol, PhaseFailure):
        raise _Degenerate(_envelope("optimize", args, cfg, {
            "status": "phase-failure", "branch": sol.branch, "message": sol.message,
            "r": r, "thresholds": limits,
            "explanation": f"r = {r} does not exceed (b - s) * beta / 2 = {r_th}"}))
    delay = optimal_t_tau(opt["kappa0"], pop, crime, costs, sol.p_star, sol.v_star, r,
                          tuple(opt["log_t_bounds"]))
    return _envelope("optimize", args, cfg, {
        "status": "ok", "solution": vars(sol), "thresholds": limits,
        "implied_strategy": {"p": sol.p_star, "f": sol.f_star, "t": delay.t, "tau": delay.tau,
                             "r": r, "kappa0": opt["kappa0"], "j2_min": delay.j2_min}})


def cmd_phase_sweep(args, cfg):
    pop, crime, costs = cfgmod.population(cfg), cfgmod.crime(cfg), cfgmod.costs(cfg)
    ps = cfg.get("phase_sweep")
    if not ps or not {"r_range", "f_range", "kappa_range"} <= set(ps):
        raise cfgmod.ConfigError("phase_sweep needs r_range, f_range and kappa_range")
    p = ps.get("p", 1.0)
    bounds = tuple(ps.get("log_t_bounds", [-30.0, 30.0]))
    rows = phase_sweep(pop, crime, costs, p, _linspace(ps["r_range"]), _linspace(ps["f_range"]),
                       _linspace(ps["kappa_range"]), bounds)
    header = ["r", "f", "v", "rate_half", "argmax_kappa0", "severe", "condition",
              "condition_tau_floor", "fine_bound"]
    table = []
    for row in rows:
        _, fb = thresholds(pop, crime, row["r"])
        table.append([row[h] for h in header[:-1]] + [fb])
    text = _write_csv(args, "phase_sweep", header, table)
    if not args.out:
        # stdout carries the table alone so it can be piped straight into a CSV reader
        sys.stdout.write(text)
        return None
    r_th, _ = thresholds(pop, crime, 1.0)
    return _envelope("phase-sweep", args, cfg, {
        "status": "ok", "p": p, "r_threshold": r_th, "cells": len(rows),
        "severe_cells": sum(1 for row in rows if row["severe"])})


def cmd_simulate(args, cfg):
    pop, crime, costs = cfgmod.population(cfg), cfgmod.crime(cfg), cfgmod.costs(cfg)
    if "strategy" not in cfg:
        raise cfgmod.ConfigError("simulate needs a 'strategy' section")
    strat = PenalStrategy(**cfg["strategy"])
    sim = cfgmod.sim_config(cfg, args.seed, args.threads)
    population = build_population(pop, sim)
    if cfg["simulation"]["mode"] == "burglary":
        gain = cfg["simulation"].get("gain")
        if gain is None:
            raise cfgmod.ConfigError("burglary mode needs simulation.gain")
        report = burglary_simulate(population, strat, gain, crime, costs, sim)
        labels = burglary_classify_arrays(population.w, population.k, population.informed,
                                          strat, gain)[population.informed]
        observed = {name: float(np.mean(labels == i)) if labels.size else 0.0
                    for i, name in enumerate(("NON_OFFENDER", "FINE_CHOOSER", "PRISON_CHOOSER"))}
        expected = burglary_region_probabilities(pop, strat, gain)
        return _envelope("simulate", args, cfg, {
            "status": "ok", "mode": "burglary", "report": report.as_dict(),
            "region_fractions": {"simulated": observed, "analytic": expected}})
    report = simulate(population, strat, crime, costs, sim)
    body = {"status": "ok", "mode": "standard", "report": report.as_dict()}
    try:
        targets, tau = _targets(cfg, pop, crime)
        analytic = welfare_quadrature(targets, pop, crime, costs, tau=tau, partition="exact").total
        z = (report.welfare_per_capita - analytic) / report.standard_error \
            if report.standard_error > 0 else 0.0
        body["analytic"] = {"welfare": analytic, "z": z, "agrees_within_3se": abs(z) <= 3.0,
                            "gamma_mode": sim.gamma_mode}
    except (DegenerateStrategyError, NoRootError) as exc:
        body["analytic"] = {"unavailable": str(exc)}
    return _envelope("simulate", args, cfg, body)


COMMANDS = {"fit-survey": cmd_fit_survey, "eval-welfare": cmd_eval_welfare,
            "optimize": cmd_optimize, "phase-sweep": cmd_phase_sweep, "simulate": cmd_simulate}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--fail-on-degenerate", action="store_true",
                        help="exit with code 3 on degenerate or phase-failure results")
    parser = argparse.ArgumentParser(prog="deterrence", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "fit-survey":
            sp.add_argument("input", nargs="?", help="survey CSV")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = cfgmod.load(args.config)
        payload = COMMANDS[args.command](args, cfg)
    except _Degenerate as exc:
        _emit(args, args.command.replace("-", "_"), exc.payload)
        return EXIT_DEGENERATE if args.fail_on_degenerate else EXIT_OK
    except est.SurveyFormatError as exc:
        for row, msg in exc.errors:
            print(f"error: row {row}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except (cfgmod.ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if payload is not None:
        _emit(args, args.command.replace("-", "_"), payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
