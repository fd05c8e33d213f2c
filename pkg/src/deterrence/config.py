"""JSON run configuration: defaults, validation and conversion to model objects."""
import copy
import json

from .behavior import CrimeParams, PenalStrategy, StrategyTargets
from .distributions import DiscountDist, GammaDist, PopulationModel, WealthDist
from .simulator import SimConfig
from .welfare import CostParams

SCHEMA_VERSION = 1

_RANGE = {"lo": float, "hi": float, "count": int}

# section -> key -> type, None marks a required value with no default
SCHEMA = {
    "population": {"alpha": float, "w_m": float, "rho": float, "beta": float,
                   "mu_gamma": float, "sigma_gamma": float, "epsilon": float},
    "crime": {"b": float, "s": float, "l": float, "g": float, "Lambda": float},
    "costs": {"c_p": float, "c_f": float, "c_0": float, "c_t": float, "c_tau": float,
              "m_options": int},
    "strategy": {"p": float, "f": float, "t": float, "tau": float, "r": float},
    "targets": {"p": float, "w0": float, "k0": float, "t": float, "r": float},
    "optimize": {"r": float, "kappa0": float, "log_t_bounds": list},
    "phase_sweep": {"p": float, "r_range": dict, "f_range": dict, "kappa_range": dict,
                    "log_t_bounds": list},
    "simulation": {"n_agents": int, "delta_t": float, "lambda_rate": float,
                   "gamma_mode": str, "mode": str, "gain": float},
    "fit_survey": {"input": str},
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "population": {"alpha": 2.5, "w_m": 100.0, "rho": 0.66, "beta": 0.00431,
                   "mu_gamma": 0.61, "sigma_gamma": 0.0, "epsilon": 0.0},
    "crime": {"b": 1.0, "s": 0.5, "l": 150.0, "g": 1.0, "Lambda": 0.0},
    "costs": {"c_p": 1.0, "c_f": 10.0, "c_0": 10.0, "c_t": 100.0, "c_tau": 1.0,
              "m_options": 2},
    "optimize": {"r": 0.0505, "kappa0": 20.0, "log_t_bounds": [-30.0, 30.0]},
    "simulation": {"n_agents": 100_000, "delta_t": 1.0, "lambda_rate": 1e-4,
                   "gamma_mode": "shared", "mode": "standard"},
}


class ConfigError(ValueError):
    pass


def _check_value(path, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind is list:
        if (not isinstance(value, list) or len(value) != 2
                or not all(isinstance(x, (int, float)) for x in value)):
            raise ConfigError(f"{path}: expected [lo, hi], got {value!r}")
        return [float(x) for x in value]
    if kind is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object with lo, hi, count")
        unknown = set(value) - set(_RANGE)
        missing = set(_RANGE) - set(value)
        if unknown or missing:
            raise ConfigError(f"{path}: range needs exactly lo, hi, count")
        out = {k: _check_value(f"{path}.{k}", value[k], t) for k, t in _RANGE.items()}
        if out["count"] < 2:
            raise ConfigError(f"{path}.count must be >= 2")
        return out
    raise TypeError(kind)


def resolve(raw):
    """Merge a raw config over the defaults, rejecting unknown or mistyped keys."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    unknown = set(raw) - set(SCHEMA) - {"schema_version"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    out = copy.deepcopy(DEFAULTS)
    for section, body in raw.items():
        if section == "schema_version":
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected an object")
        bad = set(body) - set(SCHEMA[section])
        if bad:
            raise ConfigError(f"{section}: unknown keys {sorted(bad)}")
        merged = out.setdefault(section, {})
        for key, value in body.items():
            merged[key] = _check_value(f"{section}.{key}", value, SCHEMA[section][key])
    try:
        population(out)
        crime(out)
        costs(out)
        if "strategy" in out:
            _require(out, "strategy")
            PenalStrategy(**out["strategy"])
        if "targets" in out:
            _require(out, "targets")
            StrategyTargets(**out["targets"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    sim = out["simulation"]
    if sim["mode"] not in ("standard", "burglary"):
        raise ConfigError("simulation.mode must be 'standard' or 'burglary'")
    return out


def _require(cfg, section):
    missing = set(SCHEMA[section]) - set(cfg[section])
    if missing:
        raise ConfigError(f"{section}: missing keys {sorted(missing)}")


def load(path):
    if path is None:
        return resolve({})
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return resolve(raw)


def population(cfg):
    p = cfg["population"]
    return PopulationModel(WealthDist(p["alpha"], p["w_m"]), DiscountDist(p["rho"], p["beta"]),
                           GammaDist(p["mu_gamma"], p["sigma_gamma"]), p["epsilon"])


def crime(cfg):
    return CrimeParams(**cfg["crime"])


def costs(cfg):
    return CostParams(**cfg["costs"])


def sim_config(cfg, seed, threads):
    s = cfg["simulation"]
    return SimConfig(n_agents=s["n_agents"], delta_t=s["delta_t"], lambda_rate=s["lambda_rate"],
                     seed=seed, gamma_mode=s["gamma_mode"], threads=threads)
