"""Experiment configuration: JSON parsing, validation and defaults."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ConfigError
from .lattice import Lattice, PauliObservable, ProductStateSpec
from .noise import KINDS

SCENARIOS = ("prethermal_scan", "ensemble_compare", "noise_scaling", "mitigation_run",
             "magnus_compare", "sample_budget")

# scenario parameters and their defaults
PARAM_DEFAULTS = {
    "prethermal_scan": {"t_cap": 1000.0, "epsilon": 0.05},
    "ensemble_compare": {"t_plateau": 20.0, "delta": 0.5, "epsilon": 0.05, "kind": "broadened",
                         "large_ed": False},
    "noise_scaling": {"steps": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]},
    "mitigation_run": {"steps": [10], "time_average": False},
    "magnus_compare": {"orders": [0, 1, 2], "t_max": 100.0, "large_ed": False},
    "sample_budget": {"rows": [{"N": 50, "D": 80, "p": 0.003, "p_m": 0.0, "eps_stat": 1.0}]},
}

TOP_DEFAULTS = {
    "lattice": {"rows": 4, "cols": 4},
    "J": 1.0,
    "states": [{"theta": math.pi / 2, "phi": 0.0}],
    "observable": {"kind": "m_inplane_sq"},
    "noise": {"kind": "depolarizing", "p": 0.003, "p_m": 0.0, "backward_placement": "before"},
    "n_traj": 2000,
    "n_workers": 1,
    "output": "output",
}

_KNOWN = {"scenario", "lattice", "J", "omega", "tau", "states", "state_grid", "observable",
          "noise", "n_traj", "n_workers", "seed", "output", "params"}


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int
    lattice: dict
    J: float
    taus: list
    states: list
    observable: dict
    noise: dict
    n_traj: int
    n_workers: int
    output: str
    params: dict = field(default_factory=dict)

    @property
    def omegas(self) -> list[float]:
        return [2 * math.pi / t for t in self.taus]

    def product_states(self) -> list[ProductStateSpec]:
        return [ProductStateSpec(s["theta"], s["phi"]) for s in self.states]

    def observable_for(self, lattice: Lattice):
        """PauliObservable, or None for m_x^2 + m_y^2."""
        kind = self.observable["kind"]
        if kind == "m_inplane_sq":
            return None
        if kind == "identity":
            return PauliObservable.identity()
        if kind == "center_xx":
            return PauliObservable(lattice.center_bond(), "XX")
        return PauliObservable(tuple(self.observable["support"]), self.observable["paulis"],
                               float(self.observable.get("prefactor", 1.0)))

    def to_dict(self) -> dict:
        return asdict(self)


def _num(errors, path, value, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append((path, f"expected a number, got {value!r}"))
        return None
    if integer and int(value) != value:
        errors.append((path, f"expected an integer, got {value!r}"))
        return None
    if not math.isfinite(value):
        errors.append((path, "must be finite"))
        return None
    if lo is not None and (value < lo or (lo_open and value == lo)):
        errors.append((path, f"must be {'>' if lo_open else '>='} {lo}, got {value}"))
        return None
    if hi is not None and (value > hi or (hi_open and value == hi)):
        errors.append((path, f"must be {'<' if hi_open else '<='} {hi}, got {value}"))
        return None
    return int(value) if integer else float(value)


def _num_list(errors, path, value, **kw):
    if not isinstance(value, list) or not value:
        errors.append((path, "expected a non-empty list"))
        return []
    out = [_num(errors, f"{path}[{i}]", v, **kw) for i, v in enumerate(value)]
    return [v for v in out if v is not None]


def validate_config(raw) -> ExperimentConfig:
    """Parse JSON text (or an already decoded dict) into an ExperimentConfig.

    Raises:
        ConfigError: listing every problem found, each with its field path.
    """
    if isinstance(raw, (str, bytes)):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError([("$", f"invalid JSON: {exc}")]) from None
    else:
        data = raw
    if not isinstance(data, dict):
        raise ConfigError([("$", "top level must be an object")])
    errors: list[tuple[str, str]] = []
    for key in sorted(set(data) - _KNOWN):
        errors.append((key, "unknown field"))

    scenario = data.get("scenario")
    if scenario is None:
        errors.append(("scenario", "missing"))
    elif scenario not in SCENARIOS:
        errors.append(("scenario", f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}"))

    seed = data.get("seed")
    if seed is None:
        errors.append(("seed", "missing (a seed is required for reproducibility)"))
    else:
        seed = _num(errors, "seed", seed, lo=0, integer=True)

    lat = data.get("lattice", TOP_DEFAULTS["lattice"])
    if not isinstance(lat, dict):
        errors.append(("lattice", "expected an object with rows and cols"))
        lat = {}
    rows = _num(errors, "lattice.rows", lat.get("rows"), lo=1, integer=True)
    cols = _num(errors, "lattice.cols", lat.get("cols"), lo=1, integer=True)
    if rows is not None and cols is not None and rows * cols < 2:
        errors.append(("lattice", "need at least two sites"))

    J = _num(errors, "J", data.get("J", TOP_DEFAULTS["J"]))
    if J == 0:
        errors.append(("J", "must be nonzero"))

    taus = []
    has_omega, has_tau = "omega" in data, "tau" in data
    if has_omega and has_tau:
        errors.append(("omega", "omega and tau are both set; give exactly one"))
    elif has_omega or has_tau:
        key = "omega" if has_omega else "tau"
        val = data[key]
        vals = _num_list(errors, key, val if isinstance(val, list) else [val], lo=0, lo_open=True)
        taus = [2 * math.pi / v for v in vals] if has_omega else vals
    elif scenario in ("prethermal_scan", "ensemble_compare", "noise_scaling", "mitigation_run",
                      "magnus_compare"):
        errors.append(("omega", "missing; give omega or tau"))

    states = []
    if "states" in data and "state_grid" in data:
        errors.append(("states", "states and state_grid are both set; give one"))
    elif "state_grid" in data:
        grid = data["state_grid"]
        if not isinstance(grid, dict):
            errors.append(("state_grid", "expected an object with theta and phi lists"))
        else:
            th = _num_list(errors, "state_grid.theta", grid.get("theta"))
            ph = _num_list(errors, "state_grid.phi", grid.get("phi"))
            states = [{"theta": a, "phi": b} for a in th for b in ph]
    else:
        raw_states = data.get("states", TOP_DEFAULTS["states"])
        if not isinstance(raw_states, list) or not raw_states:
            errors.append(("states", "expected a non-empty list"))
        else:
            for i, s in enumerate(raw_states):
                if not isinstance(s, dict):
                    errors.append((f"states[{i}]", "expected an object with theta and phi"))
                    continue
                a = _num(errors, f"states[{i}].theta", s.get("theta"))
                b = _num(errors, f"states[{i}].phi", s.get("phi", 0.0))
                if a is not None and b is not None:
                    states.append({"theta": a, "phi": b})

    obs = data.get("observable", TOP_DEFAULTS["observable"])
    if not isinstance(obs, dict) or "kind" not in obs:
        errors.append(("observable", "expected an object with a kind"))
        obs = dict(TOP_DEFAULTS["observable"])
    elif obs["kind"] not in ("m_inplane_sq", "identity", "center_xx", "pauli"):
        errors.append(("observable.kind", f"unknown observable kind {obs['kind']!r}"))
    elif obs["kind"] == "pauli":
        sup, pl = obs.get("support"), obs.get("paulis")
        if not isinstance(sup, list) or not isinstance(pl, str) or len(sup) != len(pl):
            errors.append(("observable", "pauli observable needs support (list) and paulis (string) of equal length"))
        elif any(ch not in "XYZ" for ch in pl):
            errors.append(("observable.paulis", "use X, Y, Z only"))
        elif rows is not None and cols is not None:
            for i, sidx in enumerate(sup):
                _num(errors, f"observable.support[{i}]", sidx, lo=0, hi=rows * cols - 1, integer=True)

    noise = dict(TOP_DEFAULTS["noise"])
    raw_noise = data.get("noise", {})
    if not isinstance(raw_noise, dict):
        errors.append(("noise", "expected an object"))
    else:
        noise.update(raw_noise)
        if noise["kind"] not in KINDS:
            errors.append(("noise.kind", f"unknown noise kind {noise['kind']!r}; expected one of {', '.join(KINDS)}"))
        noise["p"] = _num(errors, "noise.p", noise["p"], lo=0, hi=1, hi_open=True)
        noise["p_m"] = _num(errors, "noise.p_m", noise["p_m"], lo=0, hi=1, hi_open=True)
        if noise["backward_placement"] not in ("before", "after"):
            errors.append(("noise.backward_placement", "must be 'before' or 'after'"))
        for key in sorted(set(raw_noise) - set(TOP_DEFAULTS["noise"])):
            errors.append((f"noise.{key}", "unknown field"))

    n_traj = _num(errors, "n_traj", data.get("n_traj", TOP_DEFAULTS["n_traj"]), lo=1, integer=True)
    n_workers = _num(errors, "n_workers", data.get("n_workers", TOP_DEFAULTS["n_workers"]), lo=1, integer=True)
    output = data.get("output", TOP_DEFAULTS["output"])
    if not isinstance(output, str) or not output:
        errors.append(("output", "expected a non-empty path string"))

    params = {}
    if scenario in PARAM_DEFAULTS:
        params = json.loads(json.dumps(PARAM_DEFAULTS[scenario]))
        raw_params = data.get("params", {})
        if not isinstance(raw_params, dict):
            errors.append(("params", "expected an object"))
            raw_params = {}
        for key in sorted(set(raw_params) - set(params)):
            errors.append((f"params.{key}", f"unknown parameter for {scenario}"))
        params.update({k: v for k, v in raw_params.items() if k in params})
        _check_params(errors, scenario, params)

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(scenario, seed, {"rows": rows, "cols": cols}, J, taus, states, obs, noise,
                            n_traj, n_workers, output, params)


def _check_params(errors, scenario, params):
    pre = "params."
    for key in ("t_cap", "t_plateau", "delta", "epsilon", "t_max"):
        if key in params:
            params[key] = _num(errors, pre + key, params[key], lo=0, lo_open=True)
    if "steps" in params:
        params["steps"] = _num_list(errors, pre + "steps", params["steps"], lo=0, integer=True)
    if "orders" in params:
        params["orders"] = _num_list(errors, pre + "orders", params["orders"], lo=0, hi=2, integer=True)
    if "kind" in params and params["kind"] not in ("sharp", "broadened"):
        errors.append((pre + "kind", "must be 'sharp' or 'broadened'"))
    for key in ("time_average", "large_ed"):
        if key in params and not isinstance(params[key], bool):
            errors.append((pre + key, "expected true or false"))
    if scenario == "sample_budget":
        rows = params["rows"]
        if not isinstance(rows, list) or not rows:
            errors.append((pre + "rows", "expected a non-empty list"))
            return
        clean = []
        for i, r in enumerate(rows):
            path = f"{pre}rows[{i}]"
            if not isinstance(r, dict):
                errors.append((path, "expected an object"))
                continue
            row = {"N": _num(errors, path + ".N", r.get("N"), lo=1, integer=True),
                   "D": _num(errors, path + ".D", r.get("D"), lo=0, integer=True),
                   "p": _num(errors, path + ".p", r.get("p"), lo=0, hi=1, hi_open=True),
                   "p_m": _num(errors, path + ".p_m", r.get("p_m", 0.0), lo=0, hi=1, hi_open=True),
                   "eps_stat": _num(errors, path + ".eps_stat", r.get("eps_stat", 1.0), lo=0, lo_open=True)}
            clean.append(row)
        params["rows"] = clean


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return validate_config(fh.read())


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for a (state, step, circuit, ...) task key."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    hi, lo = (int(x) for x in ss.generate_state(2, np.uint32))
    return (hi << 32) | lo
