"""Scenario drivers behind ``prethermal run``.

Every scenario writes one or more CSV tables plus ``metadata.json`` into the
configured output directory. Outputs depend only on the config (including the
seed), not on the worker count.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (PLATEAU_COLUMNS, detect_plateaus, floquet_time_average,
                       observable_norm)
from .config import ExperimentConfig, derive_seed
from .exceptions import ResourceLimitError
from .io import config_hash, write_csv, write_json
from .lattice import (build_lattice, inplane_magnetization_matrix, mean_squared_inplane_magnetization,
                      pauli_matrix, product_state, product_state_energy, xy_hamiltonian)
from .magnus import floquet_vs_magnus_deviation, magnus_sector_spectra
from .mitigation import MitigationRecord, RECORD_COLUMNS, sample_budget
from .noise import NoiseModel, noisy_survival_probability
from .spectral import ED_CAP, all_sector_spectra, diagonal_ensemble, microcanonical
from .statevector import survival_probability, trotter_schedule

SMALL_ED_CAP = 4000  # sector dimension allowed without the large_ed opt-in


def _ed_cap(cfg: ExperimentConfig) -> int:
    return ED_CAP if cfg.params.get("large_ed") else SMALL_ED_CAP


def _with_ed_hint(cfg, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ResourceLimitError as exc:
        if cfg.params.get("large_ed"):
            raise
        raise ResourceLimitError(f"{exc} (set params.large_ed to true to allow sectors up to {ED_CAP})") from None


def _ensemble_matrix(obs, n):
    return inplane_magnetization_matrix(n) if obs is None else pauli_matrix(obs, n)


def _state_cols(spec, lattice, J):
    return {"theta": spec.theta, "phi": spec.phi, "energy": product_state_energy(spec, lattice, J)}


def _require_unitary(obs, scenario):
    if obs is None or not (obs.is_identity or obs.is_unitary):
        raise ValueError(f"{scenario} needs a unitary Pauli observable (e.g. center_xx)")


def prethermal_scan(cfg, lattice, out):
    p = cfg.params
    obs = cfg.observable_for(lattice)
    norm = observable_norm(obs, lattice.n_sites)
    series_rows, plateau_rows = [], []
    for si, spec in enumerate(cfg.product_states()):
        for tau in cfg.taus:
            sched = trotter_schedule(lattice, cfg.J, tau=tau)
            M = int(math.floor(p["t_cap"] / tau + 1e-9))
            series = floquet_time_average(spec, obs, sched, M, lattice)
            for r in series.rows():
                series_rows.append({"state": si, **r})
            for rep in detect_plateaus(series, p["epsilon"], norm, p["t_cap"]):
                plateau_rows.append({"state": si, "tau": tau, "found": rep.found, **rep.row()})
    write_csv(out / "series.csv", ["state", "tau", "t", "instantaneous", "running_average"], series_rows)
    write_csv(out / "plateaus.csv", ["state", "tau", "found"] + PLATEAU_COLUMNS, plateau_rows)
    return ["series.csv", "plateaus.csv"]


def ensemble_compare(cfg, lattice, out):
    p = cfg.params
    H = xy_hamiltonian(lattice, cfg.J)
    n = lattice.n_sites
    obs = cfg.observable_for(lattice)
    A = _ensemble_matrix(obs, n)
    norm = observable_norm(obs, n)
    cap = _ed_cap(cfg)
    spectra = _with_ed_hint(cfg, all_sector_spectra, H, max_dim=cap)
    sector0 = [s for s in spectra if s.mz == 0]
    rows = []
    for tau in cfg.taus:
        magnus = _with_ed_hint(cfg, magnus_sector_spectra, H, tau, 1, max_dim=cap)
        sched = trotter_schedule(lattice, cfg.J, tau=tau)
        M = int(math.floor(p["t_plateau"] / tau + 1e-9))
        for spec in cfg.product_states():
            psi = product_state(spec, lattice)
            series = floquet_time_average(psi, obs, sched, M + 1, lattice)
            rep = detect_plateaus(series, p["epsilon"], norm, (M + 2) * tau)
            on_plateau = any(r.found and r.m1 <= M < r.m2 for r in rep)
            de, weights = diagonal_ensemble(psi, A, spectra, return_weights=True)
            E = product_state_energy(spec, lattice, cfg.J)
            micro = microcanonical(E, p["delta"], A, sector0, p["kind"], n) if sector0 else float("nan")
            rows.append({"tau": tau, **_state_cols(spec, lattice, cfg.J),
                         "plateau_value": float(series.running[M]), "on_plateau": on_plateau,
                         "diagonal_xy": de, "microcanonical": micro,
                         "magnus1_diagonal": diagonal_ensemble(psi, A, magnus),
                         "weight_mz0": weights.get(0, 0.0)})
    cols = ["tau", "theta", "phi", "energy", "plateau_value", "on_plateau", "diagonal_xy",
            "microcanonical", "magnus1_diagonal", "weight_mz0"]
    write_csv(out / "ensembles.csv", cols, rows)
    return ["ensembles.csv"]


def _survival_pair(cfg, lattice, spec, sched, n, obs, model, keys):
    from .lattice import PauliObservable

    ident = PauliObservable.identity()
    L_id = noisy_survival_probability(spec, sched, n, ident, model, cfg.n_traj,
                                      derive_seed(cfg.seed, *keys, 0), lattice, cfg.n_workers)
    L_A = noisy_survival_probability(spec, sched, n, obs, model, cfg.n_traj,
                                     derive_seed(cfg.seed, *keys, 1), lattice, cfg.n_workers)
    return L_id, L_A


def noise_scaling(cfg, lattice, out):
    obs = cfg.observable_for(lattice)
    _require_unitary(obs, "noise_scaling")
    model = NoiseModel(**cfg.noise)
    N = lattice.n_sites
    rows = []
    for si, spec in enumerate(cfg.product_states()):
        for ti, tau in enumerate(cfg.taus):
            sched = trotter_schedule(lattice, cfg.J, tau=tau)
            for n in cfg.params["steps"]:
                D = 2 * sched.layers_per_step * n
                L_id, L_A = _survival_pair(cfg, lattice, spec, sched, n, obs, model, (si, ti, n))
                rows.append({"state": si, "tau": tau, "n_steps": n, "t": n * tau, "N": N, "D": D, "ND": N * D,
                             "L_id": L_id.mean, "L_id_err": L_id.stderr, "L_A": L_A.mean,
                             "L_A_err": L_A.stderr, "prediction": (1 - model.p) ** (N * D)})
    cols = ["state", "tau", "n_steps", "t", "N", "D", "ND", "L_id", "L_id_err", "L_A", "L_A_err", "prediction"]
    write_csv(out / "scaling.csv", cols, rows)
    return ["scaling.csv"]


def mitigation_run(cfg, lattice, out):
    obs = cfg.observable_for(lattice)
    _require_unitary(obs, "mitigation_run")
    model = NoiseModel(**cfg.noise)
    rec_rows, avg_rows = [], []
    for si, spec in enumerate(cfg.product_states()):
        for ti, tau in enumerate(cfg.taus):
            sched = trotter_schedule(lattice, cfg.J, tau=tau)
            recs = []
            for n in cfg.params["steps"]:
                D = 2 * sched.layers_per_step * n
                L_id, L_A = _survival_pair(cfg, lattice, spec, sched, n, obs, model, (si, ti, n))
                ref = survival_probability(spec, sched, n, obs, lattice)
                rec = MitigationRecord.from_ensembles(n * tau, D, L_A, L_id, ref)
                recs.append(rec)
                rec_rows.append({"state": si, "tau": tau, **rec.row()})
            if cfg.params["time_average"]:
                mean = float(np.mean([r.rescaled for r in recs]))
                err = float(math.sqrt(sum(r.rescaled_err**2 for r in recs)) / len(recs))
                ref = float(np.mean([r.L_A_noiseless for r in recs]))
                avg_rows.append({"state": si, "tau": tau, **_state_cols(spec, lattice, cfg.J),
                                 "t": max(cfg.params["steps"]) * tau, "rescaled_avg": mean,
                                 "rescaled_avg_err": err, "noiseless_avg": ref,
                                 "within_error": abs(mean - ref) <= err})
    write_csv(out / "records.csv", ["state", "tau"] + RECORD_COLUMNS, rec_rows)
    files = ["records.csv"]
    if cfg.params["time_average"]:
        cols = ["state", "tau", "theta", "phi", "energy", "t", "rescaled_avg", "rescaled_avg_err",
                "noiseless_avg", "within_error"]
        write_csv(out / "pevp.csv", cols, avg_rows)
        files.append("pevp.csv")
    return files


def magnus_compare(cfg, lattice, out):
    p = cfg.params
    H = xy_hamiltonian(lattice, cfg.J)
    obs = cfg.observable_for(lattice)
    A = mean_squared_inplane_magnetization if obs is None else obs
    rows = []
    for tau in cfg.taus:
        for order in p["orders"]:
            spectra = _with_ed_hint(cfg, magnus_sector_spectra, H, tau, order, max_dim=_ed_cap(cfg))
            for si, spec in enumerate(cfg.product_states()):
                dev = floquet_vs_magnus_deviation(spec, A, H, order, p["t_max"], tau, spectra=spectra)
                for t, f, m in zip(dev.times, dev.floquet, dev.magnus):
                    rows.append({"state": si, "tau": tau, "order": order, "t": t, "floquet": f,
                                 "magnus": m, "deviation": abs(f - m)})
    write_csv(out / "magnus.csv", ["state", "tau", "order", "t", "floquet", "magnus", "deviation"], rows)
    return ["magnus.csv"]


def sample_budget_table(cfg, lattice, out):
    rows = [sample_budget(**r).row() for r in cfg.params["rows"]]
    write_csv(out / "budget.csv", ["N", "D", "p", "p_m", "eps_stat", "shots"], rows, units="dimensionless")
    return ["budget.csv"]


RUNNERS = {
    "prethermal_scan": prethermal_scan,
    "ensemble_compare": ensemble_compare,
    "noise_scaling": noise_scaling,
    "mitigation_run": mitigation_run,
    "magnus_compare": magnus_compare,
    "sample_budget": sample_budget_table,
}


def run_scenario(cfg: ExperimentConfig, output: str | None = None) -> list[Path]:
    """Run the configured scenario; returns the written file paths."""
    out = Path(output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    lattice = None
    if cfg.scenario != "sample_budget":
        lattice = build_lattice(cfg.lattice["rows"], cfg.lattice["cols"])
    files = RUNNERS[cfg.scenario](cfg, lattice, out)
    # worker count does not change results, so it is left out of the hash
    content = {k: v for k, v in cfg.to_dict().items() if k not in ("n_workers", "output")}
    meta = {"scenario": cfg.scenario, "seed": cfg.seed, "config_hash": config_hash(content),
            "config": content, "version": __version__, "files": files,
            "units": {"time": "1/J", "energy": "J"}}
    write_json(out / "metadata.json", meta)
    return [out / f for f in files] + [out / "metadata.json"]


__all__ = ["run_scenario", "RUNNERS", "ResourceLimitError"]
