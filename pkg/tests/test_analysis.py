import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prethermal.analysis import (TimeAverageSeries, detect_plateau, detect_plateaus, fit_heating_model,
                                 floquet_time_average, heating_model_energy, observable_norm,
                                 plateau_diagnostic, solve_pevp, write_plateau_csv, write_series_csv)
from prethermal.io import read_csv
from prethermal.lattice import (PauliObservable, ProductStateSpec, build_lattice, inplane_magnetization_matrix,
                                mean_squared_inplane_magnetization, product_state, xy_hamiltonian)
from prethermal.statevector import evolve, trotter_schedule, trotter_unitary

from oracles import brute_force_plateaus


def windows(reports):
    return sorted((r.m1, r.m2) for r in reports if r.found)


def test_series_basics():
    s = TimeAverageSeries(0.5, [1.0, 3.0, 2.0])
    assert np.allclose(s.running, [1.0, 2.0, 2.0])
    assert np.allclose(s.times, [0, 0.5, 1.0])
    assert s.value_at(0.7) == 2.0 and s.value_at(1.0) == 2.0
    with pytest.raises(ValueError):
        s.value_at(1.6)


def test_m_max_zero_and_running_average_oracle():
    lat = build_lattice(2, 3)
    sched = trotter_schedule(lat, omega=5.0)
    spec = ProductStateSpec(1.0, 0.5)
    psi = product_state(spec, lat)
    s0 = floquet_time_average(spec, None, sched, 0, lat)
    assert s0.instantaneous.size == 1
    assert s0.running[0] == pytest.approx(mean_squared_inplane_magnetization(psi))
    s = floquet_time_average(psi, None, sched, 30)
    direct = [mean_squared_inplane_magnetization(evolve(psi, sched, m)) for m in range(31)]
    assert np.abs(s.instantaneous - direct).max() < 1e-12
    recomputed = [np.mean(direct[: m + 1]) for m in range(31)]
    assert np.abs(s.running - recomputed).max() < 1e-12
    # matrix and Pauli forms of A give the same series
    m = floquet_time_average(psi, inplane_magnetization_matrix(6), sched, 30)
    assert np.abs(m.instantaneous - s.instantaneous).max() < 1e-12
    with pytest.raises(ValueError):
        floquet_time_average(psi, None, sched, -1)


def test_floquet_eigenstate_gives_constant_series():
    lat = build_lattice(2, 2)
    sched = trotter_schedule(lat, omega=6.0)
    _, V = np.linalg.eig(trotter_unitary(sched))
    psi = V[:, 3] / np.linalg.norm(V[:, 3])
    s = floquet_time_average(psi, PauliObservable((0, 1), "XX"), sched, 40)
    assert np.ptp(s.instantaneous) < 1e-10


def test_constant_series_plateau():
    s = TimeAverageSeries(0.5, np.full(2001, 0.3))
    rep = detect_plateau(s, 0.05)
    assert rep.found and rep.truncated_at_cap
    assert rep.t1 == pytest.approx(0.5) and rep.t2 == pytest.approx(1000.0)
    assert rep.value == pytest.approx(0.3)


def test_no_plateau():
    # running average jumps by more than eps every step
    inst = np.array([(-1.0) ** k * 10.0 * (k + 1) for k in range(40)])
    s = TimeAverageSeries(1.0, inst)
    rep = detect_plateau(s, 0.01, t_cap=40)
    assert not rep.found and np.isnan(rep.ratio)


def test_ramp_matches_brute_force():
    M = 200
    running = np.linspace(1.0, 0.0, M)
    s = TimeAverageSeries(1.0, np.zeros(M))
    s.running = running
    reps = detect_plateaus(s, 0.05, 1.0, t_cap=M)
    assert windows(reps) == brute_force_plateaus(running, 0.05, M)
    best = detect_plateau(s, 0.05, 1.0, t_cap=M)
    assert best.m1 == 1  # earliest window has the largest ratio on a linear ramp


@settings(max_examples=60)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=60), st.floats(0.01, 0.6), st.integers(0, 2**31))
def test_plateaus_match_brute_force(vals, eps, seed):
    rng = np.random.default_rng(seed)
    inst = np.cumsum(np.asarray(vals) * rng.uniform(0, 1))
    s = TimeAverageSeries(0.25, inst)
    M = len(vals)
    reps = detect_plateaus(s, eps, 1.0, t_cap=M * 0.25)
    assert windows(reps) == brute_force_plateaus(s.running, eps, M)
    for r in reps:
        if r.found:
            seg = s.running[r.m1:r.m2]
            assert seg.max() - seg.min() <= eps
            assert r.spread == pytest.approx(seg.max() - seg.min())
            assert r.truncated_at_cap == (r.m2 == M)
    ratios = [r.ratio for r in reps if r.found]
    assert ratios == sorted(ratios, reverse=True)


def test_series_too_short():
    s = TimeAverageSeries(1.0, np.zeros(10))
    with pytest.raises(ValueError):
        detect_plateau(s, 0.05, t_cap=20)
    with pytest.raises(ValueError):
        detect_plateau(s, 0.0, t_cap=5)


def test_solve_pevp_constant_and_errors():
    lat = build_lattice(2, 2)
    sched = trotter_schedule(lat, omega=8.0)
    zp = np.zeros(16, dtype=complex)
    zp[0] = 1
    # |Z+> is stationary, so <ZZ> is constant 1
    assert solve_pevp(zp, PauliObservable((0, 1), "ZZ"), sched, 0.05, t_cap=50.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        observable_norm(np.eye(2), 1)


def test_observable_norms():
    assert observable_norm(None, 16) == pytest.approx(1.125)
    assert observable_norm(PauliObservable((0, 1), "XX"), 16) == 1.0
    assert observable_norm(PauliObservable((0, 1), "XX", -2.0), 16) == 2.0


def test_plateau_diagnostic_structure():
    lat = build_lattice(2, 3)
    out = plateau_diagnostic(ProductStateSpec(np.pi / 2, 0), None, lat, [0.5, 0.8], 0.05, t_cap=40.0,
                             reference=2 / 6)
    assert len(out["rows"]) == 2
    for row in out["rows"]:
        assert {"tau", "omega", "found", "t1", "t2", "ratio", "value", "separation"} <= set(row)


def test_csv_exports(tmp_path):
    s = TimeAverageSeries(0.5, [1.0, 0.5, 0.75])
    write_series_csv(tmp_path / "s.csv", s)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# units: time in 1/J, energy in J"
    assert lines[1] == "tau,t,instantaneous,running_average"
    rows = read_csv(tmp_path / "s.csv")
    assert float(rows[1]["running_average"]) == 0.75
    rep = detect_plateau(TimeAverageSeries(1.0, np.ones(10)), 0.05, t_cap=10)
    write_plateau_csv(tmp_path / "p.csv", [rep])
    rows = read_csv(tmp_path / "p.csv")
    assert list(rows[0]) == ["t1", "t2", "value", "epsilon", "truncated"]
    assert (rows[0]["t1"], rows[0]["t2"], rows[0]["truncated"]) == ("1", "10", "true")


def test_heating_model_examples():
    D = np.arange(0, 500, 10)
    assert np.all(heating_model_energy(0.0, 1.0, 1.0, 12, 0.003, D) == 0)
    E = heating_model_energy(-6.0, 1.5, 0.8, 12, 0.003, D)
    assert E[0] == pytest.approx(-6.0)
    assert np.all(np.diff(E) > 0) and E[-1] < 0
    assert abs(heating_model_energy(-6.0, 1.5, 0.8, 12, 0.003, 1e7)) < 1e-8
    # linear regime: |g E0 / (N sigma^2)| < 0.05
    g, sigma, N, E0, p = 0.5, 2.0, 16, -1.5, 0.01
    assert abs(g * E0 / (N * sigma**2)) < 0.05
    lin = E0 * np.exp(-p * g**2 * D / sigma**2)
    assert np.allclose(heating_model_energy(E0, g, sigma, N, p, D), lin, rtol=1e-2)
    with pytest.raises(ValueError):
        heating_model_energy(1.0, 0.0, 1.0, 4, 0.1, 1)
    with pytest.raises(ValueError):
        heating_model_energy(1.0, 1.0, 1.0, 4, 0.0, 1)


def test_fit_heating_model_recovers_parameters():
    D = np.arange(0, 400, 8)
    g, sigma = 1.3, 0.9
    E = heating_model_energy(-5.0, g, sigma, 12, 0.003, D)
    E = E + np.random.default_rng(0).normal(scale=1e-4, size=E.size)
    g_fit, s_fit = fit_heating_model(D, E, -5.0, 12, 0.003, guess=(1.0, 1.0))
    assert g_fit == pytest.approx(g, rel=0.05) and s_fit == pytest.approx(sigma, rel=0.05)


def test_fit_on_noisy_energy_trace_decays_toward_zero():
    from prethermal.lattice import hamiltonian_matrix
    from prethermal.noise import NoiseModel, noisy_forward_trajectories

    lat = build_lattice(4, 3)
    Hm = hamiltonian_matrix(xy_hamiltonian(lat))
    sched = trotter_schedule(lat, omega=8.0)
    spec = ProductStateSpec(np.pi / 2, 0.0)
    p = 0.01
    trace = noisy_forward_trajectories(spec, sched, 15, NoiseModel("depolarizing", p), 60, 3,
                                       lambda s: np.vdot(s, Hm @ s).real, lat).mean(axis=0)
    D = np.arange(trace.size)
    g, sigma = fit_heating_model(D, trace, trace[0], 12, p)
    model = heating_model_energy(trace[0], g, sigma, 12, p, D)
    assert g > 0 and sigma > 0
    assert np.all(np.diff(model) >= 0) and model[-1] < 0
