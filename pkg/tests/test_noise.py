import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prethermal.lattice import PauliObservable, ProductStateSpec, build_lattice, product_state
from prethermal.noise import (KINDS, NoiseModel, TrajectoryEnsemble, apply_noise_layer,
                              exact_noisy_forward, exact_noisy_survival, noisy_forward_trajectories,
                              noisy_survival_probability, sample_shots, trajectory_density_matrix,
                              trajectory_rng)
from prethermal.statevector import survival_probability, trotter_schedule

from oracles import noisy_echo_dense, noisy_forward_dense, pauli_string, trace_distance

XP = ProductStateSpec(np.pi / 2, 0.0)


def test_model_validation():
    with pytest.raises(ValueError):
        NoiseModel("bitflip")
    with pytest.raises(ValueError):
        NoiseModel(p=-0.1)
    with pytest.raises(ValueError):
        NoiseModel(p=1.0)
    with pytest.raises(ValueError):
        NoiseModel(p_m=1.0)
    with pytest.raises(ValueError):
        NoiseModel(backward_placement="middle")


@pytest.mark.parametrize("kind", KINDS)
def test_kraus_complete(kind):
    ks = NoiseModel(kind, 0.13).kraus()
    assert np.allclose(sum(k.conj().T @ k for k in ks), np.eye(2))


@pytest.mark.parametrize("kind", KINDS)
def test_p_zero_is_identity(kind):
    rng = np.random.default_rng(0)
    psi = rng.normal(size=32) + 1j * rng.normal(size=32)
    psi /= np.linalg.norm(psi)
    out = apply_noise_layer(psi.copy(), NoiseModel(kind, 0.0), trajectory_rng(1, 0))
    assert np.abs(out - psi).max() < 1e-15


def test_depolarizing_single_qubit_statistics():
    p = 0.1
    model = NoiseModel("depolarizing", p)
    n = 100_000
    z = np.empty(n)
    for k in range(n):
        s = np.array([1, 0], dtype=complex)
        apply_noise_layer(s, model, trajectory_rng(7, k))
        z[k] = abs(s[0]) ** 2 - abs(s[1]) ** 2
    assert abs(z.mean() - (1 - 4 * p / 3)) < 3 * z.std(ddof=1) / np.sqrt(n)


def test_amplitude_damping_jump_probability():
    p = 0.2
    model = NoiseModel("amplitude_damping", p)
    n = 40_000
    jumps = 0
    for k in range(n):
        s = np.array([0, 1], dtype=complex)
        apply_noise_layer(s, model, trajectory_rng(3, k))
        assert abs(np.linalg.norm(s) - 1) < 1e-12
        jumps += abs(s[0]) > 0.5
    assert abs(jumps / n - p) < 3 * np.sqrt(p * (1 - p) / n)


@given(st.sampled_from(KINDS), st.floats(0, 0.5), st.integers(0, 2**31))
def test_noise_layer_preserves_norm(kind, p, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=64) + 1j * rng.normal(size=64)
    psi /= np.linalg.norm(psi)
    out = apply_noise_layer(psi, NoiseModel(kind, p), trajectory_rng(seed, 0))
    assert abs(np.linalg.norm(out) - 1) < 1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_p_zero_matches_noiseless(kind):
    lat = build_lattice(2, 2)
    sched = trotter_schedule(lat, omega=8.0)
    obs = PauliObservable((0, 1), "XX")
    ens = noisy_survival_probability(XP, sched, 3, obs, NoiseModel(kind, 0.0), 20, 5, lat)
    assert abs(ens.mean - survival_probability(XP, sched, 3, obs, lat)) < 1e-10
    assert ens.stderr < 1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_exact_density_matrix_matches_dense_oracle(kind):
    lat = build_lattice(2, 2)
    sched = trotter_schedule(lat, omega=6.0)
    psi = product_state(ProductStateSpec(1.0, 0.7), lat)
    model = NoiseModel(kind, 0.05)
    rho = exact_noisy_forward(psi, sched, 2, model)
    ref = noisy_forward_dense(psi, lat.bond_groups, 4, sched.tau, 2, kind, 0.05)
    assert np.abs(rho - ref).max() < 1e-12
    obs = PauliObservable((1, 3), "XX")
    A = pauli_string(obs.support, obs.paulis, 4)
    L = exact_noisy_survival(psi, sched, 2, obs, model)
    assert abs(L - noisy_echo_dense(psi, lat.bond_groups, 4, sched.tau, 2, A, kind, 0.05)) < 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_trajectory_echo_matches_exact(kind):
    lat = build_lattice(2, 2)
    sched = trotter_schedule(lat, omega=8.0)
    obs = PauliObservable((0, 1), "XX")
    model = NoiseModel(kind, 0.02)
    exact = exact_noisy_survival(XP, sched, 2, obs, model, lat)
    ens = noisy_survival_probability(XP, sched, 2, obs, model, 10_000, 11, lat)
    assert abs(ens.mean - exact) < 3 * ens.stderr + 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_trajectory_density_matrix_converges(kind):
    lat = build_lattice(2, 3)
    sched = trotter_schedule(lat, omega=8.0)
    model = NoiseModel(kind, 0.05)
    n_traj = 2000
    rho_t = trajectory_density_matrix(XP, sched, 1, model, n_traj, 21, lat)
    rho = exact_noisy_forward(XP, sched, 1, model, lat)
    assert trace_distance(rho_t, rho) < 5 / np.sqrt(n_traj)


def test_cached_and_uncached_paths_agree():
    lat = build_lattice(2, 3)
    sched = trotter_schedule(lat, omega=8.0)
    obs = PauliObservable((0, 1), "XX")
    model = NoiseModel("depolarizing", 0.03)
    a = noisy_survival_probability(XP, sched, 3, obs, model, 200, 4, lat, use_cache=True)
    b = noisy_survival_probability(XP, sched, 3, obs, model, 200, 4, lat, use_cache=False)
    assert np.abs(a.outcomes - b.outcomes).max() < 1e-12


def test_determinism_across_workers():
    lat = build_lattice(2, 3)
    sched = trotter_schedule(lat, omega=8.0)
    obs = PauliObservable((2, 3), "ZZ")
    for kind in KINDS:
        model = NoiseModel(kind, 0.02)
        a = noisy_survival_probability(XP, sched, 2, obs, model, 300, 99, lat, n_workers=1)
        b = noisy_survival_probability(XP, sched, 2, obs, model, 300, 99, lat, n_workers=4)
        c = noisy_survival_probability(XP, sched, 2, obs, model, 300, 100, lat)
        assert np.array_equal(a.outcomes, b.outcomes)
        assert not np.array_equal(a.outcomes, c.outcomes)


def test_identity_survival_tracks_power_law():
    lat = build_lattice(2, 3)
    sched = trotter_schedule(lat, omega=8.0)
    p = 0.01
    model = NoiseModel("depolarizing", p)
    for n in (1, 3):
        ens = noisy_survival_probability(XP, sched, n, PauliObservable.identity(), model, 4000, n, lat)
        exact = exact_noisy_survival(XP, sched, n, PauliObservable.identity(), model, lat)
        assert abs(ens.mean - exact) < 3 * ens.stderr
        # surviving without any error is a lower bound
        assert exact >= (1 - p) ** (6 * 8 * n) - 1e-12


def test_forward_trajectory_observer_shape():
    lat = build_lattice(2, 2)
    sched = trotter_schedule(lat, omega=8.0)
    out = noisy_forward_trajectories(XP, sched, 2, NoiseModel("amplitude_damping", 0.05), 5, 0,
                                     lambda s: np.linalg.norm(s), lat)
    assert out.shape == (5, 9)
    assert np.abs(out - 1).max() < 1e-10


def test_ensemble_json_roundtrip():
    ens = TrajectoryEnsemble(3, 42, np.array([0.5, 0.25, 1.0]))
    d = json.loads(json.dumps(ens.to_dict(include_outcomes=True)))
    back = TrajectoryEnsemble.from_dict(d)
    assert np.array_equal(back.outcomes, ens.outcomes) and back.seed == 42
    summary = ens.to_dict()
    assert "outcomes" not in summary and summary["mean"] == pytest.approx(7 / 12)
    with pytest.raises(ValueError):
        TrajectoryEnsemble.from_dict(summary)


def test_sample_shots_examples():
    rng = np.random.default_rng(0)
    assert all(sample_shots(1.0, s, 0.0, 10, rng) == 1.0 for s in (1, 7, 1000))
    est = sample_shots(0.5, 10_000, 0.0, 4, rng)
    assert abs(est - 0.5) < 0.015
    assert 0.99**50 == pytest.approx(0.605, abs=5e-4)
    draws = [sample_shots(1.0, 20_000, 0.01, 50, rng) for _ in range(20)]
    assert abs(np.mean(draws) - 0.99**50) < 3 * np.sqrt(0.605 * 0.395 / 20_000 / 20)
    with pytest.raises(ValueError):
        sample_shots(0.5, 0, 0.0, 1, rng)


@settings(max_examples=20)
@given(st.floats(0, 1), st.integers(1, 500), st.integers(0, 2**31))
def test_sample_shots_range(prob, shots, seed):
    est = sample_shots(prob, shots, 0.02, 3, np.random.default_rng(seed))
    assert 0 <= est <= 1 and (est * shots) == pytest.approx(round(est * shots))
