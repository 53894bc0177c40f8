import numpy as np
import pytest
from hypothesis import given, strategies as st

from prethermal.exceptions import ResourceLimitError
from prethermal.lattice import (Lattice, PauliObservable, ProductStateSpec, SpinHamiltonian,
                                build_lattice, hamiltonian_matrix, inplane_magnetization_matrix,
                                inplane_magnetization_norm, mean_squared_inplane_magnetization,
                                observable_expectation, pauli_matrix, product_state,
                                product_state_energy, total_mz, xy_hamiltonian)

from oracles import inplane_sq_dense, pauli_string, total_sz_dense, xy_dense

dims = st.tuples(st.integers(1, 4), st.integers(1, 4)).filter(lambda rc: rc[0] * rc[1] >= 2)


def test_4x4_counts():
    lat = build_lattice(4, 4)
    assert lat.n_sites == 16
    assert len(lat.bonds) == 24
    assert sorted(len(g) for g in lat.bond_groups) == [6, 6, 6, 6]


def test_1x2_single_bond():
    lat = build_lattice(1, 2)
    assert lat.n_sites == 2 and len(lat.bonds) == 1
    assert lat.n_groups == 2
    assert sum(1 for g in lat.bond_groups if g) == 1


def test_4x3_bond_count():
    lat = build_lattice(4, 3)
    assert lat.n_sites == 12 and len(lat.bonds) == 17


def test_bad_dimensions():
    with pytest.raises(ValueError):
        build_lattice(1, 1)
    with pytest.raises(ValueError):
        build_lattice(0, 3)
    with pytest.raises(ResourceLimitError):
        build_lattice(6, 5)
    with pytest.raises(ResourceLimitError):
        build_lattice(4, 4, max_qubits=12)


@given(dims)
def test_lattice_invariants(rc):
    rows, cols = rc
    lat = build_lattice(rows, cols)
    assert len(lat.bonds) == rows * (cols - 1) + cols * (rows - 1)
    flat = [b for g in lat.bond_groups for b in g]
    assert sorted(flat) == sorted(lat.bonds) and len(set(flat)) == len(flat)
    for g in lat.bond_groups:
        sites = [s for b in g for s in b]
        assert len(sites) == len(set(sites))
    for i, j in lat.bonds:
        assert i < j
        (ri, ci), (rj, cj) = lat.coords(i), lat.coords(j)
        assert abs(ri - rj) + abs(ci - cj) == 1
    if rows >= 2 and cols >= 2:
        assert lat.n_groups == 4 and all(lat.bond_groups)
    else:
        assert lat.n_groups == 2


def test_group_order_fixed():
    lat = build_lattice(2, 3)
    h_even, h_odd, v_even, v_odd = lat.bond_groups
    assert all(lat.coords(a)[0] == lat.coords(b)[0] for a, b in h_even + h_odd)
    assert all(lat.coords(a)[1] == lat.coords(b)[1] for a, b in v_even + v_odd)
    assert all(sum(lat.coords(a)) % 2 == 0 for a, _ in h_even + v_even)
    assert all(sum(lat.coords(a)) % 2 == 1 for a, _ in h_odd + v_odd)


def test_lattice_json_roundtrip():
    lat = build_lattice(3, 4)
    assert Lattice.from_dict(lat.to_dict()) == lat
    H = xy_hamiltonian(lat, 0.7)
    assert SpinHamiltonian.from_dict(H.to_dict()) == H


def test_xy_rejects_zero_coupling():
    with pytest.raises(ValueError):
        xy_hamiltonian(build_lattice(2, 2), 0.0)


def test_hamiltonian_matrix_matches_dense_oracle():
    lat = build_lattice(2, 3)
    H = xy_hamiltonian(lat, 1.3)
    dense = xy_dense(lat.bonds, 6, 1.3)
    assert np.abs(hamiltonian_matrix(H).toarray() - dense).max() < 1e-14
    assert np.abs(dense @ total_sz_dense(6) - total_sz_dense(6) @ dense).max() < 1e-13


def test_energy_examples():
    lat = build_lattice(4, 4)
    assert product_state_energy(ProductStateSpec(np.pi / 2, 0.0), lat) == pytest.approx(-6.0, abs=1e-12)
    lat2 = build_lattice(1, 2)
    H2 = hamiltonian_matrix(xy_hamiltonian(lat2))
    up_down = np.zeros(4, dtype=complex)
    up_down[0b10] = 1.0
    assert np.vdot(up_down, H2 @ up_down).real == 0.0
    zplus = np.zeros(16, dtype=complex)
    zplus[0] = 1.0
    assert abs(np.vdot(zplus, hamiltonian_matrix(xy_hamiltonian(build_lattice(2, 2))) @ zplus)) == 0.0
    # theta = pi/2, phi = pi on two sites: +J/4 per bond
    assert product_state_energy(ProductStateSpec(np.pi / 2, np.pi), lat2) == pytest.approx(0.25, abs=1e-12)


def test_x_plus_state():
    lat = build_lattice(2, 2)
    psi = product_state(ProductStateSpec(np.pi / 2, 0.0), lat)
    assert np.allclose(psi, np.full(16, 0.25))


def test_theta_zero_is_staggered():
    lat = build_lattice(2, 2)
    psi = product_state(ProductStateSpec(0.0, 0.0), lat)
    # sites 0 and 3 (even r + c) up, sites 1 and 2 down
    idx = int(np.argmax(np.abs(psi)))
    assert abs(psi[idx]) == pytest.approx(1.0)
    assert idx == 0b0110
    assert total_mz(psi) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0, np.pi), st.floats(0, 2 * np.pi), dims)
def test_product_state_properties(theta, phi, rc):
    lat = build_lattice(*rc)
    spec = ProductStateSpec(theta, phi)
    psi = product_state(spec, lat)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    # Sigma sigma^z vanishes whenever the two sublattices have equal size
    n_a = sum(lat.in_sublattice_a(i) for i in range(lat.n_sites))
    expect_mz = (2 * n_a - lat.n_sites) * np.cos(theta)
    assert abs(total_mz(psi) - expect_mz) < 1e-10
    if lat.n_sites % 2 == 0:
        assert abs(total_mz(psi)) < 1e-12
    H = hamiltonian_matrix(xy_hamiltonian(lat))
    assert abs(np.vdot(psi, H @ psi).real - product_state_energy(spec, lat)) < 1e-10


def test_inplane_magnetization_examples():
    lat = build_lattice(4, 4)
    psi = product_state(ProductStateSpec(np.pi / 2, 0.0), lat)
    assert mean_squared_inplane_magnetization(psi) == pytest.approx(1.0625, abs=1e-12)
    zplus = np.zeros(1 << 16, dtype=complex)
    zplus[0] = 1
    # sigma^x and sigma^y each contribute only their diagonal 1/N
    assert mean_squared_inplane_magnetization(zplus) == pytest.approx(2 / 16, abs=1e-12)
    # infinite temperature: normalized trace
    m = inplane_magnetization_matrix(8)
    assert m.diagonal().sum() / 2**8 == pytest.approx(2 / 8, abs=1e-12)
    assert inplane_magnetization_norm(16) == pytest.approx(1.125)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_inplane_norm_is_largest_eigenvalue(n):
    assert np.linalg.eigvalsh(inplane_sq_dense(n)).max() == pytest.approx(inplane_magnetization_norm(n), abs=1e-12)


def test_inplane_magnetization_against_dense():
    n = 5
    rng = np.random.default_rng(3)
    dense = inplane_sq_dense(n)
    assert np.abs(inplane_magnetization_matrix(n).toarray() - dense).max() < 1e-14
    for _ in range(5):
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        psi /= np.linalg.norm(psi)
        assert mean_squared_inplane_magnetization(psi) == pytest.approx(np.vdot(psi, dense @ psi).real, abs=1e-12)


def test_observable_expectation_examples():
    lat = build_lattice(2, 2)
    xp = product_state(ProductStateSpec(np.pi / 2, 0.0), lat)
    zp = np.zeros(16, dtype=complex)
    zp[0] = 1
    xx = PauliObservable((0, 1), "XX")
    zz = PauliObservable((0, 1), "ZZ")
    assert observable_expectation(xp, xx) == pytest.approx(1.0)
    assert observable_expectation(zp, xx) == pytest.approx(0.0)
    assert observable_expectation(zp, zz) == pytest.approx(1.0)


@given(st.lists(st.sampled_from("XYZ"), min_size=1, max_size=3), st.integers(0, 2**31))
def test_pauli_apply_matches_kron(paulis, seed):
    n = 4
    rng = np.random.default_rng(seed)
    support = tuple(rng.permutation(n)[: len(paulis)])
    obs = PauliObservable(support, "".join(paulis))
    dense = pauli_string(support, obs.paulis, n)
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    assert np.allclose(obs.apply(psi), dense @ psi, atol=1e-14)
    assert np.allclose(pauli_matrix(obs, n).toarray(), dense, atol=1e-14)
    assert obs.is_unitary
    assert np.allclose(dense @ dense, np.eye(16))


def test_pauli_observable_validation():
    with pytest.raises(ValueError):
        PauliObservable((0, 0), "XX")
    with pytest.raises(ValueError):
        PauliObservable((0,), "XX")
    with pytest.raises(ValueError):
        PauliObservable((0,), "A")
    assert not PauliObservable((0,), "X", 2.0).is_unitary


def test_center_bond():
    lat = build_lattice(4, 4)
    i, j = lat.center_bond()
    assert (lat.coords(i), lat.coords(j)) == ((1, 1), (1, 2))
