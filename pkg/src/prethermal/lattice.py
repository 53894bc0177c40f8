"""Square-lattice XY model: geometry, Hamiltonian, product states, observables.

Conventions
-----------
* Sites are numbered row-major, ``i = r * cols + c``; site ``i`` is qubit ``i``
  and bit ``i`` of a basis index.
* ``|0>`` is spin up (sigma^z = +1).
* Sublattice A holds the sites with even ``r + c``.
* Bonds are colored into four groups by orientation and by the parity of
  ``r + c`` of their first site (a brick pattern). One Trotter step applies
  them in the fixed order H-even, H-odd, V-even, V-odd.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .exceptions import ResourceLimitError

QUBIT_CAP = 26
GROUP_NAMES = ("h_even", "h_odd", "v_even", "v_odd")


@dataclass(frozen=True)
class Lattice:
    rows: int
    cols: int
    bonds: tuple = field(repr=False)
    bond_groups: tuple = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    @property
    def n_groups(self) -> int:
        return len(self.bond_groups)

    def site(self, r: int, c: int) -> int:
        return r * self.cols + c

    def coords(self, i: int) -> tuple[int, int]:
        return divmod(i, self.cols)

    def in_sublattice_a(self, i: int) -> bool:
        r, c = self.coords(i)
        return (r + c) % 2 == 0

    def center_bond(self) -> tuple[int, int]:
        """Horizontal bond closest to the lattice center."""
        if self.cols < 2:
            r = (self.rows - 1) // 2
            return self.site(r, 0), self.site(r + 1, 0)
        r = (self.rows - 1) // 2
        c = (self.cols - 2) // 2
        return self.site(r, c), self.site(r, c + 1)

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "bonds": [list(b) for b in self.bonds],
            "bond_groups": [[list(b) for b in g] for g in self.bond_groups],
        }

    @classmethod
    def from_dict(cls, data: dict, max_qubits: int = QUBIT_CAP) -> "Lattice":
        lattice = build_lattice(data["rows"], data["cols"], max_qubits=max_qubits)
        if "bonds" in data and [list(b) for b in lattice.bonds] != data["bonds"]:
            raise ValueError("bond list does not match the lattice geometry")
        return lattice


def build_lattice(rows: int, cols: int, max_qubits: int = QUBIT_CAP) -> Lattice:
    """Open-boundary ``rows x cols`` square lattice with its bond coloring.

    Raises:
        ValueError: for non-positive dimensions or fewer than two sites.
        ResourceLimitError: if ``rows * cols`` exceeds ``max_qubits``.
    """
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError(f"need rows, cols >= 1 and at least 2 sites, got {rows}x{cols}")
    if rows * cols > max_qubits:
        raise ResourceLimitError(
            f"{rows}x{cols} lattice has {rows * cols} qubits, above the statevector cap "
            f"of {max_qubits}; use a smaller lattice or raise max_qubits"
        )

    groups = {name: [] for name in GROUP_NAMES}
    for r in range(rows):
        for c in range(cols - 1):
            parity = "even" if (r + c) % 2 == 0 else "odd"
            groups["h_" + parity].append((r * cols + c, r * cols + c + 1))
    for r in range(rows - 1):
        for c in range(cols):
            parity = "even" if (r + c) % 2 == 0 else "odd"
            groups["v_" + parity].append((r * cols + c, (r + 1) * cols + c))

    if rows == 1:
        names = ("h_even", "h_odd")
    elif cols == 1:
        names = ("v_even", "v_odd")
    else:
        names = GROUP_NAMES
    bond_groups = tuple(tuple(sorted(groups[n])) for n in names)
    bonds = tuple(sorted(b for g in bond_groups for b in g))
    return Lattice(rows, cols, bonds, bond_groups)


@dataclass(frozen=True)
class SpinHamiltonian:
    """H = -J sum_<ij> (S^x_i S^x_j + S^y_i S^y_j)."""

    lattice: Lattice
    J: float

    @property
    def terms(self) -> list[tuple[tuple[int, int], str, float]]:
        return [(b, "XX+YY", -self.J) for b in self.lattice.bonds]

    def to_dict(self) -> dict:
        return {"lattice": self.lattice.to_dict(), "J": self.J, "terms": "XX+YY"}

    @classmethod
    def from_dict(cls, data: dict) -> "SpinHamiltonian":
        return cls(Lattice.from_dict(data["lattice"]), float(data["J"]))


def xy_hamiltonian(lattice: Lattice, J: float = 1.0) -> SpinHamiltonian:
    if J == 0:
        raise ValueError("J must be nonzero")
    return SpinHamiltonian(lattice, float(J))


@dataclass(frozen=True)
class ProductStateSpec:
    """Sublattice A in |theta, 0>, sublattice B in |pi - theta, phi>."""

    theta: float
    phi: float = 0.0

    def site_vectors(self, lattice: Lattice) -> list[np.ndarray]:
        a = _bloch(self.theta, 0.0)
        b = _bloch(np.pi - self.theta, self.phi)
        return [a if lattice.in_sublattice_a(i) else b for i in range(lattice.n_sites)]

    def bloch_vectors(self, lattice: Lattice) -> np.ndarray:
        """(N, 3) array of single-site <sigma^x>, <sigma^y>, <sigma^z>."""
        out = np.empty((lattice.n_sites, 3))
        for i in range(lattice.n_sites):
            th, ph = (self.theta, 0.0) if lattice.in_sublattice_a(i) else (np.pi - self.theta, self.phi)
            out[i] = np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)
        return out


def _bloch(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.sin(theta / 2) * np.exp(1j * phi)])


def product_state(spec: ProductStateSpec, lattice: Lattice) -> np.ndarray:
    """Amplitude vector of the product state (qubit 0 is the least significant bit)."""
    psi = np.ones(1, dtype=complex)
    for v in spec.site_vectors(lattice):
        psi = np.kron(v, psi)
    return psi


def product_state_energy(spec: ProductStateSpec, lattice: Lattice, J: float = 1.0) -> float:
    """<H_XY> of a product state from single-site Bloch vectors."""
    s = spec.bloch_vectors(lattice)
    return float(sum(-J / 4 * (s[i, 0] * s[j, 0] + s[i, 1] * s[j, 1]) for i, j in lattice.bonds))


def n_qubits_of(state: np.ndarray) -> int:
    n = int(state.shape[0]).bit_length() - 1
    if 1 << n != state.shape[0]:
        raise ValueError(f"state length {state.shape[0]} is not a power of two")
    return n


@dataclass(frozen=True)
class PauliObservable:
    """prefactor * prod_k P_k on ``support``, with P_k in {X, Y, Z}.

    ``PauliObservable((i, j), "XX")`` is 4 S^x_i S^x_j.
    """

    support: tuple
    paulis: str
    prefactor: float = 1.0

    def __post_init__(self):
        if len(self.support) != len(self.paulis):
            raise ValueError("support and pauli string lengths differ")
        if len(set(self.support)) != len(self.support):
            raise ValueError("repeated site in support")
        if any(p not in "XYZ" for p in self.paulis):
            raise ValueError(f"pauli string must use X, Y, Z: {self.paulis!r}")
        object.__setattr__(self, "support", tuple(int(s) for s in self.support))

    @property
    def is_unitary(self) -> bool:
        return abs(abs(self.prefactor) - 1.0) < 1e-12

    @property
    def is_identity(self) -> bool:
        return len(self.support) == 0

    @classmethod
    def identity(cls) -> "PauliObservable":
        return cls((), "")

    def apply(self, state: np.ndarray) -> np.ndarray:
        """Return P|state> (prefactor included) as a new vector."""
        out = np.array(state, dtype=complex, copy=True)
        for site, p in zip(self.support, self.paulis):
            _kernels.apply_pauli(out, site, "XYZ".index(p) + 1)
        if self.prefactor != 1.0:
            out *= self.prefactor
        return out

    def to_dict(self) -> dict:
        return {"support": list(self.support), "paulis": self.paulis, "prefactor": self.prefactor}


def observable_expectation(state: np.ndarray, obs: PauliObservable) -> float:
    return float(np.vdot(state, obs.apply(state)).real)


def mean_squared_inplane_magnetization(state: np.ndarray) -> float:
    """m_x^2 + m_y^2 = 4 [<(sum S^x)^2> + <(sum S^y)^2>] / N^2."""
    n = n_qubits_of(state)
    sx, sy = _kernels.inplane_moments(np.ascontiguousarray(state, dtype=complex), n)
    return float((sx + sy) / n**2)


def inplane_magnetization_norm(n_sites: int) -> float:
    """Operator norm of m_x^2 + m_y^2.

    The largest eigenvalue sits in the total-spin S = N/2 multiplet at the
    smallest |S^z|: 4 (S(S+1) - S_z^2) / N^2.
    """
    sz_min = 0.5 * (n_sites % 2)
    s = n_sites / 2
    return 4 * (s * (s + 1) - sz_min**2) / n_sites**2


def total_mz(state: np.ndarray) -> float:
    """<sum_i sigma^z_i>."""
    n = n_qubits_of(state)
    weights = np.abs(state) ** 2
    pop = np.bitwise_count(np.arange(state.shape[0], dtype=np.uint64)).astype(float)
    return float(weights @ (n - 2 * pop))


# --- sparse matrices (exact-diagonalization scale) ---------------------------


def flip_flop_matrix(n_qubits: int, pairs, coef: float, basis: np.ndarray | None = None) -> sp.csr_matrix:
    """coef * sum_{(i,j)} (|01><10| + |10><01|)_{ij}, optionally restricted to ``basis``.

    ``basis`` is a sorted array of basis indices closed under the flip-flops
    (an m_z sector); rows/columns follow its order.
    """
    if basis is None:
        basis = np.arange(1 << n_qubits, dtype=np.int64)
    basis = np.asarray(basis, dtype=np.int64)
    rows, cols = [], []
    for i, j in pairs:
        mask = (1 << i) | (1 << j)
        bi = (basis >> i) & 1
        bj = (basis >> j) & 1
        sel = np.nonzero(bi != bj)[0]
        target = np.searchsorted(basis, basis[sel] ^ mask)
        rows.append(target)
        cols.append(sel)
    dim = basis.shape[0]
    if not rows:
        return sp.csr_matrix((dim, dim))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    data = np.full(r.shape[0], coef, dtype=float)
    return sp.csr_matrix((data, (r, c)), shape=(dim, dim))


def hamiltonian_matrix(H: SpinHamiltonian, basis: np.ndarray | None = None) -> sp.csr_matrix:
    # -J (SxSx + SySy) has matrix element -J/2 between |01> and |10>
    return flip_flop_matrix(H.lattice.n_sites, H.lattice.bonds, -H.J / 2, basis)


def bond_group_matrices(H: SpinHamiltonian, basis: np.ndarray | None = None) -> list[sp.csr_matrix]:
    """H_j for each bond group, in Trotter order."""
    return [flip_flop_matrix(H.lattice.n_sites, g, -H.J / 2, basis) for g in H.lattice.bond_groups]


def inplane_magnetization_matrix(n_sites: int, basis: np.ndarray | None = None) -> sp.csr_matrix:
    pairs = [(i, j) for i in range(n_sites) for j in range(i + 1, n_sites)]
    off = flip_flop_matrix(n_sites, pairs, 4.0 / n_sites**2, basis)
    return (off + (2.0 / n_sites) * sp.identity(off.shape[0], format="csr")).tocsr()


def pauli_matrix(obs: PauliObservable, n_qubits: int) -> sp.csr_matrix:
    single = {
        "I": sp.identity(2, format="csr"),
        "X": sp.csr_matrix([[0, 1], [1, 0]], dtype=complex),
        "Y": sp.csr_matrix([[0, -1j], [1j, 0]], dtype=complex),
        "Z": sp.csr_matrix([[1, 0], [0, -1]], dtype=complex),
    }
    label = ["I"] * n_qubits
    for site, p in zip(obs.support, obs.paulis):
        label[site] = p
    out = sp.identity(1, format="csr", dtype=complex)
    for p in label:  # qubit 0 ends up least significant
        out = sp.kron(single[p], out, format="csr")
    return (obs.prefactor * out).tocsr()
