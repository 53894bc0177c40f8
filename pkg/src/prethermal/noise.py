"""Monte Carlo wavefunction simulation of the noisy echo circuit.

Noise is a single-qubit channel applied to every qubit after each forward
layer and before each backward layer; state preparation and the observable
gate are noiseless. A survival circuit of ``n`` Trotter steps therefore has
``D = 8 n`` noise slots.

Each trajectory ``k`` draws from its own Philox stream keyed by
``(seed, k)``, so results do not depend on how trajectories are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .lattice import Lattice, PauliObservable, n_qubits_of
from .statevector import TrotterSchedule, apply_layer, evolve, prepare_state

KINDS = ("depolarizing", "phase_damping", "amplitude_damping")
DEFAULT_N_TRAJ = 2000
# prefix/suffix caching is skipped above this many bytes of cached states
CACHE_BYTES = 1 << 30


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "depolarizing"
    p: float = 0.003
    p_m: float = 0.0
    # "before": backward noise precedes each inverse layer (mirror of the forward
    # circuit); "after": noise follows every layer in both halves
    backward_placement: str = "before"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if not 0 <= self.p < 1:
            raise ValueError(f"p must be in [0, 1), got {self.p}")
        if not 0 <= self.p_m < 1:
            raise ValueError(f"p_m must be in [0, 1), got {self.p_m}")
        if self.backward_placement not in ("before", "after"):
            raise ValueError("backward_placement must be 'before' or 'after'")

    @property
    def unitary_kraus(self) -> bool:
        return self.kind != "amplitude_damping"

    def kraus(self) -> list[np.ndarray]:
        p = self.p
        if self.kind == "depolarizing":
            return [np.sqrt(1 - p) * _PAULI[0]] + [np.sqrt(p / 3) * _PAULI[k] for k in (1, 2, 3)]
        if self.kind == "phase_damping":
            return [np.sqrt(1 - p) * _PAULI[0], np.sqrt(p) * _PAULI[3]]
        return [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex),
                np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p, "p_m": self.p_m,
                "backward_placement": self.backward_placement}


_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


@dataclass
class TrajectoryEnsemble:
    n_traj: int
    seed: int
    outcomes: np.ndarray = field(repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.outcomes))

    @property
    def stderr(self) -> float:
        if self.n_traj < 2:
            return 0.0
        return float(np.std(self.outcomes, ddof=1) / math.sqrt(self.n_traj))

    def to_dict(self, include_outcomes: bool = False) -> dict:
        out = {"n_traj": self.n_traj, "seed": self.seed, "mean": self.mean, "stderr": self.stderr}
        if include_outcomes:
            out["outcomes"] = [float(x) for x in self.outcomes]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrajectoryEnsemble":
        if "outcomes" not in data:
            raise ValueError("outcomes were elided; cannot rebuild the ensemble")
        return cls(int(data["n_traj"]), int(data["seed"]), np.asarray(data["outcomes"], dtype=float))


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


# --- single noise layer --------------------------------------------------------


def _pauli_kinds(u: np.ndarray, model: NoiseModel) -> np.ndarray:
    """Map uniforms to error Paulis (0 = none, 1/2/3 = X/Y/Z)."""
    hit = u < model.p
    kinds = np.zeros(u.shape, dtype=np.int64)
    if model.kind == "depolarizing":
        kinds[hit] = 1 + np.minimum((3 * u[hit] / model.p).astype(np.int64), 2)
    else:
        kinds[hit] = 3
    return kinds


class _DampingTables:
    def __init__(self, n_qubits: int, p: float):
        self.n = n_qubits
        self.p = p
        self.keep = 1.0 - p
        self.popcount = np.bitwise_count(np.arange(1 << n_qubits, dtype=np.uint64)).astype(np.int64)
        self.keep_pow = self.keep ** np.arange(n_qubits + 1)
        self.sqrt_keep_pow = np.sqrt(self.keep_pow)


def _amplitude_damping_layer(state: np.ndarray, tables: _DampingTables, rng: np.random.Generator) -> None:
    """One stochastic step of M0/M1 on every qubit, renormalized."""
    n, p, keep = tables.n, tables.p, tables.keep
    if p == 0.0:
        return
    u = rng.random()
    z_all = _kernels.no_jump_weight(state, tables.popcount, tables.keep_pow)
    if u >= 1.0 - z_all:
        _kernels.apply_no_jump_all(state, tables.popcount, tables.sqrt_keep_pow / math.sqrt(z_all))
        return
    # at least one decay: first decaying qubit is the smallest q with u < 1 - Z_q
    z = _kernels.prefix_no_jump_weights(state, n, keep)
    first = int(np.argmax(u < 1.0 - z))
    sqrt_keep, sqrt_p = math.sqrt(keep), math.sqrt(p)
    for q in range(first):
        _kernels.apply_damping_kraus(state, q, False, sqrt_keep, sqrt_p)
    _kernels.apply_damping_kraus(state, first, True, sqrt_keep, sqrt_p)
    state /= np.linalg.norm(state)
    for q in range(first + 1, n):
        jump = rng.random() < p * _kernels.excited_population(state, q)
        _kernels.apply_damping_kraus(state, q, jump, sqrt_keep, sqrt_p)
        state /= np.linalg.norm(state)


def apply_noise_layer(state: np.ndarray, model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Apply one unraveling step of ``model`` to every qubit, in place.

    Depolarizing: random X/Y/Z with probability p. Phase damping: Z with
    probability p. Amplitude damping: decay of qubit q with probability
    p <n_q>, otherwise the no-jump Kraus operator; renormalized either way.
    """
    n = n_qubits_of(state)
    if model.unitary_kraus:
        kinds = _pauli_kinds(rng.random(n), model)
        for q in np.nonzero(kinds)[0]:
            _kernels.apply_pauli(state, int(q), int(kinds[q]))
    else:
        _amplitude_damping_layer(state, _DampingTables(n, model.p), rng)
    return state


# --- echo circuit --------------------------------------------------------------


class _EchoCircuit:
    """Blocks B_0..B_D interleaved with noise slots 0..D-1.

    Forward slot s follows layer s; backward slots precede inverse layers
    (or follow them with ``backward_placement="after"``). The observable
    gate sits between the halves with no slot of its own.
    """

    def __init__(self, schedule: TrotterSchedule, n_steps: int, obs: PauliObservable, placement: str):
        self.schedule = schedule
        self.obs = obs
        g = schedule.layers_per_step
        k = g * n_steps
        fwd = [[("layer", l % g, False)] for l in range(k)]
        inv = [("layer", l % g, True) for l in reversed(range(k))]
        a = [] if obs.is_identity else [("obs",)]
        if placement == "before":
            # B_0..B_{K-1} forward layers, B_K = A, then one inverse layer per block
            blocks = fwd + [a] + [[op] for op in inv]
        elif k == 0:
            blocks = [a]
        else:
            # noise after every layer: B_K = (A, first inverse layer), trailing block empty
            blocks = fwd + [a + [inv[0]]] + [[op] for op in inv[1:]] + [[]]
        self.blocks = blocks
        self.n_slots = len(blocks) - 1

    def apply_block(self, state: np.ndarray, b: int) -> np.ndarray:
        for op in self.blocks[b]:
            if op[0] == "layer":
                apply_layer(state, self.schedule, op[1], inverse=op[2])
            else:
                state = self.obs.apply(state)
        return state

    def apply_block_adjoint(self, state: np.ndarray, b: int) -> np.ndarray:
        for op in reversed(self.blocks[b]):
            if op[0] == "layer":
                apply_layer(state, self.schedule, op[1], inverse=not op[2])
            else:
                state = self.obs.apply(state)  # Pauli strings are Hermitian (prefactor real)
        return state


def _run_full(circuit: _EchoCircuit, psi0: np.ndarray, model: NoiseModel, rng, tables) -> float:
    state = psi0.copy()
    if model.unitary_kraus:
        kinds = _pauli_kinds(rng.random((circuit.n_slots, n_qubits_of(psi0))), model)
    for s in range(circuit.n_slots):
        state = circuit.apply_block(state, s)
        if model.unitary_kraus:
            for q in np.nonzero(kinds[s])[0]:
                _kernels.apply_pauli(state, int(q), int(kinds[s, q]))
        else:
            _amplitude_damping_layer(state, tables, rng)
    state = circuit.apply_block(state, circuit.n_slots)
    return float(abs(np.vdot(psi0, state)) ** 2)


class _CachedEcho:
    """Noiseless prefix states and suffix bras for sparse Pauli-error trajectories."""

    def __init__(self, circuit: _EchoCircuit, psi0: np.ndarray):
        self.circuit = circuit
        d = circuit.n_slots
        self.prefix = []
        state = psi0.copy()
        for s in range(d):
            state = circuit.apply_block(state, s)
            self.prefix.append(state.copy())
        self.suffix = [None] * d
        bra = psi0.copy()
        for s in range(d, 0, -1):
            bra = circuit.apply_block_adjoint(bra, s)
            self.suffix[s - 1] = bra.copy()
        if d:
            clean = np.vdot(self.suffix[d - 1], self.prefix[d - 1])
        else:
            clean = np.vdot(psi0, circuit.apply_block(psi0.copy(), 0))
        self.clean = float(abs(clean) ** 2)

    def run(self, kinds: np.ndarray) -> float:
        slots = np.nonzero(kinds.any(axis=1))[0]
        if slots.size == 0:
            return self.clean
        first, last = int(slots[0]), int(slots[-1])
        state = self.prefix[first].copy()
        for s in range(first, last + 1):
            if s > first:
                state = self.circuit.apply_block(state, s)
            for q in np.nonzero(kinds[s])[0]:
                _kernels.apply_pauli(state, int(q), int(kinds[s, q]))
        return float(abs(np.vdot(self.suffix[last], state)) ** 2)


def noisy_survival_probability(psi, schedule: TrotterSchedule, n_steps: int, obs: PauliObservable,
                               model: NoiseModel, n_traj: int = DEFAULT_N_TRAJ, seed: int = 0,
                               lattice: Lattice | None = None, n_workers: int = 1,
                               use_cache: bool | None = None) -> TrajectoryEnsemble:
    """Trajectory estimate of the noisy survival probability L_A^N(t), t = n_steps * tau.

    Each trajectory runs prep, (layer, noise) x 4n, A, (noise, inverse layer) x 4n
    and records |<psi|final>|^2.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if not (obs.is_identity or obs.is_unitary):
        raise ValueError("observable must be unitary")
    psi0 = prepare_state(psi, lattice)
    n = n_qubits_of(psi0)
    circuit = _EchoCircuit(schedule, n_steps, obs, model.backward_placement)
    if use_cache is None:
        use_cache = 2 * circuit.n_slots * psi0.nbytes <= CACHE_BYTES
    cached = _CachedEcho(circuit, psi0) if (use_cache and model.unitary_kraus) else None
    tables = None if model.unitary_kraus else _DampingTables(n, model.p)

    def one(k: int) -> float:
        rng = trajectory_rng(seed, k)
        if cached is not None:
            return cached.run(_pauli_kinds(rng.random((circuit.n_slots, n)), model))
        return _run_full(circuit, psi0, model, rng, tables)

    outcomes = _map_ordered(one, n_traj, n_workers)
    return TrajectoryEnsemble(n_traj, int(seed), outcomes)


def _map_ordered(fn, count: int, n_workers: int) -> np.ndarray:
    out = np.empty(count)
    if n_workers <= 1:
        for k in range(count):
            out[k] = fn(k)
        return out

    def chunk(ks):
        return [(k, fn(k)) for k in ks]

    chunks = [range(w, count, n_workers) for w in range(n_workers)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        for part in pool.map(chunk, chunks):
            for k, v in part:
                out[k] = v
    return out


def noisy_forward_trajectories(psi, schedule: TrotterSchedule, n_steps: int, model: NoiseModel,
                               n_traj: int, seed: int, observer, lattice: Lattice | None = None) -> np.ndarray:
    """Run noisy forward evolution and record ``observer(state)`` after every layer.

    Returns an array of shape (n_traj, 4 n_steps + 1); column 0 is the initial state.
    """
    psi0 = prepare_state(psi, lattice)
    n = n_qubits_of(psi0)
    g = schedule.layers_per_step
    n_layers = g * n_steps
    tables = None if model.unitary_kraus else _DampingTables(n, model.p)
    out = np.empty((n_traj, n_layers + 1))
    for k in range(n_traj):
        rng = trajectory_rng(seed, k)
        state = psi0.copy()
        out[k, 0] = observer(state)
        for layer in range(n_layers):
            apply_layer(state, schedule, layer % g)
            if model.unitary_kraus:
                kinds = _pauli_kinds(rng.random(n), model)
                for q in np.nonzero(kinds)[0]:
                    _kernels.apply_pauli(state, int(q), int(kinds[q]))
            else:
                _amplitude_damping_layer(state, tables, rng)
            out[k, layer + 1] = observer(state)
    return out


def trajectory_density_matrix(psi, schedule: TrotterSchedule, n_steps: int, model: NoiseModel,
                              n_traj: int, seed: int, lattice: Lattice | None = None) -> np.ndarray:
    """Average of |phi><phi| over noisy forward trajectories (small systems)."""
    psi0 = prepare_state(psi, lattice)
    n = n_qubits_of(psi0)
    g = schedule.layers_per_step
    tables = None if model.unitary_kraus else _DampingTables(n, model.p)
    rho = np.zeros((psi0.size, psi0.size), dtype=complex)
    for k in range(n_traj):
        rng = trajectory_rng(seed, k)
        state = psi0.copy()
        for layer in range(g * n_steps):
            apply_layer(state, schedule, layer % g)
            if model.unitary_kraus:
                kinds = _pauli_kinds(rng.random(n), model)
                for q in np.nonzero(kinds)[0]:
                    _kernels.apply_pauli(state, int(q), int(kinds[q]))
            else:
                _amplitude_damping_layer(state, tables, rng)
        rho += np.outer(state, state.conj())
    return rho / n_traj


def sample_shots(probability: float, shots: int, p_m: float, n_qubits: int,
                 rng: np.random.Generator) -> float:
    """Shot-noise estimate of a survival probability with readout error folded in."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not 0 <= probability <= 1:
        raise ValueError("probability must lie in [0, 1]")
    success = probability * (1 - p_m) ** n_qubits
    return rng.binomial(shots, success) / shots


# --- exact density-matrix oracle (small systems) ---------------------------------


def _apply_1q(mat: np.ndarray, op: np.ndarray, q: int, n: int) -> np.ndarray:
    """op acting on qubit q of each column of ``mat``."""
    cols = mat.shape[1]
    t = mat.reshape(1 << (n - q - 1), 2, 1 << q, cols)
    return np.einsum("ab,xbyc->xayc", op, t).reshape(mat.shape)


def apply_channel(rho: np.ndarray, kraus: list[np.ndarray], q: int, n: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in kraus:
        left = _apply_1q(rho, k, q, n)
        out += _apply_1q(left.conj().T, k, q, n).conj().T
    return out


def _layer_unitary(schedule: TrotterSchedule, k: int, inverse: bool) -> np.ndarray:
    dim = 1 << schedule.n_qubits
    u = np.eye(dim, dtype=complex)
    for col in range(dim):
        v = np.ascontiguousarray(u[:, col])
        apply_layer(v, schedule, k, inverse)
        u[:, col] = v
    return u


def exact_noisy_forward(psi, schedule: TrotterSchedule, n_steps: int, model: NoiseModel,
                        lattice: Lattice | None = None) -> np.ndarray:
    """Density matrix after noisy forward evolution (noise after each layer)."""
    psi0 = prepare_state(psi, lattice)
    n = n_qubits_of(psi0)
    if n > 10:
        raise ValueError("exact density-matrix oracle limited to 10 qubits")
    kraus = model.kraus()
    g = schedule.layers_per_step
    units = [_layer_unitary(schedule, k, False) for k in range(g)]
    rho = np.outer(psi0, psi0.conj())
    for layer in range(g * n_steps):
        u = units[layer % g]
        rho = u @ rho @ u.conj().T
        for q in range(n):
            rho = apply_channel(rho, kraus, q, n)
    return rho


def exact_noisy_survival(psi, schedule: TrotterSchedule, n_steps: int, obs: PauliObservable,
                         model: NoiseModel, lattice: Lattice | None = None) -> float:
    """Noisy echo-circuit survival probability by exact Kraus evolution."""
    psi0 = prepare_state(psi, lattice)
    n = n_qubits_of(psi0)
    if n > 10:
        raise ValueError("exact density-matrix oracle limited to 10 qubits")
    circuit = _EchoCircuit(schedule, n_steps, obs, model.backward_placement)
    kraus = model.kraus()
    dim = psi0.size
    rho = np.outer(psi0, psi0.conj())

    def block(r, b):
        # apply block b as a unitary on both sides
        cols = np.empty((dim, dim), dtype=complex)
        for c in range(dim):
            cols[:, c] = circuit.apply_block(np.ascontiguousarray(r[:, c]), b)
        right = np.empty_like(cols)
        ct = cols.conj().T
        for c in range(dim):
            right[:, c] = circuit.apply_block(np.ascontiguousarray(ct[:, c]), b)
        return right.conj().T

    for s in range(circuit.n_slots):
        rho = block(rho, s)
        for q in range(n):
            rho = apply_channel(rho, kraus, q, n)
    rho = block(rho, circuit.n_slots)
    return float(np.vdot(psi0, rho @ psi0).real)


def noiseless_forward(psi, schedule: TrotterSchedule, n_steps: int, lattice: Lattice | None = None) -> np.ndarray:
    return evolve(prepare_state(psi, lattice), schedule, n_steps)
