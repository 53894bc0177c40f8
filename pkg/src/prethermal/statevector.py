"""Pure-state simulation of the Trotterized XY dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .lattice import Lattice, PauliObservable, ProductStateSpec, n_qubits_of, product_state


def partial_iswap_gate(J: float, tau: float) -> np.ndarray:
    """exp(-i h tau) for one bond term h = -J (S^x S^x + S^y S^y).

    Basis order |00>, |01>, |10>, |11>. Equals iSWAP^(J tau / pi).
    """
    c, s = np.cos(J * tau / 2), np.sin(J * tau / 2)
    g = np.eye(4, dtype=complex)
    g[1:3, 1:3] = [[c, 1j * s], [1j * s, c]]
    return g


@dataclass(frozen=True)
class TrotterSchedule:
    """First-order Trotter step: one layer of disjoint partial iSWAPs per bond group.

    ``layers[k]`` is an ``(n_gates, 2)`` int array; a step applies layers in order.
    """

    tau: float
    J: float
    n_qubits: int
    layers: tuple = field(repr=False)

    @property
    def omega(self) -> float:
        return 2 * np.pi / self.tau

    @property
    def layers_per_step(self) -> int:
        return len(self.layers)

    def gate_params(self, inverse: bool = False) -> tuple[float, float]:
        c, s = np.cos(self.J * self.tau / 2), np.sin(self.J * self.tau / 2)
        return (c, -s) if inverse else (c, s)


def trotter_schedule(lattice: Lattice, J: float = 1.0, tau: float | None = None,
                     omega: float | None = None) -> TrotterSchedule:
    if (tau is None) == (omega is None):
        raise ValueError("give exactly one of tau and omega")
    if tau is None:
        tau = 2 * np.pi / omega
    layers = tuple(np.array(g, dtype=np.int64).reshape(-1, 2) for g in lattice.bond_groups)
    return TrotterSchedule(float(tau), float(J), lattice.n_sites, layers)


def prepare_state(psi, lattice: Lattice | None = None) -> np.ndarray:
    """Accept an amplitude vector or a ProductStateSpec; return a fresh complex vector."""
    if isinstance(psi, ProductStateSpec):
        if lattice is None:
            raise ValueError("a lattice is needed to build a product state")
        return product_state(psi, lattice)
    return np.array(psi, dtype=complex, copy=True)


def _check(state: np.ndarray, schedule: TrotterSchedule) -> None:
    if state.dtype != np.complex128 or not state.flags.c_contiguous:
        raise TypeError("state must be a C-contiguous complex128 array")
    if n_qubits_of(state) != schedule.n_qubits:
        raise ValueError(f"state has {n_qubits_of(state)} qubits, schedule has {schedule.n_qubits}")


def apply_layer(state: np.ndarray, schedule: TrotterSchedule, k: int, inverse: bool = False) -> np.ndarray:
    """Apply layer ``k`` (or its inverse) in place."""
    c, s = schedule.gate_params(inverse)
    _kernels.apply_xy_layer(state, schedule.layers[k], c, s)
    return state


def apply_trotter_step(state: np.ndarray, schedule: TrotterSchedule) -> np.ndarray:
    """state <- U_Trotter(tau) state, in place. Returns ``state``."""
    _check(state, schedule)
    c, s = schedule.gate_params()
    for layer in schedule.layers:
        _kernels.apply_xy_layer(state, layer, c, s)
    return state


def apply_inverse_step(state: np.ndarray, schedule: TrotterSchedule) -> np.ndarray:
    """state <- U_Trotter(tau)^dagger state, in place (layers reversed, gates conjugated)."""
    _check(state, schedule)
    c, s = schedule.gate_params(inverse=True)
    for layer in reversed(schedule.layers):
        _kernels.apply_xy_layer(state, layer, c, s)
    return state


def evolve(state: np.ndarray, schedule: TrotterSchedule, n_steps: int) -> np.ndarray:
    """Return U_Trotter^n_steps |state> as a new vector."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    out = np.array(state, dtype=complex, copy=True)
    _check(out, schedule)
    for _ in range(n_steps):
        apply_trotter_step(out, schedule)
    return out


def survival_probability(psi, schedule: TrotterSchedule, n_steps: int, obs: PauliObservable,
                         lattice: Lattice | None = None) -> float:
    """|<psi| U^-n A U^n |psi>|^2 computed by running the echo circuit.

    Raises:
        ValueError: if ``obs`` is not unitary (prefactor other than +-1).
    """
    if not obs.is_unitary:
        raise ValueError("survival probability needs a unitary observable (prefactor +-1)")
    psi0 = prepare_state(psi, lattice)
    phi = evolve(psi0, schedule, n_steps)
    if not obs.is_identity:
        phi = obs.apply(phi)
    for _ in range(n_steps):
        apply_inverse_step(phi, schedule)
    return float(abs(np.vdot(psi0, phi)) ** 2)


def trotter_unitary(schedule: TrotterSchedule) -> np.ndarray:
    """Dense U_Trotter(tau) from exponentials of each group Hamiltonian (small N only)."""
    from .lattice import flip_flop_matrix

    n = schedule.n_qubits
    if n > 12:
        raise ValueError("dense Trotter unitary limited to 12 qubits")
    u = np.eye(1 << n, dtype=complex)
    for layer in schedule.layers:
        h = flip_flop_matrix(n, [tuple(p) for p in layer], -schedule.J / 2).toarray()
        u = sla.expm(-1j * schedule.tau * h) @ u
    return u
