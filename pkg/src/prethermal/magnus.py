"""Magnus effective Hamiltonians of the piecewise-constant Trotter drive.

One Trotter period of length tau applies the bond groups one after another.
Written as a drive, segment j lasts h_j = tau / Gamma with constant
Hamiltonian A_j = Gamma * H_j, so that the time integral over a period is
tau * H_XY. U(tau) = exp(-i tau H_eff) with H_eff = Omega_0 + Omega_1 + ...

For a piecewise-constant drive the nested time integrals reduce to finite
sums (segments ordered in time, a > b means a is later):

    Omega_0 = (1/tau) sum_a h_a A_a
    Omega_1 = 1/(2 i tau) sum_{a>b} h_a h_b [A_a, A_b]
    Omega_2 = -1/(6 tau) [ sum_{a>b>c} h_a h_b h_c ([A_a,[A_b,A_c]] + [A_c,[A_b,A_a]])
                          + sum_{a>b} (h_a^2 h_b / 2) [A_a,[A_a,A_b]]
                          + sum_{a>b} (h_a h_b^2 / 2) [A_b,[A_b,A_a]] ]

The last two sums come from the simplices in which two of the three times
fall into the same segment (volume h^2/2). With equal durations and
A_j = Gamma H_j this gives Omega_1 = (tau / 2i) sum_{a>b} [H_a, H_b].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import (PauliObservable, SpinHamiltonian, bond_group_matrices, hamiltonian_matrix,
                      observable_expectation)
from .spectral import ED_CAP, SectorSpectrum, sector_basis, sector_values, spectrum_from_block
from .statevector import apply_trotter_step, prepare_state, trotter_schedule


@dataclass(frozen=True)
class PiecewiseDrive:
    """Ordered ``(operator, duration)`` segments of one drive period."""

    segments: tuple = field(repr=False)

    @property
    def tau(self) -> float:
        return float(sum(h for _, h in self.segments))

    @property
    def operators(self) -> list:
        return [a for a, _ in self.segments]

    @property
    def durations(self) -> list[float]:
        return [float(h) for _, h in self.segments]

    def at(self, t: float):
        """Drive Hamiltonian H(t) for 0 <= t < tau (time taken modulo tau)."""
        t = t % self.tau
        edge = 0.0
        for a, h in self.segments:
            edge += h
            if t < edge:
                return a
        return self.segments[-1][0]

    def integral(self):
        return sum(h * a for a, h in self.segments)


def trotter_drive(H: SpinHamiltonian, tau: float, basis: np.ndarray | None = None,
                  dense: bool = True) -> PiecewiseDrive:
    """Drive whose period-tau propagator is one Trotter step of ``H``."""
    groups = bond_group_matrices(H, basis)
    gamma = len(groups)
    segs = []
    for g in groups:
        op = gamma * g
        segs.append((op.toarray() if dense else op.tocsr(), tau / gamma))
    return PiecewiseDrive(tuple(segs))


def _comm(a, b):
    return a @ b - b @ a


def _dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def magnus_term(drive: PiecewiseDrive, k: int):
    """Omega_k of the drive as a dense Hermitian matrix (k in 0, 1, 2)."""
    ops, hs, tau = drive.operators, drive.durations, drive.tau
    n = len(ops)
    if k == 0:
        return _dense(sum(h * a for a, h in zip(ops, hs))) / tau
    if k == 1:
        acc = 0
        for a in range(n):
            for b in range(a):
                acc = acc + hs[a] * hs[b] * _comm(ops[a], ops[b])
        if isinstance(acc, int):
            return np.zeros_like(_dense(ops[0]), dtype=complex)
        return _dense(acc) / (2j * tau)
    if k == 2:
        acc = 0
        comm = {}

        def c(x, y):
            if (x, y) not in comm:
                comm[(x, y)] = _comm(ops[x], ops[y])
            return comm[(x, y)]

        for a in range(n):
            for b in range(a):
                for cc in range(b):
                    w = hs[a] * hs[b] * hs[cc]
                    acc = acc + w * (_comm(ops[a], c(b, cc)) + _comm(ops[cc], c(b, a)))
                acc = acc + (hs[a] ** 2 * hs[b] / 2) * _comm(ops[a], c(a, b))
                acc = acc + (hs[a] * hs[b] ** 2 / 2) * _comm(ops[b], c(b, a))
        if isinstance(acc, int):
            return np.zeros_like(_dense(ops[0]), dtype=complex)
        return _dense(acc) * (-1.0 / (6 * tau))
    raise ValueError(f"Magnus terms are implemented for k <= 2, got {k}")


@dataclass(frozen=True)
class EffectiveHamiltonian:
    order: int
    tau: float
    matrix: np.ndarray = field(repr=False)


def magnus_hamiltonian(drive: PiecewiseDrive, order: int) -> EffectiveHamiltonian:
    """H_Magnus^(n) = Omega_0 + ... + Omega_n."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    m = sum(magnus_term(drive, k) for k in range(order + 1))
    m = 0.5 * (m + m.conj().T)  # strip round-off anti-Hermitian part
    return EffectiveHamiltonian(order, drive.tau, m)


def magnus_sector_spectra(H: SpinHamiltonian, tau: float, order: int,
                          max_dim: int = ED_CAP, sectors=None) -> list[SectorSpectrum]:
    """Spectra of H_Magnus^(order) in each m_z sector (all sectors by default)."""
    n = H.lattice.n_sites
    out = []
    for mz in (sector_values(n) if sectors is None else sectors):
        basis = sector_basis(n, mz)
        if order == 0:
            block = hamiltonian_matrix(H, basis)
        else:
            block = magnus_hamiltonian(trotter_drive(H, tau, basis), order).matrix
        out.append(spectrum_from_block(mz, basis, block, max_dim))
    return out


def _expectation(A, state: np.ndarray) -> float:
    if isinstance(A, PauliObservable):
        return observable_expectation(state, A)
    if callable(A):
        return float(A(state))
    return float(np.vdot(state, A @ state).real)


def spectral_propagate(spectra, psi: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) psi for H given by its sector spectra."""
    out = np.zeros_like(psi, dtype=complex)
    for s in spectra:
        c = s.vectors.conj().T @ psi[s.basis]
        out[s.basis] = s.vectors @ (np.exp(-1j * s.energies * t) * c)
    return out


@dataclass
class DeviationSeries:
    order: int
    tau: float
    times: np.ndarray
    floquet: np.ndarray
    magnus: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.floquet - self.magnus)

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max())


def floquet_vs_magnus_deviation(psi, A, H: SpinHamiltonian, order: int, t_max: float,
                                tau: float, spectra=None) -> DeviationSeries:
    """Stroboscopic <A> under U_Trotter^m versus exp(-i H_Magnus^(n) m tau).

    ``A`` is a PauliObservable, a callable on state vectors, or a matrix.
    ``spectra`` may pass precomputed ``magnus_sector_spectra`` output.
    """
    if t_max * abs(H.J) > 1e3:
        raise ValueError("t_max * J must be <= 1e3")
    lattice = H.lattice
    psi0 = prepare_state(psi, lattice)
    schedule = trotter_schedule(lattice, H.J, tau=tau)
    if spectra is None:
        spectra = magnus_sector_spectra(H, tau, order)
    m_max = int(np.floor(t_max / tau + 1e-9))
    times = tau * np.arange(m_max + 1)
    fl = np.empty(m_max + 1)
    mg = np.empty(m_max + 1)
    state = psi0.copy()
    for m in range(m_max + 1):
        if m:
            apply_trotter_step(state, schedule)
        fl[m] = _expectation(A, state)
        mg[m] = _expectation(A, spectral_propagate(spectra, psi0, times[m]))
    return DeviationSeries(order, tau, times, fl, mg)
