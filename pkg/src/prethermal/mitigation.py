"""Survival-probability rescaling and its error analysis.

L_A^N is the noisy echo survival probability for observable A and L_1^N the
same circuit with A = identity. The mitigated estimate is L_A^N / L_1^N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .io import write_csv
from .lattice import Lattice, PauliObservable
from .noise import NoiseModel, TrajectoryEnsemble, exact_noisy_forward, exact_noisy_survival
from .statevector import TrotterSchedule, prepare_state, survival_probability

RELIABILITY_CUTOFF = 0.01
SIGN_THRESHOLD_SIGMAS = 3.0


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float = 0.0


def as_estimate(x) -> Estimate:
    if isinstance(x, Estimate):
        return x
    if isinstance(x, TrajectoryEnsemble):
        return Estimate(x.mean, x.stderr)
    if isinstance(x, tuple):
        return Estimate(float(x[0]), float(x[1]))
    return Estimate(float(x), 0.0)


@dataclass(frozen=True)
class RescaledEstimate:
    mean: float
    stderr: float
    unreliable: bool


def rescale(L_A_noisy, L_id_noisy, cutoff: float = RELIABILITY_CUTOFF) -> RescaledEstimate:
    """L_A / L_1 with first-order (delta-method) error propagation.

    Numerator and denominator are treated as independent estimates.
    """
    a, b = as_estimate(L_A_noisy), as_estimate(L_id_noisy)
    if b.mean <= 0:
        raise ValueError(f"identity survival probability must be positive, got {b.mean}")
    ratio = a.mean / b.mean
    err = math.sqrt((a.stderr / b.mean) ** 2 + (ratio * b.stderr / b.mean) ** 2)
    return RescaledEstimate(ratio, err, b.mean < cutoff)


def mitigation_error_s(rescaled, L_A_noiseless: float) -> float:
    mean = rescaled.mean if hasattr(rescaled, "mean") else float(rescaled)
    return mean - L_A_noiseless


def global_depolarizing_survival(L_A_true: float, q: float, N: int) -> float:
    """Noisy survival probability when the error part of the state is fully mixed."""
    return q**2 * L_A_true + (1 - q**2) / 2**N


def global_depolarizing_bias(L_A_true: float, q: float, N: int) -> float:
    """Closed-form s of the rescaled estimator under global depolarization."""
    return (1 - L_A_true) * (1 - q**2) / (q**2 * 2**N + (1 - q**2))


def no_error_amplitude(N: int, D: int, p: float) -> float:
    """q = (1 - p)^(N D / 2): no error anywhere in the forward half."""
    return (1 - p) ** (N * D / 2)


@dataclass
class MitigationRecord:
    t: float
    D: int
    L_id: float
    L_id_err: float
    L_A: float
    L_A_err: float
    rescaled: float = field(init=False)
    rescaled_err: float = field(init=False)
    unreliable: bool = field(init=False)
    L_A_noiseless: float | None = None

    def __post_init__(self):
        r = rescale(Estimate(self.L_A, self.L_A_err), Estimate(self.L_id, self.L_id_err))
        self.rescaled, self.rescaled_err, self.unreliable = r.mean, r.stderr, r.unreliable

    @property
    def s(self) -> float | None:
        if self.L_A_noiseless is None:
            return None
        return self.rescaled - self.L_A_noiseless

    @classmethod
    def from_ensembles(cls, t: float, D: int, L_A: TrajectoryEnsemble, L_id: TrajectoryEnsemble,
                       L_A_noiseless: float | None = None) -> "MitigationRecord":
        return cls(t, D, L_id.mean, L_id.stderr, L_A.mean, L_A.stderr, L_A_noiseless)

    def row(self) -> dict:
        return {"t": self.t, "D": self.D, "L_id": self.L_id, "L_id_err": self.L_id_err,
                "L_A": self.L_A, "L_A_err": self.L_A_err, "rescaled": self.rescaled,
                "rescaled_err": self.rescaled_err, "s": self.s}


RECORD_COLUMNS = ["t", "D", "L_id", "L_id_err", "L_A", "L_A_err", "rescaled", "rescaled_err", "s"]


def write_records_csv(path, records) -> None:
    write_csv(path, RECORD_COLUMNS, [r.row() for r in records])


def moving_rms(D, s, half_window: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """RMS of s over [D - half_window, D + half_window] at each distinct D."""
    D = np.asarray(D, dtype=float)
    s = np.asarray(s, dtype=float)
    centers = np.unique(D)
    out = np.array([np.sqrt(np.mean(s[np.abs(D - c) <= half_window] ** 2)) for c in centers])
    return centers, out


# --- bound -----------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    q: float
    r: float
    L_A_noisy: float
    L_A_true: float

    @property
    def lhs(self) -> float:
        return abs(self.L_A_noisy / self.q**2 - self.L_A_true)

    @property
    def rhs(self) -> float:
        x = self.r / self.q
        return (1 - self.q) ** 2 * x**2 + 2 * (1 - self.q) * x

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + 1e-12

    def message(self) -> str:
        verdict = "holds" if self.passed else "VIOLATED"
        return (f"bound {verdict}: |L/q^2 - L_true| = {self.lhs:.6g} vs {self.rhs:.6g} "
                f"(q={self.q:.6g}, r={self.r:.6g}, L_noisy={self.L_A_noisy:.6g}, L_true={self.L_A_true:.6g})")


def bound_check(q: float, r: float, L_A_noisy: float, L_A_true: float) -> BoundCheck:
    return BoundCheck(float(q), float(r), float(L_A_noisy), float(L_A_true))


def error_state_purity_root(rho: np.ndarray, psi_t: np.ndarray, q: float) -> float:
    """r = sqrt(Tr rho_err^2) with rho = q |psi_t><psi_t| + (1 - q) rho_err."""
    if q >= 1:
        return 0.0
    rho_err = (rho - q * np.outer(psi_t, psi_t.conj())) / (1 - q)
    return float(math.sqrt(max(np.vdot(rho_err, rho_err).real, 0.0)))


def exact_bound_check(psi, schedule: TrotterSchedule, n_steps: int, obs: PauliObservable,
                      model: NoiseModel, lattice: Lattice | None = None) -> BoundCheck:
    """Evaluate the bound with exact Kraus evolution (unitary-Kraus channels only)."""
    if not model.unitary_kraus:
        raise ValueError("the bound assumes a channel with unitary Kraus operators")
    if model.backward_placement != "before":
        raise ValueError("the bound assumes noise before each backward layer")
    psi0 = prepare_state(psi, lattice)
    N = schedule.n_qubits
    D = 2 * schedule.layers_per_step * n_steps
    q = no_error_amplitude(N, D, model.p)
    rho = exact_noisy_forward(psi0, schedule, n_steps, model)
    from .statevector import evolve

    r = error_state_purity_root(rho, evolve(psi0, schedule, n_steps), q)
    L_noisy = exact_noisy_survival(psi0, schedule, n_steps, obs, model)
    L_true = survival_probability(psi0, schedule, n_steps, obs)
    return bound_check(q, r, L_noisy, L_true)


# --- resources -------------------------------------------------------------------


def max_depth(N: float | None, p: float, C: float = 1.0) -> float:
    """Depth bound D* with (1 - p)^(N D) > C / 2^N for all D < D*.

    ``N=None`` (or inf) gives the large-N limit log 2 / log(1 / (1 - p)).
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if C <= 0:
        raise ValueError("C must be positive")
    per = math.log(1 / (1 - p))
    if N is None or math.isinf(N):
        return math.log(2) / per
    return (N * math.log(2) + math.log(1 / C)) / (N * per)


@dataclass(frozen=True)
class SampleBudget:
    N: int
    D: int
    p: float
    p_m: float
    eps_stat: float
    shots: int

    def row(self) -> dict:
        return {"N": self.N, "D": self.D, "p": self.p, "p_m": self.p_m, "eps_stat": self.eps_stat,
                "shots": self.shots}


def sample_budget(N: int, D: int, p: float, p_m: float = 0.0, eps_stat: float = 1.0) -> SampleBudget:
    """Shots so that shot noise is eps_stat times the suppressed survival signal.

    shots = ceil[(1 - p)^(-2 N D) (1 - p_m)^(-2 N) / eps_stat^2]
    """
    for name, v in (("p", p), ("p_m", p_m)):
        if not 0 <= v < 1:
            raise ValueError(f"{name} must lie in [0, 1), got {v}")
    if eps_stat <= 0:
        raise ValueError("eps_stat must be positive")
    log_shots = -2 * N * D * math.log1p(-p) - 2 * N * math.log1p(-p_m) - 2 * math.log(eps_stat)
    shots = max(1, math.ceil(math.exp(log_shots) * (1 - 1e-12)))
    return SampleBudget(N, D, p, p_m, eps_stat, shots)


# --- sign tracking -----------------------------------------------------------------


@dataclass(frozen=True)
class SignTrack:
    signs: np.ndarray
    flips: tuple
    ambiguous: tuple
    threshold: np.ndarray = field(repr=False)

    def signed(self, magnitudes) -> np.ndarray:
        return self.signs * np.asarray(magnitudes, dtype=float)


def track_sign(magnitudes, initial_sign: float, stderr=None, threshold=None,
               n_sigma: float = SIGN_THRESHOLD_SIGMAS) -> SignTrack:
    """Assign signs to |<A>(t)| = sqrt(L_A) assuming <A>(t) varies smoothly.

    A flip is placed in every run of points whose magnitude falls below the
    threshold (default n_sigma * stderr): at the run's minimum k, or at k + 1
    when the left neighbour is larger than the right one (the zero lies after
    k). Local minima above the threshold whose linear extrapolation reaches
    zero within one step are reported as ambiguous and left unflipped.
    """
    m = np.asarray(magnitudes, dtype=float)
    if m.ndim != 1 or m.size == 0:
        raise ValueError("magnitudes must be a non-empty 1D series")
    if initial_sign == 0 or not np.isfinite(initial_sign):
        raise ValueError("initial sign must be nonzero")
    if threshold is None:
        if stderr is None:
            raise ValueError("give a threshold or the stderr of the magnitudes")
        threshold = n_sigma * np.broadcast_to(np.asarray(stderr, dtype=float), m.shape)
    thr = np.broadcast_to(np.asarray(threshold, dtype=float), m.shape).copy()
    below = m < thr
    below[0] = False  # the initial sign is given
    flips = []
    k = 1
    n = m.size
    while k < n:
        if not below[k]:
            k += 1
            continue
        end = k
        while end + 1 < n and below[end + 1]:
            end += 1
        j = k + int(np.argmin(m[k:end + 1]))
        if j + 1 < n and m[j - 1] > m[j + 1]:
            j += 1
        flips.append(j)
        k = end + 1
    ambiguous = []
    for j in range(1, n - 1):
        if below[j] or not (m[j] < m[j - 1] and m[j] <= m[j + 1]):
            continue
        if m[j] <= m[j - 1] - m[j] or m[j] <= m[j + 1] - m[j]:
            ambiguous.append(j)
    signs = np.empty(n)
    s = float(np.sign(initial_sign))
    flip_set = set(flips)
    for j in range(n):
        if j in flip_set:
            s = -s
        signs[j] = s
    return SignTrack(signs, tuple(flips), tuple(ambiguous), thr)
