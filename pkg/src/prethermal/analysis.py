"""Floquet time averages, plateau detection and the noise-heating model."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .io import write_csv
from .lattice import (Lattice, PauliObservable, inplane_magnetization_norm,
                      mean_squared_inplane_magnetization, observable_expectation)
from .statevector import TrotterSchedule, apply_trotter_step, prepare_state, trotter_schedule

DEFAULT_T_CAP = 1e3


@dataclass
class TimeAverageSeries:
    """Stroboscopic values <A>(m tau) and running averages over m' = 0..m."""

    tau: float
    instantaneous: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.instantaneous = np.asarray(self.instantaneous, dtype=float)
        self.running = np.cumsum(self.instantaneous) / np.arange(1, self.instantaneous.size + 1)

    @property
    def m_max(self) -> int:
        return self.instantaneous.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.instantaneous.size)

    def value_at(self, t: float) -> float:
        """Running average at the last stroboscopic time not after t."""
        m = int(np.floor(t / self.tau + 1e-9))
        if not 0 <= m <= self.m_max:
            raise ValueError(f"t={t:g} outside the series (t_max={self.times[-1]:g})")
        return float(self.running[m])

    def rows(self):
        for t, a, r in zip(self.times, self.instantaneous, self.running):
            yield {"tau": self.tau, "t": float(t), "instantaneous": float(a), "running_average": float(r)}


SERIES_COLUMNS = ["tau", "t", "instantaneous", "running_average"]


def write_series_csv(path, series) -> None:
    if isinstance(series, TimeAverageSeries):
        series = [series]
    write_csv(path, SERIES_COLUMNS, [r for s in series for r in s.rows()])


def _evaluator(A):
    if A is None or (isinstance(A, str) and A == "m_inplane_sq"):
        return mean_squared_inplane_magnetization
    if isinstance(A, PauliObservable):
        return lambda s: observable_expectation(s, A)
    if callable(A):
        return A
    return lambda s: float(np.vdot(s, A @ s).real)


def observable_norm(A, n_sites: int) -> float:
    """Operator norm used for plateau tolerances."""
    if A is None or (isinstance(A, str) and A == "m_inplane_sq") or A is mean_squared_inplane_magnetization:
        return inplane_magnetization_norm(n_sites)
    if isinstance(A, PauliObservable):
        return abs(A.prefactor)
    raise ValueError("norm unknown for this observable; pass it explicitly")


def floquet_time_average(psi, A, schedule: TrotterSchedule, m_max: int,
                         lattice: Lattice | None = None) -> TimeAverageSeries:
    """One forward sweep of U_Trotter, recording <A> after every step.

    ``A`` is a PauliObservable, a callable on state vectors, a matrix, or
    None / "m_inplane_sq" for m_x^2 + m_y^2.
    """
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    f = _evaluator(A)
    state = prepare_state(psi, lattice)
    vals = np.empty(m_max + 1)
    vals[0] = f(state)
    for m in range(1, m_max + 1):
        apply_trotter_step(state, schedule)
        vals[m] = f(state)
    return TimeAverageSeries(schedule.tau, vals)


# --- plateaus ------------------------------------------------------------------


@dataclass(frozen=True)
class PlateauReport:
    """Plateau [t1, t2) on the stroboscopic grid (t = m tau)."""

    found: bool
    epsilon: float
    tau: float
    m1: int = 0
    m2: int = 0
    value: float = float("nan")
    truncated_at_cap: bool = False
    spread: float = float("nan")

    @property
    def t1(self) -> float:
        return self.m1 * self.tau

    @property
    def t2(self) -> float:
        return self.m2 * self.tau

    @property
    def ratio(self) -> float:
        return self.m2 / self.m1 if self.found else float("nan")

    def row(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "value": self.value, "epsilon": self.epsilon,
                "truncated": self.truncated_at_cap}


PLATEAU_COLUMNS = ["t1", "t2", "value", "epsilon", "truncated"]


def write_plateau_csv(path, reports) -> None:
    write_csv(path, PLATEAU_COLUMNS, [r.row() for r in reports])


def _max_right_ends(x: np.ndarray, tol: float) -> np.ndarray:
    """R[m1] = largest m2 with max - min of x[m1:m2] <= tol (two pointers)."""
    n = x.size
    R = np.empty(n, dtype=np.int64)
    lo, hi = deque(), deque()  # indices of window minima / maxima
    right = 0
    for left in range(n):
        if right < left:
            right = left
        while right < n:
            v = x[right]
            cur_max = max(v, x[hi[0]]) if hi else v
            cur_min = min(v, x[lo[0]]) if lo else v
            if cur_max - cur_min > tol:
                break
            while hi and x[hi[-1]] <= v:
                hi.pop()
            hi.append(right)
            while lo and x[lo[-1]] >= v:
                lo.pop()
            lo.append(right)
            right += 1
        R[left] = right
        if hi and hi[0] == left:
            hi.popleft()
        if lo and lo[0] == left:
            lo.popleft()
    return R


def detect_plateaus(series: TimeAverageSeries, epsilon: float, norm: float = 1.0,
                    t_cap: float = DEFAULT_T_CAP) -> list[PlateauReport]:
    """All locally maximal plateaus, largest t2/t1 first.

    A window [m1, m2) with 1 <= m1 and m2 <= M = t_cap / tau qualifies when the
    running average varies by at most epsilon * norm on it and m2 - m1 >= 2.
    Qualifying windows that cannot be extended are compared with every
    overlapping one; a window is kept unless an overlapping window has a
    strictly larger ratio t2/t1.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    M = int(np.floor(t_cap / series.tau + 1e-9))
    if M < 1:
        raise ValueError("t_cap shorter than one step")
    if series.m_max < M - 1:
        raise ValueError(f"series ends at m={series.m_max}; t_cap needs m={M - 1}")
    x = series.running[1:M]  # x[k] is running[k + 1]
    tol = epsilon * norm
    R = _max_right_ends(x, tol) + 1  # back to absolute indices
    m1s = np.arange(1, M)
    # maximal: not extendable to the left either
    keep = np.ones(m1s.size, dtype=bool)
    keep[1:] = R[1:] > R[:-1]
    keep &= (R - m1s) >= 2
    starts, ends = m1s[keep], R[keep]
    if starts.size == 0:
        return [PlateauReport(False, epsilon, series.tau)]
    ratios = ends / starts
    # candidates sorted by start with nondecreasing ends; overlap with i is a contiguous range
    lo_idx = np.searchsorted(ends, starts, side="right")
    hi_idx = np.searchsorted(starts, ends, side="left")
    best = _range_max(ratios, lo_idx, hi_idx)
    reports = []
    for i in np.nonzero(ratios >= best)[0]:
        m1, m2 = int(starts[i]), int(ends[i])
        seg = series.running[m1:m2]
        reports.append(PlateauReport(True, epsilon, series.tau, m1, m2, float(series.running[m1]),
                                     m2 == M, float(seg.max() - seg.min())))
    reports.sort(key=lambda r: (-r.ratio, r.m1))
    return reports


def _range_max(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """max(values[lo[i]:hi[i]]) via a sparse table."""
    n = values.size
    table = [values]
    k = 1
    while (1 << k) <= n:
        prev = table[-1]
        step = 1 << (k - 1)
        table.append(np.maximum(prev[:-step], prev[step:]))
        k += 1
    length = hi - lo
    lvl = np.floor(np.log2(np.maximum(length, 1))).astype(int)
    out = np.empty(lo.size)
    for i in range(lo.size):
        j = lvl[i]
        out[i] = max(table[j][lo[i]], table[j][hi[i] - (1 << j)])
    return out


def detect_plateau(series: TimeAverageSeries, epsilon: float, norm: float = 1.0,
                   t_cap: float = DEFAULT_T_CAP) -> PlateauReport:
    """The locally maximal plateau with the largest t2/t1 (earliest on ties)."""
    return detect_plateaus(series, epsilon, norm, t_cap)[0]


def solve_pevp(psi, A, schedule: TrotterSchedule, epsilon: float, t_cap: float = DEFAULT_T_CAP,
               lattice: Lattice | None = None, norm: float | None = None) -> float:
    """Plateau value <A>_{t1} of the Floquet running average.

    Raises:
        ValueError: if no plateau exists below t_cap.
    """
    if norm is None:
        norm = observable_norm(A, schedule.n_qubits)
    M = int(np.floor(t_cap / schedule.tau + 1e-9))
    series = floquet_time_average(psi, A, schedule, max(M - 1, 0), lattice)
    report = detect_plateau(series, epsilon, norm, t_cap)
    if not report.found:
        raise ValueError(f"no plateau with epsilon={epsilon} before t={t_cap:g}")
    return report.value


def plateau_diagnostic(psi, A, lattice: Lattice, taus, epsilon: float, J: float = 1.0,
                       t_cap: float = DEFAULT_T_CAP, reference: float | None = None,
                       norm: float | None = None) -> dict:
    """Multi-tau report on the prethermal character of the plateaus.

    Per tau: plateau window, value, and its distance from ``reference``
    (typically the infinite-temperature value) in units of epsilon * norm.
    Across tau: slope of log(t2/t1) against 1/tau and the spread of t1.
    """
    if norm is None:
        norm = observable_norm(A, lattice.n_sites)
    rows = []
    for tau in taus:
        sched = trotter_schedule(lattice, J, tau=tau)
        M = int(np.floor(t_cap / tau + 1e-9))
        series = floquet_time_average(psi, A, sched, M - 1, lattice)
        rep = detect_plateau(series, epsilon, norm, t_cap)
        row = {"tau": float(tau), "omega": 2 * np.pi / tau, "found": rep.found, "t1": rep.t1,
               "t2": rep.t2, "ratio": rep.ratio, "value": rep.value, "truncated": rep.truncated_at_cap}
        if reference is not None:
            row["separation"] = abs(rep.value - reference) / (epsilon * norm)
        rows.append(row)
    found = [r for r in rows if r["found"] and not r["truncated"]]
    slope = float("nan")
    if len(found) >= 2:
        slope = float(np.polyfit([1 / r["tau"] for r in found], [np.log(r["ratio"]) for r in found], 1)[0])
    t1s = [r["t1"] for r in rows if r["found"]]
    return {"rows": rows, "log_ratio_slope": slope,
            "t1_spread": float(np.ptp(t1s)) if t1s else float("nan")}


# --- noise heating ---------------------------------------------------------------


def heating_model_energy(E0, g: float, sigma: float, N: int, p: float, D):
    """Mean energy after D noisy layers.

    Solves sinh(g E / (N sigma^2)) = sinh(g E0 / (N sigma^2)) exp(-p g^2 D / sigma^2).
    """
    if g <= 0 or sigma <= 0:
        raise ValueError("g and sigma must be positive")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    a = g / (N * sigma**2)
    decay = np.exp(-p * g**2 * np.asarray(D, dtype=float) / sigma**2)
    return np.arcsinh(np.sinh(a * np.asarray(E0, dtype=float)) * decay) / a


def fit_heating_model(D, E, E0: float, N: int, p: float, guess=(1.0, 1.0)) -> tuple[float, float]:
    """Least-squares (g, sigma) for an energy trace E(D)."""
    D = np.asarray(D, dtype=float)
    E = np.asarray(E, dtype=float)

    def model(d, log_g, log_sigma):
        return heating_model_energy(E0, np.exp(log_g), np.exp(log_sigma), N, p, d)

    popt, _ = curve_fit(model, D, E, p0=np.log(guess), maxfev=20000)
    return float(np.exp(popt[0])), float(np.exp(popt[1]))
