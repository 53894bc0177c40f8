"""Exact diagonalization in m_z sectors and thermal-ensemble values.

A sector is labelled by the eigenvalue ``mz`` of sum_i sigma^z_i, i.e.
``N - 2 * (number of down spins)``.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import ResourceLimitError
from .lattice import PauliObservable, SpinHamiltonian, hamiltonian_matrix, pauli_matrix

ED_CAP = 16000
DEGENERACY_TOL = 1e-9


def sector_basis(n_sites: int, mz: int) -> np.ndarray:
    """Sorted basis indices with sum sigma^z = mz."""
    if (n_sites - mz) % 2 or abs(mz) > n_sites:
        raise ValueError(f"no sector mz={mz} for {n_sites} sites")
    n_down = (n_sites - mz) // 2
    idx = np.arange(1 << n_sites, dtype=np.int64)
    return idx[np.bitwise_count(idx.astype(np.uint64)) == n_down]


def sector_values(n_sites: int) -> list[int]:
    return list(range(-n_sites, n_sites + 1, 2))


@dataclass(frozen=True)
class SectorSpectrum:
    mz: int
    basis: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


def spectrum_from_block(mz: int, basis: np.ndarray, block, max_dim: int = ED_CAP) -> SectorSpectrum:
    """Diagonalize a Hermitian sector block (dense or sparse)."""
    if basis.shape[0] > max_dim:
        raise ResourceLimitError(
            f"sector mz={mz} has dimension {basis.shape[0]} > ED cap {max_dim}; "
            "use a smaller lattice or raise the cap"
        )
    dense = block.toarray() if sp.issparse(block) else np.asarray(block)
    energies, vectors = np.linalg.eigh(dense)
    return SectorSpectrum(mz, basis, energies, vectors)


def diagonalize_sector(H: SpinHamiltonian, mz: int, max_dim: int = ED_CAP) -> SectorSpectrum:
    basis = sector_basis(H.lattice.n_sites, mz)
    if basis.shape[0] > max_dim:
        raise ResourceLimitError(
            f"sector mz={mz} of a {H.lattice.rows}x{H.lattice.cols} lattice has dimension "
            f"{basis.shape[0]} > ED cap {max_dim}; use a smaller lattice or raise the cap"
        )
    return spectrum_from_block(mz, basis, hamiltonian_matrix(H, basis), max_dim)


def all_sector_spectra(H: SpinHamiltonian, max_dim: int = ED_CAP, cache_dir=None) -> list[SectorSpectrum]:
    """Spectra of every m_z sector, optionally read from / written to a disk cache."""
    out = []
    cache = SpectrumCache(cache_dir) if cache_dir is not None else None
    for mz in sector_values(H.lattice.n_sites):
        spec = cache.load(H, mz) if cache else None
        if spec is None:
            spec = diagonalize_sector(H, mz, max_dim)
            if cache:
                cache.store(H, spec)
        out.append(spec)
    return out


def full_spectrum(H: SpinHamiltonian) -> np.ndarray:
    """Eigenvalues of the full-space Hamiltonian (dense; small systems only)."""
    if H.lattice.n_sites > 12:
        raise ResourceLimitError("full-space diagonalization limited to 12 sites")
    return np.linalg.eigvalsh(hamiltonian_matrix(H).toarray())


# --- ensembles -----------------------------------------------------------------


def _as_matrix(A, n_sites: int) -> sp.csr_matrix:
    if isinstance(A, PauliObservable):
        return pauli_matrix(A, n_sites)
    return sp.csr_matrix(A)


def _n_sites(spectra) -> int:
    return sum(s.dim for s in spectra).bit_length() - 1


def eigenstate_expectations(spectrum: SectorSpectrum, A, n_sites: int) -> np.ndarray:
    """<k|A|k> for every eigenvector of the sector."""
    a = _as_matrix(A, n_sites)[spectrum.basis][:, spectrum.basis]
    v = spectrum.vectors
    return np.einsum("ik,ik->k", v.conj(), a @ v).real


def diagonal_ensemble(psi: np.ndarray, A, spectra, tol: float = DEGENERACY_TOL,
                      return_weights: bool = False):
    """sum_E <psi|P_E A P_E|psi> over the eigenspaces of the full Hamiltonian.

    Equivalent to sum_k |<k|psi>|^2 <k|A|k> after diagonalizing A inside each
    degenerate eigenspace. Eigenspaces may span several sectors.
    """
    spectra = list(spectra)
    n = _n_sites(spectra)
    a = _as_matrix(A, n)
    amps = [s.vectors.conj().T @ psi[s.basis] for s in spectra]

    energies = np.concatenate([s.energies for s in spectra])
    owner = np.concatenate([np.full(s.dim, i) for i, s in enumerate(spectra)])
    order = np.argsort(energies, kind="stable")
    # cluster boundaries
    gaps = np.diff(energies[order]) > tol
    cluster = np.concatenate([[0], np.cumsum(gaps)])
    cluster_of = np.empty_like(cluster)
    cluster_of[order] = cluster

    total = 0.0 + 0.0j
    for i, si in enumerate(spectra):
        for j, sj in enumerate(spectra):
            block = a[si.basis][:, sj.basis]
            if block.nnz == 0:
                continue
            mask = cluster_of[owner == i][:, None] == cluster_of[owner == j][None, :]
            if not mask.any():
                continue
            m = si.vectors.conj().T @ (block @ sj.vectors)
            total += np.sum(amps[i].conj()[:, None] * np.where(mask, m, 0.0) * amps[j][None, :])
    value = float(total.real)
    if return_weights:
        weights = {s.mz: float(np.sum(np.abs(c) ** 2)) for s, c in zip(spectra, amps)}
        return value, weights
    return value


def microcanonical(E: float, delta: float, A, spectrum, kind: str = "broadened",
                   n_sites: int | None = None) -> float:
    """Sharp (|E_k - E| < delta/2) or Gaussian-broadened (width delta) eigenstate average.

    ``spectrum`` is one SectorSpectrum or a list of them; ``n_sites`` is needed
    when a single sector is passed.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    spectra = [spectrum] if isinstance(spectrum, SectorSpectrum) else list(spectrum)
    if n_sites is None:
        if len(spectra) == 1:
            raise ValueError("pass n_sites when using a single sector")
        n_sites = _n_sites(spectra)
    energies = np.concatenate([s.energies for s in spectra])
    diag = np.concatenate([eigenstate_expectations(s, A, n_sites) for s in spectra])
    return window_average(E, delta, energies, diag, kind)


def window_average(E: float, delta: float, energies: np.ndarray, values: np.ndarray,
                   kind: str = "broadened") -> float:
    if kind == "sharp":
        inside = np.abs(energies - E) < delta / 2
        if not inside.any():
            nearest = energies[np.argmin(np.abs(energies - E))]
            raise ValueError(f"empty energy window around E={E:g}; nearest eigenvalue is {nearest:g}")
        return float(values[inside].mean())
    if kind == "broadened":
        logw = -((energies - E) ** 2) / (2 * delta**2)
        w = np.exp(logw - logw.max())
        return float(w @ values / w.sum())
    raise ValueError(f"unknown ensemble kind {kind!r}")


# --- disk cache ----------------------------------------------------------------

_MAGIC = b"PTHSPEC\x00"
_VERSION = 1


class SpectrumCache:
    """On-disk store for sector spectra.

    File layout (little endian)::

        magic    8 bytes  b"PTHSPEC\\0"
        version  uint16
        hlen     uint32   length of the JSON header
        header   JSON     {"rows", "cols", "J", "mz", "dim", "dtype"}
        basis    int64[dim]
        energies float64[dim]
        vectors  dtype[dim, dim], C order
        sha256   32 bytes over everything above
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, H: SpinHamiltonian, mz: int) -> Path:
        J = format(H.J, ".17g")
        return self.directory / f"xy_{H.lattice.rows}x{H.lattice.cols}_J{J}_mz{mz}.spec"

    def store(self, H: SpinHamiltonian, spectrum: SectorSpectrum) -> Path:
        vec = np.ascontiguousarray(spectrum.vectors)
        header = json.dumps({"rows": H.lattice.rows, "cols": H.lattice.cols, "J": H.J,
                             "mz": spectrum.mz, "dim": spectrum.dim, "dtype": vec.dtype.str}).encode()
        body = b"".join([
            _MAGIC, struct.pack("<HI", _VERSION, len(header)), header,
            spectrum.basis.astype("<i8").tobytes(), spectrum.energies.astype("<f8").tobytes(),
            vec.tobytes(),
        ])
        target = self.path(H, spectrum.mz)
        target.write_bytes(body + hashlib.sha256(body).digest())
        return target

    def load(self, H: SpinHamiltonian, mz: int) -> SectorSpectrum | None:
        target = self.path(H, mz)
        if not target.exists():
            return None
        return read_spectrum(target, expect=(H.lattice.rows, H.lattice.cols, H.J, mz))


def read_spectrum(path, expect=None) -> SectorSpectrum:
    raw = Path(path).read_bytes()
    body, digest = raw[:-32], raw[-32:]
    if not body.startswith(_MAGIC):
        raise ValueError(f"{path}: not a spectrum file")
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"{path}: checksum mismatch")
    version, hlen = struct.unpack_from("<HI", body, len(_MAGIC))
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = len(_MAGIC) + 6
    header = json.loads(body[pos:pos + hlen])
    pos += hlen
    if expect is not None:
        rows, cols, J, mz = expect
        if (header["rows"], header["cols"], header["mz"]) != (rows, cols, mz) or not math.isclose(header["J"], J):
            raise ValueError(f"{path}: header does not match the requested spectrum")
    dim = header["dim"]
    basis = np.frombuffer(body, "<i8", dim, pos).copy()
    pos += 8 * dim
    energies = np.frombuffer(body, "<f8", dim, pos).copy()
    pos += 8 * dim
    vectors = np.frombuffer(body, np.dtype(header["dtype"]), dim * dim, pos).reshape(dim, dim).copy()
    return SectorSpectrum(header["mz"], basis, energies, vectors)
