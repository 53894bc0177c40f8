"""Low-level amplitude kernels (numba).

Qubit ``q`` is bit ``q`` of the basis index; ``|0>`` is spin up.
All kernels mutate ``psi`` in place.
"""

import numba as nb
import numpy as np

_JIT = dict(cache=True, nogil=True, fastmath=True)


@nb.njit(**_JIT)
def apply_xy_layer(psi, pairs, c, s):
    """Apply exp-XY gates on disjoint ``pairs``.

    On the {|01>, |10>} block each gate is [[c, i s], [i s, c]].
    """
    isn = 1j * s
    n = psi.shape[0]
    for g in range(pairs.shape[0]):
        i = pairs[g, 0]
        j = pairs[g, 1]
        bi = 1 << i
        bj = 1 << j
        lo = min(i, j)
        if lo >= 3:
            # contiguous runs of 2^lo amplitudes; vectorizes
            slo = 1 << lo
            shi = 1 << max(i, j)
            for top in range(0, n, 2 * shi):
                for mid in range(top, top + shi, 2 * slo):
                    a0 = mid | bj
                    b0 = mid | bi
                    for t in range(slo):
                        va = psi[a0 + t]
                        vb = psi[b0 + t]
                        psi[a0 + t] = c * va + isn * vb
                        psi[b0 + t] = isn * va + c * vb
        else:
            both = bi | bj
            for base in range(n):
                if base & both:
                    continue
                a = base | bj
                b = base | bi
                va = psi[a]
                vb = psi[b]
                psi[a] = c * va + isn * vb
                psi[b] = isn * va + c * vb


@nb.njit(**_JIT)
def apply_pauli(psi, q, kind):
    """kind: 1 = X, 2 = Y, 3 = Z."""
    bit = 1 << q
    for i0 in range(psi.shape[0]):
        if kind == 3:
            if i0 & bit:
                psi[i0] = -psi[i0]
            continue
        if i0 & bit:
            continue
        i1 = i0 | bit
        v0 = psi[i0]
        v1 = psi[i1]
        if kind == 1:
            psi[i0] = v1
            psi[i1] = v0
        else:
            # Y|0> = i|1>, Y|1> = -i|0>
            psi[i0] = -1j * v1
            psi[i1] = 1j * v0


@nb.njit(**_JIT)
def excited_population(psi, q):
    bit = 1 << q
    total = 0.0
    for idx in range(psi.shape[0]):
        if idx & bit:
            v = psi[idx]
            total += v.real * v.real + v.imag * v.imag
    return total


@nb.njit(**_JIT)
def no_jump_weight(psi, popcount, keep_pow):
    """Sum_b |psi_b|^2 keep^popcount(b): probability that no qubit decays.

    ``keep_pow[k]`` holds keep**k.
    """
    total = 0.0
    for idx in range(psi.shape[0]):
        v = psi[idx]
        total += (v.real * v.real + v.imag * v.imag) * keep_pow[popcount[idx]]
    return total


@nb.njit(**_JIT)
def apply_no_jump_all(psi, popcount, factor):
    """psi_b *= factor[popcount(b)]."""
    for idx in range(psi.shape[0]):
        psi[idx] *= factor[popcount[idx]]


@nb.njit(**_JIT)
def prefix_no_jump_weights(psi, n_qubits, keep):
    """Z[q] = weight of outcome strings with no decay on qubits 0..q."""
    out = np.zeros(n_qubits)
    for idx in range(psi.shape[0]):
        v = psi[idx]
        w = v.real * v.real + v.imag * v.imag
        for q in range(n_qubits):
            if idx & (1 << q):
                w *= keep
            out[q] += w
    return out


@nb.njit(**_JIT)
def apply_damping_kraus(psi, q, jump, sqrt_keep, sqrt_p):
    """Unnormalized M1 (jump) or M0 on qubit q."""
    bit = 1 << q
    for i0 in range(psi.shape[0]):
        if i0 & bit:
            continue
        i1 = i0 | bit
        if jump:
            psi[i0] = sqrt_p * psi[i1]
            psi[i1] = 0.0
        else:
            psi[i1] *= sqrt_keep


@nb.njit(**_JIT)
def inplane_moments(psi, n_qubits):
    """Return (||X_tot psi||^2, ||Y_tot psi||^2) with X_tot = sum_i X_i."""
    n_states = psi.shape[0]
    sx = 0.0
    sy = 0.0
    for idx in range(n_states):
        ax = 0.0 + 0.0j
        ay = 0.0 + 0.0j
        for q in range(n_qubits):
            bit = 1 << q
            v = psi[idx ^ bit]
            ax += v
            # (Y_q psi)[idx] = -i (-1)^{bit_q(idx)} psi[idx ^ bit]
            if idx & bit:
                ay += 1j * v
            else:
                ay -= 1j * v
        sx += ax.real * ax.real + ax.imag * ax.imag
        sy += ay.real * ay.real + ay.imag * ay.imag
    return sx, sy
