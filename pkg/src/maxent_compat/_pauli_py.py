"""Pure numpy implementation of the Pauli-string kernels.

A Pauli string is encoded by two integer bit masks over the computational
basis index (qubit 1 is the most significant bit):

* ``x`` has a bit set where the letter is X or Y (basis flip),
* ``z`` has a bit set where the letter is Z or Y (sign flip),

and a complex prefactor ``coef`` that already includes the ``i**n_y``
phase of the Y letters.  Then ``P[j ^ x, j] = coef * (-1)**popcount(j & z)``.

Every function here has a drop-in twin in ``_pauli_ext.pyx``.
"""

import numpy as np


def _parity(v):
    v = v ^ (v >> 32)
    v = v ^ (v >> 16)
    v = v ^ (v >> 8)
    v = v ^ (v >> 4)
    v = v ^ (v >> 2)
    v = v ^ (v >> 1)
    return v & 1


def _signs(idx, z):
    return 1.0 - 2.0 * _parity(idx & z)


def pauli_sum_dense(xs, zs, coefs, n_qubits):
    """Dense matrix of ``sum_t coefs[t] * P(xs[t], zs[t])``."""
    dim = 1 << n_qubits
    out = np.zeros((dim, dim), dtype=np.complex128)
    idx = np.arange(dim, dtype=np.int64)
    for x, z, c in zip(np.asarray(xs, dtype=np.int64), np.asarray(zs, dtype=np.int64), coefs):
        out[idx ^ x, idx] += c * _signs(idx, z)
    return out


def pauli_expectations(rho, xs, zs, coefs):
    """``Tr(rho * coefs[t] * P_t)`` for every string ``t`` (complex)."""
    rho = np.asarray(rho, dtype=np.complex128)
    dim = rho.shape[0]
    idx = np.arange(dim, dtype=np.int64)
    xs = np.asarray(xs, dtype=np.int64)
    zs = np.asarray(zs, dtype=np.int64)
    out = np.empty(len(xs), dtype=np.complex128)
    for t in range(len(xs)):
        out[t] = coefs[t] * np.dot(rho[idx, idx ^ xs[t]], _signs(idx, zs[t]))
    return out


def apply_paulis(psi, xs, zs, coefs):
    """Row ``t`` of the result is ``coefs[t] * P_t @ psi``."""
    psi = np.asarray(psi, dtype=np.complex128)
    dim = psi.shape[0]
    idx = np.arange(dim, dtype=np.int64)
    xs = np.asarray(xs, dtype=np.int64)
    zs = np.asarray(zs, dtype=np.int64)
    out = np.empty((len(xs), dim), dtype=np.complex128)
    for t in range(len(xs)):
        src = idx ^ xs[t]
        out[t] = coefs[t] * _signs(src, zs[t]) * psi[src]
    return out
