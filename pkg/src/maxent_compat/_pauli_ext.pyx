# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Pauli-string kernels; see ``_pauli_py`` for the encoding."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _sign(long long v) noexcept nogil:
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return 1.0 - 2.0 * <double>(v & 1)


def pauli_sum_dense(xs, zs, coefs, int n_qubits):
    cdef const long long[::1] xv = np.ascontiguousarray(xs, dtype=np.int64)
    cdef const long long[::1] zv = np.ascontiguousarray(zs, dtype=np.int64)
    cdef const double complex[::1] cv = np.ascontiguousarray(coefs, dtype=np.complex128)
    cdef Py_ssize_t dim = 1 << n_qubits
    out = np.zeros((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    cdef Py_ssize_t t, j
    cdef long long x, z
    cdef double complex c
    with nogil:
        for t in range(xv.shape[0]):
            x = xv[t]
            z = zv[t]
            c = cv[t]
            for j in range(dim):
                ov[j ^ x, j] += c * _sign(j & z)
    return out


def pauli_expectations(rho, xs, zs, coefs):
    cdef const double complex[:, ::1] rv = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef const long long[::1] xv = np.ascontiguousarray(xs, dtype=np.int64)
    cdef const long long[::1] zv = np.ascontiguousarray(zs, dtype=np.int64)
    cdef const double complex[::1] cv = np.ascontiguousarray(coefs, dtype=np.complex128)
    cdef Py_ssize_t dim = rv.shape[0]
    cdef Py_ssize_t nt = xv.shape[0]
    out = np.empty(nt, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t t, j
    cdef long long x, z
    cdef double complex acc
    with nogil:
        for t in range(nt):
            x = xv[t]
            z = zv[t]
            acc = 0
            for j in range(dim):
                acc = acc + rv[j, j ^ x] * _sign(j & z)
            ov[t] = cv[t] * acc
    return out


def apply_paulis(psi, xs, zs, coefs):
    cdef const double complex[::1] pv = np.ascontiguousarray(psi, dtype=np.complex128)
    cdef const long long[::1] xv = np.ascontiguousarray(xs, dtype=np.int64)
    cdef const long long[::1] zv = np.ascontiguousarray(zs, dtype=np.int64)
    cdef const double complex[::1] cv = np.ascontiguousarray(coefs, dtype=np.complex128)
    cdef Py_ssize_t dim = pv.shape[0]
    cdef Py_ssize_t nt = xv.shape[0]
    out = np.empty((nt, dim), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    cdef Py_ssize_t t, k
    cdef long long x, z, src
    with nogil:
        for t in range(nt):
            x = xv[t]
            z = zv[t]
            for k in range(dim):
                src = k ^ x
                ov[t, k] = cv[t] * _sign(src & z) * pv[src]
    return out
