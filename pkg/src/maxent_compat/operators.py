"""Dense Hermitian algebra and Pauli-string operators on n qubits.

Conventions used everywhere in the package:

* qubit 1 is the leftmost tensor factor, i.e. the most significant bit of
  a computational basis index (``|100>`` has qubit 1 in state 1);
* subsystem index sets are 1-based, matching the JSON file formats;
* density matrices and operators are plain complex ``numpy`` arrays.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from maxent_compat import _kernels
from maxent_compat.errors import InvalidInstanceError

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-10


@dataclass(frozen=True)
class PauliTerm:
    """``weight * sigma_{letters[0]} (x) ... (x) sigma_{letters[-1]}``."""

    letters: str
    weight: float = 1.0

    def __post_init__(self):
        letters = str(self.letters).upper()
        if not letters:
            raise InvalidInstanceError("Pauli string must contain at least one letter")
        bad = set(letters) - set("IXYZ")
        if bad:
            raise InvalidInstanceError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")
        if not np.isfinite(self.weight):
            raise InvalidInstanceError(f"non-finite weight for Pauli term {letters}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        """1-based qubits carrying a non-identity letter."""
        return tuple(k + 1 for k, p in enumerate(self.letters) if p != "I")

    def masks(self) -> tuple[int, int, complex]:
        """Bit masks ``(x, z)`` and the complex prefactor used by the kernels."""
        n = len(self.letters)
        x = z = n_y = 0
        for k, p in enumerate(self.letters):
            bit = 1 << (n - 1 - k)
            if p in "XY":
                x |= bit
            if p in "ZY":
                z |= bit
            n_y += p == "Y"
        return x, z, self.weight * (1j**n_y)


def pauli_to_dense(term: PauliTerm) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a weighted Pauli string."""
    if not isinstance(term, PauliTerm):
        term = PauliTerm(*term) if isinstance(term, tuple) else PauliTerm(term)
    x, z, coef = term.masks()
    return _kernels.pauli_sum_dense([x], [z], np.array([coef]), term.n_qubits)


def pauli_strings(n_qubits: int, include_identity: bool = False) -> list[str]:
    """All Pauli strings on ``n_qubits`` in lexicographic I<X<Y<Z order."""
    out = ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]
    return out if include_identity else out[1:]


class Observable:
    """Hermitian observable stored as a Pauli sum, a dense matrix, or both.

    The dense matrix is built lazily from the Pauli terms.  Construction
    validates hermiticity of dense input.
    """

    def __init__(self, n_qubits: int, terms: Sequence[PauliTerm] | None = None, matrix=None):
        if n_qubits < 1:
            raise InvalidInstanceError("observable needs at least one qubit")
        if (terms is None) == (matrix is None):
            raise InvalidInstanceError("give exactly one of terms or matrix")
        self.n_qubits = int(n_qubits)
        self.dim = 1 << self.n_qubits
        self.terms: tuple[PauliTerm, ...] | None = None
        if terms is not None:
            terms = tuple(t if isinstance(t, PauliTerm) else PauliTerm(*t) for t in terms)
            for t in terms:
                if t.n_qubits != self.n_qubits:
                    raise InvalidInstanceError(
                        f"Pauli term {t.letters} has {t.n_qubits} letters, expected {self.n_qubits}"
                    )
            self.terms = terms
        else:
            m = np.array(matrix, dtype=np.complex128)
            if m.shape != (self.dim, self.dim):
                raise InvalidInstanceError(f"matrix shape {m.shape} does not match {self.n_qubits} qubits")
            check_hermitian(m)
            m = 0.5 * (m + m.conj().T)
            m.setflags(write=False)
            self.__dict__["matrix"] = m

    @classmethod
    def pauli(cls, letters: str, weight: float = 1.0) -> "Observable":
        term = PauliTerm(letters, weight)
        return cls(term.n_qubits, terms=[term])

    @classmethod
    def from_matrix(cls, matrix) -> "Observable":
        m = np.asarray(matrix)
        n = int(round(np.log2(m.shape[0]))) if m.ndim == 2 and m.shape[0] > 0 else 0
        if m.ndim != 2 or m.shape[0] != m.shape[1] or (1 << n) != m.shape[0]:
            raise InvalidInstanceError(f"matrix of shape {m.shape} is not a qubit operator")
        return cls(n, matrix=m)

    @property
    def is_pauli(self) -> bool:
        return self.terms is not None

    @cached_property
    def matrix(self) -> np.ndarray:
        xs, zs, coefs = _term_arrays(self.terms)
        m = _kernels.pauli_sum_dense(xs, zs, coefs, self.n_qubits)
        m.setflags(write=False)
        return m

    def __repr__(self):
        if self.is_pauli:
            body = " + ".join(f"{t.weight:g}*{t.letters}" for t in self.terms)
            return f"Observable({body})"
        return f"Observable(dense, n_qubits={self.n_qubits})"


def _term_arrays(terms):
    xs, zs, coefs = [], [], []
    for t in terms:
        x, z, c = t.masks()
        xs.append(x)
        zs.append(z)
        coefs.append(c)
    return np.array(xs, dtype=np.int64), np.array(zs, dtype=np.int64), np.array(coefs, dtype=np.complex128)


def as_matrix(op) -> np.ndarray:
    """Dense matrix for an ``Observable``, ``PauliTerm`` or array-like."""
    if isinstance(op, Observable):
        return op.matrix
    if isinstance(op, PauliTerm):
        return pauli_to_dense(op)
    return np.asarray(op, dtype=np.complex128)


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInstanceError(f"operator must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInstanceError("operator has non-finite entries")
    scale = max(np.abs(m).max(initial=0.0), 1e-300)
    dev = np.abs(m - m.conj().T).max(initial=0.0)
    if dev > tol * scale:
        raise InvalidInstanceError(f"operator is not Hermitian (deviation {dev:.3g})")


def check_density_matrix(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Validate and return ``rho`` as a complex array."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidInstanceError(f"density matrix must be square, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise InvalidInstanceError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise InvalidInstanceError(f"density matrix trace {tr:.12g} != 1")
    lam = np.linalg.eigvalsh(rho)[0]
    if lam < -tol:
        raise InvalidInstanceError(f"density matrix has negative eigenvalue {lam:.3g}")
    return rho


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _phase_fix(v: np.ndarray) -> np.ndarray:
    # first entry above 1e-8 of the column's max becomes real positive
    mag = np.abs(v)
    first = np.argmax(mag > 1e-8 * mag.max(axis=0, keepdims=True), axis=0)
    ph = v[first, np.arange(v.shape[1])]
    return v * (np.abs(ph) / ph)


def hermitian_eig(op) -> SpectralDecomposition:
    """Ascending spectrum with phase-fixed eigenvectors.

    Within a numerically degenerate cluster the columns are ordered
    lexicographically by their (rounded) phase-fixed entries so repeated
    calls give identical output.
    """
    m = as_matrix(op)
    if not isinstance(op, Observable):
        check_hermitian(m)
    w, v = np.linalg.eigh(m)
    v = _phase_fix(v)
    scale = max(1.0, np.abs(w).max(initial=0.0))
    order = list(range(len(w)))
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > 1e-12 * scale:
            if k - start > 1:
                block = sorted(
                    range(start, k),
                    key=lambda j: tuple(np.round(np.concatenate([-np.abs(v[:, j]), v[:, j].imag]), 10)),
                )
                order[start:k] = block
            start = k
    return SpectralDecomposition(w, v[:, order])


def gibbs_state(h) -> np.ndarray:
    """``exp(-H) / Tr exp(-H)`` through the spectrum, shifted by ``lambda_min``."""
    m = as_matrix(h)
    w, v = np.linalg.eigh(m)
    p = np.exp(-(w - w[0]))
    p /= p.sum()
    rho = (v * p) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def gibbs_from_spectrum(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    p = np.exp(-(w - w[0]))
    p /= p.sum()
    return (v * p) @ v.conj().T


def expectation(rho, a) -> float:
    """``Tr(rho A)`` with the imaginary residue dropped."""
    rho = np.asarray(rho)
    if isinstance(a, Observable) and a.is_pauli:
        if rho.shape != (a.dim, a.dim):
            raise InvalidInstanceError(f"dimension mismatch: state {rho.shape} vs operator {a.dim}")
        xs, zs, coefs = _term_arrays(a.terms)
        return float(_kernels.pauli_expectations(rho, xs, zs, coefs).real.sum())
    m = as_matrix(a)
    if rho.shape != m.shape:
        raise InvalidInstanceError(f"dimension mismatch: state {rho.shape} vs operator {m.shape}")
    return float(np.einsum("ij,ji->", rho, m).real)


def _check_subset(keep, n):
    keep = tuple(sorted(set(int(k) for k in keep)))
    if not keep:
        raise InvalidInstanceError("subsystem must be nonempty")
    if keep[0] < 1 or keep[-1] > n:
        raise InvalidInstanceError(f"subsystem {keep} out of range 1..{n}")
    return keep


def partial_trace(rho, keep, n_qubits: int | None = None) -> np.ndarray:
    """Reduced state on the 1-based qubits ``keep`` (ascending order)."""
    rho = np.asarray(rho, dtype=np.complex128)
    n = n_qubits if n_qubits is not None else int(round(np.log2(rho.shape[0])))
    if rho.shape != (1 << n, 1 << n):
        raise InvalidInstanceError(f"state shape {rho.shape} does not match {n} qubits")
    keep = _check_subset(keep, n)
    k0 = [k - 1 for k in keep]
    traced = [q for q in range(n) if q not in k0]
    t = rho.reshape([2] * (2 * n))
    perm = k0 + traced + [n + q for q in k0] + [n + q for q in traced]
    t = t.transpose(perm)
    dk, dt = 1 << len(k0), 1 << len(traced)
    t = t.reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def embed_local(op, subsystem, n_qubits: int) -> np.ndarray:
    """Tensor a local operator with identities on the complement of ``subsystem``.

    ``subsystem`` lists the 1-based qubits the local operator acts on, in
    the order of its tensor factors.
    """
    m = as_matrix(op)
    sub = [int(s) for s in subsystem]
    if len(set(sub)) != len(sub):
        raise InvalidInstanceError(f"repeated qubit in subsystem {sub}")
    _check_subset(sub, n_qubits)
    k = len(sub)
    if m.shape != (1 << k, 1 << k):
        raise InvalidInstanceError(f"operator of shape {m.shape} does not act on {k} qubits")
    rest = [q for q in range(1, n_qubits + 1) if q not in sub]
    full = np.kron(m, np.eye(1 << len(rest)))
    order = sub + rest  # tensor-factor -> qubit
    inv = [order.index(q) for q in range(1, n_qubits + 1)]
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(inv + [n_qubits + i for i in inv])
    d = 1 << n_qubits
    return t.reshape(d, d)


def pauli_decompose(m, n_qubits: int | None = None, tol: float = 1e-12) -> list[PauliTerm]:
    """Real Pauli-basis expansion of a Hermitian matrix (zero weights dropped)."""
    m = np.asarray(m, dtype=np.complex128)
    n = n_qubits if n_qubits is not None else int(round(np.log2(m.shape[0])))
    strings = pauli_strings(n, include_identity=True)
    terms = []
    scale = max(np.abs(m).max(initial=0.0), 1.0)
    for s in strings:
        t = PauliTerm(s)
        x, z, coef = t.masks()
        w = _kernels.pauli_expectations(m, [x], [z], np.array([coef]))[0].real / m.shape[0]
        if abs(w) > tol * scale:
            terms.append(PauliTerm(s, w))
    return terms


def trace_distance(a, b) -> float:
    d = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


def state_fidelity(rho, psi) -> float:
    """``<psi| rho |psi>`` for a pure reference ``psi``."""
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    psi = psi / np.linalg.norm(psi)
    return float(np.vdot(psi, np.asarray(rho) @ psi).real)


class ObservableStack:
    """A fixed list of observables with fast ``sum c_i A_i`` and ``Tr(rho A_i)``.

    Pauli-only stacks on more than ``dense_max_qubits`` qubits go through the
    bitmask kernels and never materialize per-observable dense matrices.
    """

    def __init__(self, observables: Sequence[Observable], dense_max_qubits: int = 6):
        if not observables:
            raise InvalidInstanceError("need at least one observable")
        n = observables[0].n_qubits
        for a in observables:
            if a.n_qubits != n:
                raise InvalidInstanceError("observables act on different numbers of qubits")
        self.n_qubits = n
        self.dim = 1 << n
        self.m = len(observables)
        self.observables = tuple(observables)
        self.use_kernels = all(a.is_pauli for a in observables) and n > dense_max_qubits
        if self.use_kernels:
            owner, xs, zs, coefs = [], [], [], []
            for i, a in enumerate(observables):
                x, z, c = _term_arrays(a.terms)
                owner.extend([i] * len(x))
                xs.append(x)
                zs.append(z)
                coefs.append(c)
            self._owner = np.array(owner, dtype=np.int64)
            self._xs = np.concatenate(xs)
            self._zs = np.concatenate(zs)
            self._coefs = np.concatenate(coefs)
        else:
            self._stack = np.stack([a.matrix for a in observables])
            # Tr(rho A_i) = sum_jk rho_jk A_i,kj = <conj(A_i^T), rho> as a flat dot
            self._flat = self._stack.transpose(0, 2, 1).reshape(self.m, -1)

    def combine(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if self.use_kernels:
            return _kernels.pauli_sum_dense(self._xs, self._zs, self._coefs * c[self._owner], self.n_qubits)
        return np.tensordot(c, self._stack, axes=1)

    def combine_many(self, cs) -> np.ndarray:
        cs = np.atleast_2d(np.asarray(cs, dtype=float))
        if self.use_kernels:
            return np.stack([self.combine(c) for c in cs])
        return np.tensordot(cs, self._stack, axes=1)

    def expectations(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        if self.use_kernels:
            vals = _kernels.pauli_expectations(rho, self._xs, self._zs, self._coefs).real
            return np.bincount(self._owner, weights=vals, minlength=self.m)
        return (self._flat @ rho.reshape(-1)).real

    def expectations_many(self, rhos) -> np.ndarray:
        if self.use_kernels:
            return np.stack([self.expectations(r) for r in rhos])
        rhos = np.asarray(rhos)
        return (rhos.reshape(len(rhos), -1) @ self._flat.T).real

    def spectral_bounds(self) -> np.ndarray:
        """``(m, 2)`` array of ``[lambda_min, lambda_max]`` per observable."""
        out = np.empty((self.m, 2))
        for i, a in enumerate(self.observables):
            w = np.linalg.eigvalsh(a.matrix)
            out[i] = w[0], w[-1]
        return out
