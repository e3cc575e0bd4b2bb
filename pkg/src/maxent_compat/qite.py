"""Statevector simulation of thermal-state preparation by imaginary time evolution.

The system register (qubits ``1..n``) is paired with an ancilla register
(``n+1..2n``) in the maximally entangled state.  Evolving the system half
by ``exp(-beta H / 2)`` and tracing out the ancillas leaves the Gibbs state
``exp(-beta H) / Tr``.  Each Trotter factor ``exp(-dtau h[m])`` is replaced
by a unitary ``exp(-i dtau A[m])`` on ``D`` qubits around the term, with
``A[m]`` fitted from expectation values of the current state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from maxent_compat import _kernels
from maxent_compat.errors import InvalidInstanceError, NumericalBreakdownError
from maxent_compat.operators import (
    Observable,
    PauliTerm,
    as_matrix,
    gibbs_state,
    partial_trace,
    pauli_decompose,
    pauli_strings,
    trace_distance,
)

NORM_TOL = 1e-10
LSTSQ_RCOND = 1e-10


class LocalityWarning(UserWarning):
    """The unitary support is too small to hold a term's correlations."""


@dataclass(frozen=True)
class QiteConfig:
    beta: float = 1.0
    dtau: float = 0.05
    D: int = 4

    def __post_init__(self):
        if self.beta <= 0 or self.dtau <= 0:
            raise InvalidInstanceError("beta and dtau must be positive")
        if self.D < 1:
            raise InvalidInstanceError("D must be at least 1")
        n = round(self.beta / 2 / self.dtau)
        if n < 1 or abs(n * self.dtau - self.beta / 2) > 1e-12:
            raise InvalidInstanceError(f"beta/2 = {self.beta / 2:g} is not a whole number of steps dtau = {self.dtau:g}")

    @property
    def steps(self) -> int:
        return round(self.beta / 2 / self.dtau)


@dataclass(frozen=True)
class PauliExpansion:
    """``A[m] = sum_I a_I sigma_I`` on ``support`` (identity string dropped)."""

    support: tuple[int, ...]
    strings: tuple[str, ...]
    coefficients: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


@dataclass
class QiteRun:
    rho: np.ndarray
    psi: np.ndarray
    config: QiteConfig
    expansions: list[list[PauliExpansion]] = field(repr=False)
    exact: np.ndarray | None = field(default=None, repr=False)
    trace_distance: float | None = None

    def step_norms(self) -> list[list[float]]:
        """``||a[m]||`` per Trotter step and term."""
        return [[e.norm for e in step] for step in self.expansions]


def tfd_initial(n_qubits: int) -> np.ndarray:
    """``2**-n/2 sum_i |i>|i>`` on ``2n`` qubits."""
    if n_qubits < 1:
        raise InvalidInstanceError("need at least one system qubit")
    d = 1 << n_qubits
    psi = np.zeros(d * d, dtype=np.complex128)
    psi[np.arange(d) * (d + 1)] = 1 / np.sqrt(d)
    return psi


def term_support(term) -> tuple[int, ...]:
    """1-based system qubits on which ``term`` acts nontrivially."""
    if isinstance(term, Observable) and term.is_pauli:
        terms = term.terms
    else:
        m = as_matrix(term)
        terms = pauli_decompose(m)
    qubits = sorted({q for t in terms if t.weight != 0 for q in t.support})
    return tuple(qubits)


def unitary_support(support: Sequence[int], n_qubits: int, D: int) -> tuple[int, ...]:
    """System/ancilla pairs ``(i, i+n)`` for the term, then nearest neighbours.

    The list is cut to ``D`` entries (and to ``2n``).  A cut that drops part
    of the term's own pairs raises ``LocalityWarning``.
    """
    order = list(support) + sorted(
        (q for q in range(1, n_qubits + 1) if q not in support),
        key=lambda q: (min((abs(q - s) for s in support), default=0), q),
    )
    pairs = [x for q in order for x in (q, q + n_qubits)]
    if D < 2 * len(support):
        warnings.warn(
            f"D = {D} is smaller than 2K = {2 * len(support)} for a term on qubits {list(support)}",
            LocalityWarning,
            stacklevel=3,
        )
    return tuple(pairs[:D])


def _support_strings(support, total):
    labels, xs, zs, coefs = [], [], [], []
    for local in pauli_strings(len(support)):
        letters = ["I"] * total
        for p, q in zip(local, support):
            letters[q - 1] = p
        x, z, c = PauliTerm("".join(letters)).masks()
        labels.append(local)
        xs.append(x)
        zs.append(z)
        coefs.append(c)
    return labels, np.array(xs, dtype=np.int64), np.array(zs, dtype=np.int64), np.array(coefs)


def _system_term(term, n_qubits):
    h = as_matrix(term)
    if h.shape != (1 << n_qubits,) * 2:
        raise InvalidInstanceError(f"term of shape {h.shape} does not act on {n_qubits} qubits")
    return np.kron(h, np.eye(1 << n_qubits))


def _expm_herm(a, t):
    w, v = np.linalg.eigh(a)
    return (v * np.exp(t * w)) @ v.conj().T


def qite_step(psi, term, config: QiteConfig, n_qubits: int | None = None, _cache=None):
    """One imaginary-time factor for ``term`` replaced by a local unitary.

    Returns the new state and the fitted expansion ``A[m]``.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    total = int(round(np.log2(psi.shape[0])))
    n = total // 2 if n_qubits is None else n_qubits
    if 2 * n != total:
        raise InvalidInstanceError("state must live on a doubled register of 2n qubits")
    if _cache is None:
        support = unitary_support(term_support(term), n, config.D)
        h = _system_term(term, n)
        ops = _support_strings(support, total)
    else:
        support, h, ops = _cache
    labels, xs, zs, coefs = ops
    if not np.any(h):
        return psi, PauliExpansion(support, tuple(labels), np.zeros(len(labels)))
    hpsi = h @ psi
    c = float(np.vdot(psi, _expm_herm(h, -2 * config.dtau) @ psi).real)
    if not c > 0:
        raise NumericalBreakdownError(f"normalization c = {c:g} is not positive")
    sig = _kernels.apply_paulis(psi, xs, zs, coefs)  # rows sigma_I psi
    s = sig.conj() @ sig.T
    b = -2 * (sig.conj() @ hpsi).imag / np.sqrt(c)
    a = np.linalg.lstsq((s + s.T).real, -b, rcond=LSTSQ_RCOND)[0]
    a_full = _kernels.pauli_sum_dense(xs, zs, coefs * a, total)
    a_full = 0.5 * (a_full + a_full.conj().T)
    w, v = np.linalg.eigh(a_full)
    new = v @ (np.exp(-1j * config.dtau * w) * (v.conj().T @ psi))
    nrm = np.linalg.norm(new)
    if abs(nrm - 1) > NORM_TOL:
        raise NumericalBreakdownError(f"step lost normalization ({nrm:.12g})")
    return new, PauliExpansion(support, tuple(labels), a)


def prepare_thermal(terms: Sequence, config: QiteConfig | None = None, n_qubits: int | None = None,
                    verify: bool = False) -> QiteRun:
    """Run ``N = beta/2/dtau`` sweeps over ``terms`` in the given order.

    ``terms`` are local system Hamiltonians whose sum is ``H``.  With
    ``verify`` the exact ``gibbs_state(beta H)`` and its trace distance to
    the result are recorded.
    """
    config = config or QiteConfig()
    mats = [as_matrix(t) for t in terms]
    if n_qubits is None:
        if not mats:
            raise InvalidInstanceError("need n_qubits for an empty Hamiltonian")
        n_qubits = int(round(np.log2(mats[0].shape[0])))
    n = int(n_qubits)
    total = 2 * n
    caches = []
    for t, m in zip(terms, mats):
        support = unitary_support(term_support(t), n, config.D)
        caches.append((support, _system_term(m, n), _support_strings(support, total)))
    psi = tfd_initial(n)
    expansions = []
    for _ in range(config.steps):
        sweep = []
        for m, cache in zip(mats, caches):
            psi, exp = qite_step(psi, m, config, n, _cache=cache)
            sweep.append(exp)
        expansions.append(sweep)
    rho = partial_trace(np.outer(psi, psi.conj()), range(1, n + 1), total)
    run = QiteRun(rho, psi, config, expansions)
    if verify:
        h = sum(mats) if mats else np.zeros((1 << n, 1 << n))
        run.exact = gibbs_state(config.beta * np.asarray(h))
        run.trace_distance = trace_distance(rho, run.exact)
    return run
