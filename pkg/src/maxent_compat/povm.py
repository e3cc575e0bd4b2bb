"""Informationally complete POVMs and the cross-entropy objective over them."""

from __future__ import annotations

from functools import reduce

import numpy as np

from maxent_compat.errors import InvalidInstanceError
from maxent_compat.operators import Observable, check_density_matrix
from maxent_compat.solver import CompatibilityInstance, achieved_many, cross_entropy

PSD_TOL = 1e-10
COMPLETENESS_TOL = 1e-10
PROB_ENTRY_TOL = 1e-10
PROB_SUM_TOL = 1e-9

_TETRAHEDRON = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)


def _bloch_projector(r) -> np.ndarray:
    x, y, z = r
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])


class PovmSet:
    """POVM elements ``E_k`` on ``n`` qubits, validated on construction."""

    def __init__(self, elements, n_qubits: int, check: bool = True):
        self.n_qubits = int(n_qubits)
        self.elements = np.asarray(elements, dtype=np.complex128)
        d = 1 << self.n_qubits
        if self.elements.ndim != 3 or self.elements.shape[1:] != (d, d):
            raise InvalidInstanceError(f"POVM elements must have shape (k, {d}, {d})")
        if check:
            self.check()

    def __len__(self) -> int:
        return len(self.elements)

    def gram_rank(self) -> int:
        flat = self.elements.reshape(len(self), -1)
        gram = flat.conj() @ flat.T
        return int(np.linalg.matrix_rank(gram, tol=1e-10 * max(1.0, np.abs(gram).max())))

    def check(self) -> None:
        d = 1 << self.n_qubits
        for k, e in enumerate(self.elements):
            if np.abs(e - e.conj().T).max() > PSD_TOL:
                raise InvalidInstanceError(f"POVM element {k} is not Hermitian")
            lam = np.linalg.eigvalsh(e)[0]
            if lam < -PSD_TOL:
                raise InvalidInstanceError(f"POVM element {k} has eigenvalue {lam:.3g}")
        dev = np.abs(self.elements.sum(axis=0) - np.eye(d)).max()
        if dev > COMPLETENESS_TOL:
            raise InvalidInstanceError(f"POVM elements do not sum to the identity (deviation {dev:.3g})")
        rank = self.gram_rank()
        if rank != d * d:
            raise InvalidInstanceError(f"POVM is not informationally complete (Gram rank {rank} < {d * d})")

    def observables(self) -> list[Observable]:
        return [Observable.from_matrix(e) for e in self.elements]


def sic_povm(n_qubits: int) -> PovmSet:
    """Tensor powers of the tetrahedral single-qubit SIC ``{P_k / 2}``.

    Element ``k`` of the product has base-4 digits ``k_1 .. k_n`` with qubit
    1 as the most significant digit.
    """
    if n_qubits < 1:
        raise InvalidInstanceError("sic_povm needs n >= 1")
    single = [0.5 * _bloch_projector(r) for r in _TETRAHEDRON]
    elems = single
    for _ in range(n_qubits - 1):
        elems = [np.kron(a, b) for a in elems for b in single]
    return PovmSet(np.array(elems), n_qubits)


def check_probabilities(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -PROB_ENTRY_TOL) or np.any(p > 1 + PROB_ENTRY_TOL):
        raise InvalidInstanceError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1) > PROB_SUM_TOL:
        raise InvalidInstanceError(f"probabilities sum to {p.sum():.12g}, not 1")
    return p


def born_probabilities(rho, povm: PovmSet) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    d = 1 << povm.n_qubits
    if rho.shape != (d, d):
        raise InvalidInstanceError(f"state of shape {rho.shape} does not match a {povm.n_qubits}-qubit POVM")
    # Tr(E rho) = sum_ij E_ij rho_ji
    return np.einsum("kij,ji->k", povm.elements, rho).real


def povm_instance(povm: PovmSet, probabilities) -> CompatibilityInstance:
    """Compatibility instance whose observables are the POVM elements."""
    p = check_probabilities(probabilities)
    if len(p) != len(povm):
        raise InvalidInstanceError(f"{len(p)} probabilities for a {len(povm)}-outcome POVM")
    return CompatibilityInstance(povm.n_qubits, povm.observables(), p)


def sic_instance(rho) -> CompatibilityInstance:
    """SIC-POVM instance with data generated from ``rho``."""
    rho = check_density_matrix(rho)
    n = int(round(np.log2(rho.shape[0])))
    povm = sic_povm(n)
    return povm_instance(povm, born_probabilities(rho, povm))


def cross_entropy_loss(instance: CompatibilityInstance, c) -> float:
    """``-sum_k p_k log Tr(E_k rho'(c))`` for probability targets ``p``."""
    p = check_probabilities(instance.targets)
    c = np.asarray(c, dtype=float).ravel()
    return float(cross_entropy(p, achieved_many(instance, c[None])[0]))
