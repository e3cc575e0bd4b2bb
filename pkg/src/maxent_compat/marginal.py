"""Quantum marginal problems as compatibility instances over local Pauli strings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from maxent_compat.errors import InvalidInstanceError
from maxent_compat.operators import (
    Observable,
    PauliTerm,
    expectation,
    partial_trace,
    pauli_strings,
    trace_distance,
)
from maxent_compat.solver import CompatibilityInstance
from maxent_compat.witness import Witness

PROJECTION_TOL = 1e-6
OVERLAP_TOL = 1e-6


def project_state(rho, tol: float = PROJECTION_TOL) -> np.ndarray:
    """Clip a nearly valid density matrix into the PSD trace-one set.

    Violations (asymmetry, negative eigenvalues, trace error) up to ``tol``
    are repaired; larger ones are rejected.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidInstanceError(f"reduced state must be square, got {rho.shape}")
    asym = np.abs(rho - rho.conj().T).max()
    if asym > tol:
        raise InvalidInstanceError(f"reduced state is not Hermitian (deviation {asym:.3g})")
    h = 0.5 * (rho + rho.conj().T)
    lam, v = np.linalg.eigh(h)
    if lam[0] < -tol:
        raise InvalidInstanceError(f"reduced state has eigenvalue {lam[0]:.3g} below -{tol:g}")
    tr = lam.sum()
    if abs(tr - 1) > tol:
        raise InvalidInstanceError(f"reduced state has trace {tr:.9g}")
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    return (v * lam) @ v.conj().T


@dataclass(frozen=True)
class MarginalPart:
    qubits: tuple[int, ...]
    rho: np.ndarray


class MarginalInstance:
    """Reduced states ``rho_S`` on subsystems ``S`` of an ``n``-qubit register."""

    def __init__(self, n_qubits: int, parts: Sequence, projection_tol: float = PROJECTION_TOL):
        self.n_qubits = int(n_qubits)
        out = []
        for j, part in enumerate(parts):
            qubits, rho = (part.qubits, part.rho) if isinstance(part, MarginalPart) else part
            qubits = tuple(int(q) for q in qubits)
            if not qubits or len(set(qubits)) != len(qubits):
                raise InvalidInstanceError(f"part {j}: invalid qubit list {qubits}")
            if min(qubits) < 1 or max(qubits) > self.n_qubits:
                raise InvalidInstanceError(f"part {j}: qubits {qubits} outside 1..{self.n_qubits}")
            rho = np.asarray(rho, dtype=np.complex128)
            if rho.shape != (1 << len(qubits),) * 2:
                raise InvalidInstanceError(f"part {j}: state shape {rho.shape} does not match {len(qubits)} qubits")
            rho = project_state(rho, projection_tol)
            # store in ascending-qubit order
            order = sorted(range(len(qubits)), key=lambda k: qubits[k])
            if order != list(range(len(qubits))):
                k = len(qubits)
                t = rho.reshape([2] * (2 * k)).transpose(order + [k + o for o in order])
                rho = t.reshape(1 << k, 1 << k)
                qubits = tuple(qubits[o] for o in order)
            out.append(MarginalPart(qubits, rho))
        if not out:
            raise InvalidInstanceError("marginal instance needs at least one part")
        self.parts = tuple(out)

    @classmethod
    def from_global_state(cls, rho, subsystems) -> "MarginalInstance":
        n = int(round(np.log2(np.asarray(rho).shape[0])))
        return cls(n, [(s, partial_trace(rho, s, n)) for s in subsystems])


@dataclass(frozen=True)
class OverlapViolation:
    first: int
    second: int
    shared: tuple[int, ...]
    distance: float


def _reduce_part(part: MarginalPart, keep) -> np.ndarray:
    local = [part.qubits.index(q) + 1 for q in keep]
    return partial_trace(part.rho, local, len(part.qubits))


def check_overlaps(minstance: MarginalInstance, tol: float = OVERLAP_TOL) -> list[OverlapViolation]:
    bad = []
    for (j, pj), (k, pk) in itertools.combinations(enumerate(minstance.parts), 2):
        shared = tuple(sorted(set(pj.qubits) & set(pk.qubits)))
        if not shared:
            continue
        d = trace_distance(_reduce_part(pj, shared), _reduce_part(pk, shared))
        if d > tol:
            bad.append(OverlapViolation(j, k, shared, d))
    return bad


class OverlapInconsistency(InvalidInstanceError):
    """Two given marginals disagree on their common subsystem."""

    def __init__(self, violations: list[OverlapViolation]):
        self.violations = violations
        v = violations[0]
        super().__init__(
            f"parts {v.first} and {v.second} disagree on qubits {list(v.shared)} "
            f"(trace distance {v.distance:.3g})"
        )


@dataclass(frozen=True)
class ConstraintLabel:
    """Provenance of one observable of the reduced instance."""

    pauli: str
    owner: int
    local: str
    support: tuple[int, ...]


@dataclass
class MarginalReduction:
    instance: CompatibilityInstance
    labels: list[ConstraintLabel]
    marginal: MarginalInstance


def _globalize(local: str, qubits, n) -> str:
    letters = ["I"] * n
    for p, q in zip(local, qubits):
        letters[q - 1] = p
    return "".join(letters)


def _localize(pauli: str, qubits) -> str:
    return "".join(pauli[q - 1] for q in qubits)


def to_compatibility(minstance: MarginalInstance, check: bool = True) -> MarginalReduction:
    """All non-identity local Pauli strings, deduplicated across overlaps.

    A string supported inside several parts is kept once and takes its
    target from the first part that contains it.  Raises
    ``OverlapInconsistency`` when ``check`` is set and two marginals
    disagree on a shared subsystem.
    """
    if check:
        bad = check_overlaps(minstance)
        if bad:
            raise OverlapInconsistency(bad)
    n = minstance.n_qubits
    seen = set()
    labels, observables, targets = [], [], []
    for j, part in enumerate(minstance.parts):
        for local in pauli_strings(len(part.qubits)):
            g = _globalize(local, part.qubits, n)
            if g in seen:
                continue
            seen.add(g)
            labels.append(ConstraintLabel(g, j, local, PauliTerm(g).support))
            observables.append(Observable.pauli(g))
            targets.append(expectation(part.rho, Observable.pauli(local)))
    inst = CompatibilityInstance(n, observables, targets)
    return MarginalReduction(inst, labels, minstance)


@dataclass
class LocalizedWitness:
    local_hamiltonians: list[np.ndarray]
    part_energies: list[float]
    total_energy: float
    ground_energy: float
    margin: float
    attribution: list[int]

    @property
    def certified(self) -> bool:
        from maxent_compat.witness import certificate_tolerance

        return self.margin > certificate_tolerance(self.ground_energy, self.total_energy)

    def to_json(self) -> dict:
        return {
            "part_energies": self.part_energies,
            "total_energy": self.total_energy,
            "ground_energy": self.ground_energy,
            "margin": self.margin,
            "certified": self.certified,
        }


def localize_witness(w, reduction: MarginalReduction, attribution: Sequence[int] | None = None) -> LocalizedWitness:
    """Split ``H_w`` into per-part local Hamiltonians ``H'_S``.

    ``attribution[i]`` names the part that receives observable ``i``; by
    default its owner.  Any part whose qubits contain the string's support
    is allowed, and the total energy does not depend on the choice as long
    as the marginals agree on overlaps.
    """
    coeffs = np.asarray(w.coefficients if isinstance(w, Witness) else w, dtype=float).ravel()
    mi = reduction.marginal
    labels = reduction.labels
    if attribution is None:
        attribution = [lab.owner for lab in labels]
    attribution = list(attribution)
    if len(attribution) != len(labels) or len(coeffs) != len(labels):
        raise InvalidInstanceError("witness/attribution length does not match the reduction")
    locals_ = [np.zeros((1 << len(p.qubits),) * 2, dtype=np.complex128) for p in mi.parts]
    for i, (lab, j) in enumerate(zip(labels, attribution)):
        part = mi.parts[j]
        if not set(lab.support) <= set(part.qubits):
            raise InvalidInstanceError(f"string {lab.pauli} is not supported inside part {j}")
        if coeffs[i]:
            locals_[j] += coeffs[i] * Observable.pauli(_localize(lab.pauli, part.qubits)).matrix
    energies = [expectation(p.rho, h) for p, h in zip(mi.parts, locals_)]
    total = float(sum(energies))
    e_g = float(np.linalg.eigvalsh(reduction.instance.stack.combine(coeffs))[0])
    return LocalizedWitness(locals_, energies, total, e_g, e_g - total, attribution)


def overlap_witness(minstance: MarginalInstance, violation: OverlapViolation) -> LocalizedWitness:
    """Certificate for marginals that disagree on a shared subsystem.

    With ``D`` the difference of the two reductions on the shared qubits,
    ``H_first = -D`` and ``H_second = +D`` (both padded with identities)
    cancel globally, so ``E_g = 0`` while the given marginals have energy
    ``-||D||_F^2 < 0``.
    """
    pj = minstance.parts[violation.first]
    pk = minstance.parts[violation.second]
    shared = violation.shared
    diff = _reduce_part(pj, shared) - _reduce_part(pk, shared)
    locals_ = [np.zeros((1 << len(p.qubits),) * 2, dtype=np.complex128) for p in minstance.parts]

    def pad(part, op):
        from maxent_compat.operators import embed_local

        local_idx = [part.qubits.index(q) + 1 for q in shared]
        return embed_local(op, local_idx, len(part.qubits))

    locals_[violation.first] = -pad(pj, diff)
    locals_[violation.second] = pad(pk, diff)
    energies = [expectation(p.rho, h) for p, h in zip(minstance.parts, locals_)]
    total = float(sum(energies))
    return LocalizedWitness(locals_, energies, total, 0.0, -total, [])


def recovered_marginals(rho, minstance: MarginalInstance) -> list[float]:
    """Trace distance between each given marginal and the reduction of ``rho``."""
    n = minstance.n_qubits
    return [trace_distance(partial_trace(rho, p.qubits, n), p.rho) for p in minstance.parts]
