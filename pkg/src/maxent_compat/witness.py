"""Ground-energy witnesses for incompatible targets.

A coefficient vector ``w`` defines ``H_w = sum_i w_i A_i``.  Every
compatible expectation vector ``x`` satisfies ``w . x >= E_g(H_w)``, so a
target ``a`` with ``w . a < E_g`` is certified incompatible; the margin is
``E_g - w . a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from maxent_compat.errors import InconclusiveWitnessError
from maxent_compat.solver import CompatibilityInstance, MaxEntState, SolverConfig, solve

DEFAULT_ETA = 1e-3
TANGENCY_RTOL = 1e-4


@dataclass(frozen=True)
class RankProfile:
    eigenvalues: np.ndarray
    numerical_rank: int
    eta: float


def rank_profile(state, eta: float = DEFAULT_ETA) -> RankProfile:
    """Descending spectrum of ``rho'`` and the count above ``eta * lambda_max``."""
    rho = state.rho if isinstance(state, MaxEntState) else np.asarray(state)
    lam = np.linalg.eigvalsh(rho)[::-1]
    rank = int(np.sum(lam > eta * lam[0]))
    return RankProfile(lam, max(rank, 1), eta)


def certificate_tolerance(ground_energy: float, target_energy: float) -> float:
    # margins at round-off level never certify
    return 1e-9 * (1.0 + abs(ground_energy) + abs(target_energy))


@dataclass(frozen=True)
class Witness:
    coefficients: np.ndarray
    ground_energy: float
    target_energy: float
    margin: float

    @property
    def certified(self) -> bool:
        return self.margin > certificate_tolerance(self.ground_energy, self.target_energy)

    def normalized(self) -> "Witness":
        """Same witness with ``||w||_2 = 1`` (all energies rescaled)."""
        s = float(np.linalg.norm(self.coefficients))
        if s == 0:
            return self
        return Witness(self.coefficients / s, self.ground_energy / s, self.target_energy / s, self.margin / s)


def assemble_witness(instance: CompatibilityInstance, w) -> Witness:
    w = np.asarray(w, dtype=float).ravel()
    e_g = float(np.linalg.eigvalsh(instance.stack.combine(w))[0])
    target = float(w @ instance.targets)
    return Witness(w, e_g, target, e_g - target)


def _tangency_residual(instance, w: Witness, point) -> float:
    return abs(float(w.coefficients @ np.asarray(point)) - w.ground_energy)


def _check(instance, wit: Witness, boundary_point) -> Witness:
    res = _tangency_residual(instance, wit, boundary_point)
    if res > TANGENCY_RTOL * (1 + abs(wit.ground_energy)):
        raise InconclusiveWitnessError(
            f"boundary point is not on the supporting hyperplane (residual {res:.3g}); "
            "the optimizer did not reach the boundary"
        )
    if not wit.certified:
        raise InconclusiveWitnessError(f"witness margin {wit.margin:.3g} is not positive")
    return wit


def witness_from_boundary(instance: CompatibilityInstance, state: MaxEntState) -> Witness:
    """Witness whose normal is the fitted coefficient vector itself."""
    if state.converged:
        raise ValueError("state converged; the targets are compatible and admit no witness")
    wit = assemble_witness(instance, state.coefficients)
    return _check(instance, wit, state.achieved)


@dataclass(frozen=True)
class DegenerateFit:
    """Intermediate data of the degenerate-boundary construction."""

    mixture: np.ndarray
    vectors: np.ndarray
    auxiliary: MaxEntState


def ground_mixture(state, rank: int):
    """Equal mixture of the ``rank`` dominant eigenvectors of ``rho'``."""
    rho = state.rho if isinstance(state, MaxEntState) else np.asarray(state)
    lam, vec = np.linalg.eigh(rho)
    top = vec[:, ::-1][:, :rank]
    return top @ top.conj().T / rank, top


def ground_cluster_size(eigenvalues, start: int) -> int:
    """Smallest ``k >= start`` whose low cluster is isolated by a wide gap.

    The lowest ``k`` levels count as one flat-face ground space when the gap
    above them exceeds twice their spread.
    """
    w = np.sort(np.asarray(eigenvalues, dtype=float))
    for k in range(max(start, 1), len(w)):
        if w[k] - w[k - 1] > 2 * (w[k - 1] - w[0]):
            return k
    return len(w)


def witness_degenerate(
    instance: CompatibilityInstance,
    state: MaxEntState,
    config: SolverConfig | None = None,
    eta: float = DEFAULT_ETA,
    max_refinements: int = 12,
    return_fit: bool = False,
):
    """Witness from the MaxEnt refit of the flat-face mixture.

    The auxiliary instance keeps the observables and replaces the targets by
    the expectations of the equal mixture over the ``r`` dominant
    eigenvectors, where ``r`` is the numerical rank widened to the full
    low-energy cluster of the fitted Hamiltonian (``ground_cluster_size``).
    Those eigenvectors are only approximately ground states
    when the fitted coefficients are finite, so the refit is repeated on the
    ``r`` lowest eigenvectors of the previous refit's Hamiltonian until every
    mixture component lies on the hyperplane ``w . x = E_g``.
    """
    config = (config or SolverConfig()).replace(objective="squared")
    rank = rank_profile(state, eta).numerical_rank
    h = instance.stack.combine(state.coefficients)
    w, v = np.linalg.eigh(h)
    rank = ground_cluster_size(w, rank)
    top = v[:, :rank]
    best = None
    for _ in range(max_refinements + 1):
        mix = top @ top.conj().T / rank
        aux = solve(instance.with_targets(instance.stack.expectations(mix)), config)
        if not aux.converged:
            if best is not None:
                break
            raise InconclusiveWitnessError(
                f"auxiliary fit of the rank-{rank} ground mixture did not converge (loss {aux.loss:.3g})"
            )
        wit = assemble_witness(instance, aux.coefficients)
        h = instance.stack.combine(aux.coefficients)
        energies = np.einsum("ik,ij,jk->k", top.conj(), h, top).real
        rel = float(np.abs(energies - wit.ground_energy).max()) / (1 + abs(wit.ground_energy))
        if best is not None and best[0] <= TANGENCY_RTOL and rel > 0.5 * best[0]:
            # tangent already; stop once refits no longer halve the residual
            if rel < best[0]:
                best = (rel, wit, DegenerateFit(mix, top, aux))
            break
        if best is None or rel < best[0]:
            best = (rel, wit, DegenerateFit(mix, top, aux))
        top = np.linalg.eigh(h)[1][:, :rank]
    rel, wit, fit = best
    if rel > TANGENCY_RTOL:
        raise InconclusiveWitnessError(
            f"ground-mixture refits did not reach a supporting hyperplane (residual {rel:.3g})"
        )
    if not wit.certified:
        raise InconclusiveWitnessError(f"witness margin {wit.margin:.3g} is not positive")
    return (wit, fit) if return_fit else wit


def find_witness(
    instance: CompatibilityInstance,
    state: MaxEntState,
    config: SolverConfig | None = None,
    eta: float = DEFAULT_ETA,
) -> Witness:
    """Route a stalled solve to the unique-ground-state or degenerate construction."""
    if rank_profile(state, eta).numerical_rank == 1:
        return witness_from_boundary(instance, state)
    return witness_degenerate(instance, state, config, eta)


def direction_witness(instance: CompatibilityInstance, state: MaxEntState) -> Witness:
    """Best of the fitted coefficients and the residual ``a' - a`` as hyperplane normals.

    Used when the solve stalled short of the boundary (for example with
    coefficients pinned at the cap); the result still has to pass
    ``verify_witness``.
    """
    best = None
    for w in (np.asarray(state.coefficients, dtype=float), state.achieved - instance.targets):
        if not np.any(w):
            continue
        cand = assemble_witness(instance, w).normalized()
        if best is None or cand.margin > best.margin:
            best = cand
    if best is None:
        raise InconclusiveWitnessError("no nonzero direction to test")
    return best


def range_witness(instance: CompatibilityInstance, index: int, lo: float, hi: float) -> Witness:
    """Single-observable witness for a target outside ``[lambda_min, lambda_max]``."""
    w = np.zeros(instance.m)
    w[index] = 1.0 if instance.targets[index] < lo else -1.0
    return assemble_witness(instance, w)


@dataclass(frozen=True)
class WitnessReport:
    coefficients: np.ndarray
    ground_energy: float
    target_energy: float
    margin: float
    certified: bool
    ground_space_dim: int
    gap: float

    def to_json(self) -> dict:
        return {
            "coefficients": [float(x) for x in self.coefficients],
            "ground_energy": self.ground_energy,
            "target_energy": self.target_energy,
            "margin": self.margin,
            "certified": self.certified,
            "ground_space_dim": self.ground_space_dim,
            "gap": self.gap,
        }


def verify_witness(instance: CompatibilityInstance, w, degeneracy_rtol: float = 1e-6) -> WitnessReport:
    """Recompute ``E_g`` and ``w . a`` from scratch.

    ``w`` may be a ``Witness`` or a bare coefficient vector.
    """
    coeffs = np.asarray(w.coefficients if isinstance(w, Witness) else w, dtype=float).ravel()
    spec = np.linalg.eigvalsh(instance.stack.combine(coeffs))
    e_g = float(spec[0])
    target = float(coeffs @ instance.targets)
    scale = max(1.0, float(np.abs(spec).max()))
    ground = spec <= e_g + degeneracy_rtol * scale
    dim = int(ground.sum())
    gap = float(spec[dim] - e_g) if dim < len(spec) else 0.0
    margin = e_g - target
    return WitnessReport(
        coeffs,
        e_g,
        target,
        margin,
        bool(margin > certificate_tolerance(e_g, target)),
        dim,
        gap,
    )
