"""Shared instance builders for the test suite."""

import numpy as np

from maxent_compat.marginal import MarginalInstance
from maxent_compat.operators import Observable, embed_local, partial_trace
from maxent_compat.solver import CompatibilityInstance

XX = Observable.pauli("XX")
ZI = Observable.pauli("ZI")

# reference maximum-entropy state for targets (0.5, 0.5)
RHO1_REF = np.array(
    [
        [0.3750, 0, 0, 0.1250],
        [0, 0.3750, 0.1250, 0],
        [0, 0.1250, 0.1250, 0],
        [0.1250, 0, 0, 0.1250],
    ]
)
# reference coefficients quoted in a Pauli normalization four times the standard one
H1_COEF = -2.4929 / 4
H2_COEF = -28.7177 / 4

# reference 4-qubit chain reduced states (rounded to four digits)
R12 = np.array([
    [0.2408, 0.1717 - 0.1312j, -0.1304 - 0.0459j, 0.0306 - 0.0962j],
    [0.1717 + 0.1312j, 0.3359, -0.0536 - 0.1599j, 0.1028 - 0.0836j],
    [-0.1304 + 0.0459j, -0.0536 + 0.1599j, 0.3336, 0.0695 + 0.1169j],
    [0.0306 + 0.0962j, 0.1028 + 0.0836j, 0.0695 - 0.1169j, 0.0896],
])
R23 = np.array([
    [0.2534, -0.0662 + 0.0248j, 0.1068 - 0.0440j, 0.0746 - 0.1027j],
    [-0.0662 - 0.0248j, 0.2168, 0.0307 - 0.0383j, -0.1085 + 0.2051j],
    [0.1068 + 0.0440j, 0.0307 + 0.0383j, 0.2114, 0.0309 - 0.0164j],
    [0.0746 + 0.1027j, -0.1085 - 0.2051j, 0.0309 + 0.0164j, 0.3183],
])
R34 = np.array([
    [0.1175, -0.0402 - 0.0453j, -0.0265 + 0.0143j, 0.0747 + 0.0688j],
    [-0.0402 + 0.0453j, 0.5037, -0.1095 + 0.0187j, -0.0620 - 0.1296j],
    [-0.0265 - 0.0143j, -0.1095 - 0.0187j, 0.0883, -0.0247 - 0.0074j],
    [0.0747 - 0.0688j, -0.0620 + 0.1296j, -0.0247 + 0.0074j, 0.2905],
])

# 3-qubit local pair (seed 0): flat faces from a K = 10^4 sweep with an
# independent scipy eigensolver; the top face of A2 runs between these points
FACE_THETAS = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)
TOP_FACE = ((-0.476108822941, 1.0), (0.154061997851, 1.0))

PAIRS_3 = [(1, 2), (1, 3), (2, 3)]
CHAIN_4 = [(1, 2), (2, 3), (3, 4)]


def two_qubit_instance(targets):
    return CompatibilityInstance(2, [XX, ZI], targets)


def rand_herm(rng, d):
    """Random Hermitian matrix with spectral radius 1."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (g + g.conj().T) / 2
    return h / np.abs(np.linalg.eigvalsh(h)).max()


def local_pair(seed=0):
    rng = np.random.default_rng(seed)
    a1 = Observable.from_matrix(embed_local(rand_herm(rng, 4), [1, 2], 3))
    a2 = Observable.from_matrix(embed_local(rand_herm(rng, 4), [2, 3], 3))
    return a1, a2


def random_state(rng, d, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def w_vector():
    psi = np.zeros(8)
    psi[[1, 2, 4]] = 1 / np.sqrt(3)
    return psi


def ghz_vector():
    psi = np.zeros(8)
    psi[[0, 7]] = 1 / np.sqrt(2)
    return psi


def pure_marginals(psi, subsystems):
    rho = np.outer(psi, np.conj(psi))
    return MarginalInstance.from_global_state(rho, subsystems)


def bell_chain():
    """Each link of a 4-qubit chain in the singlet state (monogamy violation)."""
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    rho = np.outer(singlet, singlet)
    return MarginalInstance(4, [(q, rho) for q in CHAIN_4])


def reference_chain(projection_tol=1e-3):
    return MarginalInstance(4, list(zip(CHAIN_4, (R12, R23, R34))), projection_tol=projection_tol)


def chain_instance_with_repeats(mi):
    """Every local string of every part, repeated strings kept once per part."""
    from maxent_compat.operators import expectation, pauli_strings

    obs, targets = [], []
    for part in mi.parts:
        for local in pauli_strings(len(part.qubits)):
            letters = ["I"] * mi.n_qubits
            for p, q in zip(local, part.qubits):
                letters[q - 1] = p
            obs.append(Observable.pauli("".join(letters)))
            targets.append(expectation(part.rho, Observable.pauli(local)))
    return CompatibilityInstance(mi.n_qubits, obs, targets)


def reduced(rho, keep):
    return partial_trace(rho, keep)


def two_local_hamiltonian(seed):
    """Random 2-qubit H: one bond term and two fields, each of unit norm."""
    rng = np.random.default_rng(seed)
    return [
        Observable.from_matrix(embed_local(rand_herm(rng, 4), [1, 2], 2)),
        Observable.from_matrix(embed_local(rand_herm(rng, 2), [1], 2)),
        Observable.from_matrix(embed_local(rand_herm(rng, 2), [2], 2)),
    ]
