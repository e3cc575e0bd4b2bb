import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxent_compat.errors import InvalidInstanceError
from maxent_compat.marginal import to_compatibility
from maxent_compat.operators import Observable, gibbs_state, partial_trace, trace_distance
from maxent_compat.qite import (
    LocalityWarning,
    QiteConfig,
    prepare_thermal,
    qite_step,
    term_support,
    tfd_initial,
    unitary_support,
)
from maxent_compat.solver import solve

from helpers import PAIRS_3, XX, ZI, ghz_vector, pure_marginals, rand_herm, two_local_hamiltonian


def exact_step(psi, h, dtau):
    """Normalized ``exp(-dtau h) psi`` on the doubled register."""
    w, v = np.linalg.eigh(np.kron(h, np.eye(h.shape[0])))
    out = v @ (np.exp(-dtau * w) * (v.conj().T @ psi))
    return out / np.linalg.norm(out)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_tfd_reduces_to_maximally_mixed(n):
    psi = tfd_initial(n)
    assert np.linalg.norm(psi) == pytest.approx(1)
    rho = partial_trace(np.outer(psi, psi.conj()), range(1, n + 1), 2 * n)
    assert np.allclose(rho, np.eye(1 << n) / (1 << n))


def test_unitary_support_order():
    assert unitary_support((1,), 2, 4) == (1, 3, 2, 4)
    assert unitary_support((2, 3), 4, 4) == (2, 6, 3, 7)
    # neighbours are added by distance to the term
    assert unitary_support((2,), 3, 6) == (2, 5, 1, 4, 3, 6)
    assert unitary_support((1,), 1, 8) == (1, 2)
    with pytest.warns(LocalityWarning):
        unitary_support((1, 2), 2, 2)


def test_term_support_from_dense():
    assert term_support(ZI) == (1,)
    assert term_support(Observable.from_matrix(np.kron(np.eye(2), rand_herm(np.random.default_rng(0), 2)))) == (2,)


def test_zero_term_is_a_no_op():
    psi = tfd_initial(2)
    out, exp = qite_step(psi, np.zeros((4, 4)), QiteConfig())
    assert np.array_equal(out, psi)
    assert exp.norm == 0


def test_single_step_fidelity():
    z = Observable.pauli("Z").matrix
    psi = tfd_initial(1)
    out, _ = qite_step(psi, z, QiteConfig())
    fid = abs(np.vdot(exact_step(psi, z, 0.05), out)) ** 2
    assert fid >= 1 - 1e-4


def test_real_eigenstate_needs_no_rotation():
    # imaginary-time evolution leaves an eigenstate fixed, so b = 0
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1
    out, exp = qite_step(psi, Observable.pauli("Z").matrix, QiteConfig())
    assert np.allclose(exp.coefficients, 0, atol=1e-12)
    assert np.allclose(out, psi)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_step_preserves_norm(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    out, _ = qite_step(psi, rand_herm(rng, 4), QiteConfig())
    assert np.linalg.norm(out) == pytest.approx(1, abs=1e-10)


def test_zero_hamiltonian_gives_maximally_mixed():
    run = prepare_thermal([np.zeros((4, 4))], verify=True)
    assert np.allclose(run.rho, np.eye(4) / 4)
    assert run.trace_distance == pytest.approx(0, abs=1e-12)


def test_two_qubit_golden_hamiltonian():
    # the unnormalized reference coefficient on XX + ZI
    terms = [-2.4929 * XX.matrix, -2.4929 * ZI.matrix]
    run = prepare_thermal(terms, verify=True)
    assert run.trace_distance <= 0.05
    assert len(run.step_norms()) == 10 and len(run.step_norms()[0]) == 2


@pytest.mark.parametrize("seed", range(5))
def test_random_two_local_schedule(seed):
    terms = two_local_hamiltonian(seed)
    coarse = prepare_thermal(terms, QiteConfig(dtau=0.05), verify=True)
    fine = prepare_thermal(terms, QiteConfig(dtau=0.025), verify=True)
    assert coarse.trace_distance <= 0.05
    assert fine.trace_distance <= coarse.trace_distance


def test_small_domain_degrades_and_warns():
    terms = two_local_hamiltonian(0)
    with pytest.warns(LocalityWarning):
        small = prepare_thermal(terms, QiteConfig(D=2), verify=True)
    full = prepare_thermal(terms, QiteConfig(D=4), verify=True)
    assert small.trace_distance > full.trace_distance


def test_beta_rescales_the_target():
    terms = two_local_hamiltonian(1)
    run = prepare_thermal(terms, QiteConfig(beta=0.5, dtau=0.025), verify=True)
    assert np.allclose(run.exact, gibbs_state(0.5 * sum(t.matrix for t in terms)))
    assert run.trace_distance <= 0.05


def test_config_validation():
    assert QiteConfig().steps == 10
    for bad in ({"beta": 0}, {"dtau": -1}, {"D": 0}, {"dtau": 0.03}):
        with pytest.raises(InvalidInstanceError):
            QiteConfig(**bad)
    with pytest.raises(InvalidInstanceError):
        qite_step(np.ones(8) / np.sqrt(8), np.eye(2), QiteConfig())


@pytest.mark.slow
def test_ghz_fitted_hamiltonian_on_fine_schedule():
    red = to_compatibility(pure_marginals(ghz_vector(), PAIRS_3))
    s = solve(red.instance)
    terms = [c * o.matrix for c, o in zip(s.coefficients, red.instance.observables)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LocalityWarning)
        run = prepare_thermal(terms, QiteConfig(dtau=0.005), verify=True)
    assert run.trace_distance <= 0.05
