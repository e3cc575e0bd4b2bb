import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxent_compat.errors import InvalidInstanceError, NumericalBreakdownError
from maxent_compat.operators import Observable, expectation, gibbs_state, pauli_strings
from maxent_compat.solver import (
    CompatibilityInstance,
    SolverConfig,
    _Run,
    gibbs_for,
    gradient_fd,
    initial_points,
    loss,
    solve,
    squared_loss,
)

from helpers import H1_COEF, H2_COEF, RHO1_REF, XX, ZI, random_state, two_qubit_instance


def test_loss_at_reference_coefficients():
    inst = two_qubit_instance([0.5, 0.5])
    assert loss(inst, [H1_COEF, H1_COEF]) <= 1e-4
    assert loss(inst, [0, 0]) == pytest.approx(0.5)


def test_loss_at_infeasible_optimum_direction():
    # (2,2) vs the nearest circle point (1/sqrt2, 1/sqrt2)
    inst = two_qubit_instance([2, 2])
    assert loss(inst, [H2_COEF, H2_COEF]) == pytest.approx(2 * (2 - 2**-0.5) ** 2, rel=1e-6)


def test_gradient_matches_analytic_oracle():
    # for H = cZ the Gibbs expectation of Z is -tanh(c)
    inst = CompatibilityInstance(1, [Observable.pauli("Z")], [0.3])
    c = 0.4
    g_exact = 2 * (-np.tanh(c) - 0.3) * (-(1 - np.tanh(c) ** 2))
    assert gradient_fd(inst, [c])[0] == pytest.approx(g_exact, rel=1e-8)


def test_feasible_golden_case():
    s = solve(two_qubit_instance([0.5, 0.5]))
    assert s.converged and s.loss <= 1e-8
    assert np.abs(s.rho - RHO1_REF).max() < 2e-2
    assert np.allclose(s.coefficients, [H1_COEF, H1_COEF], atol=1e-3)
    assert not s.cap_saturated


def test_infeasible_golden_case():
    s = solve(two_qubit_instance([2, 2]))
    assert not s.converged
    assert np.allclose(s.achieved, [2**-0.5, 2**-0.5], atol=2e-2)
    assert s.loss == pytest.approx(2 * (2 - 2**-0.5) ** 2, rel=1e-4)
    # direction parallel to (-1, -1)
    c = s.coefficients / np.linalg.norm(s.coefficients)
    assert c @ (-np.ones(2) / np.sqrt(2)) > np.cos(np.radians(5))


def test_out_of_box_corner():
    s = solve(two_qubit_instance([0, 2]))
    assert not s.converged
    assert np.allclose(s.achieved, [0, 1], atol=2e-2)


def test_state_invariants():
    inst = two_qubit_instance([0.3, -0.2])
    s = solve(inst)
    assert np.isclose(np.trace(s.rho).real, 1)
    assert np.linalg.eigvalsh(s.rho).min() > -1e-12
    assert np.allclose(s.rho, gibbs_state(inst.stack.combine(s.coefficients)))
    assert s.loss == pytest.approx(float(squared_loss(inst.targets, s.achieved)))
    assert np.all(np.abs(s.coefficients) <= 50)


def test_history_non_increasing():
    for targets in ([0.5, 0.5], [2, 2], [0.9, -0.1]):
        h = np.array(solve(two_qubit_instance(targets)).history)
        assert np.all(np.diff(h) <= 1e-15)


@pytest.mark.parametrize("optimizer", ["quasi-newton", "gradient-descent"])
def test_optimizers_reach_the_same_state(optimizer):
    s = solve(two_qubit_instance([0.5, 0.5]), SolverConfig(optimizer=optimizer, max_iters=20000))
    assert s.converged
    assert np.abs(s.rho - RHO1_REF).max() < 2e-2


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_random_feasible_targets_are_matched(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    strings = pauli_strings(n)
    picks = rng.choice(len(strings), size=min(len(strings), int(rng.integers(1, 6))), replace=False)
    obs = [Observable.pauli(strings[k]) for k in picks]
    rho = random_state(rng, 1 << n)
    targets = [expectation(rho, o) for o in obs]
    cfg = SolverConfig()
    s = solve(CompatibilityInstance(n, obs, targets), cfg)
    assert s.converged
    assert np.abs(s.achieved - targets).max() <= np.sqrt(cfg.epsilon)


@settings(max_examples=10, deadline=None)
@given(st.permutations([0, 1, 2]), st.integers(0, 1000))
def test_loss_permutation_invariance(perm, seed):
    rng = np.random.default_rng(seed)
    obs = [XX, ZI, Observable.pauli("YZ")]
    t = rng.uniform(-1, 1, 3)
    c = rng.normal(size=3)
    a = loss(CompatibilityInstance(2, obs, t), c)
    b = loss(CompatibilityInstance(2, [obs[k] for k in perm], t[list(perm)]), c[list(perm)])
    assert a == pytest.approx(b, rel=1e-12)


def test_seeded_solve_is_bit_stable():
    inst = two_qubit_instance([0.2, 0.7])
    a, b = solve(inst, SolverConfig(seed=7)), solve(inst, SolverConfig(seed=7))
    assert np.array_equal(a.coefficients, b.coefficients)
    assert a.iterations == b.iterations and a.restart == b.restart


def test_initial_points_are_seeded_and_bounded():
    p = initial_points(4, SolverConfig(seed=3, restarts=6))
    assert p.shape == (6, 4)
    assert np.all(np.abs(p) <= 1)
    assert np.array_equal(p, initial_points(4, SolverConfig(seed=3, restarts=6)))


def test_instance_validation():
    with pytest.raises(InvalidInstanceError):
        CompatibilityInstance(2, [XX], [1, 2])
    with pytest.raises(InvalidInstanceError):
        CompatibilityInstance(2, [Observable.pauli("X")], [0])
    with pytest.raises(InvalidInstanceError):
        CompatibilityInstance(2, [XX], [np.nan])
    with pytest.raises(InvalidInstanceError):
        loss(two_qubit_instance([0, 0]), [1, 2, 3])


def test_config_validation():
    for bad in ({"epsilon": 0}, {"max_iters": 0}, {"optimizer": "newton"}, {"objective": "kl"}):
        with pytest.raises(InvalidInstanceError):
            SolverConfig(**bad)


def test_cross_entropy_needs_probability_targets():
    with pytest.raises(InvalidInstanceError):
        solve(two_qubit_instance([0.7, 0.6]), SolverConfig(objective="cross-entropy"))


def test_out_of_range_detection():
    assert two_qubit_instance([2, 0.5]).out_of_range() == [(0, -1.0, 1.0)]
    assert two_qubit_instance([0.5, 0.5]).out_of_range() == []


def test_nan_objective_names_the_iterate():
    inst = two_qubit_instance([0.5, 0.5])
    runner = _Run(inst, SolverConfig(), lambda t, a: np.full(len(a), np.nan), 0.0)
    with pytest.raises(NumericalBreakdownError, match="iterate"):
        runner.run(np.zeros(2))


def test_gibbs_for_spectrum():
    rho, w = gibbs_for(two_qubit_instance([0, 0]), [H2_COEF, H2_COEF])
    assert np.allclose(w, [-10.1532, -10.1532, 10.1532, 10.1532], atol=1e-3)
    assert np.linalg.matrix_rank(rho, tol=1e-6) == 2
