import numpy as np
import pytest

from maxent_compat.errors import InvalidInstanceError
from maxent_compat.marginal import (
    MarginalInstance,
    OverlapInconsistency,
    check_overlaps,
    localize_witness,
    overlap_witness,
    project_state,
    recovered_marginals,
    to_compatibility,
)
from maxent_compat.operators import partial_trace, state_fidelity, trace_distance
from maxent_compat.solver import solve
from maxent_compat.witness import find_witness, rank_profile, verify_witness

from helpers import PAIRS_3, R12, R23, R34, bell_chain, ghz_vector, reference_chain, pure_marginals, random_state, w_vector


@pytest.fixture(scope="module")
def w_solution():
    red = to_compatibility(pure_marginals(w_vector(), PAIRS_3))
    return red, solve(red.instance)


@pytest.fixture(scope="module")
def bell_solution():
    red = to_compatibility(bell_chain())
    s = solve(red.instance)
    return red, s, find_witness(red.instance, s)


def test_project_state():
    rho = np.diag([0.5 + 5e-7, 0.5 - 5e-7 - 1e-7])
    out = project_state(rho)
    assert np.isclose(np.trace(out), 1)
    with pytest.raises(InvalidInstanceError):
        project_state(np.diag([1.1, -0.1]))
    with pytest.raises(InvalidInstanceError):
        project_state(np.array([[0.5, 0.1], [0.0, 0.5]]))


def test_rounded_states_need_relaxed_projection():
    # traces are 0.9999 after rounding to four digits
    with pytest.raises(InvalidInstanceError, match="trace"):
        MarginalInstance(2, [((1, 2), R12)])
    mi = reference_chain(projection_tol=1e-3)
    for p in mi.parts:
        assert np.isclose(np.trace(p.rho).real, 1)


def test_instance_validation():
    with pytest.raises(InvalidInstanceError):
        MarginalInstance(2, [((1, 3), np.eye(4) / 4)])
    with pytest.raises(InvalidInstanceError):
        MarginalInstance(2, [((1, 1), np.eye(4) / 4)])
    with pytest.raises(InvalidInstanceError):
        MarginalInstance(2, [((1, 2), np.eye(2) / 2)])


def test_parts_stored_in_ascending_order():
    rho = random_state(np.random.default_rng(0), 8)
    mi = MarginalInstance(3, [((3, 1), partial_trace(rho, [1, 3]).reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4))])
    assert mi.parts[0].qubits == (1, 3)
    assert np.allclose(mi.parts[0].rho, partial_trace(rho, [1, 3]))


def test_reduction_counts_and_targets():
    mi = pure_marginals(w_vector(), PAIRS_3)
    red = to_compatibility(mi)
    # 3 single-qubit strings x 3 qubits + 9 two-body strings x 3 pairs
    assert red.instance.m == 36
    assert len({lab.pauli for lab in red.labels}) == 36
    # each target is the expectation in the global W state
    rho = np.outer(w_vector(), w_vector())
    for lab, t in zip(red.labels, red.instance.targets):
        assert t == pytest.approx(np.trace(rho @ red.instance.observables[red.labels.index(lab)].matrix).real)


def test_w_marginals_recovered(w_solution):
    red, s = w_solution
    assert s.converged
    assert rank_profile(s).numerical_rank == 1
    assert state_fidelity(s.rho, w_vector()) >= 0.99
    assert max(recovered_marginals(s.rho, red.marginal)) < 1e-3


def test_ghz_marginals_give_degenerate_mixture():
    red = to_compatibility(pure_marginals(ghz_vector(), PAIRS_3))
    s = solve(red.instance)
    assert s.converged
    target = np.zeros((8, 8))
    target[0, 0] = target[7, 7] = 0.5
    assert trace_distance(s.rho, target) <= 1e-2
    h = red.instance.stack.combine(s.coefficients)
    e000, e111 = h[0, 0].real, h[7, 7].real
    assert abs(e000 - e111) <= 1e-3 * max(abs(e000), abs(e111))


def test_overlap_check():
    assert check_overlaps(pure_marginals(w_vector(), PAIRS_3)) == []
    bad = MarginalInstance(3, [((1, 2), np.diag([1.0, 0, 0, 0])), ((2, 3), np.diag([0, 0, 1.0, 0]))])
    v = check_overlaps(bad)
    assert len(v) == 1 and v[0].shared == (2,) and v[0].distance == pytest.approx(1)
    with pytest.raises(OverlapInconsistency):
        to_compatibility(bad)


def test_overlap_witness_certifies_inconsistency():
    bad = MarginalInstance(3, [((1, 2), np.diag([1.0, 0, 0, 0])), ((2, 3), np.diag([0, 0, 1.0, 0]))])
    loc = overlap_witness(bad, check_overlaps(bad)[0])
    assert loc.ground_energy == 0
    assert loc.total_energy == pytest.approx(-2)
    assert loc.certified


def test_bell_chain_monogamy_witness(bell_solution):
    red, s, w = bell_solution
    assert not s.converged
    rep = verify_witness(red.instance, w)
    assert rep.certified
    nw = w.normalized()
    assert nw.margin >= 0.1 * abs(nw.ground_energy)
    loc = localize_witness(w, red)
    assert loc.total_energy < loc.ground_energy
    assert loc.total_energy == pytest.approx(w.target_energy)
    assert loc.certified


def test_localized_energy_independent_of_attribution(bell_solution):
    red, _, w = bell_solution
    parts = red.marginal.parts
    # single-qubit strings on qubit 2 may move from part 0 to part 1
    alt = [
        1 if lab.support and set(lab.support) <= set(parts[1].qubits) else lab.owner
        for lab in red.labels
    ]
    a = localize_witness(w, red)
    b = localize_witness(w, red, alt)
    assert alt != [lab.owner for lab in red.labels]
    assert a.total_energy == pytest.approx(b.total_energy)
    with pytest.raises(InvalidInstanceError):
        localize_witness(w, red, [2] * len(red.labels))


def test_reference_chain_overlaps_disagree():
    mi = reference_chain()
    v = check_overlaps(mi)
    assert {(x.first, x.second) for x in v} == {(0, 1), (1, 2)}
    assert all(x.distance > 0.1 for x in v)


@pytest.mark.slow
def test_reference_chain_is_incompatible():
    mi = MarginalInstance(4, list(zip([(1, 2), (2, 3), (3, 4)], (R12, R23, R34))), projection_tol=1e-3)
    red = to_compatibility(mi, check=False)
    s = solve(red.instance)
    assert not s.converged
    assert rank_profile(s).numerical_rank >= 2
