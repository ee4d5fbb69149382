import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import unitary_group

from basiscycle.circuit import circuit_unitary
from basiscycle.core import PAULI_X, DiagonalBlockOperator, distance_up_to_global_phase, rz
from basiscycle.cr import CrParams, cr_unitary, so3_matrix, unitary_so3_fit
from basiscycle.cycling import (CycleSpec, RefocusPlan, build_refocused_sequence, build_unprotected_sequence,
                                closed_form_cycle, compose_cycle, control_blocks, cycle_global_phase,
                                dd_decouple_check, ecr_compose, ideal_refocused_target, off_diagonal_weight,
                                qubit_echo_refocus, refocus_intervals, verify_refocusing)
from basiscycle.verification import random_block_operator

DELTAS = np.linspace(-0.3, 0.3, 13)


def identity_block(d, env=2):
    return DiagonalBlockOperator(d, np.zeros(d), tuple(np.eye(env) for _ in range(d)))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_trivial_cycle_is_global_phase(d):
    spec = CycleSpec(d, tuple(identity_block(d) for _ in range(d)))
    assert distance_up_to_global_phase(compose_cycle(spec), np.eye(2 * d)) < 1e-12
    closed = closed_form_cycle(spec)
    assert np.allclose(closed.phases, 0) and all(np.allclose(b, np.eye(2)) for b in closed.blocks)
    assert np.allclose(compose_cycle(spec).matrix, cycle_global_phase(d) * np.eye(2 * d))


def test_qubit_echo_phase_pattern(rng):
    p0, p1 = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
    spec = CycleSpec(2, (DiagonalBlockOperator(2, p0, (np.eye(1),) * 2), DiagonalBlockOperator(2, p1, (np.eye(1),) * 2)))
    m = compose_cycle(spec).matrix / cycle_global_phase(2)
    assert np.allclose(np.diag(m), np.exp(1j * np.array([p1[1] + p0[0], p1[0] + p0[1]])))


def test_single_phase_lands_on_one_level():
    theta = 0.77
    v0 = DiagonalBlockOperator(3, [0.0, theta, 0.0], (np.eye(1),) * 3)
    spec = CycleSpec(3, (v0, identity_block(3, 1), identity_block(3, 1)))
    assert np.allclose(closed_form_cycle(spec).phases, [0.0, theta, 0.0])


@pytest.mark.parametrize("d", [2, 3, 4])
def test_closed_form_matches_dense(d, rng):
    for _ in range(25):
        spec = CycleSpec(d, tuple(random_block_operator(rng, d) for _ in range(d)))
        dense = compose_cycle(spec)
        closed = closed_form_cycle(spec).to_operator()
        assert distance_up_to_global_phase(dense, closed) < 1e-10
        assert off_diagonal_weight(dense, d) < 1e-10


def test_identical_blocks_factorize(rng):
    d = 3
    vs = []
    for _ in range(d):
        b = unitary_group.rvs(2, random_state=rng)
        vs.append(DiagonalBlockOperator(d, rng.uniform(-1, 1, d), (b,) * d))
    closed = closed_form_cycle(CycleSpec(d, tuple(vs)))
    assert all(np.allclose(b, closed.blocks[0]) for b in closed.blocks)


def test_cycle_spec_validation():
    with pytest.raises(ValueError):
        CycleSpec(3, (identity_block(3),) * 2)
    with pytest.raises(ValueError):
        CycleSpec(3, (identity_block(3),) * 3, insertion_times=(0, 2, 1))


def test_refocus_zero_alpha():
    plan = refocus_intervals((0, 0, 0), 5)
    assert (plan.tau1, plan.tau2, plan.residual_phase_coeff) == (5, 5, -15)


@given(st.integers(0, 20), st.integers(0, 20), st.integers(1, 10))
def test_refocus_symmetric_alpha(a, b, m):
    plan = refocus_intervals((a, b, a), m)
    assert plan.tau1 == plan.tau2 >= m


def test_refocus_condition_example():
    plan = refocus_intervals((1, 2, 3), 2)
    assert plan.tau2 - 3 == plan.tau1 - 1
    lower = refocus_intervals((1, 2, 3), 2, sign=-1)
    assert lower.tau2 - 3 == lower.tau1 - 2


def test_refocus_rejects_off_grid_and_bad_plans():
    with pytest.raises(ValueError):
        refocus_intervals((0, 0, 0.5), 2)
    assert refocus_intervals((0, 0, 0.5), 2, grid=0).tau2 == pytest.approx(2.5)
    with pytest.raises(ValueError):
        RefocusPlan(3, 3, (0, 0, 1), -9)
    with pytest.raises(ValueError):
        refocus_intervals((0, 0, 0), -1)


@given(st.tuples(st.integers(0, 12), st.integers(0, 12), st.integers(0, 12)), st.sampled_from([1, -1]),
       st.integers(0, 2 ** 32 - 1))
def test_refocused_sequence_factors_out_p2(alpha, sign, seed):
    rng = np.random.default_rng(seed)
    u = random_block_operator(rng, 3)
    plan = refocus_intervals(alpha, 4, sign=sign)
    circ = build_refocused_sequence(u, plan)
    ideal = ideal_refocused_target(u, sign)
    assert distance_up_to_global_phase(circuit_unitary(circ), ideal) < 1e-12
    assert verify_refocusing(circ, ideal, DELTAS) < 1e-9


def test_verify_at_zero_detuning_only(rng):
    u = random_block_operator(rng, 3)
    plan = refocus_intervals((1, 4, 2), 4)
    circ = build_unprotected_sequence(u, plan)
    assert verify_refocusing(circ, ideal_refocused_target(u), [0.0]) < 1e-12
    assert verify_refocusing(circ, ideal_refocused_target(u), DELTAS) > 1e-2


def test_misplanned_intervals_degrade_with_detuning(rng):
    u = random_block_operator(rng, 3)
    plan = refocus_intervals((0, 3, 6), 4)
    circ = build_refocused_sequence(u, plan)
    # shift the last X+ later so the scheduling condition fails
    last = max(g.start for g in circ.gates if g.tag == "cycle")
    circ.gates = [g.shifted(3.0) if g.tag == "cycle" and g.start == last else g for g in circ.gates]
    ideal = ideal_refocused_target(u)
    errs = [verify_refocusing(circ, ideal, [d]) for d in (0.01, 0.05, 0.2)]
    assert errs[0] < errs[1] < errs[2]


def test_sequence_rejects_short_plan(rng):
    u = random_block_operator(rng, 3)
    with pytest.raises(ValueError):
        build_refocused_sequence(u, refocus_intervals((0, 0, 0), 1))
    with pytest.raises(ValueError):
        build_refocused_sequence(u, refocus_intervals((0, 0, 0), 4), sign=-1)


@given(st.floats(0, 20), st.floats(0, 20), st.floats(-0.5, 0.5))
def test_qubit_echo_is_identity(alpha, t0, delta):
    assert np.allclose(qubit_echo_refocus(0.0, t0, 0.0).matrix, np.eye(2))
    assert distance_up_to_global_phase(qubit_echo_refocus(alpha, t0, delta), np.eye(2)) < 1e-12


def test_qubit_echo_wrong_interval_leaves_z():
    alpha, wrong, delta = 5.0, 3.0, 0.11
    u = qubit_echo_refocus(alpha, 2.0, delta, interval=wrong)
    expected = np.diag(np.exp(-1j * delta * (alpha - wrong) * np.array([1, -1])))
    assert distance_up_to_global_phase(u, expected) < 1e-12
    assert distance_up_to_global_phase(u, np.eye(2)) > 1e-3


def test_dd_equal_commuting_blocks(rng):
    v = unitary_group.rvs(2, random_state=rng)
    u = DiagonalBlockOperator(2, [0.3, -0.3], (v, v))
    assert dd_decouple_check(u, u).is_decoupled


def test_dd_swap_condition(rng):
    a, b, c = (unitary_group.rvs(2, random_state=rng) for _ in range(3))
    u0 = DiagonalBlockOperator(2, rng.uniform(-1, 1, 2), (a, b))
    # u1_1 u0_0 = u1_0 u0_1  <=>  u1_1 = c b a^dag with u1_0 = c
    u1 = DiagonalBlockOperator(2, rng.uniform(-1, 1, 2), (c, c @ b @ a.conj().T))
    rep = dd_decouple_check(u0, u1)
    assert rep.is_decoupled and rep.residual < 1e-9
    assert off_diagonal_weight(rep.result.to_operator(), 2) < 1e-12


def test_dd_random_blocks_not_decoupled(rng):
    u0, u1 = random_block_operator(rng, 2), random_block_operator(rng, 2)
    rep = dd_decouple_check(u0, u1)
    assert not rep.is_decoupled and rep.residual > 0


def test_ecr_trivial_is_identity():
    p = CrParams((0.0, 0.0), (0.0, 0.0))
    assert distance_up_to_global_phase(ecr_compose(cr_unitary(p), cr_unitary(p.flipped())), np.eye(4)) < 1e-12


def test_ecr_opposite_x_rotations(rng):
    for _ in range(10):
        phi = tuple(rng.uniform(-1, 1, 2))
        psi = tuple(rng.uniform(-1.2, 1.2, 2))
        p = CrParams(phi, psi)
        blocks = control_blocks(ecr_compose(cr_unitary(p), cr_unitary(p.flipped())), 2)
        fits = [unitary_so3_fit(so3_matrix(b)) for b in blocks]
        angle = psi[0] - psi[1]
        assert fits[0].psi == pytest.approx(angle, abs=1e-10)
        assert fits[1].psi == pytest.approx(-angle, abs=1e-10)
        assert max(abs(f.lam) + abs(f.chi) for f in fits) < 1e-10


def test_ecr_with_y_terms_is_not_pure_x():
    p = CrParams((0.1, 0.2), (0.5, -0.3), lam=(0.2, 0.1), chi=(0.05, -0.1))
    blocks = control_blocks(ecr_compose(cr_unitary(p), cr_unitary(p.flipped())), 2)
    fits = [unitary_so3_fit(so3_matrix(b)) for b in blocks]
    assert max(abs(f.lam) + abs(f.chi) for f in fits) > 1e-3
