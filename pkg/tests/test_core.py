import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import unitary_group

from basiscycle.core import (PAULI_X, PAULI_Z, DiagonalBlockOperator, Operator, SystemShape, cyclic_shift,
                             distance_up_to_global_phase, embed, expm, identity, level_phase, phase_gradation,
                             pi_pulse, rz, subspace_rz, tensor, unitarity_error)

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def ket(index, dim):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1
    return v


def test_shape_rejects_trivial_dimension():
    with pytest.raises(ValueError):
        SystemShape((3, 1))


def test_operator_size_must_match_shape():
    with pytest.raises(ValueError):
        Operator((3, 2), np.eye(5))


def test_tensor_of_identities():
    i2, i3 = identity((2,)), identity((3,))
    assert np.allclose(tensor([i2, i3]).matrix, np.eye(6))


def test_tensor_basis_action():
    x = Operator((2,), PAULI_X)
    out = tensor([x, identity((2,))]).matrix @ ket(0, 4)
    assert np.allclose(out, ket(2, 4))


def test_tensor_mixed_product(rng):
    a, b, c, d = (Operator((2,), unitary_group.rvs(2, random_state=rng)) for _ in range(4))
    lhs = tensor([a, b]) @ tensor([c, d])
    assert np.allclose(lhs.matrix, tensor([a @ c, b @ d]).matrix)


def test_embed_shift_on_qutrit():
    op = embed(cyclic_shift(1, 3), 0, (3, 2))
    out = op.matrix @ np.kron(ket(0, 3), ket(1, 2))
    assert abs(abs(np.vdot(np.kron(ket(1, 3), ket(1, 2)), out)) - 1) < 1e-12


def test_embed_identity_and_kron(rng):
    assert np.allclose(embed(identity((2,)), 1, (3, 2)).matrix, np.eye(6))
    a = Operator((2,), unitary_group.rvs(2, random_state=rng))
    b = Operator((2,), unitary_group.rvs(2, random_state=rng))
    lhs = embed(a, 0, (2, 2)) @ embed(b, 1, (2, 2))
    assert np.allclose(lhs.matrix, np.kron(a.matrix, b.matrix))


@given(angles, angles)
def test_phase_gradation_composes(phi, chi):
    for d in (2, 3, 4):
        lhs = phase_gradation(phi, d) @ phase_gradation(chi, d)
        assert np.allclose(lhs.matrix, phase_gradation(phi + chi, d).matrix)


@given(angles)
def test_phase_gradation_is_rz_on_qubit(phi):
    assert distance_up_to_global_phase(phase_gradation(phi, 2), rz(phi)) < 1e-12


def test_phase_gradation_zero():
    assert np.allclose(phase_gradation(0.0, 4).matrix, np.eye(4))


def test_level_phase_examples(rng):
    assert np.allclose(level_phase(1, 0.0, 3).matrix, np.eye(3))
    assert np.allclose(level_phase(2, math.pi, 3).matrix @ ket(2, 3), -ket(2, 3))
    phis = rng.uniform(-3, 3, 4)
    prod = np.eye(4)
    for l, p in enumerate(phis):
        prod = level_phase(l, p, 4).matrix @ prod
    assert np.allclose(prod, np.diag(np.exp(1j * phis)))


@given(angles)
def test_subspace_rz_gaps(phi):
    assert np.allclose(subspace_rz(0, 0.0, 3).matrix, np.eye(3))
    assert np.allclose(subspace_rz(0, phi, 2).matrix, rz(phi))
    args = np.angle(np.diag(subspace_rz(0, phi, 3).matrix))
    gap01 = math.remainder(args[1] - args[0] - phi, 2 * math.pi)
    gap12 = math.remainder(args[2] - args[1] + phi / 2, 2 * math.pi)
    assert abs(gap01) < 1e-12 and abs(gap12) < 1e-12


def test_pi_pulse_closed_forms():
    x0, x1 = pi_pulse(0, 3).matrix, pi_pulse(1, 3).matrix
    assert np.allclose(x0 @ ket(0, 3), -1j * ket(1, 3))
    assert np.allclose(x0 @ ket(2, 3), -1j * ket(2, 3))
    assert np.allclose(x0 @ x0, -np.eye(3))
    assert np.allclose(x1 @ ket(2, 3), -1j * ket(1, 3))


def test_chained_pulses_equal_cyclic_shift():
    assert np.array_equal((pi_pulse(0, 3) @ pi_pulse(1, 3)).matrix, cyclic_shift(1, 3).matrix)


def test_cyclic_shift_identities():
    assert distance_up_to_global_phase(cyclic_shift(1, 2), PAULI_X) < 1e-12
    xp, xm = cyclic_shift(1, 3), cyclic_shift(-1, 3)
    assert distance_up_to_global_phase(xp @ xp @ xp, np.eye(3)) < 1e-12
    assert distance_up_to_global_phase(xp @ xm, np.eye(3)) < 1e-12
    assert abs(abs((xp.matrix @ ket(2, 3))[0]) - 1) < 1e-12
    for d in (2, 3, 4):
        assert distance_up_to_global_phase(cyclic_shift(1, d) @ cyclic_shift(-1, d), np.eye(d)) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_constructors_are_unitary(d, rng):
    ops = [phase_gradation(0.7, d), level_phase(d - 1, 1.3, d), cyclic_shift(1, d), cyclic_shift(-1, d)]
    ops += [pi_pulse(k, d) for k in range(d - 1)] + [subspace_rz(k, 0.4, d) for k in range(d - 1)]
    assert max(unitarity_error(o) for o in ops) < 1e-10


def test_distance_examples(rng):
    u = unitary_group.rvs(4, random_state=rng)
    assert distance_up_to_global_phase(u, u) < 1e-12
    assert distance_up_to_global_phase(u, np.exp(1.234j) * u) < 1e-12
    assert distance_up_to_global_phase(np.eye(2), PAULI_X) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        distance_up_to_global_phase(np.eye(2), np.eye(3))


def test_expm_examples(rng):
    assert np.allclose(expm(np.zeros((3, 3)), 2.0).matrix, np.eye(3))
    assert np.allclose(expm(PAULI_X, math.pi / 2).matrix, -1j * PAULI_X)
    h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = h + h.conj().T
    assert np.allclose((expm(h, 0.3) @ expm(h, 0.5)).matrix, expm(h, 0.8).matrix)
    with pytest.raises(ValueError):
        expm(np.array([[0, 1], [0, 0]]), 1.0)


def test_block_operator_round_trip(rng):
    blocks = tuple(unitary_group.rvs(2, random_state=rng) for _ in range(3))
    v = DiagonalBlockOperator(3, rng.uniform(-1, 1, 3), blocks)
    for b in v.blocks:
        assert abs(np.linalg.det(b) - 1) < 1e-10
    w = DiagonalBlockOperator.from_operator(v.to_operator(), 3)
    assert np.allclose(w.to_operator().matrix, v.to_operator().matrix)
    # the split is fixed only up to a sign shared between phase and block
    assert np.allclose(np.exp(2j * w.phases), np.exp(2j * v.phases))
    assert unitarity_error(v.to_operator()) < 1e-10


def test_block_operator_rejects_nonunitary():
    with pytest.raises(ValueError):
        DiagonalBlockOperator(2, [0, 0], (2 * np.eye(2), np.eye(2)))
    with pytest.raises(ValueError):
        DiagonalBlockOperator(2, [0, 0, 0], (np.eye(2), np.eye(2)))


def test_from_operator_rejects_offdiagonal():
    with pytest.raises(ValueError):
        DiagonalBlockOperator.from_operator(embed(Operator((2,), PAULI_X), 0, (2, 2)), 2)


def test_z_is_rz_pi():
    assert distance_up_to_global_phase(rz(math.pi), PAULI_Z) < 1e-12
