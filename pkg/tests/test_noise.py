import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from basiscycle.circuit import TimedCircuit, circuit_unitary, restrict_to_qubits
from basiscycle.noise import DetuningWalk, NoiseModel, simulate_channel, unitary_superoperator
from basiscycle.tomography import Superoperator, process_fidelity


def partial_trace_check(s, dim):
    """Column-stacked channels are trace preserving iff vec(I)^T S = vec(I)^T."""
    v = np.eye(dim).reshape(-1, order="F")
    return np.max(np.abs(v @ s - v))


@given(st.integers(0, 10 ** 6), st.floats(0.01, 0.5), st.floats(0.0, 0.3))
def test_walk_stays_bounded(seed, bound, step):
    traj = DetuningWalk(bound, step, 10.0, seed).trajectory(200)
    assert np.all(np.abs(traj) <= bound + 1e-12)


def test_walk_is_deterministic_and_piecewise_constant():
    w = DetuningWalk(0.2, 0.05, 100.0, seed=3)
    assert np.array_equal(w.trajectory(50), DetuningWalk(0.2, 0.05, 100.0, seed=3).trajectory(50))
    vals = w.at([0, 50, 99.9, 100, 250])
    assert vals[0] == vals[1] == vals[2] == 0.0
    assert vals[3] != vals[0]
    with pytest.raises(ValueError):
        w.at([-1])
    with pytest.raises(ValueError):
        DetuningWalk(0.1, 0.05, 10.0, start=0.3)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(idle_depol=-1e-3)
    m = NoiseModel(1e-3, 2e-3, 0, 0, scale=0.5)
    p, q = m.probabilities("idle", 10)
    assert p == pytest.approx(1 - math.exp(-5e-3))
    assert q == pytest.approx(1 - math.exp(-1e-2))
    assert not NoiseModel().has_decoherence and m.has_decoherence
    assert not m.scaled(0).has_decoherence


def small_circuit():
    c = TimedCircuit((3, 2))
    c.add("xplus", 0, 0.0, 2.0)
    c.add("h", 1, 0.0, 1.0)
    c.add("cx", (0, 1), 3.0, 8.0)
    c.add("rx", 1, 11.0, 1.0, theta=0.3)
    c.add("xminus", 0, 12.0, 2.0)
    return c


def test_noiseless_channel_matches_unitary():
    c = small_circuit()
    for delta in (0.0, 0.2):
        s = simulate_channel(c, delta)
        u = restrict_to_qubits(circuit_unitary(c, delta), c.dims)
        assert np.allclose(s, unitary_superoperator(u), atol=1e-12)


def test_noisy_channel_is_trace_preserving():
    c = small_circuit()
    s = simulate_channel(c, 0.1, NoiseModel(1e-3, 2e-3, 5e-3, 5e-3))
    assert partial_trace_check(s, 4) < 1e-12
    assert Superoperator(s).min_choi_eigenvalue() > -1e-12
    u = restrict_to_qubits(circuit_unitary(c, 0.1), c.dims)
    f = process_fidelity(Superoperator(s), u)
    assert 0.8 < f < 1


def test_more_noise_lowers_fidelity():
    c = small_circuit()
    u = restrict_to_qubits(circuit_unitary(c), c.dims)
    fids = [process_fidelity(Superoperator(simulate_channel(c, 0.0, NoiseModel(r, r, r, r))), u)
            for r in (1e-4, 1e-3, 1e-2)]
    assert fids[0] > fids[1] > fids[2]


def test_level_two_reads_as_one():
    c = TimedCircuit((3,))
    c.add("pi", 0, 0.0, 1.0, k=1)
    s = simulate_channel(c)
    out = (s @ np.array([0, 0, 0, 1.0])).reshape(2, 2, order="F")
    assert np.allclose(out, np.diag([0, 1]))
    full = simulate_channel(c, qubit_output=False)
    assert full.shape == (9, 4)


def test_static_coupling_adds_conditional_phase():
    c = TimedCircuit((2, 2))
    c.add("delay", 0, 0.0, 10.0)
    zeta = 0.05
    s = simulate_channel(c, noise=NoiseModel(zz=((0, 1, zeta),)))
    expected = np.diag(np.exp(-1j * zeta * 10 * np.array([0, 0, 0, 1])))
    assert np.allclose(s, unitary_superoperator(expected))
