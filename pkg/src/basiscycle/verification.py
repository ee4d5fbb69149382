"""Fast algebraic self-checks used by ``basiscycle verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .circuit import circuit_unitary
from .core import DiagonalBlockOperator, Operator, distance_up_to_global_phase
from .cr import CrRateModel, backward_gencx, forward_gencx, generalized_cx
from .cycling import (CycleSpec, build_refocused_sequence, closed_form_cycle, compose_cycle, cycle_global_phase,
                      ideal_refocused_target, refocus_intervals, verify_refocusing)
from .experiments import CCZ_MATRIX, TOFFOLI_MATRIX, build_ccz, build_qubit_toffoli_reference, qubit_unitary
from .tomography import MeasurementPlan, process_fidelity, qpt_reconstruct, sample_expectations


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value < self.tolerance

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


def random_block_operator(rng, d: int, env: int = 2) -> DiagonalBlockOperator:
    phases = rng.uniform(-math.pi, math.pi, d)
    blocks = tuple(unitary_group.rvs(env, random_state=rng) for _ in range(d))
    return DiagonalBlockOperator(d, phases, blocks)


def check_cycle_closed_form(rng, trials: int = 20) -> float:
    worst = 0.0
    for d in (2, 3, 4):
        for _ in range(trials):
            spec = CycleSpec(d, tuple(random_block_operator(rng, d) for _ in range(d)))
            dense = compose_cycle(spec).matrix
            closed = cycle_global_phase(d) * closed_form_cycle(spec).to_operator().matrix
            worst = max(worst, float(np.max(np.abs(dense - closed))))
    return worst


def check_refocusing(rng, trials: int = 20) -> float:
    worst = 0.0
    for _ in range(trials):
        alpha = tuple(int(a) for a in rng.integers(0, 11, 3))
        sign = int(rng.choice((1, -1)))
        u = random_block_operator(rng, 3)
        plan = refocus_intervals(alpha, 4, sign=sign)
        circ = build_refocused_sequence(u, plan)
        worst = max(worst, verify_refocusing(circ, ideal_refocused_target(u, sign), rng.uniform(-0.3, 0.3, 3)))
    return worst


def check_generalized_cx(rng, trials: int = 5) -> float:
    target = generalized_cx().matrix
    worst = 0.0
    for _ in range(trials):
        rates = CrRateModel(tuple(rng.uniform(-0.05, 0.05, 3)), tuple(rng.uniform(-0.05, 0.05, 3)))
        circ, _ = forward_gencx(rates)
        worst = max(worst, verify_refocusing(circ, Operator((3, 2), target), rng.uniform(-0.3, 0.3, 3)))
    worst = max(worst, verify_refocusing(backward_gencx(), Operator((3, 2), target), rng.uniform(-0.3, 0.3, 3)))
    return worst


def check_ccz_sweep() -> float:
    c = build_ccz()
    return max(distance_up_to_global_phase(qubit_unitary(c, d), CCZ_MATRIX) for d in np.linspace(-0.3, 0.3, 7))


def check_eight_cx() -> float:
    return distance_up_to_global_phase(circuit_unitary(build_qubit_toffoli_reference()).matrix, TOFFOLI_MATRIX)


def check_qpt_consistency(rng) -> float:
    u = unitary_group.rvs(8, random_state=rng)
    res = qpt_reconstruct(sample_expectations(u, MeasurementPlan(3, shots=0)))
    return 1.0 - process_fidelity(res.superoperator, u)


def run_verification(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        CheckResult("cycle closed form", check_cycle_closed_form(rng), 1e-10),
        CheckResult("qutrit refocusing", check_refocusing(rng), 1e-9),
        CheckResult("generalized CX (forward and backward)", check_generalized_cx(rng), 1e-9),
        CheckResult("CCZ under detuning sweep", check_ccz_sweep(), 1e-8),
        CheckResult("eight-CX Toffoli reference", check_eight_cx(), 1e-10),
        CheckResult("noiseless process tomography", check_qpt_consistency(rng), 1e-6),
    ]
