"""Basis-cycling composition, the qutrit refocusing scheduler and the qubit echo cases."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .circuit import TimedCircuit, circuit_unitary
from .core import (
    DiagonalBlockOperator,
    Operator,
    PAULI_X,
    block,
    cyclic_shift,
    distance_up_to_global_phase,
    embed,
    level_phase,
)

XPLUS_DURATION = 2


@dataclass(frozen=True)
class CycleSpec:
    d: int
    v_list: tuple[DiagonalBlockOperator, ...]
    insertion_times: tuple[float, ...] = ()

    def __post_init__(self):
        v_list = tuple(self.v_list)
        if len(v_list) != self.d:
            raise ValueError(f"need {self.d} diagonal-block operators, got {len(v_list)}")
        for v in v_list:
            if v.control_dim != self.d:
                raise ValueError("control dimension mismatch in cycle")
            if v.env_shape != v_list[0].env_shape:
                raise ValueError("all cycle elements must share one environment shape")
        times = tuple(float(t) for t in self.insertion_times) or tuple(float(j) for j in range(self.d))
        if len(times) != self.d or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("insertion times must be d strictly increasing values")
        object.__setattr__(self, "v_list", v_list)
        object.__setattr__(self, "insertion_times", times)

    @property
    def shape(self):
        return self.v_list[0].shape


def compose_cycle(spec: CycleSpec) -> Operator:
    """Dense X+ V^(d-1) ... X+ V^(0), the rightmost factor acting first."""
    shift = embed(cyclic_shift(1, spec.d), 0, spec.shape)
    u = Operator(spec.shape, np.eye(spec.shape.total))
    for v in spec.v_list:
        u = shift @ v.to_operator() @ u
    return u


def closed_form_cycle(spec: CycleSpec) -> DiagonalBlockOperator:
    """Per-level phases and blocks of the cycle, without the global phase of X+^d."""
    d = spec.d
    phases = np.zeros(d)
    blocks = []
    for l in range(d):
        phases[l] = sum(spec.v_list[j].phases[(l + j) % d] for j in range(d))
        # later cycle elements multiply from the left
        blocks.append(reduce(np.matmul, [spec.v_list[j].blocks[(l + j) % d] for j in reversed(range(d))]))
    return DiagonalBlockOperator(d, phases, tuple(blocks), spec.v_list[0].env_shape)


def cycle_global_phase(d: int) -> complex:
    """X+^d equals this scalar times the identity for the chained-pulse shift."""
    return complex((-1j) ** ((d - 1) * d))


@dataclass(frozen=True)
class RefocusPlan:
    """Intervals between the three cyclic shifts of a refocused ternary unit.

    ``sign=+1`` uses three X+ gates, ``sign=-1`` three X- gates. The unit then
    equals P2(delta * residual_phase_coeff) times the ideal operator.
    """

    tau1: float
    tau2: float
    alpha: tuple[float, float, float]
    residual_phase_coeff: float
    sign: int = 1
    min_spacing: float = 0.0

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != 3:
            raise ValueError("alpha must have three entries")
        object.__setattr__(self, "alpha", alpha)
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if min(self.tau1, self.tau2) < self.min_spacing - 1e-12:
            raise ValueError("intervals shorter than the minimum spacing")
        a0, a1, a2 = alpha
        ref = a0 if self.sign > 0 else a1
        if abs((self.tau2 - a2) - (self.tau1 - ref)) > 1e-9:
            raise ValueError("intervals violate the refocusing condition")
        if abs(self.residual_phase_coeff - _residual(alpha, self.tau1, self.tau2, self.sign)) > 1e-9:
            raise ValueError("residual coefficient inconsistent with intervals")

    def to_dict(self) -> dict:
        return {
            "tau1": self.tau1,
            "tau2": self.tau2,
            "alpha": list(self.alpha),
            "residual_phase_coeff": self.residual_phase_coeff,
            "sign": self.sign,
            "min_spacing": self.min_spacing,
        }


def _residual(alpha, tau1, tau2, sign):
    a0, a1, a2 = alpha
    if sign > 0:
        return -a0 - a1 + 2 * a2 - 3 * tau2
    return -2 * tau1 - tau2 - a0 + a1


def refocus_intervals(alpha, min_spacing: float, sign: int = 1, grid: float = 1.0,
                      tau2_min: float | None = None) -> RefocusPlan:
    """Smallest grid-aligned intervals satisfying the refocusing condition.

    ``tau2_min`` lets the caller reserve room for the payload that sits between
    the second and third shift. ``grid=0`` disables rounding.
    """
    if min_spacing < 0:
        raise ValueError("min_spacing must be nonnegative")
    alpha = tuple(float(a) for a in alpha)
    a0, a1, a2 = alpha
    diff = a2 - (a0 if sign > 0 else a1)
    lo2 = max(min_spacing, tau2_min or 0.0)
    tau1 = max(min_spacing, lo2 - diff)
    if grid > 0:
        if abs(diff / grid - round(diff / grid)) > 1e-9:
            raise ValueError("detuning coefficients incompatible with the tick grid")
        tau1 = math.ceil(tau1 / grid - 1e-9) * grid
    tau2 = tau1 + diff
    return RefocusPlan(tau1, tau2, alpha, _residual(alpha, tau1, tau2, sign), sign, min_spacing)


def _payload(u, plan: RefocusPlan, duration: float | None):
    """Wrap a diagonal-block operator as a one-gate circuit carrying the alpha coefficients."""
    if isinstance(u, TimedCircuit):
        return u
    op = u.to_operator() if isinstance(u, DiagonalBlockOperator) else u
    c = TimedCircuit(op.shape.dims)
    dur = max(plan.tau2 - XPLUS_DURATION, 0.0) if duration is None else duration
    c.add("unitary", tuple(range(len(op.shape.dims))), 0.0, dur, matrix=op.matrix, alpha=np.asarray(plan.alpha))
    return c


def build_refocused_sequence(u_ternary, plan: RefocusPlan, sign: int | None = None, t0: float = 0.0,
                             u_duration: float | None = None, xplus_duration: float = XPLUS_DURATION) -> TimedCircuit:
    """Three cyclic shifts at t0, t0+tau1, t0+tau1+tau2 with the payload before the last one.

    ``u_ternary`` is either a diagonal-block operator (its detuning coefficients
    are taken from ``plan.alpha``) or a circuit that is inlined as is.
    """
    sign = plan.sign if sign is None else sign
    if sign != plan.sign:
        raise ValueError("plan was computed for the other shift direction")
    payload = _payload(u_ternary, plan, u_duration)
    if plan.tau1 < xplus_duration or payload.end > plan.tau2 - xplus_duration + 1e-9:
        raise ValueError("plan intervals too short for the shift gates and payload")
    name = "xplus" if sign > 0 else "xminus"
    c = TimedCircuit(payload.dims)
    c.add(name, 0, t0, xplus_duration, tag="cycle")
    c.add(name, 0, t0 + plan.tau1, xplus_duration, tag="cycle")
    c.extend(payload, t0 + plan.tau1 + xplus_duration)
    c.add(name, 0, t0 + plan.tau1 + plan.tau2, xplus_duration, tag="cycle")
    c.metadata.update(p2_coeff=plan.residual_phase_coeff, p2_site=0, plan=plan.to_dict())
    return c


def build_unprotected_sequence(u_ternary, plan: RefocusPlan, t0: float = 0.0, u_duration: float | None = None,
                               xplus_duration: float = XPLUS_DURATION) -> TimedCircuit:
    """X+ U X- (or its mirror) with no refocusing, same payload timing."""
    payload = _payload(u_ternary, plan, u_duration)
    first, last = ("xminus", "xplus") if plan.sign > 0 else ("xplus", "xminus")
    c = TimedCircuit(payload.dims)
    c.add(first, 0, t0, xplus_duration, tag="cycle")
    c.extend(payload, t0 + xplus_duration)
    c.add(last, 0, t0 + xplus_duration + payload.end, xplus_duration, tag="cycle")
    c.metadata.update(p2_coeff=0.0, p2_site=0)
    return c


def ideal_refocused_target(u_ternary, sign: int = 1) -> Operator:
    """X+ U X- (upper) or X- U X+ (lower) at zero detuning."""
    op = u_ternary.to_operator() if isinstance(u_ternary, DiagonalBlockOperator) else u_ternary
    if isinstance(op, TimedCircuit):
        op = circuit_unitary(op)
    up = embed(cyclic_shift(sign, 3), 0, op.shape)
    down = embed(cyclic_shift(-sign, 3), 0, op.shape)
    return up @ op @ down


def p2_correction(dims, site: int, phase: float) -> Operator:
    return embed(level_phase(2, phase, 3), site, dims)


def verify_refocusing(circuit: TimedCircuit, ideal_v: Operator, deltas) -> float:
    """Worst global-phase distance after removing the predicted P2 factor."""
    coeff = float(circuit.metadata.get("p2_coeff", 0.0))
    site = int(circuit.metadata.get("p2_site", 0))
    worst = 0.0
    for delta in deltas:
        u = circuit_unitary(circuit, float(delta))
        predicted = p2_correction(circuit.dims, site, delta * coeff) @ ideal_v
        worst = max(worst, distance_up_to_global_phase(u, predicted))
    return worst


def detuned_qubit_x(delta: float, t: float) -> np.ndarray:
    """X exp(-i delta t Z): a pi pulse emitted at time t in a frame detuned by delta."""
    return PAULI_X @ np.diag(np.exp(-1j * delta * t * np.array([1, -1])))


def qubit_echo_refocus(alpha: float, t0: float, detuning: float, interval: float | None = None) -> Operator:
    """X^(t0+interval) X^(t0) exp(-i delta alpha Z); identity up to phase when interval = alpha."""
    interval = alpha if interval is None else interval
    accumulated = np.diag(np.exp(-1j * detuning * alpha * np.array([1, -1])))
    u = detuned_qubit_x(detuning, t0 + interval) @ detuned_qubit_x(detuning, t0) @ accumulated
    return Operator((2,), u)


@dataclass(frozen=True)
class DecouplingReport:
    is_decoupled: bool
    residual: float
    result: DiagonalBlockOperator = field(repr=False)


def dd_decouple_check(u0: DiagonalBlockOperator, u1: DiagonalBlockOperator, tol: float = 1e-9) -> DecouplingReport:
    """Compose X u1 X u0 on a qubit and compare the two resulting environment blocks."""
    if u0.control_dim != 2 or u1.control_dim != 2:
        raise ValueError("decoupling check is defined for a qubit control")
    spec = CycleSpec(2, (u0, u1))
    result = closed_form_cycle(spec)
    residual = distance_up_to_global_phase(result.blocks[0], result.blocks[1])
    return DecouplingReport(residual < tol, residual, result)


def ecr_compose(cr_plus: Operator, cr_minus: Operator) -> Operator:
    """X U_CR^- X U_CR^+ with X on the control (site 0)."""
    x = embed(PAULI_X, 0, cr_plus.shape)
    return x @ cr_minus @ x @ cr_plus


def control_blocks(op: Operator, control_dim: int) -> list[np.ndarray]:
    return [block(op, control_dim, l, l) for l in range(control_dim)]


def off_diagonal_weight(op: Operator, control_dim: int) -> float:
    """Largest modulus in any control-off-diagonal block."""
    m = op.matrix
    worst = 0.0
    for i in range(control_dim):
        for j in range(control_dim):
            if i != j:
                worst = max(worst, float(np.max(np.abs(block(m, control_dim, i, j)))))
    return worst


__all__ = [
    "CycleSpec", "compose_cycle", "closed_form_cycle", "cycle_global_phase", "RefocusPlan",
    "refocus_intervals", "build_refocused_sequence", "build_unprotected_sequence", "ideal_refocused_target",
    "verify_refocusing", "qubit_echo_refocus", "detuned_qubit_x", "dd_decouple_check", "DecouplingReport",
    "ecr_compose", "control_blocks", "off_diagonal_weight", "p2_correction",
]
