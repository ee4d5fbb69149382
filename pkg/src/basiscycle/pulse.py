"""Pulse-level evolution of driven transmon qudits and effective CR Hamiltonian extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Operator, SystemShape, _mat, expm, PAULI_X, PAULI_Y, PAULI_Z


@dataclass(frozen=True)
class DriveSpec:
    """Single-tone drive on one qudit.

    ``envelope`` holds one (possibly complex) amplitude per tick and is held
    constant within the tick. ``level_frequencies[l]`` is the l -> l+1
    transition frequency in rad/tick.
    """

    envelope: np.ndarray = field(repr=False)
    omega_d: float
    phi_d: float
    transition_amplitudes: tuple[float, ...]
    level_frequencies: tuple[float, ...]

    def __post_init__(self):
        env = np.asarray(self.envelope, dtype=complex).ravel()
        if not np.all(np.isfinite(env)):
            raise ValueError("envelope must be finite")
        amps = tuple(float(a) for a in self.transition_amplitudes)
        freqs = tuple(float(w) for w in self.level_frequencies)
        if len(amps) != len(freqs) or not amps:
            raise ValueError("need one amplitude and one frequency per transition")
        if any(a <= 0 for a in amps):
            raise ValueError("transition amplitudes must be positive")
        object.__setattr__(self, "envelope", env)
        object.__setattr__(self, "transition_amplitudes", amps)
        object.__setattr__(self, "level_frequencies", freqs)

    @property
    def d(self) -> int:
        return len(self.transition_amplitudes) + 1

    @property
    def duration(self) -> int:
        return len(self.envelope)

    def amplitude(self, t: float) -> complex:
        i = int(math.floor(t))
        return self.envelope[i] if 0 <= i < len(self.envelope) else 0.0

    @classmethod
    def transmon(cls, envelope, omega_d: float, phi_d: float, d: int, omega01: float, anharmonicity: float):
        """Transition amplitudes sqrt(l+1) and frequencies omega01 + l * anharmonicity."""
        amps = tuple(math.sqrt(l + 1) for l in range(d - 1))
        freqs = tuple(omega01 + l * anharmonicity for l in range(d - 1))
        return cls(envelope, omega_d, phi_d, amps, freqs)


def drive_operator(spec: DriveSpec, t: float, phi_d: float | None = None, amplitude: complex = 1.0) -> np.ndarray:
    """K(omega_d, phi_d) at time ``t`` in the qudit frame, scaled by a complex amplitude."""
    phi = spec.phi_d if phi_d is None else phi_d
    k = np.zeros((spec.d, spec.d), dtype=complex)
    for l, (a, w) in enumerate(zip(spec.transition_amplitudes, spec.level_frequencies)):
        k[l, l + 1] = amplitude * a * np.exp(-1j * (w - spec.omega_d) * t + 1j * phi)
        k[l + 1, l] = np.conj(k[l, l + 1])
    return k


def rwa_hamiltonian(spec: DriveSpec, t: float) -> Operator:
    """(A_d(t) / 2) K(omega_d, phi_d) with a complex envelope entering as A and A*."""
    return Operator(SystemShape((spec.d,)), 0.5 * drive_operator(spec, t, amplitude=spec.amplitude(t)))


def default_dt(h_norm: float, max_phase: float = 0.05) -> float:
    """Largest step of the form 1/2^n keeping ||H|| dt below ``max_phase``."""
    if h_norm <= 0:
        return 1.0
    return 2.0 ** -max(0, math.ceil(math.log2(h_norm / max_phase)))


def evolve(h_of_t: Callable[[float], object], duration: float, dt: float, t0: float = 0.0) -> Operator:
    """Time-ordered product of exp(-i H(t_mid) dt) over equal steps (midpoint rule)."""
    n = duration / dt
    steps = int(round(n))
    if steps <= 0 or abs(n - steps) > 1e-9:
        raise ValueError("dt must divide the duration")
    h0 = h_of_t(t0 + 0.5 * dt)
    shape = h0.shape if isinstance(h0, Operator) else SystemShape((_mat(h0).shape[0],))
    u = np.eye(shape.total, dtype=complex)
    for i in range(steps):
        h = h0 if i == 0 else h_of_t(t0 + (i + 0.5) * dt)
        u = expm(_mat(h), dt).matrix @ u
    return Operator(shape, u)


def gaussian_drag_envelope(amplitude: float, sigma: float, duration: float, beta: float = 0.0) -> np.ndarray:
    """Lifted Gaussian with a derivative (DRAG) quadrature, one sample per tick at i + 1/2.

    The Gaussian is shifted and rescaled so that it vanishes at t = 0 and
    t = duration while keeping the value ``amplitude`` at the centre.
    """
    if sigma <= 0 or duration <= 0:
        raise ValueError("sigma and duration must be positive")
    n = int(round(duration))
    t = np.arange(n) + 0.5
    c = duration / 2
    edge = math.exp(-c * c / (2 * sigma * sigma))
    g = np.exp(-((t - c) ** 2) / (2 * sigma * sigma))
    real = amplitude * (g - edge) / (1 - edge)
    deriv = amplitude * (-(t - c) / sigma ** 2) * g / (1 - edge)
    return real + 1j * beta * deriv


# ---------------------------------------------------------------------------
# effective CR Hamiltonian


@dataclass(frozen=True)
class TwoToneSpec:
    """Control qudit driven at the target's 0-1 frequency while statically coupled to it.

    ``control_detunings[l]`` is the control l -> l+1 transition frequency minus
    the drive frequency. The target is truncated to two levels and sits on
    resonance with the drive.
    """

    J: float
    omega: float
    control_detunings: tuple[float, ...]
    control_amplitudes: tuple[float, ...] = ()
    target_amplitude: float = 1.0
    drive_phase: float = 0.0

    def __post_init__(self):
        det = tuple(float(x) for x in self.control_detunings)
        amps = tuple(float(x) for x in self.control_amplitudes) or tuple(math.sqrt(l + 1) for l in range(len(det)))
        if len(amps) != len(det):
            raise ValueError("one amplitude per control transition")
        if not np.isfinite(self.J) or np.iscomplexobj(self.J):
            raise ValueError("J must be real")
        object.__setattr__(self, "control_detunings", det)
        object.__setattr__(self, "control_amplitudes", amps)

    @property
    def d(self) -> int:
        return len(self.control_detunings) + 1

    def scaled(self, factor: float) -> "TwoToneSpec":
        return TwoToneSpec(self.J * factor, self.omega * factor, self.control_detunings, self.control_amplitudes,
                           self.target_amplitude, self.drive_phase)

    def frame_energies(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.control_detunings)])

    def coupling_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Static coupling and drive operators (without their strengths) in the drive frame."""
        d = self.d
        lower = np.array([[0, 1], [0, 0]], dtype=complex)
        kj = np.zeros((2 * d, 2 * d), dtype=complex)
        ko = np.zeros((2 * d, 2 * d), dtype=complex)
        for l in range(d - 1):
            up = np.zeros((d, d), dtype=complex)
            up[l + 1, l] = 1.0
            kj += self.control_amplitudes[l] * self.target_amplitude * np.kron(up, lower)
            ko += 0.5 * self.control_amplitudes[l] * np.exp(-1j * self.drive_phase) * np.kron(up, np.eye(2))
        return kj + kj.conj().T, ko + ko.conj().T

    def frame_hamiltonian(self) -> np.ndarray:
        kj, ko = self.coupling_terms()
        h0 = np.kron(np.diag(self.frame_energies()), np.eye(2))
        return h0 + self.J * kj + self.omega * ko


class BranchAmbiguityError(ValueError):
    """Raised when an eigenphase of the window propagator approaches +-pi."""


@dataclass(frozen=True)
class HcrReport:
    offdiag_norm: float
    residual_norm: float
    components: np.ndarray = field(repr=False)  # (d, 4): I, X, Y, Z coefficients per control level
    nu: tuple[float, ...]
    omega: tuple[float, ...]
    delta: tuple[float, ...]
    max_eigenphase: float
    h_eff: np.ndarray = field(repr=False)

    @property
    def structure_residual(self) -> float:
        return math.hypot(self.offdiag_norm, self.residual_norm)


def commensurate_window(spec: TwoToneSpec, resolution: float = 0.1, periods: int = 1) -> float:
    """Shortest window over which every frame oscillation completes whole cycles.

    Assumes all control detunings are integer multiples of ``resolution``.
    """
    for det in spec.control_detunings:
        if abs(det / resolution - round(det / resolution)) > 1e-9:
            raise ValueError("detunings are not multiples of the resolution")
    return periods * 2 * math.pi / resolution


def effective_hamiltonian(spec: TwoToneSpec, window: float, dt: float | None = None,
                          branch_limit: float = 3.0) -> tuple[np.ndarray, float]:
    """(i/T) log of the interaction-picture propagator over ``window``, and its largest eigenphase.

    The drive-frame Hamiltonian is time independent, so the propagator is
    built with :func:`evolve` on a constant generator and then moved to the
    frame of the bare control energies.
    """
    h = spec.frame_hamiltonian()
    dt = window if dt is None else dt
    u = evolve(lambda t: h, window, dt).matrix
    h0 = np.kron(np.diag(spec.frame_energies()), np.eye(2))
    u_int = np.diag(np.exp(1j * np.diag(h0) * window)) @ u
    w, v = np.linalg.eig(u_int)
    phases = np.angle(w)
    if np.max(np.abs(phases)) > branch_limit:
        raise BranchAmbiguityError(
            f"eigenphase {np.max(np.abs(phases)):.3f} too close to pi; shorten the window")
    return (v @ np.diag(-phases / window) @ np.linalg.inv(v)), float(np.max(np.abs(phases)))


def validate_effective_hcr(spec: TwoToneSpec, window: float, dt: float | None = None) -> HcrReport:
    """Decompose the extracted effective Hamiltonian into control-level blocks.

    Reports the control-off-diagonal Frobenius norm, the per-level I/X/Y/Z
    coefficients of the target block, and the fitted nu_l, omega_l, delta_l
    of H = (1/2) sum_l |l><l| (x) (nu_l I + omega_l X + delta_l Z).
    """
    h_eff, max_phase = effective_hamiltonian(spec, window, dt)
    h_eff = 0.5 * (h_eff + h_eff.conj().T)
    d = spec.d
    off = 0.0
    comps = np.zeros((d, 4))
    for i in range(d):
        for j in range(d):
            blk = h_eff[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            if i != j:
                off += float(np.sum(np.abs(blk) ** 2))
            else:
                comps[i] = [np.trace(p @ blk).real / 2 for p in (np.eye(2), PAULI_X, PAULI_Y, PAULI_Z)]
    residual = float(np.sqrt(np.sum(comps[:, 2] ** 2)))
    return HcrReport(math.sqrt(off), residual, comps, tuple(2 * comps[:, 0]), tuple(2 * comps[:, 1]),
                     tuple(2 * comps[:, 3]), max_phase, h_eff)
