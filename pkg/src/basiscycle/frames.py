"""Virtual-Z frame bookkeeping and the detuned level-1/2 pulse model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Operator, cyclic_shift, level_phase, pi_pulse, _mat


@dataclass(frozen=True)
class FrameTracker:
    """Accumulated phase gaps between neighbouring levels of one qudit.

    ``gaps[k]`` is the phase of level ``k+1`` minus the phase of level ``k``
    of the diagonal unitary that has been absorbed into the drive frames so far.
    A pulse on subspace ``k`` must be emitted with drive phase ``gaps[k]``.
    """

    d: int
    gaps: tuple[float, ...] = ()

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        gaps = tuple(float(g) for g in self.gaps) if self.gaps else (0.0,) * (self.d - 1)
        if len(gaps) != self.d - 1:
            raise ValueError(f"expected {self.d - 1} gaps, got {len(gaps)}")
        object.__setattr__(self, "gaps", gaps)

    def apply_diagonal(self, gate) -> "FrameTracker":
        m = _mat(gate)
        if m.shape != (self.d, self.d):
            raise ValueError(f"gate of size {m.shape[0]} does not act on a d={self.d} qudit")
        if np.max(np.abs(m - np.diag(np.diag(m)))) > 1e-12:
            raise ValueError("frame tracking only absorbs diagonal gates")
        args = np.angle(np.diag(m))
        return FrameTracker(self.d, tuple(np.asarray(self.gaps) + np.diff(args)))

    def drive_phase(self, k: int) -> float:
        if not 0 <= k <= self.d - 2:
            raise ValueError(f"subspace index {k} out of range for d={self.d}")
        return self.gaps[k]

    def frame_operator(self) -> Operator:
        """Diagonal unitary (level 0 phase fixed to zero) represented by the gaps."""
        phases = np.concatenate([[0.0], np.cumsum(self.gaps)])
        return Operator((self.d,), np.diag(np.exp(1j * phases)))

    def pulse(self, k: int) -> Operator:
        """The pi pulse on subspace ``k`` emitted with the tracked drive phase."""
        return pi_pulse(k, self.d, phase=self.drive_phase(k))


def drive_phase(tracker: FrameTracker, k: int) -> float:
    return tracker.drive_phase(k)


def apply_diagonal(tracker: FrameTracker, gate) -> FrameTracker:
    return tracker.apply_diagonal(gate)


@dataclass(frozen=True)
class DetuningModel:
    """Constant offset ``delta`` (rad/tick) of the level-1/2 drive frame.

    Times passed to the gate constructors are absolute; the elapsed time used
    for the phase is ``t - t0`` with ``t0`` the first level-1/2 pulse.
    """

    delta: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.delta) and np.isfinite(self.t0)):
            raise ValueError("detuning parameters must be finite")

    def phase(self, t: float) -> float:
        return self.delta * (t - self.t0)


def _conjugate_p2(op: np.ndarray, theta: float) -> np.ndarray:
    p = level_phase(2, theta, 3).matrix
    return p.conj() @ op @ p


def detuned_x1(model: DetuningModel, t: float) -> Operator:
    """P2(-theta) X1 P2(theta) with theta = delta (t - t0)."""
    return Operator((3,), _conjugate_p2(pi_pulse(1, 3).matrix, model.phase(t)))


def detuned_cyclic_shift(model: DetuningModel, direction: int, t: float) -> Operator:
    """Cyclic shift whose level-1/2 pulse carries the detuning phase at time ``t``.

    Only the X1 pulse is affected, and X0 commutes with P2, so both directions
    reduce to the same P2 conjugation: X+ P1(-theta) P2(theta) for the upward
    shift and X- P0(-theta) P2(theta) for the downward one.
    """
    return Operator((3,), _conjugate_p2(cyclic_shift(direction, 3).matrix, model.phase(t)))
