"""Noise models and open-system simulation of timed circuits.

Channels are built by pushing every operator |i><j| of the qubit subspace
through the circuit. Between the gates of a site the site decoheres at its idle
rates; during a gate every participating site decoheres at the gate rates.
Decoherence is a qudit depolarizing channel followed by uniform dephasing,
each with probability 1 - exp(-rate * time).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import TimedCircuit, gate_operator, qubit_indices, VIRTUAL_GATES


@dataclass(frozen=True)
class DetuningWalk:
    """Bounded, reflecting random walk of the level-1/2 detuning.

    The value is constant over windows of ``dwell`` ticks and changes by a
    uniform step in [-step, step] between windows.
    """

    bound: float = 0.2
    step: float = 0.05
    dwell: float = 1000.0
    seed: int = 0
    start: float = 0.0

    def __post_init__(self):
        if self.bound < 0 or self.step < 0 or self.dwell <= 0:
            raise ValueError("walk bound and step must be >= 0 and dwell > 0")
        if abs(self.start) > self.bound:
            raise ValueError("walk start outside the bound")

    def trajectory(self, n_windows: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        out = np.empty(n_windows)
        x = self.start
        for i in range(n_windows):
            out[i] = x
            x += rng.uniform(-self.step, self.step)
            # reflect at the bounds
            while abs(x) > self.bound:
                x = math.copysign(2 * self.bound, x) - x
        return out

    def at(self, times) -> np.ndarray:
        idx = np.floor(np.asarray(times, dtype=float) / self.dwell).astype(int)
        if np.any(idx < 0):
            raise ValueError("times must be nonnegative")
        traj = self.trajectory(int(idx.max()) + 1 if idx.size else 0)
        return traj[idx]


@dataclass(frozen=True)
class NoiseModel:
    """Decoherence rates (per tick) and optional static longitudinal couplings.

    ``zz`` holds (site_a, site_b, zeta) triples adding zeta * N_a N_b to the
    Hamiltonian at all times, with N the level-number operator.
    """

    idle_depol: float = 0.0
    idle_dephase: float = 0.0
    gate_depol: float = 0.0
    gate_dephase: float = 0.0
    scale: float = 1.0
    zz: tuple = ()

    def __post_init__(self):
        for name in ("idle_depol", "idle_dephase", "gate_depol", "gate_dephase", "scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        object.__setattr__(self, "zz", tuple((int(a), int(b), float(z)) for a, b, z in self.zz))

    def scaled(self, scale: float) -> "NoiseModel":
        return NoiseModel(self.idle_depol, self.idle_dephase, self.gate_depol, self.gate_dephase, scale, self.zz)

    def coherent_only(self) -> "NoiseModel":
        return NoiseModel(zz=self.zz)

    @property
    def has_decoherence(self) -> bool:
        return self.scale > 0 and any((self.idle_depol, self.idle_dephase, self.gate_depol, self.gate_dephase))

    def probabilities(self, kind: str, time: float) -> tuple[float, float]:
        """Depolarizing and dephasing probabilities, both in [0, 1)."""
        dep, deph = (self.gate_depol, self.gate_dephase) if kind == "gate" else (self.idle_depol, self.idle_dephase)
        f = lambda r: 1.0 - math.exp(-r * self.scale * time)
        return f(dep), f(deph)


class _DensityBatch:
    """Batch of operators on a register, stored as (batch, *dims, *dims)."""

    def __init__(self, rho: np.ndarray, dims: tuple[int, ...]):
        self.dims = dims
        self.n = len(dims)
        self.rho = rho.reshape((rho.shape[0],) + dims + dims)

    def flat(self) -> np.ndarray:
        D = int(np.prod(self.dims))
        return self.rho.reshape(-1, D, D)

    def unitary(self, u: np.ndarray):
        m = self.flat()
        self.rho = (u @ m @ u.conj().T).reshape(self.rho.shape)

    def phase_diag(self, phases: np.ndarray):
        m = self.flat()
        self.rho = (phases[:, None] * m * phases.conj()[None, :]).reshape(self.rho.shape)

    def depolarize(self, site: int, p: float):
        if p <= 0:
            return
        d = self.dims[site]
        ax_r, ax_c = 1 + site, 1 + self.n + site
        tr = np.trace(self.rho, axis1=ax_r, axis2=ax_c)
        mixed = np.expand_dims(np.expand_dims(tr, ax_r), ax_c) * (np.eye(d).reshape(
            [d if a in (ax_r, ax_c) else 1 for a in range(self.rho.ndim)]) / d)
        self.rho = (1 - p) * self.rho + p * mixed

    def dephase(self, site: int, q: float):
        if q <= 0:
            return
        d = self.dims[site]
        mask = np.full((d, d), 1 - q)
        np.fill_diagonal(mask, 1.0)
        shape = [1] * self.rho.ndim
        shape[1 + site] = d
        shape[1 + self.n + site] = d
        self.rho = self.rho * mask.reshape(shape)


def _zz_phases(dims, zz, elapsed: float) -> np.ndarray | None:
    if not zz or elapsed <= 0:
        return None
    grid = np.indices(dims).reshape(len(dims), -1)
    energy = np.zeros(grid.shape[1])
    for a, b, z in zz:
        energy += z * grid[a] * grid[b]
    return np.exp(-1j * energy * elapsed)


def _leak_to_qubit(batch: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    """Map every qutrit site to a qubit: levels 0, 1 kept, level 2 read out as 1."""
    rho = batch.reshape((batch.shape[0],) + dims + dims)
    n = len(dims)
    for s, d in enumerate(dims):
        if d == 2:
            continue
        k0 = np.zeros((2, d))
        k0[0, 0] = k0[1, 1] = 1.0
        kraus = [k0]
        for lvl in range(2, d):
            k = np.zeros((2, d))
            k[1, lvl] = 1.0
            kraus.append(k)
        out = 0
        for k in kraus:
            t = np.moveaxis(rho, 1 + s, -1) @ k.T
            t = np.moveaxis(t, -1, 1 + s)
            t = np.moveaxis(t, 1 + n + s, -1) @ k.T
            out = out + np.moveaxis(t, -1, 1 + n + s)
        rho = out
    q = 2 ** n
    return rho.reshape(batch.shape[0], q, q)


def simulate_channel(circuit: TimedCircuit, delta: float = 0.0, noise: NoiseModel | None = None,
                     origin: float | None = None, qubit_output: bool = True) -> np.ndarray:
    """Column-stacking superoperator of the circuit on its qubit subspace.

    Inputs are the computational qubit states of every site. With
    ``qubit_output`` the output of each qutrit is folded onto a qubit by
    reading level 2 as 1; otherwise the full register output is kept.
    """
    noise = noise or NoiseModel()
    dims = circuit.dims
    D = int(np.prod(dims))
    idx = qubit_indices(dims)
    q = len(idx)
    if origin is None:
        origin = circuit.detuned_origin() or 0.0

    basis = np.zeros((q * q, D, D), dtype=complex)
    for b in range(q):
        for a in range(q):
            basis[a + q * b, idx[a], idx[b]] = 1.0
    state = _DensityBatch(basis, dims)

    free_since = [0.0] * len(dims)
    clock = 0.0
    decohere = noise.has_decoherence

    def advance(t):
        nonlocal clock
        ph = _zz_phases(dims, noise.zz, t - clock)
        if ph is not None:
            state.phase_diag(ph)
        clock = max(clock, t)

    def idle(site, t):
        if decohere and t > free_since[site]:
            p, r = noise.probabilities("idle", t - free_since[site])
            state.depolarize(site, p)
            state.dephase(site, r)
        free_since[site] = max(free_since[site], t)

    for g in circuit.ordered():
        advance(g.start)
        for s in g.sites:
            idle(s, g.start)
        state.unitary(gate_operator(g, dims, delta, origin))
        if g.duration > 0 and g.name not in VIRTUAL_GATES:
            if decohere:
                p, r = noise.probabilities("gate", g.duration)
                for s in g.sites:
                    state.depolarize(s, p)
                    state.dephase(s, r)
            for s in g.sites:
                free_since[s] = g.end
    end = circuit.end
    advance(end)
    for s in range(len(dims)):
        idle(s, end)

    out = state.flat()
    if qubit_output:
        out = _leak_to_qubit(out, dims)
    dout = out.shape[1]
    # column index a + q*b holds E(|a><b|); vectorize each output column-major
    return np.transpose(out, (0, 2, 1)).reshape(q * q, dout * dout).T


def unitary_superoperator(u) -> np.ndarray:
    """conj(U) (x) U, the column-stacking superoperator of rho -> U rho U^dag."""
    m = u.matrix if hasattr(u, "matrix") else np.asarray(u)
    return np.kron(m.conj(), m)
