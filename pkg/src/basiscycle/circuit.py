"""Timed gate lists on a mixed qudit register and their dense simulation.

A :class:`TimedCircuit` is an ordered collection of :class:`Gate` events. Each
gate knows its sites, start tick, duration and parameters; the matrix is looked
up in a small registry. The only coherent error modelled here is the level-1/2
frame detuning: every gate containing a pulse in the |1>,|2> subspace of a
qutrit is conjugated by P2(theta) with theta = delta * (start - origin), and
``unitary`` gates may carry per-level detuning coefficients ``alpha`` that add
exp(-i delta alpha_l) to level ``l`` of their first site.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from . import core
from .core import Operator, SystemShape, embed, as_shape


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    sites: tuple[int, ...]
    start: float
    duration: float = 0.0
    params: dict = field(default_factory=dict)
    tag: str = ""

    def __post_init__(self):
        sites = (int(self.sites),) if isinstance(self.sites, (int, np.integer)) else tuple(int(s) for s in self.sites)
        object.__setattr__(self, "sites", sites)
        if self.duration < 0:
            raise ValueError("gate duration must be nonnegative")
        if self.name not in GATES:
            raise ValueError(f"unknown gate {self.name!r}")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def shifted(self, offset: float) -> "Gate":
        return replace(self, start=self.start + offset)

    def local_matrix(self, dims: tuple[int, ...]) -> np.ndarray:
        sub = tuple(dims[s] for s in self.sites)
        return GATES[self.name].build(self.params, sub)

    def is_detuned(self, dims: tuple[int, ...]) -> bool:
        sub = tuple(dims[s] for s in self.sites)
        return GATES[self.name].detuned(self.params, sub)


@dataclass(frozen=True)
class GateDef:
    build: Callable[[dict, tuple], np.ndarray]
    detuned: Callable[[dict, tuple], bool] = lambda p, dims: False
    nsites: int = 1


def _single(dims, name):
    if len(dims) != 1:
        raise ValueError(f"{name} acts on exactly one site")
    return dims[0]


def _qubit(dims, name):
    if _single(dims, name) != 2:
        raise ValueError(f"{name} requires a qubit site")


def _build_pi(p, dims):
    return core.pi_pulse(int(p.get("k", 0)), _single(dims, "pi"), float(p.get("phase", 0.0))).matrix


def _build_shift(direction):
    def build(p, dims):
        return core.cyclic_shift(direction, _single(dims, "cyclic shift")).matrix
    return build


def _build_qubit_const(m, name):
    def build(p, dims):
        _qubit(dims, name)
        return m
    return build


def _build_qubit_rot(fn, key, name):
    def build(p, dims):
        _qubit(dims, name)
        return fn(float(p[key]))
    return build


def _controlled_x(p, dims):
    if len(dims) != 2:
        raise ValueError("cx acts on (control, target)")
    dc, dt = dims
    x = np.eye(dt, dtype=complex)
    x[:2, :2] = core.PAULI_X
    proj1 = np.zeros((dc, dc))
    proj1[1, 1] = 1.0
    return np.kron(np.eye(dc) - proj1, np.eye(dt)) + np.kron(proj1, x)


def _controlled_z(p, dims):
    if tuple(dims) != (2, 2):
        raise ValueError("cz acts on two qubits")
    return np.diag([1, 1, 1, -1]).astype(complex)


def _cr(p, dims):
    from .cr import CrParams, cr_unitary
    params = CrParams.from_dict(p)
    if tuple(dims) != (params.d, 2):
        raise ValueError(f"cr gate with d={params.d} does not fit sites of dims {dims}")
    return cr_unitary(params).matrix


def _rxz(p, dims):
    if len(dims) != 2 or dims[1] != 2:
        raise ValueError("rxz acts on (qudit, qubit)")
    gen = np.kron(core.subspace_x(int(p.get("k", 0)), dims[0]), core.PAULI_Z)
    return core.expm(gen, float(p["theta"]) / 2).matrix


def _unitary(p, dims):
    m = np.asarray(p["matrix"], dtype=complex)
    n = int(np.prod(dims))
    if m.shape != (n, n):
        raise ValueError("unitary gate matrix does not fit its sites")
    return m


def _identity(p, dims):
    return np.eye(int(np.prod(dims)), dtype=complex)


def _has_12_pulse(p, dims):
    return len(dims) == 1 and dims[0] == 3


GATES: dict[str, GateDef] = {
    "pi": GateDef(_build_pi, lambda p, dims: dims[0] == 3 and int(p.get("k", 0)) == 1),
    "xplus": GateDef(_build_shift(1), _has_12_pulse),
    "xminus": GateDef(_build_shift(-1), _has_12_pulse),
    "level_phase": GateDef(lambda p, dims: core.level_phase(int(p["level"]), float(p["phi"]), _single(dims, "level_phase")).matrix),
    "rz_sub": GateDef(lambda p, dims: core.subspace_rz(int(p.get("k", 0)), float(p["phi"]), _single(dims, "rz_sub")).matrix),
    "rx_sub": GateDef(
        lambda p, dims: core.subspace_rx(int(p.get("k", 0)), float(p["theta"]), _single(dims, "rx_sub"), float(p.get("phase", 0.0))).matrix,
        lambda p, dims: dims[0] == 3 and int(p.get("k", 0)) == 1,
    ),
    "x": GateDef(_build_qubit_const(core.PAULI_X, "x")),
    "sx": GateDef(_build_qubit_const(core.SX, "sx")),
    "h": GateDef(_build_qubit_const(core.HADAMARD, "h")),
    "rx": GateDef(_build_qubit_rot(core.rx, "theta", "rx")),
    "ry": GateDef(_build_qubit_rot(core.ry, "theta", "ry")),
    "rz": GateDef(_build_qubit_rot(core.rz, "phi", "rz")),
    "cx": GateDef(_controlled_x, nsites=2),
    "cz": GateDef(_controlled_z, nsites=2),
    "cr": GateDef(_cr, nsites=2),
    "rxz": GateDef(_rxz, nsites=2),
    "unitary": GateDef(_unitary, nsites=0),
    "delay": GateDef(_identity),
}

# gates that only update drive frames and take no time on hardware
VIRTUAL_GATES = frozenset({"rz", "rz_sub", "level_phase"})


@dataclass
class TimedCircuit:
    """Gate events on a register; ``duration`` defaults to the last gate end."""

    dims: tuple[int, ...]
    gates: list[Gate] = field(default_factory=list)
    duration: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dims = as_shape(self.dims).dims
        self.gates = list(self.gates)

    @property
    def shape(self) -> SystemShape:
        return SystemShape(self.dims)

    @property
    def end(self) -> float:
        last = max((g.end for g in self.gates), default=0.0)
        return max(last, self.duration or 0.0)

    def add(self, name: str, sites, start: float, duration: float = 0.0, tag: str = "", **params) -> Gate:
        g = Gate(name, sites, start, duration, params, tag)
        for s in g.sites:
            if not 0 <= s < len(self.dims):
                raise ValueError(f"site {s} outside register of {len(self.dims)} sites")
        self.gates.append(g)
        return g

    def extend(self, other: "TimedCircuit", offset: float = 0.0, site_map: Iterable[int] | None = None):
        """Inline ``other`` shifted by ``offset``; ``site_map[i]`` is where its site i lands."""
        site_map = list(range(len(other.dims))) if site_map is None else list(site_map)
        for i, s in enumerate(site_map):
            if other.dims[i] != self.dims[s]:
                raise ValueError("site dimension mismatch while inlining a circuit")
        for g in other.gates:
            self.gates.append(replace(g, sites=tuple(site_map[s] for s in g.sites), start=g.start + offset))

    def ordered(self) -> list[Gate]:
        order = sorted(range(len(self.gates)), key=lambda i: (self.gates[i].start, i))
        return [self.gates[i] for i in order]

    def gate_times(self, name: str, site: int | None = None) -> list[float]:
        return sorted(g.start for g in self.gates if g.name == name and (site is None or site in g.sites))

    def count(self, name: str) -> int:
        return sum(g.name == name for g in self.gates)

    def detuned_origin(self) -> float | None:
        times = [g.start for g in self.gates if g.is_detuned(self.dims)]
        return min(times) if times else None

    def validate(self):
        """Reject overlapping timed gates on a common site."""
        busy: dict[int, list[tuple[float, float]]] = {}
        for g in self.gates:
            if g.duration == 0:
                continue
            for s in g.sites:
                busy.setdefault(s, []).append((g.start, g.end))
        for s, spans in busy.items():
            spans.sort()
            for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
                if b0 < a1 - 1e-9:
                    raise ValueError(f"overlapping gates on site {s} at t={b0}")
        return self

    def copy(self) -> "TimedCircuit":
        return TimedCircuit(self.dims, list(self.gates), self.duration, dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "duration": self.end,
            "metadata": _jsonable(self.metadata),
            "gates": [
                {
                    "name": g.name,
                    "sites": list(g.sites),
                    "start": g.start,
                    "duration": g.duration,
                    "k": g.params.get("k"),
                    "params": _jsonable({k: v for k, v in g.params.items() if k != "k"}),
                    "tag": g.tag,
                }
                for g in self.ordered()
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "TimedCircuit":
        c = cls(tuple(data["dims"]), duration=data.get("duration"), metadata=dict(data.get("metadata", {})))
        for gd in data["gates"]:
            params = _from_jsonable(gd.get("params", {}))
            if gd.get("k") is not None:
                params["k"] = gd["k"]
            c.add(gd["name"], gd["sites"], gd["start"], gd.get("duration", 0.0), gd.get("tag", ""), **params)
        return c

    @classmethod
    def from_json(cls, text: str) -> "TimedCircuit":
        return cls.from_dict(json.loads(text))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        arr = np.asarray(obj)
        if np.iscomplexobj(arr):
            return {"__complex__": True, "re": arr.real.tolist(), "im": arr.imag.tolist()}
        return arr.tolist()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return {"__complex__": True, "re": obj.real, "im": obj.imag}
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if obj.get("__complex__"):
            return np.asarray(obj["re"]) + 1j * np.asarray(obj["im"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_from_jsonable(v) for v in obj]
    return obj


def gate_operator(gate: Gate, dims: tuple[int, ...], delta: float = 0.0, origin: float = 0.0) -> np.ndarray:
    """Full-register matrix of one gate, including the detuning error."""
    local = gate.local_matrix(dims)
    if delta != 0.0:
        sub = tuple(dims[s] for s in gate.sites)
        if gate.is_detuned(dims):
            p = core.level_phase(2, delta * (gate.start - origin), 3).matrix
            local = p.conj() @ local @ p
        alpha = gate.params.get("alpha")
        if alpha is not None:
            alpha = np.asarray(alpha, dtype=float)
            rest = int(np.prod(sub[1:])) if len(sub) > 1 else 1
            phases = np.kron(np.exp(-1j * delta * alpha), np.ones(rest))
            local = phases[:, None] * local
    return embed(local, gate.sites, dims).matrix


def circuit_unitary(circuit: TimedCircuit, delta: float = 0.0, origin: float | None = None) -> Operator:
    """Dense product of all gates in time order under a constant detuning."""
    dims = circuit.dims
    if origin is None:
        origin = circuit.detuned_origin() or 0.0
    u = np.eye(int(np.prod(dims)), dtype=complex)
    for g in circuit.ordered():
        u = gate_operator(g, dims, delta, origin) @ u
    return Operator(SystemShape(dims), u)


def qubit_indices(dims: tuple[int, ...]) -> np.ndarray:
    """Indices of the computational states with every site in {0, 1}."""
    grids = np.indices(dims).reshape(len(dims), -1)
    return np.flatnonzero(np.all(grids < 2, axis=0))


def restrict_to_qubits(u, dims: tuple[int, ...]) -> np.ndarray:
    m = u.matrix if isinstance(u, Operator) else np.asarray(u)
    idx = qubit_indices(dims)
    return m[np.ix_(idx, idx)]


def leakage(u, dims: tuple[int, ...]) -> float:
    """Largest probability of leaving the qubit subspace from a computational input."""
    m = u.matrix if isinstance(u, Operator) else np.asarray(u)
    idx = qubit_indices(dims)
    kept = np.sum(np.abs(m[np.ix_(idx, idx)]) ** 2, axis=0)
    return float(np.max(1 - kept))
