"""Qutrit-assisted CCZ/Toffoli circuits, identity probes and the simulated experiments.

Register layout is [Q_c2 (qutrit), Q_c1, Q_t] on sites 0, 1, 2. Computational
state labels are written in the order (Q_t, Q_c2, Q_c1), so label "101" means
Q_t = 1, Q_c2 = 0, Q_c1 = 1.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import core
from .circuit import TimedCircuit, VIRTUAL_GATES, circuit_unitary, restrict_to_qubits
from .cr import PULSE_DURATION, RXZ_DURATION, backward_gencz
from .cycling import XPLUS_DURATION, build_refocused_sequence, build_unprotected_sequence, refocus_intervals
from .noise import DetuningWalk, NoiseModel, simulate_channel
from .tomography import (ConfusionMatrix, MeasurementPlan, Superoperator, phi_least_squares, PhaseFitInput,
                         process_fidelity, qpt_reconstruct, ramsey_phase_fit, sample_expectations, truth_table)

REGISTER_DIMS = (3, 2, 2)
SITE_C2, SITE_C1, SITE_T = 0, 1, 2
LABEL_SITES = (SITE_T, SITE_C2, SITE_C1)
CX_DURATION = 2 * RXZ_DURATION + PULSE_DURATION  # echoed CR: two CR halves and an echo pulse
X_DURATION = 1
H_DURATION = 1

CCZ_MATRIX = np.diag([1, 1, 1, 1, 1, 1, 1, -1]).astype(complex)
TOFFOLI_MATRIX = np.kron(np.eye(4), core.HADAMARD) @ CCZ_MATRIX @ np.kron(np.eye(4), core.HADAMARD)


# ---------------------------------------------------------------------------
# labels


def label_of_index(index: int) -> str:
    """Register index (site 0 most significant) -> label in (Q_t, Q_c2, Q_c1) order."""
    bits = [(index >> (2 - s)) & 1 for s in range(3)]
    return "".join(str(bits[s]) for s in LABEL_SITES)


def index_of_label(label: str) -> int:
    if len(label) != 3 or set(label) - {"0", "1"}:
        raise ValueError(f"bad label {label!r}")
    bits = [0, 0, 0]
    for pos, s in enumerate(LABEL_SITES):
        bits[s] = int(label[pos])
    return bits[0] * 4 + bits[1] * 2 + bits[2]


REGISTER_LABELS = tuple(label_of_index(i) for i in range(8))
SORTED_LABELS = tuple(format(i, "03b") for i in range(8))


# ---------------------------------------------------------------------------
# circuit assembly


def add_dynamical_decoupling(circuit: TimedCircuit, sites, x_duration: float = X_DURATION,
                             min_window: float = 4 * X_DURATION, t_end: float | None = None) -> TimedCircuit:
    """Insert an X pair into every idle window of the given qubit sites.

    The pulses start a quarter window in from either edge, rounded down to
    whole ticks, so each pair is symmetric about the window centre.
    """
    end = circuit.end if t_end is None else t_end
    for s in sites:
        if circuit.dims[s] != 2:
            raise ValueError("decoupling pulses are only placed on qubits")
        busy = sorted((g.start, g.end) for g in circuit.gates
                      if s in g.sites and g.duration > 0 and g.name not in VIRTUAL_GATES)
        t = 0.0
        windows = []
        for a, b in busy + [(end, end)]:
            if a > t:
                windows.append((t, a))
            t = max(t, b)
        for a, b in windows:
            w = b - a
            if w < min_window:
                continue
            lead = math.floor(w / 4)
            circuit.add("x", s, a + lead, x_duration, tag="dd")
            circuit.add("x", s, b - lead - x_duration, x_duration, tag="dd")
    return circuit


def _ccz_payload(min_spacing: float, correction: float, keep_cx: bool = True, keep_cz: bool = True,
                 cx_duration: float = CX_DURATION) -> TimedCircuit:
    """CX(c1 -> c2), phase correction, level-1 controlled Z on (c2, t), CX(c1 -> c2)."""
    c = TimedCircuit(REGISTER_DIMS)
    if keep_cx:
        c.add("cx", (SITE_C1, SITE_C2), 0.0, cx_duration, tag="cx")
    c.add("rz_sub", SITE_C2, cx_duration, tag="correction", k=0, phi=correction)
    box = backward_gencz(t0=cx_duration, min_spacing=min_spacing, qutrit=SITE_C2, qubit=SITE_T, dims=REGISTER_DIMS)
    for g in box.gates:
        if keep_cz or g.tag == "cycle":
            c.gates.append(dataclasses.replace(g, tag="inner_" + g.tag))
    if keep_cx:
        c.add("cx", (SITE_C1, SITE_C2), box.end, cx_duration, tag="cx")
    c.duration = box.end + cx_duration
    c.metadata.update(inner_p2_coeff=box.metadata["p2_coeff"], inner_spacing=box.metadata["spacing"])
    return c


def _assemble(payload: TimedCircuit, min_spacing: float, correction: float, protected: bool, dd: bool) -> TimedCircuit:
    alpha = (0.0, 0.0, -payload.metadata["inner_p2_coeff"])
    plan = refocus_intervals(alpha, max(XPLUS_DURATION, min_spacing), sign=1,
                             tau2_min=payload.end + XPLUS_DURATION)
    if protected:
        c = build_refocused_sequence(payload, plan)
    else:
        c = build_unprotected_sequence(payload, plan)
    c.duration = c.end
    c.add("rz_sub", SITE_C2, c.end, tag="correction", k=0, phi=correction)
    if dd:
        add_dynamical_decoupling(c, (SITE_C1, SITE_T))
    c.metadata.update(payload.metadata)
    c.metadata["outer_plan"] = plan.to_dict()
    return c.validate()


def build_ccz(min_spacing: float = 0.0, corrections=(0.0, 0.0), dd: bool = True) -> TimedCircuit:
    """CCZ on [Q_c2 (qutrit), Q_c1, Q_t] from two nested basis-cycled units.

    The outer unit brackets CX(c1->c2) . C1Z(c2, t) . CX(c1->c2) with three X+
    gates on Q_c2; the inner unit is the backward generalized CZ. The level-2
    detuning phase of the inner unit is handed to the outer scheduler as its
    alpha coefficient, so the outer intervals are unequal while still
    cancelling the detuning on the qubit subspace. ``corrections`` are the
    Q_c2 phase rotations placed after the first CX and at the end.
    """
    payload = _ccz_payload(min_spacing, corrections[0])
    c = _assemble(payload, min_spacing, corrections[1], protected=True, dd=dd)
    c.metadata["circuit_id"] = "ccz"
    return c


def build_unprotected_ccz(min_spacing: float = 0.0, corrections=(0.0, 0.0), dd: bool = True) -> TimedCircuit:
    """Same payload bracketed by a single X- / X+ pair, with no refocusing."""
    payload = _ccz_payload(min_spacing, corrections[0])
    c = _assemble(payload, min_spacing, corrections[1], protected=False, dd=dd)
    c.metadata["circuit_id"] = "ccz_unprotected"
    return c


def build_toffoli(min_spacing: float = 0.0, corrections=(0.0, 0.0), dd: bool = True) -> TimedCircuit:
    ccz = build_ccz(min_spacing, corrections, dd)
    c = TimedCircuit(REGISTER_DIMS, metadata=dict(ccz.metadata))
    c.add("h", SITE_T, 0.0, H_DURATION, tag="basis")
    c.extend(ccz, H_DURATION)
    c.add("h", SITE_T, ccz.end + H_DURATION, H_DURATION, tag="basis")
    c.metadata["circuit_id"] = "toffoli"
    return c.validate()


def build_qubit_toffoli_reference(cx_duration: float = CX_DURATION) -> TimedCircuit:
    """Toffoli on a line a - b - c with eight nearest-neighbour CX gates.

    A CCZ phase polynomial (T on a, b, c, on a^b, b^c, a^b^c ...) is evaluated
    with parities built by CX(a,b) and CX(b,c) only, then conjugated by
    Hadamards on the target c.
    """
    a, b, tgt = 0, 1, 2
    c = TimedCircuit((2, 2, 2), metadata={"circuit_id": "toffoli_8cx"})
    t = 0.0

    def one(name, site, **p):
        nonlocal t
        c.add(name, site, t, 0.0 if name == "rz" else 1.0, **p)
        t += 0.0 if name == "rz" else 1.0

    def cx(ctrl, target):
        nonlocal t
        c.add("cx", (ctrl, target), t, cx_duration)
        t += cx_duration

    T = math.pi / 4
    one("h", tgt)
    for s in (a, b, tgt):
        one("rz", s, phi=T)
    cx(a, b); one("rz", b, phi=-T)                 # b: a^b
    cx(b, tgt); one("rz", tgt, phi=T)              # c: a^b^c
    cx(a, b); cx(b, tgt); one("rz", tgt, phi=-T)   # b: b, c: a^c
    cx(a, b); cx(b, tgt); one("rz", tgt, phi=-T)   # b: a^b, c: b^c
    cx(a, b); cx(b, tgt)                           # restore b and c
    one("h", tgt)
    c.duration = t
    return c


def build_identity_probes(min_spacing: float = 0.0, dd: bool = True) -> dict[str, TimedCircuit]:
    """Identity-equivalent circuits used to attribute CCZ errors.

    * ``xplus6``: six back-to-back X+ gates on Q_c2.
    * ``id_a``, ``id_b``, ``id_c``: the CCZ schedule with, respectively, both
      CX and the controlled Z removed, only the CX removed, only the
      controlled Z removed. Every X+ keeps its CCZ time.
    * ``xplus3``: three equispaced X+ stretched to the CCZ duration.
    * ``xplus_xminus``: X- at the start and X+ at the end of the same duration.
    """
    ccz = build_ccz(min_spacing, dd=dd)
    length = ccz.end
    probes: dict[str, TimedCircuit] = {}

    six = TimedCircuit(REGISTER_DIMS)
    for i in range(6):
        six.add("xplus", SITE_C2, i * XPLUS_DURATION, XPLUS_DURATION, tag="cycle")
    six.duration = 6 * XPLUS_DURATION
    probes["xplus6"] = six

    for name, keep_cx, keep_cz in (("id_a", False, False), ("id_b", False, True), ("id_c", True, False)):
        payload = _ccz_payload(min_spacing, 0.0, keep_cx=keep_cx, keep_cz=keep_cz)
        probes[name] = _assemble(payload, min_spacing, 0.0, protected=True, dd=False)

    three = TimedCircuit(REGISTER_DIMS)
    tau = math.floor((length - XPLUS_DURATION) / 2)
    for i in range(3):
        three.add("xplus", SITE_C2, i * tau, XPLUS_DURATION, tag="cycle")
    three.duration = length
    probes["xplus3"] = three

    pair = TimedCircuit(REGISTER_DIMS)
    pair.add("xminus", SITE_C2, 0.0, XPLUS_DURATION, tag="cycle")
    pair.add("xplus", SITE_C2, length - XPLUS_DURATION, XPLUS_DURATION, tag="cycle")
    pair.duration = length
    probes["xplus_xminus"] = pair

    for name, c in probes.items():
        if dd:
            add_dynamical_decoupling(c, (SITE_C1, SITE_T))
        c.metadata["circuit_id"] = name
        c.validate()
    return probes


def qubit_unitary(circuit: TimedCircuit, delta: float = 0.0) -> np.ndarray:
    return restrict_to_qubits(circuit_unitary(circuit, delta), circuit.dims)


def xplus_spacings(circuit: TimedCircuit, site: int = SITE_C2, tag: str = "cycle") -> list[float]:
    times = sorted(g.start for g in circuit.gates if g.name in ("xplus", "xminus") and site in g.sites and g.tag == tag)
    return list(np.diff(times))


# ---------------------------------------------------------------------------
# channels, Ramsey probes and calibration


def noisy_channel(circuit: TimedCircuit, delta: float = 0.0, noise: NoiseModel | None = None) -> Superoperator:
    return Superoperator(simulate_channel(circuit, delta, noise))


def _ket(bit):
    v = np.zeros(2, dtype=complex)
    v[bit] = 1
    return v


def ramsey_probabilities(channel: Superoperator, site: int, others: dict, phis) -> np.ndarray:
    """P(1) on ``site`` for SX - channel - R_z(phi) - SX with the other sites in basis states.

    Equals (1 + cos(phi + Phi_1 - Phi_0)) / 2 for a diagonal channel, where
    Phi_b is the phase acquired with ``site`` in |b>.
    """
    kets = []
    for s in range(3):
        kets.append(core.SX @ _ket(0) if s == site else _ket(others[s]))
    psi = kets[0]
    for k in kets[1:]:
        psi = np.kron(psi, k)
    out = channel.apply(np.outer(psi, psi.conj()))
    ones = np.array([(i >> (2 - site)) & 1 for i in range(8)], dtype=bool)
    probs = []
    for phi in np.asarray(phis, dtype=float):
        v = core.embed(core.SX @ core.rz(phi), site, (2, 2, 2)).matrix
        probs.append(float(np.real(np.diag(v @ out @ v.conj().T))[ones].sum()))
    return np.clip(np.array(probs), 0.0, 1.0)


def ramsey_pairs() -> list[tuple[str, str, int, dict]]:
    """The twelve (label_j, label_k, swept site, fixed sites) Ramsey settings."""
    out = []
    for pos, site in enumerate(LABEL_SITES):
        rest = [s for s in LABEL_SITES if s != site]
        for bits in itertools.product((0, 1), repeat=2):
            fixed = dict(zip(rest, bits))
            lab = ["0"] * 3
            for p, s in enumerate(LABEL_SITES):
                if s != site:
                    lab[p] = str(fixed[s])
            j = lab.copy(); j[pos] = "1"
            k = lab.copy(); k[pos] = "0"
            out.append(("".join(j), "".join(k), site, fixed))
    return out


def _ramsey_shift(channel: Superoperator, site: int, fixed: dict) -> float:
    phis = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    return ramsey_phase_fit(phis, ramsey_probabilities(channel, site, fixed, phis)).kappa


def calibrate_static_phases(noise: NoiseModel | None = None, min_spacing: float = 0.0) -> tuple[float, float]:
    """Q_c2 correction angles that null the Ramsey phase shift for Q_c1 = 0 and 1.

    Only the coherent part of ``noise`` (static couplings) matters. The shifts
    are linear in the two angles, so the response is measured at three points
    and the resulting 2x2 system solved.
    """
    coherent = (noise or NoiseModel()).coherent_only()

    def shifts(corr):
        ch = noisy_channel(build_ccz(min_spacing, corr), 0.0, coherent)
        return np.array([_ramsey_shift(ch, SITE_C2, {SITE_C1: b, SITE_T: 0}) for b in (0, 1)])

    base = shifts((0.0, 0.0))
    if np.max(np.abs(base)) < 1e-12:
        return 0.0, 0.0
    jac = np.column_stack([_wrapped(shifts((1.0, 0.0)) - base), _wrapped(shifts((0.0, 1.0)) - base)])
    sol = np.linalg.solve(jac, -base)
    return float(sol[0]), float(sol[1])


def _wrapped(x):
    return (np.asarray(x) + math.pi) % (2 * math.pi) - math.pi


def calibrate_decoherence(noise: NoiseModel, target: float, min_spacing: float = 0.0,
                          corrections=(0.0, 0.0), tol: float = 1e-6) -> NoiseModel:
    """Rescale all decoherence rates so the exact CCZ process fidelity equals ``target``."""
    if not 0 < target < 1:
        raise ValueError("target fidelity must lie in (0, 1)")
    if not noise.has_decoherence and noise.scale == 0:
        raise ValueError("noise model has no decoherence to scale")
    circ = build_ccz(min_spacing, corrections)

    def gap(scale):
        return process_fidelity(noisy_channel(circ, 0.0, noise.scaled(scale)), CCZ_MATRIX) - target

    lo, hi = 0.0, 1.0
    while gap(hi) > 0:
        hi *= 2
        if hi > 1e6:
            raise ValueError("target fidelity unreachable with these rates")
    return noise.scaled(brentq(gap, lo, hi, xtol=tol))


# ---------------------------------------------------------------------------
# configuration

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _from_dict(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} expects an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        sub = _NESTED.get((cls.__name__, k))
        kw[k] = _from_dict(sub, v) if sub else (tuple(tuple(x) for x in v) if k == "zz" else v)
    try:
        return cls(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


@dataclass(frozen=True)
class NoiseConfig:
    idle_depol: float = 2e-4
    idle_dephase: float = 4e-4
    gate_depol: float = 1e-3
    gate_dephase: float = 1e-3
    scale: float = 1.0
    target_fidelity: float | None = 0.93
    readout_flip: float = 0.0
    zz: tuple = ()

    def __post_init__(self):
        for name in ("idle_depol", "idle_dephase", "gate_depol", "gate_dephase", "scale"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ConfigError(f"noise.{name} must be a nonnegative number")
        if self.target_fidelity is not None and not 0 < self.target_fidelity < 1:
            raise ConfigError("noise.target_fidelity must lie in (0, 1)")
        if not 0 <= self.readout_flip < 0.5:
            raise ConfigError("noise.readout_flip must lie in [0, 0.5)")
        for entry in self.zz:
            if len(entry) != 3:
                raise ConfigError("noise.zz entries are [site_a, site_b, zeta]")

    def model(self) -> NoiseModel:
        return NoiseModel(self.idle_depol, self.idle_dephase, self.gate_depol, self.gate_dephase, self.scale, self.zz)

    def confusion(self) -> ConfusionMatrix | None:
        return ConfusionMatrix.symmetric(self.readout_flip, 3) if self.readout_flip > 0 else None


@dataclass(frozen=True)
class WalkConfig:
    amplitude: float = 0.2
    step: float = 0.05
    dwell: float = 2000.0
    start: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0 or self.step < 0 or self.dwell <= 0 or abs(self.start) > self.amplitude:
            raise ConfigError("walk needs amplitude, step >= 0, dwell > 0 and |start| <= amplitude")


@dataclass(frozen=True)
class StabilityConfig:
    schema_version: int = SCHEMA_VERSION
    hours: float = 33.0
    ticks_per_hour: float = 1000.0
    cadence: int = 12
    shots: int = 2000
    seed: int = 7
    mode: str = "qpt"
    min_spacing: float = 0.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.hours <= 0 or self.ticks_per_hour <= 0:
            raise ConfigError("hours and ticks_per_hour must be positive")
        if not isinstance(self.cadence, int) or self.cadence < 2:
            raise ConfigError("cadence must be an integer >= 2")
        if not isinstance(self.shots, int) or self.shots < 0:
            raise ConfigError("shots must be a nonnegative integer (0 = exact)")
        if self.mode not in ("qpt", "ftt"):
            raise ConfigError("mode must be 'qpt' or 'ftt'")
        if self.min_spacing < 0:
            raise ConfigError("min_spacing must be nonnegative")

    @classmethod
    def from_dict(cls, data: dict) -> "StabilityConfig":
        return _from_dict(cls, data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "StabilityConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class ErrorAnalysisConfig:
    schema_version: int = SCHEMA_VERSION
    shots: int = 2000
    seed: int = 11
    delta: float = 0.0
    phase_points: int = 16
    min_spacing: float = 0.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if not isinstance(self.shots, int) or self.shots < 0:
            raise ConfigError("shots must be a nonnegative integer (0 = exact)")
        if not isinstance(self.phase_points, int) or self.phase_points < 8:
            raise ConfigError("phase_points must be an integer >= 8")
        if not math.isfinite(self.delta):
            raise ConfigError("delta must be finite")

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorAnalysisConfig":
        return _from_dict(cls, data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "ErrorAnalysisConfig":
        return dataclasses.replace(self, **kw)


_NESTED = {
    ("StabilityConfig", "noise"): NoiseConfig,
    ("StabilityConfig", "walk"): WalkConfig,
    ("ErrorAnalysisConfig", "noise"): NoiseConfig,
}


def config_hash(config) -> str:
    text = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# records and output


@dataclass(frozen=True)
class ExperimentRecord:
    time_ticks: float
    circuit_id: str
    metric: str
    value: float
    sigma: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("uncertainty must be nonnegative")


CSV_COLUMNS = ("time_ticks", "circuit_id", "metric", "value", "sigma")


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([f"{r.time_ticks:.10g}", r.circuit_id, r.metric, f"{r.value:.12g}", f"{r.sigma:.6g}"])
    return buf.getvalue()


def records_to_json(records) -> str:
    rows = [{"time_ticks": r.time_ticks, "circuit_id": r.circuit_id, "metric": r.metric,
             "value": r.value, "sigma": r.sigma} for r in records]
    return json.dumps(rows, indent=1)


@dataclass
class ExperimentResult:
    records: list
    files: list
    summary: dict
    config: object

    def series(self, circuit_id: str, metric: str) -> np.ndarray:
        return np.array([r.value for r in self.records if r.circuit_id == circuit_id and r.metric == metric])


def _write_outputs(name: str, config, records, out_dir, fmt: str, plot_fn) -> list:
    if out_dir is None:
        return []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{name}_{config_hash(config)}"
    files = []
    path = out / f"{stem}.{fmt}"
    path.write_text(records_to_csv(records) if fmt == "csv" else records_to_json(records))
    files.append(path)
    (out / f"{stem}_config.json").write_text(json.dumps(config.to_dict(), indent=1, sort_keys=True))
    files.append(out / f"{stem}_config.json")
    if plot_fn is not None:
        svg = out / f"{stem}.svg"
        plot_fn(records, svg)
        files.append(svg)
    return files


def _svg_figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "basiscycle"
    return plt


def _plot_stability(records, path):
    plt = _svg_figure()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for cid in ("ccz", "xplus3", "xplus_xminus"):
        pts = [(r.time_ticks, r.value, r.sigma) for r in records if r.circuit_id == cid and r.metric == "F_pro"]
        if pts:
            t, v, s = map(np.array, zip(*pts))
            ax.errorbar(t, v, yerr=s, marker="o", ms=3, label=cid)
    ax.set_xlabel("time (ticks)")
    ax.set_ylabel("process fidelity")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_error_analysis(records, path):
    plt = _svg_figure()
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    p = {r.metric[2:]: (r.value, r.sigma) for r in records if r.circuit_id == "ccz" and r.metric.startswith("P_")}
    phi = {r.metric[4:]: r.value for r in records if r.circuit_id == "ccz" and r.metric.startswith("Phi_")}
    ladder = [(r.circuit_id, r.value) for r in records if r.metric == "F_TT"]
    axes[0].bar(list(p), [v for v, _ in p.values()], yerr=[s for _, s in p.values()])
    axes[0].set_ylabel("P_j")
    axes[1].plot(list(phi), list(phi.values()), marker="o")
    axes[1].set_ylabel("Phi_j (rad)")
    axes[2].bar([c for c, _ in ladder], [v for _, v in ladder])
    axes[2].set_ylabel("F_TT")
    axes[2].tick_params(axis="x", labelrotation=45)
    for ax in axes[:2]:
        ax.set_xlabel("label (Q_t Q_c2 Q_c1)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# experiments


def _child_seed(*keys) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def prepare_noise(noise_cfg: NoiseConfig, min_spacing: float = 0.0) -> tuple[NoiseModel, tuple[float, float]]:
    """Static-phase corrections from the coherent couplings, then the decoherence scale."""
    model = noise_cfg.model()
    corrections = calibrate_static_phases(model, min_spacing)
    if noise_cfg.target_fidelity is not None and model.has_decoherence:
        model = calibrate_decoherence(model, noise_cfg.target_fidelity, min_spacing, corrections)
    return model, corrections


def run_stability_experiment(config: StabilityConfig, out_dir=None, fmt: str = "csv", plot: bool = True) -> ExperimentResult:
    """Fidelity time series of CCZ, (X+)^3 and X+X- under a drifting detuning.

    No recalibration happens after t = 0: the static corrections and the
    decoherence scale are fixed once, then every cadence point reuses them
    with the detuning value of the walk at that time.
    """
    model, corrections = prepare_noise(config.noise, config.min_spacing)
    confusion = config.noise.confusion()
    probes = build_identity_probes(config.min_spacing)
    circuits = {
        "ccz": (build_ccz(config.min_spacing, corrections), CCZ_MATRIX),
        "xplus3": (probes["xplus3"], np.eye(8)),
        "xplus_xminus": (probes["xplus_xminus"], np.eye(8)),
    }
    total = config.hours * config.ticks_per_hour
    times = np.linspace(0.0, total, config.cadence)
    walk = DetuningWalk(config.walk.amplitude, config.walk.step, config.walk.dwell, config.seed, config.walk.start)
    deltas = walk.at(times)

    records = []
    for i, (t, delta) in enumerate(zip(times, deltas)):
        records.append(ExperimentRecord(float(t), "detuning", "delta", float(delta)))
        for ci, (cid, (circ, ideal)) in enumerate(circuits.items()):
            channel = noisy_channel(circ, float(delta), model)
            exact = process_fidelity(channel, ideal)
            records.append(ExperimentRecord(float(t), cid, "F_pro_exact", exact))
            if config.mode == "qpt":
                plan = MeasurementPlan(3, config.shots, _child_seed(config.seed, i, ci))
                table = sample_expectations(channel, plan, confusion)
                res = qpt_reconstruct(table, confusion)
                records.append(ExperimentRecord(float(t), cid, "F_pro", res.fidelity(ideal), res.linear_sigma(ideal)))
            else:
                tt = truth_table(channel, REGISTER_LABELS)
                records.append(ExperimentRecord(float(t), cid, "F_TT", tt.fidelity))

    metric = "F_pro" if config.mode == "qpt" else "F_TT"
    summary = {"corrections": corrections, "decoherence_scale": model.scale}
    for cid in circuits:
        v = np.array([r.value for r in records if r.circuit_id == cid and r.metric == metric])
        summary[cid] = {"mean": float(v.mean()), "std": float(v.std()), "range": float(np.ptp(v)),
                        "max_drift": float(np.max(np.abs(v - v[0])))}
    files = _write_outputs("stability", config, records, out_dir, fmt, _plot_stability if plot else None)
    return ExperimentResult(records, files, summary, config)


def run_error_analysis(config: ErrorAnalysisConfig, out_dir=None, fmt: str = "csv", plot: bool = True) -> ExperimentResult:
    """Truth table, relative phases and the identity-probe fidelity ladder of the CCZ."""
    model, corrections = prepare_noise(config.noise, config.min_spacing)
    rng_seed = config.seed
    ccz = build_ccz(config.min_spacing, corrections)
    channel = noisy_channel(ccz, config.delta, model)
    records = []

    tt = truth_table(channel, REGISTER_LABELS)
    for i, label in enumerate(SORTED_LABELS):
        p = tt.probabilities[index_of_label(label)]
        if config.shots:
            rng = np.random.default_rng([rng_seed, 0, i])
            est = rng.binomial(config.shots, min(max(p, 0.0), 1.0)) / config.shots
            sig = math.sqrt(max(est * (1 - est), 1.0 / config.shots) / config.shots)
        else:
            est, sig = p, 0.0
        records.append(ExperimentRecord(0.0, "ccz", f"P_{label}", float(est), sig))

    phis = np.linspace(0, 2 * math.pi, config.phase_points, endpoint=False)
    pairs, kappas, sigmas = [], [], []
    for m, (lj, lk, site, fixed) in enumerate(ramsey_pairs()):
        probs = ramsey_probabilities(channel, site, fixed, phis)
        weights = None
        if config.shots:
            rng = np.random.default_rng([rng_seed, 1, m])
            probs = rng.binomial(config.shots, probs) / config.shots
            weights = np.sqrt(np.clip(probs * (1 - probs), 1.0 / config.shots, None) / config.shots)
        fit = ramsey_phase_fit(phis, probs, weights)
        pairs.append((int(lj, 2), int(lk, 2)))
        kappas.append(fit.kappa)
        sigmas.append(fit.sigma if math.isfinite(fit.sigma) and fit.sigma > 1e-9 else 1e-9)
        records.append(ExperimentRecord(0.0, "ccz", f"kappa_{lj}_{lk}", fit.kappa, sigmas[-1] if config.shots else 0.0))
    fit = phi_least_squares(PhaseFitInput(tuple(pairs), tuple(kappas), tuple(sigmas)))
    for i, label in enumerate(SORTED_LABELS):
        val = float(fit.phi[i])
        records.append(ExperimentRecord(0.0, "ccz", f"Phi_{label}", val, float(fit.sigma[i]) if config.shots else 0.0))

    probes = build_identity_probes(config.min_spacing)
    ladder = [("xplus6", probes["xplus6"]), ("id_a", probes["id_a"]), ("id_b", probes["id_b"]),
              ("id_c", probes["id_c"]), ("ccz", ccz)]
    for cid, circ in ladder:
        ch = channel if cid == "ccz" else noisy_channel(circ, config.delta, model)
        records.append(ExperimentRecord(0.0, cid, "F_TT", truth_table(ch).fidelity))

    summary = {
        "corrections": corrections,
        "decoherence_scale": model.scale,
        "F_TT": {cid: r.value for cid, r in ((r.circuit_id, r) for r in records if r.metric == "F_TT")},
        "phi": dict(zip(SORTED_LABELS, map(float, fit.phi))),
        "chi2_per_dof": fit.reduced_chi2,
    }
    files = _write_outputs("error_analysis", config, records, out_dir, fmt, _plot_error_analysis if plot else None)
    return ExperimentResult(records, files, summary, config)
