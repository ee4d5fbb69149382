"""Process tomography, readout mitigation, truth tables and phase fits.

Conventions
-----------
* Superoperators use column stacking: vec(rho)[i + D*j] = rho[i, j].
* Choi matrices are J = sum_ij |i><j| (x) E(|i><j|), input factor first, so a
  trace-preserving channel has Tr_out J = I.
* Pauli strings are ordered lexicographically in (I, X, Y, Z) with the leftmost
  qubit slowest; qubit 0 is the most significant bit of a basis index.
* Preparations are (Z+, Z-, X+, Y+) and measurement bases (X, Y, Z) per qubit.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from collections import deque

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .core import HADAMARD, PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, Operator

PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)
PREPARATIONS = ("Z+", "Z-", "X+", "Y+")
BASES = ("X", "Y", "Z")
_PREP_STATES = {
    "Z+": np.array([1, 0], dtype=complex),
    "Z-": np.array([0, 1], dtype=complex),
    "X+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "Y+": np.array([1, 1j], dtype=complex) / math.sqrt(2),
}
# rotation taking the eigenbasis of each Pauli to the computational basis (+1 -> |0>)
_BASIS_ROTATIONS = {
    "X": HADAMARD,
    "Y": HADAMARD @ np.diag([1, -1j]),
    "Z": np.eye(2, dtype=complex),
}
# columns: Pauli coordinates (I, X, Y, Z) of Z+, Z-, X+, Y+
PREP_PAULI_MATRIX = np.array([[1, 1, 1, 1], [0, 0, 1, 0], [0, 0, 0, 1], [1, -1, 0, 0]], dtype=float)


def _kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_strings(n: int) -> list[str]:
    return ["".join(s) for s in itertools.product("IXYZ", repeat=n)]


def pauli_matrix(label: str) -> np.ndarray:
    return _kron_all([PAULIS["IXYZ".index(c)] for c in label])


# ---------------------------------------------------------------------------
# superoperators


@dataclass(frozen=True)
class Superoperator:
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        D = int(round(math.sqrt(m.shape[0])))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or D * D != m.shape[0]:
            raise ValueError("superoperator must be D^2 x D^2")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(math.sqrt(self.matrix.shape[0])))

    @classmethod
    def from_unitary(cls, u) -> "Superoperator":
        m = u.matrix if isinstance(u, Operator) else np.asarray(u, dtype=complex)
        return cls(np.kron(m.conj(), m))

    @classmethod
    def depolarizing(cls, p: float, dim: int) -> "Superoperator":
        """rho -> (1 - p) rho + p Tr(rho) I / D."""
        vec_i = np.eye(dim).reshape(-1, order="F")
        return cls((1 - p) * np.eye(dim * dim) + p * np.outer(vec_i, vec_i) / dim)

    @classmethod
    def from_choi(cls, j: np.ndarray) -> "Superoperator":
        D = int(round(math.sqrt(j.shape[0])))
        return cls(np.asarray(j).reshape(D, D, D, D).transpose(3, 1, 2, 0).reshape(D * D, D * D))

    def choi(self) -> np.ndarray:
        D = self.dim
        return self.matrix.reshape(D, D, D, D).transpose(3, 1, 2, 0).reshape(D * D, D * D)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        D = self.dim
        return (self.matrix @ np.asarray(rho).reshape(-1, order="F")).reshape(D, D, order="F")

    def ptm(self) -> np.ndarray:
        """Real Pauli transfer matrix R_PQ = Tr(P E(Q)) / D."""
        D = self.dim
        n = int(round(math.log2(D)))
        if 2 ** n != D:
            raise ValueError("Pauli transfer matrix needs a qubit register")
        vecs = np.array([pauli_matrix(s).reshape(-1, order="F") for s in pauli_strings(n)])
        return (vecs.conj() @ self.matrix @ vecs.T).real / D

    @classmethod
    def from_ptm(cls, r: np.ndarray) -> "Superoperator":
        n = int(round(math.log(r.shape[0], 4)))
        D = 2 ** n
        vecs = np.array([pauli_matrix(s).reshape(-1, order="F") for s in pauli_strings(n)])
        return cls(vecs.T @ r @ vecs.conj() / D)

    def tp_error(self) -> float:
        D = self.dim
        j = self.choi().reshape(D, D, D, D)
        return float(np.max(np.abs(np.einsum("iaja->ij", j) - np.eye(D))))

    def min_choi_eigenvalue(self) -> float:
        j = self.choi()
        return float(np.linalg.eigvalsh(0.5 * (j + j.conj().T)).min())


def _channel_matrix(channel) -> np.ndarray:
    """Superoperators pass through; anything else is read as a unitary."""
    if isinstance(channel, Superoperator):
        return channel.matrix
    return Superoperator.from_unitary(channel).matrix


def process_fidelity(e, u, return_clip: bool = False):
    """Tr(S_U^dag S_E) / D^2 clipped to [0, 1]; optionally also the amount clipped."""
    s_e = e.matrix if isinstance(e, Superoperator) else np.asarray(e)
    s_u = Superoperator.from_unitary(u).matrix
    if s_e.shape != s_u.shape:
        raise ValueError("channel and unitary dimensions differ")
    D2 = s_u.shape[0]
    raw = float(np.real(np.trace(s_u.conj().T @ s_e))) / D2
    val = min(max(raw, 0.0), 1.0)
    return (val, abs(val - raw)) if return_clip else val


# ---------------------------------------------------------------------------
# readout


@dataclass(frozen=True)
class ConfusionMatrix:
    """Per-qubit assignment matrices, ``matrices[q][true, measured]``."""

    matrices: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        for m in mats:
            if m.shape != (2, 2) or np.any(m < 0) or np.any(m > 1):
                raise ValueError("confusion matrices must be 2x2 with entries in [0, 1]")
            if np.max(np.abs(m.sum(axis=1) - 1)) > 1e-12:
                raise ValueError("confusion matrix rows must sum to 1")
        object.__setattr__(self, "matrices", mats)

    @classmethod
    def symmetric(cls, flip: float, n: int) -> "ConfusionMatrix":
        m = np.array([[1 - flip, flip], [flip, 1 - flip]])
        return cls(tuple(m for _ in range(n)))

    @classmethod
    def ideal(cls, n: int) -> "ConfusionMatrix":
        return cls.symmetric(0.0, n)

    @property
    def n(self) -> int:
        return len(self.matrices)

    def full(self) -> np.ndarray:
        return _kron_all(self.matrices).real

    def inverse(self) -> np.ndarray:
        inv = []
        for m in self.matrices:
            if abs(np.linalg.det(m)) < 1e-12:
                raise ValueError("confusion matrix is singular")
            inv.append(np.linalg.inv(m))
        return _kron_all(inv).real


def apply_confusion(probs: np.ndarray, confusion: ConfusionMatrix) -> np.ndarray:
    """Map true bitstring probabilities (last axis) to measured ones."""
    return np.asarray(probs) @ confusion.full()


# ---------------------------------------------------------------------------
# expectation tables


@dataclass(frozen=True)
class MeasurementPlan:
    n_qubits: int
    shots: int = 2000
    seed: int = 0
    preparations: tuple = ()
    bases: tuple = ()

    def __post_init__(self):
        if self.shots < 0:
            raise ValueError("shots must be positive, or 0 for exact probabilities")
        n = self.n_qubits
        preps = tuple(self.preparations) or tuple(itertools.product(PREPARATIONS, repeat=n))
        bases = tuple(self.bases) or tuple(itertools.product(BASES, repeat=n))
        for p in preps:
            if len(p) != n or any(x not in PREPARATIONS for x in p):
                raise ValueError(f"bad preparation {p}")
        for b in bases:
            if len(b) != n or any(x not in BASES for x in b):
                raise ValueError(f"bad measurement basis {b}")
        object.__setattr__(self, "preparations", tuple(tuple(p) for p in preps))
        object.__setattr__(self, "bases", tuple(tuple(b) for b in bases))

    @property
    def exact(self) -> bool:
        return self.shots == 0

    @property
    def complete(self) -> bool:
        n = self.n_qubits
        return (set(self.preparations) == set(itertools.product(PREPARATIONS, repeat=n))
                and set(self.bases) == set(itertools.product(BASES, repeat=n)))


@dataclass
class ExpectationTable:
    """Bitstring frequencies per (preparation, basis); shape (n_prep, n_basis, 2^n)."""

    plan: MeasurementPlan
    probabilities: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "basiscycle.expectations/1",
            "n_qubits": self.plan.n_qubits,
            "shots": self.plan.shots,
            "seed": self.plan.seed,
            "preparations": ["".join(p) for p in self.plan.preparations],
            "bases": ["".join(b) for b in self.plan.bases],
            "values": self.probabilities.tolist(),
            "metadata": self.metadata,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ExpectationTable":
        n = int(data["n_qubits"])
        split = lambda s, width: tuple(s[i:i + width] for i in range(0, len(s), width))
        plan = MeasurementPlan(n, int(data["shots"]), int(data["seed"]),
                               tuple(split(p, 2) for p in data["preparations"]),
                               tuple(tuple(b) for b in data["bases"]))
        probs = np.asarray(data["values"], dtype=float)
        if probs.shape != (len(plan.preparations), len(plan.bases), 2 ** n):
            raise ValueError("expectation values do not match the plan")
        return cls(plan, probs, dict(data.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> "ExpectationTable":
        return cls.from_dict(json.loads(text))

    def pauli_expectations(self) -> tuple[np.ndarray, np.ndarray]:
        """Estimates of Tr(P E(rho_a)) for every Pauli string P and preparation a.

        Returns the (4^n, n_prep) estimate and the number of settings averaged
        per Pauli string.
        """
        n = self.plan.n_qubits
        labels = pauli_strings(n)
        bits = ((np.arange(2 ** n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
        out = np.zeros((len(labels), len(self.plan.preparations)))
        counts = np.zeros(len(labels), dtype=int)
        for ib, basis in enumerate(self.plan.bases):
            for subset in itertools.product((False, True), repeat=n):
                label = "".join(b if keep else "I" for b, keep in zip(basis, subset))
                sign = np.prod(np.where(np.array(subset)[None, :], 1 - 2 * bits, 1), axis=1)
                p = labels.index(label)
                out[p] += self.probabilities[:, ib, :] @ sign
                counts[p] += 1
        if np.any(counts == 0):
            raise ValueError("the measurement plan does not cover every Pauli string")
        return out / counts[:, None], counts


def _prep_density(prep) -> np.ndarray:
    v = _kron_all([_PREP_STATES[p][:, None] for p in prep])
    return v @ v.conj().T


def exact_probabilities(channel, plan: MeasurementPlan) -> np.ndarray:
    s = _channel_matrix(channel)
    D = 2 ** plan.n_qubits
    if s.shape != (D * D, D * D):
        raise ValueError(f"channel dimension {int(round(math.sqrt(s.shape[0])))} does not match {plan.n_qubits} qubits")
    rho_in = np.array([_prep_density(p).reshape(-1, order="F") for p in plan.preparations])
    rho_out = (s @ rho_in.T).T.reshape(-1, D, D, order="F")
    rots = np.array([_kron_all([_BASIS_ROTATIONS[b] for b in basis]) for basis in plan.bases])
    probs = np.einsum("bij,ajk,bik->abi", rots, rho_out, rots.conj()).real
    return np.clip(probs, 0.0, None)


def sample_expectations(channel, plan: MeasurementPlan, confusion: ConfusionMatrix | None = None) -> ExpectationTable:
    """Bitstring frequencies for every plan setting, with readout error and shot noise.

    Setting number c = prep_index * n_bases + basis_index draws its shots from
    ``default_rng([seed, c])``, so any subset of settings reproduces exactly.
    """
    probs = exact_probabilities(channel, plan)
    if confusion is not None:
        if confusion.n != plan.n_qubits:
            raise ValueError("confusion matrix covers a different number of qubits")
        probs = apply_confusion(probs, confusion)
    probs = probs / probs.sum(axis=-1, keepdims=True)
    if not plan.exact:
        nb = len(plan.bases)
        counts = np.empty_like(probs)
        for a in range(probs.shape[0]):
            for b in range(nb):
                rng = np.random.default_rng([plan.seed, a * nb + b])
                counts[a, b] = rng.multinomial(plan.shots, probs[a, b])
        probs = counts / plan.shots
    return ExpectationTable(plan, probs, {"readout_confusion": confusion is not None})


def mitigate_readout(table, confusion: ConfusionMatrix):
    """Apply the per-qubit inverse assignment matrices to measured frequencies.

    Accepts an :class:`ExpectationTable` or a raw array whose last axis runs
    over bitstrings; returns the same kind of object.
    """
    inv = confusion.inverse()
    if isinstance(table, ExpectationTable):
        meta = dict(table.metadata, readout_mitigated=True)
        return ExpectationTable(table.plan, table.probabilities @ inv, meta)
    return np.asarray(table) @ inv


# ---------------------------------------------------------------------------
# reconstruction


def project_tp(j: np.ndarray, D: int) -> np.ndarray:
    j4 = j.reshape(D, D, D, D)
    excess = np.einsum("iaja->ij", j4) - np.eye(D)
    return j - np.kron(excess, np.eye(D)) / D


def project_psd(j: np.ndarray) -> np.ndarray:
    h = 0.5 * (j + j.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.clip(w, 0, None)) @ v.conj().T


@dataclass(frozen=True)
class QptResult:
    superoperator: Superoperator
    linear: Superoperator
    iterations: int
    residual: float
    converged: bool
    ptm: np.ndarray = field(repr=False)
    raw_expectations: np.ndarray = field(repr=False)
    settings_per_pauli: np.ndarray = field(repr=False)

    def fidelity(self, u) -> float:
        return process_fidelity(self.superoperator, u)

    def linear_sigma(self, u) -> float:
        """Shot-noise standard deviation of the linear-inversion process fidelity."""
        shots = self.superoperator_shots
        if shots == 0:
            return 0.0
        D = self.superoperator.dim
        n = int(round(math.log2(D)))
        r_u = Superoperator.from_unitary(u).ptm()
        minv = np.linalg.inv(_kron_all([PREP_PAULI_MATRIX] * n).real)
        coef = r_u @ minv.T / D ** 2
        var = (1 - np.clip(self.raw_expectations, -1, 1) ** 2) / (shots * self.settings_per_pauli[:, None])
        var[0] = 0.0
        return float(math.sqrt(np.sum(coef ** 2 * var)))

    superoperator_shots: int = 0


class ProjectionError(RuntimeError):
    pass


def cptp_project(j0: np.ndarray, D: int, tol: float = 1e-8, max_iter: int = 10000) -> tuple[np.ndarray, int, float, bool]:
    """Dykstra alternating projection of a Choi matrix onto the CPTP set."""
    x = j0.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    resid = float("inf")
    for it in range(1, max_iter + 1):
        y = project_tp(x + p, D)
        p = x + p - y
        x_new = project_psd(y + q)
        q = y + q - x_new
        resid = float(np.linalg.norm(x_new - x))
        x = x_new
        if resid < tol:
            return x, it, resid, True
    return x, max_iter, resid, False


def qpt_reconstruct(table: ExpectationTable, confusion: ConfusionMatrix | None = None,
                    tol: float = 1e-8, max_iter: int = 10000, strict: bool = False) -> QptResult:
    """Linear inversion to a Pauli transfer matrix, then projection onto CPTP maps.

    With ``confusion`` the frequencies are readout-mitigated first. If the
    projection hits ``max_iter`` the result carries ``converged=False`` and
    its last residual; ``strict`` turns that into :class:`ProjectionError`.
    """
    if not table.plan.complete:
        raise ValueError("process tomography needs every preparation and basis")
    if confusion is not None:
        table = mitigate_readout(table, confusion)
    n = table.plan.n_qubits
    D = 2 ** n
    # reorder preparations to the canonical product order
    canon = list(itertools.product(PREPARATIONS, repeat=n))
    order = [table.plan.preparations.index(p) for p in canon]
    exps, counts = table.pauli_expectations()
    exps = exps[:, order]
    minv = np.linalg.inv(_kron_all([PREP_PAULI_MATRIX] * n).real)
    r = exps @ minv
    linear = Superoperator.from_ptm(r)
    j, it, resid, ok = cptp_project(linear.choi(), D, tol, max_iter)
    if strict and not ok:
        raise ProjectionError(f"CPTP projection did not converge (residual {resid:.3e})")
    s = Superoperator.from_choi(j)
    return QptResult(s, linear, it, resid, ok, r, exps, counts, table.plan.shots)


# ---------------------------------------------------------------------------
# truth tables and phases


@dataclass(frozen=True)
class TruthTable:
    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    @property
    def fidelity(self) -> float:
        return float(np.mean(self.probabilities))

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.probabilities))


def truth_table(channel, labels=None) -> TruthTable:
    """Survival probabilities P_j = <j| E(|j><j|) |j> of every computational state.

    ``labels[i]`` names basis index ``i``; the default is its binary string.
    """
    s = _channel_matrix(channel)
    D = int(round(math.sqrt(s.shape[0])))
    if labels is None:
        n = max(1, int(round(math.log2(D))))
        labels = [format(i, f"0{n}b") for i in range(D)]
    if len(labels) != D:
        raise ValueError("one label per basis state required")
    diag = [float(np.real(s[j + D * j, j + D * j])) for j in range(D)]
    return TruthTable(tuple(labels), tuple(diag))


@dataclass(frozen=True)
class RamseyFit:
    kappa: float
    amplitude: float
    offset: float
    sigma: float
    low_confidence: bool


def _wrap(x):
    return float(-((-x + math.pi) % (2 * math.pi) - math.pi))


def ramsey_phase_fit(phis, probs, sigma=None, amplitude_floor: float = 1e-6) -> RamseyFit:
    """Fit p(phi) = A cos(phi + kappa) + c.

    The starting point is the first Fourier component of the data. Fits whose
    amplitude is not at least three standard errors above zero (or below
    ``amplitude_floor``) are flagged as low confidence.
    """
    phis = np.asarray(phis, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if phis.size < 8 or phis.size != probs.size:
        raise ValueError("need at least 8 matching samples")
    if np.ptp(phis) < 2 * math.pi * (1 - 1 / phis.size) - 1e-9:
        raise ValueError("phase sweep must span a full period")
    c0 = float(np.mean(probs))
    z = np.sum((probs - c0) * np.exp(-1j * phis))
    a0 = 2 * abs(z) / phis.size
    k0 = float(np.angle(z))
    if a0 < amplitude_floor:
        return RamseyFit(0.0, a0, c0, math.inf, True)
    model = lambda x, a, k, c: a * np.cos(x + k) + c
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(model, phis, probs, p0=(a0, k0, c0), sigma=sigma,
                                   absolute_sigma=sigma is not None)
    except RuntimeError:
        return RamseyFit(_wrap(k0), a0, c0, math.inf, True)
    a, k, c = popt
    if a < 0:
        a, k = -a, k + math.pi
    if np.all(np.isfinite(pcov)):
        perr = np.sqrt(np.clip(np.diag(pcov), 0, None))
    elif np.max(np.abs(model(phis, *popt) - probs)) < 1e-12:
        perr = np.zeros(3)  # noiseless data: exact fit
    else:
        perr = np.full(3, math.inf)
    k = _wrap(k)
    if k == -math.pi:
        k = math.pi
    low = bool(a < amplitude_floor or (np.isfinite(perr[0]) and a < 3 * perr[0]))
    return RamseyFit(k, float(a), float(c), float(perr[1]), low)


@dataclass(frozen=True)
class PhaseFitInput:
    """Pairwise phase differences kappa[m] ~ Phi[j] - Phi[k] for pairs[m] = (j, k)."""

    pairs: tuple
    kappa: tuple
    sigma: tuple
    n_labels: int = 8
    reference: int = 0

    def __post_init__(self):
        pairs = tuple((int(j), int(k)) for j, k in self.pairs)
        if not (len(pairs) == len(self.kappa) == len(self.sigma)):
            raise ValueError("pairs, kappa and sigma lengths differ")
        if any(s <= 0 for s in self.sigma):
            raise ValueError("uncertainties must be positive")
        for j, k in pairs:
            if not (0 <= j < self.n_labels and 0 <= k < self.n_labels) or j == k:
                raise ValueError(f"bad pair {(j, k)}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "kappa", tuple(float(x) for x in self.kappa))
        object.__setattr__(self, "sigma", tuple(float(x) for x in self.sigma))


@dataclass(frozen=True)
class PhaseFitResult:
    phi: np.ndarray
    sigma: np.ndarray
    chi2: float
    dof: int

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.nan


def phi_least_squares(data: PhaseFitInput) -> PhaseFitResult:
    """Weighted least squares for Phi with Phi[reference] = 0.

    Each kappa is first unwrapped against a spanning-tree estimate, then the
    linear problem is solved once (a single rewrap pass).
    """
    n = data.n_labels
    adj: dict[int, list[tuple[int, float, int]]] = {i: [] for i in range(n)}
    for (j, k), kap in zip(data.pairs, data.kappa):
        adj[k].append((j, kap, 1))
        adj[j].append((k, kap, -1))
    init = np.full(n, np.nan)
    init[data.reference] = 0.0
    todo = deque([data.reference])
    while todo:
        k = todo.popleft()
        for j, kap, s in adj[k]:
            if np.isnan(init[j]):
                init[j] = init[k] + s * kap
                todo.append(j)
    if np.any(np.isnan(init)):
        raise ValueError("pair graph does not connect every label to the reference")

    kap = np.array(data.kappa)
    sig = np.array(data.sigma)
    pred = np.array([init[j] - init[k] for j, k in data.pairs])
    kap = kap + 2 * math.pi * np.round((pred - kap) / (2 * math.pi))

    free = [i for i in range(n) if i != data.reference]
    a = np.zeros((len(kap), len(free)))
    for m, (j, k) in enumerate(data.pairs):
        if j != data.reference:
            a[m, free.index(j)] += 1
        if k != data.reference:
            a[m, free.index(k)] -= 1
    aw = a / sig[:, None]
    bw = kap / sig
    sol, *_ = np.linalg.lstsq(aw, bw, rcond=None)
    cov = np.linalg.pinv(aw.T @ aw)
    phi = np.zeros(n)
    phi[free] = sol
    err = np.zeros(n)
    err[free] = np.sqrt(np.diag(cov))
    chi2 = float(np.sum((aw @ sol - bw) ** 2))
    return PhaseFitResult(phi, err, chi2, len(kap) - len(free))
