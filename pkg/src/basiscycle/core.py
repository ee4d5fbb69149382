"""Dense qudit operators on mixed-dimension registers and the single-qudit gate zoo.

Everything here is a pure function of its inputs. Matrices are plain complex
numpy arrays wrapped in :class:`Operator` so that the register layout travels
with them. Sites are ordered left to right in the Kronecker product.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class SystemShape:
    """Ordered site dimensions of a register, e.g. ``SystemShape((3, 2, 2))``."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d < 2 for d in dims):
            raise ValueError(f"every site dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=int)) if self.dims else 1

    def __len__(self) -> int:
        return len(self.dims)

    def __add__(self, other: "SystemShape") -> "SystemShape":
        return SystemShape(self.dims + as_shape(other).dims)


def as_shape(shape) -> SystemShape:
    if isinstance(shape, SystemShape):
        return shape
    if isinstance(shape, (int, np.integer)):
        return SystemShape((int(shape),))
    return SystemShape(tuple(shape))


@dataclass(frozen=True)
class Operator:
    """Dense square matrix tagged with the register it acts on."""

    shape: SystemShape
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = as_shape(self.shape)
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != shape.total:
            raise ValueError(f"matrix of shape {m.shape} does not fit register {shape.dims}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.shape.total

    def dag(self) -> "Operator":
        return Operator(self.shape, self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if not isinstance(other, Operator):
            return NotImplemented
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape.dims} vs {other.shape.dims}")
        return Operator(self.shape, self.matrix @ other.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.shape, self.matrix * scalar)

    __rmul__ = __mul__

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        return unitarity_error(self.matrix) < tol

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - np.diag(np.diag(m))), initial=0.0) < tol)


def _mat(op) -> np.ndarray:
    return op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)


def unitarity_error(u) -> float:
    m = _mat(u)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def identity(shape) -> Operator:
    shape = as_shape(shape)
    return Operator(shape, np.eye(shape.total, dtype=complex))


def tensor(ops: Sequence[Operator]) -> Operator:
    """Kronecker product in list order."""
    if not ops:
        raise ValueError("tensor() needs at least one operator")
    ops = [op if isinstance(op, Operator) else Operator(SystemShape((len(op),)), op) for op in ops]
    dims = sum((op.shape.dims for op in ops), ())
    return Operator(SystemShape(dims), reduce(np.kron, [op.matrix for op in ops]))


def embed(op, sites, shape) -> Operator:
    """Place ``op`` on ``sites`` of ``shape``, identity elsewhere.

    ``sites`` may be a single index or a sequence; for several sites the
    operator is laid out in the order given (which need not be ascending).
    """
    shape = as_shape(shape)
    if isinstance(sites, (int, np.integer)):
        sites = (int(sites),)
    sites = tuple(sites)
    m = _mat(op)
    sub = [shape.dims[s] for s in sites]
    if m.shape != (int(np.prod(sub)),) * 2:
        raise ValueError(f"operator of size {m.shape[0]} does not fit sites {sites} with dims {sub}")
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site in {sites}")

    n = len(shape.dims)
    rest = [s for s in range(n) if s not in sites]
    # bring target sites to the front, kron with identity, permute back
    order = list(sites) + rest
    rest_dim = int(np.prod([shape.dims[s] for s in rest])) if rest else 1
    full = np.kron(m, np.eye(rest_dim))
    permuted_dims = [shape.dims[s] for s in order]
    t = full.reshape(permuted_dims * 2)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    return Operator(shape, t.reshape(shape.total, shape.total))


def phase_gradation(phi: float, d: int) -> Operator:
    """Q(phi) = sum_l exp(i l phi) |l><l|."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return Operator(SystemShape((d,)), np.diag(np.exp(1j * phi * np.arange(d))))


def level_phase(level: int, phi: float, d: int) -> Operator:
    """P_l(phi): phase exp(i phi) on a single level, identity elsewhere."""
    if not 0 <= level < d:
        raise ValueError(f"level {level} out of range for d={d}")
    diag = np.ones(d, dtype=complex)
    diag[level] = np.exp(1j * phi)
    return Operator(SystemShape((d,)), np.diag(diag))


def _check_subspace(k: int, d: int):
    if not 0 <= k <= d - 2:
        raise ValueError(f"subspace index {k} out of range for d={d}")


def subspace_rz(k: int, phi: float, d: int) -> Operator:
    """Rz acting on the |k>,|k+1> pair: exp(-i phi/2) on k, exp(+i phi/2) on k+1."""
    _check_subspace(k, d)
    diag = np.ones(d, dtype=complex)
    diag[k] = np.exp(-0.5j * phi)
    diag[k + 1] = np.exp(0.5j * phi)
    return Operator(SystemShape((d,)), np.diag(diag))


def subspace_x(k: int, d: int) -> np.ndarray:
    """Generator X_k = |k><k+1| + |k+1><k| as a bare matrix."""
    _check_subspace(k, d)
    m = np.zeros((d, d), dtype=complex)
    m[k, k + 1] = m[k + 1, k] = 1.0
    return m


def subspace_y(k: int, d: int) -> np.ndarray:
    _check_subspace(k, d)
    m = np.zeros((d, d), dtype=complex)
    m[k, k + 1] = -1j
    m[k + 1, k] = 1j
    return m


def subspace_rx(k: int, theta: float, d: int, phase: float = 0.0) -> Operator:
    """exp(-i theta/2 X_k) with the drive phase ``phase`` applied as Q(-phase) . Q(phase)."""
    _check_subspace(k, d)
    m = np.eye(d, dtype=complex)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    m[k, k] = m[k + 1, k + 1] = c
    m[k, k + 1] = -1j * s * np.exp(1j * phase)
    m[k + 1, k] = -1j * s * np.exp(-1j * phase)
    return Operator(SystemShape((d,)), m)


def pi_pulse(k: int, d: int, phase: float = 0.0) -> Operator:
    """Geometric-phase corrected pi pulse in the |k>,|k+1> subspace.

    Equal to ``-i`` times the permutation swapping ``k`` and ``k+1``, i.e. the
    spectator levels pick up the same ``-i`` as the swapped pair. For d=3 this
    reproduces P_2(-pi/2) exp(-i pi X_0/2) and P_0(-pi/2) exp(-i pi X_1/2).
    A nonzero drive phase conjugates the pulse by Q(phase).
    """
    _check_subspace(k, d)
    m = -1j * np.eye(d, dtype=complex)
    m[k, k] = m[k + 1, k + 1] = 0.0
    m[k, k + 1] = -1j * np.exp(1j * phase)
    m[k + 1, k] = -1j * np.exp(-1j * phase)
    return Operator(SystemShape((d,)), m)


def cyclic_shift(direction: int, d: int) -> Operator:
    """Level-cycling gate built from chained pi pulses.

    ``direction=+1`` maps |l> -> |l+1 mod d> (X_0 X_1 ... X_{d-2}, rightmost first);
    ``direction=-1`` is the reversed chain. Both carry the global phase (-i)^(d-1).
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    pulses = [pi_pulse(k, d).matrix for k in range(d - 1)]
    if direction < 0:
        pulses = pulses[::-1]
    return Operator(SystemShape((d,)), reduce(np.matmul, pulses))


def distance_up_to_global_phase(a, b) -> float:
    """1 - |Tr(a^dag b)| / D; zero exactly when a = exp(i g) b for unitaries."""
    ma, mb = _mat(a), _mat(b)
    if isinstance(a, Operator) and isinstance(b, Operator) and a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape.dims} vs {b.shape.dims}")
    if ma.shape != mb.shape:
        raise ValueError(f"shape mismatch {ma.shape} vs {mb.shape}")
    overlap = abs(np.trace(ma.conj().T @ mb)) / ma.shape[0]
    return max(0.0, float(1.0 - overlap))


def expm(h, scale: float, shape=None) -> Operator:
    """exp(-i scale H) for Hermitian H, via eigendecomposition."""
    m = _mat(h)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ValueError("expm expects a Hermitian operator")
    if shape is None:
        shape = h.shape if isinstance(h, Operator) else SystemShape((m.shape[0],))
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return Operator(shape, (v * np.exp(-1j * scale * w)) @ v.conj().T)


# Standard qubit gates, used by circuits and tests.
PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])


def rx(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * PAULI_I - 1j * np.sin(theta / 2) * PAULI_X


def ry(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * PAULI_I - 1j * np.sin(theta / 2) * PAULI_Y


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def su2_components(u) -> np.ndarray:
    """Return (a0, ax, ay, az) with u ~ a0 I - i (ax X + ay Y + az Z).

    The global phase is removed by normalising the determinant to one and
    fixing a0 >= 0.
    """
    m = _mat(u)
    m = m / np.sqrt(np.linalg.det(m))
    a0 = np.trace(m) / 2
    comps = np.array([a0] + [1j * np.trace(p @ m) / 2 for p in (PAULI_X, PAULI_Y, PAULI_Z)])
    comps = comps.real
    if comps[0] < 0:
        comps = -comps
    return comps


def block(op, control_dim: int, i: int, j: int) -> np.ndarray:
    """Environment block <i| op |j> where site 0 is the control."""
    m = _mat(op)
    n = m.shape[0] // control_dim
    return m[i * n:(i + 1) * n, j * n:(j + 1) * n]


@dataclass(frozen=True)
class DiagonalBlockOperator:
    """sum_l exp(i phase_l) |l><l| (x) block_l with unit-determinant blocks.

    The determinant phase of each block is folded into ``phases`` on
    construction, so any unitary blocks may be passed in.
    """

    control_dim: int
    phases: np.ndarray
    blocks: tuple[np.ndarray, ...] = field(repr=False)
    env_shape: SystemShape = field(default=SystemShape(()))

    def __post_init__(self):
        d = int(self.control_dim)
        phases = np.asarray(self.phases, dtype=float).copy()
        blocks = [np.atleast_2d(np.asarray(b, dtype=complex)) for b in self.blocks]
        if len(phases) != d or len(blocks) != d:
            raise ValueError("need one phase and one block per control level")
        env = as_shape(self.env_shape)
        if not env.dims:
            env = SystemShape((blocks[0].shape[0],)) if blocks[0].shape[0] > 1 else SystemShape(())
        for b in blocks:
            if b.shape != (env.total, env.total):
                raise ValueError("all blocks must share the environment shape")
        normed = []
        for l, b in enumerate(blocks):
            n = b.shape[0]
            det = np.linalg.det(b)
            if abs(abs(det) - 1) > 1e-8:
                raise ValueError("blocks must be unitary")
            g = np.angle(det) / n
            phases[l] += g
            normed.append(b * np.exp(-1j * g))
        object.__setattr__(self, "control_dim", d)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "blocks", tuple(normed))
        object.__setattr__(self, "env_shape", env)

    @property
    def shape(self) -> SystemShape:
        return SystemShape((self.control_dim,)) + self.env_shape

    def to_operator(self) -> Operator:
        n = self.env_shape.total
        m = np.zeros((self.control_dim * n,) * 2, dtype=complex)
        for l, (ph, b) in enumerate(zip(self.phases, self.blocks)):
            m[l * n:(l + 1) * n, l * n:(l + 1) * n] = np.exp(1j * ph) * b
        return Operator(self.shape, m)

    @classmethod
    def from_operator(cls, op: Operator, control_dim: int, tol: float = 1e-10) -> "DiagonalBlockOperator":
        m = op.matrix
        n = m.shape[0] // control_dim
        for i in range(control_dim):
            for j in range(control_dim):
                if i != j and np.max(np.abs(block(m, control_dim, i, j))) > tol:
                    raise ValueError("operator is not diagonal with respect to the control")
        env = SystemShape(op.shape.dims[1:]) if len(op.shape.dims) > 1 else SystemShape(())
        blocks = [block(m, control_dim, l, l) for l in range(control_dim)]
        return cls(control_dim, np.zeros(control_dim), tuple(blocks), env)

    @classmethod
    def diagonal(cls, phases) -> "DiagonalBlockOperator":
        """Pure phase pattern with a trivial (one-dimensional) environment."""
        phases = np.asarray(phases, dtype=float)
        return cls(len(phases), phases, tuple(np.eye(1) for _ in phases))
