"""Cross-resonance unitaries, cyclic CR, generalized CX constructions and CR calibration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares, minimize, minimize_scalar
from scipy.spatial.transform import Rotation

from .circuit import TimedCircuit
from .core import (
    Operator,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    SystemShape,
    block,
    cyclic_shift,
    embed,
    expm,
    pi_pulse,
    su2_components,
    subspace_x,
)
from .cycling import XPLUS_DURATION, cycle_global_phase

RXZ_DURATION = 8
PULSE_DURATION = 1


def wrap_angle(x):
    """Principal value in (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


@dataclass(frozen=True)
class CrParams:
    """Per-control-level coefficients of a CR pulse on a truncated target qubit."""

    phi: tuple[float, ...]
    psi: tuple[float, ...]
    lam: tuple[float, ...] = ()
    chi: tuple[float, ...] = ()
    polarity: int = 1
    k: int = 0

    def __post_init__(self):
        d = len(self.phi)
        vals = {}
        for name in ("phi", "psi", "lam", "chi"):
            v = tuple(float(x) for x in getattr(self, name)) or (0.0,) * d
            if len(v) != d:
                raise ValueError(f"{name} must have one entry per control level")
            vals[name] = v
        if d < 2:
            raise ValueError("control dimension must be >= 2")
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")
        for name, v in vals.items():
            object.__setattr__(self, name, v)

    @property
    def d(self) -> int:
        return len(self.phi)

    @property
    def is_ideal(self) -> bool:
        return not any(self.lam) and not any(self.chi)

    def flipped(self, sign: int = -1) -> "CrParams":
        return replace(self, polarity=self.polarity * sign)

    def to_dict(self) -> dict:
        return {"phi": list(self.phi), "psi": list(self.psi), "lam": list(self.lam), "chi": list(self.chi),
                "polarity": self.polarity, "k": self.k}

    @classmethod
    def from_dict(cls, data: dict) -> "CrParams":
        return cls(tuple(data["phi"]), tuple(data["psi"]), tuple(data.get("lam", ())), tuple(data.get("chi", ())),
                   int(data.get("polarity", 1)), int(data.get("k", 0)))


def cr_block(phi, psi, lam, chi, polarity=1) -> np.ndarray:
    gen = phi * PAULI_I + polarity * (psi * PAULI_X + lam * PAULI_Y) + chi * PAULI_Z
    return expm(gen, 0.5).matrix


def cr_unitary(params: CrParams) -> Operator:
    """sum_l |l><l| (x) exp(-i [phi_l I +- psi_l X +- lam_l Y + chi_l Z] / 2)."""
    d = params.d
    m = np.zeros((2 * d, 2 * d), dtype=complex)
    for l in range(d):
        m[2 * l:2 * l + 2, 2 * l:2 * l + 2] = cr_block(params.phi[l], params.psi[l], params.lam[l], params.chi[l],
                                                       params.polarity)
    return Operator(SystemShape((d, 2)), m)


@dataclass(frozen=True)
class CycrResult:
    dense: Operator = field(repr=False)
    Psi: tuple[float, ...]
    Phi: float
    analytic: Operator = field(repr=False)


def cycr(params: CrParams, signs) -> CycrResult:
    """Cyclic CR: X+ U^(s_{d-1}) ... X+ U^(s_0) with its closed form.

    ``analytic`` includes the scalar of X+^d so that it matches ``dense`` exactly.
    """
    if not params.is_ideal:
        raise ValueError("cycr expects ideal CR parameters (no Y or Z terms)")
    d = params.d
    signs = [int(s) for s in signs]
    if len(signs) != d or any(s not in (1, -1) for s in signs):
        raise ValueError("need one polarity sign (+1/-1) per control level")
    shape = SystemShape((d, 2))
    shift = embed(cyclic_shift(1, d), 0, shape)
    u = Operator(shape, np.eye(2 * d))
    for s in signs:
        u = shift @ cr_unitary(params.flipped(s)) @ u
    pol = params.polarity
    psi = np.asarray(params.psi)
    Psi = tuple(float(pol * sum(signs[j] * psi[(l + j) % d] for j in range(d))) for l in range(d))
    Phi = float(sum(params.phi))
    m = np.zeros((2 * d, 2 * d), dtype=complex)
    for l in range(d):
        m[2 * l:2 * l + 2, 2 * l:2 * l + 2] = expm(PAULI_X, Psi[l] / 2).matrix
    analytic = Operator(shape, cycle_global_phase(d) * np.exp(-0.5j * Phi) * m)
    return CycrResult(u, Psi, Phi, analytic)


def check_cx_condition(Psi, tol: float = 1e-9) -> bool:
    """Psi_0 = Psi_2 and Psi_1 = Psi_0 +- pi, all modulo 2 pi."""
    if len(Psi) != 3:
        raise ValueError("condition is defined for a qutrit control")
    p0, p1, p2 = (float(x) for x in Psi)
    return abs(wrap_angle(p0 - p2)) < tol and abs(abs(wrap_angle(p0 - p1)) - math.pi) < tol


def generalized_cx(d: int = 3, level: int = 1) -> Operator:
    """X on a qubit target when the qudit control is in ``level``, identity otherwise."""
    shape = SystemShape((d, 2))
    m = np.eye(2 * d, dtype=complex)
    m[2 * level:2 * level + 2, 2 * level:2 * level + 2] = PAULI_X
    return Operator(shape, m)


def generalized_cz(d: int = 3, level: int = 1) -> Operator:
    shape = SystemShape((d, 2))
    diag = np.ones(2 * d, dtype=complex)
    diag[2 * level + 1] = -1
    return Operator(shape, np.diag(diag))


@dataclass(frozen=True)
class CrRateModel:
    """Linear dependence of the CR angles on pulse duration at reference amplitude.

    ``psi_l(T) = amplitude * psi_rates[l] * T`` and likewise for ``phi``.
    """

    psi_rates: tuple[float, ...]
    phi_rates: tuple[float, ...] = ()

    def __post_init__(self):
        a = tuple(float(x) for x in self.psi_rates)
        b = tuple(float(x) for x in self.phi_rates) or (0.0,) * len(a)
        if len(b) != len(a):
            raise ValueError("rate lists must have equal length")
        if not all(np.isfinite(a + b)):
            raise ValueError("rates must be finite")
        if not any(a):
            raise ValueError("at least one psi rate must be nonzero")
        object.__setattr__(self, "psi_rates", a)
        object.__setattr__(self, "phi_rates", b)

    def params(self, duration: float, amplitude: float = 1.0, k: int = 0) -> CrParams:
        s = amplitude * duration
        return CrParams(tuple(s * b for b in self.phi_rates), tuple(s * a for a in self.psi_rates), k=k)


def _w_combination(a, k):
    """Coefficient c with Psi_1 - Psi_0 = 2 c T for the M_k sequence."""
    a0, a1, a2 = a
    return a0 + a1 - 2 * a2 if k == 0 else a1 + a2 - 2 * a0


M_SIGNS = {0: (1, -1, 1), 1: (1, 1, -1)}


def forward_gencx(rates: CrRateModel, min_spacing: float = 0.0, grid: float = 1.0, k: int | None = None,
                  xplus_duration: float = XPLUS_DURATION, pulse_duration: float = PULSE_DURATION):
    """Generalized CX from the M_k cyclic-CR sequence.

    Returns ``(circuit, theta)`` on the register (qutrit, qubit). The chosen
    subspace, pulse duration and amplitude scale are stored in the circuit
    metadata.
    """
    if len(rates.psi_rates) != 3:
        raise ValueError("forward generalized CX needs a qutrit control")
    combos = {kk: _w_combination(rates.psi_rates, kk) for kk in (0, 1)}
    candidates = [k] if k is not None else [0, 1]
    best = max(candidates, key=lambda kk: abs(combos[kk]))
    c = combos[best]
    if abs(c) < 1e-12:
        raise ValueError("CR rates admit no duration satisfying the CX condition")
    t_exact = math.pi / (2 * abs(c))
    t_pulse = math.ceil(t_exact / grid - 1e-9) * grid if grid > 0 else t_exact
    scale = t_exact / t_pulse
    params = rates.params(t_pulse, scale)
    psi = np.asarray(params.psi)
    theta = float(2 * (psi[2] if best == 0 else psi[0]))
    # Psi_1 - Psi_0 = sign(c) * pi; the leftover -i X or +i X is undone by P1
    p1_phase = math.copysign(math.pi / 2, c)

    w_len = 2 * t_pulse + 2 * pulse_duration
    spacing = max(w_len + xplus_duration, min_spacing)
    if grid > 0:
        spacing = math.ceil(spacing / grid - 1e-9) * grid
    circ = TimedCircuit((3, 2))
    t = 0.0
    xplus_times = []
    for s in M_SIGNS[best]:
        p = params.flipped(s)
        for _ in range(2):
            circ.add("cr", (0, 1), t, t_pulse, tag="cr", **p.to_dict())
            t += t_pulse
            circ.add("pi", 0, t, pulse_duration, tag="w_echo", k=best)
            t += pulse_duration
        t = (xplus_times[-1] + spacing) if xplus_times else t
        circ.add("xplus", 0, t, xplus_duration, tag="cycle")
        xplus_times.append(t)
        t += xplus_duration
        # the next W block starts right after the shift; spacing padding goes after it
    circ.add("rx", 1, t, pulse_duration, tag="frame", theta=-theta)
    circ.add("level_phase", 0, t, 0.0, tag="frame", level=1, phi=p1_phase)
    circ.duration = t + pulse_duration
    circ.metadata.update(p2_coeff=-3 * spacing, p2_site=0, k=best, pulse_duration=t_pulse, amplitude_scale=scale,
                         theta=theta, spacing=spacing)
    return circ, theta


def backward_gencz(t0: float = 0.0, min_spacing: float = 0.0, xplus_duration: float = XPLUS_DURATION,
                   rxz_duration: float = RXZ_DURATION, pulse_duration: float = PULSE_DURATION,
                   qutrit: int = 0, qubit: int = 1, dims=(3, 2)) -> TimedCircuit:
    """Qutrit-level-1 controlled Z from two R_xz(pi/2) pulses inside three equispaced X+ gates."""
    body = 2 * rxz_duration + pulse_duration
    tau = max(xplus_duration + body, min_spacing)
    c = TimedCircuit(dims)
    t = t0
    c.add("xplus", qutrit, t, xplus_duration, tag="cycle")
    t += xplus_duration
    for _ in range(2):
        c.add("rxz", (qutrit, qubit), t, rxz_duration, tag="cr", theta=math.pi / 2, k=0)
        t += rxz_duration
    c.add("rx_sub", qutrit, t, pulse_duration, tag="geometric", k=0, theta=-math.pi)
    c.add("rz", qubit, t, 0.0, tag="geometric", phi=math.pi)
    c.add("xplus", qutrit, t0 + tau, xplus_duration, tag="cycle")
    c.add("xplus", qutrit, t0 + 2 * tau, xplus_duration, tag="cycle")
    c.duration = t0 + 2 * tau + xplus_duration
    c.metadata.update(p2_coeff=-3 * tau, p2_site=qutrit, spacing=tau)
    return c


def backward_gencx(min_spacing: float = 0.0, **kw) -> TimedCircuit:
    """Generalized CZ conjugated by Hadamards on the qubit target."""
    pulse = kw.get("pulse_duration", PULSE_DURATION)
    cz = backward_gencz(t0=pulse, min_spacing=min_spacing, **kw)
    c = TimedCircuit(cz.dims)
    c.add("h", 1, 0.0, pulse, tag="basis")
    c.extend(cz)
    c.add("h", 1, cz.end, pulse, tag="basis")
    c.metadata.update(cz.metadata)
    # origin of the detuning phase is the first X+ gate, so the P2 prediction is unchanged
    return c


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class So3Fit:
    psi: float
    lam: float
    chi: float
    residual: float
    is_unitary: bool


def so3_matrix(u2) -> np.ndarray:
    """R_ij = Tr(sigma_i U sigma_j U^dag) / 2 for a 2x2 unitary."""
    u = u2.matrix if isinstance(u2, Operator) else np.asarray(u2)
    paulis = (PAULI_X, PAULI_Y, PAULI_Z)
    return np.array([[0.5 * np.trace(a @ u @ b @ u.conj().T).real for b in paulis] for a in paulis])


def unitary_so3_fit(expectations, threshold: float = 1e-3) -> So3Fit:
    """Least-squares rotation vector (psi, lam, chi) for a measured 3x3 transfer matrix.

    Column j holds the Bloch vector measured after preparing the +1 eigenstate
    of X, Y or Z. The rotation angle is kept in [0, pi].
    """
    r = np.asarray(expectations, dtype=float)
    if r.shape != (3, 3):
        raise ValueError("expectations must be a 3x3 matrix")
    u, _, vt = np.linalg.svd(r)
    closest = u @ np.diag([1, 1, np.sign(np.linalg.det(u @ vt))]) @ vt
    v0 = Rotation.from_matrix(closest).as_rotvec()

    def resid(v):
        return (Rotation.from_rotvec(v).as_matrix() - r).ravel()

    sol = least_squares(resid, v0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    v = sol.x
    ang = np.linalg.norm(v)
    if ang > np.pi:
        # fold back into the principal range
        v = v / ang * (ang - 2 * np.pi * math.floor((ang + np.pi) / (2 * np.pi)))
    res = float(np.sqrt(np.mean(resid(v) ** 2)))
    return So3Fit(float(v[0]), float(v[1]), float(v[2]), res, res < threshold)


@dataclass(frozen=True)
class CrCalibration:
    drive_phase: float
    stark_z: float
    rotary: float
    residual_before: float
    residual_after: float
    calibrated: CrParams = field(repr=False)
    converged: bool = True

    def to_dict(self) -> dict:
        return {"drive_phase": self.drive_phase, "stark_z": self.stark_z, "rotary": self.rotary,
                "residual_before": self.residual_before, "residual_after": self.residual_after,
                "converged": self.converged, "calibrated": self.calibrated.to_dict()}


def apply_corrections(params: CrParams, drive_phase: float = 0.0, stark_z: float = 0.0,
                      rotary: float = 0.0) -> CrParams:
    """Rotate the X/Y plane by the drive phase shift, offset Z, add a rotary X term."""
    c, s = math.cos(drive_phase), math.sin(drive_phase)
    psi = np.asarray(params.psi)
    lam = np.asarray(params.lam)
    new_psi = c * psi - s * lam + rotary
    new_lam = s * psi + c * lam
    new_chi = np.asarray(params.chi) + stark_z
    return replace(params, psi=tuple(new_psi), lam=tuple(new_lam), chi=tuple(new_chi))


def w_block_content(params: CrParams, k: int) -> float:
    """Norm of the Y and Z components of the per-level blocks of X_k U X_k U."""
    u = cr_unitary(params).matrix
    x = embed(pi_pulse(k, params.d), 0, (params.d, 2)).matrix
    w = x @ u @ x @ u
    total = 0.0
    for l in range(params.d):
        comps = su2_components(block(w, params.d, l, l))
        total += comps[2] ** 2 + comps[3] ** 2
    return math.sqrt(total)


def calibrate_cr(physical: CrParams, k: int = 2, bounds=(-2 * math.pi, 2 * math.pi), grid_points: int = 721,
                 threshold: float = 1e-3) -> CrCalibration:
    """Zero the Y and Z terms at control level ``k`` in closed form, then tune a rotary tone.

    Level ``k`` is 2 for the W blocks built on X_0 and 0 for those built on X_1.
    """
    if k not in (0, 2):
        raise ValueError("designated level must be 0 or 2")
    if physical.d != 3:
        raise ValueError("calibration is defined for a qutrit control")
    w_sub = 0 if k == 2 else 1
    before = w_block_content(physical, w_sub)
    psi_k, lam_k = physical.psi[k], physical.lam[k]
    drive_phase = -math.atan2(lam_k, psi_k) if (psi_k or lam_k) else 0.0
    stark_z = -physical.chi[k]
    base = apply_corrections(physical, drive_phase, stark_z)

    def objective(rho):
        return w_block_content(apply_corrections(base, rotary=rho), w_sub)

    if objective(0.0) < 1e-12:
        # already pure X: a rotary tone would change nothing
        rho = 0.0
    else:
        grid = np.linspace(bounds[0], bounds[1], grid_points)
        values = np.array([objective(r) for r in grid])
        i = int(np.argmin(values))
        step = grid[1] - grid[0]
        lo, hi = max(bounds[0], grid[i] - step), min(bounds[1], grid[i] + step)
        sol = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        rho = float(sol.x) if sol.fun <= values[i] else float(grid[i])
    after = objective(rho)
    if after >= 1e-12:
        # level-dependent Y/Z terms couple the three knobs; polish them jointly from the closed-form start
        joint = lambda x: w_block_content(apply_corrections(physical, *x), w_sub)
        sol = minimize(joint, [drive_phase, stark_z, rho], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        if sol.fun < after:
            drive_phase, stark_z, rho = (float(v) for v in sol.x)
            base = apply_corrections(physical, drive_phase, stark_z)
            after = objective(rho)
    calibrated = apply_corrections(base, rotary=rho)
    return CrCalibration(drive_phase, stark_z, rho, before, after, calibrated,
                         after < threshold or after <= before / 10)


# ---------------------------------------------------------------------------
# Hamiltonian coefficient bookkeeping


def qubit_cr_coefficients(nu, omega, delta) -> dict:
    """Pauli-product coefficients of a two-qubit CR Hamiltonian from per-level terms.

    ``delta[l]`` is the Z coefficient of the traceless diagonal term at control level l.
    """
    nu0, nu1 = nu
    w0, w1 = omega
    d0, d1 = delta
    return {
        "II": (nu0 + nu1) / 2,
        "IX": (w0 + w1) / 2,
        "IZ": (d0 + d1) / 2,
        "ZI": (nu0 - nu1) / 2,
        "ZX": (w0 - w1) / 2,
        "ZZ": (d0 - d1) / 2,
    }


def level_coefficients(coeffs: dict) -> tuple[tuple, tuple, tuple]:
    """Inverse of :func:`qubit_cr_coefficients`."""
    nu = (coeffs.get("II", 0.0) + coeffs["ZI"], coeffs.get("II", 0.0) - coeffs["ZI"])
    omega = (coeffs["IX"] + coeffs["ZX"], coeffs["IX"] - coeffs["ZX"])
    delta = (coeffs["IZ"] + coeffs["ZZ"], coeffs["IZ"] - coeffs["ZZ"])
    return nu, omega, delta


def qudit_cr_hamiltonian(nu, omega, delta_diag, polarity: int = 1, k: int = 0, target_dim: int = 2) -> Operator:
    """(1/2) sum_l |l><l| (x) (nu_l I +- omega_l X_k + Delta_l) with Delta_l given as diagonals."""
    d = len(nu)
    xk = subspace_x(k, target_dim)
    h = np.zeros((d * target_dim,) * 2, dtype=complex)
    for l in range(d):
        dl = np.diag(np.asarray(delta_diag[l], dtype=float))
        if abs(np.trace(dl)) > 1e-12:
            raise ValueError("Delta_l must be traceless")
        blk = nu[l] * np.eye(target_dim) + polarity * omega[l] * xk + dl
        h[l * target_dim:(l + 1) * target_dim, l * target_dim:(l + 1) * target_dim] = 0.5 * blk
    return Operator((d, target_dim), h)
