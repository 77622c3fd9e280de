"""Moments, energies, concentration measures and the rotation-speed fit.

All sums over particles use ``math.fsum`` (correctly rounded), so the
algebraic identities between moments hold to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .biot_savart import KernelParams, drift_functional, pair_energy_sum
from .errors import InsufficientDataError, NormalizationError
from .geometry import japanese

ROTATION_SLOPE = -math.sqrt(2.0) / (8.0 * math.pi)
ENERGY_COEFFICIENT = math.sqrt(2.0)
# E_pair = 2 pi sum_ij G_i G_j K_G(x_i, x_j) shares the <x> log(1/|x - y|)
# diagonal singularity of E*, so the two agree up to O(1) with no rescaling.
C_NORM = 1.0

CSV_COLUMNS = ("t", "mass", "E_pair", "E_star", "M1", "M2", "Mstar", "p1", "p2", "ps1", "ps2", "D1", "D2", "mass_out")


def _fsum2(values) -> np.ndarray:
    values = np.asarray(values)
    return np.array([math.fsum(values[:, 0]), math.fsum(values[:, 1])])


@dataclass(frozen=True)
class CutoffEta:
    """Smooth radial cutoff: 0 for r <= r_lo, 1 for r >= r_hi, quintic smoothstep between."""

    r_lo: float = 10.0
    r_hi: float = 20.0

    def __call__(self, r):
        s = np.clip((np.asarray(r, dtype=float) - self.r_lo) / (self.r_hi - self.r_lo), 0.0, 1.0)
        return s**3 * (s * (6.0 * s - 15.0) + 10.0)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    E_pair: float
    E_star: float
    M1: float
    M2: float
    Mstar: float
    p: tuple
    p_star: tuple
    D1: float
    D2: float
    mass_out_sqrt_eps: float

    def to_row(self) -> list[float]:
        return [
            self.t, self.mass, self.E_pair, self.E_star, self.M1, self.M2, self.Mstar,
            self.p[0], self.p[1], self.p_star[0], self.p_star[1], self.D1, self.D2, self.mass_out_sqrt_eps,
        ]

    @classmethod
    def from_row(cls, row) -> "DiagnosticsRecord":
        v = [float(x) for x in row]
        return cls(v[0], v[1], v[2], v[3], v[4], v[5], v[6], (v[7], v[8]), (v[9], v[10]), v[11], v[12], v[13])


@dataclass(frozen=True)
class RotationFit:
    epsilons: tuple
    omegas: tuple
    slope: float
    intercept: float
    residuals: tuple
    predicted_slope: float = ROTATION_SLOPE

    @property
    def relative_slope_error(self) -> float:
        return abs(self.slope - self.predicted_slope) / abs(self.predicted_slope)


def momenta(field):
    """(mass, M1, M2, p) with M1 = sum G |x|^2, M2 = sum G |x|^4, p = sum G x."""
    pos = field.positions
    gam = field.circulations
    r2 = pos[:, 0] ** 2 + pos[:, 1] ** 2
    return (
        math.fsum(gam),
        math.fsum(gam * r2),
        math.fsum(gam * r2 * r2),
        _fsum2(gam[:, None] * pos),
    )


def _require_unit_mass(field, tol=1e-9):
    mass = math.fsum(field.circulations)
    if abs(mass - 1.0) > tol:
        raise NormalizationError(f"unit total circulation required, got {mass!r}")
    return mass


def distance_functions(field, direct: bool = False):
    """(D1, D2): spread about p, and the pair spread via 2 M1 - 2|p|^2 (or the O(N^2) sum)."""
    _require_unit_mass(field)
    _, M1, _, p = momenta(field)
    pos, gam = field.positions, field.circulations
    D1 = math.fsum(gam * ((pos[:, 0] - p[0]) ** 2 + (pos[:, 1] - p[1]) ** 2))
    if direct:
        d2 = (pos[:, None, 0] - pos[None, :, 0]) ** 2 + (pos[:, None, 1] - pos[None, :, 1]) ** 2
        D2 = math.fsum((gam[:, None] * gam[None, :] * d2).ravel())
    else:
        D2 = 2.0 * M1 - 2.0 * float(p @ p)
    return D1, D2


def m_star(field, eta: CutoffEta = CutoffEta()) -> float:
    r2 = field.positions[:, 0] ** 2 + field.positions[:, 1] ** 2
    return math.fsum(field.circulations * r2 * eta(np.sqrt(r2)))


def _log_kernel(pos):
    """log(1/|x_i - x_j|) 1{|x_i - x_j| <= 1} with a zero diagonal."""
    dist = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    np.fill_diagonal(dist, 1.0)
    return np.where(dist <= 1.0, -np.log(dist), 0.0)


def energy_star(field) -> float:
    """Logarithmic energy sum_{i != j} G_i G_j log(1/|x_i - x_j|) 1{<=1} <x_i>.

    Self-pairs contribute G_i^2 log(1/delta) <x_i> (nothing when delta = 0).
    """
    pos, gam = field.positions, field.circulations
    jx = japanese(pos)
    terms = (gam * jx)[:, None] * gam[None, :] * _log_kernel(pos)
    total = math.fsum(terms.ravel())
    if 0.0 < field.delta <= 1.0:
        total += math.fsum(gam * gam * jx) * math.log(1.0 / field.delta)
    return total


def energy_pair(field, params: KernelParams = KernelParams(), backend: str | None = None) -> float:
    """Pseudo-energy 2 pi sum_ij G_i G_j K_G(x_i, x_j), regularized diagonal included."""
    return 2.0 * math.pi * pair_energy_sum(field, params, backend)


def concentration_center(field) -> np.ndarray:
    """Particle position maximizing sum_{j != i} G_j log(1/|x_i - x_j|) 1{<=1}; first index wins ties."""
    pos, gam = field.positions, field.circulations
    potential = _log_kernel(pos) @ gam
    return pos[int(np.argmax(potential))].copy()


def mass_outside(field, center, radius: float):
    """(sum of G_i, sum of G_i <x_i>^2) over particles farther than ``radius`` from ``center``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    pos, gam = field.positions, field.circulations
    c = np.asarray(center, dtype=float)
    outside = np.hypot(pos[:, 0] - c[0], pos[:, 1] - c[1]) > radius
    weighted = gam * japanese(pos) ** 2
    return math.fsum(gam[outside]), math.fsum(weighted[outside])


def mass_inside(field, center, radius: float) -> float:
    pos, gam = field.positions, field.circulations
    c = np.asarray(center, dtype=float)
    return math.fsum(gam[np.hypot(pos[:, 0] - c[0], pos[:, 1] - c[1]) <= radius])


def angular_speed(field, params: KernelParams = KernelParams(), backend: str | None = None) -> float:
    """omega = drift . p^perp / |p|^2 from a single velocity evaluation."""
    _, _, _, p = momenta(field)
    drift = drift_functional(field, params, backend)
    return float(drift[0] * -p[1] + drift[1] * p[0]) / float(p @ p)


def fit_rotation_line(epsilons, omegas) -> RotationFit:
    """Least-squares line omega = slope * log(1/eps) + intercept."""
    eps = np.asarray(epsilons, dtype=float)
    om = np.asarray(omegas, dtype=float)
    if eps.size < 3 or eps.size != om.size:
        raise InsufficientDataError("rotation fit needs at least 3 (epsilon, omega) pairs")
    X = np.stack([np.log(1.0 / eps), np.ones_like(eps)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(X, om, rcond=None)
    resid = om - X @ np.array([slope, intercept])
    return RotationFit(tuple(eps), tuple(om), float(slope), float(intercept), tuple(resid))


def fit_rotation(epsilons, fields, params: KernelParams = KernelParams(), backend: str | None = None) -> RotationFit:
    if len(epsilons) < 3 or len(fields) != len(epsilons):
        raise InsufficientDataError("rotation fit needs at least 3 epsilons, one field each")
    return fit_rotation_line(epsilons, [angular_speed(f, params, backend) for f in fields])


def compute_record(field, t: float, params: KernelParams = KernelParams(), backend: str | None = None) -> DiagnosticsRecord:
    mass, M1, M2, p = momenta(field)
    D1, D2 = distance_functions(field)
    ps = concentration_center(field)
    out = mass_outside(field, ps, math.sqrt(field.epsilon))[1] if field.epsilon > 0 else 0.0
    return DiagnosticsRecord(
        t=float(t),
        mass=mass,
        E_pair=energy_pair(field, params, backend),
        E_star=energy_star(field),
        M1=M1,
        M2=M2,
        Mstar=m_star(field),
        p=(float(p[0]), float(p[1])),
        p_star=(float(ps[0]), float(ps[1])),
        D1=D1,
        D2=D2,
        mass_out_sqrt_eps=out,
    )


def write_diagnostics_csv(path: str, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(format(float(v), ".17g") for v in rec.to_row()) + "\n")


def read_diagnostics_csv(path: str) -> list[DiagnosticsRecord]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected diagnostics header {header}")
        return [DiagnosticsRecord.from_row(line.strip().split(",")) for line in fh if line.strip()]
