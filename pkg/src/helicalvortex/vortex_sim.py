"""Vortex-blob discretization of the helical vorticity and its RK4 time integration.

A field is a set of planar particles x_i with non-negative circulations G_i
summing to one; each particle moves with the helical velocity Hw(x_i) while
its circulation stays fixed.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable

import numpy as np

from .biot_savart import KernelParams, particle_velocities
from .errors import IntegrationBlowupError, ValidationError

PROFILE_KINDS = ("compact_bump", "truncated_gaussian")
# truncated Gaussian: exp(-|z|^2 / (2 s^2)) cut at |z| = GAUSS_CUT, s = GAUSS_WIDTH
GAUSS_WIDTH = 0.4
GAUSS_CUT = 1.5


@dataclass(frozen=True)
class ParticleField:
    positions: np.ndarray
    circulations: np.ndarray
    delta: float
    epsilon: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        gam = np.array(self.circulations, dtype=float).reshape(-1)
        if pos.shape[0] != gam.shape[0]:
            raise ValueError("positions and circulations differ in length")
        if np.any(gam < 0) or not np.all(np.isfinite(gam)):
            raise ValueError("circulations must be finite and non-negative")
        if not self.delta >= 0:
            raise ValueError("delta must be non-negative")
        pos.setflags(write=False)
        gam.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "circulations", gam)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def with_positions(self, positions) -> "ParticleField":
        return replace(self, positions=positions)


@dataclass(frozen=True)
class InitProfile:
    kind: str = "compact_bump"
    core_resolution: int = 16

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValidationError("profile.kind", f"must be one of {PROFILE_KINDS}, got {self.kind!r}")
        if int(self.core_resolution) != self.core_resolution or self.core_resolution < 8:
            raise ValidationError("profile.core_resolution", "must be an integer >= 8")


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.  ``dt=None`` selects 0.2 * epsilon^2.

    ``blowup_displacement`` flags a step as a numerical blowup when any particle
    moves farther than this in one step (non-finite positions always do).
    ``snapshot_every`` > 0 writes particle snapshots every that many records.
    """

    epsilon: float
    sigma: tuple = (1.0, 0.0)
    t_end: float = 0.0
    dt: float | None = None
    profile: InitProfile = dc_field(default_factory=InitProfile)
    kernel: KernelParams = dc_field(default_factory=KernelParams)
    record_every: int = 10
    snapshot_every: int = 0
    blowup_displacement: float = 1.0
    out_dir: str | None = None

    def __post_init__(self):
        if not (isinstance(self.epsilon, (int, float)) and 0 < self.epsilon < 0.5):
            raise ValidationError("epsilon", f"must lie in (0, 0.5), got {self.epsilon!r}")
        try:
            sigma = tuple(float(v) for v in self.sigma)
        except (TypeError, ValueError):
            raise ValidationError("sigma", "must be a finite pair of numbers") from None
        if len(sigma) != 2 or not all(math.isfinite(v) for v in sigma):
            raise ValidationError("sigma", "must be a finite pair of numbers")
        object.__setattr__(self, "sigma", sigma)
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValidationError("t_end", "must be finite and >= 0")
        if self.dt is None:
            object.__setattr__(self, "dt", 0.2 * self.epsilon**2)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError("dt", "must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValidationError("record_every", "must be an integer >= 1")
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 0:
            raise ValidationError("snapshot_every", "must be an integer >= 0")
        if not self.blowup_displacement > 0:
            raise ValidationError("blowup_displacement", "must be positive")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9)) if self.t_end > 0 else 0


def profile_density(kind: str, r2: np.ndarray) -> np.ndarray:
    """Un-normalized radial profile eta(z) evaluated at |z|^2."""
    r2 = np.asarray(r2, dtype=float)
    out = np.zeros_like(r2)
    if kind == "compact_bump":
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    elif kind == "truncated_gaussian":
        inside = r2 <= GAUSS_CUT**2
        out[inside] = np.exp(-r2[inside] / (2.0 * GAUSS_WIDTH**2))
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    return out


def init_blob(config: SimConfig) -> ParticleField:
    """Particles on a square grid of spacing h = 2 eps / core_resolution around sigma.

    Weights are the profile values times h^2, rescaled to unit total; the grid
    is then shifted so the discrete centre of gravity is exactly sigma.  The
    blob width is delta = 2h.
    """
    eps = config.epsilon
    h = 2.0 * eps / config.profile.core_resolution
    reach = 1.0 if config.profile.kind == "compact_bump" else GAUSS_CUT
    n = int(math.ceil(reach * eps / h)) + 1
    offsets = h * np.arange(-n, n + 1)
    gx, gy = np.meshgrid(offsets, offsets, indexing="ij")
    z2 = (gx**2 + gy**2).ravel() / eps**2
    weights = profile_density(config.profile.kind, z2) * h * h
    keep = weights > 0
    rel = np.stack([gx.ravel()[keep], gy.ravel()[keep]], axis=1)
    gamma = weights[keep] / math.fsum(weights[keep])
    gamma = gamma / math.fsum(gamma)
    sigma = np.asarray(config.sigma)
    pos = rel + sigma
    centre = np.array([math.fsum(gamma * pos[:, 0]), math.fsum(gamma * pos[:, 1])])
    pos = pos + (sigma - centre)
    return ParticleField(pos, gamma, delta=2.0 * h, epsilon=eps)


def step_rk4(field: ParticleField, dt: float, params: KernelParams = KernelParams(), backend: str | None = None) -> ParticleField:
    """One classical Runge-Kutta step of dx_i/dt = Hw(x_i); circulations unchanged."""
    if dt == 0:
        return field
    x0 = field.positions

    def rate(x):
        return particle_velocities(field.with_positions(x), params, backend)

    k1 = rate(x0)
    k2 = rate(x0 + 0.5 * dt * k1)
    k3 = rate(x0 + 0.5 * dt * k2)
    k4 = rate(x0 + dt * k3)
    return field.with_positions(x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


@dataclass
class Trajectory:
    records: list = dc_field(default_factory=list)
    snapshots: list = dc_field(default_factory=list)
    final: ParticleField | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_snapshot(path: str, t: float, field: ParticleField) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,x1,x2,gamma\n")
        for (x1, x2), g in zip(field.positions, field.circulations):
            fh.write(f"{fmt(t)},{fmt(x1)},{fmt(x2)},{fmt(g)}\n")


def simulate(
    config: SimConfig,
    backend: str | None = None,
    field: ParticleField | None = None,
    on_record: Callable | None = None,
) -> Trajectory:
    """Integrate from ``init_blob(config)`` (or ``field``) to ``config.t_end``.

    Records diagnostics at step 0, every ``record_every`` steps and at the
    final step.  The step is shortened uniformly so the run ends exactly at
    t_end.
    """
    from .diagnostics import compute_record

    field = init_blob(config) if field is None else field
    params = config.kernel
    n_steps = config.n_steps
    dt = config.t_end / n_steps if n_steps else config.dt
    traj = Trajectory()
    if config.out_dir and config.snapshot_every:
        os.makedirs(config.out_dir, exist_ok=True)

    def record(step, f):
        rec = compute_record(f, step * dt, params, backend)
        traj.records.append(rec)
        k = len(traj.records) - 1
        if config.snapshot_every and k % config.snapshot_every == 0:
            traj.snapshots.append((rec.t, f))
            if config.out_dir:
                write_snapshot(os.path.join(config.out_dir, f"particles_{k}.csv"), rec.t, f)
        if on_record is not None:
            on_record(rec)

    record(0, field)
    for step in range(1, n_steps + 1):
        new = step_rk4(field, dt, params, backend)
        moved = np.abs(new.positions - field.positions)
        if not np.all(np.isfinite(new.positions)) or np.max(np.hypot(moved[:, 0], moved[:, 1])) > config.blowup_displacement:
            raise IntegrationBlowupError(step, f"numerical blowup at step {step} (t = {step * dt:.6g})")
        field = new
        if step % config.record_every == 0 or step == n_steps:
            record(step, field)
    traj.final = field
    return traj
