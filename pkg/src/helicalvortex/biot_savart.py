"""Helical Biot-Savart law for planar particle fields.

The velocity kernel is the periodized angular integral

    K(x, y) = int_{-pi}^{pi} grad G((x, 0) - (R_a y, a)) ^ xi(R_a y, a) da

and the induced planar velocity is Hw(x) = sum_j G_j [(K1, K2) + x^perp K3].
Only the free-space 1/(4 pi |.|) part of G is mollified by the blob width
delta; the smooth image remainder is used as is.

All angular integrals share one quadrature design: find the angle a* of
nearest approach between (x, 0) and the helix through y, then cluster
Gauss-Legendre nodes around it with the map a = a* + mu sinh(t), where mu is
the width of the near-singular layer.  Far pairs (mu >= near_threshold) use
plain composite Gauss-Legendre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from ._backend import get_kernels
from ._kernels_numpy import nearest_angle
from .errors import NormalizationError, SingularPairError
from .geometry import japanese, perp, rotate
from .greens import GreensParams, gauss_legendre, grad_green, grad_green_regularized

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class KernelParams:
    """Quadrature and regularization controls for the angular kernel integrals.

    ``near_threshold`` is compared with the width of the near-singular layer
    (roughly the closest approach distance, floored by ``delta``).  Eight image
    pairs already resolve the Green's remainder to about 1e-9, so that is the
    default here.
    """

    greens: GreensParams = dc_field(default_factory=lambda: GreensParams(image_count=8))
    quad_panels: int = 2
    quad_order: int = 16
    delta: float = 0.0
    near_threshold: float = 1.0

    def __post_init__(self):
        if self.quad_panels < 2:
            raise ValueError("quad_panels must be >= 2")
        if not 4 <= self.quad_order <= 32:
            raise ValueError("quad_order must lie in 4..32")
        if not self.delta >= 0 or not math.isfinite(self.delta):
            raise ValueError("delta must be finite and non-negative")
        if not self.near_threshold > 0:
            raise ValueError("near_threshold must be positive")


@dataclass(frozen=True)
class PairVelocity:
    u1: float
    u2: float
    u3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2, self.u3])


@lru_cache(maxsize=None)
def _rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    return np.array(x), np.array(w)


def _kernel_args(params: KernelParams, delta: float):
    gl_x, gl_w = _rule(params.quad_order)
    return float(delta), params.greens.image_count, gl_x, gl_w, params.quad_panels, params.near_threshold


def _check_pair(x, y, delta):
    if delta == 0.0 and np.array_equal(np.asarray(x, float), np.asarray(y, float)):
        raise SingularPairError("coincident pair with delta = 0")


def pair_kernel(x, y, params: KernelParams = KernelParams(), backend: str | None = None) -> PairVelocity:
    """Per-pair velocity kernel K(x, y) at the slice x3 = 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_pair(x, y, params.delta)
    kxy, _, _ = get_kernels(backend).pair_values(x, y, *_kernel_args(params, params.delta))
    return PairVelocity(*map(float, kxy))


def energy_pair_kernel(x, y, params: KernelParams = KernelParams(), backend: str | None = None) -> float:
    """K_G(x, y) = int G_delta((x,0) - (R_a y, a)) xi(x,0).xi(R_a y, a) da."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_pair(x, y, params.delta)
    return get_kernels(backend).pair_values(x, y, *_kernel_args(params, params.delta))[2]


def _field_arrays(field):
    pos = np.asarray(field.positions, dtype=float).reshape(-1, 2)
    gam = np.asarray(field.circulations, dtype=float)
    if pos.shape[0] == 0:
        raise ValueError("field has no particles")
    return pos, gam


def particle_velocities(field, params: KernelParams = KernelParams(), backend: str | None = None) -> np.ndarray:
    """Hw at every particle of ``field`` (blob width taken from the field), shape (N, 2)."""
    pos, gam = _field_arrays(field)
    return get_kernels(backend).particle_velocities(pos, gam, *_kernel_args(params, field.delta))


def velocity_H(field, x, params: KernelParams = KernelParams(), backend: str | None = None) -> np.ndarray:
    """Hw at planar point(s) ``x``; returns shape (2,) for one point, (n, 2) for many."""
    pos, gam = _field_arrays(field)
    x = np.asarray(x, dtype=float)
    targets = np.atleast_2d(x)
    if field.delta == 0.0 and any((pos == t).all(axis=1).any() for t in targets):
        raise SingularPairError("evaluation point coincides with a particle and delta = 0")
    vel = get_kernels(backend).target_velocities(targets, pos, gam, *_kernel_args(params, field.delta))
    return vel[0] if x.ndim == 1 else vel


def pair_energy_sum(field, params: KernelParams = KernelParams(), backend: str | None = None) -> float:
    """sum_ij G_i G_j K_G(x_i, x_j), diagonal included (regularized by the field's delta)."""
    pos, gam = _field_arrays(field)
    if field.delta == 0.0:
        raise SingularPairError("energy double sum needs a positive blob width")
    return float(get_kernels(backend).pair_energy(pos, gam, *_kernel_args(params, field.delta)))


def _require_unit_mass(gam):
    total = math.fsum(gam)
    if abs(total - 1.0) > 1e-9:
        raise NormalizationError(f"total circulation must be 1, got {total!r}")


def drift_functional(field, params: KernelParams = KernelParams(), backend: str | None = None) -> np.ndarray:
    """sum_i G_i Hw(x_i): the instantaneous velocity of the centre of gravity."""
    pos, gam = _field_arrays(field)
    _require_unit_mass(gam)
    vel = particle_velocities(field, params, backend)
    return np.array([math.fsum(gam * vel[:, 0]), math.fsum(gam * vel[:, 1])])


def drift_leading_term(field) -> np.ndarray:
    """-(1/4 pi) sum_ij G_i G_j log(1/|x_i - x_j|) 1{|x_i - x_j| <= 1} x_i^perp / <x_i>.

    The diagonal uses log(1/delta) in place of the divergent self-distance.
    """
    pos, gam = _field_arrays(field)
    _require_unit_mass(gam)
    dist = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    np.fill_diagonal(dist, 1.0)
    logs = np.where(dist <= 1.0, -np.log(dist), 0.0)
    if field.delta > 0:
        np.fill_diagonal(logs, math.log(1.0 / field.delta) if field.delta <= 1.0 else 0.0)
    weight = logs @ gam
    direction = perp(pos) / japanese(pos)[:, None]
    terms = (gam * weight)[:, None] * direction
    return -np.array([math.fsum(terms[:, 0]), math.fsum(terms[:, 1])]) / FOUR_PI


def g_transport(x, y, params: KernelParams = KernelParams()) -> float:
    """Transport kernel (x', 0) . grad G(x - y) ^ xi(y) for points of R^2 x T.

    Expanded: x1 d2G - x2 d1G + (x1 y1 + x2 y2) d3G, with G evaluated at x - y.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    diff[2] = math.remainder(diff[2], 2.0 * np.pi)
    if params.delta == 0.0 and not np.any(diff):
        raise SingularPairError("coincident points in transport kernel")
    if params.delta > 0:
        g = grad_green_regularized(diff, params.delta, params.greens)
    else:
        g = grad_green(diff, params.greens)
    return float(x[0] * g[1] - x[1] * g[0] + (x[0] * y[0] + x[1] * y[1]) * g[2])


# --------------------------------------------------------------------------
# Auxiliary kernels K1, K0*, K2
# --------------------------------------------------------------------------


def sinh_rule(lo: float, hi: float, anchor: float, mu: float, panels: int, order: int):
    """Nodes and weights on [lo, hi] clustered toward ``anchor`` with width ``mu``.

    Uses a = anchor + mu sinh(t) and composite Gauss-Legendre in t.  The anchor
    may lie anywhere; for best accuracy split the interval at it first.
    """
    t0 = math.asinh((lo - anchor) / mu)
    t1 = math.asinh((hi - anchor) / mu)
    gx, gw = _rule(order)
    edges = np.linspace(t0, t1, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    t = (edges[:-1, None] + half * (gx + 1.0)).ravel()
    w = (half * gw).ravel()
    return anchor + mu * np.sinh(t), w * mu * np.cosh(t)


def _clustered_nodes(x, y, lo, hi, params: KernelParams, extra_breaks=()):
    a_star, fmin, curv = nearest_angle(x, y)
    a_star, fmin, curv = float(a_star[0]), float(fmin[0]), float(curv[0])
    if fmin == 0.0:
        raise SingularPairError("coincident points in auxiliary kernel")
    mu = math.sqrt(fmin / curv)
    anchor = min(max(a_star, lo), hi)
    breaks = sorted({lo, hi, anchor, *[b for b in extra_breaks if lo < b < hi]})
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a <= 0:
            continue
        n, w = sinh_rule(a, b, anchor, mu, params.quad_panels, params.quad_order)
        nodes.append(n)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def helix_distance2(x, y, a):
    """|x - R_a y|^2 + a^2."""
    q = rotate(np.asarray(a), np.broadcast_to(np.asarray(y, float), np.shape(a) + (2,)))
    return (x[0] - q[..., 0]) ** 2 + (x[1] - q[..., 1]) ** 2 + np.asarray(a) ** 2


def kernel_K1(x, y, params: KernelParams = KernelParams()) -> float:
    """(1/4 pi) int_{-2 pi}^{2 pi} (2 pi - |b|) / sqrt(|x - R_b y|^2 + b^2) db."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b, w = _clustered_nodes(x, y, -2 * np.pi, 2 * np.pi, params, extra_breaks=(0.0,))
    return float(np.dot(w, (2 * np.pi - np.abs(b)) / np.sqrt(helix_distance2(x, y, b)))) / FOUR_PI


def kernel_K0star(x, y, params: KernelParams = KernelParams()) -> float:
    """int_{-pi}^{pi} (|x - R_a y|^2 + a^2)^(-3/2) da."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, w = _clustered_nodes(x, y, -np.pi, np.pi, params)
    return float(np.dot(w, helix_distance2(x, y, a) ** -1.5))


def kernel_K2(x, y, params: KernelParams = KernelParams()) -> float:
    """int_{-pi}^{pi} a^2 (|x - R_a y|^2 + a^2)^(-3/2) da."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, w = _clustered_nodes(x, y, -np.pi, np.pi, params)
    return float(np.dot(w, a * a * helix_distance2(x, y, a) ** -1.5))


def k1_leading(x, y) -> float:
    """log(1/|x - y|) / <x>, the diagonal asymptote of K1."""
    return math.log(1.0 / float(np.hypot(*(np.asarray(x) - np.asarray(y))))) / float(japanese(np.asarray(x, float)))


def k2_leading(x, y) -> float:
    """2 log(1/|x - y|) / <x>^3, the diagonal asymptote of K2."""
    return 2.0 * math.log(1.0 / float(np.hypot(*(np.asarray(x) - np.asarray(y))))) / float(japanese(np.asarray(x, float))) ** 3


def pair_kernel_line(x, y, half_width: float = 200 * np.pi, order: int = 24) -> np.ndarray:
    """Slow reference: the unperiodized line integral over |a| <= half_width.

    K(x,y) = -(1/4 pi) int [(x,0) - (R_a y, a)] / |...|^3 ^ xi(R_a y, a) da.
    One Gauss panel per unit of a plus sinh clustering near a*; the omitted
    tails are O(1 / half_width^2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_pair(x, y, 0.0)
    a_star, fmin, curv = (float(v[0]) for v in nearest_angle(x, y))
    mu = math.sqrt(fmin / curv)
    near = 4 * np.pi
    parts = [sinh_rule(a_star - near, a_star, a_star, mu, 8, order), sinh_rule(a_star, a_star + near, a_star, mu, 8, order)]
    gx, gw = _rule(order)
    for lo, hi in ((-half_width, a_star - near), (a_star + near, half_width)):
        n = max(1, int(math.ceil((hi - lo) / 1.0)))
        edges = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(edges)[:, None]
        parts.append(((edges[:-1, None] + half * (gx + 1.0)).ravel(), (half * gw).ravel()))
    a = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    q = rotate(a, np.broadcast_to(y, a.shape + (2,)))
    d = np.stack([x[0] - q[:, 0], x[1] - q[:, 1], -a], axis=1)
    xi_ = np.stack([q[:, 1], -q[:, 0], np.ones_like(a)], axis=1)
    integrand = -np.cross(d, xi_) / (FOUR_PI * np.linalg.norm(d, axis=1)[:, None] ** 3)
    return w @ integrand
