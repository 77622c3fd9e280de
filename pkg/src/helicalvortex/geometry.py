"""Helical-symmetry primitives: planar rotation, screw motion, the direction field xi.

Points are plain numpy arrays whose last axis holds the coordinates, so every
function here broadcasts over leading axes.  Angles are never reduced except
where a coordinate is explicitly periodic.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi


def reduce_angle(theta):
    """Map an angle (or x3 coordinate) into [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi


def rotate(theta, p):
    """Clockwise planar rotation R_theta p = (p1 cos + p2 sin, -p1 sin + p2 cos)."""
    p = np.asarray(p, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c * p[..., 0] + s * p[..., 1], -s * p[..., 0] + c * p[..., 1]], axis=-1)


def rotation_matrix(theta) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def perp(p):
    """p^perp = (-p2, p1)."""
    p = np.asarray(p, dtype=float)
    return np.stack([-p[..., 1], p[..., 0]], axis=-1)


def japanese(p):
    """<x> = sqrt(1 + |x|^2) over the planar components."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(1.0 + p[..., 0] ** 2 + p[..., 1] ** 2)


def screw(theta, p, periodic: bool = False):
    """Screw motion S_theta p = (R_theta p', p3 + theta)."""
    p = np.asarray(p, dtype=float)
    planar = rotate(theta, p[..., :2])
    x3 = p[..., 2] + theta
    if periodic:
        x3 = reduce_angle(x3)
    return np.concatenate([planar, np.asarray(x3)[..., None]], axis=-1)


def xi(p):
    """Helical direction field xi(x) = (x2, -x1, 1)."""
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 1], -p[..., 0], np.ones_like(p[..., 0])], axis=-1)


def helical_lift(w: Callable) -> Callable:
    """Return F(x1, x2, x3) = w(R_{-x3}(x1, x2)) for a planar function w(z)."""

    def lifted(x1, x2, x3):
        z = rotate(-np.asarray(x3), np.stack(np.broadcast_arrays(x1, x2), axis=-1))
        return w(z)

    return lifted


def helical_average(f: Callable, p, n_quad: int = 64) -> float:
    """Average of f(R_a p, a) over a in [-pi, pi) by the periodic trapezoid rule.

    ``f`` is called with three arrays (x1, x2, x3).  For a helical f this
    recovers its planar trace at p.
    """
    if n_quad < 4:
        raise ValueError("n_quad must be at least 4")
    a = -np.pi + TWO_PI * np.arange(n_quad) / n_quad
    q = rotate(a, np.broadcast_to(np.asarray(p, dtype=float), (n_quad, 2)))
    vals = np.asarray(f(q[:, 0], q[:, 1], a), dtype=float)
    if vals.shape != (n_quad,) or not np.all(np.isfinite(vals)):
        raise ValueError("field evaluation returned a non-finite or mis-shaped result")
    return float(np.mean(vals))


def lifted_weighted_mass(positions, weights, m: float = 0.0, n_quad: int = 64) -> float:
    """Weighted L^1_m mass of the helical lift of a discrete planar measure.

    Integrates over x3 in [-pi, pi) the mass of the particles placed at
    R_{x3} x_i with weight <x>^m; equals 2 pi times the planar weighted mass.
    """
    pos = np.asarray(positions, dtype=float)
    g = np.asarray(weights, dtype=float)
    a = -np.pi + TWO_PI * np.arange(n_quad) / n_quad
    slices = [np.sum(np.abs(g) * japanese(rotate(ak, pos)) ** m) for ak in a]
    return float(TWO_PI * np.mean(slices))
