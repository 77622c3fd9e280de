"""Vectorized numpy fallback for the pair loops in ``_kernels_numba``.

Same quadrature, same node layout and the same row-reduction order; the pair
integrals are evaluated for all unordered pairs at once as (pairs, nodes)
arrays.  Slower and memory-hungrier than the compiled path, but dependency-free.
"""

from __future__ import annotations

import numpy as np

from .greens import SINGULAR_CONSTANT, image_sums

FOUR_PI = 4.0 * np.pi
NEWTON_STEPS = 12
# pairs integrated per chunk, bounds the (pairs, nodes) temporaries
CHUNK = 4096


def nearest_angle(x, y):
    """Vectorized a*, minimum of |x - R_a y|^2 + a^2, and floored curvature."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    A = x[:, 0] * y[:, 0] + x[:, 1] * y[:, 1]
    B = x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]
    base = np.sum(x * x, axis=1) + np.sum(y * y, axis=1)
    R = np.hypot(A, B)
    a = R * np.arctan2(B, A) / (R + 1.0)
    for _ in range(NEWTON_STEPS):
        c, s = np.cos(a), np.sin(a)
        d1 = 2.0 * A * s - 2.0 * B * c + 2.0 * a
        d2 = 2.0 * A * c + 2.0 * B * s + 2.0
        step = np.where(d2 > 1e-3, d1 / np.where(d2 > 1e-3, d2, 1.0), 0.5 * np.sign(d1))
        a = np.clip(a - step, -np.pi, np.pi)
    c, s = np.cos(a), np.sin(a)
    fmin = np.maximum(base - 2.0 * A * c - 2.0 * B * s + a * a, 0.0)
    curv = np.maximum(A * c + B * s + 1.0, 0.1)
    return a, fmin, curv


def _nodes(a_star, mu, gl_x, gl_w, panels, near_thr):
    """Node angles and weights, shape (pairs, 2*panels*q + q); singular block first."""
    q = gl_x.size
    use_sinh = mu < near_thr
    T = np.where(use_sinh, np.arcsinh(np.pi / mu), np.pi)[:, None]
    p = np.repeat(np.arange(panels), q)
    t_unit = (p + 0.5 * (np.tile(gl_x, panels) + 1.0)) / panels
    w_unit = np.tile(gl_w, panels) * 0.5 / panels
    t = T * t_unit
    w = T * w_unit
    mu_ = mu[:, None]
    offset = np.where(use_sinh[:, None], mu_ * np.sinh(t), t)
    w = np.where(use_sinh[:, None], w * mu_ * np.cosh(t), w)
    a_sing = np.concatenate([a_star[:, None] + offset, a_star[:, None] - offset], axis=1)
    w_sing = np.concatenate([w, w], axis=1)
    a_smooth = a_star[:, None] + np.pi * gl_x[None, :]
    w_smooth = np.broadcast_to(np.pi * gl_w, a_smooth.shape)
    return a_sing, w_sing, a_smooth, w_smooth


def _integrate(x, y, delta, M, gl_x, gl_w, panels, near_thr):
    """Return (Kxy, Kyx, KG) for arrays of pairs."""
    a_star, fmin, curv = nearest_angle(x, y)
    mu = np.sqrt(fmin + delta * delta) / np.sqrt(curv)
    a_sing, w_sing, a_smooth, w_smooth = _nodes(a_star, mu, gl_x, gl_w, panels, near_thr)
    A = x[:, 0] * y[:, 0] + x[:, 1] * y[:, 1]
    B = x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]
    x1, x2 = x[:, 0:1], x[:, 1:2]
    y1, y2 = y[:, 0:1], y[:, 1:2]

    Kxy = np.zeros((x.shape[0], 3))
    Kyx = np.zeros((x.shape[0], 3))
    KG = np.zeros(x.shape[0])
    for a, w, singular in ((a_sing, w_sing, True), (a_smooth, w_smooth, False)):
        c, s = np.cos(a), np.sin(a)
        q1 = y1 * c + y2 * s
        q2 = -y1 * s + y2 * c
        d1 = x1 - q1
        d2 = x2 - q2
        d3 = -a
        if singular:
            inv = 1.0 / np.sqrt(d1 * d1 + d2 * d2 + d3 * d3 + delta * delta)
            coef = -inv**3 / FOUR_PI
            g1, g2, g3 = coef * d1, coef * d2, coef * d3
            gval = inv / FOUR_PI
        else:
            S, S_r, S_3 = image_sums(d1 * d1 + d2 * d2, d3, M)
            g1 = 2.0 * d1 * S_r / FOUR_PI
            g2 = 2.0 * d2 * S_r / FOUR_PI
            g3 = S_3 / FOUR_PI
            gval = S / FOUR_PI + SINGULAR_CONSTANT
        Kxy[:, 0] += np.sum(w * (g2 + g3 * q1), axis=1)
        Kxy[:, 1] += np.sum(w * (g3 * q2 - g1), axis=1)
        Kxy[:, 2] += np.sum(w * (-g1 * q1 - g2 * q2), axis=1)
        v1 = g2 + g3 * x1
        v2 = g3 * x2 - g1
        v3 = -g1 * x1 - g2 * x2
        Kyx[:, 0] -= np.sum(w * (c * v1 - s * v2), axis=1)
        Kyx[:, 1] -= np.sum(w * (s * v1 + c * v2), axis=1)
        Kyx[:, 2] -= np.sum(w * v3, axis=1)
        KG += np.sum(w * gval * (1.0 + A[:, None] * c + B[:, None] * s), axis=1)
    return Kxy, Kyx, KG


def _neumaier_rows(terms):
    """Compensated sum along axis 1 in index order (matches the compiled reduction)."""
    total = np.zeros(terms.shape[0])
    comp = np.zeros(terms.shape[0])
    for j in range(terms.shape[1]):
        v = terms[:, j]
        t = total + v
        big = np.abs(total) >= np.abs(v)
        comp += np.where(big, (total - t) + v, (v - t) + total)
        total = t
    return total + comp


def pair_buffers(pos, delta, M, gl_x, gl_w, panels, near_thr):
    pos = np.asarray(pos, dtype=float)
    n = pos.shape[0]
    iu, ju = np.triu_indices(n)
    U = np.empty((n, n, 3))
    KG = np.empty((n, n))
    for lo in range(0, iu.size, CHUNK):
        i, j = iu[lo : lo + CHUNK], ju[lo : lo + CHUNK]
        kxy, kyx, kg = _integrate(pos[i], pos[j], float(delta), int(M), gl_x, gl_w, int(panels), float(near_thr))
        U[j, i] = kyx
        U[i, j] = kxy
        KG[i, j] = kg
        KG[j, i] = kg
    return U, KG


def _reduce_velocity(targets, gamma, U):
    px = -targets[:, 1:2]
    py = targets[:, 0:1]
    v1 = _neumaier_rows(gamma[None, :] * (U[:, :, 0] + px * U[:, :, 2]))
    v2 = _neumaier_rows(gamma[None, :] * (U[:, :, 1] + py * U[:, :, 2]))
    return np.stack([v1, v2], axis=1)


def particle_velocities(pos, gamma, delta, M, gl_x, gl_w, panels, near_thr):
    pos = np.asarray(pos, dtype=float)
    U, _ = pair_buffers(pos, delta, M, gl_x, gl_w, panels, near_thr)
    return _reduce_velocity(pos, np.asarray(gamma, dtype=float), U)


def pair_energy(pos, gamma, delta, M, gl_x, gl_w, panels, near_thr):
    gamma = np.asarray(gamma, dtype=float)
    _, KG = pair_buffers(pos, delta, M, gl_x, gl_w, panels, near_thr)
    terms = (gamma[:, None] * gamma[None, :] * KG).ravel()[None, :]
    return float(_neumaier_rows(terms)[0])


def target_velocities(targets, pos, gamma, delta, M, gl_x, gl_w, panels, near_thr):
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    pos = np.asarray(pos, dtype=float)
    nt, n = targets.shape[0], pos.shape[0]
    ti, pj = np.divmod(np.arange(nt * n), n)
    U = np.empty((nt * n, 3))
    for lo in range(0, ti.size, CHUNK):
        sl = slice(lo, lo + CHUNK)
        U[sl] = _integrate(targets[ti[sl]], pos[pj[sl]], float(delta), int(M), gl_x, gl_w, int(panels), float(near_thr))[0]
    return _reduce_velocity(targets, np.asarray(gamma, dtype=float), U.reshape(nt, n, 3))


def pair_values(x, y, delta, M, gl_x, gl_w, panels, near_thr):
    kxy, kyx, kg = _integrate(
        np.asarray(x, dtype=float)[None, :], np.asarray(y, dtype=float)[None, :],
        float(delta), int(M), gl_x, gl_w, int(panels), float(near_thr),
    )
    return kxy[0], kyx[0], float(kg[0])
