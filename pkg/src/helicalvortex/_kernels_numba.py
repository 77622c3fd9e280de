"""Compiled pair loops for the helical Biot-Savart sums.

Every unordered particle pair (i <= j) is integrated once over the period
[a* - pi, a* + pi] centred on the angle of nearest approach a*.  The same
Green's-gradient samples serve both orderings: the (j, i) integrand at node -a
is a fixed orthogonal image of the (i, j) integrand at node a.  Per-pair
results go into an N x N buffer and each row is then reduced sequentially, so
the answer does not depend on how pairs are spread across threads.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from . import _backend  # noqa: F401  (threading-layer setup)

FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi
LOG_4PI = math.log(4.0 * math.pi)
SINGULAR_CONSTANT = (0.57721566490153286061 - math.log(4.0 * math.pi)) / (4.0 * math.pi**2)
NEWTON_STEPS = 12


@njit(cache=True)
def image_terms(rho2, x3, M):
    """Renormalized mirror sums S and dS/d(rho^2), dS/dx3 (tail by Euler-Maclaurin)."""
    S = 0.0
    S_r = 0.0
    S_3 = 0.0
    m0 = M + 0.5
    for sgn in (1.0, -1.0):
        for m in range(1, M + 1):
            dz = x3 - sgn * TWO_PI * m
            q = rho2 + dz * dz
            inv = 1.0 / math.sqrt(q)
            inv3 = inv / q
            S += inv - 1.0 / (TWO_PI * m)
            S_r -= 0.5 * inv3
            S_3 -= dz * inv3
        u0 = TWO_PI * m0 - sgn * x3
        R0 = math.sqrt(u0 * u0 + rho2)
        L = u0 + R0
        S += (LOG_4PI - math.log(L) + math.log(m0)) / TWO_PI
        S_r -= 1.0 / (TWO_PI * L * 2.0 * R0)
        S_3 += sgn / (TWO_PI * R0)
        R3 = R0 * R0 * R0
        R5 = R3 * R0 * R0
        S += (-TWO_PI * u0 / R3 + 1.0 / (TWO_PI * m0 * m0)) / 24.0
        S_r += 3.0 * math.pi * u0 / R5 / 24.0
        S_3 += TWO_PI * sgn * (R0 * R0 - 3.0 * u0 * u0) / R5 / 24.0
    return S, S_r, S_3


@njit(cache=True)
def nearest_angle(x1, x2, y1, y2):
    """Angle a* in [-pi, pi] minimising |x - R_a y|^2 + a^2, that minimum, and the curvature.

    The curvature is f''(a*)/2 floored at 0.1; it sets the width of the
    near-singular layer.
    """
    A = x1 * y1 + x2 * y2
    B = x1 * y2 - x2 * y1
    base = x1 * x1 + x2 * x2 + y1 * y1 + y2 * y2
    R = math.sqrt(A * A + B * B)
    a = R * math.atan2(B, A) / (R + 1.0) if R > 0.0 else 0.0
    for _ in range(NEWTON_STEPS):
        c = math.cos(a)
        s = math.sin(a)
        d1 = 2.0 * A * s - 2.0 * B * c + 2.0 * a
        d2 = 2.0 * A * c + 2.0 * B * s + 2.0
        if d2 > 1e-3:
            step = d1 / d2
        else:
            step = 0.5 * math.copysign(1.0, d1)
        a = min(max(a - step, -math.pi), math.pi)
    c = math.cos(a)
    s = math.sin(a)
    fmin = max(base - 2.0 * A * c - 2.0 * B * s + a * a, 0.0)
    curv = max(A * c + B * s + 1.0, 0.1)
    return a, fmin, curv


@njit(cache=True)
def _pair(x1, x2, y1, y2, delta, M, gl_x, gl_w, panels, near_thr, out):
    """Integrate one pair; out = [Kxy(3), Kyx(3), energy kernel]."""
    for k in range(7):
        out[k] = 0.0
    a_star, fmin, curv = nearest_angle(x1, x2, y1, y2)
    A = x1 * y1 + x2 * y2
    B = x1 * y2 - x2 * y1
    delta2 = delta * delta
    mu = math.sqrt(fmin + delta2) / math.sqrt(curv)
    use_sinh = mu < near_thr
    T = math.asinh(math.pi / mu) if use_sinh else math.pi
    q = gl_x.shape[0]
    n_smooth = q
    n_sing = 2 * panels * q
    for k in range(n_sing + n_smooth):
        if k < n_sing:
            side = 1.0 if k < panels * q else -1.0
            kk = k % (panels * q)
            p = kk // q
            node = gl_x[kk % q]
            t = T * (p + 0.5 * (node + 1.0)) / panels
            w = gl_w[kk % q] * 0.5 * T / panels
            if use_sinh:
                e = math.exp(t)
                a = a_star + side * mu * 0.5 * (e - 1.0 / e)
                w *= mu * 0.5 * (e + 1.0 / e)
            else:
                a = a_star + side * t
        else:
            node = gl_x[k - n_sing]
            a = a_star + math.pi * node
            w = math.pi * gl_w[k - n_sing]
        c = math.cos(a)
        s = math.sin(a)
        q1 = y1 * c + y2 * s
        q2 = -y1 * s + y2 * c
        d1 = x1 - q1
        d2 = x2 - q2
        d3 = -a
        if k < n_sing:
            r2 = d1 * d1 + d2 * d2 + d3 * d3 + delta2
            inv = 1.0 / math.sqrt(r2)
            coef = -inv * inv * inv / FOUR_PI
            g1 = coef * d1
            g2 = coef * d2
            g3 = coef * d3
            gval = inv / FOUR_PI
        else:
            S, S_r, S_3 = image_terms(d1 * d1 + d2 * d2, d3, M)
            g1 = 2.0 * d1 * S_r / FOUR_PI
            g2 = 2.0 * d2 * S_r / FOUR_PI
            g3 = S_3 / FOUR_PI
            gval = S / FOUR_PI + SINGULAR_CONSTANT
        # g ^ xi(R_a y, a) with xi = (q2, -q1, 1)
        out[0] += w * (g2 - g3 * (-q1))
        out[1] += w * (g3 * q2 - g1)
        out[2] += w * (g1 * (-q1) - g2 * q2)
        # v = g ^ xi(x, 0); (y, x) integrand at -a is (-R_{-a} v', -v3)
        v1 = g2 - g3 * (-x1)
        v2 = g3 * x2 - g1
        v3 = g1 * (-x1) - g2 * x2
        out[3] -= w * (c * v1 - s * v2)
        out[4] -= w * (s * v1 + c * v2)
        out[5] -= w * v3
        out[6] += w * gval * (1.0 + A * c + B * s)


@njit(cache=True)
def _neumaier_add(total, comp, value):
    t = total + value
    if abs(total) >= abs(value):
        comp += (total - t) + value
    else:
        comp += (value - t) + total
    return t, comp


@njit(cache=True, parallel=True)
def _pair_buffers_parallel(pos, delta, M, gl_x, gl_w, panels, near_thr):
    n = pos.shape[0]
    U = np.empty((n, n, 3))
    KG = np.empty((n, n))
    for i in prange(n):
        out = np.empty(7)
        for j in range(i, n):
            _pair(pos[i, 0], pos[i, 1], pos[j, 0], pos[j, 1], delta, M, gl_x, gl_w, panels, near_thr, out)
            U[i, j, 0] = out[0]
            U[i, j, 1] = out[1]
            U[i, j, 2] = out[2]
            KG[i, j] = out[6]
            if j != i:
                U[j, i, 0] = out[3]
                U[j, i, 1] = out[4]
                U[j, i, 2] = out[5]
                KG[j, i] = out[6]
    return U, KG


@njit(cache=True, parallel=True)
def _reduce_velocity(pos, gamma, U):
    n = pos.shape[0]
    m = U.shape[1]
    vel = np.empty((n, 2))
    for i in prange(n):
        px = -pos[i, 1]
        py = pos[i, 0]
        s1 = 0.0
        c1 = 0.0
        s2 = 0.0
        c2 = 0.0
        for j in range(m):
            s1, c1 = _neumaier_add(s1, c1, gamma[j] * (U[i, j, 0] + px * U[i, j, 2]))
            s2, c2 = _neumaier_add(s2, c2, gamma[j] * (U[i, j, 1] + py * U[i, j, 2]))
        vel[i, 0] = s1 + c1
        vel[i, 1] = s2 + c2
    return vel


@njit(cache=True)
def _reduce_energy(gamma, KG):
    n = gamma.shape[0]
    s = 0.0
    comp = 0.0
    for i in range(n):
        for j in range(n):
            s, comp = _neumaier_add(s, comp, gamma[i] * gamma[j] * KG[i, j])
    return s + comp


def pair_buffers(pos, delta, M, gl_x, gl_w, panels, near_thr):
    """All-pairs kernel buffers: U[i, j] = K(x_i, x_j) and the energy kernel."""
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    return _pair_buffers_parallel(pos, float(delta), int(M), gl_x, gl_w, int(panels), float(near_thr))


def particle_velocities(pos, gamma, delta, M, gl_x, gl_w, panels, near_thr):
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    U, _ = pair_buffers(pos, delta, M, gl_x, gl_w, panels, near_thr)
    return _reduce_velocity(pos, np.ascontiguousarray(gamma, dtype=np.float64), U)


def pair_energy(pos, gamma, delta, M, gl_x, gl_w, panels, near_thr):
    """Sum_ij gamma_i gamma_j K_G(x_i, x_j)."""
    _, KG = pair_buffers(pos, delta, M, gl_x, gl_w, panels, near_thr)
    return _reduce_energy(np.ascontiguousarray(gamma, dtype=np.float64), KG)


@njit(cache=True, parallel=True)
def _target_buffers(targets, pos, delta, M, gl_x, gl_w, panels, near_thr):
    nt = targets.shape[0]
    n = pos.shape[0]
    U = np.empty((nt, n, 3))
    for i in prange(nt):
        out = np.empty(7)
        for j in range(n):
            _pair(targets[i, 0], targets[i, 1], pos[j, 0], pos[j, 1], delta, M, gl_x, gl_w, panels, near_thr, out)
            U[i, j, 0] = out[0]
            U[i, j, 1] = out[1]
            U[i, j, 2] = out[2]
    return U


def target_velocities(targets, pos, gamma, delta, M, gl_x, gl_w, panels, near_thr):
    """Velocity H at arbitrary planar targets induced by the particles."""
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    U = _target_buffers(targets, pos, float(delta), int(M), gl_x, gl_w, int(panels), float(near_thr))
    return _reduce_velocity(targets, np.ascontiguousarray(gamma, dtype=np.float64), U)


def pair_values(x, y, delta, M, gl_x, gl_w, panels, near_thr):
    """Kernel values for a single pair: (K(x, y), K(y, x), K_G(x, y))."""
    out = np.empty(7)
    _pair(float(x[0]), float(x[1]), float(y[0]), float(y[1]), float(delta), int(M), gl_x, gl_w, int(panels), float(near_thr), out)
    return out[:3].copy(), out[3:6].copy(), float(out[6])
