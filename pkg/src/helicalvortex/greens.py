"""Periodic Green's function of -Laplace on R^2 x T (period 2 pi in x3).

Two independent evaluators are provided:

* ``green_bessel`` -- the modified-Bessel Fourier series in x3, valid off the
  axis |x'| > 0 and cheap once |x'| is not small.
* ``green_image`` -- the free-space kernel 1/(4 pi |x|) plus a constant plus a
  remainder built from renormalized image sums.  This one is uniformly valid
  near the singularity and is what the Biot-Savart kernels use.

With S(x) the sum over m >= 1 of both mirror families
``1/sqrt(|x'|^2 + (x3 -+ 2 pi m)^2) - 1/(2 pi m)``, the remainder is
``S(x) / (4 pi)``.  The image tails beyond ``image_count`` terms are replaced by
their integral over [M + 1/2, inf) plus the first Euler-Maclaurin correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, SingularInputError
from .geometry import reduce_angle

FOUR_PI = 4.0 * np.pi
SINGULAR_CONSTANT = (np.euler_gamma - np.log(4.0 * np.pi)) / (4.0 * np.pi**2)


@dataclass(frozen=True)
class GreensParams:
    """Truncation controls for both Green's function representations."""

    bessel_terms: int = 96
    image_count: int = 64
    tol: float = 1e-10

    def __post_init__(self):
        if self.bessel_terms < 1:
            raise ValueError("bessel_terms must be >= 1")
        if self.image_count < 1:
            raise ValueError("image_count must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class GreensDecomposition:
    singular: float
    constant: float
    remainder: float

    @property
    def total(self) -> float:
        return self.singular + self.constant + self.remainder


DEFAULT_GREENS = GreensParams()


# --------------------------------------------------------------------------
# Bessel K0 from its cosine-integral representation
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return (lo + half * (x + 1.0)).ravel(), (half * w).ravel()


def _legendre_values(n_max: int, x: float) -> np.ndarray:
    p = np.empty(n_max + 1)
    p[0] = 1.0
    if n_max >= 1:
        p[1] = x
    for n in range(1, n_max):
        p[n + 1] = ((2 * n + 1) * x * p[n] - n * p[n - 1]) / (n + 1)
    return p


def _k0_tail(z: float, T: float, n_terms: int = 10) -> float:
    """Integral of cos(t)/sqrt(z^2+t^2) over [T, inf) for T = k pi, by repeated parts.

    With f = (z^2+t^2)^(-1/2) and sin T = 0 the expansion reads
    -cos T * sum_k (-1)^k f^(2k+1)(T); derivatives come from the Legendre
    generating function f^(n)(t) = (-1)^n n! P_n(t/r) / r^(n+1), r = |(t, z)|.
    """
    r = math.hypot(T, z)
    p = _legendre_values(2 * n_terms + 1, T / r)
    acc = 0.0
    for k in range(n_terms):
        n = 2 * k + 1
        deriv = -math.factorial(n) * p[n] / r ** (n + 1)
        acc += (-1) ** k * deriv
    return -math.cos(T) * acc


def bessel_k0(z: float, order: int = 20) -> float:
    """Modified Bessel K0(z) = int_0^inf cos(t)/sqrt(z^2+t^2) dt for z > 0.

    The range [0, 10 z] is integrated after t = z sinh(s), which removes the
    1/t-like layer at small z; beyond it the integrand is split into geometric
    panels up to pi and then one panel per half period up to T = k pi, and the
    remaining oscillatory tail is summed by integration by parts.
    """
    z = float(z)
    if not z > 0 or not math.isfinite(z):
        raise DomainError(f"bessel_k0 requires finite z > 0, got {z!r}")
    t_split = 10.0 * z
    T = math.pi * max(32, math.ceil(t_split / math.pi) + 2)

    # [0, 10 z] in the sinh variable: integrand cos(z sinh s)
    s_hi = math.asinh(10.0)
    n_osc = max(1, math.ceil(t_split / math.pi))
    s_nodes, s_w = _panel_rule(np.linspace(0.0, s_hi, 2 * n_osc + 1), order)
    head = float(np.dot(s_w, np.cos(z * np.sinh(s_nodes))))

    # [10 z, T]: geometric panels below pi, half-period panels above
    edges = [t_split]
    while edges[-1] < math.pi:
        edges.append(min(2.0 * edges[-1], math.pi))
    k = math.floor(edges[-1] / math.pi) + 1
    while k * math.pi <= T + 1e-12:
        edges.append(k * math.pi)
        k += 1
    t_nodes, t_w = _panel_rule(np.asarray(edges), order)
    body = float(np.dot(t_w, np.cos(t_nodes) / np.sqrt(z * z + t_nodes**2)))

    return head + body + _k0_tail(z, edges[-1])


def k0_upper_bound(z: float) -> float:
    """K0(z) <= sqrt(pi / (2 z)) exp(-z) for z > 0."""
    return math.sqrt(math.pi / (2.0 * z)) * math.exp(-z)


# --------------------------------------------------------------------------
# Series representation
# --------------------------------------------------------------------------


def green_bessel(x, params: GreensParams = DEFAULT_GREENS) -> float:
    """G(x) = log(1/|x'|)/(4 pi^2) + sum_n K0(n |x'|) cos(n x3) / (2 pi^2), n <= bessel_terms."""
    x = np.asarray(x, dtype=float)
    rho = math.hypot(x[0], x[1])
    if rho == 0.0:
        raise SingularInputError("Bessel series is invalid on the axis |x'| = 0")
    x3 = float(reduce_angle(x[2]))
    series = 0.0
    for n in range(1, params.bessel_terms + 1):
        if k0_upper_bound(n * rho) < 1e-20:
            break
        series += bessel_k0(n * rho) * math.cos(n * x3)
    return math.log(1.0 / rho) / (4.0 * np.pi**2) + series / (2.0 * np.pi**2)


def bessel_truncation_bound(rho: float, n_terms: int) -> float:
    """Upper bound on the omitted tail of the series after ``n_terms`` terms."""
    q = math.exp(-rho)
    return k0_upper_bound((n_terms + 1) * rho) / (1.0 - q) / (2.0 * np.pi**2)


# --------------------------------------------------------------------------
# Image-sum representation
# --------------------------------------------------------------------------


def image_sums(rho2, x3, image_count: int):
    """S, dS/d(rho^2), dS/dx3 for the renormalized mirror sums (vectorized).

    ``x3`` must already lie in [-pi, pi].
    """
    rho2 = np.asarray(rho2, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    S = np.zeros(np.broadcast(rho2, x3).shape)
    S_r = np.zeros_like(S)
    S_3 = np.zeros_like(S)
    M = int(image_count)
    m0 = M + 0.5
    for s in (1.0, -1.0):
        for m in range(1, M + 1):
            dz = x3 - s * 2.0 * np.pi * m
            q = rho2 + dz * dz
            inv = 1.0 / np.sqrt(q)
            inv3 = inv / q
            S += inv - 1.0 / (2.0 * np.pi * m)
            S_r -= 0.5 * inv3
            S_3 -= dz * inv3
        # tail: integral over [M + 1/2, inf) plus f'(M + 1/2)/24
        u0 = 2.0 * np.pi * m0 - s * x3
        R0 = np.sqrt(u0 * u0 + rho2)
        L = u0 + R0
        S += (np.log(4.0 * np.pi) - np.log(L) + np.log(m0)) / (2.0 * np.pi)
        S_r -= 1.0 / (2.0 * np.pi * L * 2.0 * R0)
        S_3 += s / (2.0 * np.pi * R0)
        R5 = R0**5
        S += (-2.0 * np.pi * u0 / R0**3 + 1.0 / (2.0 * np.pi * m0 * m0)) / 24.0
        S_r += 3.0 * np.pi * u0 / R5 / 24.0
        S_3 += 2.0 * np.pi * s * (R0 * R0 - 3.0 * u0 * u0) / R5 / 24.0
    return S, S_r, S_3


def remainder(x, params: GreensParams = DEFAULT_GREENS) -> float:
    """Smooth remainder A_G(x) = G(x) - 1/(4 pi |x|) - constant; A_G(0) = 0."""
    x = np.asarray(x, dtype=float)
    x3 = reduce_angle(x[2])
    S, _, _ = image_sums(x[0] ** 2 + x[1] ** 2, x3, params.image_count)
    return float(S) / FOUR_PI


def grad_remainder(x, params: GreensParams = DEFAULT_GREENS) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x3 = reduce_angle(x[2])
    _, S_r, S_3 = image_sums(x[0] ** 2 + x[1] ** 2, x3, params.image_count)
    return np.array([2.0 * x[0] * S_r, 2.0 * x[1] * S_r, S_3], dtype=float).ravel() / FOUR_PI


def _reduced(x) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[2] = reduce_angle(x[2])
    return x


def green_image(x, params: GreensParams = DEFAULT_GREENS) -> GreensDecomposition:
    """Split G(x) into 1/(4 pi |x|), the constant (gamma - log 4 pi)/(4 pi^2) and A_G."""
    xr = _reduced(x)
    r = float(np.linalg.norm(xr))
    if r == 0.0:
        raise SingularInputError("Green's function is singular at x = 0")
    return GreensDecomposition(
        singular=1.0 / (FOUR_PI * r),
        constant=float(SINGULAR_CONSTANT),
        remainder=remainder(xr, params),
    )


def green(x, params: GreensParams = DEFAULT_GREENS) -> float:
    return green_image(x, params).total


def grad_green(x, params: GreensParams = DEFAULT_GREENS) -> np.ndarray:
    """Gradient of G: closed-form free-space part plus differentiated image sums."""
    xr = _reduced(x)
    r = float(np.linalg.norm(xr))
    if r == 0.0:
        raise SingularInputError("Green's function gradient is singular at x = 0")
    return -xr / (FOUR_PI * r**3) + grad_remainder(xr, params)


def green_regularized(x, delta: float, params: GreensParams = DEFAULT_GREENS) -> float:
    """G with only its singular part mollified: 1/(4 pi sqrt(|x|^2 + delta^2))."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    xr = _reduced(x)
    r2 = float(np.dot(xr, xr))
    if r2 == 0.0 and delta == 0.0:
        raise SingularInputError("unregularized Green's function is singular at x = 0")
    return 1.0 / (FOUR_PI * math.sqrt(r2 + delta * delta)) + float(SINGULAR_CONSTANT) + remainder(xr, params)


def grad_green_regularized(x, delta: float, params: GreensParams = DEFAULT_GREENS) -> np.ndarray:
    """Gradient of ``green_regularized``; the remainder gradient is left untouched."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    xr = _reduced(x)
    r2 = float(np.dot(xr, xr)) + delta * delta
    if r2 == 0.0:
        raise SingularInputError("unregularized Green's function gradient is singular at x = 0")
    return -xr / (FOUR_PI * r2**1.5) + grad_remainder(xr, params)
