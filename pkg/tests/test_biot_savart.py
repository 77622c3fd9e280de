import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from helicalvortex.biot_savart import (
    KernelParams,
    drift_functional,
    drift_leading_term,
    energy_pair_kernel,
    g_transport,
    helix_distance2,
    k1_leading,
    k2_leading,
    kernel_K0star,
    kernel_K1,
    kernel_K2,
    pair_kernel,
    pair_kernel_line,
    particle_velocities,
    velocity_H,
)
from helicalvortex.errors import NormalizationError, SingularPairError
from helicalvortex.geometry import japanese, perp, rotate, screw
from helicalvortex.greens import GreensParams, grad_green, green
from helicalvortex.vortex_sim import ParticleField, SimConfig, init_blob

FOUR_PI = 4 * np.pi
LEADING_RATE = -math.sqrt(2) / (8 * math.pi)


def line_integral_oracle(x, y, periods=100):
    """Unperiodized kernel by adaptive quadrature, one 2 pi period at a time."""

    def integrand(a, k):
        q = rotate(a, y)
        d = np.array([x[0] - q[0], x[1] - q[1], -a])
        return (-np.cross(d, [q[1], -q[0], 1.0]) / (FOUR_PI * np.linalg.norm(d) ** 3))[k]

    out = np.zeros(3)
    for k in range(3):
        for j in range(-periods, periods):
            lo, hi = 2 * np.pi * j, 2 * np.pi * (j + 1)
            pts = [0.0] if lo < 0 < hi else None
            out[k] += quad(integrand, lo, hi, args=(k,), points=pts, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    return out


def periodic_oracle(x, y, params=GreensParams()):
    """Periodized kernel with grad G from the Green's module, adaptive quadrature in a."""

    def integrand(a, k):
        q = rotate(a, y)
        d = np.array([x[0] - q[0], x[1] - q[1], -a])
        return np.cross(grad_green(d, params), [q[1], -q[0], 1.0])[k]

    return np.array([quad(integrand, -np.pi, np.pi, args=(k,), points=[0.0], limit=400, epsabs=1e-13)[0] for k in range(3)])


def blob(eps=0.05, sigma=(1.0, 0.0), **kw):
    return init_blob(SimConfig(epsilon=eps, sigma=sigma, **kw))


def test_params_validation():
    for kw in ({"quad_panels": 1}, {"quad_order": 3}, {"quad_order": 33}, {"delta": -1.0}, {"near_threshold": 0.0}):
        with pytest.raises(ValueError):
            KernelParams(**kw)


def test_pair_kernel_matches_line_integral():
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    k = pair_kernel(x, y).as_array()
    # the truncated line integral omits O(1/(200 pi)^2) tails
    np.testing.assert_allclose(k, line_integral_oracle(x, y), atol=1e-4)
    np.testing.assert_allclose(k, pair_kernel_line(x, y), atol=1e-5)


@pytest.mark.parametrize("y", [(0.0, 1.0), (1.0, 0.1), (-1.0, 0.02), (1.5, 0.7)])
def test_pair_kernel_matches_periodic_adaptive_quadrature(y):
    x = np.array([1.0, 0.0])
    np.testing.assert_allclose(pair_kernel(x, y, KernelParams(greens=GreensParams())).as_array(), periodic_oracle(x, np.array(y)), atol=1e-10)


def test_self_interaction_has_no_radial_component():
    params = KernelParams(delta=0.01)
    for x in ([1.0, 0.0], [0.3, -0.8], [2.0, 1.0]):
        u = pair_kernel(x, x, params).as_array()
        assert abs(np.dot(u[:2], x)) < 1e-12
    u = pair_kernel([1.0, 0.0], [1.0, 0.0], params)
    assert u.u1 == pytest.approx(0.0, abs=1e-14)
    assert abs(u.u2) > 0.05  # the helix's own curvature drives the swirl channel


def test_coincident_pair_without_regularization():
    with pytest.raises(SingularPairError):
        pair_kernel([1.0, 0.0], [1.0, 0.0])
    with pytest.raises(SingularPairError):
        energy_pair_kernel([1.0, 0.0], [1.0, 0.0])


@given(st.floats(-np.pi, np.pi), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_pair_kernel_rotation_equivariance(theta, x1, x2, y1, y2):
    x, y = np.array([x1, x2]), np.array([y1, y2])
    params = KernelParams(delta=0.05)
    k = pair_kernel(x, y, params).as_array()
    kr = pair_kernel(rotate(theta, x), rotate(theta, y), params).as_array()
    np.testing.assert_allclose(kr[:2], rotate(theta, k[:2]), atol=1e-10)
    assert kr[2] == pytest.approx(k[2], abs=1e-10)


@pytest.mark.parametrize("y", [(0.0, 1.0), (-1.2, 0.5), (1.0, 0.1), (1.0, 0.001)])
def test_quadrature_converges_with_panels(y):
    x = [1.0, 0.0]
    base = pair_kernel(x, y, KernelParams(delta=0.0)).as_array()
    fine = pair_kernel(x, y, KernelParams(delta=0.0, quad_panels=4)).as_array()
    assert np.max(np.abs(base - fine)) < 1e-8


def test_velocity_of_radial_field_vanishes_at_centre():
    field = blob(sigma=(0.0, 0.0))
    np.testing.assert_allclose(velocity_H(field, [0.0, 0.0]), [0.0, 0.0], atol=1e-10)
    single = ParticleField([[0.0, 0.0]], [1.0], delta=0.01, epsilon=0.05)
    np.testing.assert_allclose(velocity_H(single, [0.0, 0.0]), [0.0, 0.0], atol=1e-14)


def test_velocity_field_equivariance(rng):
    field = ParticleField(rng.normal(scale=0.5, size=(12, 2)), np.full(12, 1 / 12), delta=0.05, epsilon=0.1)
    theta = 0.83
    rotated = ParticleField(rotate(theta, field.positions), field.circulations, field.delta, field.epsilon)
    x = np.array([0.4, -0.2])
    np.testing.assert_allclose(velocity_H(rotated, rotate(theta, x)), rotate(theta, velocity_H(field, x)), atol=1e-10)
    np.testing.assert_allclose(
        particle_velocities(rotated), rotate(theta, particle_velocities(field)), atol=1e-10
    )


def test_velocity_at_particles_matches_target_evaluation(rng):
    field = ParticleField(rng.normal(scale=0.5, size=(9, 2)), rng.uniform(0.1, 1, 9), delta=0.05, epsilon=0.1)
    np.testing.assert_allclose(particle_velocities(field), velocity_H(field, field.positions), atol=1e-13)


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_velocity_is_weighted_sum_of_pair_kernels(rng, backend):
    pos = np.array([1.0, 0.0]) + rng.normal(scale=0.05, size=(4, 2))
    gam = np.array([0.1, 0.2, 0.3, 0.4])
    field = ParticleField(pos, gam, delta=0.01, epsilon=0.05)
    params = KernelParams(delta=0.01)
    targets = rng.normal(size=(7, 2))

    def h(x, y):
        k = pair_kernel(x, y, params).as_array()
        return k[:2] + k[2] * perp(x)

    expected = np.array([sum(g * h(x, y) for y, g in zip(pos, gam)) for x in targets])
    np.testing.assert_allclose(velocity_H(field, targets, backend=backend), expected, atol=1e-14)


def test_transport_kernel_antisymmetry(rng):
    worst = 0.0
    count = 0
    while count < 100:
        p = np.concatenate([rng.uniform(-2, 2, 2), rng.uniform(-np.pi, np.pi, 1)])
        q = np.concatenate([rng.uniform(-2, 2, 2), rng.uniform(-np.pi, np.pi, 1)])
        if 0.1 <= np.linalg.norm(p - q) <= 3:
            worst = max(worst, abs(g_transport(p, q) + g_transport(q, p)))
            count += 1
    assert worst < 1e-8


def test_transport_kernel_vanishes_on_axis():
    assert g_transport([0.0, 0.0, 0.3], [1.0, 0.5, -1.0]) == 0.0


def test_transport_kernel_against_finite_difference_gradient():
    x = np.array([0.9, 0.2, 0.1])
    y = screw(0.3, x)
    h = 1e-5
    d = x - y
    grad = np.array([(green(d + h * e) - green(d - h * e)) / (2 * h) for e in np.eye(3)])
    expected = x[0] * grad[1] - x[1] * grad[0] + (x[0] * y[0] + x[1] * y[1]) * grad[2]
    assert g_transport(x, y) == pytest.approx(expected, abs=1e-6)


def test_transport_kernel_coincident():
    with pytest.raises(SingularPairError):
        g_transport([1.0, 0.0, 0.0], [1.0, 0.0, 2 * np.pi])


def _scipy_aux(x, y, which):
    f = lambda a: helix_distance2(x, y, np.array(a))
    opts = dict(limit=500, epsabs=1e-13, epsrel=1e-12)
    if which == "K1":
        return quad(lambda b: (2 * np.pi - abs(b)) / np.sqrt(f(b)), -2 * np.pi, 2 * np.pi, points=[0.0], **opts)[0] / FOUR_PI
    if which == "K0":
        return quad(lambda a: f(a) ** -1.5, -np.pi, np.pi, points=[0.0], **opts)[0]
    return quad(lambda a: a * a * f(a) ** -1.5, -np.pi, np.pi, points=[0.0], **opts)[0]


@pytest.mark.parametrize("y", [(0.0, 1.0), (1.1, 0.2), (-0.5, -0.5), (1.0, 0.01)])
def test_auxiliary_kernels_against_adaptive_quadrature(y):
    x, y = np.array([1.0, 0.0]), np.array(y)
    assert kernel_K1(x, y) == pytest.approx(_scipy_aux(x, y, "K1"), rel=1e-8)
    assert kernel_K0star(x, y) == pytest.approx(_scipy_aux(x, y, "K0"), rel=1e-8)
    assert kernel_K2(x, y) == pytest.approx(_scipy_aux(x, y, "K2"), rel=1e-8)


def test_k1_symmetry_and_band(rng):
    assert kernel_K1((1, 0), (0, 1)) == pytest.approx(kernel_K1((0, 1), (1, 0)), abs=1e-10)
    for _ in range(100):
        x, y = rng.normal(size=2), rng.normal(size=2)
        assert abs(kernel_K1(x, y) - kernel_K1(y, x)) < 1e-10
    x = np.array([1.0, 0.0])
    bands = []
    for r in (1e-2, 1e-3, 1e-4):
        y = x + r * np.array([math.cos(0.7), math.sin(0.7)])
        bands.append(kernel_K1(x, y) - math.log(1 / r) / math.sqrt(2))
        assert abs(bands[-1]) < 2
    assert max(bands) - min(bands) < 2
    assert kernel_K1(x, x + [2.0, 0.0]) < 10


def test_k0star_symmetry_bound_and_invariance(rng):
    worst = 0.0
    for _ in range(1000):
        x, y = rng.normal(scale=1.5, size=2), rng.normal(scale=1.5, size=2)
        d = np.linalg.norm(x - y)
        k = kernel_K0star(x, y)
        worst = max(worst, k / (1 + (1 + min(np.linalg.norm(x), np.linalg.norm(y))) / d**2))
    assert worst <= 100
    for _ in range(20):
        x, y = rng.normal(size=2), rng.normal(size=2)
        assert kernel_K0star(x, y) == pytest.approx(kernel_K0star(y, x), rel=1e-12, abs=1e-10)
        phi = rng.uniform(-np.pi, np.pi)
        assert kernel_K0star(rotate(phi, x), rotate(phi, y)) == pytest.approx(kernel_K0star(x, y), rel=1e-10)


def test_k2_band_and_bounds(rng):
    x = np.array([1.0, 0.0])
    bands = []
    for r in (1e-2, 1e-3, 1e-4):
        y = x + r * np.array([math.cos(0.7), math.sin(0.7)])
        bands.append(kernel_K2(x, y) - 2 / 2**1.5 * math.log(1 / r))
        assert kernel_K2(x, y) - k2_leading(x, y) == pytest.approx(bands[-1], abs=1e-12)
    assert max(bands) - min(bands) < 3
    for _ in range(200):
        x, y = rng.normal(scale=2, size=2), rng.normal(scale=2, size=2)
        k2 = kernel_K2(x, y)
        assert k2 <= np.pi**2 * kernel_K0star(x, y) + 1e-12
        if np.linalg.norm(x - y) >= 1:
            assert k2 <= 50 * japanese(y)


def test_aux_kernels_reject_coincident():
    for k in (kernel_K1, kernel_K0star, kernel_K2):
        with pytest.raises(SingularPairError):
            k((0.5, 0.5), (0.5, 0.5))


def test_line_integrand_integrability_bound(rng):
    for _ in range(5):
        x, y = rng.normal(size=2), rng.normal(size=2)
        d = np.linalg.norm(x - y)
        f = lambda a: 1.0 / helix_distance2(x, y, np.array(a))
        total = sum(quad(f, 2 * np.pi * j, 2 * np.pi * (j + 1), limit=200)[0] for j in range(100))
        assert total <= 50 * (1 + 1 / d)


def test_energy_kernel_symmetry_and_growth(rng):
    params = KernelParams(delta=0.0)
    for _ in range(20):
        x, y = rng.normal(size=2), rng.normal(size=2)
        assert energy_pair_kernel(x, y, params) == pytest.approx(energy_pair_kernel(y, x, params), abs=1e-9)
    x = np.array([1.0, 0.0])
    bands = []
    for r in (1e-2, 1e-3, 1e-4):
        y = x + r * np.array([math.cos(0.7), math.sin(0.7)])
        bands.append(energy_pair_kernel(x, y) - japanese(x) ** 2 * kernel_K1(x, y) / (2 * np.pi))
    assert max(bands) - min(bands) < 0.1
    assert abs(energy_pair_kernel(x, x + [5.0, 0.0])) < 1


def test_drift_of_centred_blob_vanishes():
    np.testing.assert_allclose(drift_functional(blob(sigma=(0.0, 0.0))), [0, 0], atol=1e-8)
    np.testing.assert_allclose(drift_leading_term(blob(sigma=(0.0, 0.0))), [0, 0], atol=1e-8)


def test_drift_requires_unit_mass():
    field = ParticleField([[1.0, 0.0]], [0.5], delta=0.01, epsilon=0.05)
    with pytest.raises(NormalizationError):
        drift_functional(field)


def test_drift_is_azimuthal_and_close_to_leading_term():
    field = blob()
    d = drift_functional(field)
    p = np.array([1.0, 0.0])
    assert abs(d @ p) / abs(d @ perp(p)) < 0.3
    assert d @ perp(p) < 0
    assert np.linalg.norm(d - drift_leading_term(field)) <= 0.08


@pytest.mark.xfail(strict=True, reason="O(1) correction to the rotation speed is ~45% of the leading term at eps=0.05")
def test_drift_matches_leading_rate_within_quarter():
    eps = 0.05
    d = drift_functional(blob(eps))
    pred = LEADING_RATE * math.log(1 / eps)
    assert pred == pytest.approx(-0.1686, abs=1e-4)
    assert abs(d[1] - pred) / abs(pred) <= 0.25


def test_leading_term_two_points_closed_form():
    x, y = np.array([1.0, 0.0]), np.array([1.0, 0.01])
    field = ParticleField([x, y], [0.5, 0.5], delta=0.0, epsilon=0.05)
    # each point sees the other with weight 1/4 and log(1/0.01) = log 100
    expected = -(1 / FOUR_PI) * 0.25 * math.log(100) * (perp(x) / japanese(x) + perp(y) / japanese(y))
    np.testing.assert_allclose(drift_leading_term(field), expected, atol=1e-10)
    reg = ParticleField([x, y], [0.5, 0.5], delta=0.002, epsilon=0.05)
    expected_reg = expected - (1 / FOUR_PI) * 0.25 * math.log(500) * (perp(x) / japanese(x) + perp(y) / japanese(y))
    np.testing.assert_allclose(drift_leading_term(reg), expected_reg, atol=1e-10)
