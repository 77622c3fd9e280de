import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helicalvortex.diagnostics import (
    C_NORM,
    CSV_COLUMNS,
    ROTATION_SLOPE,
    CutoffEta,
    compute_record,
    concentration_center,
    distance_functions,
    energy_pair,
    energy_star,
    fit_rotation,
    fit_rotation_line,
    m_star,
    mass_inside,
    mass_outside,
    momenta,
    read_diagnostics_csv,
    write_diagnostics_csv,
)
from helicalvortex.errors import InsufficientDataError, NormalizationError
from helicalvortex.geometry import japanese
from helicalvortex.vortex_sim import ParticleField, SimConfig, init_blob


def atoms(pos, gam, delta=0.0, eps=0.05):
    return ParticleField(np.asarray(pos, float), np.asarray(gam, float), delta=delta, epsilon=eps)


def random_field(rng, n=30):
    g = rng.uniform(0.1, 1, n)
    return atoms(rng.normal(scale=2, size=(n, 2)), g / math.fsum(g), delta=0.01)


def test_momenta_examples():
    mass, M1, M2, p = momenta(atoms([[1, 0]], [1]))
    assert (mass, M1, M2) == (1, 1, 1)
    np.testing.assert_array_equal(p, [1, 0])
    mass, M1, M2, p = momenta(atoms([[1, 0], [-1, 0]], [0.5, 0.5]))
    assert (M1, M2) == (1, 1)
    np.testing.assert_array_equal(p, [0, 0])


def test_blob_second_moments():
    eps = 0.05
    _, M1, M2, _ = momenta(init_blob(SimConfig(epsilon=eps)))
    assert abs(M1 - 1) < 5 * eps
    assert abs(M2 - 1) < 10 * eps


def test_distance_function_examples():
    assert distance_functions(atoms([[0.3, 0.4]], [1])) == (0.0, 0.0)
    D1, D2 = distance_functions(atoms([[1, 0], [-1, 0]], [0.5, 0.5]))
    assert (D1, D2) == (1.0, 2.0)
    with pytest.raises(NormalizationError):
        distance_functions(atoms([[1, 0]], [0.5]))


@pytest.mark.parametrize("seed", range(5))
def test_moment_identities(seed):
    field = random_field(np.random.default_rng(seed))
    mass, M1, _, p = momenta(field)
    D1, D2 = distance_functions(field)
    D1d, D2d = distance_functions(field, direct=True)
    assert mass == pytest.approx(1, abs=1e-12)
    assert D1 + p @ p == pytest.approx(M1, abs=1e-12)
    assert D2 + 2 * p @ p == pytest.approx(2 * M1, abs=1e-12)
    assert D2d == pytest.approx(D2, abs=1e-12)
    assert D1 >= 0 and D2 >= 0


def test_centre_of_gravity_minimizes_spread(rng):
    field = random_field(rng)
    pos, gam = field.positions, field.circulations
    p = momenta(field)[3]
    spread = lambda q: math.fsum(gam * np.sum((pos - q) ** 2, axis=1))
    base = spread(p)
    for _ in range(100):
        v = rng.normal(size=2)
        assert base < spread(p + 1e-3 * v / np.linalg.norm(v))


def test_jensen_bound(rng):
    for _ in range(10):
        field = random_field(rng)
        M1 = momenta(field)[1]
        assert math.fsum(field.circulations * japanese(field.positions)) <= math.sqrt(1 + M1)


def test_cutoff_profile():
    eta = CutoffEta()
    r = np.linspace(0, 30, 3001)
    v = eta(r)
    assert np.all(v[r <= 10] == 0) and np.all(v[r >= 20] == 1)
    assert np.all((v >= 0) & (v <= 1))
    assert eta(15.0) == 0.5
    # first and second derivatives vanish at both plateaus
    h = 1e-4
    for r0 in (10.0, 20.0):
        d1 = (eta(r0 + h) - eta(r0 - h)) / (2 * h)
        d2 = (eta(r0 + h) - 2 * eta(r0) + eta(r0 - h)) / h**2
        assert abs(d1) < 1e-6 and abs(d2) < 1e-3


def test_m_star_examples():
    assert m_star(init_blob(SimConfig(epsilon=0.05))) == 0.0
    assert m_star(atoms([[30, 0]], [1])) == 900
    assert m_star(atoms([[0, 15]], [1])) == pytest.approx(112.5, abs=1e-12)


def test_energy_star_examples():
    field = atoms([[0, 0], [2, 0]], [0.5, 0.5])
    assert energy_star(field) == 0.0
    # diagonal convention: G_i^2 log(1/delta) <x_i>
    reg = atoms([[0, 0], [2, 0]], [0.5, 0.5], delta=0.1)
    assert energy_star(reg) == pytest.approx(0.25 * math.log(10) * (1 + math.sqrt(5)), abs=1e-12)


def test_energy_star_leading_coefficient():
    eps = 0.01
    ratio = energy_star(init_blob(SimConfig(epsilon=eps))) / math.log(1 / eps)
    assert math.sqrt(2) * 0.75 <= ratio <= math.sqrt(2) * 1.25


def test_energy_star_scaling():
    big = energy_star(init_blob(SimConfig(epsilon=0.05)))
    small = energy_star(init_blob(SimConfig(epsilon=0.005)))
    expected = math.sqrt(2) * math.log(10)
    assert abs((small - big) - expected) <= 0.25 * expected


def test_energy_star_far_particle_adds_only_diagonal():
    base = init_blob(SimConfig(epsilon=0.05))
    g = 1e-6
    pos = np.vstack([base.positions, [[5.0, 0.0]]])
    gam = np.append(base.circulations * (1 - g), g)
    grown = atoms(pos, gam, delta=base.delta)
    scaled = atoms(base.positions, base.circulations * (1 - g), delta=base.delta)
    diag = g * g * math.log(1 / base.delta) * math.sqrt(26)
    assert energy_star(grown) - energy_star(scaled) == pytest.approx(diag, abs=1e-12)


def test_energy_pair_single_atom_and_normalization():
    assert math.isfinite(energy_pair(atoms([[1, 0]], [1], delta=0.01)))
    field = init_blob(SimConfig(epsilon=0.02))
    assert abs(energy_pair(field) * C_NORM - energy_star(field)) < 5


def test_concentration_center_examples():
    np.testing.assert_array_equal(concentration_center(atoms([[0.2, 0.7]], [1])), [0.2, 0.7])
    left = init_blob(SimConfig(epsilon=0.05, sigma=(-1.0, 0.0)))
    right = init_blob(SimConfig(epsilon=0.05, sigma=(1.0, 0.0)))
    both = atoms(np.vstack([left.positions, right.positions]), np.concatenate([left.circulations, right.circulations]) / 2)
    ps = concentration_center(both)
    assert min(np.linalg.norm(ps - [-1, 0]), np.linalg.norm(ps - [1, 0])) < 0.05


def test_concentration_center_near_centre_of_gravity():
    eps = 0.05
    field = init_blob(SimConfig(epsilon=eps))
    ps = concentration_center(field)
    assert np.linalg.norm(ps - momenta(field)[3]) < 3 / math.log(1 / eps)


def test_mass_outside(rng):
    field = random_field(rng)
    assert mass_outside(field, [0, 0], 1e6) == (0.0, 0.0)
    for r in (0.5, 1.0, 3.0):
        out, weighted = mass_outside(field, [0.1, 0.2], r)
        assert out + mass_inside(field, [0.1, 0.2], r) == pytest.approx(1.0, abs=1e-15)
        assert weighted >= out
    with pytest.raises(ValueError):
        mass_outside(field, [0, 0], 0.0)


def test_rotation_fit_synthetic():
    eps = [0.1, 0.05, 0.02, 0.01]
    om = [ROTATION_SLOPE * math.log(1 / e) for e in eps]
    fit = fit_rotation_line(eps, om)
    assert abs(fit.slope - ROTATION_SLOPE) < 1e-12
    assert fit.relative_slope_error < 1e-10
    assert ROTATION_SLOPE == pytest.approx(-0.05627, abs=1e-5)
    with pytest.raises(InsufficientDataError):
        fit_rotation_line(eps[:2], om[:2])
    with pytest.raises(InsufficientDataError):
        fit_rotation(eps[:2], [init_blob(SimConfig(epsilon=e)) for e in eps[:2]])


def test_record_invariants_and_csv_round_trip(tmp_path):
    field = init_blob(SimConfig(epsilon=0.1))
    rec = compute_record(field, 0.25)
    assert rec.mass == pytest.approx(1, abs=1e-12)
    assert rec.D1 == pytest.approx(rec.M1 - rec.p[0] ** 2 - rec.p[1] ** 2, abs=1e-12)
    path = tmp_path / "d.csv"
    write_diagnostics_csv(path, [rec, rec])
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert CSV_COLUMNS == ("t", "mass", "E_pair", "E_star", "M1", "M2", "Mstar", "p1", "p2", "ps1", "ps2", "D1", "D2", "mass_out")
    assert read_diagnostics_csv(path) == [rec, rec]


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 1)), min_size=1, max_size=20))
def test_identities_hold_for_any_field(items):
    pos = np.array([[a, b] for a, b, _ in items])
    g = np.array([c for *_, c in items])
    field = atoms(pos, g / math.fsum(g))
    if abs(math.fsum(field.circulations) - 1) > 1e-12:
        return
    _, M1, _, p = momenta(field)
    D1, D2 = distance_functions(field)
    scale = 1 + M1
    assert abs(D1 + p @ p - M1) <= 1e-12 * scale
    assert abs(D2 + 2 * p @ p - 2 * M1) <= 1e-12 * scale
