import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoform.errors import ConfigError, MapDomainEscapeError, SingularPotentialError
from thermoform.maps import (
    c2_distance,
    critical_orbit_collisions,
    eval_orbit,
    growth_margin,
    make_map,
    potential_phi,
    validate_map,
)


def test_orbit_tent2_third(tent2):
    orb = eval_orbit(tent2, 1 / 3, 2)
    assert np.allclose(orb, [1 / 3, 2 / 3, 2 / 3], atol=1e-15)


def test_orbit_cheb_critical(cheb):
    orb = eval_orbit(cheb, 0.5, 3)
    assert np.allclose(orb, [0.5, 1.0, 0.0, 0.0], atol=1e-15)


def test_orbit_tent19_exact_rational(tent19):
    # independent oracle: exact rational iteration of the tent formula
    s = Fraction(19, 10)
    x = Fraction(1, 5)
    expect = [x]
    for _ in range(5):
        x = s * min(x, 1 - x)
        expect.append(x)
    orb = eval_orbit(tent19, 0.2, 5)
    assert np.allclose(orb, [float(e) for e in expect], atol=1e-12)


def test_orbit_escape_guard():
    bad = make_map("tent", {"s": 2.0}, validate=False)
    object.__setattr__(bad, "f", lambda x: np.asarray(x, dtype=float) + 1.5)
    with pytest.raises(MapDomainEscapeError):
        eval_orbit(bad, 0.3, 3)


def test_phi_constant_slope(tent2):
    for x in (0.1, 0.3, 0.7, 0.9):
        assert potential_phi(tent2, 1.0, x) == pytest.approx(-math.log(2), abs=1e-14)


def test_phi_cheb_values(cheb):
    assert potential_phi(cheb, 1.0, 0.0) == pytest.approx(-math.log(4), abs=1e-14)
    # |f'(0.25)| = 4 - 8*0.25 = 2
    assert potential_phi(cheb, 0.9, 0.25) == pytest.approx(-0.9 * math.log(2), abs=1e-14)


def test_phi_zero_at_t0(cheb, tent19):
    for m in (cheb, tent19):
        xs = np.linspace(0.01, 0.99, 37)
        xs = xs[np.abs(xs - 0.5) > 1e-6]
        assert np.all(potential_phi(m, 0.0, xs) == 0.0)


@given(t1=st.floats(-3, 3), t2=st.floats(-3, 3),
       x=st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_phi_linear_in_t(t1, t2, x):
    m = make_map("cheb")
    if abs(x - 0.5) < 1e-9:
        return
    lhs = potential_phi(m, t1 + t2, x)
    rhs = potential_phi(m, t1, x) + potential_phi(m, t2, x)
    assert lhs == pytest.approx(rhs, abs=1e-12, rel=1e-12)


def test_phi_singular_clearance(cheb):
    with pytest.raises(SingularPotentialError):
        potential_phi(cheb, 1.0, 0.5 + 1e-14)


def test_c2_identity(tent19):
    assert c2_distance(tent19, tent19, 100) == 0.0


def test_c2_tent_slopes(tent2, tent19):
    # sup-norm term 0.05 near the corner plus derivative term 0.1
    d = c2_distance(tent2, tent19, 1000)
    assert d >= 0.1
    assert d == pytest.approx(0.15, abs=1e-3)


def test_c2_quadratic_closed_form():
    a = make_map("logistic", {"a": 3.9})
    b = make_map("logistic", {"a": 3.8})
    # max over x of 0.1*(x(1-x) + |1-2x| + 2) = 0.3 at the endpoints
    assert c2_distance(a, b, 1000) == pytest.approx(0.3, abs=1e-12)


def test_c2_pseudometric(tent2, tent19, cheb):
    maps = [tent2, tent19, make_map("tent", {"s": 1.95})]
    for a in maps:
        for b in maps:
            assert c2_distance(a, b, 200) == c2_distance(b, a, 200)
    d = lambda a, b: c2_distance(a, b, 200)
    a, b, c = maps
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


@pytest.mark.parametrize("family,params", [
    ("tent", {"s": 2.0}),
    ("tent", {"s": 1.9}),
    ("cheb", {}),
    ("logistic", {"a": 3.9}),
    ("logistic", {"a": 3.5}),
    ("skew_tent", {"peak": 0.4, "height": 0.95}),
])
def test_orbits_never_escape(family, params):
    m = make_map(family, params)
    rng = np.random.default_rng(7)
    x = rng.uniform(0.0, 1.0, size=100)
    for _ in range(10_000):
        x = np.asarray(m.f(x))
        assert x.min() >= -1e-9 and x.max() <= 1 + 1e-9
        x = np.clip(x, 0.0, 1.0)
    # and the scalar op agrees on a few seeds
    for seed in x[:5]:
        eval_orbit(m, float(seed), 100)


def test_registry_and_validation():
    with pytest.raises(ConfigError):
        make_map("unknown-family")
    with pytest.raises(ConfigError):
        make_map("tent", {"s": 1.2})  # below sqrt(2)
    with pytest.raises(ConfigError):
        make_map("logistic", {"a": 3.0})
    for fam, p in (("tent", {"s": 1.7}), ("logistic", {"a": 3.7}), ("cheb", {})):
        assert validate_map(make_map(fam, p))


def test_growth_margin_exact_families(tent2, cheb, tent19):
    # |Df^n(f(c))| equals the declared bound exactly for these families
    assert growth_margin(tent2, 30) == pytest.approx(1.0, rel=1e-9)
    assert growth_margin(tent19, 30) == pytest.approx(1.0, rel=1e-9)
    assert growth_margin(cheb, 20) == pytest.approx(1.0, rel=1e-9)


def test_critical_collision_diagnostic(cheb, tent19):
    # cheb's critical orbit lands on the fixed point 0: collisions at all times
    hits = critical_orbit_collisions(cheb, 5)
    assert hits
    # generic tent slope: no collisions at small depth
    assert not critical_orbit_collisions(tent19, 8, tol=1e-9)
