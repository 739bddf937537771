import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impulse_gap.cone import ConeError, ControlCone, DegenerateCone

from helpers import random_cone


def moreau_residuals(cone, ell):
    P = cone.project(ell)
    r = ell - P
    polar = np.max(cone.generators.T @ r, initial=0.0) if cone.generators.size else 0.0
    return abs(float(r @ P)), float(polar), float(np.linalg.norm(ell - P - r))


def test_line_projection_is_identity():
    cone = ControlCone.full(1)
    assert np.allclose(cone.project([2.5]), [2.5])
    value, c = cone.sup_unit([2.0])
    assert value == pytest.approx(2.0)
    assert np.allclose(c, [1.0])
    value, c = cone.sup_unit([-2.0])
    assert value == pytest.approx(2.0)
    assert np.allclose(c, [-1.0])


def test_half_line_negative():
    cone = ControlCone.orthant(1)
    assert np.allclose(cone.project([-3.0]), [0.0])
    value, c = cone.sup_unit([-3.0])
    # Only c = 1 is a unit vector of the half-line.
    assert value == pytest.approx(-3.0)
    assert np.allclose(c, [1.0])


def test_orthant_projection():
    cone = ControlCone.orthant(3)
    assert np.allclose(cone.project([1.0, -2.0, 0.5]), [1.0, 0.0, 0.5])


def test_mixed_cone():
    cone = ControlCone.build(1, 2, [[1.0, 0.0], [1.0, 1.0]])
    P = cone.project([-4.0, 0.0, 2.0])
    assert P[0] == pytest.approx(-4.0)
    assert np.allclose(P[1:], [1.0, 1.0])


def test_sup_unit_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(40):
        m = int(rng.integers(1, 4))
        cone = random_cone(rng, m)
        ell = rng.standard_normal(m)
        value, c = cone.sup_unit(ell)
        assert abs(np.linalg.norm(c) - 1) <= 1e-12
        assert cone.contains(c, 1e-9)
        assert ell @ c == pytest.approx(value, abs=1e-12)
        # No sampled unit direction in the cone does better.
        dirs = cone.sample_directions(100, rng, max_tries=5)
        assert np.max(ell @ dirs) <= value + 1e-9


def test_pointedness_check():
    ControlCone.build(0, 2, [[1, 0], [1, 1]]).check_pointed_c2()
    with pytest.raises(ConeError, match="contains no lines"):
        ControlCone.build(0, 1, [[1.0], [-1.0]]).check_pointed_c2()
    with pytest.raises(ConeError, match="contains no lines"):
        ControlCone.build(0, 2, [[1, 0], [-1, 1], [0, -1]]).check_pointed_c2()


def test_degenerate_cone():
    cone = ControlCone.build(0, 1, [])
    with pytest.raises(DegenerateCone):
        cone.project([1.0])


def test_generator_length_checked():
    with pytest.raises(ConeError):
        ControlCone.build(0, 2, [[1.0]])


def test_sample_directions_inside_cone():
    rng = np.random.default_rng(3)
    cone = ControlCone.build(0, 3, [[1, 0.01, 0], [1, 0, 0.01], [1, -0.01, -0.01]])
    dirs = cone.sample_directions(64, rng)
    assert dirs.shape[1] >= 64
    for c in dirs.T:
        assert abs(np.linalg.norm(c) - 1) <= 1e-12
        assert cone.contains(c, 1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_moreau_property(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    cone = random_cone(rng, m)
    ell = rng.standard_normal(m) * rng.uniform(0.1, 10)
    ortho, polar, _ = moreau_residuals(cone, ell)
    assert ortho <= 1e-9
    assert polar <= 1e-9
