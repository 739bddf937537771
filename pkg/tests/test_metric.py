import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impulse_gap.cone import ControlCone
from impulse_gap.fields import VectorField
from impulse_gap.metric import BoxViolation, dist_d, dist_dtilde, gronwall_certificate, sup_distances
from impulse_gap.process import ControlSignal, ControlSystem, simulate_extended

from helpers import random_control, random_system

SCALAR = ControlSystem(VectorField.parse(["0"], 1), (VectorField.parse(["1"], 1),), ControlCone.full(1))


def step_pair():
    z1 = ControlSignal.constant(1.0, 1.0, [0.0])
    z2 = ControlSignal(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]), np.array([[1.0], [0.0]]))
    return z1, z2


def test_zero_on_self():
    rng = np.random.default_rng(0)
    c = random_control(rng, ControlCone.full(2))
    assert dist_d(c, c).total == 0.0
    assert dist_dtilde(c, c).total == 0.0


def test_hand_example():
    z1, z2 = step_pair()
    rep = dist_d(z1, z2)
    assert rep.total == pytest.approx(1.0, abs=1e-15)
    assert rep.horizon_gap == 0.0
    assert rep.w0_part == pytest.approx(0.5) and rep.w_part == pytest.approx(0.5)
    assert dist_dtilde(z1, z2).total == pytest.approx(1.0, abs=1e-15)


def test_unequal_horizons():
    a = ControlSignal.constant(1.0, 1.0, [0.0])
    b = ControlSignal.constant(1.5, 1.0, [0.0])
    assert dist_d(a, b).total == pytest.approx(0.5)
    # Zero extension adds the tail of b: |1 - 0| over [1, 1.5].
    assert dist_dtilde(a, b).total == pytest.approx(1.0)


def test_breakdown_sums():
    rng = np.random.default_rng(1)
    for _ in range(20):
        cone = ControlCone.full(2)
        a, b = random_control(rng, cone), random_control(rng, cone)
        for rep in (dist_d(a, b), dist_dtilde(a, b)):
            assert abs(rep.total - rep.horizon_gap - rep.integral) <= 1e-12
            assert abs(rep.integral - rep.w0_part - rep.w_part) <= 1e-12


def test_symmetry_and_triangle():
    rng = np.random.default_rng(2)
    cone = ControlCone.build(1, 1, [[1.0]])
    for _ in range(50):
        a, b, c = (random_control(rng, cone) for _ in range(3))
        for dist in (dist_d, dist_dtilde):
            assert dist(a, b).total == pytest.approx(dist(b, a).total, abs=1e-14)
        assert dist_dtilde(a, c).total <= dist_dtilde(a, b).total + dist_dtilde(b, c).total + 1e-9


def test_triangle_for_d_on_canonical():
    rng = np.random.default_rng(3)
    cone = ControlCone.full(2)
    for _ in range(50):
        a, b, c = (random_control(rng, cone, canonical=True) for _ in range(3))
        assert dist_d(a, c).total <= dist_d(a, b).total + dist_d(b, c).total + 1e-9


def test_zero_distance_means_equal():
    a = ControlSignal(np.array([0.0, 0.5, 1.0]), np.array([1.0, 1.0]), np.zeros((2, 1)))
    b = ControlSignal.constant(1.0, 1.0, [0.0])
    assert dist_d(a, b).total == 0.0
    c = ControlSignal.constant(1.0, 1.0, [1e-9])
    assert dist_d(a, c).total > 0


def test_simple_estimates():
    rng = np.random.default_rng(4)
    for _ in range(20):
        sys = random_system(rng, 2, 2)
        x0 = rng.uniform(-1, 1, 2)
        ca = random_control(rng, sys.cone, canonical=True)
        cb = random_control(rng, sys.cone, canonical=True)
        za, zb = simulate_extended(sys, ca, x0), simulate_extended(sys, cb, x0)
        g0, _, gb = sup_distances(za, zb)
        rep = dist_dtilde(ca, cb)
        assert g0 <= rep.w0_part + 1e-9
        assert gb <= rep.w_part + 1e-9


class TestGronwall:
    box = ([-2.0], [2.0])

    def test_self(self):
        z = simulate_extended(SCALAR, ControlSignal.constant(1.0, 0.5, [0.5]), [0.0])
        rep = gronwall_certificate(z, z, self.box)
        assert rep.passed
        assert rep.y0_gap == rep.y_gap == rep.beta_gap == 0.0

    def test_hand_example(self):
        zbar = simulate_extended(SCALAR, ControlSignal.constant(1.0, 0.5, [0.5]), [0.0])
        z = simulate_extended(SCALAR, ControlSignal.constant(1.0, 0.4, [0.6]), [0.0])
        rep = gronwall_certificate(z, zbar, self.box)
        assert rep.beta_gap == pytest.approx(0.1, abs=1e-12)
        assert rep.dtilde == pytest.approx(0.2, abs=1e-12)
        assert rep.M == pytest.approx(1.0) and rep.L == 0.0
        assert rep.passed

    def test_box_violation(self):
        z = simulate_extended(SCALAR, ControlSignal.constant(5.0, 0.0, [1.0]), [0.0])
        with pytest.raises(BoxViolation):
            gronwall_certificate(z, z, self.box)

    def test_to_dict(self):
        z = simulate_extended(SCALAR, ControlSignal.constant(1.0, 0.5, [0.5]), [0.0])
        d = gronwall_certificate(z, z, self.box).to_dict()
        assert set(d) == {"M", "L", "R_bar", "dtilde", "gaps", "bounds", "margins", "passed"}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_equivalence_on_canonical_pairs(seed):
    rng = np.random.default_rng(seed)
    cone = ControlCone.full(2)
    a = random_control(rng, cone, canonical=True)
    b = random_control(rng, cone, canonical=True)
    d, dt = dist_d(a, b).total, dist_dtilde(a, b).total
    assert d <= dt + 1e-10
    assert dt <= 2 * d + 1e-10
