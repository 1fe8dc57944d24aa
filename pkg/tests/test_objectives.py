"""Objective models checked against independent oracles.

erf against the stdlib, the accuracy closed form against adaptive 2D
quadrature of the endpoint distribution, and shoulder torque against a
hand-derived center-of-mass computation.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from adaptsel import geometry as geo
from adaptsel import objectives as obj
from adaptsel.geometry import AngularPoint
from adaptsel.scene import ArmModel, ArmPosture


# --- error function ---------------------------------------------------------


class TestErf:
    @pytest.mark.parametrize("x", [-4.0, -1.5, -0.3, 0.0, 0.2, 1.0, 2.7, 5.0])
    def test_matches_stdlib(self, x):
        assert obj.erf(x) == pytest.approx(math.erf(x), abs=1.5e-7)

    def test_odd_symmetry(self):
        for x in np.linspace(0.1, 3.0, 30):
            assert obj.erf(-x) == -obj.erf(x)

    @given(st.floats(-6, 6))
    def test_bounded_and_close(self, x):
        y = obj.erf(x)
        assert -1.0 <= y <= 1.0
        assert abs(y - math.erf(x)) < 1.5e-7


# --- speed ------------------------------------------------------------------


class TestSpeed:
    def test_equal_amplitude_and_width_gives_minus_one(self):
        assert obj.score_speed(5.0, 5.0) == pytest.approx(-1.0)

    def test_zero_amplitude_gives_zero(self):
        assert obj.score_speed(0.0, 3.0) == 0.0

    def test_nonpositive_width_raises(self):
        with pytest.raises(ValueError):
            obj.score_speed(1.0, 0.0)

    def test_index_of_difficulty_form(self):
        assert obj.score_speed(10.0, 2.5) == pytest.approx(-math.log2(5.0))

    @given(
        st.floats(0.0, 20.0),
        st.floats(0.05, 20.0),
        st.floats(0.05, 20.0),
    )
    @settings(max_examples=60)
    def test_monotone_harder_with_amplitude(self, a, w1, w2):
        wide, narrow = max(w1, w2), min(w1, w2)
        assert obj.score_speed(a, wide) >= obj.score_speed(a, narrow)


# --- endpoint distribution and accuracy ------------------------------------


class TestEndpointModel:
    def test_regression_values_at_study_condition(self):
        params = obj.EDModelParams()
        a, w = 10.0, 2.5
        assert params.mu(a, w) == pytest.approx(-0.1441 * 2.5 + 0.2649)
        assert params.sigma_x(a, w) == pytest.approx(
            0.0066 * 10 + 0.1025 * 2.5 + 0.2663
        )
        assert params.sigma_y(a, w) == pytest.approx(
            0.0085 * 10 + 0.0679 * 2.5 + 0.1437
        )

    def test_mu_sign_flips_the_mean(self):
        flipped = obj.EDModelParams(mu_sign=-1.0)
        base = obj.EDModelParams()
        assert flipped.mu(4.0, 1.0) == -base.mu(4.0, 1.0)


def quadrature_accuracy(a, w, box, params):
    """Numerically integrate the bivariate normal over the activation box."""
    mu = params.mu(a, w)
    sx = params.sigma_x(a, w)
    sy = params.sigma_y(a, w)

    def pdf(y, x):
        zx = (x - mu) / sx
        zy = y / sy
        return math.exp(-0.5 * (zx * zx + zy * zy)) / (2 * math.pi * sx * sy)

    x1, x2, y1, y2 = box
    lo_x, hi_x = min(x1, x2), max(x1, x2)
    lo_y, hi_y = min(y1, y2), max(y1, y2)
    value, _ = integrate.dblquad(pdf, lo_x, hi_x, lo_y, hi_y, epsabs=1e-9)
    return value


class TestAccuracy:
    def test_study_condition_against_quadrature(self):
        params = obj.EDModelParams()
        box = (-1.25, 1.25, -1.25, 1.25)
        got = obj.score_accuracy(10.0, 2.5, box, params)
        want = quadrature_accuracy(10.0, 2.5, box, params)
        assert got == pytest.approx(want, abs=1e-3)

    def test_randomized_boxes_against_quadrature(self, rng):
        params = obj.EDModelParams()
        for _ in range(25):
            a = float(rng.uniform(0.0, 20.0))
            w = float(rng.uniform(0.1, 10.0))
            cx = float(rng.uniform(-3.0, 3.0))
            cy = float(rng.uniform(-3.0, 3.0))
            hw = float(rng.uniform(0.05, 4.0))
            hh = float(rng.uniform(0.05, 4.0))
            box = (cx - hw, cx + hw, cy - hh, cy + hh)
            got = obj.score_accuracy(a, w, box, params)
            want = quadrature_accuracy(a, w, box, params)
            assert got == pytest.approx(want, abs=1e-3)

    def test_probability_bounds(self, rng):
        params = obj.EDModelParams()
        for _ in range(50):
            a = float(rng.uniform(0.0, 20.0))
            w = float(rng.uniform(0.1, 10.0))
            box = tuple(sorted(rng.uniform(-5, 5, 2))) + tuple(
                sorted(rng.uniform(-5, 5, 2))
            )
            p = obj.score_accuracy(a, w, box, params)
            assert 0.0 <= p <= 1.0

    def test_whole_plane_mass_is_one(self):
        params = obj.EDModelParams()
        p = obj.score_accuracy(5.0, 2.0, (-100, 100, -100, 100), params)
        assert p == pytest.approx(1.0, abs=1e-9)


# --- torque and comfort -----------------------------------------------------


def hanging_posture(arm):
    shoulder = np.array([0.0, 1.4, 0.0])
    down = np.array([0.0, -1.0, 0.0])
    elbow = shoulder + arm.upper_arm.length * down
    return ArmPosture(
        shoulder=shoulder, elbow=elbow, hand=elbow + arm.forearm.length * down
    )


class TestTorque:
    def test_hanging_arm_torque_is_zero(self):
        arm = ArmModel()
        assert obj.shoulder_torque(hanging_posture(arm), arm) < 1e-9

    def test_horizontal_arm_matches_hand_derivation(self):
        # lever arm = mass-weighted CoM offsets along the extended arm
        arm = ArmModel()
        lever = (
            arm.upper_arm.mass * arm.upper_arm.com_offset
            + arm.forearm.mass * (arm.upper_arm.length + arm.forearm.com_offset)
            + arm.hand.mass * (arm.reach + arm.hand.com_offset)
        ) / arm.total_mass
        want = lever * arm.total_mass * 9.81
        got = obj.max_horizontal_torque(arm)
        assert got == pytest.approx(want, rel=1e-9)
        assert got == pytest.approx(10.61, rel=0.01)

    def test_center_of_mass_sits_between_segments(self):
        arm = ArmModel()
        posture = hanging_posture(arm)
        com = obj.arm_center_of_mass(posture, arm)
        assert posture.hand[1] - arm.hand.com_offset <= com[1] <= posture.shoulder[1]


class TestComfort:
    def setup_method(self):
        self.arm = ArmModel()
        self.frame = geo.controller_frame([0.2, 1.1, 0.1], [0.0, 0.0, 1.0])
        shoulder = np.array([0.19, 1.38, 0.0])
        self.posture = ArmPosture(
            shoulder=shoulder,
            elbow=shoulder + np.array([0.0, -0.25, 0.2]),
            hand=np.array([0.2, 1.1, 0.1]),
        )

    def test_zero_sweep_is_single_negated_torque(self):
        got = obj.score_comfort(
            self.posture, self.frame, AngularPoint(0.0, 0.0), self.arm
        )
        assert got < 0

    def test_longer_sweeps_accumulate_more_torque(self):
        near = obj.score_comfort(
            self.posture, self.frame, AngularPoint(1.0, 0.0), self.arm
        )
        far = obj.score_comfort(
            self.posture, self.frame, AngularPoint(15.0, 0.0), self.arm
        )
        assert far < near < 0

    def test_batch_matches_scalar(self, rng):
        centers = rng.uniform(-18, 18, size=(40, 2))
        batch = obj.score_comfort_batch(self.posture, self.frame, centers, self.arm)
        for k, (h, v) in enumerate(centers):
            single = obj.score_comfort(
                self.posture, self.frame, AngularPoint(float(h), float(v)), self.arm
            )
            assert batch[k] == pytest.approx(single, rel=1e-9, abs=1e-9)

    def test_batch_empty_input(self):
        out = obj.score_comfort_batch(
            self.posture, self.frame, np.zeros((0, 2)), self.arm
        )
        assert out.shape == (0,)

    def test_invalid_beta_raises(self):
        with pytest.raises(ValueError):
            obj.score_comfort(
                self.posture, self.frame, AngularPoint(0, 0), self.arm, beta=0.0
            )


class TestSweepDirections:
    def test_step_count_and_endpoints(self):
        a = np.array([0.0, 0.0, 1.0])
        b = geo.normalize([math.sin(math.radians(10)), 0.0, math.cos(math.radians(10))])
        dirs = obj.sweep_directions(a, b, 1.0)
        assert len(dirs) == 11
        assert np.allclose(dirs[0], a)
        assert np.allclose(dirs[-1], b)

    def test_fractional_remainder_appends_final_direction(self):
        a = np.array([0.0, 0.0, 1.0])
        b = geo.normalize([math.sin(math.radians(2.5)), 0.0, math.cos(math.radians(2.5))])
        dirs = obj.sweep_directions(a, b, 1.0)
        assert len(dirs) == 4
        assert np.allclose(dirs[-1], b)

    def test_unit_norm_preserved(self, rng):
        a = geo.normalize(rng.normal(size=3))
        b = geo.normalize(rng.normal(size=3))
        dirs = obj.sweep_directions(a, b, 1.0)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


# --- familiarity and normalization -----------------------------------------


class TestFamiliarity:
    def test_table_lookup(self):
        assert obj.score_familiarity("RayCasting", obj.APPLICATION_FAMILIARITY) == 0.57
        assert obj.score_familiarity("StickyRay", obj.STUDY_FAMILIARITY) == 0.7

    def test_unknown_technique_raises(self):
        with pytest.raises(KeyError):
            obj.score_familiarity("Gaze", obj.STUDY_FAMILIARITY)


class TestBounds:
    def test_apply_maps_linearly_and_clamps(self):
        b = obj.Bounds(-2.0, 0.0)
        assert b.apply(-2.0) == 0.0
        assert b.apply(0.0) == 1.0
        assert b.apply(-1.0) == pytest.approx(0.5)
        assert b.apply(-5.0) == 0.0
        assert b.apply(3.0) == 1.0

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(ValueError):
            obj.Bounds(1.0, 1.0)

    def test_default_speed_bound_is_worst_cone_case(self):
        bounds = obj.default_bounds(r_c=20.0)
        assert bounds.speed.s_min == pytest.approx(-math.log2(20.0 / 0.05 + 1.0))
        assert bounds.speed.s_max == 0.0

    def test_default_comfort_bound_scales_with_sweep_length(self):
        arm = ArmModel()
        bounds = obj.default_bounds(r_c=20.0, beta=1.0, arm=arm)
        t_max = obj.max_horizontal_torque(arm)
        assert bounds.comfort.s_min == pytest.approx(-t_max * 21.0)
