"""Score families: branch formulas, weights, the gradient vector and
its boundedness probes."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from epfit.epd import EpdParams, distorted_log_pdf, log_q_pdf
from epfit.scores import (
    CombinedHuber,
    CombinedPlain,
    Distorted,
    Huber,
    Plain,
    QWeighted,
    ShapeTriple,
    density_weight,
    ee_weight,
    psi_vector,
    s_combined,
    s_huber,
    s_plain,
    score,
    weight_distorted,
    weight_q,
)

STANDARD = EpdParams(0.0, 1.0, 2.0)
finite_y = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestPlainScore:
    def test_values(self):
        assert s_plain(0.0, 2.0) == 0.0
        assert s_plain(-1.5, 2.0) == pytest.approx(-3.0, rel=1e-12)
        assert s_plain(2.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    @given(finite_y)
    def test_odd(self, y):
        assert s_plain(-y, 1.7) == -s_plain(y, 1.7)

    def test_zero_handled_below_one(self):
        assert s_plain(0.0, 0.6) == 0.0


class TestHuberScore:
    def test_values(self):
        assert s_huber(0.5, 1.0) == 0.5
        assert s_huber(3.0, 1.0) == 1.0
        assert s_huber(-3.0, 1.0) == -1.0

    @given(finite_y)
    def test_odd(self, y):
        assert s_huber(-y, 1.345) == -s_huber(y, 1.345)

    def test_clamp_equivalence(self):
        rng = np.random.default_rng(3)
        ys = rng.normal(0.0, 4.0, size=1000)
        np.testing.assert_array_equal(s_huber(ys, 1.2), np.clip(ys, -1.2, 1.2))

    def test_requires_positive_r(self):
        with pytest.raises(ValueError):
            Huber(0.0)


class TestCombinedScore:
    TRIPLE = ShapeTriple(1.25, 2.1, 1.4)

    def test_middle_branch_matches_plain(self):
        tri = ShapeTriple(1.0, 2.0, 1.0)
        assert s_combined(0.5, tri, 1.0, 1.0, huberized=True) == pytest.approx(1.0)

    def test_left_branch_plain(self):
        got = s_combined(-2.0, self.TRIPLE, 1.0, 1.0, huberized=False)
        assert got == pytest.approx(-1.25 * 2.0**0.25, rel=1e-12)

    def test_left_branch_huberized_magnitude(self):
        got = s_combined(-2.0, self.TRIPLE, 1.0, 1.0, huberized=True)
        assert abs(got) == pytest.approx(1.0 * 1.25 * 2.0**0.25, rel=1e-12)
        # sign convention keeps the left branch negative
        assert got < 0.0

    def test_literal_reading_flips_interior_sign(self):
        plain_literal = s_combined(-0.5, self.TRIPLE, 1.0, 1.0, False, literal_tail_sign=True)
        assert plain_literal > 0.0
        default = s_combined(-0.5, self.TRIPLE, 1.0, 1.0, False)
        assert default == pytest.approx(-plain_literal)

    def test_discontinuity_at_cutpoints_is_intentional(self):
        tri = ShapeTriple(1.25, 2.1, 1.4)
        below = s_combined(-1.0001, tri, 1.0, 1.0, False)
        above = s_combined(-0.9999, tri, 1.0, 1.0, False)
        assert abs(below - above) > 0.1

    def test_cut_validation(self):
        with pytest.raises(ValueError):
            CombinedPlain(self.TRIPLE, -0.1, 1.0)
        with pytest.raises(ValueError):
            ShapeTriple(0.0, 1.0, 1.0)


class TestWeights:
    def test_q_one_is_unity(self):
        xs = np.linspace(-5, 5, 11)
        np.testing.assert_array_equal(weight_q(xs, STANDARD, 1.0), np.ones(11))

    def test_beta_zero_is_unity(self):
        xs = np.linspace(-5, 5, 11)
        np.testing.assert_array_equal(weight_distorted(xs, STANDARD, 0.0), np.ones(11))

    def test_distorted_half(self):
        got = weight_distorted(0.0, EpdParams(0.0, 1.0, 1.0), 0.5)
        assert got == pytest.approx(0.5, rel=1e-12)

    def test_family_validation(self):
        with pytest.raises(ValueError):
            QWeighted(0.0)
        with pytest.raises(ValueError):
            QWeighted(1.2)
        with pytest.raises(ValueError):
            Distorted(-1e-9)

    def test_ee_weight_positive(self):
        rng = np.random.default_rng(5)
        xs = rng.normal(0, 2, 200)
        for family in (Plain(), Huber(1.1), QWeighted(0.8), Distorted(0.01),
                       CombinedPlain(ShapeTriple(1.7, 2.0, 1.8), 0.9, 1.1),
                       CombinedHuber(ShapeTriple(1.7, 2.0, 1.8), 0.9, 1.1)):
            w = ee_weight(family, xs, STANDARD)
            assert np.all(w >= 0.0)

    def test_ee_weight_is_score_over_residual(self):
        rng = np.random.default_rng(6)
        xs = rng.normal(0, 2, 100)
        for family in (Plain(), Huber(0.9), QWeighted(0.7), Distorted(0.02)):
            w = ee_weight(family, xs, STANDARD)
            s = score(family, xs, STANDARD)
            np.testing.assert_allclose(w, s / xs * STANDARD.sigma, rtol=1e-12)

    def test_density_weight_defaults_to_one(self):
        xs = np.linspace(-2, 2, 7)
        np.testing.assert_array_equal(density_weight(Plain(), xs, STANDARD), np.ones(7))


class TestPsiVector:
    POINT = EpdParams(0.3, 1.4, 2.2)

    @staticmethod
    def _fd_gradient(fun, p, h=1e-6):
        grads = []
        for name in ("mu", "sigma", "alpha"):
            up = dataclasses.replace(p, **{name: getattr(p, name) + h})
            dn = dataclasses.replace(p, **{name: getattr(p, name) - h})
            grads.append((fun(up) - fun(dn)) / (2.0 * h))
        return np.array(grads)

    @pytest.mark.parametrize("q,beta", [(1.0, 0.0), (0.8, 0.0), (1.0, 0.01)])
    def test_matches_finite_differences(self, q, beta):
        for x in np.linspace(-3.0, 3.0, 20):
            psi = np.array(psi_vector(x, self.POINT, q=q, beta=beta))
            if beta > 0.0:
                oracle = self._fd_gradient(lambda p: distorted_log_pdf(x, p, beta), self.POINT)
            else:
                oracle = self._fd_gradient(lambda p: log_q_pdf(x, p, q), self.POINT)
            np.testing.assert_allclose(psi, oracle, atol=1e-4)

    def test_redescending_limits(self):
        big = 1e6
        for kwargs in ({"q": 0.8}, {"beta": 0.01}):
            psi = np.abs(np.array(psi_vector(big, STANDARD, **kwargs)))
            assert np.max(psi) < 1e-8

    def test_unbounded_without_deformation(self):
        assert abs(psi_vector(1e6, STANDARD)[0]) > 1e3

    def test_unbounded_above_one(self):
        assert abs(psi_vector(1e6, STANDARD, q=1.5)[0]) > 1e3

    def test_location_component_is_weighted_plain_score(self):
        for x in np.linspace(-3.0, 3.0, 13):
            w = weight_q(x, self.POINT, 0.8)
            y = (x - self.POINT.mu) / self.POINT.sigma
            want = w * s_plain(y, self.POINT.alpha) / self.POINT.sigma
            assert psi_vector(x, self.POINT, q=0.8)[0] == pytest.approx(want, abs=1e-10)

    def test_scale_component_formula(self):
        x = 1.7
        y = (x - self.POINT.mu) / self.POINT.sigma
        want = (self.POINT.alpha * abs(y) ** self.POINT.alpha - 1.0) / self.POINT.sigma
        assert psi_vector(x, self.POINT)[1] == pytest.approx(want, rel=1e-12)

    def test_mode_exclusivity(self):
        with pytest.raises(ValueError):
            psi_vector(1.0, STANDARD, q=0.8, beta=0.1)
