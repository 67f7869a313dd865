import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accessbound import bounds as bd
from accessbound.geometry import Ball, Box, Cone

mpmath.mp.prec = 200


def mp_slope(d, V, r, eps):
    return float(d * mpmath.log(1 + 2 * mpmath.mpf(r) / mpmath.mpf(eps)) / mpmath.log(V))


def ball_geom(d, V, r, eps, m=1, q=None):
    return bd.ModelGeometry(d, V, Ball(d, r, "linf"), bd.UniformPrecision(eps), m, q)


def dyadic_grid_count(a, b):
    """Points of the binade grids on (2^a, 2^b]: 2^12 evenly spaced values per binade."""
    pts = set()
    for j in range(a + 1, b + 1):
        lo = Fraction(2) ** (j - 1)
        step = lo / 2 ** 12
        for k in range(1, 2 ** 12 + 1):
            pts.add(lo + k * step)
    return len(pts)


def fp16_values_in(lo, hi):
    bits = np.arange(0, 0x7C00, dtype=np.uint16)  # finite positives
    vals = bits.view(np.float16).astype(np.float64)
    return int(((vals >= lo) & (vals <= hi)).sum())


class TestPrecision:
    def test_fp16(self):
        assert bd.machine_epsilon(bd.FloatPrecision(11)) == 2.0 ** -10

    def test_bf16(self):
        assert bd.machine_epsilon(bd.BF16) == 2.0 ** -7

    def test_uniform_passthrough(self):
        assert bd.machine_epsilon(bd.UniformPrecision(0.01)) == 0.01

    def test_fp16_matches_numpy(self):
        assert bd.machine_epsilon(bd.FP16) == float(np.finfo(np.float16).eps)

    def test_invalid(self):
        with pytest.raises(ValueError):
            bd.UniformPrecision(0.0)
        with pytest.raises(ValueError):
            bd.FloatPrecision(1)


class TestQuantize:
    def test_zero(self):
        assert np.array_equal(bd.quantize(np.zeros((3, 2)), 0.1), np.zeros((3, 2)))

    def test_floor(self):
        assert bd.quantize([0.37], 0.25)[0] == 0.25

    def test_negative_floor(self):
        assert bd.quantize([-0.1], 0.25)[0] == -0.25

    def test_idempotent_random(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            X = rng.normal(0, 10, size=(4, 3))
            eps = float(rng.uniform(1e-3, 1.0))
            Q = bd.quantize(X, eps)
            assert np.array_equal(bd.quantize(Q, eps), Q)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.floats(1e-4, 10.0))
    def test_idempotent_and_below(self, xs, eps):
        Q = bd.quantize(xs, eps)
        assert np.array_equal(bd.quantize(Q, eps), Q)
        assert np.all(Q <= np.asarray(xs))


class TestFinite:
    def test_small_counts(self):
        assert bd.count_finite(ball_geom(1, 3, 1.0, 1.0)) == pytest.approx(math.log(3))
        assert bd.count_finite(ball_geom(2, 3, 1.0, 0.5, m=3)) == pytest.approx(6 * math.log(5))

    def test_threshold_exactly_one(self):
        assert bd.threshold_finite(ball_geom(1, 3, 1.0, 1.0)) == pytest.approx(1.0, abs=1e-15)

    def test_pythia_count(self):
        g = bd.model_geometry("Pythia-160M")
        want = float(768 * mpmath.log(1 + 2 * mpmath.mpf("63.62") * 1024))
        assert bd.count_finite(g) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("name,d,V,r", [("Pythia-160M", 768, 50304, 63.62),
                                            ("Qwen-0.5B", 896, 151936, 309.0)])
    def test_reference_slopes(self, name, d, V, r):
        g = bd.model_geometry(name)
        want = mp_slope(d, V, r, 2.0 ** -10)
        assert bd.threshold_finite(g) == pytest.approx(want, rel=1e-12)
        assert bd.slope_ball(g).slope == pytest.approx(want, rel=1e-12)

    def test_pythia_near_reported(self):
        assert abs(bd.slope_ball(bd.model_geometry("Pythia-160M")).slope - 835.4) < 0.2

    @given(st.integers(1, 50), st.integers(1, 50))
    def test_linear_in_m(self, m, k):
        a = bd.threshold_finite(ball_geom(8, 16, 2.0, 0.01, m=m))
        b = bd.threshold_finite(ball_geom(8, 16, 2.0, 0.01, m=m * k))
        assert b == pytest.approx(k * a, rel=1e-12)
        s = bd.slope_ball(ball_geom(8, 16, 2.0, 0.01)).slope
        assert a == pytest.approx(m * s, rel=1e-12)

    def test_small_slope(self):
        assert bd.slope_ball(ball_geom(2, 4, 1.0, 1.0)).slope == pytest.approx(2 * math.log(3) / math.log(4))

    @given(st.integers(1, 64), st.floats(0.1, 100.0), st.floats(1e-4, 1.0), st.integers(2, 10 ** 6))
    def test_decay_beyond_threshold(self, d, r, eps, V):
        g = ball_geom(d, V, r, eps)
        n = math.ceil(bd.threshold_finite(g)) + 1
        f0 = bd.decay_log_fraction(g, n)
        assert f0 < 0
        assert bd.decay_log_fraction(g, n + 1) == pytest.approx(f0 - math.log(V), rel=1e-12, abs=1e-9)

    def test_prompt_len_required(self):
        with pytest.raises(ValueError):
            bd.count_finite(bd.ModelGeometry(2, 4, Ball(2, 1.0)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            bd.ModelGeometry(3, 4, Ball(2, 1.0))


class TestShapes:
    def test_cube_box_equals_ball(self):
        r, eps = 1.7, 2.0 ** -10
        box = bd.ModelGeometry(5, 100, Box([-r] * 5, [r] * 5), bd.UniformPrecision(eps))
        assert bd.slope_ellipsoid(box).slope == pytest.approx(
            bd.slope_ball(ball_geom(5, 100, r, eps)).slope, rel=1e-14)

    def test_cone_near_pi_is_half_ball(self):
        d, V, r, eps = 16, 1000, 3.0, 0.01
        cone = bd.ModelGeometry(d, V, Cone(d, r, math.pi - 1e-9), bd.UniformPrecision(eps))
        want = bd.slope_ball(ball_geom(d, V, r, eps)).slope + math.log(0.5) / math.log(V)
        assert bd.slope_cone(cone).slope == pytest.approx(want, rel=1e-8)

    @given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
    def test_cone_nondecreasing_in_angle(self, a, b):
        lo, hi = sorted((a, b))
        mk = lambda t: bd.slope_cone(bd.ModelGeometry(32, 500, Cone(32, 2.0, t), bd.FP16)).slope
        assert mk(lo) <= mk(hi) + 1e-12

    def test_printed_prefactor_differs_by_radius(self):
        a = bd.log_frac_cone(10, 1.0, radius=4.0, printed=False)
        b = bd.log_frac_cone(10, 1.0, radius=4.0, printed=True)
        assert b - a == pytest.approx(-math.log(4.0), abs=1e-12)

    def test_dispatch(self):
        g = bd.model_geometry("Pythia-160M", shape="cone")
        assert bd.slope(g).shape == "cone"
        assert bd.slope(g).slope < bd.slope_ball(bd.model_geometry("Pythia-160M")).slope


class TestVariablePrecision:
    def test_example(self):
        assert bd.variable_precision_packing_interval(1.0, 4.0) == 8192.0

    @pytest.mark.parametrize("k", [-3, 0, 1, 3])
    def test_degenerate(self, k):
        assert bd.variable_precision_packing_interval(2.0 ** k, 2.0 ** k) == 0.0

    @pytest.mark.parametrize("a,b", [(a, b) for a in range(-3, 4) for b in range(a, 4)])
    def test_dyadic_enumeration(self, a, b):
        assert bd.variable_precision_packing_interval(2.0 ** a, 2.0 ** b) == dyadic_grid_count(a, b)

    @pytest.mark.parametrize("lo,hi", [(1.0, 4.0), (0.3, 7.5), (0.01, 0.02), (3.0, 1000.0)])
    def test_upper_bounds_fp16(self, lo, hi):
        assert bd.variable_precision_packing_interval(lo, hi) >= fp16_values_in(lo, hi)

    def test_symmetric_doubles(self):
        assert bd.variable_precision_packing_symmetric(1.0, 4.0) == 16384.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            bd.variable_precision_packing_interval(0.0, 1.0)
        with pytest.raises(ValueError):
            bd.variable_precision_packing_interval(2.0, 1.0)


class TestMeanField:
    def test_small_count(self):
        g = ball_geom(1, 3, 1.0, 1.0, q=1.0)
        assert math.exp(bd.count_meanfield(g)) == pytest.approx(3 * (1 + math.log(3)), rel=1e-12)

    def test_q_infinite_small_radius(self):
        g = ball_geom(2, 3, 0.2, 1.0, q=math.inf)
        assert math.exp(bd.count_meanfield(g)) == pytest.approx(1.4 ** 2, rel=1e-12)

    def test_threshold_example(self):
        g = ball_geom(1, 3, 1.0, 1.0, q=1.0)
        want = math.log(5 * math.log(3 * math.e) / math.log(3))
        assert bd.threshold_meanfield(g) == pytest.approx(want, rel=1e-12)

    @given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(1e-3, 1.0))
    @settings(max_examples=50)
    def test_monotone(self, r1, r2, eps):
        lo, hi = sorted((r1, r2))
        assert bd.count_meanfield(ball_geom(4, 10, lo, eps, q=2.0)) <= \
            bd.count_meanfield(ball_geom(4, 10, hi, eps, q=2.0)) + 1e-12
        assert bd.count_meanfield(ball_geom(4, 10, lo, eps, q=2.0)) <= \
            bd.count_meanfield(ball_geom(4, 10, lo, eps / 2, q=2.0)) + 1e-12
        assert bd.threshold_meanfield(ball_geom(4, 10, lo, eps, q=2.0)) < \
            bd.threshold_meanfield(ball_geom(4, 10, lo, eps / 2, q=2.0))

    def test_independent_of_prompt_len(self):
        a = bd.threshold_meanfield(ball_geom(4, 10, 1.0, 0.1, m=1, q=2.0))
        b = bd.threshold_meanfield(ball_geom(4, 10, 1.0, 0.1, m=99, q=2.0))
        assert a == b

    def test_q_required(self):
        with pytest.raises(ValueError):
            bd.count_meanfield(ball_geom(2, 3, 1.0, 1.0))


class TestConstants:
    def test_table(self):
        data = bd.load_model_constants()
        assert data["epsilon"] == 2.0 ** -10
        names = [r["name"] for r in data["models"]]
        assert "Pythia-160M" in names and len(names) == 7

    def test_unknown(self):
        with pytest.raises(KeyError):
            bd.model_geometry("nope")
