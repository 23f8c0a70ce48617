import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from fbmsde.fbm_core import HurstParams, TimeGrid, sample_fbm_exact
from fbmsde.fraccalc import (
    SampledFunction,
    empirical_holder_exponent,
    frac_derivative,
    frac_integral,
    frac_op_negative,
    semigroup_check,
)


def sf(fn, n=1024, T=1.0):
    g = TimeGrid(T / n, n)
    return SampledFunction(g, fn(g.nodes))


def power_image(beta, alpha, t):
    return gamma(beta + 1) / gamma(beta + 1 + alpha) * t ** (beta + alpha)


class TestIntegral:
    def test_constant(self):
        f = sf(np.ones_like, 64)
        assert frac_integral(f, 0.5).values[-1] == pytest.approx(1 / gamma(1.5), rel=1e-13)

    def test_linear_exact(self):
        # product integration is exact for piecewise-linear data
        f = sf(lambda t: t, 64)
        assert frac_integral(f, 0.5).values[-1] == pytest.approx(gamma(2) / gamma(2.5), rel=1e-12)

    def test_zero_and_identity(self):
        f = sf(np.zeros_like, 32)
        assert np.all(frac_integral(f, 0.3).values == 0)
        h = sf(np.sin, 32)
        assert np.array_equal(frac_integral(h, 0.0).values, h.values)
        assert np.array_equal(frac_derivative(h, 0.0).values, h.values)

    @pytest.mark.parametrize("alpha", [0.0 - 0.1, 1.0, 1.5])
    def test_bad_order(self, alpha):
        with pytest.raises(ValueError):
            frac_integral(sf(np.sin, 8), alpha)

    @pytest.mark.parametrize("beta", [1.5, 2.0, 3.0])
    def test_power_law_order(self, beta):
        alpha = 0.35
        errs = []
        for n in (256, 512, 1024):
            f = sf(lambda t: t**beta, n)
            errs.append(np.max(np.abs(frac_integral(f, alpha).values - power_image(beta, alpha, f.grid.nodes))))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.0)

    def test_power_law_order_rough_origin(self):
        # for beta < 1 the sup error sits in the first cell and scales like dt^(beta+alpha)
        alpha, beta = 0.35, 0.5
        errs = []
        for n in (256, 512, 1024):
            f = sf(lambda t: t**beta, n)
            errs.append(np.max(np.abs(frac_integral(f, alpha).values - power_image(beta, alpha, f.grid.nodes))))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.allclose(orders, alpha + beta, atol=0.05)

    @given(st.floats(0.05, 0.95), st.floats(-2, 2), st.floats(-2, 2))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, alpha, a, b):
        f, g = sf(np.sin, 128), sf(lambda t: t**2 + 1, 128)
        lhs = frac_integral(f.with_values(a * f.values + b * g.values), alpha).values
        rhs = a * frac_integral(f, alpha).values + b * frac_integral(g, alpha).values
        assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))

    def test_batched_matches_scalar(self):
        g = TimeGrid(1 / 64, 64)
        x = np.random.default_rng(0).standard_normal((3, 65, 2))
        out = frac_integral(SampledFunction(g, x), 0.4).values
        one = frac_integral(SampledFunction(g, x[2, :, 1]), 0.4).values
        assert np.allclose(out[2, :, 1], one, atol=1e-13)


class TestDerivative:
    def test_inverse_pair(self):
        alpha = 0.4
        f = sf(lambda t: t**alpha / gamma(alpha + 1), 4096)
        d = frac_derivative(f, alpha).values
        # first few nodes see the interpolation error of t^alpha near the origin
        assert np.max(np.abs(d[64:] - 1)) < 1e-3

    def test_constant_profile(self):
        f = sf(lambda t: 2.0 + 0 * t, 4096)
        d = frac_derivative(f, 0.5).values
        t = f.grid.nodes
        assert np.allclose(d[100:], 2 * t[100:] ** -0.5 / gamma(0.5), rtol=1e-3)

    def test_inversion_rate(self):
        alpha = 0.3
        errs = []
        for n in (512, 1024, 2048):
            f = sf(lambda t: np.sin(t) + t**2, n)
            errs.append(np.max(np.abs(frac_derivative(frac_integral(f, alpha), alpha).values - f.values)))
        order = math.log2(errs[0] / errs[-1]) / 2
        assert order >= 1 - alpha


class TestNegative:
    def test_power(self):
        f = sf(lambda t: t, 4096)
        out = frac_op_negative(f, -0.25, "integral").values
        t = f.grid.nodes
        assert out[-1] == pytest.approx(1 / gamma(1.75), rel=1e-5)
        assert 1 / gamma(1.75) == pytest.approx(1.088065, abs=1e-6)
        assert np.allclose(out[8:], t[8:] ** 0.75 / gamma(1.75), rtol=1e-3)

    def test_increment_exact_for_linear(self):
        f = sf(lambda t: t, 256)
        out = frac_op_negative(f, -0.25, "increment").values
        assert np.allclose(out, f.grid.nodes**0.75 / gamma(1.75), rtol=1e-12)

    def test_forms_agree_on_rough_path(self):
        g = TimeGrid(1 / 4096, 4096)
        x = sample_fbm_exact(HurstParams(0.7), g, np.random.default_rng(2)).values[0, :, 0]
        f = SampledFunction(g, x)
        a = frac_op_negative(f, -0.25, "integral").values
        b = frac_op_negative(f, -0.25, "increment").values
        c = frac_op_negative(f, -0.25, "derivative").values
        scale = np.max(np.abs(b))
        assert np.max(np.abs(a[16:-1] - b[16:-1])) < 0.02 * scale
        assert np.max(np.abs(c - frac_integral(f, 0.25).values)) < 1e-3 * scale

    def test_increment_requires_zero_start(self):
        with pytest.raises(ValueError):
            frac_op_negative(sf(lambda t: 1 + t, 16), -0.2, "increment")

    def test_zero(self):
        f = sf(np.zeros_like, 16)
        for kind in ("integral", "increment", "derivative"):
            assert np.all(frac_op_negative(f, -0.3, kind).values == 0)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            frac_op_negative(sf(np.sin, 16), 0.3)
        with pytest.raises(ValueError):
            frac_op_negative(sf(np.sin, 16), -0.3, "weyl")

    def test_rough_warning(self):
        g = TimeGrid(1 / 2048, 2048)
        x = sample_fbm_exact(HurstParams(0.1), g, np.random.default_rng(0)).values[0, :, 0]
        with pytest.warns(UserWarning):
            frac_op_negative(SampledFunction(g, x), -0.4, "increment")


class TestSemigroup:
    def test_monomial_n14(self):
        rep = semigroup_check(sf(lambda t: t**2, 2**14), 0.3, 0.4)
        assert rep.semigroup <= 1e-6
        assert rep.inversion <= 1e-6

    def test_zero(self):
        rep = semigroup_check(sf(np.zeros_like, 64), 0.3, 0.4)
        assert rep.max_deviation == 0

    def test_bad(self):
        with pytest.raises(ValueError):
            semigroup_check(sf(np.sin, 16), 0.6, 0.6)


class TestHolder:
    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_fbm_exponent(self, H):
        g = TimeGrid(1 / 4096, 4096)
        x = sample_fbm_exact(HurstParams(H), g, np.random.default_rng(1)).values[0, :, 0]
        assert abs(empirical_holder_exponent(x, g.dt) - H) < 0.15

    def test_zero_origin_flag(self):
        g = TimeGrid(0.1, 4)
        with pytest.raises(ValueError):
            SampledFunction(g, np.ones(5), zero_at_origin=True)
        with pytest.raises(ValueError):
            SampledFunction(g, np.ones(4))
