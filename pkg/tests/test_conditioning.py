import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fbmsde.conditioning import (
    A_prefactor,
    NoiseNormParams,
    PastPath,
    apply_A,
    companion_constant,
    conditioned_fbm,
    flip_R,
    kernel_f,
    kernel_f_table,
    sample_past_exact,
    shift_concat,
    theta_shift,
    wminus_norm,
)
from fbmsde.fbm_core import FbmPath, HurstParams, TimeGrid, fbm_covariance_matrix


def kernel_mp(x, H):
    mp.mp.dps = 30
    x, H = mp.mpf(x), mp.mpf(H)
    pts = [0, 1] if x >= 1 else [0, x, 1]
    integral = mp.quad(lambda u: (u + x) ** (H - 2.5) * (1 - u) ** (0.5 - H), pts)
    return float(x ** (H - 0.5) + (H - 1.5) * x * integral)


def smooth_past_oracle(H, tvals, past_times):
    """W driven by the deterministic density sin^2(pi(q+2)) on [-2,-1]: past values and exact future."""
    c, a = HurstParams(H).c_H, H - 0.5
    phi = lambda q: np.sin(np.pi * (q + 2)) ** 2
    back = integrate.quad(lambda q: (-q) ** a * phi(q), -2, -1, limit=200)[0]

    def W(s):
        hi = min(s, -1.0)
        fwd = integrate.quad(lambda q: (s - q) ** a * phi(q), -2, hi, limit=200)[0] if hi > -2 else 0.0
        return c * (fwd - back)

    def M(t):
        return c * integrate.quad(lambda q: ((t - q) ** a - (-q) ** a) * phi(q), -2, -1, limit=200)[0]

    return np.array([W(s) for s in past_times]), np.array([M(t) for t in tvals])


class TestNorm:
    def test_example(self):
        t = np.linspace(-1, 0, 11)
        w = PastPath(t, t[None, :, None])
        assert wminus_norm(w, NoiseNormParams(0.2, 0.3))[0] == pytest.approx(2**-0.3, rel=1e-12)
        assert 2**-0.3 == pytest.approx(0.81225, abs=1e-5)

    def test_zero(self):
        t = np.linspace(-2, 0, 9)
        assert wminus_norm(PastPath(t, np.zeros((1, 9, 1))), NoiseNormParams(0.1, 0.5))[0] == 0

    @given(st.floats(-5, 5).filter(lambda c: c == 0 or abs(c) > 1e-100))
    @settings(max_examples=20, deadline=None)
    def test_homogeneous(self, c):
        t = np.linspace(-3, 0, 13)
        v = np.sin(3 * t)[None, :, None] - np.sin(0.0)
        p = NoiseNormParams(0.1, 0.5)
        base = wminus_norm(PastPath(t, v), p)[0]
        assert wminus_norm(PastPath(t, c * v), p)[0] == pytest.approx(abs(c) * base, rel=1e-12, abs=1e-300)

    def test_param_ranges(self):
        NoiseNormParams.default(0.3).validate(0.3)
        with pytest.raises(ValueError):
            NoiseNormParams(0.3, 0.5).validate(0.25)
        with pytest.raises(ValueError):
            NoiseNormParams(0.1, 0.95).validate(0.25)

    def test_past_validation(self):
        with pytest.raises(ValueError):
            PastPath(np.array([-1.0, 0.0]), np.ones((1, 2, 1)))
        with pytest.raises(ValueError):
            PastPath(np.array([0.0, -1.0]), np.zeros((1, 2, 1)))


class TestKernel:
    @pytest.mark.parametrize("H", [0.1, 0.25, 0.4])
    @pytest.mark.parametrize("x", [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e4])
    def test_against_mpmath(self, H, x):
        assert kernel_f(x, H) == pytest.approx(kernel_mp(x, H), rel=1e-8)

    def test_unit_point(self):
        # f(1) = 1/2 for every H
        for H in (0.1, 0.25, 0.4):
            assert kernel_f(1.0, H) == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("H", [0.1, 0.25, 0.4])
    def test_large_x_slope(self, H):
        x = np.logspace(1, 4, 31)
        slope = np.polyfit(np.log(x), np.log(kernel_f(x, H)), 1)[0]
        assert abs(slope - (H - 0.5)) < 0.02

    @pytest.mark.parametrize("H", [0.1, 0.25, 0.4])
    def test_small_x_power(self, H):
        # leading behaviour x^{H+1/2} with unit constant
        x = np.logspace(-8, -6, 5)
        assert np.allclose(kernel_f(x, H) / x ** (H + 0.5), 1.0, rtol=1e-3)

    @pytest.mark.parametrize("H", [0.1, 0.25, 0.4])
    def test_bounds_large_x(self, H):
        x = np.logspace(0, 6, 25)
        f = kernel_f(x, H)
        assert np.all(f <= x ** (H - 0.5) * (1 + 1e-12))
        assert np.all(f >= x ** (H - 0.5) + (H - 1.5) * x ** (H - 1.5) - 1e-12)

    def test_table(self):
        H = 0.25
        tab = kernel_f_table(H)
        x = np.logspace(-11, 11, 45)
        assert np.max(np.abs(tab(x) / kernel_f(x, H) - 1)) < 1e-7

    def test_domain(self):
        with pytest.raises(ValueError):
            kernel_f(0.0, 0.25)
        with pytest.raises(ValueError):
            kernel_f(1.0, 0.6)


class TestPrefactor:
    @pytest.mark.parametrize("H", [0.05, 0.2, 0.35, 0.45])
    def test_closed_form(self, H):
        assert A_prefactor(H) == pytest.approx(math.cos(math.pi * H) / math.pi, rel=1e-12)
        assert companion_constant(H) > 0

    def test_degenerate(self):
        vals = [abs(A_prefactor(0.5 - e)) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
        assert vals == sorted(vals, reverse=True) and vals[-1] < 1e-3
        assert A_prefactor(0.5) == 0.0

    @pytest.mark.parametrize("H", [0.1, 0.25, 0.4])
    def test_point_mass_past(self, H):
        # past noise dB = delta at q = -1: W_s known, future mean c((t+1)^a - 1)
        a, c, q0 = H - 0.5, HurstParams(H).c_H, 1.0
        fk = kernel_f_table(H)
        w = lambda r: c * ((q0 - r) ** a if r < q0 else 0.0) - c * q0**a
        for t in (0.25, 1.0, 4.0):
            f = lambda r: fk(np.array([t / r]))[0] / r * w(r)
            I = sum(integrate.quad(f, lo, hi, limit=500, epsabs=1e-14, epsrel=1e-12)[0]
                    for lo, hi in [(0, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, np.inf)])
            assert A_prefactor(H) * I == pytest.approx(c * ((t + q0) ** a - q0**a), rel=1e-7)


class TestApplyA:
    def _past(self, n=400, P=3, H=0.25, seed=0):
        t = -np.concatenate([np.geomspace(100, 1e-3, n), [0.0]])
        return sample_past_exact(H, t, np.random.default_rng(seed), P)

    def test_linearity(self):
        w = self._past()
        g = TimeGrid(0.125, 8)
        a1 = apply_A(w, 0.25, g)
        v2 = PastPath(w.times, -2.0 * w.values + 0.5 * w.values[::-1])
        a2 = apply_A(v2, 0.25, g)
        assert np.allclose(a2, -2.0 * a1 + 0.5 * a1[::-1], atol=1e-14)
        assert np.all(apply_A(PastPath(w.times, 0 * w.values), 0.25, g) == 0)
        assert np.all(a1[:, 0] == 0)

    def test_brownian_zero(self):
        w = self._past(H=0.5)
        assert np.all(apply_A(w, 0.5, TimeGrid(0.1, 5)) == 0)

    @pytest.mark.parametrize("H", [0.25, 0.4])
    def test_smooth_past_oracle(self, H):
        pt = np.concatenate([-np.geomspace(1e5, 2.5, 1500)[:-1], np.linspace(-2.5, -1e-3, 2000), [0.0]])
        tv = [0.25, 0.5, 1.0, 2.0]
        wv, mt = smooth_past_oracle(H, tv, pt)
        out = apply_A(PastPath(pt, wv[None, :, None]), H, TimeGrid(0.25, 8))
        assert np.allclose(out[0, [1, 2, 4, 8], 0], mt, rtol=5e-3)

    def test_variance_identity(self):
        # Var (A w)_t = t^{2H} - c_tilde t^{2H}: through the exact past covariance, no sampling
        H = 0.25
        p = HurstParams(H)
        tp = np.append(-np.concatenate([np.geomspace(1e4, 1e-4, 600), [5e-5]]), 0.0)
        m = len(tp) - 1
        basis = np.zeros((m, m + 1, 1))
        basis[np.arange(m), np.arange(m), 0] = 1.0
        g = TimeGrid(0.25, 4)
        coef = apply_A(PastPath(tp, basis), H, g)[:, :, 0]
        V = coef.T @ fbm_covariance_matrix(tp[:-1], p) @ coef
        target = (1 - p.c_tilde_H) * g.nodes[1:] ** (2 * H)
        assert np.allclose(np.diag(V)[1:], target, rtol=5e-3)

    def test_diagnostics_and_errors(self):
        w = self._past()
        out, diag = apply_A(w, 0.25, TimeGrid(0.125, 8), return_diagnostics=True)
        assert diag["r_max"] == pytest.approx(100.0)
        assert diag["r_min"] == pytest.approx(0.125e-3)
        assert np.isfinite(diag["tail_bound"]) and diag["tail_bound"] > 0
        with pytest.raises(ValueError):
            apply_A(PastPath(np.array([0.0]), np.zeros((1, 1, 1))), 0.25, TimeGrid(0.1, 2))
        with pytest.raises(ValueError):
            apply_A(w, 0.25, TimeGrid(0.1, 2, 1.0))

    def test_bounded_operator(self):
        # output norm / input norm stays bounded over a randomised family
        H = 0.25
        npar = NoiseNormParams.default(H)
        rng = np.random.default_rng(4)
        g = TimeGrid(1 / 16, 32)
        ratios = []
        for scale in (0.1, 1.0, 10.0):
            t = -np.concatenate([np.geomspace(200, 1e-3, 300), [0.0]])
            w = sample_past_exact(H, t, rng, 4)
            w = PastPath(w.times, scale * w.values + 0.3 * scale * np.sin(w.times)[None, :, None])
            out = apply_A(w, H, g)
            fwd = PastPath(-g.nodes[::-1], out[:, ::-1, :])
            ratios.append(wminus_norm(fwd, npar) / wminus_norm(w, npar))
        ratios = np.concatenate(ratios)
        assert np.all(np.isfinite(ratios)) and ratios.max() < 10 and ratios.max() / ratios.min() < 50


class TestConditionedFbm:
    def test_zero_past_is_rl(self):
        H = 0.25
        p = HurstParams(H)
        t = np.array([-1.0, -0.5, 0.0])
        w = PastPath(t, np.zeros((4000, 3, 1)))
        g = TimeGrid(1 / 64, 64)
        x = conditioned_fbm(w, H, g, np.random.default_rng(2)).values[:, -1, 0]
        v = (x**2).mean()
        se = math.sqrt(((x**2 - v) ** 2).mean() / len(x))
        assert abs(v - p.c_tilde_H) < 5 * se

    def test_offset_bitwise(self):
        w = sample_past_exact(0.3, -np.concatenate([np.geomspace(50, 1e-2, 100), [0.0]]), np.random.default_rng(0), 2)
        g = TimeGrid(0.1, 10)
        a = conditioned_fbm(w, 0.3, g, np.random.default_rng(1))
        b = conditioned_fbm(w, 0.3, g, np.random.default_rng(2))
        assert isinstance(a, FbmPath) and a.past is w
        assert np.array_equal(a.offset, b.offset)
        assert not np.allclose(a.values, b.values)

    def test_brownian(self):
        t = np.linspace(-1, 0, 5)
        w = sample_past_exact(0.5, t, np.random.default_rng(0), 2)
        a = conditioned_fbm(w, 0.5, TimeGrid(0.1, 10), np.random.default_rng(1))
        assert np.all(a.offset == 0)

    @pytest.mark.slow
    def test_disintegration_mc(self):
        H = 0.25
        tp = np.append(-np.concatenate([np.geomspace(1e4, 0.01, 400), [0.005]]), 0.0)
        g = TimeGrid(1 / 16, 16)
        rng = np.random.default_rng(10)
        w = sample_past_exact(H, tp, rng, 6000)
        fb = conditioned_fbm(w, H, g, rng)
        X = np.concatenate([w.values[:, [-120, -2], 0], fb.values[:, 4::4, 0]], axis=1)
        T = np.concatenate([tp[[-120, -2]], g.nodes[4::4]])
        C = X.T @ X / len(X)
        se = np.sqrt((X[:, :, None] ** 2 * X[:, None, :] ** 2).mean(0) / len(X))
        assert np.max(np.abs(C - fbm_covariance_matrix(T, HurstParams(H))) / se) < 5


class TestMaps:
    def test_flip_example(self):
        t = np.linspace(-2, 0, 21)
        w = PastPath(t, t[None, :, None])
        times, vals = flip_R(w, 1.0)
        assert np.allclose(vals[0, :, 0], -times)
        assert vals[0, 0, 0] == 0
        with pytest.raises(ValueError):
            flip_R(w, 3.0)

    @pytest.mark.slow
    def test_flip_law(self):
        H = 0.3
        t = np.linspace(-1, 0, 17)
        w = sample_past_exact(H, t, np.random.default_rng(3), 8000)
        times, vals = flip_R(w, 1.0)
        X = vals[:, 1:, 0]
        C = X.T @ X / len(X)
        se = np.sqrt((X[:, :, None] ** 2 * X[:, None, :] ** 2).mean(0) / len(X))
        assert np.max(np.abs(C - fbm_covariance_matrix(times[1:], HurstParams(H))) / se) < 5

    def _future(self, fn, g):
        class F:
            grid = g
            values = fn(g.nodes)[None, :, None]
        return F()

    def test_concat_cases(self):
        s = np.linspace(-2, 0, 9)
        wm = PastPath(s, np.zeros((1, 9, 1)))
        wp = self._future(lambda r: r, TimeGrid(0.25, 8))
        out = shift_concat(wm, wp, 1.0)
        k = int(np.argmin(np.abs(s + 0.5)))
        assert out.values[0, k, 0] == pytest.approx(-0.5)
        assert out.values[0, -1, 0] == 0
        same = shift_concat(wm, wp, 0.0)
        assert np.array_equal(same.values, wm.values)

    def test_concat_zero_time_identity(self):
        s = np.linspace(-2, 0, 9)
        wm = PastPath(s, (np.sin(s) - 0.0)[None, :, None])
        wp = self._future(lambda r: np.cos(r) - 1.0, TimeGrid(0.25, 8))
        assert np.allclose(shift_concat(wm, wp, 0.0).values, wm.values)

    def test_theta_semiflow(self):
        s = np.linspace(-4, 0, 41)
        v = (np.sin(2 * s) + s**2)[None, :, None]
        v = v - v[:, -1:, :]
        w = PastPath(s, v)
        a = theta_shift(theta_shift(w, 0.5), 0.7)
        b = theta_shift(w, 1.2)
        n = min(len(a.times), len(b.times))
        assert np.allclose(a.values[:, -n:], b.values[:, -n:], atol=1e-12)
