import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmsde.besov_drift import ConstantDrift, DissipativeField, make_lacunary_drift
from fbmsde.fbm_core import FbmPath, HurstParams, TimeGrid, sample_fbm_exact, sample_fbm_mvn
from fbmsde.sde_solver import (
    NumericalFailure,
    RegimeError,
    SdeConfig,
    holder_seminorm,
    ou_reference,
    perturbation_exponent,
    psi_perturbation_response,
    remainder_report,
    solve,
    stability_rate,
)


def _noise(H=0.4, n=256, dt=None, P=8, seed=0, past=None):
    g = TimeGrid(dt or 1.0 / n, n)
    return sample_fbm_mvn(HurstParams(H), g, past, np.random.default_rng(seed), P)


class TestBasic:
    @pytest.mark.parametrize("scheme", ["euler", "averaged"])
    def test_pure_noise(self, scheme):
        noise = _noise()
        cfg = SdeConfig(HurstParams(0.4), None, None, 0.7, noise.grid, scheme=scheme)
        sol = solve(cfg, noise)
        assert np.array_equal(sol.X, 0.7 + noise.values)
        assert sol.decomposition_error() == 0.0

    def test_linear_decay_explicit(self):
        g = TimeGrid(0.01, 200)
        noise = FbmPath(g, np.zeros((1, 201, 1)), HurstParams(0.3))
        sol = solve(SdeConfig(HurstParams(0.3), None, DissipativeField(2.0), 1.0, g), noise)
        assert np.allclose(sol.X[0, :, 0], (1 - 0.02) ** np.arange(201), rtol=1e-13)

    def test_linear_decay_implicit(self):
        g = TimeGrid(0.1, 50)
        noise = FbmPath(g, np.zeros((1, 51, 1)), HurstParams(0.3))
        sol = solve(SdeConfig(HurstParams(0.3), None, DissipativeField(20.0), 1.0, g), noise)
        assert np.allclose(sol.X[0, :, 0], 3.0 ** -np.arange(51), rtol=1e-12)

    def test_ou_stationary_variance_brownian(self):
        # H = 1/2: variance 1/(2 lam) in the stationary regime
        lam = 1.0
        g = TimeGrid(2**-6, 2**6 * 40)
        noise = sample_fbm_mvn(HurstParams(0.5), g, 0.0, np.random.default_rng(3), 400)
        sol = solve(SdeConfig(HurstParams(0.5), None, DissipativeField(lam), 0.0, g), noise)
        tail = sol.X[:, g.n_nodes // 4 :, 0]
        target = 1 / (2 * lam) / (1 - lam * g.dt / 2)  # Euler stationary variance
        assert tail.var() == pytest.approx(target, rel=0.05)

    def test_constant_drift_schemes_agree(self):
        noise = _noise()
        base = SdeConfig(HurstParams(0.4), ConstantDrift([0.3]), DissipativeField(1.0), 0.2, noise.grid)
        a = solve(base, noise)
        b = solve(base.replace(scheme="averaged"), noise)
        assert np.array_equal(a.X, b.X)

    def test_decomposition(self):
        noise = _noise()
        cfg = SdeConfig(HurstParams(0.4), make_lacunary_drift(-0.2, 5, seed=1), DissipativeField(1.0, 0.2), 0.1,
                        noise.grid, psi=lambda t: np.sin(t), scheme="averaged")
        sol = solve(cfg, noise)
        assert sol.decomposition_error() < 1e-13
        assert sol.to_csv().splitlines()[0] == "t,x_0,theta_0,w_0"

    def test_single_mode_refinement(self):
        # smooth drift, same Brownian-driven noise on nested grids: strong error shrinks with dt
        H, T = 0.5, 1.0
        drift = make_lacunary_drift(0.5, 0, A=1.0, seed=2)
        fine = TimeGrid(T / 2048, 2048)
        ref_noise = sample_fbm_exact(HurstParams(H), fine, np.random.default_rng(5), 16)
        ref = solve(SdeConfig(HurstParams(H), drift, None, 0.0, fine), ref_noise).X[:, -1]
        errs = []
        for n in (64, 128, 256):
            g = TimeGrid(T / n, n)
            sub = FbmPath(g, ref_noise.values[:, :: 2048 // n], HurstParams(H))
            errs.append(np.mean(np.abs(solve(SdeConfig(HurstParams(H), drift, None, 0.0, g), sub).X[:, -1] - ref)))
        order = -np.polyfit(np.log([64, 128, 256]), np.log(errs), 1)[0]
        assert order >= 0.8

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure(self):
        g = TimeGrid(1.0, 2000)
        noise = FbmPath(g, np.zeros((1, 2001, 1)), HurstParams(0.3))
        cfg = SdeConfig(HurstParams(0.3), None, DissipativeField(1.0, fn=lambda x: 3 * x), 1.0, g)
        with pytest.raises(NumericalFailure) as exc:
            solve(cfg, noise)
        assert exc.value.step > 0

    def test_regime_error(self):
        g = TimeGrid(0.01, 10)
        with pytest.raises(RegimeError):
            SdeConfig(HurstParams(0.25), make_lacunary_drift(-3.0, 3), None, 0.0, g)

    def test_averaged_needs_driver(self):
        g = TimeGrid(0.01, 16)
        noise = sample_fbm_exact(HurstParams(0.4), g, np.random.default_rng(0), 2)
        cfg = SdeConfig(HurstParams(0.4), make_lacunary_drift(-0.2, 2), None, 0.0, g, scheme="averaged")
        with pytest.raises(ValueError):
            solve(cfg, noise)


class TestReference:
    def test_ou_reference_linear_psi(self):
        g = TimeGrid(0.01, 300)
        noise = FbmPath(g, np.zeros((1, 301, 1)), HurstParams(0.3))
        lam = 1.5
        y = ou_reference(lam, noise, psi=lambda t: t)[0, :, 0]
        t = g.nodes
        assert np.allclose(y, (1 - np.exp(-lam * t)) / lam, atol=1e-10)

    def test_holder_linear(self):
        t = np.linspace(0, 1, 129)
        assert holder_seminorm(t, 0.5, 1 / 128) == pytest.approx(1.0)

    @given(st.floats(0.05, 0.45), st.floats(0.01, 0.4))
    @settings(max_examples=25, deadline=None)
    def test_holder_monotone_in_exponent(self, b_lo, gap):
        x = _noise(P=1, n=128, seed=4).values[0]
        lo = holder_seminorm(x, b_lo, 1 / 128)
        hi = holder_seminorm(x, b_lo + gap, 1 / 128)
        assert lo <= hi + 1e-12

    def test_holder_window(self):
        with pytest.raises(ValueError):
            holder_seminorm(np.zeros(10), 0.5, 0.1, window=2.0)


class TestRemainder:
    def test_constant(self):
        noise = _noise()
        sol = solve(SdeConfig(HurstParams(0.4), None, None, 0.0, noise.grid), noise)
        assert remainder_report(sol).status == "constant remainder"

    def test_smooth_drift_exponent_one(self):
        noise = _noise(n=1024, P=16)
        sol = solve(SdeConfig(HurstParams(0.4), ConstantDrift([1.0]), None, 0.0, noise.grid), noise)
        assert remainder_report(sol).exponent == pytest.approx(1.0, abs=1e-9)

    def test_singular_drift_exponent(self):
        H, alpha = 0.4, -0.3
        noise = _noise(H=H, n=1024, P=32, seed=2)
        drift = make_lacunary_drift(alpha, math.ceil(40 * H), seed=1)
        sol = solve(SdeConfig(HurstParams(H), drift, None, 0.0, noise.grid), noise)
        assert remainder_report(sol).exponent == pytest.approx(1 + alpha * H, abs=0.1)


class TestStability:
    def test_identical_inputs(self):
        noise = _noise()
        cfg = SdeConfig(HurstParams(0.4), make_lacunary_drift(-0.2, 4), DissipativeField(1.0), 0.0, noise.grid)
        rep = stability_rate(cfg, noise, [(0.1, 0.1), (0.2, 0.2)])
        assert np.all(rep.distances == 0) and rep.slope is None

    def test_linear_scaling_pure_noise(self):
        noise = _noise()
        cfg = SdeConfig(HurstParams(0.4), None, DissipativeField(1.0), 0.0, noise.grid)
        rep = stability_rate(cfg, noise, [(0.0, 0.2), (0.0, 0.1), (0.0, 0.05)])
        assert rep.distances[0] == pytest.approx(2 * rep.distances[1], rel=1e-12)
        assert rep.slope == pytest.approx(1.0, abs=1e-10)

    def test_drift_pairs(self):
        noise = _noise(P=4)
        cfg = SdeConfig(HurstParams(0.4), make_lacunary_drift(-0.2, 4, A=0.1), None, 0.0, noise.grid)
        rep = stability_rate(cfg, noise, [(1, 2), (2, 3)], kind="drift")
        assert rep.alpha_prime == pytest.approx(-1.25)
        assert np.all(rep.distances > 0)
        with pytest.raises(ValueError):
            stability_rate(cfg, noise, [(1, 9)], kind="drift")

    def test_weak_regime_notice(self):
        noise = _noise(H=0.25, P=2, n=32)
        cfg = SdeConfig(HurstParams(0.25), make_lacunary_drift(-1.2, 2, A=0.1), None, 0.0, noise.grid)
        with pytest.warns(UserWarning):
            rep = stability_rate(cfg, noise, [(0.0, 0.1), (0.0, 0.05)])
        assert "weak" in rep.notice


class TestPerturbation:
    def test_linear_without_drift(self):
        noise = _noise()
        cfg = SdeConfig(HurstParams(0.4), None, DissipativeField(1.0), 0.0, noise.grid)
        rep = psi_perturbation_response(cfg, noise, lambda t: np.sin(3 * t), [0.1, 0.05, 0.025])
        assert rep.power == pytest.approx(1.0, abs=1e-10)

    def test_exponent_formula(self):
        # beta = 1 + H(alpha - 1); chi0 solves (2 beta + H)(1 - chi) + beta chi = 1
        for alpha, H in [(-0.5, 0.25), (-0.2, 0.4), (-1.0, 0.1)]:
            chi = perturbation_exponent(alpha, H)
            beta = 1 + H * (alpha - 1)
            if 0 < chi < 1:
                assert (2 * beta + H) * (1 - chi) + beta * chi == pytest.approx(1.0)
        assert perturbation_exponent(-0.5, 0.25) == pytest.approx((2 * 0.625 + 0.25 - 1) / 0.875)
