import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmsde.besov_drift import ConstantDrift, DissipativeField, make_lacunary_drift
from fbmsde.ergodics import (
    EmpiricalMeasure,
    coupling_contraction,
    fou_stationary_variance,
    girsanov_drift,
    girsanov_kappa,
    jacobian_evolve,
    long_run,
    measure_distance,
    noise_derivative,
    tightness_report,
)
from fbmsde.ergodics import _series_reciprocal
from fbmsde.fbm_core import HurstParams, MvnScheme, TimeGrid, sample_fbm_mvn
from fbmsde.sde_solver import NumericalFailure, SdeConfig, solve

H = 0.4


def _setup(n=256, dt=2**-8, P=4, seed=1, scheme="euler", u=None, A=0.5):
    p = HurstParams(H)
    g = TimeGrid(dt, n)
    noise = sample_fbm_mvn(p, g, None, np.random.default_rng(seed), P)
    cfg = SdeConfig(p, make_lacunary_drift(-0.2, 6, A=A, seed=2), u or DissipativeField(1.0, 0.3), 0.3, g,
                    scheme=scheme)
    return cfg, noise


class TestMeasure:
    def test_mass_conserved(self):
        x = np.random.default_rng(0).normal(0, 3, 1000)
        m = EmpiricalMeasure.from_samples(x, box=(-2, 2), bins=10)
        assert m.counts.sum() == 1000
        assert len(m.histogram_rows()) == 10

    def test_distances(self):
        rng = np.random.default_rng(1)
        a = EmpiricalMeasure.from_samples(rng.normal(size=4000))
        b = EmpiricalMeasure.from_samples(rng.normal(size=4000))
        c = EmpiricalMeasure.from_samples(rng.normal(1.0, 1.0, size=4000))
        assert measure_distance(a, a) == 0.0
        assert measure_distance(a, b) < measure_distance(a, c)
        assert measure_distance(a, c, "1-wasserstein-per-coordinate") == pytest.approx(1.0, abs=0.1)
        with pytest.raises(ValueError):
            measure_distance(a, EmpiricalMeasure.from_samples(rng.normal(size=10), bins=7))

    @given(st.floats(-3, 3))
    @settings(max_examples=20, deadline=None)
    def test_w1_shift(self, s):
        x = np.random.default_rng(2).normal(size=500)
        a, b = EmpiricalMeasure.from_samples(x), EmpiricalMeasure.from_samples(x + s)
        assert measure_distance(a, b, "1-wasserstein-per-coordinate") == pytest.approx(abs(s), abs=1e-9)


class TestLongRun:
    def test_fou_variance(self):
        lam = 1.0
        cfg = SdeConfig(HurstParams(H), None, DissipativeField(lam), 0.0, TimeGrid(2**-5, 1))
        m = long_run(cfg, 60.0, 10.0, thinning=8, n_paths=64, rng=np.random.default_rng(4))
        assert m.variance[0] == pytest.approx(fou_stationary_variance(H, lam), rel=0.1)
        assert m.stationarity_l1 < 0.15
        assert m.counts.sum() == len(m.samples)

    def test_brownian_variance_formula(self):
        assert fou_stationary_variance(0.5, 2.0) == pytest.approx(0.25)


class TestTightness:
    def test_table_shape_and_kappa0(self):
        cfg, noise = _setup(n=2048, dt=2**-6, P=64)
        sol = solve(cfg, noise)
        rep = tightness_report(sol.X, 2**-6, 0.3, [0.01, 0.05, 0.1, 5.0], H=H)
        assert rep.table.shape == (len(rep.window_starts), 4)
        assert rep.kappa0 in (0.0, 0.01, 0.05, 0.1)
        assert np.all(np.diff(rep.table, axis=1) >= 0)

    def test_zero_path(self):
        rep = tightness_report(np.zeros((4, 300)), 0.01, 0.2, [0.1, 1.0])
        assert np.all(rep.table == 1.0)

    def test_gamma_below_H(self):
        with pytest.raises(ValueError):
            tightness_report(np.zeros((2, 100)), 0.1, 0.5, [0.1], H=0.4)


class TestCoupling:
    def test_pure_decay(self):
        cfg, noise = _setup(n=512, dt=2**-6)
        cfg = cfg.replace(drift=None, u=DissipativeField(1.0))
        rep = coupling_contraction(cfg, [0.0, 1.0], noise)
        t = cfg.grid.nodes
        assert np.allclose(rep.distance[0], (1 - 2**-6) ** np.arange(len(t)), rtol=1e-12)
        assert abs(rep.decay_rate[0] - 1.0) <= 2 * 2**-6

    def test_identical_start(self):
        cfg, noise = _setup(n=64, dt=2**-6)
        assert np.all(coupling_contraction(cfg, [0.5, 0.5 + 0.0], noise).distance[..., 1:] == 0)

    def test_singular_contracts(self):
        cfg, noise = _setup(n=640, dt=2**-6)
        rep = coupling_contraction(cfg.replace(u=DissipativeField(1.0)), [-1.0, 2.0], noise)
        assert rep.median_ratio < 1e-2
        assert rep.window_sup.shape[-1] == 10


class TestJacobian:
    @pytest.mark.parametrize("scheme", ["euler", "averaged"])
    @pytest.mark.parametrize("lam", [1.0, 300.0])
    def test_fd_and_inverse(self, scheme, lam):
        cfg, noise = _setup(scheme=scheme, u=DissipativeField(lam, 0.3))
        sol = solve(cfg, noise)
        jac = jacobian_evolve(sol, cfg)
        assert jac.max_identity_error < 1e-10
        eps = 1e-4
        fd = (solve(cfg.replace(x0=0.3 + eps), noise).X - solve(cfg.replace(x0=0.3 - eps), noise).X) / (2 * eps)
        assert np.max(np.abs(fd[..., 0] - jac.J[..., 0, 0])) < 5 * eps

    def test_multidim_identity(self):
        p = HurstParams(H, d=2)
        g = TimeGrid(2**-7, 128)
        noise = sample_fbm_mvn(p, g, None, np.random.default_rng(0), 3)
        cfg = SdeConfig(p, make_lacunary_drift(-0.2, 5, seed=1, d=2), DissipativeField(1.0), [0.1, -0.2], g)
        jac = jacobian_evolve(solve(cfg, noise), cfg)
        assert jac.J.shape == (3, 129, 2, 2)
        assert jac.max_identity_error < 1e-10

    def test_singular_step_raises(self):
        # explicit step with gradient -1/dt has a singular derivative
        u = DissipativeField(1.0, fn=lambda x: -x, jac=lambda x: -np.ones(x.shape + (1,)))
        cfg, noise = _setup(n=8, dt=1.0, u=u)
        cfg = cfg.replace(drift=None)
        with pytest.raises(NumericalFailure):
            jacobian_evolve(solve(cfg, noise), cfg)


class TestNoiseDerivative:
    def test_routes_agree_and_match_fd(self):
        cfg, noise = _setup()
        sol = solve(cfg, noise)
        v = np.sin(3 * cfg.grid.nodes)[:, None]
        nd = noise_derivative(sol, cfg, v)
        assert nd.discrepancy < 1e-10
        eps = 1e-6
        up = solve(cfg.replace(psi=eps * v), noise).X
        dn = solve(cfg.replace(psi=-eps * v), noise).X
        assert np.max(np.abs((up - dn) / (2 * eps) - nd.ode)) < 1e-6

    def test_linear_variation_of_constants(self):
        cfg, noise = _setup(n=256, dt=2**-8)
        cfg = cfg.replace(drift=None, u=DissipativeField(2.0))
        v = np.sin(5 * cfg.grid.nodes)[:, None]
        nd = noise_derivative(solve(cfg, noise), cfg, v)
        # discrete variation of constants: K_{k+1} = (1 - lam dt) K_k + dv_k
        ref = np.zeros(cfg.grid.n_nodes)
        for k, dv in enumerate(np.diff(v[:, 0])):
            ref[k + 1] = (1 - 2.0 * 2**-8) * ref[k] + dv
        assert np.allclose(nd.ode[0, :, 0], ref, atol=1e-14)
        assert nd.discrepancy < 1e-12

    def test_needs_zero_start(self):
        cfg, noise = _setup()
        with pytest.raises(ValueError):
            noise_derivative(solve(cfg, noise), cfg, np.ones(cfg.grid.n_nodes))


class TestGirsanov:
    def test_reciprocal_series(self):
        a = MvnScheme(HurstParams(H), TimeGrid(2**-7, 700), 0.0).avg_weights(np.arange(1, 701))
        r = _series_reciprocal(a)
        conv = np.convolve(a, r)[:700]
        assert conv[0] == pytest.approx(1.0) and np.max(np.abs(conv[1:])) < 1e-12

    def test_constant_drift_matches_closed_form(self):
        # constant b: h = kappa b t^{1/2-H} / Gamma(3/2-H)
        p = HurstParams(H)
        g = TimeGrid(2**-8, 256)
        noise = sample_fbm_mvn(p, g, None, np.random.default_rng(0), 2)
        cfg = SdeConfig(p, ConstantDrift([0.7]), None, 0.0, g)
        sol = solve(cfg, noise)
        t = g.nodes[64:-1]
        exact = girsanov_kappa(H) * 0.7 * t ** (0.5 - H) / math.gamma(1.5 - H)
        for method in ("discrete", "operator"):
            rep = girsanov_drift(sol, cfg, method=method)
            assert np.allclose(rep.h[0, 64:-1, 0], exact, rtol=0.02)
        assert not rep.unstable

    def test_exact_shift_cancels_constant_drift(self):
        p = HurstParams(H)
        g = TimeGrid(2**-6, 16)
        noise = sample_fbm_mvn(p, g, None, np.random.default_rng(3), 4096)
        cfg = SdeConfig(p, ConstantDrift([0.7]), None, 0.0, g)
        sol = solve(cfg, noise)
        for method in ("discrete", "operator"):
            m = girsanov_drift(sol, cfg, method=method).reweighted_moments(sol.X)
            assert np.all(np.abs(m["mean"][1:, 0]) < 5 * m["mean_se"][1:, 0])

    def test_zero_drift(self):
        p = HurstParams(H)
        g = TimeGrid(2**-6, 64)
        noise = sample_fbm_mvn(p, g, None, np.random.default_rng(0), 16)
        cfg = SdeConfig(p, None, None, 0.0, g)
        rep = girsanov_drift(solve(cfg, noise), cfg)
        assert np.all(rep.h == 0) and rep.statistic == 1.0
        assert np.all(rep.weights == 1.0)

    def test_shorter_horizon_smaller_norm(self):
        cfg, noise = _setup(n=128, dt=2**-7, P=64, u=DissipativeField(1.0))
        sol = solve(cfg, noise)
        full = girsanov_drift(sol, cfg)
        half = girsanov_drift(sol, cfg, T=0.5)
        assert np.all(half.cm_norm2 <= full.cm_norm2 + 1e-12)

    def test_instability_flag(self):
        cfg, noise = _setup(n=16 * 64, dt=2**-6, P=512, A=1.0, u=DissipativeField(1.0))
        sol = solve(cfg, noise)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            short = girsanov_drift(sol, cfg, T=0.25)
            long_ = girsanov_drift(sol, cfg)
        assert not short.unstable
        assert long_.unstable and long_.statistic > short.statistic

    def test_bad_inputs(self):
        cfg, noise = _setup()
        sol = solve(cfg, noise)
        with pytest.raises(ValueError):
            girsanov_drift(sol, cfg, method="nope")
        cfg_half = SdeConfig(HurstParams(0.5), None, None, 0.0, cfg.grid)
        with pytest.raises(ValueError):
            girsanov_drift(sol, cfg_half)
