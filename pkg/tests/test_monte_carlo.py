"""
Monte Carlo ccdf experiments: sampling, empirical ccdf bookkeeping and the
condition-number and forward-error runners.
"""

import math

import numpy as np
import pytest

from pencilbench.core.conditioning import limiting_ccdf
from pencilbench.core.linalg import UNIT_ROUNDOFF
from pencilbench.core.tensor_core import reconstruct
from pencilbench.errors import InputError, InvalidConfig, RankTooLarge
from pencilbench.experiments.monte_carlo import (
    CcdfSeries,
    McConfig,
    SamplingModel,
    Solver,
    fit_ccdf_tail,
    run_forward_error_ccdf,
    run_kappa_ccdf,
    sample_cpd,
    unit_norm_cpd,
)


class TestSampleCpd:

    def test_deterministic(self):
        first = sample_cpd((5, 4, 3), 3, SamplingModel.GAUSSIAN_ALL, np.random.default_rng(1))
        second = sample_cpd((5, 4, 3), 3, "gaussian", np.random.default_rng(1))
        np.testing.assert_array_equal(first.vectorized(), second.vectorized())

    def test_orthonormal_ab(self):
        cpd = sample_cpd((6, 5, 2), 4, SamplingModel.ORTHONORMAL_AB, np.random.default_rng(2))
        a, b, _ = cpd.factors
        np.testing.assert_allclose(a.T @ a, np.eye(4), atol=1e-13)
        np.testing.assert_allclose(b.T @ b, np.eye(4), atol=1e-13)

    def test_unit_norm_rescaling(self, rng):
        cpd = sample_cpd((6, 5, 4), 3, SamplingModel.GAUSSIAN_ALL, rng)
        scaled = unit_norm_cpd(cpd)
        assert reconstruct(scaled).norm() == pytest.approx(1.0, rel=1e-14)
        np.testing.assert_array_equal(scaled.factors[0], cpd.factors[0])

    def test_orthonormal_ab_rank_limit(self):
        with pytest.raises(RankTooLarge):
            sample_cpd((6, 3, 2), 4, SamplingModel.ORTHONORMAL_AB, np.random.default_rng(0))


class TestCcdfSeries:

    def test_bookkeeping(self):
        series = CcdfSeries.from_raw([3.0, math.nan, 1.0, 2.0, math.inf])
        assert series.trials == 5 and series.count == 4 and series.censored == 1
        np.testing.assert_array_equal(series.samples, [1.0, 2.0, 3.0, math.inf])

    def test_evaluate(self):
        series = CcdfSeries.from_raw([3.0, 1.0, 2.0, math.inf])
        assert series.evaluate(0.0) == 1.0
        assert series.evaluate(1.0) == 0.75
        assert series.evaluate(1e300) == 0.25
        assert series.tail_at_least(2.0) == 0.75

    def test_curve(self):
        xs, ys = CcdfSeries.from_raw([3.0, 1.0, 2.0, 2.0, math.inf]).curve()
        np.testing.assert_array_equal(xs, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(ys, [0.8, 0.4, 0.2])

    def test_tail_fit_of_pareto_samples(self, rng):
        # P[X > x] = 1/x for x >= 1
        series = CcdfSeries.from_raw(1.0 / rng.uniform(size=20000))
        fit = fit_ccdf_tail(series)
        assert fit.exponent == pytest.approx(-1.0, abs=0.1)

    def test_tail_fit_needs_points(self):
        with pytest.raises(InputError):
            fit_ccdf_tail(CcdfSeries.from_raw([1.0, 2.0, 3.0]))

    def test_all_censored(self):
        series = CcdfSeries.from_raw([math.nan, math.nan])
        assert series.count == 0
        assert math.isnan(series.evaluate(1.0))


class TestMcConfig:

    @pytest.mark.parametrize("kwargs", [
        {'dims': (4, 4), 'rank': 2},
        {'dims': (4, 4, 2), 'rank': 5},
        {'dims': (4, 4, 2), 'rank': 2, 'trials': 0},
        {'dims': (4, 4, 2), 'rank': 2, 'alpha_grid': (1.0, -2.0)},
        {'dims': (4, 4, 2), 'rank': 2, 'master_seed': -3},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfig):
            McConfig(**kwargs)

    def test_to_dict(self):
        d = McConfig(dims=(4, 4, 2), rank=2, sampling="orthoab").to_dict()
        assert d['sampling'] == "orthoab" and d['alpha_grid'] == [2.0, 4.0, 8.0]


class TestKappaCcdf:

    def test_small_run(self):
        series = run_kappa_ccdf(McConfig(dims=(4, 4, 2), rank=3, trials=40, master_seed=5))
        assert series.trials == 40 and series.censored == 0
        assert np.all(series.samples[:-1] <= series.samples[1:])
        assert np.all(series.samples >= 1.0 - 1e-12)
        assert series.scale == pytest.approx(9.0)
        assert [point.alpha for point in series.bounds] == [2.0, 4.0, 8.0]
        for point in series.bounds:
            assert point.x == pytest.approx(point.alpha * 9.0)
            assert point.bound == pytest.approx(limiting_ccdf(2, point.alpha))
        _, ys = series.curve()
        assert np.all(np.diff(ys) <= 0)

    def test_single_trial(self):
        series = run_kappa_ccdf(McConfig(dims=(3, 3, 3), rank=2, trials=1))
        assert series.count == 1
        assert series.evaluate(series.samples[0]) == 0.0

    def test_reproducible_across_threads(self):
        cfg = McConfig(dims=(4, 3, 3), rank=3, trials=12, master_seed=21)
        serial = run_kappa_ccdf(cfg)
        cfg.threads = 3
        pooled = run_kappa_ccdf(cfg)
        np.testing.assert_array_equal(serial.raw, pooled.raw)

    def test_master_seed_matters(self):
        first = run_kappa_ccdf(McConfig(dims=(4, 3, 3), rank=2, trials=5, master_seed=1))
        second = run_kappa_ccdf(McConfig(dims=(4, 3, 3), rank=2, trials=5, master_seed=2))
        assert not np.array_equal(first.raw, second.raw)

    @pytest.mark.slow
    @pytest.mark.parametrize("m3", [2, 3, 5])
    def test_tail_dominates_limiting_bound(self, m3):
        cfg = McConfig(dims=(15, 15, m3), rank=15, trials=10000, sampling="orthoab", master_seed=m3, threads=None)
        series = run_kappa_ccdf(cfg)
        for point in series.bounds:
            assert point.empirical >= 0.8 * point.bound

    @pytest.mark.slow
    def test_gaussian_heavy_tail(self):
        cfg = McConfig(dims=(15, 15, 2), rank=15, trials=10000, master_seed=3, threads=None)
        assert run_kappa_ccdf(cfg).evaluate(1e5) >= 0.05


class TestForwardErrorCcdf:

    @pytest.mark.parametrize("solver", list(Solver))
    def test_smoke(self, solver):
        cfg = McConfig(dims=(6, 5, 4), rank=3, trials=6, master_seed=4)
        result = run_forward_error_ccdf(cfg, solver)
        assert result.solver is solver
        assert result.forward.trials == 6 and result.kappas.size == 6
        assert result.forward.count + result.forward.censored == 6
        assert result.omega.count <= result.forward.count
        assert np.all(result.forward.samples >= 0.0)

    def test_refinement_is_accurate(self):
        cfg = McConfig(dims=(6, 5, 4), rank=3, trials=10, master_seed=8)
        result = run_forward_error_ccdf(cfg, Solver.PBA_PLUS_ALS)
        assert np.median(result.forward.samples) <= 1e-10

    def test_refined_errors_within_roundoff_bound(self):
        cfg = McConfig(dims=(10, 8, 6), rank=8, trials=40, master_seed=3)
        result = run_forward_error_ccdf(cfg, Solver.PBA_PLUS_ALS)
        solved = ~np.isnan(result.forward.raw) & np.isfinite(result.kappas)
        bound = 2.0 * math.sqrt(10.0) * result.kappas[solved] * UNIT_ROUNDOFF
        within = np.count_nonzero(result.forward.raw[solved] <= bound)
        assert within >= 0.95 * np.count_nonzero(solved)

    def test_all_errors_finite(self):
        cfg = McConfig(dims=(10, 8, 6), rank=8, trials=100, master_seed=5, threads=None)
        result = run_forward_error_ccdf(cfg, Solver.PBA_HOSVD)
        assert result.forward.count > 0 and result.omega.count > 0
        assert np.all(np.isfinite(result.forward.samples))

    def test_reproducible_across_threads(self):
        cfg = McConfig(dims=(5, 4, 3), rank=2, trials=8, master_seed=13)
        serial = run_forward_error_ccdf(cfg, "pba-random")
        cfg.threads = 2
        pooled = run_forward_error_ccdf(cfg, "pba-random")
        np.testing.assert_array_equal(serial.forward.raw, pooled.forward.raw)
        np.testing.assert_array_equal(serial.omega.raw, pooled.omega.raw)

    @pytest.mark.slow
    def test_omega_tail_decays_like_inverse(self):
        cfg = McConfig(dims=(10, 8, 6), rank=8, trials=5000, master_seed=17, threads=None)
        result = run_forward_error_ccdf(cfg, Solver.PBA_RANDOM)
        assert -1.3 <= fit_ccdf_tail(result.omega).exponent <= -0.7
