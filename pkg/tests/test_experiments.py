import math

import numpy as np
import pytest

from accessbound.experiments import (CramConfig, OptimizerConfig, accessibility_grid, cram_one,
                                     fit_grid, sigmoid_fit, slope_fit)
from accessbound.experiments import cramming
from accessbound.experiments.copying import (CopyConfig, build_copy_model, copy_eval,
                                             copy_finetune)
from accessbound.toymodel import ToyTransformer

TUNED = OptimizerConfig(lr=0.05, weight_decay=0.01, max_steps=1500)


def toy(seed=0):
    return ToyTransformer.init_random(16, 8, seed=seed, embed_scale=0.3, weight_scale=3.0,
                                      unembed_scale=3.0)


def logistic(n, n0, w, c=1.0):
    return c / (1 + np.exp((np.asarray(n, float) - n0) / w))


class TestSigmoidFit:
    def test_recovers_known_curve(self):
        ns = np.arange(1, 25)
        f = sigmoid_fit(ns, logistic(ns, 10.0, 1.5))
        assert abs(f.midpoint - 10.0) < 1e-3
        assert f.r2 > 0.9999
        assert f.n50 == pytest.approx(10.0, abs=1e-3)

    def test_noise(self):
        ns = np.arange(1, 31)
        y = logistic(ns, 12.0, 2.0) + np.random.default_rng(0).normal(0, 0.05, ns.size)
        assert sigmoid_fit(ns, y).r2 >= 0.95

    def test_constant_is_degenerate(self):
        f = sigmoid_fit(np.arange(1, 10), np.ones(9))
        assert f.degenerate and f.extrapolated

    def test_partial_ceiling(self):
        ns = np.arange(1, 25)
        f = sigmoid_fit(ns, logistic(ns, 8.0, 1.0, c=0.8))
        want = 8.0 + math.log(2 * 0.8 - 1)
        assert f.n50 == pytest.approx(want, abs=1e-3)

    def test_fitted_curve_monotone(self):
        ns = np.arange(1, 20)
        y = logistic(ns, 9.0, 2.0) + np.random.default_rng(1).normal(0, 0.1, ns.size)
        pred = sigmoid_fit(ns, np.clip(y, 0, 1)).predict(np.linspace(0, 30, 300))
        assert np.all(np.diff(pred) <= 1e-15)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            sigmoid_fit([1, 2, 3], [1, 1, 0])


class TestSlopeFit:
    def test_exact_line(self):
        f = slope_fit([1, 2, 3], [2, 4, 6])
        assert f.slope == pytest.approx(2.0) and f.intercept == pytest.approx(0.0, abs=1e-12)
        assert f.r2 == pytest.approx(1.0)

    def test_matches_polyfit(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=10), rng.normal(size=10)
        f = slope_fit(x, y)
        s, i = np.polyfit(x, y, 1)
        assert f.slope == pytest.approx(s) and f.intercept == pytest.approx(i)

    def test_degenerate_x(self):
        with pytest.raises(ValueError):
            slope_fit([1, 1], [2, 3])


class TestCram:
    def test_dominant_token_immediate(self):
        m = toy()
        # a large MLP bias pushes every final state along e_0, which only token 5 scores
        m.params["b2"][-1, 0] = 1e3
        m.params["F"][:] = 0.0
        m.params["F"][5, 0] = 1.0
        r = cram_one(m, [5], 1, TUNED, seed=0)
        assert r.success and r.steps == 0

    def test_m_zero_rejected(self):
        with pytest.raises(ValueError):
            cram_one(toy(), [1], 0)

    def test_deterministic(self):
        m = toy()
        t = np.random.default_rng(0).integers(0, 16, 3)
        a = cram_one(m, t, 2, TUNED, seed=9)
        b = cram_one(m, t, 2, TUNED, seed=9)
        assert (a.success, a.steps, a.final_loss) == (b.success, b.steps, b.final_loss)
        assert np.array_equal(a.Y, b.Y)

    def test_success_decodes_target(self):
        m = toy()
        t = [3, 7]
        r = cram_one(m, t, 2, TUNED, seed=1)
        assert r.success
        assert m.greedy_decode(r.Y, len(t)) == t

    def test_grid_matches_cram_one(self):
        m = toy()
        cfg = CramConfig(ms=(1, 2), ns=(1, 3), targets_per_cell=1,
                         optimizer=OptimizerConfig(lr=0.05, max_steps=200), seed=4)
        grid = accessibility_grid(m, cfg)
        for i, n in enumerate(cfg.ns):
            tg = cramming.make_targets(16, n, "random",
                                       np.random.default_rng(cramming._target_seed(4, n, 0)))
            for j, mm in enumerate(cfg.ms):
                r = cram_one(m, tg, mm, cfg.optimizer, cramming._prompt_seed(4, n, 0, mm))
                assert grid.successes[i, j] == int(r.success)

    def test_parallel_matches_serial(self):
        m = toy()
        cfg = CramConfig(ms=(1, 2), ns=(2, 4), targets_per_cell=2,
                         optimizer=OptimizerConfig(lr=0.05, max_steps=100), seed=1)
        a = accessibility_grid(m, cfg, jobs=1)
        b = accessibility_grid(m, cfg, jobs=2)
        assert np.array_equal(a.successes, b.successes) and np.array_equal(a.steps, b.steps)

    def test_structured_targets_periodic(self):
        t = cramming.make_targets(16, 12, "structured", np.random.default_rng(0))
        assert len(set(t.tolist())) <= 4

    def test_grid_csv_and_fit(self):
        grid = cramming.AccessibilityGrid([1, 2], [1, 2, 3, 4, 5],
                                          np.array([[5, 5], [4, 5], [1, 5], [0, 3], [0, 0]]), 5)
        assert grid.to_csv().splitlines()[0] == "n,m,rate,trials"
        fit = fit_grid(grid)
        assert fit.n50[2] > fit.n50[1]
        assert fit.linear is not None

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CramConfig(target_source="pg19")


class TestCopy:
    CFG = CopyConfig(symbols=4, dim=16, layers=1, heads=2, head_dim=8, mlp_dim=32,
                     train_max_len=2, eval_max_len=4, batch=8, lr=1e-2, max_steps=800,
                     eval_every=50, eval_trials=32, seed=0)

    @pytest.fixture(scope="class")
    @classmethod
    def trained(cls):
        m, log = copy_finetune(build_copy_model(cls.CFG), cls.CFG)
        return m, log

    def test_learns_short_copy(self, trained):
        m, log = trained
        assert log.stopped_early
        assert log.checks[-1][1] == 1.0

    def test_already_perfect_stops_at_zero(self, trained):
        m, _ = trained
        _, log2 = copy_finetune(m.copy(), self.CFG)
        assert log2.steps == 0 and log2.stopped_early

    def test_loss_trend(self, trained):
        _, log = trained
        L = np.asarray(log.losses)
        assert len(L) >= 20 and L[-10:].mean() < L[:10].mean()

    def test_eval_deterministic(self, trained):
        m, _ = trained
        a = copy_eval(m, [1, 2, 3, 4], 16, seed=3, symbols=4)
        b = copy_eval(m, [1, 2, 3, 4], 16, seed=3, symbols=4)
        assert a.accuracy == b.accuracy
        assert a.accuracy[0] >= a.accuracy[1]
        assert a.to_csv().startswith("length,accuracy,trials\n")

    def test_needs_positions(self):
        m = ToyTransformer.init_random(5, 4, seed=0)
        with pytest.raises(ValueError):
            copy_finetune(m, self.CFG)
