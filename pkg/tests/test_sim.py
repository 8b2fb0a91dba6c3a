import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from tandp import sim
from tandp.accountant import DomainError, PrivacyParams
from tandp.cli import load_schema


def config(n=1000, batch=100, steps=200, sigma=1.0, **kw):
    kw.setdefault("dimension", 10)
    return sim.SimConfig(num_samples=n,
                         privacy=PrivacyParams(n, batch, steps, sigma, 1e-5), **kw)


vectors = hnp.arrays(np.float64, st.integers(1, 12),
                     elements=st.floats(-1e3, 1e3, allow_nan=False))


class TestClip:

    def test_scales_down(self):
        g = np.array([1.2, -1.6])  # norm 2
        out = sim.clip(g, 1.0)
        np.testing.assert_allclose(out, g / 2, rtol=1e-15)
        assert np.linalg.norm(out) == pytest.approx(1.0, rel=1e-15)

    def test_inside_ball(self):
        g = np.array([0.3, 0.0])
        np.testing.assert_array_equal(sim.clip(g, 1.0), g)

    def test_zero(self):
        np.testing.assert_array_equal(sim.clip(np.zeros(4), 0.5), np.zeros(4))

    @settings(max_examples=100)
    @given(vectors, st.floats(1e-3, 1e3))
    def test_norm_bound(self, g, C):
        assert np.linalg.norm(sim.clip(g, C)) <= C + 1e-12


class TestNoisyGradient:

    def test_noiseless_identity(self):
        g = np.array([[0.3, -0.4]])
        out = sim.noisy_gradient(g, 1.0, 1e-30, 1, sim.make_rng(0, 0))
        np.testing.assert_allclose(out, g[0], rtol=0, atol=1e-25)

    def test_noise_std(self):
        grads = np.zeros((0, 100_000))
        out = sim.noisy_gradient(grads, 1.0, 2.0, 4, sim.make_rng(1, 0))
        assert out.std() == pytest.approx(0.5, rel=0.01)

    def test_noise_invariant_under_joint_scaling(self):
        grads = np.zeros((0, 100_000))
        a = sim.noisy_gradient(grads, 1.0, 2.0, 4, sim.make_rng(1, 0))
        b = sim.noisy_gradient(grads, 1.0, 4.0, 8, sim.make_rng(1, 0))
        np.testing.assert_array_equal(a, b)
        assert b.std() == pytest.approx(0.5, rel=0.01)

    def test_fixed_denominator(self):
        # Two samples but nominal B = 4: the sum is divided by 4.
        g = np.array([[0.2, 0.0], [0.0, 0.2]])
        out = sim.noisy_gradient(g, 1.0, 1e-30, 4, sim.make_rng(0, 0))
        np.testing.assert_allclose(out, [0.05, 0.05], atol=1e-25)

    def test_clips_inputs(self):
        g = np.array([[3.0, 4.0]])
        out = sim.noisy_gradient(g, 1.0, 1e-30, 1, sim.make_rng(0, 0))
        np.testing.assert_allclose(out, [0.6, 0.8], rtol=1e-15)

    def test_empty_dimension(self):
        with pytest.raises(DomainError):
            sim.noisy_gradient(np.zeros((3, 0)), 1.0, 1.0, 1, sim.make_rng(0, 0))


class TestAugmult:

    def test_identical_copies(self):
        rng = np.random.default_rng(3)
        g = rng.normal(size=(5, 1, 4))
        k1 = sim.augmult_gradient(g, 1.0)
        k6 = sim.augmult_gradient(np.repeat(g, 6, axis=1), 1.0)
        np.testing.assert_allclose(k6, k1, rtol=1e-14)

    def test_opposite_augmentations_cancel(self):
        g = np.array([[[0.5, -2.0], [-0.5, 2.0]]])
        np.testing.assert_array_equal(sim.augmult_gradient(g, 1.0), np.zeros((1, 2)))

    def test_mean_then_clip_brute_force(self):
        rng = np.random.default_rng(11)
        g = rng.normal(scale=2.0, size=(3, 2, 2))
        out = sim.augmult_gradient(g.tolist(), 1.0)
        for i in range(3):
            mean = [(g[i][0][j] + g[i][1][j]) / 2 for j in range(2)]
            norm = (mean[0] ** 2 + mean[1] ** 2) ** 0.5
            expected = [m * min(1.0, 1.0 / norm) for m in mean]
            np.testing.assert_allclose(out[i], expected, rtol=1e-14)

    def test_ragged(self):
        with pytest.raises(DomainError):
            sim.augmult_gradient([[[1.0, 2.0]], [[1.0]]], 1.0)

    @settings(max_examples=50)
    @given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=3, max_dims=3, max_side=6),
                      elements=st.floats(-100, 100)), st.floats(1e-2, 10))
    def test_norm_bound(self, g, C):
        assert np.all(np.linalg.norm(sim.augmult_gradient(g, C), axis=1) <= C + 1e-12)


class TestPoissonSample:

    def test_extremes(self):
        rng = sim.make_rng(0, 1)
        assert sim.poisson_sample(50, 0.0, rng).size == 0
        np.testing.assert_array_equal(sim.poisson_sample(50, 1.0, rng), np.arange(50))

    def test_mean_cardinality(self):
        rng = sim.make_rng(5, 1)
        sizes = [sim.poisson_sample(10_000, 0.1, rng).size for _ in range(100)]
        stderr = np.sqrt(10_000 * 0.1 * 0.9 / 100)
        assert abs(np.mean(sizes) - 1000) <= 3 * stderr

    def test_bad_q(self):
        with pytest.raises(DomainError):
            sim.poisson_sample(10, 1.5, sim.make_rng(0, 1))


class TestLogisticGradient:

    def test_finite_differences(self):
        rng = np.random.default_rng(2024)
        h = 1e-5
        for _ in range(20):
            d = int(rng.integers(1, 8))
            theta, x = rng.normal(size=d), rng.normal(scale=2.0, size=d)
            y = int(rng.integers(0, 2))
            analytic = sim.logistic_grad(theta, x, y)
            fd = np.empty(d)
            for j in range(d):
                e = np.zeros(d)
                e[j] = h
                fd[j] = (oracles.logistic_loss_scalar(theta + e, x, y)
                         - oracles.logistic_loss_scalar(theta - e, x, y)) / (2 * h)
            assert np.linalg.norm(fd - analytic) <= 1e-6 * np.linalg.norm(analytic)

    def test_loss_matches_scalar(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(5, 3))
        y = np.array([0, 1, 1, 0, 1])
        theta = rng.normal(size=3)
        expected = [oracles.logistic_loss_scalar(theta, xi, yi) for xi, yi in zip(x, y)]
        np.testing.assert_allclose(sim.logistic_loss(theta, x, y), expected, rtol=1e-14)


class TestSimConfig:

    @pytest.mark.parametrize("kw,field", [
        (dict(dimension=0), "dimension"),
        (dict(clip_norm=0.0), "clip_norm"),
        (dict(learning_rate=-1.0), "learning_rate"),
        (dict(augmult_order=0), "augmult_order"),
        (dict(augmentation_noise_scale=-0.1), "augmentation_noise_scale"),
        (dict(seed=-1), "seed"),
        (dict(seed=2**64), "seed"),
    ])
    def test_rejects(self, kw, field):
        with pytest.raises(DomainError) as err:
            config(**kw)
        assert err.value.field == field

    def test_dataset_size_must_match(self):
        with pytest.raises(DomainError):
            sim.SimConfig(10, 100, PrivacyParams(200, 10, 200, 1.0, 1e-5))

    def test_minimum_noise_coordinates(self):
        with pytest.raises(DomainError):
            config(steps=10, dimension=10)


class TestTrain:

    def test_deterministic(self):
        cfg = config(augmult_order=3, augmentation_noise_scale=0.5, seed=42)
        assert sim.train(cfg).to_json() == sim.train(cfg).to_json()

    def test_seed_matters(self):
        assert sim.train(config(seed=1)).to_json() != sim.train(config(seed=2)).to_json()

    def test_noiseless_limit_is_gradient_descent(self):
        n, steps, lr = 200, 100, 0.5
        cfg = config(n=n, batch=n, steps=steps, sigma=1e-30, clip_norm=1e6,
                     learning_rate=lr, seed=7)
        report = sim.train(cfg)
        x, y = sim.make_dataset(cfg.dimension, n, cfg.seed)
        losses, theta = oracles.plain_gradient_descent(x, y, lr, steps)
        got = [l for _, l in report.loss_trajectory]
        assert len(got) == steps + 1
        assert max(abs(a - b) for a, b in zip(got, losses)) <= 1e-6
        np.testing.assert_allclose(report.final_params, theta, atol=1e-6)

    def test_huge_noise_dominates(self):
        accuracies = []
        for seed in range(20):
            cfg = config(sigma=1e6, seed=seed)
            report = sim.train(cfg)
            noise_only = -cfg.learning_rate * report.noise.sum(axis=0)
            # Clipped signal per step has norm <= C * n / B.
            gap = np.linalg.norm(report.final_params - noise_only)
            assert gap <= cfg.learning_rate * 200 * 1.0 * 1000 / 100
            assert gap <= 1e-3 * np.linalg.norm(noise_only)
            accuracies.append(report.final_accuracy)
        assert 0.3 <= np.mean(accuracies) <= 0.7

    def test_noise_statistics(self):
        cfg = config(n=500, batch=50, steps=1000, dimension=100, sigma=1.5, seed=3)
        stats = sim.train(cfg).noise_stats
        assert stats["count"] >= 100_000
        assert stats["std"] == pytest.approx(1.5 / 50, rel=0.02)
        assert stats["expected_std"] == 1.5 / 50

    def test_histograms(self):
        cfg = config(steps=200)
        report = sim.train(cfg)
        assert sorted(report.grad_norm_histograms) == [1, 100, 200]
        for step, hist in report.grad_norm_histograms.items():
            assert hist.counts.sum() == report.grad_norms[step].size
            assert hist.edges[0] == 0 and hist.edges[-1] == 2 * cfg.clip_norm
            assert len(hist.counts) == sim.HISTOGRAM_BINS

    def test_histogram_drift_towards_zero(self):
        report = sim.train(config(steps=200))
        C = 1.0
        first = np.mean(report.grad_norms[1] < 0.1 * C)
        last = np.mean(report.grad_norms[200] < 0.1 * C)
        assert last > first

    def test_augmult_with_identical_copies_matches_k1(self):
        a = sim.train(config(augmult_order=1, seed=9))
        b = sim.train(config(augmult_order=8, seed=9))
        np.testing.assert_allclose([l for _, l in b.loss_trajectory],
                                   [l for _, l in a.loss_trajectory], rtol=1e-12)

    def test_paired_noise_stream(self):
        a = sim.train(config(batch=50, sigma=1.0, seed=4))
        b = sim.train(config(batch=100, sigma=2.0, seed=4))
        np.testing.assert_array_equal(a.noise, b.noise)

    def test_paired_seed_final_losses(self):
        diffs = []
        for seed in range(10):
            a = sim.train(config(n=2000, batch=50, steps=100, sigma=1.0, seed=seed))
            b = sim.train(config(n=2000, batch=100, steps=100, sigma=2.0, seed=seed))
            diffs.append(b.loss_trajectory[-1][1] - a.loss_trajectory[-1][1])
        assert abs(np.mean(diffs)) <= 3 * np.std(diffs, ddof=1)

    def test_report_schema_and_files(self, tmp_path):
        report = sim.train(config(steps=100, seed=1))
        payload = json.loads(report.to_json())
        jsonschema.validate(payload, load_schema("report"))
        paths = report.write(tmp_path)
        assert (tmp_path / "report.json").exists()
        lines = (tmp_path / "hist_step_1.csv").read_text().splitlines()
        assert lines[0] == "bin_left,bin_right,count"
        assert len(lines) == sim.HISTOGRAM_BINS + 1
        assert len(paths) == 4
