import math

import numpy as np
import pytest

from partialbnn.core_math import seeded_rng
from partialbnn.data import GpGenConfig, RegressionDataset, generate_gp_dataset
from partialbnn.map_training import (GaussianLikelihood, extract_fixed_values, log_joint,
                                     log_joint_gradients, train_map)
from partialbnn.masks import Architecture, LayerMask, count_fixed, generate_mask
from partialbnn.network import MlpParams, forward, init_params
from partialbnn.optim import Adam, AdamConfig, TrainingError

LOG_2PI = math.log(2 * math.pi)


def tiny_dataset(rng, n=9, d_in=2, d_out=2):
    x, y = rng.normal(size=(n, d_in)), rng.normal(size=(n, d_out))
    return RegressionDataset(x, y, x[:2], y[:2])


def scalar_log_joint(params, data, sigma):
    total = 0.0
    f = forward(params, data.x_train)
    for n in range(f.shape[0]):
        for d in range(f.shape[1]):
            r = data.y_train[n, d] - f[n, d]
            total += -0.5 * r * r / sigma ** 2 - 0.5 * math.log(2 * math.pi * sigma ** 2)
    for arr in params.arrays():
        for v in arr.ravel():
            total += -0.5 * v * v - 0.5 * LOG_2PI
    return total


class TestLogJoint:
    def test_zero_network_closed_form(self):
        arch = Architecture.mlp((1, 2, 1))
        params = MlpParams(arch, [np.zeros(s) for s in arch.weight_shapes],
                           [np.zeros(d) for d in arch.dims[1:]])
        data = RegressionDataset([[0.0]], [[0.0]], [[0.0]], [[0.0]])
        n_params = arch.n_weights + arch.n_biases
        expected = -0.5 * LOG_2PI + n_params * (-0.5 * LOG_2PI)
        assert log_joint(params, data, GaussianLikelihood(1.0)) == pytest.approx(expected, abs=1e-12)

    def test_doubling_variance_changes_likelihood_only(self):
        rng = seeded_rng(0)
        arch = Architecture.mlp((2, 3, 2))
        params, data = init_params(arch, rng), tiny_dataset(rng)
        lik1 = GaussianLikelihood(0.7)
        lik2 = GaussianLikelihood(0.7 * math.sqrt(2))
        r2 = ((data.y_train - forward(params, data.x_train)) ** 2).sum()
        n_terms = data.y_train.size
        delta = (-r2 / (2 * lik2.variance) - 0.5 * n_terms * math.log(lik2.variance)) - (
            -r2 / (2 * lik1.variance) - 0.5 * n_terms * math.log(lik1.variance))
        got = log_joint(params, data, lik2) - log_joint(params, data, lik1)
        assert got == pytest.approx(delta, abs=1e-10)

    def test_against_scalar_oracle(self):
        rng = seeded_rng(1)
        arch = Architecture.mlp((2, 4, 2), "sigmoid")
        params, data = init_params(arch, rng), tiny_dataset(rng)
        assert abs(log_joint(params, data, GaussianLikelihood(0.3))
                   - scalar_log_joint(params, data, 0.3)) <= 1e-10

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            GaussianLikelihood(0.0)

    def test_gradient_matches_finite_differences(self):
        rng = seeded_rng(2)
        arch = Architecture.mlp((2, 3, 2), "tanh")
        params, data = init_params(arch, rng), tiny_dataset(rng)
        lik = GaussianLikelihood(0.5)
        _, g = log_joint_gradients(params, data.x_train, data.y_train, lik)
        h = 1e-6
        for arr, garr in zip(params.arrays(), g.arrays()):
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                fp = log_joint(params, data, lik)
                arr[idx] = old - h
                fm = log_joint(params, data, lik)
                arr[idx] = old
                fd = (fp - fm) / (2 * h)
                assert abs(fd - garr[idx]) <= 1e-6 * max(abs(fd), 1.0)


class TestAdam:
    def test_hand_stepped_quadratic(self):
        # maximise -(w - 3)^2, gradient -2(w - 3)
        w = np.array([0.0])
        opt = Adam([w])
        m = v = 0.0
        ref = 0.0
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        for t in range(1, 6):
            g = -2.0 * (w[0] - 3.0)
            opt.step([np.array([g])], lr)
            gr = -2.0 * (ref - 3.0)
            m = b1 * m + (1 - b1) * gr
            v = b2 * v + (1 - b2) * gr * gr
            ref = ref + lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
            assert w[0] == pytest.approx(ref, abs=1e-15)
        assert opt.t == 5

    def test_schedule_endpoints(self):
        cfg = AdamConfig(epochs=11, lr_start=1e-2, lr_end=1e-3)
        assert cfg.learning_rate(0) == pytest.approx(1e-2)
        assert cfg.learning_rate(10) == pytest.approx(1e-3)
        assert cfg.learning_rate(5) == pytest.approx(5.5e-3)


class TestTrainMap:
    def test_one_weight_model_converges_to_mode(self):
        arch = Architecture((1, 1), ("identity",), bias=False)
        data = RegressionDataset([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        init = MlpParams(arch, [np.array([[2.0]])], [np.zeros(1)])
        params, history = train_map(arch, data, GaussianLikelihood(1.0),
                                    AdamConfig(epochs=3000, lr_start=5e-2, lr_end=1e-4),
                                    seeded_rng(0), init)
        assert params.weights[0][0, 0] == pytest.approx(0.5, abs=1e-4)
        assert history[-1] >= history[0]

    def test_zero_epochs_is_identity(self):
        arch = Architecture.mlp((2, 3, 2))
        rng = seeded_rng(0)
        init, data = init_params(arch, rng), tiny_dataset(rng)
        params, history = train_map(arch, data, GaussianLikelihood(1.0), AdamConfig(epochs=0),
                                    rng, init)
        assert history == []
        for a, b in zip(params.arrays(), init.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_zero_learning_rate_is_identity(self):
        arch = Architecture.mlp((2, 3, 2))
        rng = seeded_rng(0)
        init, data = init_params(arch, rng), tiny_dataset(rng)
        params, _ = train_map(arch, data, GaussianLikelihood(1.0),
                              AdamConfig(epochs=5, lr_start=0.0, lr_end=0.0, batch_size=4), rng, init)
        for a, b in zip(params.arrays(), init.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_divergence_reports_epoch(self):
        arch = Architecture.mlp((2, 3, 2))
        rng = seeded_rng(0)
        data = tiny_dataset(rng)
        data.y_train[0, 0] = 1e200
        with pytest.raises(TrainingError) as err, np.errstate(over="ignore"):
            train_map(arch, data, GaussianLikelihood(1.0), AdamConfig(epochs=3), rng)
        assert err.value.epoch == 0

    @pytest.mark.slow
    def test_toy_fit_below_noise_floor(self):
        arch = Architecture.mlp((1, 50, 50, 1), "sigmoid")
        rmses = []
        for seed in range(3):
            data = generate_gp_dataset(GpGenConfig(seed=seed))
            params, _ = train_map(arch, data, GaussianLikelihood(0.05),
                                  AdamConfig(epochs=10000, lr_start=1e-2, lr_end=1e-3),
                                  seeded_rng(seed))
            pred = forward(params, data.x_train)
            rmses.append(float(np.sqrt(np.mean((pred - data.y_train) ** 2))))
        assert np.mean(rmses) < 3 * 0.05


class TestExtractFixedValues:
    def test_empty_mask(self):
        arch = Architecture.mlp((2, 3, 2))
        a = extract_fixed_values(init_params(arch, seeded_rng(0)), LayerMask.empty(arch))
        assert all(not v.any() for v in a.values)
        assert a.policy == "map"

    def test_single_position(self):
        arch = Architecture.mlp((2, 3, 2))
        params = init_params(arch, seeded_rng(0))
        mask = LayerMask.empty(arch)
        mask.matrices[0][0, 0] = True
        a = extract_fixed_values(params, mask)
        assert a.fixed_values(1).tolist() == [params.weights[0][0, 0]]

    def test_heavy_count(self):
        arch = Architecture.mlp((8, 50, 50, 2))
        mask = generate_mask(arch, "heavy")
        a = extract_fixed_values(init_params(arch, seeded_rng(0)), mask)
        assert sum(a.fixed_values(l).size for l in range(1, 4)) == count_fixed(mask)
