import unittest

import numpy as np

from stvs_lab.exceptions import ShapeError
from stvs_lab.learning.gradcheck import gradient_check, relative_error
from stvs_lab.learning.layers import (
    BatchNorm2D, Conv2D, Dense, MaxPoolTime, ReLU, batchnorm_forward, conv2d_forward, cross_entropy, softmax,
    softmax_cross_entropy
)
from stvs_lab.learning.model import Architecture, CnnClassifier, forward


def naive_conv(x, W, b, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    n, _, h, w = xp.shape
    o, c, kh, kw = W.shape
    out = np.zeros((n, o, h - kh + 1, w - kw + 1))
    for s in range(n):
        for f in range(o):
            for i in range(out.shape[2]):
                for j in range(out.shape[3]):
                    out[s, f, i, j] = np.sum(xp[s, :, i:i + kh, j:j + kw] * W[f]) + b[f]
    return out


class TestConvolution(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_identity_kernel(self):
        x = self.rng.standard_normal((2, 1, 5, 7))
        W = np.zeros((1, 1, 3, 3))
        W[0, 0, 1, 1] = 1.0
        np.testing.assert_allclose(conv2d_forward(x, W, np.zeros(1), pad=1), x)

    def test_ones_kernel_on_constant_input(self):
        x = np.full((1, 1, 5, 5), 0.7)
        out = conv2d_forward(x, np.ones((1, 1, 3, 3)), np.zeros(1), pad=0)
        self.assertEqual(out.shape, (1, 1, 3, 3))
        np.testing.assert_allclose(out, 6.3)

    def test_matches_naive_loops(self):
        x = self.rng.standard_normal((3, 2, 4, 6))
        W = self.rng.standard_normal((4, 2, 3, 3))
        b = self.rng.standard_normal(4)
        for pad in (0, 1):
            np.testing.assert_allclose(conv2d_forward(x, W, b, pad), naive_conv(x, W, b, pad), atol=1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))
        with self.assertRaises(ShapeError):
            conv2d_forward(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)), np.zeros(1))


class TestBatchNorm(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(1)
        self.x = rng.normal(3.0, 2.0, (8, 2, 3, 4))

    def test_train_mode_standardizes(self):
        out = batchnorm_forward(self.x, np.ones(2), np.zeros(2), mode="train")
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0, atol=1e-4)

    def test_scale_and_shift(self):
        out = batchnorm_forward(self.x, np.array([2.0, 0.5]), np.array([1.0, -1.0]), mode="train")
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), [1.0, -1.0], atol=1e-10)
        np.testing.assert_allclose(out.std(axis=(0, 2, 3)), [2.0, 0.5], atol=1e-4)

    def test_running_statistics_update(self):
        running_mean, running_var = np.zeros(2), np.ones(2)
        batchnorm_forward(self.x, np.ones(2), np.zeros(2), "train", running_mean, running_var, momentum=0.9)
        np.testing.assert_allclose(running_mean, 0.1 * self.x.mean(axis=(0, 2, 3)))
        np.testing.assert_allclose(running_var, 0.9 + 0.1 * self.x.var(axis=(0, 2, 3)))

    def test_eval_mode_uses_running_statistics(self):
        running_mean, running_var = np.array([1.0, -1.0]), np.array([4.0, 1.0])
        out = batchnorm_forward(self.x, np.ones(2), np.zeros(2), "eval", running_mean, running_var, eps=0.0)
        np.testing.assert_allclose(out[:, 0], (self.x[:, 0] - 1.0) / 2.0)
        np.testing.assert_allclose(out[:, 1], self.x[:, 1] + 1.0)
        # eval leaves the statistics alone
        np.testing.assert_array_equal(running_mean, [1.0, -1.0])

    def test_unknown_mode(self):
        with self.assertRaises(ValueError):
            batchnorm_forward(self.x, np.ones(2), np.zeros(2), mode="infer")

    def test_single_sample_batch_in_train_mode(self):
        with self.assertRaises(ShapeError):
            BatchNorm2D(2, dtype=np.float64).forward(self.x[:1], train=True)


class TestSoftmax(unittest.TestCase):

    def test_softmax_values(self):
        np.testing.assert_allclose(softmax(np.array([[np.log(2.0), 0.0]])), [[2 / 3, 1 / 3]])
        # large logits stay finite
        np.testing.assert_allclose(softmax(np.array([[1000.0, 1000.0]])), [[0.5, 0.5]])

    def test_cross_entropy_gradient(self):
        rng = np.random.default_rng(2)
        logits = rng.standard_normal((5, 2))
        labels = np.array([0, 1, 1, 0, 1])
        loss, grad = softmax_cross_entropy(logits, labels)
        probs = softmax(logits)
        self.assertAlmostEqual(loss, -np.mean(np.log(probs[np.arange(5), labels])), places=12)
        expected = probs.copy()
        expected[np.arange(5), labels] -= 1.0
        np.testing.assert_allclose(grad, expected / 5)

    def test_cross_entropy_of_certain_prediction(self):
        self.assertEqual(cross_entropy(np.array([[1.0, 0.0]]), np.array([0])), 0.0)


class TestGradients(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(3)

    def assertGradientsMatch(self, report):
        self.assertTrue(report.passed, report.errors)

    def test_conv(self):
        layer = Conv2D(2, 3, rng=self.rng, dtype=np.float64)
        layer.params["b"] = self.rng.standard_normal(3)
        self.assertGradientsMatch(gradient_check(layer, self.rng.standard_normal((2, 2, 3, 5))))

    def test_batchnorm(self):
        layer = BatchNorm2D(2, dtype=np.float64)
        layer.params["gamma"] = self.rng.uniform(0.5, 1.5, 2)
        layer.params["beta"] = self.rng.standard_normal(2)
        self.assertGradientsMatch(gradient_check(layer, self.rng.standard_normal((4, 2, 3, 4))))

    def test_dense(self):
        layer = Dense(6, 2, rng=self.rng, dtype=np.float64)
        self.assertGradientsMatch(gradient_check(layer, self.rng.standard_normal((5, 6))))

    def test_maxpool_with_odd_length(self):
        report = gradient_check(MaxPoolTime(), self.rng.standard_normal((2, 1, 3, 5)))
        self.assertEqual(list(report.errors), ["input"])
        self.assertGradientsMatch(report)

    def test_small_model(self):
        model = CnnClassifier(Architecture((3, 4), channels=(2, 2), pool_after=(0,), dtype="float64", seed=4))
        report = gradient_check(model, self.rng.standard_normal((4, 3, 4)), labels=np.array([0, 1, 0, 1]))
        self.assertGradientsMatch(report)
        self.assertIn("input", report.errors)

    def test_default_stack_on_short_window(self):
        arch = Architecture((4, 8), channels=(2, 3, 3, 2), dtype="float64", seed=5)
        model = CnnClassifier(arch)
        self.assertEqual(model.layer_counts(),
                         {"conv": 4, "batchnorm": 4, "relu": 4, "maxpool": 2, "flatten": 1, "dense": 1})
        report = gradient_check(model, self.rng.standard_normal((3, 4, 8)), labels=np.array([0, 1, 1]))
        self.assertGradientsMatch(report)
        self.assertEqual(len(report.errors), 4 * 4 + 2 + 1)


class TestRandomizedGradients(unittest.TestCase):
    """Each layer checked over many random shapes."""

    CASES = 20

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def shape(self, low, high, size):
        return tuple(int(v) for v in self.rng.integers(low, high + 1, size))

    def test_conv(self):
        for case in range(self.CASES):
            n, c_in, c_out, h, w = self.shape(1, 3, 3) + self.shape(1, 4, 1) + self.shape(2, 6, 1)
            with self.subTest(case=case, shape=(n, c_in, c_out, h, w)):
                layer = Conv2D(c_in, c_out, rng=self.rng, dtype=np.float64)
                layer.params["b"] = self.rng.standard_normal(c_out)
                report = gradient_check(layer, self.rng.standard_normal((n, c_in, h, w)), seed=case)
                self.assertTrue(report.passed, report.errors)

    def test_batchnorm(self):
        for case in range(self.CASES):
            n, c, h, w = self.shape(2, 5, 1) + self.shape(1, 3, 1) + self.shape(1, 3, 1) + self.shape(2, 5, 1)
            with self.subTest(case=case, shape=(n, c, h, w)):
                layer = BatchNorm2D(c, dtype=np.float64)
                layer.params["gamma"] = self.rng.uniform(0.5, 1.5, c)
                layer.params["beta"] = self.rng.standard_normal(c)
                report = gradient_check(layer, self.rng.normal(1.0, 2.0, (n, c, h, w)), seed=case)
                self.assertTrue(report.passed, report.errors)

    def test_dense(self):
        for case in range(self.CASES):
            n, d_in, d_out = self.shape(1, 6, 1) + self.shape(1, 12, 1) + self.shape(1, 4, 1)
            with self.subTest(case=case, shape=(n, d_in, d_out)):
                layer = Dense(d_in, d_out, rng=self.rng, dtype=np.float64)
                layer.params["b"] = self.rng.standard_normal(d_out)
                report = gradient_check(layer, self.rng.standard_normal((n, d_in)), seed=case)
                self.assertTrue(report.passed, report.errors)

    def test_maxpool(self):
        for case in range(self.CASES):
            n, c, h, w = self.shape(1, 3, 3) + self.shape(2, 9, 1)
            with self.subTest(case=case, shape=(n, c, h, w)):
                report = gradient_check(MaxPoolTime(), self.rng.standard_normal((n, c, h, w)), seed=case)
                self.assertTrue(report.passed, report.errors)

    def test_relu(self):
        for case in range(self.CASES):
            n, c, h, w = self.shape(1, 3, 3) + self.shape(1, 6, 1)
            with self.subTest(case=case, shape=(n, c, h, w)):
                x = self.rng.standard_normal((n, c, h, w))
                # keep inputs off the kink
                x[np.abs(x) < 1e-3] = 0.5
                report = gradient_check(ReLU(), x, seed=case)
                self.assertTrue(report.passed, report.errors)


class TestGradientReport(unittest.TestCase):

    def test_relative_error_floor(self):
        self.assertEqual(relative_error(np.zeros(3), np.full(3, 1e-12)), np.linalg.norm(np.full(3, 1e-12)) / 1e-6)
        self.assertAlmostEqual(relative_error(np.ones(2), -np.ones(2)), 1.0)


class TestClassifier(unittest.TestCase):

    def test_default_layer_stack(self):
        model = CnnClassifier(Architecture((29, 80)))
        self.assertEqual(model.layer_counts(),
                         {"conv": 4, "batchnorm": 4, "relu": 4, "maxpool": 2, "flatten": 1, "dense": 1})
        self.assertEqual(model.arch.flat_features, 64 * 29 * 20)

    def test_forward_returns_probabilities(self):
        model = CnnClassifier(Architecture((3, 8), channels=(2, 2), pool_after=(0,)))
        probs = forward(model, np.random.default_rng(0).standard_normal((3, 8)))
        self.assertEqual(probs.shape, (2,))
        self.assertAlmostEqual(float(probs.sum()), 1.0, places=6)
        self.assertEqual(model.mode, "eval")

    def test_window_shape_checked(self):
        model = CnnClassifier(Architecture((3, 8), channels=(2, 2), pool_after=(0,)))
        with self.assertRaises(ShapeError):
            model.predict(np.zeros((5, 3, 7)))

    def test_window_too_short_for_pooling(self):
        with self.assertRaises(ShapeError):
            CnnClassifier(Architecture((3, 2)))

    def test_architecture_round_trip(self):
        arch = Architecture((29, 80), channels=(4, 8), pool_after=(1,), seed=9)
        self.assertEqual(Architecture.from_dict(arch.to_dict()), arch)


if __name__ == '__main__':
    unittest.main()
