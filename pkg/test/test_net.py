import unittest

import numpy as np

import seeding
from net import (AdamState, Dense, EmbeddingTable, ConditionalNetwork, ShapeError, adam_step, bce_loss,
                 block_network, dropout, finite_difference_check, gaussian_init, leaky_relu, moment_loss,
                 relative_error)


class LayerTests(unittest.TestCase):
    def test_gaussian_init_deterministic(self):
        np.testing.assert_array_equal(gaussian_init((3, 4), 0.5, 7), gaussian_init((3, 4), 0.5, 7))
        self.assertFalse(np.array_equal(gaussian_init((3, 4), 0.5, 7), gaussian_init((3, 4), 0.5, 8)))

    def test_gaussian_init_stddev(self):
        weights = gaussian_init((200, 200), 0.4, 1)
        self.assertAlmostEqual(0.4, weights.std(), delta=0.01)
        with self.assertRaises(ValueError):
            gaussian_init((2, 2), 0, 1)

    def test_dense_shape_mismatch(self):
        layer = Dense(np.zeros((3, 2)), np.zeros(2))
        with self.assertRaises(ShapeError):
            layer.forward(np.zeros((4, 5)))

    def test_leaky_relu(self):
        np.testing.assert_allclose([-0.4, 0, 3], leaky_relu(np.array([-2.0, 0, 3]), 0.2))

    def test_dropout_identity_at_inference(self):
        x = np.ones((10, 10))
        y, mask = dropout(x, 0.5, seeding.generator(0), training=False)
        np.testing.assert_array_equal(x, y)

    def test_inverted_dropout_preserves_expectation(self):
        x = np.ones((400, 400))
        y, mask = dropout(x, 0.3, seeding.generator(0), training=True)
        self.assertAlmostEqual(1.0, y.mean(), delta=0.01)
        self.assertAlmostEqual(0.3, np.mean(mask == 0), delta=0.01)
        np.testing.assert_allclose(1 / 0.7, y[y > 0])

    def test_dropout_rate_bounds(self):
        with self.assertRaises(ValueError):
            dropout(np.ones(3), 1.0, seeding.generator(0), training=True)

    def test_bce_loss_value_and_gradient(self):
        pred = np.array([[0.8], [0.3]])
        loss, grad = bce_loss(pred, np.array([[1.0], [0.0]]))
        self.assertAlmostEqual(-(np.log(0.8) + np.log(0.7)) / 2, loss)
        np.testing.assert_allclose([[-1 / 0.8 / 2], [1 / 0.7 / 2]], grad)

    def test_embedding_backward_accumulates_per_label(self):
        table = EmbeddingTable(np.zeros((2, 3)))
        table.forward(np.array([0, 1, 1]))
        table.backward(np.ones((3, 3)))
        np.testing.assert_array_equal([[1, 1, 1], [2, 2, 2]], table.grads['embedding'])


class AdamTests(unittest.TestCase):
    def test_first_step_moves_by_learning_rate(self):
        params = {'w': np.array([1.0, -1.0])}
        state = AdamState(learning_rate=0.1)
        adam_step(params, {'w': np.array([0.5, -2.0])}, state)
        np.testing.assert_allclose([0.9, -0.9], params['w'], atol=1e-6)
        self.assertEqual(1, state.step)

    def test_minimizes_quadratic(self):
        params = {'w': np.array([3.0])}
        state = AdamState(learning_rate=0.05, beta1=0.9)
        for _ in range(2000):
            adam_step(params, {'w': 2 * params['w']}, state)
        self.assertLess(abs(params['w'][0]), 0.1)


class GradientTests(unittest.TestCase):
    def _network(self, seed=0):
        rng = seeding.generator(seed)
        return ConditionalNetwork(EmbeddingTable(gaussian_init((2, 2), 0.5, rng)),
                                  block_network(3 + 2, 6, 2, 1, 0.2, 0.5, rng))

    def test_parameter_gradients_with_dropout(self):
        network = self._network()
        rng = seeding.generator(1)
        x, labels = rng.normal(size=(8, 3)), rng.integers(0, 2, size=8)
        targets = rng.integers(0, 2, size=(8, 1)).astype(float)

        def loss_and_grads():
            pred = network.forward(x, labels, training=True, rng=seeding.generator(2))
            loss, grad = bce_loss(pred, targets)
            network.backward(grad)
            return loss, network.grads

        loss_and_grads()
        if network.kink_distance() < 1e-3:
            self.skipTest("input too close to the LeakyReLU kink")
        self.assertLess(finite_difference_check(loss_and_grads, network.params), 1e-4)

    def test_input_gradient(self):
        network = self._network(3)
        rng = seeding.generator(4)
        x, labels = rng.normal(size=(5, 3)), rng.integers(0, 2, size=5)
        pred = network.forward(x, labels)
        _, grad = bce_loss(pred, 1.0)
        analytic = network.backward(grad)

        def loss_and_grads():
            loss, grad = bce_loss(network.forward(x, labels), 1.0)
            return loss, {'x': network.backward(grad)}

        if network.kink_distance() < 1e-3:
            self.skipTest("input too close to the LeakyReLU kink")
        self.assertEqual(x.shape, analytic.shape)
        self.assertLess(finite_difference_check(loss_and_grads, {'x': x}), 1e-4)

    def test_moment_loss_gradient(self):
        rng = seeding.generator(5)
        x = rng.random((12, 4))
        mean, std = rng.random(4), 0.1 + 0.3 * rng.random(4)

        def loss_and_grads():
            loss, grad = moment_loss(x, mean, std)
            return loss, {'x': grad}

        self.assertLess(finite_difference_check(loss_and_grads, {'x': x}), 1e-4)

    def test_moment_loss_vanishes_at_target(self):
        x = seeding.generator(6).random((20, 3))
        loss, grad = moment_loss(x, x.mean(axis=0), x.std(axis=0))
        self.assertAlmostEqual(0, loss, places=12)
        np.testing.assert_allclose(0, grad, atol=1e-7)

    def test_detects_wrong_gradient(self):
        network = self._network()
        rng = seeding.generator(1)
        x, labels = rng.normal(size=(8, 3)), rng.integers(0, 2, size=8)

        def wrong_loss_and_grads():
            loss, grad = bce_loss(network.forward(x, labels), 1.0)
            network.backward(grad)
            return loss, {name: 2 * g for name, g in network.grads.items()}

        self.assertGreater(finite_difference_check(wrong_loss_and_grads, network.params), 0.1)

    def test_parameters_restored(self):
        network = self._network()
        before = {name: value.copy() for name, value in network.params.items()}
        x, labels = np.ones((2, 3)), np.array([0, 1])

        def loss_and_grads():
            loss, grad = bce_loss(network.forward(x, labels), 1.0)
            network.backward(grad)
            return loss, network.grads

        finite_difference_check(loss_and_grads, network.params, max_entries=3, rng=0)
        for name, value in network.params.items():
            np.testing.assert_array_equal(before[name], value)

    def test_relative_error_floor(self):
        self.assertEqual(0, relative_error(0.0, 0.0))
        self.assertAlmostEqual(1e-6 / 1e-4, relative_error(1e-6, 0.0))
        self.assertAlmostEqual(0.5, relative_error(1.0, 2.0))


if __name__ == '__main__':
    unittest.main()
