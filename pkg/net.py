"""
Dense neural networks with hand-written backpropagation.

Layers follow one protocol: `forward(x, training, rng)` caches what the backward
pass needs, `backward(grad)` stores parameter gradients in `grads` and returns
the gradient with respect to the layer input. Losses return gradients that are
already averaged over the batch, so layers never divide by the batch size.
"""
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

import seeding

BCE_EPSILON = 1e-7
MOMENT_EPSILON = 1e-8
GRADIENT_FLOOR = 1e-4


class ShapeError(ValueError):
    pass


def gaussian_init(shape, stddev, seed):
    """
    i.i.d. normal(0, stddev^2) entries from the seeded stream; `seed` may also be a Generator.
    """
    if stddev <= 0:
        raise ValueError("stddev must be positive, got %s" % stddev)
    return seeding.as_generator(seed).normal(0.0, stddev, size=shape)


def dense_forward(layer, x):
    if x.ndim != 2 or x.shape[1] != layer.weights.shape[0]:
        raise ShapeError("input of shape %s does not fit a %dx%d layer" % ((x.shape,) + layer.weights.shape))
    return x @ layer.weights + layer.bias


def dense_backward(layer, x, grad):
    """
    :return: gradients with respect to the input, the weights and the bias
    """
    if grad.shape != (x.shape[0], layer.weights.shape[1]):
        raise ShapeError("upstream gradient of shape %s for output %s" % (
            grad.shape, (x.shape[0], layer.weights.shape[1])))
    return grad @ layer.weights.T, x.T @ grad, grad.sum(axis=0)


def leaky_relu(x, slope=0.2):
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x, grad, slope=0.2):
    # the derivative at 0 is taken as the slope
    return grad * np.where(x > 0, 1.0, slope)


def sigmoid(x):
    return expit(x)


def sigmoid_backward(y, grad):
    return grad * y * (1 - y)


def dropout(x, rate, rng, training):
    """
    Inverted dropout: during training every element is zeroed with probability `rate`
    and survivors are scaled by 1/(1-rate); at inference it is the identity.
    :return: the output and the multiplicative mask that produced it
    """
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must be in [0,1), got %s" % rate)
    if not training or rate == 0:
        return x, np.ones_like(x)
    mask = (rng.random(x.shape) >= rate) / (1 - rate)
    return x * mask, mask


def bce_loss(pred, target, epsilon=BCE_EPSILON):
    """
    Mean binary cross-entropy with predictions clamped to [epsilon, 1-epsilon].
    :return: the loss and its gradient with respect to `pred`
    """
    p = np.clip(pred, epsilon, 1 - epsilon)
    t = np.broadcast_to(target, p.shape)
    loss = -np.mean(t * np.log(p) + (1 - t) * np.log(1 - p))
    grad = (p - t) / (p * (1 - p)) / p.size
    return float(loss), grad


def moment_loss(x, mean, std, epsilon=MOMENT_EPSILON):
    """
    Squared gaps between the column means and standard deviations of x and the target
    moments, averaged over columns. The deviation of x is sqrt(variance + epsilon).
    :return: the loss and its gradient with respect to `x`
    """
    n, d = x.shape
    centered = x - x.mean(axis=0)
    x_std = np.sqrt(np.mean(centered ** 2, axis=0) + epsilon)
    mean_gap = x.mean(axis=0) - mean
    std_gap = x_std - std
    loss = (np.sum(mean_gap ** 2) + np.sum(std_gap ** 2)) / d
    grad = 2 * (mean_gap / n + std_gap * centered / (n * x_std)) / d
    return float(loss), grad


class Dense(object):
    def __init__(self, weights, bias, name='dense'):
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(bias, dtype=np.float64)
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError("bias of shape %s for %d outputs" % (self.bias.shape, self.weights.shape[1]))
        self.name = name
        self.cache = None
        self.grads = OrderedDict()

    @staticmethod
    def initialized(in_dim, out_dim, stddev, rng, name='dense'):
        return Dense(gaussian_init((in_dim, out_dim), stddev, rng), np.zeros(out_dim), name=name)

    @property
    def params(self):
        return OrderedDict([(self.name + '_W', self.weights), (self.name + '_b', self.bias)])

    def forward(self, x, training=False, rng=None):
        self.cache = x
        return dense_forward(self, x)

    def backward(self, grad):
        dx, dW, db = dense_backward(self, self.cache, grad)
        self.grads = OrderedDict([(self.name + '_W', dW), (self.name + '_b', db)])
        return dx


class LeakyReLU(object):
    params = OrderedDict()
    grads = OrderedDict()

    def __init__(self, slope=0.2):
        if not 0 < slope < 1:
            raise ValueError("slope must be in (0,1), got %s" % slope)
        self.slope = slope
        self.cache = None

    def forward(self, x, training=False, rng=None):
        self.cache = x
        return leaky_relu(x, self.slope)

    def backward(self, grad):
        return leaky_relu_backward(self.cache, grad, self.slope)

    def kink_distance(self):
        return float(np.min(np.abs(self.cache))) if self.cache is not None and self.cache.size else np.inf


class Sigmoid(object):
    params = OrderedDict()
    grads = OrderedDict()

    def __init__(self):
        self.cache = None

    def forward(self, x, training=False, rng=None):
        self.cache = sigmoid(x)
        return self.cache

    def backward(self, grad):
        return sigmoid_backward(self.cache, grad)


class Dropout(object):
    params = OrderedDict()
    grads = OrderedDict()

    def __init__(self, rate):
        if not 0 <= rate < 1:
            raise ValueError("dropout rate must be in [0,1), got %s" % rate)
        self.rate = rate
        self.mask = None

    def forward(self, x, training=False, rng=None):
        y, self.mask = dropout(x, self.rate, rng, training)
        return y

    def backward(self, grad):
        return grad * self.mask


class Sequential(object):
    def __init__(self, layers):
        self.layers = list(layers)

    @property
    def params(self):
        params = OrderedDict()
        for layer in self.layers:
            params.update(layer.params)
        return params

    @property
    def grads(self):
        grads = OrderedDict()
        for layer in self.layers:
            grads.update(layer.grads)
        return grads

    def forward(self, x, training=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def kink_distance(self):
        """Smallest |pre-activation| seen by a LeakyReLU in the last forward pass."""
        return min([layer.kink_distance() for layer in self.layers if isinstance(layer, LeakyReLU)] or [np.inf])


class EmbeddingTable(object):
    def __init__(self, entries, name='embedding'):
        self.entries = np.ascontiguousarray(entries, dtype=np.float64)
        if self.entries.shape[0] != 2:
            raise ShapeError("an embedding table needs 2 label rows, got %d" % self.entries.shape[0])
        self.name = name
        self.cache = None
        self.grads = OrderedDict()

    @property
    def params(self):
        return OrderedDict([(self.name, self.entries)])

    def forward(self, labels):
        self.cache = np.asarray(labels, dtype=np.int64)
        return self.entries[self.cache]

    def backward(self, grad):
        d_entries = np.zeros_like(self.entries)
        np.add.at(d_entries, self.cache, grad)
        self.grads = OrderedDict([(self.name, d_entries)])


class ConditionalNetwork(object):
    """
    A network whose input is the concatenation of x with the embedding row of each label.
    """

    def __init__(self, embedding, body):
        self.embedding = embedding
        self.body = body
        self._split = None

    @property
    def input_dim(self):
        return self.body.layers[0].weights.shape[0] - self.embedding.entries.shape[1]

    @property
    def output_dim(self):
        return [layer for layer in self.body.layers if isinstance(layer, Dense)][-1].weights.shape[1]

    @property
    def params(self):
        params = OrderedDict(self.embedding.params)
        params.update(self.body.params)
        return params

    @property
    def grads(self):
        grads = OrderedDict(self.embedding.grads)
        grads.update(self.body.grads)
        return grads

    def forward(self, x, labels, training=False, rng=None):
        self._split = x.shape[1]
        joined = np.concatenate([x, self.embedding.forward(labels)], axis=1)
        return self.body.forward(joined, training=training, rng=rng)

    def backward(self, grad):
        """:return: the gradient with respect to x (the label part goes into the embedding)"""
        joined_grad = self.body.backward(grad)
        self.embedding.backward(joined_grad[:, self._split:])
        return joined_grad[:, :self._split]

    def kink_distance(self):
        return self.body.kink_distance()


def block_network(input_dim, width, blocks, output_dim, dropout_rate, stddev, rng, slope=0.2):
    """
    `blocks` x (Dense(width) -> LeakyReLU -> Dropout) followed by Dense(output_dim) -> Sigmoid.
    """
    layers = []
    for block in range(1, blocks + 1):
        layers += [Dense.initialized(input_dim, width, stddev, rng, name='dense_%d' % block),
                   LeakyReLU(slope),
                   Dropout(dropout_rate)]
        input_dim = width
    layers += [Dense.initialized(input_dim, output_dim, stddev, rng, name='output'), Sigmoid()]
    return Sequential(layers)


@dataclass
class AdamState:
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first: dict = field(default_factory=OrderedDict)
    second: dict = field(default_factory=OrderedDict)


def adam_step(params, grads, state):
    """
    Bias-corrected Adam update, applied in place so layers holding the arrays see the new values.
    """
    state.step += 1
    correction1 = 1 - state.beta1 ** state.step
    correction2 = 1 - state.beta2 ** state.step
    for name, value in params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise ShapeError("gradient of %s has shape %s, parameter %s" % (name, grad.shape, value.shape))
        m = state.first.setdefault(name, np.zeros_like(value))
        v = state.second.setdefault(name, np.zeros_like(value))
        m *= state.beta1
        m += (1 - state.beta1) * grad
        v *= state.beta2
        v += (1 - state.beta2) * grad ** 2
        value -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    return params, state


def relative_error(analytic, numeric, floor=GRADIENT_FLOOR):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_difference_check(loss_and_grads, params, eps=1e-6, max_entries=None, rng=None):
    """
    Compare analytic gradients with central differences.

    :param loss_and_grads: callable running the forward and backward pass on the current
        values of `params` (the input is bound in the closure), returning (loss, grads)
    :param params: name -> array, perturbed in place and restored
    :param max_entries: check at most this many entries per parameter, sampled with `rng`
    :return: the worst relative error over all checked entries
    """
    if not 0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2], got %s" % eps)
    _, analytic = loss_and_grads()
    analytic = OrderedDict((name, np.array(grad, copy=True)) for name, grad in analytic.items())
    worst = 0.0
    for name, value in params.items():
        flat = value.reshape(-1)
        assert np.shares_memory(flat, value), "parameter %s is not contiguous" % name
        indices = range(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(seeding.as_generator(0 if rng is None else rng).choice(flat.size, max_entries, replace=False))
        analytic_flat = analytic[name].reshape(-1)
        for i in indices:
            original = flat[i]
            flat[i] = original + eps
            plus, _ = loss_and_grads()
            flat[i] = original - eps
            minus, _ = loss_and_grads()
            flat[i] = original
            numeric = (plus - minus) / (2 * eps)
            worst = max(worst, relative_error(analytic_flat[i], numeric))
    return worst
