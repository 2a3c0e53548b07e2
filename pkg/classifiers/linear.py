"""
Linear learners over a feature matrix X (n x d) and 0/1 targets y.
"""
import numpy as np


def fit_pegasos(X, y, regularization, epochs, rng):
    """
    Linear SVM by stochastic subgradient descent on the L2-regularized hinge loss
    with step size 1/(lambda * t). The bias is learned as the weight of a constant 1 column.
    The returned weights are the average of the iterates over the last epoch.
    :return: weights (d,) and bias
    """
    n, d = X.shape
    augmented = np.hstack([X, np.ones((n, 1))])
    signs = np.where(y == 1, 1.0, -1.0)
    radius = 1 / np.sqrt(regularization)
    w = np.zeros(d + 1)
    average = np.zeros(d + 1)
    t = 0
    for epoch in range(epochs):
        last_epoch = epoch == epochs - 1
        for i in rng.permutation(n):
            t += 1
            eta = 1 / (regularization * t)
            violated = signs[i] * (augmented[i] @ w) < 1
            w *= 1 - eta * regularization
            if violated:
                w += eta * signs[i] * augmented[i]
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
            if last_epoch:
                average += w
    average /= n
    return average[:d], float(average[d])


def fit_least_squares_sgd(X, y, epochs, learning_rate, rng):
    """
    Linear regression on 0/1 targets with squared loss, one update per sample.
    :return: weights (d,) and bias
    """
    n, d = X.shape
    targets = y.astype(np.float64)
    w = np.zeros(d)
    b = 0.0
    for _ in range(epochs):
        for i in rng.permutation(n):
            residual = X[i] @ w + b - targets[i]
            w -= learning_rate * residual * X[i]
            b -= learning_rate * residual
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("SGD diverged, lower the learning rate (%s)" % learning_rate)
    return w, float(b)


def linear_scores(weights, bias, X):
    return X @ weights + bias
