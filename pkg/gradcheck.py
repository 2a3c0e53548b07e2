"""
Finite-difference check of the hand-written backpropagation on small randomized cGAN instances.

Both losses are evaluated exactly as in one training step, dropout included: every evaluation
draws its dropout masks from a fresh generator with the same seed, so the perturbed forward
passes see identical masks. Inputs are redrawn until no LeakyReLU pre-activation is within
KINK_MARGIN of 0, where the central difference would straddle the kink.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

import cgan
import seeding
from net import bce_loss, finite_difference_check

logger = logging.getLogger(__name__)

NUM_FEATURES = 8
BATCH_SIZE = 16
TOLERANCE = 1e-4
KINK_MARGIN = 1e-3
MAX_RESAMPLES = 100


def __flip_sign(grads):
    return OrderedDict((name, -grad) for name, grad in grads.items())


faults = {None: lambda grads: grads, 'sign_flip': __flip_sign}


@dataclass(frozen=True)
class GradcheckResult:
    seed: int
    generator_error: float
    discriminator_error: float
    resamples: int

    @property
    def max_error(self):
        return max(self.generator_error, self.discriminator_error)

    @property
    def passed(self):
        return self.max_error < TOLERANCE


def small_model(seed):
    config = cgan.CganConfig(latent_dim=4, embed_dim=2, gen_neurons=8, disc_neurons=8, gen_dropout=0.1,
                             disc_dropout=0.1, init_stddev=0.5, seed=seed)
    return cgan.build(config, NUM_FEATURES)


def generator_loss(model, noise, labels, dropout_seed, fault=faults[None]):
    """BCE(D(G(z, y), y), 1) and its gradients with respect to the generator parameters."""

    def loss_and_grads():
        fake = model.generator.forward(noise, labels, training=True, rng=seeding.generator(dropout_seed, 0))
        pred = model.discriminator.forward(fake, labels, training=True, rng=seeding.generator(dropout_seed, 1))
        loss, grad = bce_loss(pred, 1.0)
        model.generator.backward(model.discriminator.backward(grad))
        return loss, fault(model.generator.grads)

    return loss_and_grads


def discriminator_loss(model, real, fake, labels, dropout_seed, fault=faults[None]):
    """(BCE(D(x, y), 1) + BCE(D(G(z, y), y), 0)) / 2 with gradients with respect to the discriminator parameters."""
    discriminator = model.discriminator

    def loss_and_grads():
        real_loss, grad = bce_loss(discriminator.forward(real, labels, training=True,
                                                         rng=seeding.generator(dropout_seed, 2)), 1.0)
        discriminator.backward(grad)
        real_grads = OrderedDict((name, g.copy()) for name, g in discriminator.grads.items())
        fake_loss, grad = bce_loss(discriminator.forward(fake, labels, training=True,
                                                         rng=seeding.generator(dropout_seed, 3)), 0.0)
        discriminator.backward(grad)
        grads = OrderedDict((name, 0.5 * (real_grads[name] + g)) for name, g in discriminator.grads.items())
        return 0.5 * (real_loss + fake_loss), fault(grads)

    return loss_and_grads


def _draw_inputs(model, rng, dropout_seed):
    noise = rng.normal(size=(BATCH_SIZE, model.config.latent_dim))
    labels = rng.integers(0, 2, size=BATCH_SIZE)
    real = rng.random((BATCH_SIZE, NUM_FEATURES))
    fake = model.generator.forward(noise, labels, training=True, rng=seeding.generator(dropout_seed, 0))
    kink = model.generator.kink_distance()
    model.discriminator.forward(fake, labels, training=True, rng=seeding.generator(dropout_seed, 1))
    kink = min(kink, model.discriminator.kink_distance())
    model.discriminator.forward(real, labels, training=True, rng=seeding.generator(dropout_seed, 2))
    kink = min(kink, model.discriminator.kink_distance())
    model.discriminator.forward(fake, labels, training=True, rng=seeding.generator(dropout_seed, 3))
    kink = min(kink, model.discriminator.kink_distance())
    return noise, labels, real, fake, kink


def run_gradcheck(seed, fault=None, eps=1e-6):
    model = small_model(seed)
    rng = seeding.generator(seed, 0)
    for resamples in range(MAX_RESAMPLES):
        dropout_seed = seeding.derive_seed(seed, 1, resamples)
        noise, labels, real, fake, kink = _draw_inputs(model, rng, dropout_seed)
        if kink >= KINK_MARGIN:
            break
    else:
        raise RuntimeError("no input away from the LeakyReLU kink after %d draws" % MAX_RESAMPLES)
    inject = faults[fault]
    generator_error = finite_difference_check(generator_loss(model, noise, labels, dropout_seed, inject),
                                              model.generator.params, eps=eps)
    discriminator_error = finite_difference_check(
        discriminator_loss(model, real, fake, labels, dropout_seed, inject), model.discriminator.params, eps=eps)
    result = GradcheckResult(int(seed), generator_error, discriminator_error, resamples)
    logger.info("Gradient check with seed %d: generator %.3e, discriminator %.3e",
                seed, generator_error, discriminator_error)
    return result
