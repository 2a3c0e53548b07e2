"""
Conditional GAN over tabular rows in [0,1].

Generator:     [noise | embedding(label)] -> blocks x (Dense, LeakyReLU, Dropout) -> Dense(d) -> sigmoid
Discriminator: [row   | embedding(label)] -> blocks x (Dense, LeakyReLU, Dropout) -> Dense(1) -> sigmoid
"""
import logging
import os
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

import seeding
from datasets import LabeledDataset, Origin, feature_names as default_feature_names
from net import (AdamState, ConditionalNetwork, EmbeddingTable, adam_step, bce_loss, block_network, gaussian_init,
                 moment_loss)
from weights import dump_weights, load_weights

logger = logging.getLogger(__name__)

# keeps generated values strictly inside (0,1) when the output sigmoid saturates in float64
OUTPUT_MARGIN = 1e-12


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


@dataclass
class CganConfig:
    epochs: int = 1000
    batch_size: int = 256
    gen_neurons: int = 1024
    disc_neurons: int = 512
    gen_dropout: float = 0.2
    disc_dropout: float = 0.4
    init_stddev: float = 0.5
    latent_dim: int = 128
    embed_dim: int = 32
    seed: int = 0
    blocks: int = 2
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    leaky_slope: float = 0.2
    # weight of the per-class moment term in the generator loss, 0 trains on BCE alone
    moment_weight: float = 0.0

    def validate(self):
        problems = []
        if self.epochs < 1:
            problems.append("epochs must be at least 1, got %s" % self.epochs)
        if self.batch_size < 2:
            problems.append("batch_size must be at least 2, got %s" % self.batch_size)
        for name in ('gen_neurons', 'disc_neurons', 'latent_dim', 'embed_dim', 'blocks'):
            if getattr(self, name) < 1:
                problems.append("%s must be at least 1, got %s" % (name, getattr(self, name)))
        for name in ('gen_dropout', 'disc_dropout'):
            if not 0 <= getattr(self, name) < 1:
                problems.append("%s must be in [0,1), got %s" % (name, getattr(self, name)))
        if self.init_stddev <= 0 or self.learning_rate <= 0:
            problems.append("init_stddev and learning_rate must be positive")
        if not 0 < self.leaky_slope < 1:
            problems.append("leaky_slope must be in (0,1), got %s" % self.leaky_slope)
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            problems.append("beta1 and beta2 must be in [0,1)")
        if self.moment_weight < 0:
            problems.append("moment_weight must be non-negative, got %s" % self.moment_weight)
        if problems:
            raise ValueError("invalid cGAN config: " + "; ".join(problems))
        return self

    @property
    def effective_embed_dim(self):
        return min(self.embed_dim, self.gen_neurons)


@dataclass(eq=False)
class CganModel:
    config: CganConfig
    feature_count: int
    feature_names: tuple
    generator: ConditionalNetwork
    discriminator: ConditionalNetwork

    def parameters(self):
        return OrderedDict([('generator', self.generator.params), ('discriminator', self.discriminator.params)])


@dataclass
class TrainLog:
    g_loss: list = field(default_factory=list)
    d_loss: list = field(default_factory=list)
    ms: list = field(default_factory=list)

    def to_frame(self):
        return pd.DataFrame({'epoch': np.arange(1, len(self.g_loss) + 1),
                             'g_loss': self.g_loss, 'd_loss': self.d_loss, 'ms': self.ms})

    def to_csv(self, filepath):
        os.makedirs(os.path.dirname(filepath) or '.', exist_ok=True)
        self.to_frame().to_csv(filepath, index=False)


def build(config, feature_count, feature_names=None):
    config.validate()
    if feature_count < 1:
        raise ValueError("feature_count must be at least 1, got %s" % feature_count)
    feature_names = tuple(feature_names) if feature_names is not None else tuple(default_feature_names(feature_count))
    if len(feature_names) != feature_count:
        raise ValueError("%d feature names for %d features" % (len(feature_names), feature_count))
    rng = seeding.generator(config.seed, seeding.CGAN_INIT)
    embed_dim = config.effective_embed_dim
    generator = ConditionalNetwork(
        EmbeddingTable(gaussian_init((2, embed_dim), config.init_stddev, rng)),
        block_network(config.latent_dim + embed_dim, config.gen_neurons, config.blocks, feature_count,
                      config.gen_dropout, config.init_stddev, rng, slope=config.leaky_slope))
    discriminator = ConditionalNetwork(
        EmbeddingTable(gaussian_init((2, embed_dim), config.init_stddev, rng)),
        block_network(feature_count + embed_dim, config.disc_neurons, config.blocks, 1,
                      config.disc_dropout, config.init_stddev, rng, slope=config.leaky_slope))
    return CganModel(config, int(feature_count), feature_names, generator, discriminator)


def class_moments(dataset):
    """Column means and standard deviations of every class present in `dataset`."""
    return {label: (dataset.features[dataset.labels == label].mean(axis=0),
                    dataset.features[dataset.labels == label].std(axis=0))
            for label, count in dataset.class_counts().items() if count > 0}


def _moment_term(fake, labels, moments, weight):
    """Per-class moment loss of generated rows, weighted by class share of the batch."""
    loss, grad = 0.0, np.zeros_like(fake)
    for label, (mean, std) in moments.items():
        rows = labels == label
        if rows.any():
            share = rows.sum() / len(labels)
            class_loss, class_grad = moment_loss(fake[rows], mean, std)
            loss += weight * share * class_loss
            grad[rows] = weight * share * class_grad
    return loss, grad


def _train_step(model, real, labels, d_state, g_state, rng, moments=None, moment_weight=0.0):
    generator, discriminator = model.generator, model.discriminator
    latent_dim = model.config.latent_dim
    size = len(labels)
    # (1) discriminator: real rows -> 1, generated rows with the same labels -> 0
    fake = generator.forward(rng.normal(size=(size, latent_dim)), labels, training=True, rng=rng)
    real_loss, grad = bce_loss(discriminator.forward(real, labels, training=True, rng=rng), 1.0)
    discriminator.backward(grad)
    real_grads = OrderedDict((name, g.copy()) for name, g in discriminator.grads.items())
    fake_loss, grad = bce_loss(discriminator.forward(fake, labels, training=True, rng=rng), 0.0)
    discriminator.backward(grad)
    d_grads = OrderedDict((name, 0.5 * (real_grads[name] + g)) for name, g in discriminator.grads.items())
    adam_step(discriminator.params, d_grads, d_state)
    # (2) generator: fresh rows should be scored as real and match the class moments of R
    fake = generator.forward(rng.normal(size=(size, latent_dim)), labels, training=True, rng=rng)
    g_loss, grad = bce_loss(discriminator.forward(fake, labels, training=True, rng=rng), 1.0)
    fake_grad = discriminator.backward(grad)
    if moments:
        moment, moment_grad = _moment_term(fake, labels, moments, moment_weight)
        g_loss += moment
        fake_grad = fake_grad + moment_grad
    generator.backward(fake_grad)
    adam_step(generator.params, generator.grads, g_state)
    return 0.5 * (real_loss + fake_loss), g_loss


def train(model, real_train, config=None, rng=None):
    """
    Adversarial training on R: per batch one discriminator update followed by one generator update,
    `epochs` passes over R in seeded shuffled order. With `moment_weight` > 0 the generator
    loss also carries the gap between the generated and real per-class column moments.
    :return: the trained model (updated in place) and its TrainLog
    """
    config = (config or model.config).validate()
    rng = rng if rng is not None else seeding.generator(config.seed, seeding.CGAN_TRAIN)
    counts = real_train.class_counts()
    if real_train.num_rows == 0 or min(counts.values()) == 0:
        raise TrainingError("training data needs both classes, got %s" % counts)
    if real_train.num_features != model.feature_count:
        raise ValueError("model expects %d features, data has %d" % (model.feature_count, real_train.num_features))
    d_state = AdamState(config.learning_rate, config.beta1, config.beta2)
    g_state = AdamState(config.learning_rate, config.beta1, config.beta2)
    features, labels = real_train.features, real_train.labels
    moments = class_moments(real_train) if config.moment_weight > 0 else None
    log = TrainLog()
    report_every = max(1, config.epochs // 10)
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(real_train.num_rows)
        d_losses, g_losses = [], []
        for begin in range(0, len(order), config.batch_size):
            batch = order[begin:begin + config.batch_size]
            d_loss, g_loss = _train_step(model, features[batch], labels[batch], d_state, g_state, rng,
                                          moments, config.moment_weight)
            d_losses.append(d_loss)
            g_losses.append(g_loss)
        d_loss, g_loss = float(np.mean(d_losses)), float(np.mean(g_losses))
        if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
            raise TrainingError("non-finite loss in epoch %d (d=%s, g=%s)" % (epoch, d_loss, g_loss), epoch=epoch)
        log.d_loss.append(d_loss)
        log.g_loss.append(g_loss)
        log.ms.append((time.perf_counter() - start) * 1000)
        if epoch % report_every == 0:
            logger.debug("Epoch %d/%d: d_loss %.4f, g_loss %.4f", epoch, config.epochs, d_loss, g_loss)
    return model, log


def generate(model, count_per_class, rng):
    """
    Class-conditional sampling: for every class draw latent noise and run the generator in inference mode.
    """
    rows, labels = [], []
    for label in sorted(count_per_class):
        count = int(count_per_class[label])
        if count < 0:
            raise ValueError("negative count %d for class %s" % (count, label))
        if label not in (0, 1):
            raise ValueError("unknown class %s" % label)
        if count == 0:
            continue
        class_labels = np.full(count, label, dtype=np.int64)
        noise = rng.normal(size=(count, model.config.latent_dim))
        rows.append(model.generator.forward(noise, class_labels, training=False))
        labels.append(class_labels)
    if not rows:
        return LabeledDataset(np.zeros((0, model.feature_count)), np.zeros(0, dtype=np.int64),
                              model.feature_names, Origin.SYNTHETIC)
    features = np.clip(np.concatenate(rows), OUTPUT_MARGIN, 1 - OUTPUT_MARGIN)
    return LabeledDataset(features, np.concatenate(labels), model.feature_names, Origin.SYNTHETIC)


def synthesize_eval(model, real_eval, rng):
    """
    s: a synthetic set with the per-class counts of r. Only the counts of r are read.
    """
    if real_eval.num_rows == 0:
        raise ValueError("the evaluation set is empty")
    counts = {label: count for label, count in real_eval.class_counts().items() if count > 0}
    return generate(model, counts, rng)


def binarize(dataset, threshold=0.5):
    """Map values >= threshold to 1 and the rest to 0."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0,1), got %s" % threshold)
    return dataset.replace_features((dataset.features >= threshold).astype(np.float64))


def save_model(model, filepath):
    manifest = {'format': 'cgan', 'feature_count': model.feature_count,
                'feature_names': list(model.feature_names), 'config': asdict(model.config)}
    dump_weights(model.parameters(), filepath, manifest)


def load_model(filepath):
    stored, manifest = load_weights(filepath)
    if manifest.get('format') != 'cgan':
        raise ValueError("%s does not hold a cGAN" % filepath)
    model = build(CganConfig(**manifest['config']), manifest['feature_count'], manifest['feature_names'])
    for group, params in model.parameters().items():
        if list(stored[group].keys()) != list(params.keys()):
            raise ValueError("parameters of %s in %s do not match the architecture" % (group, filepath))
        for name, value in params.items():
            value[...] = stored[group][name]
    return model
