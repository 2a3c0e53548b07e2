"""
The k-fold experiment: balance, split, and per fold train a cGAN on the real training folds R,
synthesize S (sized like R) and s (class counts of the real evaluation fold r), train every
enabled classifier on R and on S and evaluate

    TSTR: trained on S, tested on r
    TRTS: trained on R, tested on s
    TRTR: trained on R, tested on r (baseline)

followed by aggregation over folds and the rank tests pairing the protocols fold by fold.
"""
import enum
import logging
import os
import time
import traceback
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

import cgan
import seeding
from analyze import METRICS, fidelity_report, utility, utility_from_confusion
from cgan import CganConfig
from classifiers import ClassifierKind, ClassifierParams, predict_scores, train_classifier
from datasets import (balance_by_undersampling, chi_square_select, load_csv, min_max_normalize, stratified_kfold,
                      write_csv)
from datasets.toy import make_toy_dataset
from resources import ResourceMonitor
from stats import aggregate_p, mann_whitney_u, wilcoxon_signed_rank
from weights import weights_digest

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TOOL_VERSION = 'synthmal 0.1.0'
HEADLINE_PAIRING = ('TSTR', 'TRTR')
SECONDARY_PAIRING = ('TSTR', 'TRTS')


class Protocol(enum.Enum):
    TSTR = 'TSTR'
    TRTS = 'TRTS'
    TRTR = 'TRTR'


@dataclass
class DatasetConfig:
    path: str = None
    label_column: str = 'class'
    positive_label: str = '1'
    select_features: int = None
    toy: bool = False
    toy_rows_per_class: int = 2000
    toy_num_features: int = 16

    def validate(self):
        if not self.toy and not self.path:
            raise ValueError("dataset.path is required unless dataset.toy is set")
        if self.select_features is not None and self.select_features < 1:
            raise ValueError("dataset.select_features must be positive, got %s" % self.select_features)
        if self.toy and (self.toy_rows_per_class < 1 or self.toy_num_features < 1):
            raise ValueError("toy dataset sizes must be positive")
        return self


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    k: int = 10
    cgan: CganConfig = field(default_factory=CganConfig)
    classifiers: ClassifierParams = field(default_factory=ClassifierParams)
    enabled_classifiers: tuple = ('svm', 'tree', 'gbt', 'sgd')
    protocols: tuple = ('TSTR', 'TRTS', 'TRTR')
    master_seed: int = 0
    binarize_synthetic: bool = False
    export_artifacts: bool = False
    workers: int = 1

    def validate(self):
        self.dataset.validate()
        self.cgan.validate()
        self.classifiers.validate()
        if self.k < 2:
            raise ValueError("k must be at least 2, got %s" % self.k)
        if not self.enabled_classifiers:
            raise ValueError("at least one classifier must be enabled")
        if not self.protocols:
            raise ValueError("at least one protocol must be enabled")
        for kind in self.enabled_classifiers:
            ClassifierKind(kind)
        for protocol in self.protocols:
            Protocol(protocol)
        if len(set(self.enabled_classifiers)) != len(self.enabled_classifiers) or \
                len(set(self.protocols)) != len(self.protocols):
            raise ValueError("classifiers and protocols must not repeat")
        if self.workers < 1:
            raise ValueError("workers must be at least 1, got %s" % self.workers)
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer, got %s" % self.master_seed)
        return self

    def to_dict(self):
        d = asdict(self)
        d['enabled_classifiers'] = list(self.enabled_classifiers)
        d['protocols'] = list(self.protocols)
        return d

    def echo(self):
        """The config as recorded in the report; `workers` only affects scheduling and is left out."""
        d = self.to_dict()
        del d['workers']
        return d


@dataclass(frozen=True)
class EvaluationRecord:
    fold: int
    classifier: str
    protocol: str
    confusion: object
    metrics: object

    def __post_init__(self):
        accuracy, precision, recall, f1, _ = utility_from_confusion(self.confusion)
        assert (accuracy, precision, recall, f1) == (self.metrics.accuracy, self.metrics.precision,
                                                     self.metrics.recall, self.metrics.f1), \
            "metrics inconsistent with the confusion matrix"

    def to_dict(self):
        d = {'fold': self.fold, 'classifier': self.classifier, 'protocol': self.protocol}
        d.update(self.confusion.to_dict())
        d.update(self.metrics.to_dict())
        return d


@dataclass
class FoldResult:
    fold: int
    records: list = field(default_factory=list)
    fidelity: list = field(default_factory=list)
    train_log: object = None
    timings: dict = field(default_factory=dict)
    error: dict = None

    @property
    def complete(self):
        return self.error is None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    dataset_summary: dict
    balance: object
    fold_plan: object
    selected_features: list
    folds: list
    aggregates: pd.DataFrame
    stats: dict
    resources: object
    timings: dict

    @property
    def records(self):
        return [record for fold in self.folds for record in fold.records]

    @property
    def incomplete_folds(self):
        return [dict(fold=fold.fold, **fold.error) for fold in self.folds if not fold.complete]

    def deterministic_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'tool_version': TOOL_VERSION,
            'config': self.config.echo(),
            'dataset': self.dataset_summary,
            'balance': self.balance.to_dict(),
            'fold_sizes': [int(size) for size in self.fold_plan.fold_sizes()],
            'selected_features': self.selected_features,
            'normalization': 'per-training-fold',
            'std': 'population',
            'folds': [record.to_dict() for record in self.records],
            'fidelity': [dict(fold=fold.fold, **metrics.to_dict()) for fold in self.folds for metrics in fold.fidelity],
            'stats': self.stats,
            'aggregates': self.aggregates.to_dict(orient='records'),
            'incomplete_folds': self.incomplete_folds,
        }

    def to_dict(self):
        d = self.deterministic_dict()
        d['resources'] = dict(self.resources.to_dict(), workers=self.config.workers, timings=self.timings)
        return d


def load_dataset(dataset_config, seed):
    if dataset_config.toy:
        return make_toy_dataset(seed, rows_per_class=dataset_config.toy_rows_per_class,
                                num_features=dataset_config.toy_num_features)
    return load_csv(dataset_config.path, label_column=dataset_config.label_column,
                    positive_label=dataset_config.positive_label)


def _evaluate(fold, kind, protocol, model, test_set, artifact_directory):
    scores = predict_scores(model, test_set.features)
    confusion, metrics, curve = utility(test_set.labels, scores, model.threshold)
    if artifact_directory is not None:
        curve.to_csv(os.path.join(artifact_directory, 'roc_%s_%s.csv' % (kind, protocol)))
    return EvaluationRecord(fold, kind, protocol, confusion, metrics)


def run_fold(config, dataset, plan, fold, out_dir=None):
    """
    One fold of the pipeline. Errors are caught and returned as an incomplete FoldResult
    naming the stage that failed.
    """
    result = FoldResult(fold)
    stage = 'split'
    started = time.perf_counter()
    try:
        fold_seed = seeding.derive_seed(config.master_seed, fold)
        train_indices, eval_indices = plan.train_indices(fold), plan.eval_indices(fold)
        assert len(np.intersect1d(train_indices, eval_indices)) == 0, "fold %d: evaluation rows used in training" % fold
        real_train, real_eval = dataset.subset(train_indices), dataset.subset(eval_indices)

        stage = 'normalize'
        real_train, bounds = min_max_normalize(real_train)
        real_eval, _ = min_max_normalize(real_eval, bounds)

        stage = 'cgan'
        logger.info("Fold %d: training cGAN on %d rows", fold, real_train.num_rows)
        model = cgan.build(replace(config.cgan, seed=fold_seed), real_train.num_features, real_train.feature_names)
        model, result.train_log = cgan.train(model, real_train)
        result.timings['cgan_train_s'] = time.perf_counter() - started

        stage = 'generate'
        synth_train = cgan.generate(model, real_train.class_counts(),
                                    seeding.generator(fold_seed, seeding.GENERATE_TRAIN))
        digest = weights_digest(model.parameters())
        synth_eval = cgan.synthesize_eval(model, real_eval, seeding.generator(fold_seed, seeding.GENERATE_EVAL))
        assert weights_digest(model.parameters()) == digest, "synthesizing s changed the model"
        if config.binarize_synthetic:
            synth_train, synth_eval = cgan.binarize(synth_train), cgan.binarize(synth_eval)

        artifact_directory = None
        if config.export_artifacts and out_dir is not None:
            artifact_directory = os.path.join(out_dir, 'artifacts', 'fold_%02d' % fold)
            write_csv(synth_train, os.path.join(artifact_directory, 'S.csv'))
            write_csv(synth_eval, os.path.join(artifact_directory, 's.csv'))
            cgan.save_model(model, os.path.join(artifact_directory, 'cgan.h5'))

        stage = 'classifiers'
        classifiers_started = time.perf_counter()
        protocols = list(config.protocols)
        for index, kind in enumerate(config.enabled_classifiers):
            seed = seeding.derive_seed(fold_seed, seeding.CLASSIFIER, index)
            real_model = train_classifier(kind, real_train, config.classifiers, seed) \
                if {'TRTS', 'TRTR'} & set(protocols) else None
            synth_model = train_classifier(kind, synth_train, config.classifiers, seed) \
                if 'TSTR' in protocols else None
            setups = {'TSTR': (synth_model, real_eval), 'TRTS': (real_model, synth_eval),
                      'TRTR': (real_model, real_eval)}
            for protocol in protocols:
                trained, test_set = setups[protocol]
                result.records.append(_evaluate(fold, kind, protocol, trained, test_set, artifact_directory))
        result.timings['classifiers_s'] = time.perf_counter() - classifiers_started

        stage = 'fidelity'
        result.fidelity = fidelity_report(real_eval, synth_eval)
    except Exception as e:
        logger.error("Fold %d failed during %s: %s", fold, stage, e)
        logger.debug(traceback.format_exc())
        result.records, result.fidelity = [], []
        result.error = {'stage': stage, 'message': "%s: %s" % (type(e).__name__, e)}
    result.timings['total_s'] = time.perf_counter() - started
    return result


def records_frame(records):
    """Long format: one row per (fold, classifier, protocol, metric)."""
    return pd.DataFrame([{'fold': record.fold, 'classifier': record.classifier, 'protocol': record.protocol,
                          'metric': metric, 'value': float(record.metrics[metric])}
                         for record in records for metric in METRICS],
                        columns=['fold', 'classifier', 'protocol', 'metric', 'value'])


def aggregate(records):
    """
    Mean, population standard deviation, min, max and count per (classifier, protocol, metric).
    """
    if not records:
        raise ValueError("no records to aggregate")
    frame = records_frame(records)
    grouped = frame.groupby(['classifier', 'protocol', 'metric'], sort=False)['value']
    aggregates = grouped.agg(mean='mean', std=lambda values: float(np.std(values.to_numpy())),
                             min='min', max='max', count='count').reset_index()
    aggregates['count'] = aggregates['count'].astype(int)
    return aggregates


def _paired_values(records, classifier, protocol):
    return {record.fold: record.metrics for record in records
            if record.classifier == classifier and record.protocol == protocol}


def compare_protocols(records, classifier, first, second):
    """
    Per metric, Wilcoxon signed-rank on fold-aligned pairs and Mann-Whitney U on the two samples,
    plus the mean p-value of each test over the metrics.
    :return: None if no fold has both protocols
    """
    first_values = _paired_values(records, classifier, first)
    second_values = _paired_values(records, classifier, second)
    folds = sorted(set(first_values) & set(second_values))
    if not folds:
        return None
    comparison = {'folds': folds, 'wilcoxon': {}, 'mann_whitney': {}}
    for metric in METRICS:
        a = [first_values[fold][metric] for fold in folds]
        b = [second_values[fold][metric] for fold in folds]
        comparison['wilcoxon'][metric] = wilcoxon_signed_rank(a, b).to_dict()
        comparison['mann_whitney'][metric] = mann_whitney_u(a, b).to_dict()
    for test in ('wilcoxon', 'mann_whitney'):
        mean_p, reject = aggregate_p([result['p_value'] for result in comparison[test].values()])
        comparison['mean_p_' + test] = mean_p
        comparison['reject_h0_' + test] = reject
    return comparison


def protocol_statistics(records, classifiers, protocols):
    """
    {'headline', 'wilcoxon', 'mann_whitney', 'mean_p'}, each keyed by pairing name ('TSTR_vs_TRTR') then classifier.
    """
    stats = {'headline': '%s_vs_%s' % HEADLINE_PAIRING, 'wilcoxon': {}, 'mann_whitney': {}, 'mean_p': {}}
    for first, second in (HEADLINE_PAIRING, SECONDARY_PAIRING):
        if first not in protocols or second not in protocols:
            continue
        pairing = '%s_vs_%s' % (first, second)
        for test in ('wilcoxon', 'mann_whitney', 'mean_p'):
            stats[test][pairing] = {}
        for classifier in classifiers:
            comparison = compare_protocols(records, classifier, first, second)
            if comparison is None:
                continue
            stats['wilcoxon'][pairing][classifier] = comparison['wilcoxon']
            stats['mann_whitney'][pairing][classifier] = comparison['mann_whitney']
            stats['mean_p'][pairing][classifier] = {
                'wilcoxon': comparison['mean_p_wilcoxon'], 'mann_whitney': comparison['mean_p_mann_whitney'],
                'reject_h0': comparison['reject_h0_wilcoxon'], 'folds': comparison['folds']}
    return stats


def run_experiment(config, out_dir=None):
    config.validate()
    started = time.perf_counter()
    monitor = ResourceMonitor().start()
    dataset = load_dataset(config.dataset, config.master_seed)
    dataset, balance = balance_by_undersampling(dataset, config.master_seed)
    selected = None
    if config.dataset.select_features is not None:
        normalized, _ = min_max_normalize(dataset)
        _, selected = chi_square_select(normalized, config.dataset.select_features)
        dataset = dataset.select_columns(selected)
        logger.info("Selected %d features by chi-square", len(selected))
    plan = stratified_kfold(dataset, config.k, config.master_seed)
    logger.info("Running %d folds on %d rows with %d worker(s)", config.k, dataset.num_rows, config.workers)
    folds = Parallel(n_jobs=config.workers)(
        delayed(run_fold)(config, dataset, plan, fold, out_dir) for fold in range(config.k))
    folds = sorted(folds, key=lambda result: result.fold)
    incomplete = [fold.fold for fold in folds if not fold.complete]
    if incomplete:
        logger.warning("Incomplete folds: %s", incomplete)
    records = [record for fold in folds for record in fold.records]
    if not records:
        monitor.stop()
        raise RuntimeError("every fold failed: %s" % "; ".join(
            "fold %d (%s): %s" % (fold.fold, fold.error['stage'], fold.error['message']) for fold in folds))
    aggregates = aggregate(records)
    assert np.all((aggregates['mean'] >= aggregates['min'] - 1e-12) & (aggregates['mean'] <= aggregates['max'] + 1e-12))
    stats = protocol_statistics(records, list(config.enabled_classifiers), list(config.protocols))
    resources = monitor.stop()
    timings = {'total_s': time.perf_counter() - started,
               'folds': [dict(fold=fold.fold, **fold.timings) for fold in folds]}
    summary = {'rows': dataset.num_rows, 'features': dataset.num_features,
               'class_counts': {str(label): count for label, count in dataset.class_counts().items()}}
    return ExperimentReport(config, summary, balance, plan, selected, folds, aggregates, stats, resources, timings)
