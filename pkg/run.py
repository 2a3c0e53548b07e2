import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd

import seeding
from bench import run_experiment
from clustering import ClusteringError, choose_k, kmeans, pca_2d
from config import ConfigError, dump_config, load_config
from datasets import DatasetError, chi_square_scores, load_csv, min_max_normalize, write_csv
from datasets.toy import make_planted_clusters, make_toy_dataset
from gradcheck import TOLERANCE, run_gradcheck
from plot import plot_clusters, plot_heatmap, plot_training_curve, plot_utility
from results import get_results_filepath, training_log_filepath, write_all

logger = logging.getLogger(__name__)

OUT_DIR_VARIABLE = 'SYNTHMAL_OUT_DIR'


def _list(value):
    return [v.strip() for v in value.split(',') if v.strip()]


def _cluster_count(value):
    if value == 'auto':
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number of clusters or 'auto', got %r" % value)


def _apply_overrides(config, args):
    if args.seed is not None:
        config.master_seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    if args.protocols is not None:
        config.protocols = tuple(p.upper() for p in _list(args.protocols))
    if args.classifiers is not None:
        config.enabled_classifiers = tuple(_list(args.classifiers))
    if args.binarize:
        config.binarize_synthetic = True
    if args.export_artifacts:
        config.export_artifacts = True
    if args.dataset is not None:
        config.dataset.path = args.dataset
        config.dataset.toy = False
    try:
        return config.validate()
    except ValueError as e:
        raise ConfigError(str(e))


def cmd_run(args):
    config = _apply_overrides(load_config(args.config, args.preset), args)
    out_dir = args.out
    print("Running %d-fold experiment, writing to %s" % (config.k, out_dir))
    report = run_experiment(config, out_dir)
    for filepath in write_all(report, out_dir):
        logger.info("Wrote %s", filepath)
    dump_config(config, get_results_filepath('config.yaml', out_dir))
    plot_heatmap(report.aggregates, get_results_filepath('heatmap.svg', out_dir))
    plot_utility(report.aggregates, get_results_filepath('utility.svg', out_dir))
    for fold in report.folds:
        if fold.train_log is not None:
            plot_training_curve(fold.train_log, training_log_filepath(fold.fold, out_dir, extension='.svg'))
    headline = report.stats['mean_p'].get(report.stats['headline'], {})
    for classifier, p in headline.items():
        print("%s: mean Wilcoxon p %.4f (%s H0)" % (classifier, p['wilcoxon'],
                                                    'reject' if p['reject_h0'] else 'accept'))
    if report.incomplete_folds:
        print("Incomplete folds: %s" % ", ".join(str(f['fold']) for f in report.incomplete_folds))
    return 0


def cmd_inspect(args):
    dataset = load_csv(args.dataset, label_column=args.label_column, positive_label=args.positive_label)
    counts = dataset.class_counts()
    print("%s: %d rows, %d features" % (args.dataset, dataset.num_rows, dataset.num_features))
    print("class counts: benign %d, malware %d" % (counts[0], counts[1]))
    low, high = dataset.features.min(axis=0), dataset.features.max(axis=0)
    print(pd.DataFrame({'min': low, 'max': high}, index=list(dataset.feature_names)).to_string())
    constant = [name for name, column_low, column_high in zip(dataset.feature_names, low, high)
                if column_low == column_high]
    print("constant columns: %s" % (", ".join(constant) if constant else "none"))
    if min(counts.values()) > 0 and args.top > 0:
        scores = chi_square_scores(min_max_normalize(dataset)[0])
        ranking = np.lexsort((np.arange(dataset.num_features), -scores))[:args.top]
        print("top %d features by chi-square:" % len(ranking))
        for rank, column in enumerate(ranking, start=1):
            print("%3d. %s %.4f" % (rank, dataset.feature_names[column], scores[column]))
    return 0


def cmd_cluster(args):
    dataset = load_csv(args.dataset, label_column=args.label_column, positive_label=args.positive_label)
    malware = dataset.class_block(1)
    if len(malware) < 2:
        raise DatasetError("clustering needs at least 2 malware rows, got %d" % len(malware))
    projection = pca_2d(malware)
    if args.k == 'auto':
        choice = choose_k(projection.points, range(1, args.max_k + 1), seed=seeding.derive_seed(args.seed, 1))
        k = choice.k
        print("chose k=%d, inertia by k: %s" % (k, ", ".join("%d: %.4g" % item for item in choice.inertias.items())))
    else:
        k = args.k
    clustering = kmeans(projection.points, k, seeding.generator(args.seed, seeding.CLUSTERING))
    out_dir = args.out
    plot_clusters(projection.points, clustering, get_results_filepath('clusters.svg', out_dir))
    print("cluster  size")
    for cluster, size in enumerate(clustering.sizes(), start=1):
        print("%7d  %4d" % (cluster, size))
    print("explained variance: %.4g, %.4g" % tuple(projection.explained_variance))
    return 0


def cmd_gradcheck(args):
    seeds = range(args.seed, args.seed + args.repeats)
    passed = True
    for seed in seeds:
        result = run_gradcheck(seed, fault=args.inject_fault)
        print("seed %d: max relative error %.3e (generator %.3e, discriminator %.3e) %s" % (
            seed, result.max_error, result.generator_error, result.discriminator_error,
            'pass' if result.passed else 'FAIL'))
        passed &= result.passed
    print("gradient check %s (tolerance %g)" % ('passed' if passed else 'failed', TOLERANCE))
    return 0 if passed else 1


def cmd_toy(args):
    if args.clusters:
        dataset, _ = make_planted_clusters(args.seed)
    else:
        dataset = make_toy_dataset(args.seed, rows_per_class=args.rows_per_class, num_features=args.num_features)
    filepath = args.output or get_results_filepath('toy.csv', args.out)
    write_csv(dataset, filepath)
    print("Wrote %d rows to %s" % (dataset.num_rows, filepath))
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', action='store_true', help='log debug messages')
    common.add_argument('--out', type=str, default=os.environ.get(OUT_DIR_VARIABLE, 'results'),
                        help='The directory all outputs are written to (default: $%s or results)' % OUT_DIR_VARIABLE)
    parser = argparse.ArgumentParser(description='Synthetic tabular malware data - generation and evaluation')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    run = subparsers.add_parser('run', help='run the k-fold TSTR/TRTS/TRTR experiment', parents=[common])
    run.add_argument('--config', type=str, default=None, help='YAML experiment config')
    run.add_argument('--preset', type=str, default=None, help='hyperparameter preset, e.g. drebin or toy')
    run.add_argument('--dataset', type=str, default=None, help='dataset CSV, overrides the config')
    run.add_argument('--seed', type=int, default=None, help='master seed')
    run.add_argument('--workers', type=int, default=None, help='folds to run concurrently')
    run.add_argument('--protocols', type=str, default=None, help='comma-separated subset of TSTR,TRTS,TRTR')
    run.add_argument('--classifiers', type=str, default=None, help='comma-separated subset of svm,tree,gbt,sgd')
    run.add_argument('--binarize', action='store_true', help='round synthetic values to 0/1')
    run.add_argument('--export-artifacts', action='store_true',
                     help='write S, s, the trained cGAN and ROC curves of every fold')
    run.set_defaults(func=cmd_run)

    for name, func, description in (('inspect', cmd_inspect, 'summarize a dataset CSV'),
                                    ('cluster', cmd_cluster, 'PCA + k-means scatter of the malware rows')):
        sub = subparsers.add_parser(name, help=description, parents=[common])
        sub.add_argument('dataset', type=str, help='dataset CSV')
        sub.add_argument('--label-column', type=str, default='class')
        sub.add_argument('--positive-label', type=str, default='1')
        sub.set_defaults(func=func)
        if name == 'inspect':
            sub.add_argument('--top', type=int, default=10, help='features to list by chi-square score')
        else:
            sub.add_argument('--k', type=_cluster_count, default='auto', help="number of clusters or 'auto'")
            sub.add_argument('--max-k', type=int, default=8, help="largest k tried with --k auto")
            sub.add_argument('--seed', type=int, default=0)

    gradcheck = subparsers.add_parser('gradcheck', help='finite-difference check of the cGAN gradients',
                                      parents=[common])
    gradcheck.add_argument('--seed', type=int, default=0)
    gradcheck.add_argument('--repeats', type=int, default=1, help='check seeds seed..seed+repeats-1')
    gradcheck.add_argument('--inject-fault', type=str, default=None, choices=['sign_flip'], help=argparse.SUPPRESS)
    gradcheck.set_defaults(func=cmd_gradcheck)

    toy = subparsers.add_parser('toy', help='write a generated dataset as CSV', parents=[common])
    toy.add_argument('--seed', type=int, default=0)
    toy.add_argument('--rows-per-class', type=int, default=2000)
    toy.add_argument('--num-features', type=int, default=16)
    toy.add_argument('--clusters', action='store_true', help='planted 2-D malware clusters instead')
    toy.add_argument('--output', type=str, default=None, help='CSV path (default: <out>/toy.csv)')
    toy.set_defaults(func=cmd_toy)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    logger.info('Running with args %s', args)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, ClusteringError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except Exception as e:
        logger.debug("Failure", exc_info=True)
        print("error: %s: %s" % (type(e).__name__, e), file=sys.stderr)
        return 3


if __name__ == '__main__':
    sys.exit(main())
