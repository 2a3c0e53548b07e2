"""
Report files written under one output directory:

    report.json             the full experiment report
    folds.csv               one row per (fold, classifier, protocol) with confusion counts and metrics
    aggregates.csv          mean/std/min/max/count per (classifier, protocol, metric)
    training/fold_XX.csv    per-epoch cGAN losses of every fold
"""
import json
import os

import numpy as np
import pandas as pd

REPORT_FILENAME = 'report.json'
FOLDS_FILENAME = 'folds.csv'
AGGREGATES_FILENAME = 'aggregates.csv'


def get_results_filepath(filename, results_directory="results"):
    filepath = os.path.join(results_directory, filename)
    os.makedirs(os.path.dirname(filepath), exist_ok=True)
    return filepath


def training_log_filepath(fold, results_directory="results", extension='.csv'):
    return get_results_filepath(os.path.join('training', 'fold_%02d%s' % (fold, extension)), results_directory)


def _builtin(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError("%s is not JSON serializable" % type(value).__name__)


def dumps_report(report_dict):
    return json.dumps(report_dict, indent=1, default=_builtin)


def write_report(report, results_directory="results"):
    filepath = get_results_filepath(REPORT_FILENAME, results_directory)
    with open(filepath, 'w') as f:
        f.write(dumps_report(report.to_dict()))
    return filepath


def folds_frame(records):
    return pd.DataFrame([record.to_dict() for record in records]).drop(columns=['degenerate'], errors='ignore')


def write_folds(records, results_directory="results"):
    filepath = get_results_filepath(FOLDS_FILENAME, results_directory)
    folds_frame(records).to_csv(filepath, index=False)
    return filepath


def write_aggregates(aggregates, results_directory="results"):
    filepath = get_results_filepath(AGGREGATES_FILENAME, results_directory)
    aggregates.to_csv(filepath, index=False)
    return filepath


def write_training_logs(report, results_directory="results"):
    filepaths = []
    for fold in report.folds:
        if fold.train_log is not None:
            filepath = training_log_filepath(fold.fold, results_directory)
            fold.train_log.to_csv(filepath)
            filepaths.append(filepath)
    return filepaths


def write_all(report, results_directory="results"):
    """:return: paths of all written files"""
    return [write_report(report, results_directory),
            write_folds(report.records, results_directory),
            write_aggregates(report.aggregates, results_directory)] + \
        write_training_logs(report, results_directory)
