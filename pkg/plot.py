import os

import matplotlib

matplotlib.use('Agg')
import numpy as np
import seaborn as sns
from matplotlib import pyplot

from analyze import METRICS

matplotlib.rcParams['svg.fonttype'] = 'path'
matplotlib.rcParams['svg.hashsalt'] = 'synthmal'
matplotlib.rc('axes', labelsize=14)
matplotlib.rc('ytick', labelsize=12)
matplotlib.rc('xtick', labelsize=12)

colorList = sns.color_palette() + sns.color_palette("husl", 8)[:2]
clusterColors = sns.color_palette("tab10", 10)
protocolColors = {'TSTR': colorList[0], 'TRTS': colorList[1], 'TRTR': colorList[2]}


def _save(save_filepath):
    if save_filepath is None:
        pyplot.show()
        return None
    os.makedirs(os.path.dirname(save_filepath) or '.', exist_ok=True)
    pyplot.tight_layout()
    pyplot.savefig(save_filepath, format='svg', bbox_inches='tight', metadata={'Date': None})
    pyplot.close()
    return save_filepath


def heatmap_table(aggregates):
    """Mean per classifier (rows) and protocol/metric (columns), columns grouped by protocol."""
    table = aggregates.pivot_table(index='classifier', columns=['protocol', 'metric'], values='mean', sort=False)
    protocols = list(dict.fromkeys(aggregates['protocol']))
    columns = [(protocol, metric) for protocol in protocols for metric in METRICS if (protocol, metric) in table]
    return table[columns]


def plot_heatmap(aggregates, save_filepath=None):
    table = heatmap_table(aggregates)
    width = max(6, 0.9 * table.shape[1] + 2)
    pyplot.figure(figsize=(width, 0.8 * table.shape[0] + 2))
    ax = sns.heatmap(table.to_numpy(), cmap=sns.color_palette("Blues", 10), vmin=0, vmax=1,
                     annot=True, fmt='.2f', linewidths=0.5, cbar_kws={'label': 'mean over folds'},
                     xticklabels=['%s %s' % column for column in table.columns], yticklabels=list(table.index))
    ax.set_xlabel('protocol / metric')
    ax.set_ylabel('classifier')
    pyplot.xticks(rotation=60, ha='right')
    pyplot.yticks(rotation=0)
    return _save(save_filepath)


def plot_utility(aggregates, save_filepath=None, protocols=('TSTR', 'TRTS')):
    """Per classifier, side-by-side bars of the mean metrics for each protocol, with std as error bars."""
    classifiers = list(dict.fromkeys(aggregates['classifier']))
    protocols = [protocol for protocol in protocols if protocol in set(aggregates['protocol'])]
    figure, axes = pyplot.subplots(1, len(classifiers), figsize=(4.5 * len(classifiers), 4), squeeze=False)
    x = np.arange(len(METRICS))
    bar_width = 0.8 / max(len(protocols), 1)
    for ax, classifier in zip(axes[0], classifiers):
        for offset, protocol in enumerate(protocols):
            rows = aggregates[(aggregates['classifier'] == classifier) & (aggregates['protocol'] == protocol)]
            rows = rows.set_index('metric').reindex(METRICS)
            ax.bar(x + offset * bar_width, rows['mean'], bar_width, yerr=rows['std'],
                   color=protocolColors.get(protocol), label=protocol)
        ax.set_title(classifier)
        ax.set_xticks(x + bar_width * (len(protocols) - 1) / 2)
        ax.set_xticklabels(METRICS, rotation=45)
        ax.set_ylim([0, 1.05])
    axes[0][0].set_ylabel('mean over folds')
    axes[0][-1].legend(loc='lower right')
    return _save(save_filepath)


def plot_clusters(points, clustering, save_filepath=None):
    """One circle per sample, colored by cluster; the legend lists cluster sizes."""
    pyplot.figure(figsize=(6, 5))
    sizes = clustering.sizes()
    for cluster in range(clustering.k):
        members = points[clustering.assignments == cluster]
        pyplot.scatter(members[:, 0], members[:, 1], s=12, marker='o',
                       color=clusterColors[cluster % len(clusterColors)],
                       label='cluster %d (%d)' % (cluster + 1, sizes[cluster]))
    pyplot.xlabel('PC1')
    pyplot.ylabel('PC2')
    pyplot.legend(loc='best', fontsize=9)
    return _save(save_filepath)


def plot_training_curve(train_log, save_filepath=None):
    frame = train_log.to_frame()
    pyplot.figure(figsize=(6, 4))
    pyplot.plot(frame['epoch'], frame['g_loss'], color=colorList[0], label='generator')
    pyplot.plot(frame['epoch'], frame['d_loss'], color=colorList[1], label='discriminator')
    pyplot.xlabel('epoch')
    pyplot.ylabel('loss')
    pyplot.legend()
    return _save(save_filepath)
