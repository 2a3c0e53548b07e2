"""
YAML experiment configs and the per-dataset presets.

A config file mirrors `ExperimentConfig`:

    preset: drebin            # optional, applied first; the remaining keys override it
    dataset: {path: data/drebin.csv, label_column: class, positive_label: '1'}
    k: 10
    master_seed: 42
    protocols: [TSTR, TRTS, TRTR]
    classifiers: {enabled: [svm, gbt], svm: {lam: 0.0001, epochs: 20}}
    cgan: {epochs: 5000, gen_neurons: 2048, disc_neurons: 1024}
"""
import copy
import dataclasses
import logging
import os

import yaml

from bench import DatasetConfig, ExperimentConfig
from cgan import CganConfig
from classifiers import ClassifierError, ClassifierParams, GbtParams, SgdParams, SvmParams, TreeParams

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


def _cgan_preset(epochs, gen_neurons, disc_neurons, gen_dropout, disc_dropout, init_stddev, **extra):
    return {'cgan': dict({'epochs': epochs, 'gen_neurons': gen_neurons, 'disc_neurons': disc_neurons,
                          'gen_dropout': gen_dropout, 'disc_dropout': disc_dropout, 'init_stddev': init_stddev,
                          'batch_size': 256}, **extra), 'k': 10}


PRESETS = {
    'androcrawl': _cgan_preset(2000, 2048, 512, 0.2, 0.4, 0.5),
    'drebin': _cgan_preset(5000, 2048, 1024, 0.2, 0.4, 0.5),
    'adroit': _cgan_preset(5000, 64, 32, 0.05, 0.1, 0.5),
    'android_p': _cgan_preset(1000, 1024, 512, 0.2, 0.4, 0.5),
    'kronodroid_e': _cgan_preset(5000, 512, 256, 0.025, 0.05, 0.4),
    'kronodroid_r': _cgan_preset(5000, 512, 256, 0.025, 0.05, 0.4),
    # reduced widths for side-by-side runs over all datasets
    'comparison': _cgan_preset(100, 256, 64, 0.2, 0.4, 0.5),
    # desk-scale run on the generated two-class dataset; the moment term keeps the small
    # generator from collapsing onto one row per class
    'toy': dict(_cgan_preset(300, 128, 64, 0.05, 0.1, 0.1, moment_weight=50.0), k=5,
                dataset={'toy': True, 'toy_rows_per_class': 2000, 'toy_num_features': 16}),
}

_SECTIONS = {
    'dataset': DatasetConfig,
    'cgan': CganConfig,
    'classifiers.svm': SvmParams,
    'classifiers.tree': TreeParams,
    'classifiers.gbt': GbtParams,
    'classifiers.sgd': SgdParams,
}
_TOP_LEVEL = {'preset', 'dataset', 'k', 'cgan', 'classifiers', 'protocols', 'master_seed',
              'binarize_synthetic', 'export_artifacts', 'workers'}


def merge(base, override):
    """Recursive dict merge; values of `override` win."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _coerce(value, field_type, key):
    if value is None:
        return None
    try:
        if field_type in (int, 'int'):
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError()
            return int(float(value))
        if field_type in (float, 'float'):
            if isinstance(value, bool):
                raise ValueError()
            return float(value)  # YAML 1.1 reads '1e-4' as a string
        if field_type in (bool, 'bool'):
            if not isinstance(value, bool):
                raise ValueError()
            return value
        if field_type in (str, 'str'):
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError("%s: expected %s, got %r" % (key, getattr(field_type, '__name__', field_type), value))
    return value


def _section(values, cls, prefix):
    if not isinstance(values, dict):
        raise ConfigError("%s must be a mapping, got %r" % (prefix, values))
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ConfigError("unknown key '%s.%s'" % (prefix, unknown[0]))
    return cls(**{name: _coerce(value, fields[name].type, '%s.%s' % (prefix, name)) for name, value in values.items()})


def _string_list(values, key):
    if isinstance(values, str):
        values = [v for v in values.split(',') if v]
    if not isinstance(values, (list, tuple)):
        raise ConfigError("%s must be a list, got %r" % (key, values))
    return tuple(str(v).strip() for v in values)


def config_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("a config must be a mapping, got %r" % (d,))
    d = dict(d)
    preset = d.pop('preset', None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("unknown preset '%s', choose from %s" % (preset, ", ".join(sorted(PRESETS))))
        d = merge(PRESETS[preset], d)
    unknown = sorted(set(d) - _TOP_LEVEL)
    if unknown:
        raise ConfigError("unknown key '%s'" % unknown[0])
    classifiers = dict(d.get('classifiers') or {})
    enabled = classifiers.pop('enabled', ExperimentConfig.enabled_classifiers)
    unknown = sorted(set(classifiers) - {'svm', 'tree', 'gbt', 'sgd'})
    if unknown:
        raise ConfigError("unknown key 'classifiers.%s'" % unknown[0])
    params = ClassifierParams(**{name: _section(classifiers.get(name, {}), _SECTIONS['classifiers.' + name],
                                                'classifiers.' + name)
                                 for name in ('svm', 'tree', 'gbt', 'sgd')})
    config = ExperimentConfig(
        dataset=_section(d.get('dataset') or {}, DatasetConfig, 'dataset'),
        k=_coerce(d.get('k', ExperimentConfig.k), int, 'k'),
        cgan=_section(d.get('cgan') or {}, CganConfig, 'cgan'),
        classifiers=params,
        enabled_classifiers=_string_list(enabled, 'classifiers.enabled'),
        protocols=tuple(p.upper() for p in _string_list(d.get('protocols', ExperimentConfig.protocols), 'protocols')),
        master_seed=_coerce(d.get('master_seed', ExperimentConfig.master_seed), int, 'master_seed'),
        binarize_synthetic=_coerce(d.get('binarize_synthetic', False), bool, 'binarize_synthetic'),
        export_artifacts=_coerce(d.get('export_artifacts', False), bool, 'export_artifacts'),
        workers=_coerce(d.get('workers', ExperimentConfig.workers), int, 'workers'))
    try:
        return config.validate()
    except ConfigError:
        raise
    except (ValueError, ClassifierError) as e:
        raise ConfigError(str(e))


def config_to_dict(config):
    d = config.to_dict()
    classifiers = d.pop('classifiers')
    classifiers['enabled'] = d.pop('enabled_classifiers')
    d['classifiers'] = classifiers
    return d


def load_config(filepath=None, preset=None):
    """
    :param preset: applied below the file contents (a `preset` key in the file takes precedence)
    """
    d = {}
    if filepath is not None:
        if not os.path.isfile(filepath):
            raise ConfigError("config does not exist: %s" % filepath)
        with open(filepath) as f:
            try:
                d = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError("cannot parse %s: %s" % (filepath, e))
        if not isinstance(d, dict):
            raise ConfigError("%s does not contain a mapping" % filepath)
    if preset is not None and 'preset' not in d:
        d = dict(d, preset=preset)
    return config_from_dict(d)


def dump_config(config, filepath):
    os.makedirs(os.path.dirname(filepath) or '.', exist_ok=True)
    with open(filepath, 'w') as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=False)
