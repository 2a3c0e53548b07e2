"""
Parameter containers: nested name -> array mappings, stored as HDF5 with a JSON manifest.
"""
import hashlib
import json
import os
from collections import OrderedDict
from functools import reduce

import h5py
import numpy as np

CONTAINER_VERSION = 1


def walk(dictionary, collect, key_chain=None):
    result = OrderedDict()
    for key, item in dictionary.items():
        sub_key_chain = (key_chain if key_chain is not None else []) + [key]
        if callable(getattr(item, "items", None)):
            result[key] = walk(item, collect, key_chain=sub_key_chain)
        else:
            result[key] = collect(sub_key_chain, item)
    return result


def walk_key_chain(dictionary, key_chain):
    """
    Walks down the nesting structure of a dictionary, following the keys in the `key_chain`.

    Example:
        d = {'generator':
              {'output_W': W}
            }
        walk_key_chain(d, ['generator', 'output_W'])  # returns W
    """
    return reduce(lambda d, k: d[k], key_chain, dictionary)


def shapes(weights):
    return walk(weights, lambda _, x: list(np.shape(x)))


def weights_digest(weights):
    """SHA-256 over names, shapes and raw bytes of every array, in iteration order."""
    digest = hashlib.sha256()

    def update(key_chain, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        digest.update('/'.join(key_chain).encode('utf8'))
        digest.update(str(x.shape).encode('utf8'))
        digest.update(x.tobytes())

    walk(weights, update)
    return digest.hexdigest()


def validate_weights(weights_paths):
    exists = [os.path.isfile(path) for path in weights_paths]
    if not all(exists):
        raise FileNotFoundError("weights do not exist: %s" % ", ".join(
            path for (path, exist) in zip(weights_paths, exists) if not exist))


def dump_weights(weights, filepath, manifest):
    """
    Save two-level weights (group -> name -> array) to HDF5.
    The manifest, extended with the container version and all shapes, is stored as a JSON attribute.
    """
    manifest = dict(manifest, container_version=CONTAINER_VERSION, shapes=shapes(weights))
    os.makedirs(os.path.dirname(filepath) or '.', exist_ok=True)
    with h5py.File(filepath, 'w', track_order=True) as file:
        file.attrs['manifest'] = json.dumps(manifest, sort_keys=True)
        for group_name, group_weights in weights.items():
            group = file.create_group(group_name, track_order=True)
            for name, value in group_weights.items():
                group.create_dataset(name, data=np.asarray(value, dtype=np.float64), track_times=False)


def load_weights(filepath):
    """
    :return: the weights and the manifest; raises ValueError on a version or shape mismatch
    """
    validate_weights([filepath])
    with h5py.File(filepath, 'r') as file:
        manifest = json.loads(file.attrs['manifest'])
        if manifest.get('container_version') != CONTAINER_VERSION:
            raise ValueError("unsupported container version %s in %s" % (manifest.get('container_version'), filepath))
        weights = walk(file, lambda _, x: np.array(x))
    expected = manifest['shapes']

    def check_shape(key_chain, x):
        if list(x.shape) != walk_key_chain(expected, key_chain):
            raise ValueError("%s has shape %s, manifest says %s" % (
                '/'.join(key_chain), x.shape, walk_key_chain(expected, key_chain)))

    walk(weights, check_shape)
    return weights, manifest
