import os
import tempfile
import unittest

from config import PRESETS, ConfigError, config_from_dict, config_to_dict, dump_config, load_config


class PresetTests(unittest.TestCase):
    def test_drebin(self):
        config = config_from_dict({'preset': 'drebin', 'dataset': {'path': 'drebin.csv'}})
        self.assertEqual(5000, config.cgan.epochs)
        self.assertEqual(2048, config.cgan.gen_neurons)
        self.assertEqual(1024, config.cgan.disc_neurons)
        self.assertEqual(256, config.cgan.batch_size)
        self.assertEqual(10, config.k)

    def test_kronodroid_dropout(self):
        config = config_from_dict({'preset': 'kronodroid_e', 'dataset': {'path': 'k.csv'}})
        self.assertEqual(0.025, config.cgan.gen_dropout)
        self.assertEqual(0.05, config.cgan.disc_dropout)
        self.assertEqual(0.4, config.cgan.init_stddev)

    def test_toy_needs_no_path(self):
        config = config_from_dict({'preset': 'toy'})
        self.assertTrue(config.dataset.toy)
        self.assertEqual(5, config.k)

    def test_moment_term_only_in_toy(self):
        self.assertEqual(50.0, config_from_dict({'preset': 'toy'}).cgan.moment_weight)
        config = config_from_dict({'preset': 'drebin', 'dataset': {'path': 'd.csv'}})
        self.assertEqual(0.0, config.cgan.moment_weight)

    def test_all_presets_valid(self):
        for name in PRESETS:
            config_from_dict({'preset': name, 'dataset': {'path': 'data.csv'}})

    def test_overrides_win(self):
        config = config_from_dict({'preset': 'drebin', 'dataset': {'path': 'd.csv'}, 'cgan': {'epochs': 3}})
        self.assertEqual(3, config.cgan.epochs)
        self.assertEqual(2048, config.cgan.gen_neurons)

    def test_unknown_preset(self):
        with self.assertRaisesRegex(ConfigError, "unknown preset"):
            config_from_dict({'preset': 'nope'})


class ConfigFromDictTests(unittest.TestCase):
    def test_unknown_keys(self):
        with self.assertRaisesRegex(ConfigError, "unknown key 'cgan.epoch'"):
            config_from_dict({'preset': 'toy', 'cgan': {'epoch': 3}})
        with self.assertRaisesRegex(ConfigError, "unknown key 'folds'"):
            config_from_dict({'preset': 'toy', 'folds': 3})
        with self.assertRaisesRegex(ConfigError, "unknown key 'classifiers.knn'"):
            config_from_dict({'preset': 'toy', 'classifiers': {'knn': {}}})

    def test_types(self):
        config = config_from_dict({'preset': 'toy', 'classifiers': {'svm': {'lam': '1e-3'}}, 'k': 4.0})
        self.assertEqual(1e-3, config.classifiers.svm.lam)
        self.assertEqual(4, config.k)
        with self.assertRaises(ConfigError):
            config_from_dict({'preset': 'toy', 'k': 2.5})
        with self.assertRaises(ConfigError):
            config_from_dict({'preset': 'toy', 'binarize_synthetic': 'yes'})

    def test_enabled_and_protocols(self):
        config = config_from_dict({'preset': 'toy', 'classifiers': {'enabled': 'svm,gbt'}, 'protocols': ['tstr']})
        self.assertEqual(('svm', 'gbt'), config.enabled_classifiers)
        self.assertEqual(('TSTR',), config.protocols)

    def test_invalid_values_are_config_errors(self):
        with self.assertRaises(ConfigError):
            config_from_dict({'preset': 'toy', 'cgan': {'gen_dropout': 1.5}})
        with self.assertRaises(ConfigError):
            config_from_dict({'preset': 'toy', 'classifiers': {'enabled': ['knn']}})
        with self.assertRaises(ConfigError):
            config_from_dict({'dataset': {}})


class ConfigFileTests(unittest.TestCase):
    def test_dump_then_load(self):
        config = config_from_dict({'preset': 'drebin', 'dataset': {'path': 'd.csv', 'positive_label': 'S'},
                                   'classifiers': {'enabled': ['gbt']}, 'master_seed': 7})
        with tempfile.TemporaryDirectory() as directory:
            filepath = os.path.join(directory, 'config.yaml')
            dump_config(config, filepath)
            loaded = load_config(filepath)
        self.assertEqual(config_to_dict(config), config_to_dict(loaded))

    def test_preset_argument(self):
        with tempfile.TemporaryDirectory() as directory:
            filepath = os.path.join(directory, 'config.yaml')
            with open(filepath, 'w') as f:
                f.write("dataset: {path: a.csv}\ncgan: {epochs: 7}\n")
            config = load_config(filepath, preset='adroit')
        self.assertEqual(7, config.cgan.epochs)
        self.assertEqual(64, config.cgan.gen_neurons)

    def test_shipped_configs(self):
        configs = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')
        self.assertEqual(42, load_config(os.path.join(configs, 'toy.yaml')).master_seed)
        self.assertEqual('S', load_config(os.path.join(configs, 'drebin.yaml')).dataset.positive_label)

    def test_missing_and_malformed(self):
        with self.assertRaises(ConfigError):
            load_config('does/not/exist.yaml')
        with tempfile.TemporaryDirectory() as directory:
            filepath = os.path.join(directory, 'bad.yaml')
            with open(filepath, 'w') as f:
                f.write("- just\n- a list\n")
            with self.assertRaises(ConfigError):
                load_config(filepath)


if __name__ == '__main__':
    unittest.main()
