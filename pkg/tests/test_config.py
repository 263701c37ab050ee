#!/usr/bin/env python3
"""
Tests for the config interface component
"""

import sys
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
import yaml

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from config.interface import ExperimentConfig, ExperimentInterface, config_from_dict
from criteria.criteria import criteria_from_state
from gaussian.gaussian import to_snu
from utils.errors import ParameterError, UnphysicalStateError

REPO_ROOT = Path(__file__).parent.parent


class TestConfigFromDict(unittest.TestCase):
    """Test cases for recipe resolution"""

    def test_defaults(self):
        config = config_from_dict({})
        self.assertEqual(config, ExperimentConfig())
        self.assertAlmostEqual(criteria_from_state(config.build_state()).e_direct, 0.484, places=9)

    def test_run_id_is_deterministic(self):
        first = config_from_dict({'experiment': {'seed': 5}})
        second = config_from_dict({'experiment': {'seed': 5}})
        third = config_from_dict({'experiment': {'seed': 6}})
        self.assertEqual(first.run_id, second.run_id)
        self.assertNotEqual(first.run_id, third.run_id)
        self.assertTrue(first.run_id.startswith('mbnla_5_'))

    def test_state_kinds(self):
        tmsv = config_from_dict({'state': {'kind': 'tmsv', 'variance': 1.437}}).build_state()
        self.assertAlmostEqual(to_snu(tmsv.cm)[0, 0], 1.437, places=12)
        squeezers = config_from_dict({'state': {'kind': 'squeezers', 'v_sq': 0.7, 'v_anti': 1.5}})
        self.assertEqual(squeezers.build_state().cm.shape, (4, 4))
        cm = (0.5 * np.eye(4)).tolist()
        explicit = config_from_dict({'state': {'kind': 'cm', 'cm': cm}}).build_state()
        np.testing.assert_allclose(explicit.cm, 0.5 * np.eye(4))

    def test_channels_applied_in_order(self):
        config = config_from_dict({
            'state': {'kind': 'tmsv', 'r': 0.5},
            'channels': [{'mode': 'B', 'T': 0.5}, {'mode': 'B', 'T': 0.5}],
            'sweep': {'keyrate_channels': [{'mode': 'B', 'T': 0.5}]},
        })
        state = config.build_state()
        self.assertAlmostEqual(state.cm[0, 2], 0.25 * np.sinh(1.0), places=12)
        self.assertAlmostEqual(config.build_keyrate_state().cm[0, 2],
                               0.5 ** 2.5 * np.sinh(1.0), places=12)

    def test_unknown_keys(self):
        with self.assertRaises(ParameterError):
            config_from_dict({'experiment': {'shotz': 10}})
        with self.assertRaises(ParameterError):
            config_from_dict({'extra': {}})

    def test_invalid_values(self):
        bad_recipes = [
            {'state': {'kind': 'cat'}},
            {'state': {'kind': 'tmsv', 'r': -1.0}},
            {'experiment': {'shots': 0}},
            {'experiment': {'seed': -3}},
            {'filter': {'gains': [1.2, 1.1]}},
            {'filter': {'gains': [0.9]}},
            {'filter': {'k_sd': 2.0}},
            {'sweep': {'transmissivities': [0.0]}},
            {'sweep': {'mode': 'exact'}},
            {'experiment': {'analyses': ['criteria', 'tomography']}},
            {'experiment': {'beta_rec': 1.5}},
            {'experiment': {'n_boot': 100}},
            {'experiment': {'shard_size': 3}},
        ]
        for recipe in bad_recipes:
            with self.subTest(recipe=recipe):
                with self.assertRaises(ParameterError):
                    config_from_dict(recipe)

    def test_unphysical_state(self):
        with self.assertRaises(UnphysicalStateError):
            config_from_dict({'state': {'kind': 'squeezers', 'v_sq': 0.5, 'v_anti': 1.5}})

    def test_to_dict_is_plain(self):
        content = config_from_dict({'sweep': {'keyrate_channels': [{'T': 0.3}]}}).to_dict()
        self.assertIsInstance(content['filter']['gains'], list)
        self.assertEqual(content['sweep']['keyrate_channels'][0]['T'], 0.3)


class TestExperimentInterface(unittest.TestCase):
    """Test cases for ExperimentInterface"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.recipe_path = Path(self.temp_dir) / 'recipe.yml'

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def _write(self, recipe):
        with open(self.recipe_path, 'w') as f:
            yaml.safe_dump(recipe, f)

    def test_overrides(self):
        self._write({'experiment': {'shots': 1000, 'seed': 1}})
        config = ExperimentInterface(str(self.recipe_path)).resolve(
            seed=9, shots=500, gain=1.3, cutoff_sd=5.0, beta=0.9, mode='monte-carlo', out=self.temp_dir)
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.shots, 500)
        self.assertEqual(config.filter.gains, (1.3,))
        self.assertEqual(config.filter.k_sd, 5.0)
        self.assertEqual(config.beta_rec, 0.9)
        self.assertEqual(config.sweep.mode, 'monte-carlo')
        self.assertEqual(config.output.directory, self.temp_dir)

    def test_invalid_override(self):
        self._write({})
        with self.assertRaises(ParameterError):
            ExperimentInterface(str(self.recipe_path)).resolve(gain=0.5)

    def test_invalid_yaml(self):
        self.recipe_path.write_text("experiment: [unclosed\n")
        with self.assertRaises(ParameterError):
            ExperimentInterface(str(self.recipe_path)).load_recipe()

    def test_non_mapping_recipe(self):
        self.recipe_path.write_text("- 1\n- 2\n")
        with self.assertRaises(ParameterError):
            ExperimentInterface(str(self.recipe_path)).load_recipe()

    def test_builtin_defaults(self):
        self.assertEqual(ExperimentInterface(None).resolve(), ExperimentConfig())

    def test_bundled_recipes(self):
        for name in ('experiment.yml', 'experiment_loss.yml'):
            with self.subTest(recipe=name):
                config = ExperimentInterface(str(REPO_ROOT / name)).resolve()
                config.build_state()
                config.build_keyrate_state()


if __name__ == '__main__':
    unittest.main()
