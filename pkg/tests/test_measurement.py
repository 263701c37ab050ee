#!/usr/bin/env python3
"""
Tests for the measurement component
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from gaussian.gaussian import apply_loss, coherent_product, make_tmsv, vacuum
from measurement.measurement import (
    QUAD_P, QUAD_X, MeasurementRecord, conditional_cm_after_heterodyne, iter_shards, sample_shots,
    shard_bounds, validate_seed,
)
from utils.errors import InsufficientShotsError, ParameterError


class TestSampling(unittest.TestCase):
    """Test cases for shot sampling"""

    @classmethod
    def setUpClass(cls):
        cls.r = 0.5
        cls.record = sample_shots(make_tmsv(cls.r), 200_000, seed=7)

    def test_length_and_alternation(self):
        self.assertEqual(len(self.record), 200_000)
        np.testing.assert_array_equal(self.record.alice_quad[:4], [QUAD_X, QUAD_P, QUAD_X, QUAD_P])
        self.assertEqual(self.record.quadrature_counts(), {'x': 100_000, 'p': 100_000})

    def test_heterodyne_variance(self):
        """Heterodyne outcomes carry the mode variance plus half a vacuum unit"""
        expected = 0.5 * np.cosh(2 * self.r) + 0.5
        self.assertAlmostEqual(np.var(self.record.bob_x), expected, delta=0.02)
        self.assertAlmostEqual(np.var(self.record.bob_p), expected, delta=0.02)

    def test_cross_covariances(self):
        rec = self.record
        x = rec.alice_quad == QUAD_X
        p = ~x
        c = 0.5 * np.sinh(2 * self.r)
        self.assertAlmostEqual(np.cov(rec.alice_value[x], rec.bob_x[x])[0, 1], c, delta=0.02)
        self.assertAlmostEqual(np.cov(rec.alice_value[p], rec.bob_p[p])[0, 1], -c, delta=0.02)
        self.assertAlmostEqual(np.var(rec.alice_value[x]), 0.5 * np.cosh(2 * self.r), delta=0.02)

    def test_coherent_mean(self):
        record = sample_shots(coherent_product(1.0), 50_000, seed=3)
        self.assertAlmostEqual(record.bob_x.mean(), np.sqrt(2.0), delta=0.02)
        self.assertAlmostEqual(record.bob_p.mean(), 0.0, delta=0.02)

    def test_determinism(self):
        state = apply_loss(make_tmsv(0.4), 'B', 0.5)
        first = sample_shots(state, 5_000, seed=11, shard_size=1024)
        second = sample_shots(state, 5_000, seed=11, shard_size=1024)
        self.assertTrue(first.same_shots(second))
        other = sample_shots(state, 5_000, seed=12, shard_size=1024)
        self.assertFalse(first.same_shots(other))

    def test_worker_count_does_not_change_record(self):
        state = make_tmsv(0.3)
        serial = sample_shots(state, 10_000, seed=5, max_workers=1, shard_size=1024)
        threaded = sample_shots(state, 10_000, seed=5, max_workers=4, shard_size=1024)
        self.assertTrue(serial.same_shots(threaded))

    def test_streaming_matches_in_memory(self):
        state = make_tmsv(0.3)
        shards = list(iter_shards(state, 3_000, seed=9, shard_size=1024))
        self.assertEqual([len(s) for s in shards], [1024, 1024, 952])
        whole = sample_shots(state, 3_000, seed=9, shard_size=1024)
        self.assertTrue(MeasurementRecord.concatenate(shards).same_shots(whole))

    def test_metadata(self):
        record = sample_shots(vacuum(), 10, seed=1, digest='ab' * 32)
        self.assertEqual(record.meta.seed, 1)
        self.assertEqual(record.meta.n_requested, 10)
        self.assertEqual(record.meta.state_digest, 'ab' * 32)
        self.assertFalse(record.meta.rescaled)


class TestSamplingErrors(unittest.TestCase):
    """Test cases for sampling preconditions"""

    def test_zero_shots(self):
        with self.assertRaises(InsufficientShotsError):
            sample_shots(vacuum(), 0, seed=1)

    def test_memory_budget(self):
        with self.assertRaises(ParameterError):
            sample_shots(vacuum(), 1_000, seed=1, memory_budget=100)

    def test_seed_validation(self):
        self.assertEqual(validate_seed(2 ** 64 - 1), 2 ** 64 - 1)
        for bad in (-1, 2 ** 64, 1.5, True):
            with self.assertRaises(ParameterError):
                validate_seed(bad)

    def test_odd_shard_size(self):
        with self.assertRaises(ParameterError):
            list(iter_shards(vacuum(), 10, seed=1, shard_size=3))


class TestRecord(unittest.TestCase):
    """Test cases for MeasurementRecord helpers"""

    def setUp(self):
        self.record = sample_shots(make_tmsv(0.2), 100, seed=2)

    def test_columns_read_only(self):
        with self.assertRaises(ValueError):
            self.record.bob_x[0] = 0.0

    def test_inconsistent_lengths(self):
        with self.assertRaises(ParameterError):
            MeasurementRecord(np.zeros(3, np.uint8), np.zeros(3), np.zeros(2), np.zeros(3))

    def test_take_and_subsample(self):
        subset = self.record.take(np.array([0, 0, 5]))
        self.assertEqual(len(subset), 3)
        self.assertEqual(subset.bob_x[0], subset.bob_x[1])
        p_only = self.record.quadrature_subsample(QUAD_P)
        self.assertTrue(np.all(p_only.alice_quad == QUAD_P))
        self.assertEqual(len(p_only), 50)

    def test_alpha(self):
        alpha = self.record.alpha
        np.testing.assert_allclose(alpha.real * np.sqrt(2.0), self.record.bob_x)

    def test_with_meta(self):
        changed = self.record.with_meta(gain=1.3, rescaled=True)
        self.assertEqual(changed.meta.gain, 1.3)
        self.assertTrue(changed.same_shots(self.record))

    def test_shard_bounds(self):
        self.assertEqual([len(b) for b in shard_bounds(10, 4)], [4, 4, 2])


class TestConditioning(unittest.TestCase):
    """Test cases for heterodyne conditioning"""

    def test_pure_state_conditions_to_vacuum(self):
        conditional = conditional_cm_after_heterodyne(make_tmsv(0.7), 'B')
        np.testing.assert_allclose(conditional, 0.5 * np.eye(2), atol=1e-12)

    def test_product_state_is_unchanged(self):
        state = coherent_product(0.5)
        np.testing.assert_allclose(conditional_cm_after_heterodyne(state, 'A'), state.block('B'))

    def test_unknown_mode(self):
        with self.assertRaises(ParameterError):
            conditional_cm_after_heterodyne(vacuum(), 'C')


if __name__ == '__main__':
    unittest.main()
