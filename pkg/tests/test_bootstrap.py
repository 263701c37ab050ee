#!/usr/bin/env python3
"""
Tests for the bootstrap component
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from criteria.bootstrap import MomentBlocks, bootstrap_ci, bootstrap_criteria, percentile_interval
from criteria.criteria import criteria_from_cm, reconstruct_cm, shot_sums
from gaussian.gaussian import apply_loss, make_tmsv
from measurement.measurement import sample_shots
from utils.errors import ParameterError


class TestPercentileInterval(unittest.TestCase):
    """Test cases for interval construction"""

    def test_two_sigma_tails(self):
        replicates = np.linspace(0.0, 1.0, 10_001)
        interval = percentile_interval(0.5, replicates)
        self.assertAlmostEqual(interval.low, 0.02275, places=4)
        self.assertAlmostEqual(interval.high, 0.97725, places=4)
        self.assertTrue(interval.contains(0.5))

    def test_interval_widened_to_point(self):
        interval = percentile_interval(5.0, np.random.default_rng(0).normal(size=500))
        self.assertEqual(interval.high, 5.0)

    def test_to_dict_keys(self):
        interval = percentile_interval(0.0, np.arange(-10, 11, dtype=float))
        self.assertEqual(set(interval.to_dict()),
                         {'value', 'ci_low', 'ci_high', 'stderr', 'n_boot', 'redraws'})


class TestShotBootstrap(unittest.TestCase):
    """Test cases for the generic shot-level bootstrap"""

    def setUp(self):
        self.sample = np.random.default_rng(42).normal(size=2_000)

    def test_mean_interval(self):
        interval = bootstrap_ci(self.sample, np.mean, n_boot=400, seed=3)
        self.assertTrue(interval.contains(self.sample.mean()))
        self.assertAlmostEqual(interval.stderr, 1.0 / np.sqrt(2_000), delta=0.005)
        self.assertEqual(interval.n_boot, 400)

    def test_seed_determinism(self):
        first = bootstrap_ci(self.sample, np.mean, n_boot=200, seed=3)
        second = bootstrap_ci(self.sample, np.mean, n_boot=200, seed=3)
        self.assertEqual(first, second)

    def test_minimum_resamples(self):
        with self.assertRaises(ParameterError):
            bootstrap_ci(self.sample, np.mean, n_boot=100)

    def test_empty_sample(self):
        with self.assertRaises(ParameterError):
            bootstrap_ci(np.empty(0), np.mean, n_boot=200)


class TestCriteriaBootstrap(unittest.TestCase):
    """Test cases for the block bootstrap of the witnesses"""

    @classmethod
    def setUpClass(cls):
        cls.record = sample_shots(apply_loss(make_tmsv(0.5), 'B', 0.7), 20_000, seed=8)

    def test_point_matches_direct_estimate(self):
        intervals = bootstrap_criteria(self.record, n_boot=200, seed=1)
        direct = criteria_from_cm(reconstruct_cm(self.record).cm, with_purity=True).to_dict()
        self.assertEqual(set(intervals), set(direct))
        for name, value in direct.items():
            self.assertAlmostEqual(intervals[name].point, value, places=9)
            self.assertTrue(intervals[name].low <= value <= intervals[name].high)

    def test_block_totals(self):
        blocks = MomentBlocks(self.record, n_blocks=100)
        self.assertEqual(blocks.n_blocks, 100)
        np.testing.assert_allclose(blocks.total(), shot_sums(self.record)[0], rtol=1e-10, atol=1e-6)

    def test_shot_level_blocks(self):
        small = self.record.take(np.arange(500))
        self.assertEqual(MomentBlocks(small, n_blocks=20_000).n_blocks, 500)

    def test_blocks_from_chunks(self):
        n = len(self.record)
        chunks = (self.record.take(np.arange(start, min(start + 3_001, n)))
                  for start in range(0, n, 3_001))
        streamed = MomentBlocks.from_chunks(chunks, n, n_blocks=100)
        whole = MomentBlocks(self.record, n_blocks=100)
        self.assertEqual(streamed.block_size, whole.block_size)
        np.testing.assert_allclose(streamed.sums, whole.sums, rtol=1e-10, atol=1e-8)
        a = bootstrap_criteria(streamed, n_boot=200, seed=3)
        b = bootstrap_criteria(self.record, n_boot=200, seed=3, n_blocks=100)
        self.assertAlmostEqual(a['duan_i'].stderr, b['duan_i'].stderr, places=8)
        with self.assertRaises(ParameterError):
            MomentBlocks.from_chunks([], 0)

    def test_custom_statistic(self):
        def bob_variance(sums):
            total = sums[0] + sums[1]
            return {'var_bx': total[5] / total[0] - (total[3] / total[0]) ** 2}

        intervals = bootstrap_criteria(self.record, n_boot=200, seed=2, statistic=bob_variance)
        self.assertAlmostEqual(intervals['var_bx'].point, np.var(self.record.bob_x), places=9)
        self.assertGreater(intervals['var_bx'].stderr, 0.0)


if __name__ == '__main__':
    unittest.main()
