#!/usr/bin/env python3
"""
Tests for the normality component
"""

import sys
import unittest
from pathlib import Path

import numpy as np
from scipy import stats

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from gaussian.gaussian import make_tmsv
from measurement.measurement import sample_shots
from normality.normality import (
    NormalityAccumulator, StreamingMoments, jarque_bera, jb_statistic, moments, normality_report,
    purity_consistency,
)
from utils.errors import DegenerateInputError, InsufficientShotsError, ParameterError


class TestMoments(unittest.TestCase):
    """Test cases for skewness and kurtosis"""

    def setUp(self):
        rng = np.random.default_rng(99)
        self.normal = rng.normal(size=100_000)
        self.skewed = rng.exponential(size=20_000)

    def test_normal_sample(self):
        m = moments(self.normal)
        self.assertLess(abs(m.skewness), 5 * m.skewness_se)
        self.assertLess(abs(m.excess_kurtosis), 5 * m.kurtosis_se)
        self.assertAlmostEqual(m.skewness_se, np.sqrt(6.0 / 100_000))

    def test_matches_scipy(self):
        m = moments(self.skewed)
        self.assertAlmostEqual(m.skewness, stats.skew(self.skewed), places=10)
        self.assertAlmostEqual(m.excess_kurtosis, stats.kurtosis(self.skewed), places=10)

    def test_affine_invariance(self):
        base = moments(self.skewed)
        scaled = moments(3.0 * self.skewed + 2.0)
        self.assertAlmostEqual(scaled.skewness, base.skewness, places=8)
        self.assertAlmostEqual(scaled.excess_kurtosis, base.excess_kurtosis, places=8)
        flipped = moments(-self.skewed)
        self.assertAlmostEqual(flipped.skewness, -base.skewness, places=8)

    def test_small_and_constant_samples(self):
        with self.assertRaises(InsufficientShotsError):
            moments(np.arange(10.0))
        with self.assertRaises(DegenerateInputError):
            moments(np.ones(50))


class TestJarqueBera(unittest.TestCase):
    """Test cases for the Jarque-Bera test"""

    def test_statistic_formula(self):
        self.assertAlmostEqual(jb_statistic(1_000_000, 0.01, 0.01), 1e6 / 6 * (1e-4 + 0.25e-4), places=6)
        self.assertEqual(jb_statistic(500, 0.0, 0.0), 0.0)

    def test_uniform_sample_rejected(self):
        sample = np.random.default_rng(1).uniform(size=10_000)
        report = jarque_bera(sample)
        self.assertFalse(report.jb_pass)
        self.assertGreater(report.jb_statistic, 100.0)

    def test_confidence_levels(self):
        sample = np.random.default_rng(2).normal(size=1_000)
        self.assertEqual(jarque_bera(sample, 0.99).confidence, 0.99)
        with self.assertRaises(ParameterError):
            jarque_bera(sample, 0.9)

    def test_minimum_samples(self):
        with self.assertRaises(InsufficientShotsError):
            jarque_bera(np.random.default_rng(3).normal(size=50))

    def test_record_report(self):
        record = sample_shots(make_tmsv(0.4), 20_000, seed=6)
        report = normality_report(record)
        self.assertEqual(set(report.streams), {'bob_x', 'bob_p', 'alice_x', 'alice_p'})
        self.assertEqual(report.n, 20_000)
        self.assertEqual(report.streams['alice_x'].n, 10_000)
        self.assertEqual(report.jb_pass, all(s.jb_pass for s in report.streams.values()))
        self.assertEqual(report.jb_statistic, report.streams['bob_x'].jb_statistic)
        self.assertIn('streams', report.to_dict())

    def test_chunked_report_matches_whole_record(self):
        record = sample_shots(make_tmsv(0.4), 20_000, seed=6)
        accumulator = NormalityAccumulator()
        for indices in np.array_split(np.arange(len(record)), 9):
            accumulator.add(record.take(indices))
        chunked, whole = accumulator.report(), normality_report(record)
        self.assertEqual(chunked.n, whole.n)
        self.assertEqual(chunked.jb_pass, whole.jb_pass)
        for name, stream in whole.streams.items():
            with self.subTest(stream=name):
                self.assertEqual(chunked.streams[name].n, stream.n)
                self.assertAlmostEqual(chunked.streams[name].skewness, stream.skewness, places=10)
                self.assertAlmostEqual(chunked.streams[name].jb_statistic, stream.jb_statistic, places=6)

    def test_chunked_report_needs_enough_shots(self):
        accumulator = NormalityAccumulator()
        accumulator.add(sample_shots(make_tmsv(0.4), 150, seed=6))
        with self.assertRaises(InsufficientShotsError):
            accumulator.report()


class TestStreamingMoments(unittest.TestCase):
    """Test cases for the mergeable moment accumulator"""

    def test_merge_equals_single_pass(self):
        sample = np.random.default_rng(4).gamma(2.0, size=30_001)
        left = StreamingMoments.from_samples(sample[:10_000])
        right = StreamingMoments.from_samples(sample[10_000:])
        left.merge(right)
        direct = moments(sample)
        merged = left.to_moments()
        self.assertEqual(merged.n, 30_001)
        self.assertAlmostEqual(merged.skewness, direct.skewness, places=10)
        self.assertAlmostEqual(merged.excess_kurtosis, direct.excess_kurtosis, places=10)
        self.assertAlmostEqual(left.variance(), np.var(sample), places=10)

    def test_incremental_batches(self):
        sample = np.random.default_rng(5).normal(size=5_000)
        acc = StreamingMoments()
        for chunk in np.array_split(sample, 7):
            acc.add(chunk)
        self.assertAlmostEqual(acc.to_moments().skewness, moments(sample).skewness, places=10)

    def test_empty_accumulator(self):
        with self.assertRaises(InsufficientShotsError):
            StreamingMoments().to_moments()


class TestPurityConsistency(unittest.TestCase):
    """Test cases for the purity check"""

    def test_within_tolerance(self):
        check = purity_consistency(0.90, 0.01, 0.915)
        self.assertTrue(check.consistent)
        self.assertAlmostEqual(check.z_score, 1.5)

    def test_outside_tolerance(self):
        self.assertFalse(purity_consistency(0.90, 0.01, 0.95).consistent)

    def test_zero_stderr(self):
        self.assertFalse(purity_consistency(0.90, 0.0, 0.91).consistent)


if __name__ == '__main__':
    unittest.main()
