#!/usr/bin/env python3
"""
Tests for the NLA component
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from criteria.bootstrap import bootstrap_criteria
from criteria.criteria import criteria_from_state, tmsv_from_reid
from gaussian.gaussian import apply_loss, coherent_product, make_tmsv, tmsv_from_variance, vacuum
from measurement.measurement import MeasurementRecord, heterodyne_outcome_covariance, sample_shots
from nla.nla import (
    FilterSpec, StreamingFilter, analytic_nla, analytic_success_probability, apply_mbnla,
    choose_cutoff, closed_form_success_probability, cutoff_fidelity_gap, filter_probability,
    gain_bound, truncated_nla,
)
from utils.errors import EmptyEnsembleError, GainBoundError, ParameterError


class TestFilter(unittest.TestCase):
    """Test cases for the acceptance function and cut-off sizing"""

    def test_spec_validation(self):
        with self.assertRaises(ParameterError):
            FilterSpec(0.9, 1.0)
        with self.assertRaises(ParameterError):
            FilterSpec(1.2, -1.0)

    def test_probability_shape(self):
        spec = FilterSpec(1.5, 2.0)
        self.assertEqual(filter_probability(2.5, spec), 1.0)
        self.assertEqual(filter_probability(2.0, spec), 1.0)
        expected = np.exp(-4.0 * (1 - 1 / 1.5 ** 2))
        self.assertAlmostEqual(filter_probability(0.0, spec), expected, places=12)
        values = filter_probability(np.array([0.0, 1.0, 3.0]), spec)
        self.assertTrue(np.all(np.diff(values) >= 0))
        self.assertTrue(np.all(values <= 1.0))

    def test_unit_gain_accepts_everything(self):
        spec = FilterSpec(1.0, 3.0)
        self.assertEqual(filter_probability(0.0, spec), 1.0)

    def test_cutoff_from_vacuum(self):
        self.assertAlmostEqual(choose_cutoff(vacuum(), 4), 2.8284, places=4)
        self.assertEqual(choose_cutoff(vacuum(), 0), 0.0)

    def test_cutoff_range(self):
        with self.assertRaises(ParameterError):
            choose_cutoff(vacuum(), 2.0)
        with self.assertRaises(ParameterError):
            choose_cutoff(vacuum(), 9.0)

    def test_cutoff_grows_with_sweep_gain(self):
        state = make_tmsv(0.5)
        self.assertGreater(choose_cutoff(state, 4.5, g_max=1.4), choose_cutoff(state, 4.5))

    def test_cutoff_from_outcome_covariance(self):
        state = make_tmsv(0.5)
        cov = heterodyne_outcome_covariance(state)
        self.assertAlmostEqual(choose_cutoff(cov, 4.5, g_max=1.3), choose_cutoff(state, 4.5, g_max=1.3),
                               places=12)
        with self.assertRaises(ParameterError):
            choose_cutoff(np.eye(3), 4.5)

    def test_cutoff_from_record_close_to_state(self):
        state = make_tmsv(0.5)
        record = sample_shots(state, 100_000, seed=4)
        self.assertAlmostEqual(choose_cutoff(record, 4.5), choose_cutoff(state, 4.5), delta=0.05)


class TestMonteCarloFilter(unittest.TestCase):
    """Test cases for shot-by-shot post-selection"""

    @classmethod
    def setUpClass(cls):
        cls.state = make_tmsv(0.5)
        cls.record = sample_shots(cls.state, 200_000, seed=13)
        cls.spec = FilterSpec(1.1, choose_cutoff(cls.state, 4.5, g_max=1.1))
        cls.outcome = apply_mbnla(cls.record, cls.spec, seed=13)

    def test_acceptance_matches_closed_form(self):
        variance = heterodyne_outcome_covariance(self.state)[0, 0]
        p = closed_form_success_probability(variance, self.spec)
        sigma = np.sqrt(p * (1 - p) / self.outcome.n_in)
        self.assertLess(abs(self.outcome.p_success - p), 4 * sigma)
        self.assertEqual(self.outcome.n_accept, len(self.outcome.record))

    def test_rescaled_metadata(self):
        meta = self.outcome.record.meta
        self.assertTrue(meta.rescaled)
        self.assertEqual(meta.gain, 1.1)
        self.assertEqual(meta.alpha_c, self.spec.alpha_c)

    def test_filtered_variance_matches_truncated_state(self):
        """Rescaled outcomes keep Bob's heterodyne variance of the moment-matched state"""
        expected = heterodyne_outcome_covariance(truncated_nla(self.state, self.spec))[0, 0]
        tolerance = 4 * expected * np.sqrt(2.0 / self.outcome.n_accept)
        self.assertAlmostEqual(np.var(self.outcome.record.bob_x), expected, delta=tolerance)

    def test_determinism_and_workers(self):
        again = apply_mbnla(self.record, self.spec, seed=13, max_workers=4, shard_size=4096)
        small = apply_mbnla(self.record, self.spec, seed=13, max_workers=1, shard_size=4096)
        self.assertTrue(again.record.same_shots(small.record))

    def test_chunked_filter_matches_whole_record(self):
        shard = 4096
        whole = apply_mbnla(self.record, self.spec, seed=13, shard_size=shard)
        stream = StreamingFilter(self.spec, seed=13, max_workers=2, shard_size=shard)
        n = len(self.record)
        pieces = [stream.filter(self.record.take(np.arange(start, min(start + 3 * shard, n))))
                  for start in range(0, n, 3 * shard)]
        stream.finish()
        self.assertEqual(stream.n_accept, whole.n_accept)
        self.assertEqual(stream.p_success, whole.p_success)
        self.assertTrue(MeasurementRecord.concatenate(pieces).same_shots(whole.record))

    def test_chunk_off_shard_boundary_rejected(self):
        stream = StreamingFilter(self.spec, seed=13, shard_size=4096)
        stream.filter(self.record.take(np.arange(1000)))
        with self.assertRaises(ParameterError):
            stream.filter(self.record.take(np.arange(1000, 2000)))

    def test_unit_gain_returns_input(self):
        outcome = apply_mbnla(self.record, FilterSpec(1.0, 2.0), seed=1)
        self.assertIs(outcome.record, self.record)
        self.assertEqual(outcome.p_success, 1.0)

    def test_refilter_rejected(self):
        with self.assertRaises(ParameterError):
            apply_mbnla(self.outcome.record, self.spec, seed=1)

    def test_empty_ensemble(self):
        zeros = np.zeros(10)
        record = MeasurementRecord(np.zeros(10, np.uint8), zeros, zeros, zeros)
        with self.assertRaises(EmptyEnsembleError) as ctx:
            apply_mbnla(record, FilterSpec(5.0, 100.0), seed=1)
        self.assertEqual(ctx.exception.n_in, 10)
        self.assertAlmostEqual(ctx.exception.p_success_upper, 0.3)


class TestMonteCarloMatchesIdealAmplifier(unittest.TestCase):
    """Post-selected witnesses agree with the exactly amplified state"""

    @classmethod
    def setUpClass(cls):
        cls.state = tmsv_from_reid(0.484)
        cls.g = 1.1
        spec = FilterSpec(cls.g, choose_cutoff(cls.state, 4.5, g_max=cls.g))
        outcome = apply_mbnla(sample_shots(cls.state, 400_000, seed=21), spec, seed=21)
        cls.intervals = bootstrap_criteria(outcome.record, n_boot=200, seed=21)
        cls.exact = criteria_from_state(analytic_nla(cls.state, cls.g))

    def test_witnesses_within_errors(self):
        for name in ('e_direct', 'e_reverse', 'duan_i'):
            with self.subTest(witness=name):
                interval = self.intervals[name]
                self.assertLess(abs(interval.point - getattr(self.exact, name)), 4 * interval.stderr)

    def test_amplification_improves_steering(self):
        self.assertLess(self.intervals['e_direct'].high, 0.484)


class TestIdealAmplifier(unittest.TestCase):
    """Test cases for the exact amplified state"""

    def test_tmsv_squeezing_increases(self):
        """g^n on a TMSV maps tanh r to g tanh r"""
        r, g = 0.5, 1.5
        expected = make_tmsv(np.arctanh(g * np.tanh(r)))
        np.testing.assert_allclose(analytic_nla(make_tmsv(r), g).cm, expected.cm, atol=1e-9)

    def test_vacuum_fixed(self):
        np.testing.assert_allclose(analytic_nla(vacuum(), 3.0).cm, vacuum().cm, atol=1e-12)
        self.assertEqual(gain_bound(vacuum()), float('inf'))

    def test_coherent_amplitude(self):
        out = analytic_nla(coherent_product(0.5), 2.0)
        np.testing.assert_allclose(out.mean, np.sqrt(2.0) * np.array([0, 0, 1.0, 0]), atol=1e-12)
        np.testing.assert_allclose(out.cm, vacuum().cm, atol=1e-12)

    def test_gain_bound(self):
        self.assertAlmostEqual(gain_bound(make_tmsv(0.5)), 1.0 / np.tanh(0.5), delta=1e-4)

    def test_gain_above_bound(self):
        with self.assertRaises(GainBoundError) as ctx:
            analytic_nla(make_tmsv(0.5), 2.5)
        self.assertAlmostEqual(ctx.exception.supremum_gain, 2.164, delta=1e-3)

    def test_unit_gain(self):
        state = make_tmsv(0.2)
        self.assertIs(analytic_nla(state, 1.0), state)
        with self.assertRaises(ParameterError):
            analytic_nla(state, 0.5)

    def test_lossy_state_bound(self):
        state = apply_loss(tmsv_from_variance(1.437), 'B', 0.3)
        bound = gain_bound(state)
        self.assertGreater(bound, 3.0)
        analytic_nla(state, 3.0)

    def test_recovers_epr_after_thermal_loss(self):
        """Amplification restores an EPR violation lost to a noisy channel"""
        state = apply_loss(tmsv_from_variance(1.5), 'B', 0.5, n_th=0.2)
        before = criteria_from_state(state)
        self.assertAlmostEqual(before.e_direct, (1.5 - 0.625 / 1.45) ** 2, places=9)
        self.assertGreater(min(before.e_direct, before.e_reverse), 1.0)
        self.assertAlmostEqual(gain_bound(state), 7.0 / 3.0, delta=1e-3)
        self.assertGreater(criteria_from_state(analytic_nla(state, 1.2)).e_direct, 1.0)
        self.assertLess(criteria_from_state(analytic_nla(state, 1.4)).e_direct, 1.0)


class TestSuccessProbability(unittest.TestCase):
    """Test cases for the success-probability oracles"""

    def test_quadrature_matches_closed_form(self):
        state = make_tmsv(0.5)
        variance = heterodyne_outcome_covariance(state)[0, 0]
        for g in (1.1, 1.3):
            with self.subTest(g=g):
                spec = FilterSpec(g, choose_cutoff(state, 4.5, g_max=g))
                exact = closed_form_success_probability(variance, spec)
                self.assertEqual(analytic_success_probability(state, spec), exact)
                self.assertAlmostEqual(analytic_success_probability(state, spec, quadrature=True), exact,
                                       places=7)

    def test_displaced_outcomes_accepted_more_often(self):
        spec = FilterSpec(1.3, 3.0)
        self.assertGreater(analytic_success_probability(coherent_product(0.5), spec),
                           analytic_success_probability(vacuum(), spec))

    def test_trivial_filters(self):
        state = make_tmsv(0.5)
        self.assertEqual(analytic_success_probability(state, FilterSpec(1.0, 3.0)), 1.0)
        self.assertEqual(closed_form_success_probability(1.0, FilterSpec(1.4, 0.0)), 1.0)

    def test_probability_falls_with_gain(self):
        state = make_tmsv(0.5)
        alpha_c = choose_cutoff(state, 4.5, g_max=1.4)
        values = [analytic_success_probability(state, FilterSpec(g, alpha_c)) for g in (1.1, 1.2, 1.4)]
        self.assertTrue(values[0] > values[1] > values[2] > 0)


class TestTruncatedFilter(unittest.TestCase):
    """Test cases for the moment-matched truncated filter"""

    def test_gap_shrinks_with_cutoff(self):
        state = make_tmsv(0.5)
        narrow = FilterSpec(1.3, choose_cutoff(state, 4, g_max=1.3))
        wide = FilterSpec(1.3, choose_cutoff(state, 8, g_max=1.3))
        gap_narrow = cutoff_fidelity_gap(state, narrow)
        gap_wide = cutoff_fidelity_gap(state, wide)
        self.assertLess(gap_wide, 1e-5)
        self.assertLess(gap_wide, gap_narrow)

    def test_unit_gain(self):
        state = make_tmsv(0.3)
        self.assertIs(truncated_nla(state, FilterSpec(1.0, 2.0)), state)


if __name__ == '__main__':
    unittest.main()
