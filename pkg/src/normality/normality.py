#!/usr/bin/env python3
"""
Normality Component
Skewness, excess kurtosis and Jarque-Bera diagnostics of post-selected ensembles,
plus the purity-consistency check used to judge the filter cut-off
"""

import sys
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np
from scipy import stats

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from measurement.measurement import QUAD_P, QUAD_X, MeasurementRecord
from utils.errors import DegenerateInputError, InsufficientShotsError, ParameterError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MIN_MOMENT_SAMPLES = 20
MIN_JB_SAMPLES = 100

# chi-square quantiles with 2 degrees of freedom (-2 ln(1 - confidence))
CHI2_2DOF = {
    0.95: 5.9915,
    0.99: 9.2103,
}


@dataclass(frozen=True)
class Moments:
    """Standardised third and fourth central moments with large-sample standard errors"""
    skewness: float
    excess_kurtosis: float
    skewness_se: float
    kurtosis_se: float
    n: int


@dataclass
class NormalityReport:
    """Jarque-Bera result for one sample, optionally with a per-stream breakdown"""
    skewness: float
    excess_kurtosis: float
    jb_statistic: float
    jb_pass: bool
    n: int
    confidence: float = 0.95
    skewness_se: float = float('nan')
    kurtosis_se: float = float('nan')
    streams: Dict[str, 'NormalityReport'] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        out = {
            'skewness': self.skewness,
            'excess_kurtosis': self.excess_kurtosis,
            'skewness_se': self.skewness_se,
            'kurtosis_se': self.kurtosis_se,
            'jb_statistic': self.jb_statistic,
            'jb_pass': self.jb_pass,
            'n': self.n,
            'confidence': self.confidence,
        }
        if self.streams:
            out['streams'] = {name: report.to_dict() for name, report in self.streams.items()}
        return out


def moments(samples: Iterable[float]) -> Moments:
    """
    Population-form skewness m3/m2^(3/2) and excess kurtosis m4/m2^2 - 3

    Args:
        samples: 1-D sample, n >= 20

    Returns:
        Moments with standard errors sqrt(6/n) and sqrt(24/n)
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < MIN_MOMENT_SAMPLES:
        raise InsufficientShotsError(f"Moments need at least {MIN_MOMENT_SAMPLES} samples, got {n}")
    if np.var(x) == 0:
        raise DegenerateInputError("Sample has zero variance")
    return Moments(
        skewness=float(stats.skew(x, bias=True)),
        excess_kurtosis=float(stats.kurtosis(x, fisher=True, bias=True)),
        skewness_se=float(np.sqrt(6.0 / n)),
        kurtosis_se=float(np.sqrt(24.0 / n)),
        n=int(n),
    )


def jb_statistic(n: int, skewness: float, excess_kurtosis: float) -> float:
    """(n/6)(S^2 + K^2/4)"""
    return float(n / 6.0 * (skewness ** 2 + excess_kurtosis ** 2 / 4.0))


def _critical_value(confidence: float) -> float:
    if confidence not in CHI2_2DOF:
        raise ParameterError(f"Unsupported confidence {confidence}; choose one of {sorted(CHI2_2DOF)}")
    return CHI2_2DOF[confidence]


def report_from_moments(m: Moments, confidence: float = 0.95) -> NormalityReport:
    statistic = jb_statistic(m.n, m.skewness, m.excess_kurtosis)
    return NormalityReport(
        skewness=m.skewness,
        excess_kurtosis=m.excess_kurtosis,
        jb_statistic=statistic,
        jb_pass=statistic < _critical_value(confidence),
        n=m.n,
        confidence=confidence,
        skewness_se=m.skewness_se,
        kurtosis_se=m.kurtosis_se,
    )


def jarque_bera(samples: Iterable[float], confidence: float = 0.95) -> NormalityReport:
    """
    Jarque-Bera normality test

    Args:
        samples: 1-D sample, n >= 100
        confidence: 0.95 (default) or 0.99

    Returns:
        NormalityReport; jb_pass when the statistic is below the chi-square(2) quantile
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_JB_SAMPLES:
        raise InsufficientShotsError(f"Jarque-Bera needs at least {MIN_JB_SAMPLES} samples, got {x.size}")
    return report_from_moments(moments(x), confidence)


def record_streams(record: MeasurementRecord) -> Dict[str, np.ndarray]:
    """The four marginal streams of a record"""
    return {
        'bob_x': record.bob_x,
        'bob_p': record.bob_p,
        'alice_x': record.alice_value[record.alice_quad == QUAD_X],
        'alice_p': record.alice_value[record.alice_quad == QUAD_P],
    }


def _summarise(streams: Dict[str, NormalityReport], n: int, confidence: float) -> NormalityReport:
    head = streams['bob_x']
    failing = [name for name, report in streams.items() if not report.jb_pass]
    if failing:
        logger.warning(f"Jarque-Bera rejects normality for streams: {', '.join(failing)}")
    return NormalityReport(
        skewness=head.skewness,
        excess_kurtosis=head.excess_kurtosis,
        jb_statistic=head.jb_statistic,
        jb_pass=not failing,
        n=n,
        confidence=confidence,
        skewness_se=head.skewness_se,
        kurtosis_se=head.kurtosis_se,
        streams=streams,
    )


def normality_report(record: MeasurementRecord, confidence: float = 0.95) -> NormalityReport:
    """
    Jarque-Bera test of every stream of a record

    The headline figures are those of Bob's x stream; the record passes only
    if every stream passes.

    Args:
        record: Measurement record (typically post-selected)
        confidence: Test confidence

    Returns:
        NormalityReport with a per-stream breakdown
    """
    streams = {name: jarque_bera(values, confidence) for name, values in record_streams(record).items()}
    return _summarise(streams, len(record), confidence)


class StreamingMoments:
    """Mergeable accumulator of count, mean and central moments up to fourth order"""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m3 = 0.0
        self.m4 = 0.0

    @classmethod
    def from_samples(cls, samples: Iterable[float]) -> 'StreamingMoments':
        acc = cls()
        acc.add(samples)
        return acc

    def add(self, samples: Iterable[float]):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            return
        batch = StreamingMoments()
        batch.n = int(x.size)
        batch.mean = float(x.mean())
        d = x - batch.mean
        batch.m2 = float(np.sum(d ** 2))
        batch.m3 = float(np.sum(d ** 3))
        batch.m4 = float(np.sum(d ** 4))
        self.merge(batch)

    def merge(self, other: 'StreamingMoments'):
        """Combine with another accumulator (pairwise update of central sums)"""
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean = other.n, other.mean
            self.m2, self.m3, self.m4 = other.m2, other.m3, other.m4
            return
        n_a, n_b = self.n, other.n
        n = n_a + n_b
        delta = other.mean - self.mean
        d_n = delta / n
        m2 = self.m2 + other.m2 + delta * d_n * n_a * n_b
        m3 = (self.m3 + other.m3
              + delta * d_n ** 2 * n_a * n_b * (n_a - n_b)
              + 3.0 * d_n * (n_a * other.m2 - n_b * self.m2))
        m4 = (self.m4 + other.m4
              + delta * d_n ** 3 * n_a * n_b * (n_a * n_a - n_a * n_b + n_b * n_b)
              + 6.0 * d_n ** 2 * (n_a * n_a * other.m2 + n_b * n_b * self.m2)
              + 4.0 * d_n * (n_a * other.m3 - n_b * self.m3))
        self.n, self.mean = n, self.mean + d_n * n_b
        self.m2, self.m3, self.m4 = m2, m3, m4

    def variance(self) -> float:
        return self.m2 / self.n if self.n else float('nan')

    def to_moments(self) -> Moments:
        if self.n < MIN_MOMENT_SAMPLES:
            raise InsufficientShotsError(f"Moments need at least {MIN_MOMENT_SAMPLES} samples, got {self.n}")
        if self.m2 == 0:
            raise DegenerateInputError("Sample has zero variance")
        var = self.m2 / self.n
        return Moments(
            skewness=float(self.m3 / self.n / var ** 1.5),
            excess_kurtosis=float(self.m4 / self.n / var ** 2 - 3.0),
            skewness_se=float(np.sqrt(6.0 / self.n)),
            kurtosis_se=float(np.sqrt(24.0 / self.n)),
            n=self.n,
        )


class NormalityAccumulator:
    """Per-stream moment accumulators fed one record chunk at a time"""

    def __init__(self):
        self.streams = {name: StreamingMoments() for name in ('bob_x', 'bob_p', 'alice_x', 'alice_p')}
        self.n = 0

    def add(self, record: MeasurementRecord):
        for name, values in record_streams(record).items():
            self.streams[name].add(values)
        self.n += len(record)

    def report(self, confidence: float = 0.95) -> NormalityReport:
        """Same result as normality_report on the concatenated chunks, up to rounding"""
        reports = {}
        for name, acc in self.streams.items():
            if acc.n < MIN_JB_SAMPLES:
                raise InsufficientShotsError(
                    f"Jarque-Bera needs at least {MIN_JB_SAMPLES} samples, got {acc.n}")
            reports[name] = report_from_moments(acc.to_moments(), confidence)
        return _summarise(reports, self.n, confidence)


@dataclass(frozen=True)
class PurityCheck:
    """Measured purity of the post-selected state against the ideal amplifier prediction"""
    measured: float
    expected: float
    stderr: float
    n_sigma: float

    @property
    def z_score(self) -> float:
        return abs(self.measured - self.expected) / self.stderr if self.stderr > 0 else float('inf')

    @property
    def consistent(self) -> bool:
        return self.z_score <= self.n_sigma


def purity_consistency(measured: float, stderr: float, expected: float,
                       n_sigma: float = 2.0) -> PurityCheck:
    """
    Whether a measured purity agrees with the ideal-amplifier purity within n_sigma errors

    Args:
        measured: Purity of the reconstructed post-selected state
        stderr: Its standard error (e.g. from the bootstrap)
        expected: Purity of the ideally amplified state
        n_sigma: Tolerance in standard errors

    Returns:
        PurityCheck
    """
    check = PurityCheck(measured=float(measured), expected=float(expected), stderr=float(stderr),
                        n_sigma=float(n_sigma))
    if not check.consistent:
        logger.warning(f"Purity {measured:.5f} deviates from the ideal {expected:.5f} "
                       f"by {check.z_score:.1f} standard errors; consider a larger cut-off")
    return check
