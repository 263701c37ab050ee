#!/usr/bin/env python3
"""
Bootstrap Component
Percentile bootstrap intervals for statistics of shot records

Two resampling paths share one interval routine: a generic one that resamples
shots and recomputes an arbitrary statistic, and a fast one that resamples
blocks of per-shot sufficient statistics. With a block size of one shot the
second path is exactly the shot-level bootstrap of covariance-based statistics.
"""

import sys
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.stats import norm
from tqdm import tqdm

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from criteria.criteria import cm_from_sums, criteria_from_cm, shot_sums, stream_sums
from measurement.measurement import BOOTSTRAP_STREAM, MeasurementRecord, shard_generator
from utils.errors import MBNLAError, NumericError, ParameterError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MIN_RESAMPLES = 200
DEFAULT_RESAMPLES = 500
DEFAULT_BLOCKS = 20_000
DEFAULT_SIGMA = 2.0
MAX_REDRAW_FACTOR = 10


@dataclass(frozen=True)
class BootstrapInterval:
    """Percentile interval at +/- sigma-equivalent coverage"""
    point: float
    low: float
    high: float
    stderr: float
    n_boot: int
    redraws: int = 0
    sigma: float = DEFAULT_SIGMA

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high

    def to_dict(self) -> Dict[str, float]:
        return {
            'value': self.point,
            'ci_low': self.low,
            'ci_high': self.high,
            'stderr': self.stderr,
            'n_boot': self.n_boot,
            'redraws': self.redraws,
        }


def percentile_interval(point: float, replicates: Sequence[float], sigma: float = DEFAULT_SIGMA,
                        redraws: int = 0) -> BootstrapInterval:
    """
    Percentile interval of bootstrap replicates at the two-sided coverage of +/- sigma

    The interval is widened if needed so that it contains the point estimate.
    """
    values = np.asarray(replicates, dtype=float)
    tail = 100.0 * norm.sf(sigma)
    low, high = np.percentile(values, [tail, 100.0 - tail])
    return BootstrapInterval(
        point=float(point),
        low=float(min(low, point)),
        high=float(max(high, point)),
        stderr=float(np.std(values, ddof=1)),
        n_boot=int(values.size),
        redraws=redraws,
        sigma=sigma,
    )


def _check_resamples(n_boot: int):
    if n_boot < MIN_RESAMPLES:
        raise ParameterError(f"At least {MIN_RESAMPLES} bootstrap resamples are required, got {n_boot}")


def _resample_loop(draw: Callable[[np.random.Generator], Dict[str, float]], names: Sequence[str],
                   n_boot: int, seed: int, progress: bool) -> Dict[str, list]:
    rng = shard_generator(seed, BOOTSTRAP_STREAM, 0)
    replicates = {name: [] for name in names}
    redraws = 0
    limit = MAX_REDRAW_FACTOR * n_boot
    with tqdm(total=n_boot, desc="Bootstrap", unit="resample", disable=not progress) as pbar:
        accepted = 0
        while accepted < n_boot:
            try:
                values = draw(rng)
            except (MBNLAError, FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError):
                redraws += 1
                if redraws > limit:
                    raise NumericError(f"Bootstrap statistic failed on {redraws} resamples")
                continue
            for name in names:
                replicates[name].append(values[name])
            accepted += 1
            pbar.update(1)
    if redraws:
        logger.warning(f"Bootstrap redrew {redraws} failed resamples")
    replicates['__redraws__'] = redraws
    return replicates


def bootstrap_ci(data: Union[MeasurementRecord, np.ndarray],
                 statistic: Callable,
                 n_boot: int = DEFAULT_RESAMPLES,
                 seed: int = 0,
                 sigma: float = DEFAULT_SIGMA,
                 progress: bool = False) -> BootstrapInterval:
    """
    Shot-level percentile bootstrap of an arbitrary statistic

    Args:
        data: Record or 1-D sample array
        statistic: Callable returning a float
        n_boot: Number of resamples (>= 200)
        seed: Bootstrap seed
        sigma: Coverage in standard-normal units (2 gives 2.275% / 97.725%)
        progress: Show a progress bar

    Returns:
        BootstrapInterval
    """
    _check_resamples(n_boot)
    n = len(data)
    if n == 0:
        raise ParameterError("Cannot bootstrap an empty sample")
    point = float(statistic(data))

    def draw(rng: np.random.Generator) -> Dict[str, float]:
        index = rng.integers(0, n, n)
        sample = data.take(index) if isinstance(data, MeasurementRecord) else np.asarray(data)[index]
        return {'value': float(statistic(sample))}

    replicates = _resample_loop(draw, ['value'], n_boot, seed, progress)
    return percentile_interval(point, replicates['value'], sigma, replicates['__redraws__'])


def _block_size(n: int, n_blocks: int) -> int:
    return max(1, -(-n // max(1, int(n_blocks))))


class MomentBlocks:
    """Per-block sufficient statistics of a record for fast resampling"""

    def __init__(self, record: MeasurementRecord, n_blocks: int = DEFAULT_BLOCKS):
        n = len(record)
        if n == 0:
            raise ParameterError("Cannot build moment blocks from an empty record")
        self.block_size = _block_size(n, n_blocks)
        self.sums = shot_sums(record, self.block_size)
        self.n_shots = n

    @classmethod
    def from_chunks(cls, chunks: Iterable[MeasurementRecord], n_shots: int,
                    n_blocks: int = DEFAULT_BLOCKS) -> 'MomentBlocks':
        """Same blocks as the constructor, built from a record read chunk by chunk"""
        if n_shots == 0:
            raise ParameterError("Cannot build moment blocks from an empty record")
        blocks = cls.__new__(cls)
        blocks.block_size = _block_size(n_shots, n_blocks)
        blocks.sums = stream_sums(chunks, n_shots, blocks.block_size)
        blocks.n_shots = int(n_shots)
        return blocks

    @property
    def n_blocks(self) -> int:
        return int(self.sums.shape[0])

    def total(self) -> np.ndarray:
        return self.sums.sum(axis=0)

    def resample(self, rng: np.random.Generator) -> np.ndarray:
        counts = np.bincount(rng.integers(0, self.n_blocks, self.n_blocks), minlength=self.n_blocks)
        return np.tensordot(counts.astype(float), self.sums, axes=1)


def _cm_statistics(sums: np.ndarray) -> Dict[str, float]:
    return criteria_from_cm(cm_from_sums(sums).cm, with_purity=True).to_dict()


def bootstrap_criteria(record: Union[MeasurementRecord, MomentBlocks],
                       n_boot: int = DEFAULT_RESAMPLES,
                       seed: int = 0,
                       sigma: float = DEFAULT_SIGMA,
                       n_blocks: int = DEFAULT_BLOCKS,
                       statistic: Optional[Callable[[np.ndarray], Dict[str, float]]] = None,
                       progress: bool = False) -> Dict[str, BootstrapInterval]:
    """
    Bootstrap intervals for every covariance-based statistic of a record

    Args:
        record: Measurement record, or its precomputed MomentBlocks
        n_boot: Number of resamples (>= 200)
        seed: Bootstrap seed
        sigma: Coverage in standard-normal units
        n_blocks: Number of resampling blocks (block size 1 when the record is smaller);
            ignored for precomputed blocks
        statistic: Maps summed statistics (2 x len(SUM_FIELDS)) to named values;
            defaults to the EPR and inseparability witnesses
        progress: Show a progress bar

    Returns:
        Mapping from statistic name to BootstrapInterval
    """
    _check_resamples(n_boot)
    statistic = statistic or _cm_statistics
    blocks = record if isinstance(record, MomentBlocks) else MomentBlocks(record, n_blocks)
    point = statistic(blocks.total())
    names = list(point)

    replicates = _resample_loop(lambda rng: statistic(blocks.resample(rng)), names, n_boot,
                                seed, progress)
    redraws = replicates['__redraws__']
    logger.debug(f"Bootstrapped {len(names)} statistics over {blocks.n_blocks} blocks "
                 f"of {blocks.block_size} shots")
    return {name: percentile_interval(point[name], replicates[name], sigma, redraws)
            for name in names}

