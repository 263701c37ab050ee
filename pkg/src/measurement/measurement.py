#!/usr/bin/env python3
"""
Measurement Component
Samples per-shot records of Alice's alternating homodyne and Bob's heterodyne
outcomes from an exact Gaussian state

Shots are drawn in fixed-size shards. Each shard has its own counter-based
Philox stream keyed by (seed, stream id, shard index), so a record is a pure
function of (state, n, seed) whatever the worker count.
"""

import sys
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from gaussian.gaussian import GaussianState, MODES, VACUUM_VARIANCE
from utils.errors import InsufficientShotsError, NumericError, ParameterError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

QUAD_X = 0
QUAD_P = 1

SHARD_SHOTS = 1 << 18
DEFAULT_MEMORY_BUDGET = 50_000_000

# Independent random streams derived from one user seed
SAMPLING_STREAM = 0
FILTER_STREAM = 1
BOOTSTRAP_STREAM = 2

CONVENTION = 'nat-v1/2'
SEED_LIMIT = 1 << 64


def validate_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"Seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < SEED_LIMIT:
        raise ParameterError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


def shard_generator(seed: int, stream: int, shard_index: int) -> np.random.Generator:
    """Counter-based generator for one shard of one stream"""
    sequence = np.random.SeedSequence(validate_seed(seed), spawn_key=(stream, shard_index))
    return np.random.Generator(np.random.Philox(sequence))


def shard_bounds(n: int, shard_size: int = SHARD_SHOTS) -> List[range]:
    return [range(start, min(start + shard_size, n)) for start in range(0, n, shard_size)]


@dataclass(frozen=True)
class RecordMeta:
    """Provenance carried by every measurement record"""
    source: str = ''
    seed: int = 0
    n_requested: int = 0
    convention: str = CONVENTION
    gain: float = 1.0
    rescaled: bool = False
    alpha_c: Optional[float] = None
    filter_seed: Optional[int] = None
    state_digest: str = ''


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """
    Per-shot outcomes

    alice_quad[i] is QUAD_X or QUAD_P, alice_value[i] Alice's homodyne outcome,
    (bob_x[i], bob_p[i]) Bob's heterodyne outcome, all in natural units.
    """
    alice_quad: np.ndarray
    alice_value: np.ndarray
    bob_x: np.ndarray
    bob_p: np.ndarray
    meta: RecordMeta = field(default_factory=RecordMeta)

    def __post_init__(self):
        quad = np.asarray(self.alice_quad, dtype=np.uint8)
        columns = [np.asarray(c, dtype=float) for c in (self.alice_value, self.bob_x, self.bob_p)]
        lengths = {quad.shape[0]} | {c.shape[0] for c in columns}
        if len(lengths) != 1:
            raise ParameterError(f"Record columns have inconsistent lengths {sorted(lengths)}")
        if quad.size and quad.max() > QUAD_P:
            raise ParameterError("alice_quad entries must be 0 (X) or 1 (P)")
        for name, column in zip(('alice_quad', 'alice_value', 'bob_x', 'bob_p'), [quad] + columns):
            column.setflags(write=False)
            object.__setattr__(self, name, column)

    def __len__(self) -> int:
        return int(self.alice_quad.shape[0])

    @property
    def n_shots(self) -> int:
        return len(self)

    @property
    def alpha(self) -> np.ndarray:
        """Bob's complex heterodyne amplitude (bob_x + i bob_p) / sqrt(2)"""
        return (self.bob_x + 1j * self.bob_p) / np.sqrt(2.0)

    def quadrature_counts(self) -> Dict[str, int]:
        n_p = int(np.count_nonzero(self.alice_quad))
        return {'x': len(self) - n_p, 'p': n_p}

    def take(self, indices: np.ndarray, meta: Optional[RecordMeta] = None) -> 'MeasurementRecord':
        """Shots at the given indices (with repetition allowed)"""
        return MeasurementRecord(
            alice_quad=self.alice_quad[indices],
            alice_value=self.alice_value[indices],
            bob_x=self.bob_x[indices],
            bob_p=self.bob_p[indices],
            meta=self.meta if meta is None else meta,
        )

    def quadrature_subsample(self, quad: int) -> 'MeasurementRecord':
        return self.take(np.flatnonzero(self.alice_quad == quad))

    def with_meta(self, **changes) -> 'MeasurementRecord':
        return MeasurementRecord(self.alice_quad, self.alice_value, self.bob_x, self.bob_p,
                                 meta=replace(self.meta, **changes))

    def same_shots(self, other: 'MeasurementRecord') -> bool:
        """Bitwise equality of the shot columns"""
        return (len(self) == len(other)
                and np.array_equal(self.alice_quad, other.alice_quad)
                and np.array_equal(self.alice_value, other.alice_value)
                and np.array_equal(self.bob_x, other.bob_x)
                and np.array_equal(self.bob_p, other.bob_p))

    @classmethod
    def concatenate(cls, records: Sequence['MeasurementRecord'],
                    meta: Optional[RecordMeta] = None) -> 'MeasurementRecord':
        if not records:
            raise ParameterError("Cannot concatenate an empty list of records")
        return cls(
            alice_quad=np.concatenate([r.alice_quad for r in records]),
            alice_value=np.concatenate([r.alice_value for r in records]),
            bob_x=np.concatenate([r.bob_x for r in records]),
            bob_p=np.concatenate([r.bob_p for r in records]),
            meta=records[0].meta if meta is None else meta,
        )


def heterodyne_outcome_covariance(state: GaussianState) -> np.ndarray:
    """Covariance of Bob's heterodyne outcome pair: cm_B + (1/2) I"""
    return state.block('B') + VACUUM_VARIANCE * np.eye(2)


def conditional_cm_after_heterodyne(state: GaussianState, measured_mode: str) -> np.ndarray:
    """
    Covariance matrix of the unmeasured mode after heterodyne on measured_mode

    Args:
        state: Two-mode Gaussian state
        measured_mode: 'A' or 'B'

    Returns:
        2x2 conditional covariance matrix (independent of the outcome)
    """
    if measured_mode not in MODES:
        raise ParameterError(f"Unknown mode {measured_mode!r}")
    kept_mode = 'A' if measured_mode == 'B' else 'B'
    m = 2 * MODES[measured_mode]
    k = 2 * MODES[kept_mode]
    measured = state.cm[m:m + 2, m:m + 2] + VACUUM_VARIANCE * np.eye(2)
    cross = state.cm[k:k + 2, m:m + 2]
    try:
        solved = np.linalg.solve(measured, cross.T)
    except np.linalg.LinAlgError as e:
        raise NumericError("Heterodyne conditioning matrix is singular") from e
    conditional = state.cm[k:k + 2, k:k + 2] - cross @ solved
    return 0.5 * (conditional + conditional.T)


class ShotSampler:
    """Exact joint sampler for one state, shared by all shards"""

    def __init__(self, state: GaussianState, seed: int, label: str = ''):
        self.state = state
        self.seed = validate_seed(seed)
        self.label = label or state.describe()

        self.bob_mean = state.mean[2:4].copy()
        self.alice_mean = state.mean[0:2].copy()
        bob_cov = heterodyne_outcome_covariance(state)
        try:
            self.bob_chol = np.linalg.cholesky(bob_cov)
        except np.linalg.LinAlgError as e:
            raise NumericError("Heterodyne outcome covariance is not positive definite") from e

        # Alice's quadrature q given Bob's outcome: linear regression plus residual
        cross = state.cm[0:2, 2:4]
        self.regression = np.linalg.solve(bob_cov, cross.T).T
        residual = np.diag(state.cm[0:2, 0:2]) - np.einsum('ij,ij->i', self.regression, cross)
        self.residual_sd = np.sqrt(np.clip(residual, 0.0, None))

    def draw(self, start: int, stop: int, shard_index: int) -> MeasurementRecord:
        count = stop - start
        rng = shard_generator(self.seed, SAMPLING_STREAM, shard_index)
        z = rng.standard_normal((count, 3))
        bob = self.bob_mean + z[:, :2] @ self.bob_chol.T

        quad = (np.arange(start, stop) % 2).astype(np.uint8)
        deviation = bob - self.bob_mean
        alice = (self.alice_mean[quad]
                 + np.einsum('ij,ij->i', self.regression[quad], deviation)
                 + self.residual_sd[quad] * z[:, 2])
        return MeasurementRecord(quad, alice, bob[:, 0], bob[:, 1])


def iter_shards(state: GaussianState,
                n: int,
                seed: int,
                max_workers: int = 1,
                shard_size: int = SHARD_SHOTS) -> Iterator[MeasurementRecord]:
    """
    Yield the record shard by shard, in order

    At most max_workers shards are held in memory at once.
    """
    if n < 1:
        raise InsufficientShotsError(f"Number of shots must be positive, got {n}")
    if shard_size < 2 or shard_size % 2:
        raise ParameterError("Shard size must be an even integer >= 2")
    sampler = ShotSampler(state, seed)
    bounds = shard_bounds(n, shard_size)
    workers = max(1, int(max_workers))

    with ThreadPoolExecutor(max_workers=workers) as executor:
        for window in range(0, len(bounds), workers):
            batch = list(enumerate(bounds[window:window + workers], start=window))
            futures = [executor.submit(sampler.draw, b.start, b.stop, i) for i, b in batch]
            for future in futures:
                yield future.result()


def sample_shots(state: GaussianState,
                 n: int,
                 seed: int,
                 max_workers: int = 1,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET,
                 shard_size: int = SHARD_SHOTS,
                 digest: str = '') -> MeasurementRecord:
    """
    Sample n shots: Alice homodynes X on even and P on odd shots, Bob heterodynes

    Args:
        state: Source state
        n: Number of shots
        seed: Unsigned 64-bit seed
        max_workers: Worker threads (does not change the output)
        memory_budget: Largest in-memory record; use iter_shards beyond it
        shard_size: Shots per shard
        digest: Optional state digest stored in the record metadata

    Returns:
        MeasurementRecord of length n
    """
    if n > memory_budget:
        raise ParameterError(
            f"{n} shots exceed the in-memory budget of {memory_budget}; stream with iter_shards",
            {'n': n, 'memory_budget': memory_budget})
    meta = RecordMeta(source=state.describe(), seed=validate_seed(seed), n_requested=int(n),
                      state_digest=digest)
    shards = list(iter_shards(state, n, seed, max_workers=max_workers, shard_size=shard_size))
    record = MeasurementRecord.concatenate(shards, meta=meta)
    logger.info(f"Sampled {len(record)} shots from {meta.source} (seed {seed})")
    return record
