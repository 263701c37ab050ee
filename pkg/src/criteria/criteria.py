#!/usr/bin/env python3
"""
Criteria Component
Covariance-matrix reconstruction from shot records and the EPR-steering
(product of conditional variances) and inseparability (sum of variances)
witnesses, all in shot-noise units
"""

import sys
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from gaussian.gaussian import (
    GaussianState, make_tmsv, purity_cm, from_snu, to_snu,
)
from measurement.measurement import QUAD_P, QUAD_X, MeasurementRecord
from utils.errors import (
    DegenerateInputError, InsufficientShotsError, NumericError, ParameterError,
    UnphysicalStateError,
)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MIN_SHOTS_PER_QUADRATURE = 100

# per-block sufficient statistics, one row per Alice quadrature
SUM_FIELDS = ('n', 'a', 'aa', 'bx', 'bp', 'bxbx', 'bpbp', 'abx', 'abp', 'bxbp')
N, A, AA, BX, BP, BXBX, BPBP, ABX, ABP, BXBP = range(len(SUM_FIELDS))


@dataclass(frozen=True, eq=False)
class ReconstructedCM:
    """Estimated 4x4 covariance matrix (SNU) with per-entry standard errors"""
    cm: np.ndarray
    stderr: np.ndarray
    n_x: int
    n_p: int

    @property
    def n_shots(self) -> int:
        return self.n_x + self.n_p


@dataclass
class CriteriaReport:
    """Witness values for one covariance matrix"""
    e_direct: float
    e_reverse: float
    duan_i: float
    duan_i_unit: float
    conditional_variances: Dict[str, float] = field(default_factory=dict)
    purity: Optional[float] = None

    @property
    def epr_violated(self) -> bool:
        return min(self.e_direct, self.e_reverse) < 1.0

    @property
    def entangled(self) -> bool:
        return self.duan_i < 1.0

    def to_dict(self) -> Dict[str, float]:
        out = {
            'e_direct': self.e_direct,
            'e_reverse': self.e_reverse,
            'duan_i': self.duan_i,
            'duan_i_unit': self.duan_i_unit,
        }
        out.update(self.conditional_variances)
        if self.purity is not None:
            out['purity'] = self.purity
        return out


def _accumulate(sums: np.ndarray, record: MeasurementRecord, block: int, first_shot: int,
                chunk_shots: int):
    """Add the statistics of a record whose first shot has global index first_shot"""
    n = len(record)
    for start in range(0, n, chunk_shots):
        stop = min(start + chunk_shots, n)
        a = record.alice_value[start:stop]
        bx = record.bob_x[start:stop]
        bp = record.bob_p[start:stop]
        quad = record.alice_quad[start:stop]
        features = np.stack([np.ones_like(a), a, a * a, bx, bp, bx * bx, bp * bp,
                             a * bx, a * bp, bx * bp], axis=1)
        # segments of this chunk that fall into distinct blocks
        ids = np.arange(first_shot + start, first_shot + stop) // block
        offsets = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
        for q in (QUAD_X, QUAD_P):
            masked = features * (quad == q)[:, None]
            sums[ids[offsets], q, :] += np.add.reduceat(masked, offsets, axis=0)


def _empty_sums(n: int, block_size: Optional[int]) -> Tuple[np.ndarray, int]:
    block = max(1, n if block_size is None else int(block_size))
    return np.zeros((max(1, -(-n // block)), 2, len(SUM_FIELDS))), block


def shot_sums(record: MeasurementRecord, block_size: Optional[int] = None,
              chunk_shots: int = 1 << 20) -> np.ndarray:
    """
    Sufficient statistics of a record, summed over consecutive blocks of shots

    Args:
        record: Measurement record
        block_size: Shots per block (None for a single block)
        chunk_shots: Shots processed per vectorised pass

    Returns:
        Array of shape (n_blocks, 2, len(SUM_FIELDS))
    """
    sums, block = _empty_sums(len(record), block_size)
    _accumulate(sums, record, block, 0, chunk_shots)
    return sums


def stream_sums(chunks: Iterable[MeasurementRecord], n_shots: int,
                block_size: Optional[int] = None) -> np.ndarray:
    """
    shot_sums of a record delivered as consecutive chunks, one chunk in memory at a time

    Args:
        chunks: Consecutive pieces of one record
        n_shots: Total shot count of the record
        block_size: Shots per block (None for a single block)

    Returns:
        Array of shape (n_blocks, 2, len(SUM_FIELDS))
    """
    sums, block = _empty_sums(n_shots, block_size)
    seen = 0
    for chunk in chunks:
        if seen + len(chunk) > n_shots:
            raise ParameterError(f"Chunks hold more than the declared {n_shots} shots")
        _accumulate(sums, chunk, block, seen, 1 << 20)
        seen += len(chunk)
    if seen != n_shots:
        raise ParameterError(f"Chunks hold {seen} shots, expected {n_shots}")
    return sums


def bob_outcome_covariance(sums: np.ndarray) -> np.ndarray:
    """Covariance (ddof 0, natural units) of Bob's raw outcomes from summed statistics"""
    total = sums[QUAD_X] + sums[QUAD_P]
    n = total[N]
    if n < 2:
        raise InsufficientShotsError("Need at least two shots to estimate the outcome spread")

    def cov(uv: int, u: int, v: int) -> float:
        return total[uv] / n - total[u] * total[v] / n ** 2

    xp = cov(BXBP, BX, BP)
    return np.array([[cov(BXBX, BX, BX), xp], [xp, cov(BPBP, BP, BP)]])


def cm_from_sums(sums: np.ndarray) -> ReconstructedCM:
    """
    Shot-noise-unit covariance matrix from summed statistics

    Alice's entries come from her X and P subsamples, Bob's heterodyne vacuum
    is removed (V_B = 2 Var - 1), and Alice's intra-mode X-P term is set to 0
    since she never measures both quadratures on one shot.
    """
    n_x, n_p = int(round(sums[QUAD_X, N])), int(round(sums[QUAD_P, N]))
    if min(n_x, n_p) < MIN_SHOTS_PER_QUADRATURE:
        raise InsufficientShotsError(
            f"Need at least {MIN_SHOTS_PER_QUADRATURE} shots per Alice quadrature, "
            f"got X={n_x}, P={n_p}", {'n_x': n_x, 'n_p': n_p})

    def cov(q: int, uv: int, u: int, v: int) -> float:
        n = sums[q, N]
        return sums[q, uv] / n - sums[q, u] * sums[q, v] / n ** 2

    total = sums[QUAD_X] + sums[QUAD_P]
    n_all = total[N]

    def bob_cov(uv: int, u: int, v: int) -> float:
        return total[uv] / n_all - total[u] * total[v] / n_all ** 2

    var_ax, var_ap = cov(QUAD_X, AA, A, A), cov(QUAD_P, AA, A, A)
    var_bx, var_bp = bob_cov(BXBX, BX, BX), bob_cov(BPBP, BP, BP)
    cov_bxbp = bob_cov(BXBP, BX, BP)

    cm = np.zeros((4, 4))
    cm[0, 0] = 2.0 * var_ax
    cm[1, 1] = 2.0 * var_ap
    cm[2, 2] = 2.0 * var_bx - 1.0
    cm[3, 3] = 2.0 * var_bp - 1.0
    cm[2, 3] = cm[3, 2] = 2.0 * cov_bxbp
    cm[0, 2] = cm[2, 0] = 2.0 * cov(QUAD_X, ABX, A, BX)
    cm[0, 3] = cm[3, 0] = 2.0 * cov(QUAD_X, ABP, A, BP)
    cm[1, 2] = cm[2, 1] = 2.0 * cov(QUAD_P, ABX, A, BX)
    cm[1, 3] = cm[3, 1] = 2.0 * cov(QUAD_P, ABP, A, BP)

    if not np.all(np.isfinite(cm)):
        raise NumericError("Reconstructed covariance matrix is not finite")
    if min(cm[2, 2], cm[3, 3]) <= 0:
        raise UnphysicalStateError("Deconvolved Bob variance is not positive",
                                   {'v_bx': float(cm[2, 2]), 'v_bp': float(cm[3, 3])})

    # normal-theory standard errors of (co)variance estimates, scaled to SNU
    counts = np.array([n_x, n_p, n_all, n_all], dtype=float)
    raw_var = np.array([var_ax, var_ap, var_bx, var_bp])
    stderr = np.zeros((4, 4))
    for i in range(4):
        stderr[i, i] = 2.0 * raw_var[i] * np.sqrt(2.0 / counts[i])
    for i, j in ((0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        c = cm[i, j] / 2.0
        n = counts[i] if i < 2 else n_all
        stderr[i, j] = stderr[j, i] = 2.0 * np.sqrt((raw_var[i] * raw_var[j] + c * c) / n)
    return ReconstructedCM(cm=cm, stderr=stderr, n_x=n_x, n_p=n_p)


def reconstruct_cm(record: MeasurementRecord) -> ReconstructedCM:
    """
    Estimate the state covariance matrix (SNU) from a record

    Args:
        record: Measurement record, possibly post-selected and rescaled

    Returns:
        ReconstructedCM
    """
    return cm_from_sums(shot_sums(record)[0])


def _check_cm(cm: np.ndarray) -> np.ndarray:
    cm = np.asarray(cm, dtype=float)
    if cm.shape != (4, 4) or not np.all(np.isfinite(cm)):
        raise ParameterError("Expected a finite 4x4 covariance matrix")
    return cm


def conditional_variances(cm_snu: np.ndarray) -> Dict[str, float]:
    """Inferred variances V(u|v) = V(u) - C(u,v)^2 / V(v) for both inference directions"""
    cm = _check_cm(cm_snu)

    def conditional(u: int, v: int) -> float:
        if cm[v, v] <= 0:
            raise DegenerateInputError(f"Zero conditioning variance at index {v}")
        return float(cm[u, u] - cm[u, v] ** 2 / cm[v, v])

    return {
        'v_xa_given_xb': conditional(0, 2),
        'v_pa_given_pb': conditional(1, 3),
        'v_xb_given_xa': conditional(2, 0),
        'v_pb_given_pa': conditional(3, 1),
    }


def reid_epr(cm_snu: np.ndarray) -> Tuple[float, float]:
    """
    EPR-steering products of inferred variances

    Args:
        cm_snu: Covariance matrix in shot-noise units

    Returns:
        Tuple (e_direct, e_reverse); a value below 1 witnesses EPR steering
    """
    cm = _check_cm(cm_snu)
    if np.linalg.eigvalsh(0.5 * (cm + cm.T)).min() <= 0:
        raise DegenerateInputError("Covariance matrix is not positive definite")
    v = conditional_variances(cm)
    return (v['v_xa_given_xb'] * v['v_pa_given_pb'],
            v['v_xb_given_xa'] * v['v_pb_given_pa'])


def _duan_terms(cm: np.ndarray) -> Tuple[float, float, float]:
    a = cm[0, 0] + cm[1, 1]
    b = cm[2, 2] + cm[3, 3]
    c = cm[0, 2] - cm[1, 3]
    return a, b, c


def duan_value(cm_snu: np.ndarray, lam: float) -> float:
    """[V(x_A - lam x_B) + V(p_A + lam p_B)] / (2 (1 + lam^2))"""
    a, b, c = _duan_terms(_check_cm(cm_snu))
    return float((a + lam * lam * b - 2.0 * lam * c) / (2.0 * (1.0 + lam * lam)))


def duan_inseparability(cm_snu: np.ndarray, fixed_lambda: Optional[float] = None) -> float:
    """
    Sum-of-variances inseparability witness, optimised over the weight lambda > 0

    Args:
        cm_snu: Covariance matrix in shot-noise units
        fixed_lambda: Evaluate at this weight instead of optimising

    Returns:
        I; a value below 1 witnesses entanglement
    """
    cm = _check_cm(cm_snu)
    if fixed_lambda is not None:
        if fixed_lambda <= 0:
            raise ParameterError(f"lambda must be positive, got {fixed_lambda}")
        return duan_value(cm, fixed_lambda)
    a, b, c = _duan_terms(cm)

    # lambda = tan(theta) turns the ratio into a quadratic form on the unit circle
    def objective(theta: float) -> float:
        s, co = np.sin(theta), np.cos(theta)
        return 0.5 * (a * co * co + b * s * s - 2.0 * c * s * co)

    result = minimize_scalar(objective, bounds=(0.0, 0.5 * np.pi), method='bounded',
                             options={'xatol': 1e-12})
    if not result.success:
        raise NumericError(f"Weight optimisation failed: {result.message}")
    return float(min(result.fun, objective(0.25 * np.pi)))


def duan_closed_form(cm_snu: np.ndarray) -> float:
    """Smallest eigenvalue of (1/2)[[a, -c], [-c, b]], valid when the optimal weight is positive"""
    a, b, c = _duan_terms(_check_cm(cm_snu))
    if c < 0:
        logger.warning("Optimal weight is not positive; closed form is only a lower bound")
    return float(np.linalg.eigvalsh(0.5 * np.array([[a, -c], [-c, b]])).min())


def criteria_from_cm(cm_snu: np.ndarray, with_purity: bool = False) -> CriteriaReport:
    """
    All witnesses for one covariance matrix (SNU)

    Args:
        cm_snu: Covariance matrix in shot-noise units
        with_purity: Also report the state purity

    Returns:
        CriteriaReport
    """
    cm = _check_cm(cm_snu)
    e_direct, e_reverse = reid_epr(cm)
    report = CriteriaReport(
        e_direct=e_direct,
        e_reverse=e_reverse,
        duan_i=duan_inseparability(cm),
        duan_i_unit=duan_inseparability(cm, fixed_lambda=1.0),
        conditional_variances=conditional_variances(cm),
    )
    if with_purity:
        report.purity = purity_cm(from_snu(cm))
    return report


def criteria_from_state(state: GaussianState) -> CriteriaReport:
    return criteria_from_cm(to_snu(state.cm), with_purity=True)


def perfect_epr_bound(T: float) -> float:
    """
    Inseparability witness of an infinitely squeezed EPR state after loss T on one mode

    This is the r -> infinity limit of duan_inseparability(apply_loss(make_tmsv(r), 'B', T)),
    (1 - T) / (1 + T). Finite squeezing approaches it from above with a gap of order 1 / cosh(2r).

    Args:
        T: Transmissivity in (0, 1]

    Returns:
        Bound on I reachable by deterministic operations on the lossy state
    """
    if not 0.0 < T <= 1.0:
        raise ParameterError(f"Transmissivity must lie in (0, 1], got {T}")
    return (1.0 - T) / (1.0 + T)


def tmsv_from_reid(e_target: float) -> GaussianState:
    """Pure TMSV whose EPR product equals e_target (E = 1 / cosh^2 2r)"""
    if not 0.0 < e_target <= 1.0:
        raise ParameterError(f"EPR product of a TMSV lies in (0, 1], got {e_target}")
    return make_tmsv(0.5 * np.arccosh(1.0 / np.sqrt(e_target)))


def ensemble_criteria(records: Iterable[MeasurementRecord]) -> Dict[str, Tuple[float, float]]:
    """
    Criteria averaged over independent runs, with the standard error of the mean

    Args:
        records: Sequence of measurement records from independent runs

    Returns:
        Mapping from statistic name to (mean, standard error)
    """
    records = list(records)
    if len(records) < 2:
        raise InsufficientShotsError("Run averaging needs at least two records")
    reports = [criteria_from_cm(reconstruct_cm(r).cm, with_purity=True).to_dict() for r in records]
    summary = {}
    for name in reports[0]:
        values = np.array([report[name] for report in reports])
        summary[name] = (float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size)))
    return summary
