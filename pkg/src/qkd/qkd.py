#!/usr/bin/env python3
"""
QKD Component
Asymptotic direct-reconciliation key rate of a heterodyne-heterodyne protocol
built on a measured or exact covariance matrix

Every impurity is attributed to the eavesdropper: the covariance matrix is read
as a pure EPR source sent through a lossy channel with excess noise, and the
Holevo bound is S(AB) - S(B|A) with A conditioned on Alice's heterodyne.
All matrices handed to this module are in shot-noise units.
"""

import sys
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import least_squares

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from criteria.bootstrap import bootstrap_criteria
from criteria.criteria import cm_from_sums, reconstruct_cm
from gaussian.gaussian import (
    GaussianState, from_snu, project_to_physical, symplectic_eigenvalues, to_snu,
    von_neumann_entropy,
)
from measurement.measurement import MeasurementRecord, conditional_cm_after_heterodyne
from nla.nla import FilterSpec, analytic_nla, apply_mbnla
from utils.errors import MBNLAError, ParameterError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

DEFAULT_BETA = 0.98
MISMATCH_THRESHOLD = 1e-3
DEGENERATE_TOL = 1e-9
Z = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class EffectiveChannel:
    """Pure source of variance v through transmissivity t with excess noise xi (SNU)"""
    v: float
    t: float
    xi: float
    residual: float = 0.0
    degenerate: bool = False

    @property
    def mismatch(self) -> bool:
        return self.residual > MISMATCH_THRESHOLD

    def model_cm(self) -> np.ndarray:
        return channel_model_cm(self.v, self.t, self.xi)


@dataclass
class KeyRateReport:
    """Key-rate figures for one covariance matrix, in bits per channel use"""
    i_ab: float
    s_ae: float
    k: float
    beta_rec: float
    nu: List[float] = field(default_factory=list)
    t_eff: float = float('nan')
    xi: float = float('nan')
    source_v: float = float('nan')
    gain: float = 1.0
    clamped: bool = False
    model_mismatch: bool = False
    degenerate: bool = False
    k_low: Optional[float] = None
    k_high: Optional[float] = None
    k_stderr: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            'gain': self.gain,
            'i_ab': self.i_ab,
            's_ae': self.s_ae,
            'k': self.k,
            'beta_rec': self.beta_rec,
            'nu': list(self.nu),
            't_eff': self.t_eff,
            'xi': self.xi,
            'source_v': self.source_v,
            'clamped': self.clamped,
            'model_mismatch': self.model_mismatch,
            'degenerate': self.degenerate,
            'k_low': self.k_low,
            'k_high': self.k_high,
            'k_stderr': self.k_stderr,
            'error': self.error,
        }


def channel_model_cm(v: float, t: float, xi: float) -> np.ndarray:
    """Standard-form covariance matrix of TMSV(v) through loss t with excess noise xi on Bob"""
    c = np.sqrt(max(t * (v * v - 1.0), 0.0))
    b = t * (v - 1.0 + xi) + 1.0
    cm = np.zeros((4, 4))
    cm[0:2, 0:2] = v * np.eye(2)
    cm[2:4, 2:4] = b * np.eye(2)
    cm[0:2, 2:4] = c * Z
    cm[2:4, 0:2] = c * Z
    return cm


def _invariants(cm: np.ndarray) -> np.ndarray:
    return np.array([
        np.linalg.det(cm[0:2, 0:2]),
        np.linalg.det(cm[2:4, 2:4]),
        np.linalg.det(cm[0:2, 2:4]),
        np.linalg.det(cm),
    ])


def effective_channel(cm_snu: np.ndarray) -> EffectiveChannel:
    """
    Identify the pure-source lossy-noisy channel that reproduces a covariance matrix

    Args:
        cm_snu: Covariance matrix in shot-noise units

    Returns:
        EffectiveChannel fitted to the four standard-form invariants
    """
    cm = np.asarray(cm_snu, dtype=float)
    det_a, det_b, det_c, _ = _invariants(cm)
    v = float(np.sqrt(max(det_a, 0.0)))
    b = float(np.sqrt(max(det_b, 0.0)))
    c2 = abs(det_c)

    if v <= 1.0 + DEGENERATE_TOL or c2 <= DEGENERATE_TOL:
        # no correlations: the channel family is degenerate
        t = 1.0 if v <= 1.0 + DEGENERATE_TOL else 0.0
        logger.debug(f"Degenerate effective channel (V={v:.6g}, |det C|={c2:.3e})")
        return EffectiveChannel(v=max(v, 1.0), t=t, xi=max(b - 1.0, 0.0) if t == 0.0 else 0.0,
                                degenerate=True)

    t0 = c2 / (v * v - 1.0)
    xi0 = (b - 1.0) / t0 - v + 1.0
    target = _invariants(cm)
    scale = np.maximum(np.abs(target), 1.0)

    def residuals(params: np.ndarray) -> np.ndarray:
        model = channel_model_cm(*params)
        inv = _invariants(model)
        # det C of the model is negative by construction (Z sign pattern)
        inv[2] = abs(inv[2])
        return (inv - np.array([target[0], target[1], c2, target[3]])) / scale

    fit = least_squares(residuals, x0=[v, t0, xi0],
                        bounds=([1.0, 0.0, -np.inf], [np.inf, np.inf, np.inf]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    v_fit, t_fit, xi_fit = (float(x) for x in fit.x)
    residual = float(np.linalg.norm(channel_model_cm(v_fit, t_fit, xi_fit) - _standard_form(cm)))
    channel = EffectiveChannel(v=v_fit, t=t_fit, xi=xi_fit, residual=residual)
    if channel.mismatch:
        logger.warning(f"Effective channel model mismatch: residual {residual:.3e} SNU")
    return channel


def _standard_form(cm: np.ndarray) -> np.ndarray:
    """Symmetric standard form built from the local invariants"""
    det_a, det_b, det_c, _ = _invariants(cm)
    out = np.zeros((4, 4))
    out[0:2, 0:2] = np.sqrt(max(det_a, 0.0)) * np.eye(2)
    out[2:4, 2:4] = np.sqrt(max(det_b, 0.0)) * np.eye(2)
    out[0:2, 2:4] = np.sqrt(abs(det_c)) * Z
    out[2:4, 0:2] = out[0:2, 2:4]
    return out


def mutual_information(cm_snu: np.ndarray) -> float:
    """
    Shannon information between Alice's and Bob's heterodyne outcomes (both quadratures)

    Args:
        cm_snu: Covariance matrix in shot-noise units

    Returns:
        I(A:B) in bits per channel use
    """
    sigma = np.asarray(cm_snu, dtype=float) + np.eye(4)
    ratio = np.linalg.det(sigma[0:2, 0:2]) * np.linalg.det(sigma[2:4, 2:4]) / np.linalg.det(sigma)
    return float(max(0.5 * np.log2(ratio), 0.0))


def _physical_state(cm_snu: np.ndarray) -> GaussianState:
    cm, distance = project_to_physical(from_snu(cm_snu))
    if distance > 0:
        logger.debug(f"Key-rate input projected by {distance:.3e}")
    return GaussianState(cm)


def holevo_bound(cm_snu: np.ndarray) -> Tuple[float, List[float], bool]:
    """
    Eavesdropper's Holevo information S(AB) - S(B|A)

    Args:
        cm_snu: Covariance matrix in shot-noise units

    Returns:
        Tuple (s_ae in bits, symplectic eigenvalues used in SNU, clamped flag)
    """
    state = _physical_state(cm_snu)
    s_ab = von_neumann_entropy(state.cm)
    conditional = conditional_cm_after_heterodyne(state, 'A')
    s_b_given_a = von_neumann_entropy(conditional)
    nu = [float(x) for x in to_snu(symplectic_eigenvalues(state.cm))]
    nu.extend(float(x) for x in to_snu(symplectic_eigenvalues(conditional)))
    s_ae = s_ab - s_b_given_a
    clamped = s_ae < 0
    if clamped:
        logger.info(f"Holevo bound {s_ae:.3e} clamped to 0 (pure source)")
        s_ae = 0.0
    return float(s_ae), nu, clamped


def key_rate(cm_snu: np.ndarray, beta_rec: float = DEFAULT_BETA, gain: float = 1.0) -> KeyRateReport:
    """
    Asymptotic key rate k = beta_rec * I(A:B) - S(A:E)

    Args:
        cm_snu: Covariance matrix in shot-noise units
        beta_rec: Reconciliation efficiency in [0, 1]
        gain: Gain recorded in the report

    Returns:
        KeyRateReport (k may be negative)
    """
    if not 0.0 <= beta_rec <= 1.0:
        raise ParameterError(f"Reconciliation efficiency must lie in [0, 1], got {beta_rec}")
    i_ab = mutual_information(cm_snu)
    s_ae, nu, clamped = holevo_bound(cm_snu)
    channel = effective_channel(cm_snu)
    return KeyRateReport(
        i_ab=i_ab,
        s_ae=s_ae,
        k=beta_rec * i_ab - s_ae,
        beta_rec=beta_rec,
        nu=nu,
        t_eff=channel.t,
        xi=channel.xi,
        source_v=channel.v,
        gain=gain,
        clamped=clamped,
        model_mismatch=channel.mismatch,
        degenerate=channel.degenerate,
    )


def key_rate_statistic(beta_rec: float):
    def statistic(sums: np.ndarray) -> Dict[str, float]:
        return {'k': key_rate(cm_from_sums(sums).cm, beta_rec).k}
    return statistic


def _failed(gain: float, beta_rec: float, error: Exception) -> KeyRateReport:
    logger.warning(f"Key rate at g={gain:g} failed: {error}")
    nan = float('nan')
    return KeyRateReport(i_ab=nan, s_ae=nan, k=nan, beta_rec=beta_rec, gain=gain, error=str(error))


def keyrate_sweep(source: Union[GaussianState, MeasurementRecord],
                  gains: Sequence[float],
                  beta_rec: float = DEFAULT_BETA,
                  mode: str = 'analytic',
                  alpha_c: float = 0.0,
                  seed: int = 0,
                  n_boot: int = 500,
                  max_workers: int = 1) -> List[KeyRateReport]:
    """
    Key rate as a function of the amplifier gain

    Args:
        source: Exact state (analytic) or unfiltered record (monte-carlo)
        gains: Ascending gains
        beta_rec: Reconciliation efficiency
        mode: 'analytic' or 'monte-carlo'
        alpha_c: Filter cut-off for monte-carlo mode
        seed: Filter and bootstrap seed for monte-carlo mode
        n_boot: Bootstrap resamples for the 1-sigma key-rate interval
        max_workers: Worker threads for post-selection

    Returns:
        One KeyRateReport per gain; failed gains carry an error message
    """
    gains = [float(g) for g in gains]
    if gains != sorted(gains):
        raise ParameterError("Gains must be sorted ascending")
    if mode not in ('analytic', 'monte-carlo'):
        raise ParameterError(f"Unknown sweep mode {mode!r}")

    reports = []
    for g in gains:
        try:
            if mode == 'analytic':
                if not isinstance(source, GaussianState):
                    raise ParameterError("Analytic sweeps need an exact state")
                amplified = analytic_nla(source, g)
                reports.append(key_rate(to_snu(amplified.cm), beta_rec, gain=g))
                continue
            if not isinstance(source, MeasurementRecord):
                raise ParameterError("Monte Carlo sweeps need a measurement record")
            outcome = apply_mbnla(source, FilterSpec(g, alpha_c), seed, max_workers=max_workers)
            report = key_rate(reconstruct_cm(outcome.record).cm, beta_rec, gain=g)
            interval = bootstrap_criteria(outcome.record, n_boot=n_boot, seed=seed, sigma=1.0,
                                          statistic=key_rate_statistic(beta_rec))['k']
            report.k_low, report.k_high, report.k_stderr = interval.low, interval.high, interval.stderr
            reports.append(report)
        except MBNLAError as e:
            reports.append(_failed(g, beta_rec, e))
    return reports
