#!/usr/bin/env python3
"""
NLA Component
Measurement-based noiseless linear amplification: the truncated post-selection
filter applied shot by shot, its exact Gaussian-state counterpart, and the
success-probability oracles
"""

import sys
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import IntegrationWarning, dblquad

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from gaussian.gaussian import GaussianState, VACUUM_VARIANCE, to_snu
from measurement.measurement import (
    FILTER_STREAM, SHARD_SHOTS, MeasurementRecord, heterodyne_outcome_covariance,
    shard_bounds, shard_generator,
)
from utils.errors import (
    EmptyEnsembleError, GainBoundError, NumericError, ParameterError, UnphysicalStateError,
)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MIN_K_SD = 3.0
MAX_K_SD = 8.0
ANISOTROPY_WARNING = 2.0
GAIN_BOUND_RESOLUTION = 1e-6
GAIN_SEARCH_LIMIT = 1e3
BOB = np.diag([0.0, 0.0, 1.0, 1.0])


@dataclass(frozen=True)
class FilterSpec:
    """Gain g >= 1 and cut-off radius alpha_c >= 0 of the post-selection filter"""
    g: float
    alpha_c: float

    def __post_init__(self):
        if not np.isfinite(self.g) or self.g < 1.0:
            raise ParameterError(f"Gain must be >= 1, got {self.g}")
        if not np.isfinite(self.alpha_c) or self.alpha_c < 0.0:
            raise ParameterError(f"Cut-off must be >= 0, got {self.alpha_c}")

    @property
    def attenuation(self) -> float:
        """1 - 1/g^2"""
        return 1.0 - 1.0 / self.g ** 2


@dataclass(frozen=True)
class FilterOutcome:
    """Post-selected record with its acceptance statistics"""
    record: MeasurementRecord
    p_success: float
    n_in: int
    n_accept: int
    spec: FilterSpec


def filter_probability(alpha: Union[complex, np.ndarray], spec: FilterSpec):
    """
    Acceptance probability exp((|a|^2 - a_c^2)(1 - 1/g^2)) inside the cut-off, 1 outside

    With a = (x + ip) / sqrt(2) this reweights Bob's outcome density by
    exp((1 - 1/g^2)(x^2 + p^2) / 2), the Husimi form of g^n before the 1/g rescale.

    Args:
        alpha: Complex heterodyne amplitude(s)
        spec: Filter parameters

    Returns:
        Probability (scalar or array matching alpha)
    """
    mag2 = np.abs(np.asarray(alpha)) ** 2
    exponent = (mag2 - spec.alpha_c ** 2) * spec.attenuation
    prob = np.where(mag2 < spec.alpha_c ** 2, np.exp(np.minimum(exponent, 0.0)), 1.0)
    return float(prob) if prob.ndim == 0 else prob


def amplified_outcome_covariance(outcome_cov: np.ndarray, g: float) -> np.ndarray:
    """Bob's outcome covariance after ideal amplification, before rescaling by 1/g"""
    if g == 1.0:
        return np.asarray(outcome_cov, dtype=float)
    base = np.linalg.eigvalsh(np.linalg.inv(outcome_cov)).min()
    precision = np.linalg.inv(outcome_cov) - (1.0 - 1.0 / g ** 2) * np.eye(2)
    if np.linalg.eigvalsh(precision).min() <= 0:
        bound = 1.0 / np.sqrt(1.0 - base) if base < 1.0 else float("inf")
        raise GainBoundError(f"Gain {g:g} is not normalisable for this outcome distribution",
                             supremum_gain=bound)
    return np.linalg.inv(precision)


def choose_cutoff(source: Union[GaussianState, MeasurementRecord, np.ndarray],
                  k_sd: float,
                  g_max: float = 1.0) -> float:
    """
    Cut-off radius as k_sd standard deviations of Bob's heterodyne amplitude

    The spread is taken from the outcome distribution amplified by the largest
    gain of a sweep (g_max), so one radius serves every gain up to g_max.

    Args:
        source: Exact state, measured record, or Bob's 2 x 2 outcome covariance
            (natural units) accumulated elsewhere
        k_sd: 0 (no post-selection) or a multiplier in [3, 8]
        g_max: Largest gain the cut-off must accommodate

    Returns:
        alpha_c
    """
    if k_sd == 0:
        return 0.0
    if not MIN_K_SD <= k_sd <= MAX_K_SD:
        raise ParameterError(f"k_sd must be 0 or lie in [{MIN_K_SD:g}, {MAX_K_SD:g}], got {k_sd}")
    if isinstance(source, GaussianState):
        cov = heterodyne_outcome_covariance(source)
    elif isinstance(source, np.ndarray):
        if source.shape != (2, 2):
            raise ParameterError(f"Outcome covariance must be 2 x 2, got shape {source.shape}")
        cov = source
    else:
        if len(source) < 2:
            raise ParameterError("Need at least two shots to estimate the outcome spread")
        cov = np.cov(np.vstack([source.bob_x, source.bob_p]), ddof=0)
    cov = amplified_outcome_covariance(cov, g_max)
    eigs = np.linalg.eigvalsh(cov)
    if eigs.max() / eigs.min() > ANISOTROPY_WARNING:
        logger.warning(f"Bob's outcome distribution is anisotropic (eigenvalue ratio "
                       f"{eigs.max() / eigs.min():.2f}); using the mean spread")
    sigma_alpha = np.sqrt(eigs.mean() / 2.0)
    return float(k_sd * sigma_alpha)


class StreamingFilter:
    """
    Post-selection applied one record chunk at a time

    Chunks must arrive in order and every chunk but the last must hold a whole
    number of shards, so the acceptance uniforms match those of apply_mbnla on
    the full record.
    """

    def __init__(self, spec: FilterSpec, seed: int, max_workers: int = 1,
                 shard_size: int = SHARD_SHOTS):
        self.spec = spec
        self.seed = int(seed)
        self.max_workers = max(1, int(max_workers))
        self.shard_size = int(shard_size)
        self.n_in = 0
        self.n_accept = 0

    @property
    def p_success(self) -> float:
        return self.n_accept / self.n_in if self.n_in else 0.0

    def _keep(self, probabilities: np.ndarray, first_shard: int) -> np.ndarray:
        keep = np.empty(probabilities.size, dtype=bool)

        def decide(item: Tuple[int, range]):
            index, bounds = item
            uniforms = shard_generator(self.seed, FILTER_STREAM, first_shard + index).random(len(bounds))
            keep[bounds.start:bounds.stop] = uniforms < probabilities[bounds.start:bounds.stop]

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            list(executor.map(decide, enumerate(shard_bounds(probabilities.size, self.shard_size))))
        return keep

    def filter(self, chunk: MeasurementRecord) -> MeasurementRecord:
        """Accepted shots of one chunk, Bob's outcomes rescaled by 1/g"""
        if chunk.meta.rescaled or chunk.meta.gain != 1.0:
            raise ParameterError("Record has already been post-selected")
        if self.n_in % self.shard_size:
            raise ParameterError(f"Chunk starts at shot {self.n_in}, not on a shard boundary "
                                 f"of {self.shard_size}")
        n = len(chunk)
        first_shard = self.n_in // self.shard_size
        self.n_in += n
        if self.spec.g == 1.0:
            self.n_accept += n
            return chunk

        accepted = np.flatnonzero(self._keep(filter_probability(chunk.alpha, self.spec), first_shard))
        self.n_accept += int(accepted.size)
        return MeasurementRecord(
            alice_quad=chunk.alice_quad[accepted],
            alice_value=chunk.alice_value[accepted],
            bob_x=chunk.bob_x[accepted] / self.spec.g,
            bob_p=chunk.bob_p[accepted] / self.spec.g,
            meta=replace(chunk.meta, gain=self.spec.g, rescaled=True, alpha_c=self.spec.alpha_c,
                         filter_seed=self.seed),
        )

    def finish(self):
        """Validate the totals once every chunk has been filtered"""
        if self.n_in == 0:
            raise ParameterError("Cannot post-select an empty record")
        if self.n_accept == 0:
            raise EmptyEnsembleError(
                f"No shots accepted at g={self.spec.g:g}, alpha_c={self.spec.alpha_c:g} "
                f"from {self.n_in} shots", p_success=0.0, n_in=self.n_in)
        if self.spec.g != 1.0:
            logger.info(f"Post-selection g={self.spec.g:g}: accepted {self.n_accept}/{self.n_in} shots "
                        f"(p_success={self.p_success:.3e})")


def apply_mbnla(record: MeasurementRecord,
                spec: FilterSpec,
                seed: int,
                max_workers: int = 1,
                shard_size: int = SHARD_SHOTS) -> FilterOutcome:
    """
    Post-select a record with the truncated filter and rescale Bob's outcomes by 1/g

    Args:
        record: Unfiltered record
        spec: Filter parameters
        seed: Seed of the acceptance uniforms (independent of the sampling stream)
        max_workers: Worker threads (does not change the output)
        shard_size: Shots per uniform shard

    Returns:
        FilterOutcome with the accepted, rescaled record
    """
    stream = StreamingFilter(spec, seed, max_workers, shard_size)
    filtered = stream.filter(record)
    stream.finish()
    return FilterOutcome(record=filtered, p_success=stream.p_success, n_in=stream.n_in,
                         n_accept=stream.n_accept, spec=spec)


def _amplify(cm: np.ndarray, mean: np.ndarray, g: float) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Exact g^n on Bob via the Husimi representation; None when the output is unphysical"""
    sigma_q = cm + VACUUM_VARIANCE * np.eye(4)
    precision = np.linalg.inv(sigma_q)
    modified = precision - (1.0 - 1.0 / g ** 2) * BOB
    if np.linalg.eigvalsh(0.5 * (modified + modified.T)).min() <= 0:
        return None
    sigma_mod = np.linalg.inv(modified)
    sigma_mod = 0.5 * (sigma_mod + sigma_mod.T)
    mean_mod = sigma_mod @ (precision @ mean)
    rescale = np.diag([1.0, 1.0, 1.0 / g, 1.0 / g])
    cm_out = rescale @ sigma_mod @ rescale - VACUUM_VARIANCE * np.eye(4)
    try:
        GaussianState(cm_out, mean=rescale @ mean_mod)
    except UnphysicalStateError:
        return None
    return cm_out, rescale @ mean_mod


def gain_bound(state: GaussianState,
               resolution: float = GAIN_BOUND_RESOLUTION,
               g_limit: float = GAIN_SEARCH_LIMIT) -> float:
    """
    Supremum gain for which the ideal amplification of the state is physical

    Args:
        state: Input state
        resolution: Bisection resolution
        g_limit: Gains above this are treated as unbounded

    Returns:
        Largest valid gain (inf when the state is amplifiable at g_limit)
    """
    if _amplify(state.cm, state.mean, g_limit) is not None:
        return float('inf')
    lo, hi = 1.0, g_limit
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if _amplify(state.cm, state.mean, mid) is not None:
            lo = mid
        else:
            hi = mid
    return lo


def analytic_nla(state: GaussianState, g: float) -> GaussianState:
    """
    Ideal noiseless linear amplification g^n on Bob's mode

    Args:
        state: Input state
        g: Gain >= 1

    Returns:
        Amplified, renormalised state
    """
    if not np.isfinite(g) or g < 1.0:
        raise ParameterError(f"Gain must be >= 1, got {g}")
    if g == 1.0:
        return state
    result = _amplify(state.cm, state.mean, g)
    if result is None:
        bound = gain_bound(state)
        raise GainBoundError(f"Gain {g:g} exceeds the physical bound {bound:.6f} for this state",
                             supremum_gain=bound)
    cm, mean = result
    return GaussianState(cm, mean=mean, label=f"{state.describe()}|nla(g={g:g})")


def _polar_integral(fun: Callable[[float, float], float], r_lo: float, r_hi: float,
                    epsrel: float) -> float:
    """Integrate fun(x, p) over the annulus r_lo <= r < r_hi of the outcome plane"""

    def integrand(theta, r):
        return fun(r * np.cos(theta), r * np.sin(theta)) * r

    with warnings.catch_warnings():
        warnings.simplefilter('error', IntegrationWarning)
        try:
            value, _ = dblquad(integrand, r_lo, r_hi, 0.0, 2.0 * np.pi,
                               epsabs=1e-13, epsrel=epsrel)
        except IntegrationWarning as e:
            raise NumericError(f"Outcome-plane quadrature did not converge: {e}") from e
    if not np.isfinite(value):
        raise NumericError("Outcome-plane quadrature returned a non-finite value")
    return float(value)


class _OutcomeIntegrals:
    """Filter-weighted moments of Bob's heterodyne outcome distribution"""

    def __init__(self, state: GaussianState, spec: FilterSpec, epsrel: float = 1e-8):
        self.spec = spec
        self.epsrel = epsrel
        self.mu = state.mean[2:4].copy()
        self.cov = heterodyne_outcome_covariance(state)
        self.precision = np.linalg.inv(self.cov)
        self.norm = 1.0 / (2.0 * np.pi * np.sqrt(np.linalg.det(self.cov)))
        self.radius = np.sqrt(2.0) * spec.alpha_c

    def density(self, b) -> float:
        d = np.asarray(b) - self.mu
        return float(self.norm * np.exp(-0.5 * d @ self.precision @ d))

    def weight(self, x: float, p: float) -> float:
        return float(filter_probability((x + 1j * p) / np.sqrt(2.0), self.spec))

    @property
    def isotropic(self) -> bool:
        """Zero-mean outcomes with covariance proportional to the identity"""
        return bool(np.allclose(self.mu, 0.0, atol=1e-12)
                    and np.allclose(self.cov, self.cov[0, 0] * np.eye(2), rtol=1e-10, atol=1e-14))

    def moment(self, fun: Callable[[float, float], float], expectation: float) -> float:
        """
        E[P(b) fun(b)] as the unfiltered Gaussian expectation plus the filter deficit

        P = 1 outside the cut-off, so only the disk needs quadrature.
        """
        deficit = _polar_integral(
            lambda x, p: (self.weight(x, p) - 1.0) * fun(x, p) * self.density([x, p]),
            0.0, self.radius, self.epsrel)
        return expectation + deficit

    def moments(self) -> Tuple[float, np.ndarray, np.ndarray]:
        """Filter-weighted norm, mean and covariance of Bob's outcomes"""
        mu, cov = self.mu, self.cov
        norm = self.moment(lambda x, p: 1.0, 1.0)
        mean = np.array([self.moment(lambda x, p: x, mu[0]),
                         self.moment(lambda x, p: p, mu[1])]) / norm
        s_xx = self.moment(lambda x, p: x * x, cov[0, 0] + mu[0] ** 2) / norm
        s_pp = self.moment(lambda x, p: p * p, cov[1, 1] + mu[1] ** 2) / norm
        s_xp = self.moment(lambda x, p: x * p, cov[0, 1] + mu[0] * mu[1]) / norm
        second = np.array([[s_xx, s_xp], [s_xp, s_pp]])
        return norm, mean, second - np.outer(mean, mean)


def analytic_success_probability(state: GaussianState, spec: FilterSpec,
                                 quadrature: bool = False) -> float:
    """
    Success probability of the truncated filter on the exact outcome distribution

    Isotropic zero-mean outcomes use the closed form; anything else (or
    quadrature=True) integrates the filter deficit over the cut-off disk.

    Args:
        state: Input state
        spec: Filter parameters
        quadrature: Force the outcome-plane quadrature

    Returns:
        p_success in (0, 1]
    """
    if spec.g == 1.0 or spec.alpha_c == 0.0:
        return 1.0
    integrals = _OutcomeIntegrals(state, spec)
    if integrals.isotropic and not quadrature:
        return closed_form_success_probability(float(integrals.cov[0, 0]), spec)
    return integrals.moment(lambda x, p: 1.0, 1.0)


def closed_form_success_probability(outcome_variance: float, spec: FilterSpec) -> float:
    """
    Success probability for an isotropic zero-mean outcome distribution

    Args:
        outcome_variance: Per-quadrature variance of Bob's outcomes (natural units)
        spec: Filter parameters

    Returns:
        p_success
    """
    if spec.g == 1.0 or spec.alpha_c == 0.0:
        return 1.0
    s = outcome_variance
    cut = spec.alpha_c ** 2
    k = spec.attenuation
    tail = np.exp(-cut / s)
    if abs(s * k - 1.0) < 1e-12:
        inside = np.exp(-k * cut) * cut / s
    else:
        inside = (tail - np.exp(-k * cut)) / (s * k - 1.0)
    return float(inside + tail)


def truncated_nla(state: GaussianState, spec: FilterSpec) -> GaussianState:
    """
    Gaussian state matching the first two moments of the truncated-filter ensemble

    The post-selected ensemble is rescaled by 1/g on Bob and Bob's heterodyne
    vacuum is removed, exactly as the Monte Carlo estimator does.

    Args:
        state: Input state
        spec: Filter parameters

    Returns:
        Moment-matched output state
    """
    if spec.g == 1.0:
        return state
    if spec.alpha_c == 0.0:
        return _rescale_ensemble(state, spec.g, state.mean[2:4],
                                 heterodyne_outcome_covariance(state))
    _, mean, weighted_cov = _OutcomeIntegrals(state, spec).moments()
    return _rescale_ensemble(state, spec.g, mean, weighted_cov)


def _rescale_ensemble(state: GaussianState, g: float, bob_mean: np.ndarray,
                      bob_cov: np.ndarray) -> GaussianState:
    outcome_cov = heterodyne_outcome_covariance(state)
    cross = state.cm[0:2, 2:4]
    regression = np.linalg.solve(outcome_cov, cross.T).T
    conditional = state.cm[0:2, 0:2] - regression @ cross.T

    cm = np.zeros((4, 4))
    cm[0:2, 0:2] = conditional + regression @ bob_cov @ regression.T
    cm[0:2, 2:4] = regression @ bob_cov / g
    cm[2:4, 0:2] = cm[0:2, 2:4].T
    cm[2:4, 2:4] = bob_cov / g ** 2 - VACUUM_VARIANCE * np.eye(2)
    mean = np.concatenate([state.mean[0:2] + regression @ (bob_mean - state.mean[2:4]),
                           bob_mean / g])
    return GaussianState(cm, mean=mean, label=f"{state.describe()}|truncated(g={g:g})")


def cutoff_fidelity_gap(state: GaussianState, spec: FilterSpec) -> float:
    """Frobenius distance (SNU) between truncated-filter and ideal amplified covariance matrices"""
    ideal = analytic_nla(state, spec.g)
    truncated = truncated_nla(state, spec)
    return float(np.linalg.norm(to_snu(truncated.cm) - to_snu(ideal.cm)))
