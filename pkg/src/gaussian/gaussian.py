#!/usr/bin/env python3
"""
Gaussian Core Component
Exact two-mode Gaussian state algebra: construction, channels, purity,
symplectic spectra and entropies

Quadratures are ordered (x_A, p_A, x_B, p_B) in natural units, where the
vacuum quadrature variance is 1/2. Shot-noise units (SNU, vacuum = 1) are
only used at reporting boundaries via to_snu / from_snu.
"""

import sys
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import schur
from scipy.special import xlogy

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from utils.errors import NumericError, ParameterError, UnphysicalStateError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

VACUUM_VARIANCE = 0.5
PHYSICALITY_TOL = 1e-9
SYMMETRY_TOL = 1e-12
MAX_SQUEEZING = 10.0
SPECTRUM_EPS = 64 * np.finfo(float).eps
MODES = {'A': 0, 'B': 1}


def _mode_index(mode: str) -> int:
    if mode not in MODES:
        raise ParameterError(f"Unknown mode {mode!r}, expected one of {sorted(MODES)}")
    return MODES[mode]


def _block(mode: str) -> slice:
    m = _mode_index(mode)
    return slice(2 * m, 2 * m + 2)


@dataclass(frozen=True)
class SymplecticForm:
    """Block-diagonal symplectic form, [[0, 1], [-1, 0]] per mode"""
    n_modes: int = 2

    @property
    def omega(self) -> np.ndarray:
        return np.kron(np.eye(self.n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def check(self) -> bool:
        """True when omega squared is minus the identity"""
        omega = self.omega
        return bool(np.allclose(omega @ omega, -np.eye(2 * self.n_modes)))


def symplectic_form(n_modes: int = 2) -> np.ndarray:
    return SymplecticForm(n_modes).omega


def _spectrum_tolerance(cm: np.ndarray) -> float:
    # nu^2 of a float matrix is only resolved to about eps * |cm|^2
    return max(PHYSICALITY_TOL, SPECTRUM_EPS * max(1.0, float(np.max(np.abs(cm)))) ** 2)


def _below_vacuum(nu: float, cm: np.ndarray) -> bool:
    return nu * nu < VACUUM_VARIANCE ** 2 - _spectrum_tolerance(cm)


def symplectic_eigenvalues(cm: np.ndarray) -> np.ndarray:
    """
    Symplectic eigenvalues of a covariance matrix

    Computed from the Hermitian matrix i sqrt(cm) Omega sqrt(cm), whose
    eigenvalues are +/- nu. Values within the resolution of the matrix
    entries of the vacuum value 1/2 are returned as exactly 1/2.

    Args:
        cm: 2n x 2n real covariance matrix (natural units)

    Returns:
        Array of n symplectic eigenvalues sorted descending
    """
    cm = np.asarray(cm, dtype=float)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] % 2:
        raise ParameterError(f"Covariance matrix must be square with even size, got {cm.shape}")
    n = cm.shape[0] // 2
    try:
        w, u = np.linalg.eigh(0.5 * (cm + cm.T))
        root = (u * np.sqrt(np.clip(w, 0.0, None))) @ u.T
        eigs = np.linalg.eigvalsh(1j * (root @ symplectic_form(n) @ root))
    except np.linalg.LinAlgError as e:
        raise NumericError("Symplectic eigensolve did not converge",
                           {'cm': cm.tolist(), 'reason': str(e)}) from e
    nu = eigs[n:][::-1].copy()
    nu[np.abs(nu * nu - VACUUM_VARIANCE ** 2) <= _spectrum_tolerance(cm)] = VACUUM_VARIANCE
    return nu


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Zero-mean (by default) two-mode Gaussian state"""
    cm: np.ndarray
    mean: Optional[np.ndarray] = None
    label: str = ''

    def __post_init__(self):
        cm = np.array(self.cm, dtype=float)
        if cm.shape != (4, 4):
            raise ParameterError(f"Two-mode covariance matrix must be 4x4, got {cm.shape}")
        if not np.all(np.isfinite(cm)):
            raise ParameterError("Covariance matrix contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(cm))))
        if np.max(np.abs(cm - cm.T)) > SYMMETRY_TOL * scale:
            raise ParameterError("Covariance matrix is not symmetric")
        cm = 0.5 * (cm + cm.T)

        mean = np.zeros(4) if self.mean is None else np.array(self.mean, dtype=float)
        if mean.shape != (4,):
            raise ParameterError(f"Mean vector must have 4 entries, got {mean.shape}")

        for mode in MODES:
            if np.linalg.eigvalsh(cm[_block(mode), _block(mode)]).min() <= 0:
                raise UnphysicalStateError(f"Diagonal block of mode {mode} is not positive definite")
        nu_min = symplectic_eigenvalues(cm).min()
        if _below_vacuum(nu_min, cm):
            raise UnphysicalStateError(
                f"Covariance matrix violates the uncertainty principle (nu_min={nu_min:.3e})",
                {'nu_min': float(nu_min)})

        cm.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, 'cm', cm)
        object.__setattr__(self, 'mean', mean)

    def block(self, mode: str) -> np.ndarray:
        return self.cm[_block(mode), _block(mode)].copy()

    @property
    def cross(self) -> np.ndarray:
        """Alice-Bob correlation block"""
        return self.cm[0:2, 2:4].copy()

    @property
    def snu(self) -> np.ndarray:
        return to_snu(self.cm)

    def describe(self) -> str:
        return self.label or 'gaussian-state'


def to_snu(cm: np.ndarray) -> np.ndarray:
    """Natural units (vacuum 1/2) to shot-noise units (vacuum 1)"""
    return 2.0 * np.asarray(cm, dtype=float)


def from_snu(cm: np.ndarray) -> np.ndarray:
    return 0.5 * np.asarray(cm, dtype=float)


def state_digest(state: GaussianState) -> bytes:
    """SHA-256 over the little-endian covariance matrix and mean"""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(state.cm, dtype='<f8').tobytes())
    h.update(np.ascontiguousarray(state.mean, dtype='<f8').tobytes())
    return h.digest()


def vacuum() -> GaussianState:
    return GaussianState(VACUUM_VARIANCE * np.eye(4), label='vacuum')


def thermal_state(n_bar: float) -> np.ndarray:
    """Single-mode thermal covariance matrix (n_bar + 1/2) I"""
    if n_bar < 0:
        raise ParameterError(f"Mean photon number must be non-negative, got {n_bar}")
    return (n_bar + VACUUM_VARIANCE) * np.eye(2)


def thermal_product(n_a: float, n_b: float) -> GaussianState:
    """Uncorrelated thermal states with mean photon numbers n_a, n_b"""
    if n_a < 0 or n_b < 0:
        raise ParameterError("Mean photon numbers must be non-negative")
    cm = np.zeros((4, 4))
    cm[0:2, 0:2] = thermal_state(n_a)
    cm[2:4, 2:4] = thermal_state(n_b)
    return GaussianState(cm, label=f"thermal(n_a={n_a:g}, n_b={n_b:g})")


def coherent_product(alpha_b: complex, alpha_a: complex = 0.0) -> GaussianState:
    """Product of coherent states; <x> = sqrt(2) Re(alpha) in natural units"""
    alpha_a, alpha_b = complex(alpha_a), complex(alpha_b)
    mean = np.sqrt(2.0) * np.array([alpha_a.real, alpha_a.imag, alpha_b.real, alpha_b.imag])
    return GaussianState(VACUUM_VARIANCE * np.eye(4), mean=mean,
                         label=f"coherent(alpha_b={complex(alpha_b):g})")


def make_tmsv(r: float, limit: float = MAX_SQUEEZING) -> GaussianState:
    """
    Two-mode squeezed vacuum

    Args:
        r: Squeezing parameter (chi = tanh r)
        limit: Largest accepted r (overflow guard)

    Returns:
        Pure TMSV state
    """
    if not np.isfinite(r) or r < 0 or r > limit:
        raise ParameterError(f"Squeezing parameter r must lie in [0, {limit:g}], got {r}")
    c = 0.5 * np.cosh(2 * r)
    s = 0.5 * np.sinh(2 * r)
    cm = np.array([
        [c, 0, s, 0],
        [0, c, 0, -s],
        [s, 0, c, 0],
        [0, -s, 0, c],
    ])
    return GaussianState(cm, label=f"tmsv(r={r:g})")


def tmsv_from_variance(v_snu: float) -> GaussianState:
    """TMSV with marginal variance v_snu = cosh(2r) in shot-noise units"""
    if v_snu < 1:
        raise ParameterError(f"TMSV marginal variance must be >= 1 SNU, got {v_snu}")
    return make_tmsv(0.5 * np.arccosh(v_snu))


def beam_splitter(transmissivity: float) -> np.ndarray:
    """Two-mode beam-splitter symplectic matrix in (x_A, p_A, x_B, p_B) order"""
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    return np.kron(np.array([[t, r], [r, -t]]), np.eye(2))


def make_epr_from_squeezers(v_sq: float, v_anti: float) -> GaussianState:
    """
    EPR state from two squeezed states combined in quadrature on a 50:50 beam-splitter

    Args:
        v_sq: Squeezed quadrature variance (SNU)
        v_anti: Anti-squeezed quadrature variance (SNU)

    Returns:
        Output state; equals make_tmsv(r) when v_sq = exp(-2r), v_anti = exp(2r)
    """
    if not (0 < v_sq <= 1 <= v_anti):
        raise ParameterError(f"Expected 0 < v_sq <= 1 <= v_anti, got v_sq={v_sq}, v_anti={v_anti}")
    if v_sq * v_anti < 1 - 1e-12:
        raise UnphysicalStateError(
            f"Squeezer variances violate the uncertainty relation: v_sq*v_anti={v_sq * v_anti:.6g} < 1")
    # first squeezer anti-squeezed in x, second squeezed in x (relative phase in quadrature)
    cm_in = 0.5 * np.diag([v_anti, v_sq, v_sq, v_anti])
    bs = beam_splitter(0.5)
    cm = bs @ cm_in @ bs.T
    return GaussianState(cm, label=f"squeezers(v_sq={v_sq:g}, v_anti={v_anti:g})")


def apply_loss(state: GaussianState, mode: str, T: float, n_th: float = 0.0) -> GaussianState:
    """
    Lossy (optionally thermal) channel on one mode

    Args:
        state: Input state
        mode: 'A' or 'B'
        T: Transmissivity in [0, 1]
        n_th: Mean thermal photon number of the environment

    Returns:
        Output state
    """
    if not 0.0 <= T <= 1.0:
        raise ParameterError(f"Transmissivity must lie in [0, 1], got {T}")
    if n_th < 0:
        raise ParameterError(f"Thermal photon number must be non-negative, got {n_th}")
    idx = _block(mode)
    x = np.eye(4)
    x[idx, idx] *= np.sqrt(T)
    y = np.zeros((4, 4))
    y[idx, idx] = (1.0 - T) * (n_th + VACUUM_VARIANCE) * np.eye(2)
    cm = x @ state.cm @ x + y
    channel = f"loss({mode}, T={T:g}" + (f", n_th={n_th:g})" if n_th else ")")
    label = f"{state.label}|{channel}" if state.label else channel
    return GaussianState(cm, mean=x @ state.mean, label=label)


def purity_cm(cm: np.ndarray) -> float:
    """Purity 1 / (2^n sqrt(det cm)) = prod 1 / (2 nu_k) of an n-mode covariance matrix in natural units"""
    nu = symplectic_eigenvalues(cm)
    if not nu.min() > 0:
        raise UnphysicalStateError(f"Covariance matrix is singular (nu_min={nu.min():.3e})")
    return float(np.prod(1.0 / (2.0 * nu)))


def purity(state: GaussianState, mode: Optional[str] = None) -> float:
    """
    Purity of the state, or of one mode's marginal

    Args:
        state: Gaussian state
        mode: Optional 'A' or 'B' for the single-mode marginal

    Returns:
        Purity in (0, 1]
    """
    if mode is None:
        return purity_cm(state.cm)
    return purity_cm(state.block(mode))


def g_function(x):
    """(x+1) log2(x+1) - x log2 x, with g(0) = 0"""
    x = np.asarray(x, dtype=float)
    return (xlogy(x + 1.0, x + 1.0) - xlogy(x, x)) / np.log(2.0)


def von_neumann_entropy(cm: np.ndarray) -> float:
    """
    Von Neumann entropy in bits, sum of g(nu_k - 1/2) over symplectic eigenvalues

    Args:
        cm: Covariance matrix (natural units), any even size

    Returns:
        Entropy in bits
    """
    cm = np.asarray(cm, dtype=float)
    nu = symplectic_eigenvalues(cm)
    if _below_vacuum(nu.min(), cm):
        raise UnphysicalStateError(f"Symplectic eigenvalue {nu.min():.6g} below 1/2",
                                   {'nu': nu.tolist()})
    excess = np.clip(nu - VACUUM_VARIANCE, 0.0, None)
    return float(np.sum(g_function(excess)))


@dataclass(frozen=True)
class WilliamsonForm:
    """cm = symplectic @ diag(nu_1, nu_1, nu_2, nu_2, ...) @ symplectic.T"""
    nu: np.ndarray
    symplectic: np.ndarray

    def reconstruct(self, nu: Optional[Sequence[float]] = None) -> np.ndarray:
        nu = self.nu if nu is None else np.asarray(nu, dtype=float)
        d = np.diag(np.repeat(nu, 2))
        cm = self.symplectic @ d @ self.symplectic.T
        return 0.5 * (cm + cm.T)


def williamson(cm: np.ndarray) -> WilliamsonForm:
    """
    Williamson normal form from the real Schur form of cm^(-1/2) Omega cm^(-1/2)

    Args:
        cm: Positive definite covariance matrix

    Returns:
        WilliamsonForm with symplectic eigenvalues and the symplectic matrix
    """
    cm = np.asarray(cm, dtype=float)
    n = cm.shape[0] // 2
    w, u = np.linalg.eigh(cm)
    if w.min() <= 0:
        raise UnphysicalStateError(f"Covariance matrix is not positive definite (min eig {w.min():.3e})")
    inv_sqrt = u @ np.diag(w ** -0.5) @ u.T
    k = inv_sqrt @ symplectic_form(n) @ inv_sqrt
    t_mat, orth = schur(k, output='real')
    orth = orth.copy()
    t_vals = np.empty(n)
    for j in range(n):
        t = t_mat[2 * j, 2 * j + 1]
        if t < 0:
            # swap the pair so every block reads [[0, t], [-t, 0]] with t > 0
            orth[:, [2 * j, 2 * j + 1]] = orth[:, [2 * j + 1, 2 * j]]
            t = -t
        t_vals[j] = t
    nu = 1.0 / t_vals
    s = inv_sqrt @ orth @ np.diag(np.repeat(np.sqrt(nu), 2))
    return WilliamsonForm(nu=nu, symplectic=np.linalg.inv(s).T)


def project_to_physical(cm: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Nearest physical covariance matrix by clipping the symplectic spectrum at 1/2

    Args:
        cm: Estimated covariance matrix (natural units)

    Returns:
        Tuple of (projected matrix, Frobenius projection distance)
    """
    cm = np.asarray(cm, dtype=float)
    form = williamson(cm)
    if form.nu.min() >= VACUUM_VARIANCE:
        return cm.copy(), 0.0
    projected = form.reconstruct(np.maximum(form.nu, VACUUM_VARIANCE))
    distance = float(np.linalg.norm(projected - cm))
    logger.info(f"Projected covariance matrix to physical set (distance {distance:.3e}, "
                f"nu_min {form.nu.min():.6f})")
    return projected, distance


def swap_modes(cm: np.ndarray) -> np.ndarray:
    """Exchange the A and B labels of a two-mode covariance matrix"""
    perm = np.array([2, 3, 0, 1])
    cm = np.asarray(cm, dtype=float)
    return cm[np.ix_(perm, perm)]
