#!/usr/bin/env python3
"""
Config Interface Component
Loads experiment recipes and resolves them into validated, immutable configurations
"""

import sys
import json
import hashlib
import logging
from dataclasses import dataclass, field, asdict, replace
from typing import Dict, Any, Optional, Tuple
from pathlib import Path

import numpy as np
import yaml

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from gaussian.gaussian import (
    GaussianState, apply_loss, make_epr_from_squeezers, make_tmsv, tmsv_from_variance,
)
from criteria.criteria import tmsv_from_reid
from measurement.measurement import DEFAULT_MEMORY_BUDGET, SHARD_SHOTS, validate_seed
from nla.nla import MAX_K_SD, MIN_K_SD
from qkd.qkd import DEFAULT_BETA
from utils.errors import ParameterError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

STATE_KINDS = ('tmsv', 'squeezers', 'cm', 'reid')
ANALYSES = ('criteria', 'keyrate', 'normality')
SWEEP_MODES = ('analytic', 'monte-carlo')


@dataclass(frozen=True)
class StateSpec:
    """Source state: tmsv (r or variance), squeezers (v_sq, v_anti), cm (4x4) or reid (target E)"""
    kind: str = 'reid'
    r: Optional[float] = None
    variance: Optional[float] = None
    v_sq: Optional[float] = None
    v_anti: Optional[float] = None
    cm: Optional[Tuple[Tuple[float, ...], ...]] = None
    e_target: float = 0.484

    def build(self) -> GaussianState:
        if self.kind == 'tmsv':
            if self.variance is not None:
                return tmsv_from_variance(self.variance)
            if self.r is None:
                raise ParameterError("tmsv state needs 'r' or 'variance'")
            return make_tmsv(self.r)
        if self.kind == 'squeezers':
            if self.v_sq is None or self.v_anti is None:
                raise ParameterError("squeezers state needs 'v_sq' and 'v_anti'")
            return make_epr_from_squeezers(self.v_sq, self.v_anti)
        if self.kind == 'cm':
            if self.cm is None:
                raise ParameterError("cm state needs a 4x4 'cm'")
            return GaussianState(np.array(self.cm, dtype=float), label='cm from recipe')
        return tmsv_from_reid(self.e_target)


@dataclass(frozen=True)
class ChannelSpec:
    """Thermal-loss channel on one mode"""
    mode: str = 'B'
    T: float = 1.0
    n_th: float = 0.0


@dataclass(frozen=True)
class FilterSettings:
    gains: Tuple[float, ...] = (1.0, 1.1, 1.2, 1.3, 1.4)
    k_sd: float = 4.5


@dataclass(frozen=True)
class SweepSettings:
    """Grids for the success-probability, lossy-channel and key-rate tables"""
    mode: str = 'analytic'
    transmissivities: Tuple[float, ...] = (1.0, 0.5, 0.1, 0.05, 0.01)
    keyrate_gains: Tuple[float, ...] = tuple(np.round(np.linspace(1.0, 3.0, 21), 6))
    keyrate_channels: Tuple[ChannelSpec, ...] = ()


@dataclass(frozen=True)
class OutputSettings:
    directory: str = 'results'
    logs_dir: str = 'logs'
    ledger: str = 'ledger.db'

    @property
    def ledger_path(self) -> Path:
        return Path(self.directory) / self.ledger


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment"""
    name: str = 'mbnla'
    state: StateSpec = field(default_factory=StateSpec)
    channels: Tuple[ChannelSpec, ...] = ()
    shots: int = 10_000_000
    seed: int = 20240101
    filter: FilterSettings = field(default_factory=FilterSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    analyses: Tuple[str, ...] = ANALYSES
    beta_rec: float = DEFAULT_BETA
    n_boot: int = 500
    workers: int = 4
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    shard_size: int = SHARD_SHOTS
    output: OutputSettings = field(default_factory=OutputSettings)

    def build_state(self) -> GaussianState:
        """Source state with the configured channels applied in order"""
        state = self.state.build()
        for channel in self.channels:
            state = apply_loss(state, channel.mode, channel.T, channel.n_th)
        return state

    def build_keyrate_state(self) -> GaussianState:
        state = self.build_state()
        for channel in self.sweep.keyrate_channels:
            state = apply_loss(state, channel.mode, channel.T, channel.n_th)
        return state

    def to_dict(self) -> Dict[str, Any]:
        return _plain(asdict(self))

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    @property
    def run_id(self) -> str:
        return f"{self.name}_{self.seed}_{self.digest()[:10]}"


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _floats(values, name: str) -> Tuple[float, ...]:
    if isinstance(values, (int, float)):
        values = [values]
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError) as e:
        raise ParameterError(f"'{name}' must be a number or a list of numbers") from e


def _channels(entries, name: str) -> Tuple[ChannelSpec, ...]:
    channels = []
    for entry in entries or []:
        if not isinstance(entry, dict):
            raise ParameterError(f"Each entry of '{name}' must be a mapping")
        channels.append(ChannelSpec(mode=str(entry.get('mode', 'B')), T=float(entry.get('T', 1.0)),
                                    n_th=float(entry.get('n_th', 0.0))))
    return tuple(channels)


def _unknown(section: Dict[str, Any], allowed, where: str):
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ParameterError(f"Unknown keys in {where}: {', '.join(extra)}")


def config_from_dict(recipe: Dict[str, Any]) -> ExperimentConfig:
    """
    Build and validate an ExperimentConfig from a parsed recipe

    Args:
        recipe: Mapping with the sections experiment, state, channels, filter, sweep, output

    Returns:
        ExperimentConfig
    """
    recipe = recipe or {}
    _unknown(recipe, ('experiment', 'state', 'channels', 'filter', 'sweep', 'output'), 'recipe')
    experiment = recipe.get('experiment', {}) or {}
    _unknown(experiment, ('name', 'shots', 'seed', 'analyses', 'beta_rec', 'n_boot', 'workers',
                          'memory_budget', 'shard_size'), 'experiment')

    state = dict(recipe.get('state', {}) or {})
    _unknown(state, ('kind', 'r', 'variance', 'v_sq', 'v_anti', 'cm', 'e_target'), 'state')
    if 'cm' in state and state['cm'] is not None:
        state['cm'] = tuple(tuple(float(x) for x in row) for row in state['cm'])
    filter_section = recipe.get('filter', {}) or {}
    _unknown(filter_section, ('gains', 'k_sd'), 'filter')
    sweep = recipe.get('sweep', {}) or {}
    _unknown(sweep, ('mode', 'transmissivities', 'keyrate_gains', 'keyrate_channels'), 'sweep')
    output = recipe.get('output', {}) or {}
    _unknown(output, ('directory', 'logs_dir', 'ledger'), 'output')

    defaults = SweepSettings()
    config = ExperimentConfig(
        name=str(experiment.get('name', 'mbnla')),
        state=StateSpec(**state),
        channels=_channels(recipe.get('channels'), 'channels'),
        shots=int(experiment.get('shots', ExperimentConfig.shots)),
        seed=int(experiment.get('seed', ExperimentConfig.seed)),
        filter=FilterSettings(
            gains=_floats(filter_section.get('gains', FilterSettings.gains), 'filter.gains'),
            k_sd=float(filter_section.get('k_sd', FilterSettings.k_sd)),
        ),
        sweep=SweepSettings(
            mode=str(sweep.get('mode', defaults.mode)),
            transmissivities=_floats(sweep.get('transmissivities', defaults.transmissivities),
                                     'sweep.transmissivities'),
            keyrate_gains=_floats(sweep.get('keyrate_gains', defaults.keyrate_gains),
                                  'sweep.keyrate_gains'),
            keyrate_channels=_channels(sweep.get('keyrate_channels'), 'sweep.keyrate_channels'),
        ),
        analyses=tuple(experiment.get('analyses', ANALYSES)),
        beta_rec=float(experiment.get('beta_rec', DEFAULT_BETA)),
        n_boot=int(experiment.get('n_boot', ExperimentConfig.n_boot)),
        workers=int(experiment.get('workers', ExperimentConfig.workers)),
        memory_budget=int(experiment.get('memory_budget', DEFAULT_MEMORY_BUDGET)),
        shard_size=int(experiment.get('shard_size', SHARD_SHOTS)),
        output=OutputSettings(**output),
    )
    return validate_config(config)


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    """Raise ParameterError unless every field is in range"""
    if config.state.kind not in STATE_KINDS:
        raise ParameterError(f"Unknown state kind {config.state.kind!r}; choose one of {STATE_KINDS}")
    if config.shots < 1:
        raise ParameterError(f"shots must be >= 1, got {config.shots}")
    validate_seed(config.seed)
    for g in config.filter.gains + config.sweep.keyrate_gains:
        if not g >= 1.0:
            raise ParameterError(f"Gains must be >= 1, got {g}")
    for gains in (config.filter.gains, config.sweep.keyrate_gains):
        if list(gains) != sorted(gains):
            raise ParameterError("Gains must be sorted ascending")
    k_sd = config.filter.k_sd
    if k_sd != 0 and not MIN_K_SD <= k_sd <= MAX_K_SD:
        raise ParameterError(f"k_sd must be 0 or lie in [{MIN_K_SD:g}, {MAX_K_SD:g}], got {k_sd}")
    for T in config.sweep.transmissivities:
        if not 0.0 < T <= 1.0:
            raise ParameterError(f"Sweep transmissivities must lie in (0, 1], got {T}")
    if config.sweep.mode not in SWEEP_MODES:
        raise ParameterError(f"Unknown sweep mode {config.sweep.mode!r}; choose one of {SWEEP_MODES}")
    unknown = sorted(set(config.analyses) - set(ANALYSES))
    if unknown:
        raise ParameterError(f"Unknown analyses: {', '.join(unknown)}")
    if not 0.0 <= config.beta_rec <= 1.0:
        raise ParameterError(f"beta_rec must lie in [0, 1], got {config.beta_rec}")
    if config.n_boot < 200:
        raise ParameterError(f"n_boot must be >= 200, got {config.n_boot}")
    if config.workers < 1:
        raise ParameterError(f"workers must be >= 1, got {config.workers}")
    if config.shard_size < 2 or config.shard_size % 2:
        raise ParameterError("shard_size must be an even integer >= 2")
    # unphysical recipes fail here
    config.build_state()
    return config


class ExperimentInterface:
    """Entry point for loading recipes and locating run artifacts"""

    def __init__(self, recipe_path: Optional[str] = "experiment.yml"):
        """
        Initialize the interface

        Args:
            recipe_path: Path to the YAML recipe; None uses built-in defaults
        """
        self.recipe_path = recipe_path
        self.recipe = None
        self.config = None

    def load_recipe(self) -> Dict[str, Any]:
        """Load the recipe from its YAML file"""
        if self.recipe_path is None:
            self.recipe = {}
            return self.recipe
        try:
            with open(self.recipe_path, 'r') as f:
                self.recipe = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ParameterError(f"Recipe {self.recipe_path} is not valid YAML: {e}") from e
        if not isinstance(self.recipe, dict):
            raise ParameterError(f"Recipe {self.recipe_path} must be a mapping")
        logger.info(f"Recipe loaded from {self.recipe_path}")
        return self.recipe

    def resolve(self,
                seed: Optional[int] = None,
                shots: Optional[int] = None,
                gain: Optional[float] = None,
                cutoff_sd: Optional[float] = None,
                beta: Optional[float] = None,
                mode: Optional[str] = None,
                out: Optional[str] = None) -> ExperimentConfig:
        """
        Resolve the recipe with command-line overrides

        Returns:
            Validated ExperimentConfig
        """
        if self.recipe is None:
            self.load_recipe()
        config = config_from_dict(self.recipe)
        if seed is not None:
            config = replace(config, seed=int(seed))
        if shots is not None:
            config = replace(config, shots=int(shots))
        if beta is not None:
            config = replace(config, beta_rec=float(beta))
        if gain is not None:
            config = replace(config, filter=replace(config.filter, gains=(float(gain),)))
        if cutoff_sd is not None:
            config = replace(config, filter=replace(config.filter, k_sd=float(cutoff_sd)))
        if mode is not None:
            config = replace(config, sweep=replace(config.sweep, mode=mode))
        if out is not None:
            config = replace(config, output=replace(config.output, directory=str(out)))
        self.config = validate_config(config)
        logger.debug(f"Resolved run {self.config.run_id}")
        return self.config

