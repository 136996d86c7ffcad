"""Problem files: device parameters plus everything a run needs beyond them."""
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from hybridoc import Model, units
from hybridoc.Dynamics import (DEFAULT_DURATION, DEFAULT_SLOTS, FAR_DETUNING, LASER,
                               STEADY_FRAMES, SteadySettings, default_bounds)
from hybridoc.errors import ConfigError
from hybridoc.Liouville import CONTROL_NAMES
from hybridoc.Optimizer import DERIVATIVE_MODES, FOCK1, PENALTY_WEIGHT, Schedule
from hybridoc.PiPulse import BASELINE_TAU

logger = logging.getLogger(__name__)

PROBLEM_KEYS = ('params', 'interaction', 'dims', 'target', 'reduced_target', 'T', 'n_slots',
                'penalty_weight', 'bounds', 'far_detuning', 'seed', 'restarts', 'budgets',
                'derivative', 'baseline_tau', 'steady_frame', 'steady_detuning', 'pi_amp',
                'pi_hop_detuning')
BUDGET_KEYS = ('stage_a_iterations', 'stage_a_seconds', 'stage_b_iterations',
               'stage_b_seconds', 'gtol', 'skip_stage_a')


@dataclass
class RunConfig:
    params: Model.PhysicalParams
    interaction: str = Model.HOPPING
    dims: int = 3
    target: str = FOCK1
    reduced_target: bool = False
    T: float = DEFAULT_DURATION
    n_slots: int = DEFAULT_SLOTS
    penalty_weight: float = PENALTY_WEIGHT
    bounds: np.ndarray = None
    far_detuning: float = FAR_DETUNING
    seed: int = 0
    restarts: int = 20
    schedule: Schedule = field(default_factory=Schedule)
    baseline_tau: float = BASELINE_TAU
    steady_frame: str = LASER
    steady_detuning: float = None
    pi_amp: float = None
    pi_hop_detuning: float = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bounds is None:
            self.bounds = default_bounds(self.params, self.far_detuning)
        if self.dims < 2:
            raise ConfigError('truncation must be at least 2', 'dims')
        if self.n_slots < 0:
            raise ConfigError('number of slots must be nonnegative', 'n_slots')
        if self.T <= 0:
            raise ConfigError('sequence duration must be positive', 'T')
        if self.steady_frame not in STEADY_FRAMES:
            raise ConfigError('steady_frame must be one of %s' % ', '.join(STEADY_FRAMES),
                              'steady_frame')

    @property
    def steady(self):
        """Laser frame: atom at steady_detuning from the laser. Drift frame: the idle point."""
        detuning = self.steady_detuning
        if detuning is None and self.steady_frame != LASER:
            detuning = self.far_detuning
        return SteadySettings.for_frame(self.steady_frame, detuning)

    @property
    def tau(self):
        return self.T / self.n_slots if self.n_slots else self.T

    def to_dict(self):
        out = {'params': Model.params_to_dict(self.params), 'interaction': self.interaction,
               'dims': self.dims, 'target': self.target, 'reduced_target': self.reduced_target,
               'T_us': self.T, 'n_slots': self.n_slots, 'tau_us': self.tau,
               'penalty_weight': self.penalty_weight,
               'bounds_mhz': {name: list(self.bounds[j])
                              for j, name in enumerate(CONTROL_NAMES)},
               'far_detuning_mhz': self.far_detuning, 'seed': self.seed,
               'restarts': self.restarts, 'schedule': asdict(self.schedule),
               'baseline_tau_us': self.baseline_tau, 'steady': self.steady.to_dict(),
               'pi_amp_mhz': self.pi_amp if self.pi_amp is not None else self.params.R_max,
               'pi_hop_detuning_mhz': self.pi_hop_detuning}
        return out


def _read(path):
    try:
        with open(path) as handle:
            return json.load(handle)
    except json.JSONDecodeError as err:
        raise ConfigError('malformed JSON: %s' % err.msg, line=err.lineno)
    except IOError:
        raise ConfigError('%s was not possible to open' % path)


def _bounds(data, params, far_detuning):
    bounds = default_bounds(params, far_detuning)
    if not isinstance(data, dict):
        raise ConfigError('bounds must map channel names to [min, max]', 'bounds')
    for name, pair in data.items():
        if name not in CONTROL_NAMES:
            raise ConfigError('unknown control channel', 'bounds.%s' % name)
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError('expected [min, max]', 'bounds.%s' % name)
        lo, hi = (units.frequency(v, 'bounds.%s' % name) for v in pair)
        if lo > hi:
            raise ConfigError('lower bound above upper bound', 'bounds.%s' % name)
        bounds[CONTROL_NAMES.index(name)] = (lo, hi)
    return bounds


def _schedule(data):
    if not isinstance(data, dict):
        raise ConfigError('budgets must be a JSON object', 'budgets')
    for key in data:
        if key not in BUDGET_KEYS:
            raise ConfigError('unknown budget', 'budgets.%s' % key)
    return Schedule(**data)


def run_config_from_dict(data, preset=None):
    """Problem file contents -> RunConfig.

    A file without a 'params' key is taken to be a bare parameter block.
    """
    if not isinstance(data, dict):
        raise ConfigError('problem file must hold a JSON object')
    if 'params' not in data:
        return RunConfig(params=Model.params_from_dict(data), source={'params': data})
    for key in data:
        if key not in PROBLEM_KEYS:
            raise ConfigError('unknown problem setting', key)
    if isinstance(data['params'], str):
        params = Model.get_preset(data['params'])
    else:
        params = Model.params_from_dict(data['params'])
    kwargs = {'params': params, 'source': data}
    if 'interaction' in data:
        if data['interaction'] not in (Model.HOPPING, Model.SQUEEZING):
            raise ConfigError('unknown interaction', 'interaction')
        kwargs['interaction'] = data['interaction']
    for key, cast in (('dims', int), ('n_slots', int), ('seed', int), ('restarts', int),
                      ('penalty_weight', float)):
        if key in data:
            try:
                kwargs[key] = cast(data[key])
            except (TypeError, ValueError):
                raise ConfigError('expected a plain number', key)
    if 'reduced_target' in data:
        if not isinstance(data['reduced_target'], bool):
            raise ConfigError('expected true or false', 'reduced_target')
        kwargs['reduced_target'] = data['reduced_target']
    if 'target' in data:
        kwargs['target'] = str(data['target'])
    if 'T' in data:
        kwargs['T'] = units.duration(data['T'], 'T')
    if 'baseline_tau' in data:
        kwargs['baseline_tau'] = units.duration(data['baseline_tau'], 'baseline_tau')
    if 'far_detuning' in data:
        kwargs['far_detuning'] = units.frequency(data['far_detuning'], 'far_detuning')
    for key in ('pi_amp', 'pi_hop_detuning', 'steady_detuning'):
        if key in data:
            kwargs[key] = units.frequency(data[key], key)
    if 'bounds' in data:
        kwargs['bounds'] = _bounds(data['bounds'], params,
                                   kwargs.get('far_detuning', FAR_DETUNING))
    if 'budgets' in data:
        kwargs['schedule'] = _schedule(data['budgets'])
    if 'derivative' in data:
        if data['derivative'] not in DERIVATIVE_MODES:
            raise ConfigError('unknown derivative mode', 'derivative')
        kwargs.setdefault('schedule', Schedule())
        kwargs['schedule'].derivative = data['derivative']
    if 'steady_frame' in data:
        kwargs['steady_frame'] = data['steady_frame']
    return RunConfig(**kwargs)


def load_run_config(path=None, preset=None):
    """From a problem/parameter file, or from a preset alone."""
    if path is None:
        params = Model.get_preset(preset or 'set1')
        return RunConfig(params=params, source={'params': params.name})
    if preset is not None:
        logger.warning('--preset %s ignored, parameters come from %s', preset, path)
    return run_config_from_dict(_read(path), preset)


def apply_overrides(cfg, dims=None, seed=None, restarts=None, budget=None, target=None):
    """Command-line flags take precedence over the file."""
    if dims is not None:
        if dims < 2:
            raise ConfigError('truncation must be at least 2', 'dims')
        cfg.dims = dims
    if seed is not None:
        cfg.seed = seed
    if restarts is not None:
        if restarts < 1:
            raise ConfigError('need at least one restart', 'restarts')
        cfg.restarts = restarts
    if budget is not None:
        cfg.schedule.stage_b_seconds = float(budget)
    if target is not None:
        cfg.target = target
    return cfg
