"""Device parameters and the derived transformed-frame quantities.

All frequencies and rates are ordinary frequencies in MHz (no 2*pi),
temperatures are in mK. The two presets are the parameter sets of the
hybrid electromechanical device: set1 (g0 boosted to 12 kHz, kappa 1 MHz,
25 mK) and set2 (g0 3 kHz, kappa 0.2 MHz, 10 mK).
"""
import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace

from scipy import constants

from hybridoc import units
from hybridoc.errors import ConfigError

logger = logging.getLogger(__name__)

HOPPING = 'hopping'
SQUEEZING = 'squeezing'

# Atom drive sits this far from the shifted cavity resonance.
DRIVE_OFFSET = -500.0


@dataclass(frozen=True)
class PhysicalParams:
    wa_min: float
    wa_max: float
    wc: float
    Om: float
    g_ac: float
    g_co: float
    kappa_a: float
    kappa: float
    gamma: float
    temperature: float
    s: float
    R_max: float
    name: str = field(default='custom', compare=False)

    def __post_init__(self):
        for key in ('wa_min', 'wa_max', 'wc', 'Om', 'g_ac', 'g_co', 'kappa_a',
                    'kappa', 'gamma', 'temperature', 's', 'R_max'):
            if not getattr(self, key) > 0:
                raise ConfigError('must be strictly positive, got %r'
                                  % getattr(self, key), key)
        if self.wa_max < self.wa_min:
            raise ConfigError('atom tuning range is empty', 'wa_max')

    def with_changes(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ThermalParams:
    x: float
    n_bar: float
    gamma_eff: float


@dataclass(frozen=True)
class FrameParams:
    re_r: float
    im_r: float
    eta: float
    E: float
    delta_prime: float
    wc_prime: float
    delta_R_prime: float
    interaction: str = HOPPING

    @property
    def wl(self):
        """Laser frequency."""
        return self.wc_prime + self.delta_prime

    @property
    def wr(self):
        """Atom drive frequency, also the constant part of the atom frequency."""
        return self.wc_prime + self.delta_R_prime

    def to_dict(self):
        out = asdict(self)
        out['wl'] = self.wl
        out['wr'] = self.wr
        return out


SET1 = PhysicalParams(wa_min=9000.0, wa_max=13500.0, wc=10188.0, Om=15.9,
                      g_ac=12.5, g_co=12e-3, kappa_a=1.0, kappa=1.0,
                      gamma=150e-6, temperature=25.0, s=100.0, R_max=32.0,
                      name='set1')

SET2 = PhysicalParams(wa_min=9000.0, wa_max=13500.0, wc=10188.0, Om=15.9,
                      g_ac=12.5, g_co=3e-3, kappa_a=1.0, kappa=0.2,
                      gamma=150e-6, temperature=10.0, s=120.0, R_max=38.0,
                      name='set2')

PRESETS = {'set1': SET1, 'set2': SET2}

_FREQUENCY_FIELDS = ('wa_min', 'wa_max', 'wc', 'Om', 'g_ac', 'g_co', 'kappa_a',
                     'kappa', 'gamma', 'R_max')


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError('unknown preset %r, choose from %s'
                          % (name, ', '.join(sorted(PRESETS))), 'preset')


def params_from_dict(data, name='custom'):
    """Build PhysicalParams from a dict of unit-suffixed strings."""
    if not isinstance(data, dict):
        raise ConfigError('parameter block must be a JSON object', 'params')
    known = set(_FREQUENCY_FIELDS) | {'temperature', 's', 'name'}
    for key in data:
        if key not in known:
            raise ConfigError('unknown parameter', key)
    missing = [key for key in _FREQUENCY_FIELDS + ('temperature', 's') if key not in data]
    if missing:
        raise ConfigError('missing parameter', missing[0])
    values = {key: units.frequency(data[key], key) for key in _FREQUENCY_FIELDS}
    values['temperature'] = units.temperature(data['temperature'], 'temperature')
    try:
        values['s'] = float(data['s'])
    except (TypeError, ValueError):
        raise ConfigError('cavity shift must be a plain number', 's')
    values['name'] = str(data.get('name', name))
    return PhysicalParams(**values)


def params_to_dict(params):
    """Inverse of params_from_dict, frequencies written in MHz."""
    out = OrderedDict()
    out['name'] = params.name
    for key in _FREQUENCY_FIELDS:
        out[key] = '%r MHz' % getattr(params, key)
    out['temperature'] = '%r mK' % params.temperature
    out['s'] = params.s
    return out


def boltzmann_factor(freq_mhz, temperature_mk):
    """exp(-h f / k T) for an ordinary frequency f."""
    if temperature_mk <= 0:
        raise ValueError('temperature must be positive')
    exponent = constants.h * freq_mhz * 1e6 / (constants.k * temperature_mk * 1e-3)
    return math.exp(-exponent)


def thermal(params):
    x = boltzmann_factor(params.Om, params.temperature)
    n_bar = x / (1.0 - x)
    return ThermalParams(x=x, n_bar=n_bar, gamma_eff=params.gamma * (n_bar + 1.0))


def derive_frame(params, interaction=HOPPING, drive_offset=DRIVE_OFFSET):
    """Solve for the oscillator shift r, drive amplitude E and angle eta.

    s is taken as given and E is left free. r follows from the linear
    2x2 system, then Delta' is fixed by the sideband choice and E, eta
    make the linear cavity terms vanish.
    """
    if interaction not in (HOPPING, SQUEEZING):
        raise ConfigError('interaction must be %r or %r' % (HOPPING, SQUEEZING),
                          'interaction')
    th = thermal(params)
    damping = (1.0 - th.x) * th.gamma_eff / 2.0
    re_r = params.g_co * params.s ** 2 / (params.Om + damping ** 2 / params.Om)
    im_r = damping * re_r / params.Om
    wc_prime = params.wc - 2.0 * params.g_co * re_r
    delta_prime = -params.Om if interaction == HOPPING else params.Om
    half_kappa = params.kappa / 2.0
    E = 2.0 * params.s * math.hypot(delta_prime, half_kappa)
    eta = math.atan2(-half_kappa, delta_prime)
    frame = FrameParams(re_r=re_r, im_r=im_r, eta=eta, E=E,
                        delta_prime=delta_prime, wc_prime=wc_prime,
                        delta_R_prime=drive_offset, interaction=interaction)
    logger.debug('frame for %s: r = %g + %gi, E = %g MHz, eta = %g',
                 params.name, re_r, im_r, E, eta)
    return frame


def frame_residuals(params, frame):
    """Relative residuals of the four shift equations."""
    th = thermal(params)
    damping = (1.0 - th.x) * th.gamma_eff / 2.0
    s = params.s
    delta = frame.delta_prime - 2.0 * params.g_co * frame.re_r
    shifted = delta + 2.0 * params.g_co * frame.re_r
    half_e = frame.E / 2.0

    def rel(lhs, rhs):
        scale = max(abs(lhs), abs(rhs))
        return 0.0 if scale == 0 else abs(lhs - rhs) / scale

    return [rel(half_e * math.cos(frame.eta), shifted * s),
            rel(half_e * math.sin(frame.eta), -params.kappa / 2.0 * s),
            rel(params.g_co * s ** 2, params.Om * frame.re_r + damping * frame.im_r),
            rel(params.Om * frame.im_r, damping * frame.re_r)]


def coherent_amplitude(params, frame):
    """alpha' = (E/2)/(Delta' + i kappa/2); |alpha'| = s, arg alpha' = eta."""
    return (frame.E / 2.0) / complex(frame.delta_prime, params.kappa / 2.0)


def diagnostics(params):
    th = thermal(params)
    g0s = params.g_co * params.s
    out = OrderedDict()
    out['sideband_resolution'] = params.Om / params.kappa
    out['optomechanical_cooperativity'] = g0s ** 2 / (params.kappa * params.gamma * th.n_bar)
    out['cavity_oscillator_coupling_ratio'] = g0s / max(params.kappa, params.gamma)
    out['atom_cavity_cooperativity'] = params.g_ac ** 2 / (params.kappa * params.kappa_a)
    out['atom_cavity_coupling_ratio'] = params.g_ac / max(params.kappa, params.kappa_a)
    return out


def rwa_significance(params, frame):
    """Size of each term dropped by a rotating wave approximation."""
    wl = frame.wl
    wa_min = params.wa_min
    out = OrderedDict()
    out['laser_corotating'] = frame.E / (2.0 * abs(wl - params.wc))
    out['laser_counterrotating'] = frame.E / (2.0 * abs(wl + params.wc))
    out['atom_control_counterrotating'] = params.R_max / (2.0 * abs(frame.wr + wa_min))
    out['g0_nonlinear'] = params.g_co / params.Om
    out['g0s_two_mode_squeezing'] = abs(params.g_co * params.s) / abs(2.0 * frame.delta_prime)
    out['g_counterrotating'] = params.g_ac / abs(wa_min + frame.wc_prime)
    out['gs_counterrotating'] = abs(params.g_ac * params.s) / abs(wa_min + wl)
    return out


def regime_checks(params):
    """Names of the strong-coupling regime conditions that fail."""
    ratios = diagnostics(params)
    failed = []
    if not ratios['sideband_resolution'] > 1:
        failed.append('not sideband resolved (Om/kappa = %.3g)' % ratios['sideband_resolution'])
    if not ratios['optomechanical_cooperativity'] > 1:
        failed.append('optomechanical cooperativity %.3g <= 1'
                      % ratios['optomechanical_cooperativity'])
    if not ratios['cavity_oscillator_coupling_ratio'] > 1:
        failed.append('cavity-oscillator coupling not strong (%.3g)'
                      % ratios['cavity_oscillator_coupling_ratio'])
    if not ratios['atom_cavity_coupling_ratio'] > 1:
        failed.append('atom-cavity coupling not strong (%.3g)'
                      % ratios['atom_cavity_coupling_ratio'])
    return failed


def frame_report(params, frame=None):
    """Everything the derive command prints, as one ordered dict."""
    if frame is None:
        frame = derive_frame(params)
    th = thermal(params)
    alpha = coherent_amplitude(params, frame)
    report = OrderedDict()
    report['params'] = params.name
    report['thermal'] = OrderedDict([('x', th.x), ('n_bar', th.n_bar),
                                     ('gamma_eff', th.gamma_eff)])
    frame_dict = OrderedDict(frame.to_dict())
    frame_dict['cavity_shift'] = -2.0 * params.g_co * frame.re_r
    frame_dict['laser_detuning'] = frame.delta_prime - 2.0 * params.g_co * frame.re_r
    frame_dict['alpha_abs'] = abs(alpha)
    frame_dict['alpha_arg'] = math.atan2(alpha.imag, alpha.real)
    frame_dict['g_s'] = params.g_ac * params.s
    frame_dict['g0_s'] = params.g_co * params.s
    frame_dict['cavity_boltzmann'] = boltzmann_factor(params.wc, params.temperature)
    frame_dict['atom_boltzmann'] = boltzmann_factor(params.wa_min, params.temperature)
    frame_dict['residuals'] = frame_residuals(params, frame)
    report['frame'] = frame_dict
    report['diagnostics'] = diagnostics(params)
    report['rwa_significance'] = rwa_significance(params, frame)
    report['regime_warnings'] = regime_checks(params)
    return report
