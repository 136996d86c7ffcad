"""Reference values and the bands --check holds each command to."""
import logging

logger = logging.getLogger(__name__)

# (value, absolute tolerance); frame values carry their printed rounding.
FRAME_BANDS = {
    'set1': {'re_r': (7.5, 0.075), 'im_r': (3.6e-5, 0.05e-5), 'E': (3180.0, 31.8),
             'cavity_shift': (-0.18, 0.005)},
    'set2': {'re_r': (2.7, 0.05), 'E': (3820.0, 38.2)},
}

DIAGNOSTIC_VALUES = {
    'set1': (15.9, 298.0, 1.2, 156.0, 12.5),
    'set2': (79.5, 343.0, 1.8, 781.0, 12.5),
}
DIAGNOSTIC_REL = 0.02

RWA_VALUES = {
    'set1': (99.0, 0.078, 0.00082, 0.00075, 0.038, 0.00063, 0.063),
    'set2': (120.0, 0.094, 0.00098, 0.00019, 0.011, 0.00063, 0.076),
}
RWA_REL = 0.05

STEADY_BANDS = {
    'set1': {'cavity_p0': (0.9922, 0.002), 'cavity_p1': (0.0078, 0.002),
             'osc_p0': (0.9912, 0.002), 'osc_p1': (0.0087, 0.002)},
}

BASELINE_BANDS = {
    'set1': {'fidelity': (0.5030, 0.010), 'mana_below': 0.002, 'cavity_peak': (0.84, 0.03)},
    'set2': {'fidelity': (0.5230, 0.010), 'mana': (0.0007, 0.0005)},
}

# (min fidelity, min mana or log-negativity, smoke min fidelity)
OPTIMIZE_BANDS = {
    ('set1', 'fock1'): {'fidelity': 0.55, 'mana': 0.012, 'smoke': 0.53},
    ('set2', 'fock1'): {'fidelity': 0.58, 'mana': 0.025, 'smoke': 0.55},
    ('set2', 'noon11'): {'fidelity': 0.62, 'log_negativity': 0.43, 'smoke': 0.58},
}
FULL_RESTARTS = 20
VERIFY_DELTA = 0.01


def _band(misses, label, value, centre, tol):
    if abs(value - centre) > tol:
        misses.append('%s = %.6g outside %.6g +- %.3g' % (label, value, centre, tol))


def check_frame(name, frame_dict, diagnostics, rwa):
    misses = []
    for key, (centre, tol) in FRAME_BANDS.get(name, {}).items():
        _band(misses, key, frame_dict[key], centre, tol)
    for (key, value), ref in zip(diagnostics.items(), DIAGNOSTIC_VALUES.get(name, ())):
        _band(misses, key, value, ref, DIAGNOSTIC_REL * ref)
    for (key, value), ref in zip(rwa.items(), RWA_VALUES.get(name, ())):
        _band(misses, key, value, ref, RWA_REL * ref)
    return misses


def check_steady(name, pops):
    misses = []
    for key, (centre, tol) in STEADY_BANDS.get(name, {}).items():
        _band(misses, key, pops[key], centre, tol)
    return misses


def check_baseline(name, metrics):
    misses = []
    bands = BASELINE_BANDS.get(name, {})
    if 'fidelity' in bands:
        _band(misses, 'fidelity', metrics['fidelity'], *bands['fidelity'])
    if 'mana' in bands:
        _band(misses, 'mana', metrics['mana'], *bands['mana'])
    if 'mana_below' in bands and not metrics['mana'] < bands['mana_below']:
        misses.append('mana = %.4g not below %.4g' % (metrics['mana'], bands['mana_below']))
    if 'cavity_peak' in bands:
        _band(misses, 'cavity_peak', metrics['cavity_peak'], *bands['cavity_peak'])
    return misses


def check_optimize(name, target, restarts, metrics, baseline_fidelity=None, verify=None):
    misses = []
    bands = OPTIMIZE_BANDS.get((name, target))
    if bands is not None:
        if restarts >= FULL_RESTARTS:
            floor = bands['fidelity']
            for key in ('mana', 'log_negativity'):
                if key in bands and metrics[key] < bands[key]:
                    misses.append('%s = %.4g below %.4g' % (key, metrics[key], bands[key]))
        else:
            floor = bands['smoke']
        if metrics['fidelity'] < floor:
            misses.append('fidelity = %.4f below %.4f' % (metrics['fidelity'], floor))
    if baseline_fidelity is not None and not metrics['fidelity'] > baseline_fidelity:
        misses.append('fidelity %.4f does not beat the pi-pulse baseline %.4f'
                      % (metrics['fidelity'], baseline_fidelity))
    if verify is not None and abs(verify['delta']) > VERIFY_DELTA:
        misses.append('truncation change %.4f exceeds %.2f' % (verify['delta'], VERIFY_DELTA))
    return misses
