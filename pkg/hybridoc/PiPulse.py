"""Three-segment transfer: excite the atom, swap into the cavity, hop to the oscillator."""
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from hybridoc import Hilbert
from hybridoc.Analysis import cv_mana, partial_trace
from hybridoc.Dynamics import FAR_DETUNING, ControlSequence, propagate
from hybridoc.errors import ConfigError
from hybridoc.Liouville import unvec, vec

logger = logging.getLogger(__name__)

# Slot width used for the baseline, finer than the optimiser grid.
BASELINE_TAU = 0.001
GRID_POINTS = 21
SEGMENTS = ('excite', 'swap', 'hop')


@dataclass(frozen=True)
class PiPulsePlan:
    t1: float
    t2: float
    t3: float
    amp: float
    detunings: tuple

    def __post_init__(self):
        for key in ('t1', 't2', 't3'):
            if not getattr(self, key) > 0:
                raise ConfigError('segment duration must be positive', key)
        if len(self.detunings) != 3:
            raise ConfigError('one detuning per segment is needed', 'detunings')

    @property
    def durations(self):
        return (self.t1, self.t2, self.t3)

    def with_durations(self, durations):
        t1, t2, t3 = durations
        return replace(self, t1=t1, t2=t2, t3=t3)

    def to_dict(self):
        out = asdict(self)
        out['detunings'] = list(self.detunings)
        return out


def nominal_plan(params, frame, amp=None, hop_detuning=None):
    """Analytic durations: pi rotation, quarter vacuum-Rabi period, quarter hop period.

    Without an explicit amplitude the drive runs at R_max. For the hop the atom
    goes back to the drive frequency, off the shifted cavity, unless
    `hop_detuning` parks it elsewhere.
    """
    amp = params.R_max if amp is None else float(amp)
    if amp <= 0:
        raise ConfigError('drive amplitude must be positive', 'amp')
    # atom on the shifted cavity in segment 2
    resonance = frame.wc_prime - frame.wr
    drive_detuning = 0.0
    if hop_detuning is None:
        hop_detuning = drive_detuning
    return PiPulsePlan(t1=1.0 / (2.0 * amp),
                       t2=1.0 / (4.0 * params.g_ac),
                       t3=1.0 / (4.0 * params.g_co * params.s),
                       amp=amp,
                       detunings=(drive_detuning, resonance, float(hop_detuning)))


def segment_slots(plan, tau):
    """Durations rounded to whole slots, with the rounding of each segment."""
    slots = []
    rounding = []
    for name, t in zip(SEGMENTS, plan.durations):
        m = int(round(t / tau))
        if m < 1:
            raise ConfigError('%s segment (%g us) is shorter than one slot of %g us'
                              % (name, t, tau), name)
        slots.append(m)
        rounding.append({'segment': name, 'requested_us': t, 'slots': m,
                         'actual_us': m * tau, 'error_us': m * tau - t})
    return slots, rounding


def build_pi_sequence(plan, tau=BASELINE_TAU, n_slots=None, bounds=None,
                      far_detuning=FAR_DETUNING):
    """ControlSequence of the plan; idle slots pad it to n_slots when given.

    Returns the sequence and the per-segment rounding report.
    """
    slots, rounding = segment_slots(plan, tau)
    rows = []
    for m, detuning, drive in zip(slots, plan.detunings, (plan.amp, 0.0, 0.0)):
        rows.extend([(detuning, drive, 0.0)] * m)
    if n_slots is not None:
        if n_slots < len(rows):
            raise ConfigError('plan needs %d slots, only %d available' % (len(rows), n_slots),
                              'n_slots')
        rows.extend([(far_detuning, 0.0, 0.0)] * (n_slots - len(rows)))
    seq = ControlSequence(rows, tau, bounds)
    if bounds is not None and not seq.within_bounds():
        raise ConfigError('pi-pulse amplitudes exceed the channel bounds', 'amp')
    for entry in rounding:
        if entry['error_us'] != 0:
            logger.debug('%s segment rounded from %.4g to %.4g us', entry['segment'],
                         entry['requested_us'], entry['actual_us'])
    return seq, rounding


def _figure_of_merit(segment, v, space):
    rho = unvec(v, space.N)
    if segment == 0:
        which, level = Hilbert.ATOM, 1
    elif segment == 1:
        which, level = Hilbert.CAVITY, 1
    else:
        which, level = Hilbert.OSC, 1
    return float(np.real(partial_trace(rho, [which], space)[level, level]))


class _SegmentScan(object):
    """Population after m slots of one segment, memoised by m."""
    def __init__(self, system, segment, v_start, u, tau):
        self.segment = segment
        self.space = system.space
        self.F = system.propagator(u, tau).matrix
        self.states = [v_start]
        self.values = {}

    def state(self, m):
        while len(self.states) <= m:
            self.states.append(self.F @ self.states[-1])
        return self.states[m]

    def __call__(self, m):
        if m not in self.values:
            self.values[m] = _figure_of_merit(self.segment, self.state(m), self.space)
        return self.values[m]


def golden_section_max(f, lo, hi):
    """Integer golden-section search for a maximum on [lo, hi], 1-slot tolerance."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    while b - a > 2:
        step = int(round(invphi * (b - a)))
        c, d = b - step, a + step
        if c >= d:
            c = (a + b) // 2
            d = c + 1
        if f(c) >= f(d):
            b = d
        else:
            a = c
    return max(range(a, b + 1), key=lambda m: (f(m), -m))


def _bracket(m0, centre=None):
    """Slots searched: within 50% of the nominal m0, and within 25% of m0
    around `centre` when an earlier pick is refined."""
    lo = max(1, int(math.ceil(0.5 * m0)))
    hi = max(lo + 2, int(math.floor(1.5 * m0)))
    if centre is not None:
        half = max(1, int(math.ceil(0.25 * m0)))
        lo, hi = max(lo, centre - half), min(hi, centre + half)
        if hi - lo < 2:
            lo = max(1, hi - 2)
            hi = lo + 2
    return lo, hi


def _tune_segment(scan, m0, fallbacks, name, centre=None):
    lo, hi = _bracket(m0, centre)
    mid = (lo + hi) // 2
    if scan(mid) < max(scan(lo), scan(hi)):
        grid = np.unique(np.linspace(lo, hi, GRID_POINTS).round().astype(int))
        coarse = max(grid, key=lambda m: (scan(int(m)), -m))
        spacing = max(1, int(math.ceil((hi - lo) / (GRID_POINTS - 1.0))))
        best = golden_section_max(scan, max(lo, int(coarse) - spacing),
                                  min(hi, int(coarse) + spacing))
        fallbacks.append({'segment': name, 'bracket': [lo, hi], 'grid_best': int(coarse),
                          'chosen': int(best)})
        logger.warning('%s segment: bracket [%d, %d] is not unimodal, used a %d-point grid',
                       name, lo, hi, GRID_POINTS)
        return best
    return golden_section_max(scan, lo, hi)


@dataclass
class PiPulseResult:
    plan: PiPulsePlan
    nominal: PiPulsePlan
    sequence: ControlSequence
    slots: list
    merits: list
    fallbacks: list
    rounding: list
    sweeps: int = 1

    def summary(self):
        return {'plan': self.plan.to_dict(), 'nominal': self.nominal.to_dict(),
                'slots': list(self.slots), 'segment_merits': list(self.merits),
                'fallbacks': self.fallbacks, 'rounding': self.rounding,
                'sweeps': self.sweeps, 'tau_us': self.sequence.tau}


def tune_pi_sequence(plan0, system, rho0, tau=BASELINE_TAU, sweeps=2, bounds=None):
    """Maximise, one segment at a time, the population each segment hands over.

    Every evaluation is a full propagation with the earlier segments fixed.
    Each duration is searched within 50% of its nominal value; later sweeps
    look again around the previous pick and stop once no duration moves.
    """
    slots, rounding = segment_slots(plan0, tau)
    nominal_slots = list(slots)
    controls = [np.array([d, drive, 0.0])
                for d, drive in zip(plan0.detunings, (plan0.amp, 0.0, 0.0))]
    fallbacks = []
    merits = [0.0, 0.0, 0.0]
    sweeps_run = 0
    for sweep in range(sweeps):
        previous = list(slots)
        v = vec(np.asarray(rho0, dtype=complex))
        for i, name in enumerate(SEGMENTS):
            scan = _SegmentScan(system, i, v, controls[i], tau)
            centre = slots[i] if sweep else None
            slots[i] = int(_tune_segment(scan, nominal_slots[i], fallbacks, name, centre))
            merits[i] = scan(slots[i])
            v = scan.state(slots[i])
            logger.debug('sweep %d, %s: %d slots, population %.4f', sweep + 1, name,
                         slots[i], merits[i])
        sweeps_run += 1
        if sweep and slots == previous:
            logger.debug('sweep %d kept every duration', sweep + 1)
            break
    plan = plan0.with_durations([m * tau for m in slots])
    seq, _ = build_pi_sequence(plan, tau, bounds=bounds)
    logger.info('tuned pi-pulse durations %s us (nominal %s us)',
                ', '.join('%.4g' % t for t in plan.durations),
                ', '.join('%.4g' % t for t in plan0.durations))
    return PiPulseResult(plan=plan, nominal=plan0, sequence=seq, slots=slots, merits=merits,
                         fallbacks=fallbacks, rounding=rounding, sweeps=sweeps_run)


def evaluate_baseline(seq, system, rho0):
    """Trajectory plus the oscillator |1> fidelity, mana and cavity peak."""
    traj = propagate(rho0, seq, system)
    rho_osc = partial_trace(traj.final, [Hilbert.OSC], system.space)
    cavity = traj.populations(Hilbert.CAVITY)[:, 1]
    return traj, {'fidelity': float(np.real(rho_osc[1, 1])),
                  'mana_raw': cv_mana(rho_osc, clamp=False),
                  'mana': cv_mana(rho_osc),
                  'cavity_peak': float(cavity.max()),
                  'cavity_peak_time_us': float(traj.times[int(np.argmax(cavity))]),
                  'total_time_us': seq.total_time}
