"""Piecewise-constant propagation and the driven steady state."""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from hybridoc import Hilbert
from hybridoc.Analysis import partial_trace, purity
from hybridoc.errors import (AmbiguousSteadyStateError, ConfigError, DimensionError,
                             NumericalError, PositivityError)
from hybridoc.Liouville import (CONTROL_NAMES, SuperOp, laser_frame_hamiltonian, unvec, vec,
                                vectorize_liouvillian)

logger = logging.getLogger(__name__)

# Atom parked 1 GHz below the drive while idle.
FAR_DETUNING = -1000.0
# Atom 100 GHz below the laser when the initial state is solved; there the
# g*s drive no longer dresses it.
STEADY_DETUNING = -1.0e5
LASER = 'laser'
DRIFT = 'drift'
STEADY_FRAMES = (LASER, DRIFT)
DEFAULT_SLOTS = 200
DEFAULT_DURATION = 1.0

TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8
STEADY_GAP = 1e-6
STEADY_RESIDUAL = 1e-9


def default_bounds(params, far_detuning=FAR_DETUNING):
    """Per-channel (min, max) in MHz.

    The detuning channel spans the width of the atom tuning range, with the
    idle point at its lower edge; the drive quadratures are limited by R_max.
    """
    width = params.wa_max - params.wa_min
    return np.array([[far_detuning, far_detuning + width],
                     [-params.R_max, params.R_max],
                     [-params.R_max, params.R_max]])


class ControlSequence(object):
    """n_slots slots of width tau, each holding (detuning, atomX, atomY) in MHz."""
    def __init__(self, u, tau, bounds=None):
        u = np.array(u, dtype=float)
        if u.ndim == 1 and u.size == 0:
            u = u.reshape(0, len(CONTROL_NAMES))
        if u.ndim != 2 or u.shape[1] != len(CONTROL_NAMES):
            raise DimensionError('control array must be n_slots x %d, got %s'
                                 % (len(CONTROL_NAMES), u.shape))
        if tau <= 0:
            raise ValueError('slot duration must be positive, got %g' % tau)
        self.u = u
        self.tau = float(tau)
        self.bounds = None if bounds is None else np.array(bounds, dtype=float)

    @classmethod
    def constant(cls, n_slots, tau, values, bounds=None):
        return cls(np.tile(np.asarray(values, dtype=float), (n_slots, 1)), tau, bounds)

    @classmethod
    def idle(cls, n_slots, tau, far_detuning=FAR_DETUNING, bounds=None):
        return cls.constant(n_slots, tau, (far_detuning, 0.0, 0.0), bounds)

    @property
    def n_slots(self):
        return self.u.shape[0]

    @property
    def total_time(self):
        return self.n_slots * self.tau

    def times(self):
        return self.tau * np.arange(self.n_slots + 1)

    def within_bounds(self, tol=1e-9):
        if self.bounds is None:
            return True
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return bool(np.all(self.u >= lo - tol) and np.all(self.u <= hi + tol))

    def with_controls(self, u):
        return ControlSequence(u, self.tau, self.bounds)

    def copy(self):
        return ControlSequence(self.u.copy(), self.tau, self.bounds)

    def __repr__(self):
        return 'ControlSequence(n_slots=%d, tau=%g us)' % (self.n_slots, self.tau)


class Trajectory(object):
    """Density operators recorded along a sequence."""
    def __init__(self, times, states, space):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=complex)
        self.space = space
        if self.states.shape[0] != self.times.size:
            raise DimensionError('%d times for %d states'
                                 % (self.times.size, self.states.shape[0]))

    def __len__(self):
        return self.times.size

    @property
    def final(self):
        return self.states[-1]

    def reduced(self, keep):
        return np.array([partial_trace(rho, keep, self.space) for rho in self.states])

    def populations(self, which):
        """Fock populations of one subsystem, shape (n_times, dim)."""
        return np.real(np.array([np.diag(r) for r in self.reduced([which])]))

    def atom_excited(self):
        return self.populations(Hilbert.ATOM)[:, 1]

    def purity(self):
        return np.array([purity(rho) for rho in self.states])

    def validate(self, trace_tol=TRACE_TOL, positivity_tol=POSITIVITY_TOL):
        for t, rho in zip(self.times, self.states):
            check_density(rho, trace_tol, positivity_tol, where='t = %g us' % t)


def check_density(rho, trace_tol=TRACE_TOL, positivity_tol=POSITIVITY_TOL, where=''):
    herm_err = np.abs(rho - rho.conj().T).max()
    if herm_err > 1e-9:
        raise PositivityError('state at %s is not Hermitian (%.2e)' % (where, herm_err))
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise PositivityError('state at %s has trace %.12f' % (where, tr))
    low = la.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if low < -positivity_tol:
        raise PositivityError('state at %s has eigenvalue %.2e' % (where, low))


def propagate(rho0, seq, system, substeps=1, validate=True):
    """Apply the slot propagators in order, recording the state after each.

    With substeps = m every slot is split into m equal parts and the state
    is recorded at each of them.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    N = system.space.N
    if rho0.shape != (N, N):
        raise DimensionError('initial state is %s, system needs %dx%d' % (rho0.shape, N, N))
    if substeps < 1:
        raise ValueError('substeps must be >= 1')
    dt = seq.tau / substeps
    v = vec(rho0)
    times = [0.0]
    states = [rho0]
    for k in range(seq.n_slots):
        F = system.propagator(seq.u[k], dt).matrix
        for m in range(substeps):
            v = F @ v
            times.append(k * seq.tau + (m + 1) * dt)
            states.append(unvec(v, N))
    traj = Trajectory(times, states, system.space)
    if validate:
        traj.validate()
    return traj


def final_state(rho0, seq, system):
    """Only rho(T), without keeping the intermediate states."""
    N = system.space.N
    v = vec(np.asarray(rho0, dtype=complex))
    for k in range(seq.n_slots):
        v = system.propagator(seq.u[k], seq.tau).matrix @ v
    return unvec(v, N)


def idle_controls(far_detuning=FAR_DETUNING):
    return np.array([far_detuning, 0.0, 0.0])


def null_state(L, n):
    """Density matrix spanning the kernel of a Liouvillian matrix."""
    w, V = la.eig(L)
    order = np.argsort(np.abs(w))
    if w.size > 1 and abs(w[order[1]]) - abs(w[order[0]]) < STEADY_GAP:
        raise AmbiguousSteadyStateError(
            'two eigenvalues near zero (%.3e, %.3e), steady state is not unique'
            % (abs(w[order[0]]), abs(w[order[1]])))
    candidate = V[:, order[0]]
    rho = _normalise(unvec(candidate, n))
    scale = np.linalg.norm(L, 2)
    residual = np.linalg.norm(L @ vec(rho))
    if residual > STEADY_RESIDUAL * scale:
        logger.debug('eigenvector residual %.2e too large, refining with SVD', residual)
        _, _, Vh = la.svd(L)
        rho = _normalise(unvec(Vh[-1].conj(), n))
        residual = np.linalg.norm(L @ vec(rho))
        if residual > STEADY_RESIDUAL * scale:
            raise NumericalError('steady state residual %.2e exceeds tolerance' % residual)
    return rho


def _normalise(rho):
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def steady_generator(system, detuning=None, frame=LASER):
    """Liouvillian whose null state is the initial state.

    frame='laser' uses the laser-frame generator that keeps the g*s atom drive
    and the full -g0*s*Q*q coupling; `detuning` is omega_a - omega_l in MHz and
    defaults to STEADY_DETUNING. frame='drift' uses the control-system
    generator at the idle point u = (detuning, 0, 0), default FAR_DETUNING.
    """
    if frame == DRIFT:
        detuning = FAR_DETUNING if detuning is None else detuning
        return system.liouvillian(idle_controls(detuning)).matrix
    if frame == LASER:
        detuning = STEADY_DETUNING if detuning is None else detuning
        H = laser_frame_hamiltonian(system.params, system.frame, system.space, detuning)
        return vectorize_liouvillian(H, system.lindblads).matrix
    raise ValueError('frame must be one of %s, got %r' % (', '.join(STEADY_FRAMES), frame))


def steady_state(system, detuning=None, frame=LASER):
    """Steady state of the driven, dissipative system with the atom parked."""
    rho = null_state(steady_generator(system, detuning, frame), system.space.N)
    logger.info('steady state (%s frame): cavity p1 = %.4f, oscillator p1 = %.4f',
                frame, np.real(partial_trace(rho, [Hilbert.CAVITY], system.space)[1, 1]),
                np.real(partial_trace(rho, [Hilbert.OSC], system.space)[1, 1]))
    return rho


@dataclass(frozen=True)
class SteadySettings:
    """Which generator the initial state is solved from, and where the atom sits."""
    frame: str = LASER
    detuning: float = STEADY_DETUNING

    def __post_init__(self):
        if self.frame not in STEADY_FRAMES:
            raise ConfigError('steady frame must be one of %s' % ', '.join(STEADY_FRAMES),
                              'steady_frame')

    @classmethod
    def for_frame(cls, frame, detuning=None):
        if detuning is None:
            detuning = STEADY_DETUNING if frame == LASER else FAR_DETUNING
        return cls(frame, float(detuning))

    def solve(self, system):
        return steady_state(system, self.detuning, self.frame)

    def to_dict(self):
        return {'frame': self.frame, 'detuning_mhz': self.detuning}


def steady_populations(rho, space):
    out = {}
    for which in (Hilbert.ATOM, Hilbert.CAVITY, Hilbert.OSC):
        out[which] = np.real(np.diag(partial_trace(rho, [which], space)))
    return out


def embed_state(rho, source, target):
    """Copy a state into a larger truncation, padding with zeros."""
    if any(s > t for s, t in zip(source.dims, target.dims)):
        raise DimensionError('cannot embed %r into the smaller %r' % (source, target))
    # source basis states, atom-major, located in the target basis
    keep = np.ravel_multi_index(tuple(np.indices(source.dims).reshape(3, -1)), target.dims)
    rho_t = np.zeros((target.N, target.N), dtype=complex)
    rho_t[np.ix_(keep, keep)] = rho
    return rho_t


def trajectory_superop(seq, system):
    """Product of all slot propagators, F_n ... F_1."""
    N2 = system.space.N ** 2
    total = np.eye(N2, dtype=complex)
    for k in range(seq.n_slots):
        total = system.propagator(seq.u[k], seq.tau).matrix @ total
    return SuperOp(total, system.space)
