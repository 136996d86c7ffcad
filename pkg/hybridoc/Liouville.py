"""Hamiltonians, dissipators and propagators on the column-stacked state.

vec(rho) stacks the columns of rho, so vec(A X B) = (B^T kron A) vec(X).
Frequencies enter in MHz and time in microseconds; the factors of 2*pi are
applied here and nowhere else.

The rotating g*s*(sigma+ + h.c.) term left over from the shifted atom-cavity
coupling is not part of the drift. It can be cancelled actively by the
atom control signal, passively by an extra harmonic drive, or kept in the
model by choosing omega_r = omega_l; laser_frame_hamiltonian() keeps it for
steady-state studies.
"""
import logging
import math
from collections import OrderedDict

import numpy as np
import scipy.linalg as la

from hybridoc import Hilbert
from hybridoc.errors import NormalityError
from hybridoc.Model import HOPPING, derive_frame, thermal

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
CONTROL_NAMES = ('detuning', 'atomX', 'atomY')
DEGENERACY_TOL = 1e-10
NORMALITY_TOL = 1e-8
# Propagators kept per ControlSystem; each one is N^2 x N^2 complex.
CACHE_SIZE = 64


class HamiltonianSet(object):
    """Drift and the three control Hamiltonians, in rad/us per MHz of control."""
    def __init__(self, H_drift, H_controls):
        if len(H_controls) != len(CONTROL_NAMES):
            raise ValueError('expected %d control Hamiltonians' % len(CONTROL_NAMES))
        for H in [H_drift] + list(H_controls):
            if not H.is_hermitian():
                raise ValueError('Hamiltonian is not Hermitian')
        self.H_drift = H_drift
        self.H_controls = list(H_controls)

    def total(self, u):
        H = self.H_drift.matrix.copy()
        for uj, Hj in zip(u, self.H_controls):
            H = H + uj * Hj.matrix
        return Hilbert.Operator(H, self.H_drift.space)


class LindbladSet(object):
    """Jump operators together with the labels they were built from."""
    def __init__(self, operators, labels=None):
        self.operators = list(operators)
        self.labels = list(labels) if labels is not None else ['V%d' % (i + 1) for i in
                                                              range(len(self.operators))]

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)


class SuperOp(object):
    """N^2 x N^2 matrix acting on column-stacked density matrices."""
    def __init__(self, matrix, space):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.space = space
        self.matrix.flags.writeable = False

    def __matmul__(self, other):
        other = other.matrix if isinstance(other, SuperOp) else other
        return self.matrix @ other

    def apply(self, rho):
        return unvec(self.matrix @ vec(rho))


def vec(rho):
    return np.asarray(rho).reshape(-1, order='F')


def unvec(v, n=None):
    v = np.asarray(v)
    if n is None:
        n = int(round(math.sqrt(v.size)))
    return v.reshape((n, n), order='F')


def hamiltonian_superop(H):
    """Commutator superoperator 1 kron H - H^T kron 1."""
    H = H.matrix if isinstance(H, Hilbert.Operator) else np.asarray(H)
    eye = np.eye(H.shape[0])
    return np.kron(eye, H) - np.kron(H.T, eye)


def dissipator_superop(linds, n):
    total = np.zeros((n * n, n * n), dtype=complex)
    eye = np.eye(n)
    for V in linds:
        V = V.matrix if isinstance(V, Hilbert.Operator) else np.asarray(V)
        VdV = V.conj().T @ V
        total += np.kron(V.conj(), V) - 0.5 * (np.kron(eye, VdV) + np.kron(VdV.T, eye))
    return total


def build_hamiltonians(params, frame, space, atom_offset=0.0):
    """Drift and control Hamiltonians in the drive frame.

    `atom_offset` is omega_a0 - omega_r in MHz; the constant part of the
    atom frequency is parked on the drive, so it defaults to zero and the
    detuning control carries the whole atom-drive detuning.
    """
    ops = Hilbert.ModeOperators(space)
    a, b, sm, sp = ops.a.matrix, ops.b.matrix, ops.sm.matrix, ops.sp.matrix
    ad, bd = a.conj().T, b.conj().T
    mode_freq = -frame.delta_R_prime
    g0s = params.g_co * params.s
    if frame.interaction == HOPPING:
        drift = mode_freq * (ad @ a + bd @ b) - g0s * (a @ bd + ad @ b)
    else:
        drift = mode_freq * (ad @ a - bd @ b) - g0s * (a @ b + ad @ bd)
    drift = drift + atom_offset * (sp @ sm) + params.g_ac * (a @ sp + ad @ sm)
    drift = TWO_PI * drift
    drift = 0.5 * (drift + drift.conj().T)
    controls = [TWO_PI * (sp @ sm),
                math.pi * (sp + sm),
                math.pi * (-1j) * (sp - sm)]
    return HamiltonianSet(Hilbert.Operator(drift, space, hermitian=True),
                          [Hilbert.Operator(H, space, hermitian=True) for H in controls])


def build_lindblads(params, space):
    """sqrt(kappa) a, sqrt(gamma') b, sqrt(gamma' x) b^dag, sqrt(kappa_a) sigma-."""
    th = thermal(params)
    ops = Hilbert.ModeOperators(space)
    rates = [params.kappa, th.gamma_eff, th.gamma_eff * th.x, params.kappa_a]
    base = [ops.a, ops.b, ops.b.dag(), ops.sm]
    operators = [math.sqrt(TWO_PI * rate) * op for rate, op in zip(rates, base)]
    return LindbladSet(operators, labels=['cavity decay', 'oscillator decay',
                                          'oscillator heating', 'atom decay'])


def laser_frame_hamiltonian(params, frame, space, atom_detuning):
    """Generator in the frame rotating with the laser (omega_r = omega_l).

    Keeps the shifted atom drive g*s*(sigma+ + h.c.) and the full linearised
    coupling -g0*s*Q*q. `atom_detuning` is omega_a - omega_l in MHz.
    """
    ops = Hilbert.ModeOperators(space)
    a, b, sm, sp = ops.a.matrix, ops.b.matrix, ops.sm.matrix, ops.sp.matrix
    ad, bd = a.conj().T, b.conj().T
    H = (-frame.delta_prime * (ad @ a) + params.Om * (bd @ b)
         + atom_detuning * (sp @ sm)
         - params.g_co * params.s * (a + ad) @ (b + bd)
         + params.g_ac * (a @ sp + ad @ sm)
         + params.g_ac * params.s * (sp + sm))
    H = TWO_PI * H
    return Hilbert.Operator(0.5 * (H + H.conj().T), space, hermitian=True)


def vectorize_liouvillian(H_total, linds):
    """-i(1 kron H - H^T kron 1) plus the Lindblad dissipator."""
    if not H_total.is_hermitian():
        raise ValueError('Hamiltonian must be Hermitian')
    n = H_total.dim
    L = -1j * hamiltonian_superop(H_total) + dissipator_superop(linds, n)
    return SuperOp(L, H_total.space)


def propagator(L, tau):
    if tau < 0:
        raise ValueError('slot duration must be non-negative, got %g' % tau)
    return SuperOp(la.expm(tau * L.matrix), L.space)


def _super_matrix(op):
    return op.matrix if isinstance(op, SuperOp) else np.asarray(op)


def propagator_derivative(L, H_j, tau, delta, F=None):
    """One-sided difference of exp(tau L) along -i*delta*H_j."""
    if delta <= 0:
        raise ValueError('finite-difference step must be positive, got %g' % delta)
    if tau < 0:
        raise ValueError('slot duration must be non-negative, got %g' % tau)
    Lm = _super_matrix(L)
    if F is None:
        F = la.expm(tau * Lm)
    else:
        F = _super_matrix(F)
    stepped = la.expm(tau * (Lm - 1j * delta * _super_matrix(H_j)))
    return SuperOp((stepped - F) / delta, getattr(L, 'space', None))


def is_normal(L, tol=NORMALITY_TOL):
    Lm = _super_matrix(L)
    scale = np.linalg.norm(Lm) ** 2
    return np.linalg.norm(Lm @ Lm.conj().T - Lm.conj().T @ Lm) <= tol * max(scale, 1e-300)


def spectral_decomposition(L):
    """Orthonormal eigenbasis of a normal generator via the complex Schur form."""
    Lm = _super_matrix(L)
    if not is_normal(Lm):
        raise NormalityError('generator is not normal, use finite differences')
    if np.allclose(Lm, -Lm.conj().T, rtol=0, atol=NORMALITY_TOL * max(np.abs(Lm).max(), 1.0)):
        # closed system: i L is Hermitian
        w, Z = la.eigh(1j * Lm)
        return -1j * w, Z
    T, Z = la.schur(Lm, output='complex')
    return np.diag(T).copy(), Z


def propagator_derivative_spectral(L, H_j, tau, decomposition=None):
    """Exact derivative of exp(tau L) along -i H_j for normal L."""
    if tau < 0:
        raise ValueError('slot duration must be non-negative, got %g' % tau)
    lam, Z = decomposition if decomposition is not None else spectral_decomposition(L)
    B = Z.conj().T @ (-1j * _super_matrix(H_j)) @ Z
    diff = lam[:, None] - lam[None, :]
    degenerate = np.abs(diff) < DEGENERACY_TOL
    safe = np.where(degenerate, 1.0, diff)
    # e^{tau b} expm1(tau (a - b)) / (a - b) avoids cancellation for close pairs
    G = np.exp(tau * lam)[None, :] * np.expm1(tau * diff) / safe
    G = np.where(degenerate, tau * np.exp(tau * lam)[:, None] * np.ones_like(diff), G)
    return SuperOp(Z @ (B * G) @ Z.conj().T, getattr(L, 'space', None))


def derivative_step(u_j, scale=1e-6):
    return scale * max(1.0, abs(u_j))


def check_derivative_step(system, u, tau, j=0):
    """Validate the finite-difference step for control j at amplitudes u.

    The step must be small against 1/|tau F| and two steps (1e-5 and 1e-6
    relative) must agree to 1e-4; either failure is logged as a warning.
    """
    L = system.liouvillian(u)
    F = propagator(L, tau)
    delta = derivative_step(u[j])
    bound = 1.0 / max(tau * np.linalg.norm(F.matrix, 2), 1e-300)
    small = bool(delta < 1e-2 * bound)
    if not small:
        logger.warning('derivative step %g is not small against 1/|tau F| = %g', delta, bound)
    Hj = system.control_supers[j]
    coarse = propagator_derivative(L, Hj, tau, derivative_step(u[j], 1e-5), F).matrix
    fine = propagator_derivative(L, Hj, tau, derivative_step(u[j], 1e-6), F).matrix
    scale = max(np.linalg.norm(fine), 1e-300)
    disagreement = float(np.linalg.norm(coarse - fine) / scale)
    if disagreement > 1e-4:
        logger.warning('finite-difference self-test: steps 1e-5 and 1e-6 disagree by %.2e '
                       'for control %s', disagreement, CONTROL_NAMES[j])
    else:
        logger.debug('finite-difference self-test passed (%.2e)', disagreement)
    return {'control': CONTROL_NAMES[j], 'u_mhz': float(u[j]), 'step': delta,
            'step_bound': bound, 'small': small, 'disagreement': disagreement,
            'passed': small and disagreement <= 1e-4}


def choi_matrix(F):
    """Reshuffle a column-stacked superoperator into its Choi matrix."""
    Fm = _super_matrix(F)
    n = int(round(math.sqrt(Fm.shape[0])))
    return Fm.reshape(n, n, n, n).transpose(3, 1, 2, 0).reshape(n * n, n * n)


class ControlSystem(object):
    """The bilinear control system of one device on one truncated space."""
    def __init__(self, params, space=None, frame=None, dissipative=True, atom_offset=0.0):
        self.params = params
        self.space = space if space is not None else Hilbert.Space()
        self.frame = frame if frame is not None else derive_frame(params)
        self.dissipative = dissipative
        self.atom_offset = atom_offset
        self.hamiltonians = build_hamiltonians(params, self.frame, self.space, atom_offset)
        self.lindblads = build_lindblads(params, self.space) if dissipative else LindbladSet([])
        n = self.space.N
        self.dissipator = dissipator_superop(self.lindblads, n)
        self.drift = -1j * hamiltonian_superop(self.hamiltonians.H_drift) + self.dissipator
        self.control_supers = [hamiltonian_superop(H) for H in self.hamiltonians.H_controls]
        self._cache = OrderedDict()

    def closed(self):
        """Same device with every dissipation channel switched off."""
        return ControlSystem(self.params, self.space, self.frame, dissipative=False,
                             atom_offset=self.atom_offset)

    def resized(self, dim):
        return ControlSystem(self.params, self.space.resized(dim), self.frame,
                             self.dissipative, self.atom_offset)

    def hamiltonian(self, u):
        return self.hamiltonians.total(u)

    def liouvillian(self, u):
        L = self.drift.copy()
        for uj, Hj in zip(u, self.control_supers):
            if uj != 0:
                L -= 1j * uj * Hj
        return SuperOp(L, self.space)

    def propagator(self, u, tau):
        key = (float(tau), tuple(float(x) for x in u))
        F = self._cache.get(key)
        if F is None:
            F = propagator(self.liouvillian(u), tau)
            self._cache[key] = F
            if len(self._cache) > CACHE_SIZE:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(key)
        return F

    def clear_cache(self):
        self._cache.clear()

    def __getstate__(self):
        state = self.__dict__.copy()
        state['_cache'] = OrderedDict()
        return state
