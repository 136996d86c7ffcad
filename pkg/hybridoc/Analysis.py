"""State-quality measures: reduced states, fidelity, Wigner function, mana, negativity.

The Wigner function is normalised so that its integral over the phase plane
alpha = x + i p is tr(rho), which puts W(0) of the vacuum at 2/pi and the
mana of Fock |1> at log(4 exp(-1/2) - 1).
"""
import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg as la
from scipy import integrate, special

from hybridoc import Hilbert
from hybridoc.errors import DimensionError, GridTooSmallError

logger = logging.getLogger(__name__)

DEFAULT_EXTENT = 4.0
DEFAULT_POINTS = 201
BOUNDARY_TOL = 1e-8
LAGUERRE = 'laguerre'
PARITY = 'parity'
MIN_PARITY_DIM = 10
PARITY_DIM = 40

_LETTERS = 'abcdefghijkl'


def _keep_indices(keep, space):
    if isinstance(keep, str):
        keep = [keep]
    keep = list(keep)
    if not keep:
        raise DimensionError('partial trace needs at least one subsystem to keep')
    for which in keep:
        space.dim_of(which)
    return sorted(set(Hilbert.SUBSYSTEMS.index(which) for which in keep))


def partial_trace(rho, keep, space):
    """Reduced operator on the subsystems in `keep`, in atom, cavity, osc order."""
    rho = np.asarray(rho)
    if rho.shape != (space.N, space.N):
        raise DimensionError('state is %s, %r needs %dx%d' % (rho.shape, space, space.N, space.N))
    idx = _keep_indices(keep, space)
    dims = space.dims
    n = len(dims)
    rows = list(_LETTERS[:n])
    cols = list(_LETTERS[n:2 * n])
    for i in range(n):
        if i not in idx:
            cols[i] = rows[i]
    out = ''.join(rows[i] for i in idx) + ''.join(cols[i] for i in idx)
    reduced = np.einsum(''.join(rows) + ''.join(cols) + '->' + out, rho.reshape(dims + dims))
    d = int(np.prod([dims[i] for i in idx]))
    return reduced.reshape(d, d)


def expand_reduced(sigma, keep, space):
    """Adjoint of partial_trace: sigma on the kept factors, identity elsewhere."""
    idx = _keep_indices(keep, space)
    dims = space.dims
    n = len(dims)
    kept_dims = tuple(dims[i] for i in idx)
    d = int(np.prod(kept_dims))
    sigma = np.asarray(sigma)
    if sigma.shape != (d, d):
        raise DimensionError('reduced operator is %s, expected %dx%d' % (sigma.shape, d, d))
    rows = _LETTERS[:n]
    cols = _LETTERS[n:2 * n]
    operands = [sigma.reshape(kept_dims + kept_dims)]
    subscripts = [''.join(rows[i] for i in idx) + ''.join(cols[i] for i in idx)]
    for i in range(n):
        if i not in idx:
            operands.append(np.eye(dims[i]))
            subscripts.append(rows[i] + cols[i])
    full = np.einsum(','.join(subscripts) + '->' + rows + cols, *operands)
    return full.reshape(space.N, space.N)


def purity(rho):
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho, rho)))


def fidelity(rho, target):
    """<psi|rho|psi> for a ket target, tr(rho sigma) for a density-matrix target."""
    rho = np.asarray(rho)
    target = np.asarray(target, dtype=complex)
    if target.ndim == 1:
        if target.size != rho.shape[0]:
            raise DimensionError('target of size %d against a %dx%d state'
                                 % (target.size, rho.shape[0], rho.shape[1]))
        value = np.vdot(target, rho @ target)
    else:
        if target.shape != rho.shape:
            raise DimensionError('target is %s, state is %s' % (target.shape, rho.shape))
        value = np.trace(rho @ target)
    return float(np.real(value))


def reduced_fidelity(rho, target, keep, space):
    return fidelity(partial_trace(rho, keep, space), target)


def trace_distance(rho, sigma):
    delta = np.asarray(rho) - np.asarray(sigma)
    return 0.5 * float(np.sum(np.abs(la.eigvalsh(0.5 * (delta + delta.conj().T)))))


def populations(rho, which, space):
    return np.real(np.diag(partial_trace(rho, [which], space)))


def fock_ket(dim, n):
    if not 0 <= n < dim:
        raise DimensionError('Fock level %d outside a %d-level mode' % (n, dim))
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def noon11_ket(cavity_dim, osc_dim):
    """(|0,1> + |1,0>)/sqrt(2) on cavity x oscillator."""
    psi = np.zeros(cavity_dim * osc_dim, dtype=complex)
    psi[0 * osc_dim + 1] = 1.0
    psi[1 * osc_dim + 0] = 1.0
    return psi / math.sqrt(2.0)


def thermal_dm(dim, n_bar):
    """Geometric populations truncated at `dim` and renormalised."""
    if n_bar <= 0:
        return Hilbert.fock_dm(dim, 0)
    p = (n_bar / (1.0 + n_bar)) ** np.arange(dim)
    return np.diag(p / p.sum()).astype(complex)


def coherent_ket(dim, beta):
    n = np.arange(dim)
    amps = np.exp(-abs(beta) ** 2 / 2.0) * beta ** n / np.sqrt(special.factorial(n))
    return amps / np.linalg.norm(amps)


@dataclass
class WignerGrid:
    """W(x + i p) on a square grid, values[i, j] at (axis[i], axis[j])."""
    extent: float
    n_points: int
    values: np.ndarray

    @property
    def axis(self):
        return np.linspace(-self.extent, self.extent, self.n_points)

    def integral(self, absolute=False):
        w = np.abs(self.values) if absolute else self.values
        x = self.axis
        return float(integrate.trapezoid(integrate.trapezoid(w, x=x, axis=1), x=x))

    def boundary_max(self):
        v = np.abs(self.values)
        return float(max(v[0, :].max(), v[-1, :].max(), v[:, 0].max(), v[:, -1].max()))

    def to_frame(self):
        X, P = np.meshgrid(self.axis, self.axis, indexing='ij')
        return pd.DataFrame({'x': X.ravel(), 'p': P.ravel(), 'W': self.values.ravel()})


def _grid(extent, n_points):
    axis = np.linspace(-extent, extent, n_points)
    X, P = np.meshgrid(axis, axis, indexing='ij')
    return X + 1j * P


@functools.lru_cache(maxsize=8)
def _laguerre_kernels(dim, extent, n_points):
    """K[m, n] = W of |m><n| on the grid, for m >= n."""
    alpha = _grid(extent, n_points)
    r2 = 4.0 * np.abs(alpha) ** 2
    gauss = (2.0 / math.pi) * np.exp(-r2 / 2.0)
    K = np.zeros((dim, dim) + alpha.shape, dtype=complex)
    for m in range(dim):
        for n in range(m + 1):
            k = m - n
            norm = math.exp(0.5 * (special.gammaln(n + 1) - special.gammaln(m + 1)))
            K[m, n] = ((-1) ** n * norm * (2.0 * alpha.conj()) ** k
                       * gauss * special.eval_genlaguerre(n, k, r2))
    K.flags.writeable = False
    return K


def _wigner_laguerre(rho, extent, n_points):
    dim = rho.shape[0]
    K = _laguerre_kernels(dim, float(extent), int(n_points))
    W = np.zeros(K.shape[2:])
    for m in range(dim):
        W += np.real(rho[m, m] * K[m, m])
        for n in range(m):
            W += 2.0 * np.real(rho[m, n] * K[m, n])
    return W


def _wigner_parity(rho, extent, n_points, pad_dim):
    dim = rho.shape[0]
    pad_dim = max(pad_dim, MIN_PARITY_DIM, dim)
    big = np.zeros((pad_dim, pad_dim), dtype=complex)
    big[:dim, :dim] = rho
    a = Hilbert.annihilator(pad_dim).matrix
    # D(r e^{i theta}) = U exp(r (a^dag - a)) U^dag with U = exp(i theta n)
    mu, V = la.eigh(1j * (a.conj().T - a))
    parity = (-1.0) ** np.arange(pad_dim)
    levels = np.arange(pad_dim)
    alpha = _grid(extent, n_points)
    W = np.empty(alpha.shape)
    for idx in np.ndindex(alpha.shape):
        r = abs(alpha[idx])
        phase = np.exp(1j * np.angle(alpha[idx]) * levels)
        D = (phase[:, None] * (V * np.exp(-1j * r * mu)) @ V.conj().T) * phase.conj()[None, :]
        displaced = D.conj().T @ big @ D
        W[idx] = np.real(np.sum(parity * np.diag(displaced)))
    return (2.0 / math.pi) * W


def wigner(rho, extent=DEFAULT_EXTENT, n_points=DEFAULT_POINTS, method=LAGUERRE,
           pad_dim=PARITY_DIM):
    """Wigner function (2/pi) tr[D(alpha)^dag rho D(alpha) P] of a single-mode state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError('Wigner function needs a square single-mode state')
    if method == LAGUERRE:
        values = _wigner_laguerre(rho, extent, n_points)
    elif method == PARITY:
        values = _wigner_parity(rho, extent, n_points, pad_dim)
    else:
        raise ValueError('unknown Wigner method %r' % (method,))
    return WignerGrid(extent=float(extent), n_points=int(n_points), values=values)


def cv_mana(rho_osc, extent=DEFAULT_EXTENT, n_points=DEFAULT_POINTS, method=LAGUERRE,
            clamp=True, boundary_tol=BOUNDARY_TOL, grid=None):
    """Natural log of the integral of |W|.

    With clamp=False the raw value is returned, which can dip slightly below
    zero for states with a nonnegative Wigner function.
    """
    if grid is None:
        grid = wigner(rho_osc, extent, n_points, method)
    edge = grid.boundary_max()
    if edge >= boundary_tol:
        raise GridTooSmallError('|W| reaches %.2e on the grid boundary (extent %g)'
                                % (edge, grid.extent))
    raw = math.log(grid.integral(absolute=True))
    if clamp:
        return max(raw, 0.0)
    return raw


def partial_transpose(rho, dims):
    dA, dB = dims
    rho = np.asarray(rho)
    if rho.shape != (dA * dB, dA * dB):
        raise DimensionError('state is %s, split %dx%d' % (rho.shape, dA, dB))
    return rho.reshape(dA, dB, dA, dB).transpose(0, 3, 2, 1).reshape(dA * dB, dA * dB)


def log_negativity(rho, dims):
    """log2 of the trace norm of the partial transpose on the second factor."""
    norm = la.svdvals(partial_transpose(rho, dims)).sum()
    return float(math.log2(norm))


def cavity_osc_negativity(rho, space):
    reduced = partial_trace(rho, [Hilbert.CAVITY, Hilbert.OSC], space)
    return log_negativity(reduced, (space.cavity_dim, space.osc_dim))


def log_negativity_series(trajectory):
    return np.array([cavity_osc_negativity(rho, trajectory.space)
                     for rho in trajectory.states])


def mana_series(trajectory, extent=DEFAULT_EXTENT, n_points=DEFAULT_POINTS, clamp=False):
    return np.array([cv_mana(r, extent, n_points, clamp=clamp)
                     for r in trajectory.reduced([Hilbert.OSC])])


def summary(rho, space, target=None, keep=None, extent=DEFAULT_EXTENT,
            n_points=DEFAULT_POINTS):
    """Metrics of one state: populations, purity, mana (raw and clamped), negativity."""
    rho_osc = partial_trace(rho, [Hilbert.OSC], space)
    grid = wigner(rho_osc, extent, n_points)
    out = {
        'purity': purity(rho),
        'cavity_populations': populations(rho, Hilbert.CAVITY, space).tolist(),
        'osc_populations': populations(rho, Hilbert.OSC, space).tolist(),
        'atom_excited': float(populations(rho, Hilbert.ATOM, space)[1]),
        'mana_raw': cv_mana(rho_osc, clamp=False, grid=grid),
        'log_negativity': cavity_osc_negativity(rho, space),
        'wigner_integral': grid.integral(),
    }
    out['mana'] = max(out['mana_raw'], 0.0)
    if target is not None:
        reduced = rho if keep is None else partial_trace(rho, keep, space)
        out['fidelity'] = fidelity(reduced, target)
    return out
