"""Truncated Fock spaces for the atom, the cavity and the oscillator."""
import numpy as np

from hybridoc.errors import DimensionError, StateIndexError

ATOM = 'atom'
CAVITY = 'cavity'
OSC = 'osc'
SUBSYSTEMS = (ATOM, CAVITY, OSC)

HERMITIAN_TOL = 1e-12


class Space(object):
    """Ordered product space atom x cavity x oscillator."""
    def __init__(self, cavity_dim=3, osc_dim=3, atom_dim=2):
        if atom_dim != 2:
            raise DimensionError('atom_dim must be 2, got %d' % atom_dim)
        if cavity_dim < 2 or osc_dim < 2:
            raise DimensionError('mode truncations must be at least 2, got %d, %d'
                                 % (cavity_dim, osc_dim))
        self.atom_dim = int(atom_dim)
        self.cavity_dim = int(cavity_dim)
        self.osc_dim = int(osc_dim)

    @property
    def dims(self):
        return (self.atom_dim, self.cavity_dim, self.osc_dim)

    @property
    def N(self):
        return self.atom_dim * self.cavity_dim * self.osc_dim

    def dim_of(self, which):
        try:
            return self.dims[SUBSYSTEMS.index(which)]
        except ValueError:
            raise DimensionError('unknown subsystem %r' % (which,))

    def index(self, n_atom, n_cav, n_osc):
        """Basis index, atom-major."""
        for n, d, name in zip((n_atom, n_cav, n_osc), self.dims, SUBSYSTEMS):
            if not 0 <= n < d:
                raise StateIndexError('%s index %d outside 0..%d' % (name, n, d - 1))
        return (n_atom * self.cavity_dim + n_cav) * self.osc_dim + n_osc

    def resized(self, dim):
        """Same space with both bosonic modes truncated at `dim`."""
        return Space(cavity_dim=dim, osc_dim=dim)

    def __eq__(self, other):
        return isinstance(other, Space) and self.dims == other.dims

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(self.dims)

    def __repr__(self):
        return 'Space(%dx%dx%d)' % self.dims


class Operator(object):
    """Dense complex matrix, either single-mode or on a Space."""
    def __init__(self, matrix, space=None, hermitian=False):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError('operator matrix must be square, got shape %s'
                                 % (matrix.shape,))
        if space is not None and matrix.shape[0] != space.N:
            raise DimensionError('matrix of size %d does not match %r'
                                 % (matrix.shape[0], space))
        self.matrix = matrix
        self.space = space
        if hermitian and not self.is_hermitian():
            raise ValueError('operator asserted Hermitian is not')
        self.hermitian = hermitian

    @property
    def dim(self):
        return self.matrix.shape[0]

    def is_hermitian(self, tol=HERMITIAN_TOL):
        return np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=tol)

    def dag(self):
        return Operator(self.matrix.conj().T, self.space, self.hermitian)

    def _wrap(self, matrix):
        return Operator(matrix, self.space)

    def __add__(self, other):
        return self._wrap(self.matrix + _matrix_of(other))

    def __sub__(self, other):
        return self._wrap(self.matrix - _matrix_of(other))

    def __neg__(self):
        return self._wrap(-self.matrix)

    def __mul__(self, scalar):
        return self._wrap(self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self._wrap(self.matrix @ _matrix_of(other))

    def __repr__(self):
        return 'Operator(dim=%d, space=%r)' % (self.dim, self.space)


def _matrix_of(op):
    return op.matrix if isinstance(op, Operator) else np.asarray(op)


def annihilator(dim):
    """Lowering operator of a `dim`-level truncated mode."""
    if dim < 2:
        raise DimensionError('annihilator needs dim >= 2, got %d' % dim)
    return Operator(np.diag(np.sqrt(np.arange(1, dim)), k=1))


def number(dim):
    a = annihilator(dim)
    return a.dag() @ a


def sigma_minus():
    """Atom lowering operator, |g> = index 0, |e> = index 1."""
    return annihilator(2)


def embed(op, which, space):
    """Kronecker-embed a single-mode operator into `space`."""
    matrix = _matrix_of(op)
    d = space.dim_of(which)
    if matrix.shape != (d, d):
        raise DimensionError('%s operator must be %dx%d, got %s'
                             % (which, d, d, matrix.shape))
    factors = [np.eye(n) for n in space.dims]
    factors[SUBSYSTEMS.index(which)] = matrix
    full = factors[0]
    for f in factors[1:]:
        full = np.kron(full, f)
    return Operator(full, space)


def fock_state(space, n_atom, n_cav, n_osc):
    """Product basis ket |n_atom, n_cav, n_osc>."""
    psi = np.zeros(space.N, dtype=complex)
    psi[space.index(n_atom, n_cav, n_osc)] = 1.0
    return psi


def ket_to_dm(psi):
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def fock_dm(dim, n):
    """Projector |n><n| on a single truncated mode."""
    if not 0 <= n < dim:
        raise StateIndexError('Fock index %d outside 0..%d' % (n, dim - 1))
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return rho


class ModeOperators(object):
    """The embedded a, b and sigma- of one Space, built once."""
    def __init__(self, space):
        self.space = space
        self.a = embed(annihilator(space.cavity_dim), CAVITY, space)
        self.b = embed(annihilator(space.osc_dim), OSC, space)
        self.sm = embed(sigma_minus(), ATOM, space)
        self.sp = self.sm.dag()
