import math

import numpy as np
import pytest
import scipy.linalg as la

from hybridoc import Hilbert, Liouville, Model
from hybridoc.Dynamics import idle_controls
from hybridoc.errors import NormalityError
from hybridoc.Liouville import (LindbladSet, choi_matrix, hamiltonian_superop, propagator,
                                propagator_derivative, propagator_derivative_spectral, unvec,
                                vec, vectorize_liouvillian)

TAU = 0.005


def damped_mode(kappa=1.0):
    a = Hilbert.annihilator(2)
    H = Hilbert.Operator(np.zeros((2, 2)), hermitian=True)
    return vectorize_liouvillian(H, LindbladSet([math.sqrt(kappa) * a]))


def test_vec_is_column_stacking():
    A, X, B = (np.arange(9).reshape(3, 3) + k for k in range(3))
    np.testing.assert_allclose(vec(A @ X @ B), np.kron(B.T, A) @ vec(X))
    np.testing.assert_array_equal(unvec(vec(X)), X)


def test_damped_mode_spectrum():
    L = damped_mode(kappa=2.0)
    eigs = np.sort(np.linalg.eigvals(L.matrix).real)
    np.testing.assert_allclose(eigs, [-2.0, -1.0, -1.0, 0.0], atol=1e-12)


def test_damped_mode_decay():
    L = damped_mode(kappa=2.0)
    F = propagator(L, 0.5)
    rho = F.apply(np.diag([0.0, 1.0]))
    assert rho[1, 1].real == pytest.approx(math.exp(-1.0), rel=1e-12)
    np.testing.assert_allclose(propagator(L, 0.0).matrix, np.eye(4))


def test_closed_generator_is_anti_hermitian():
    H = Hilbert.Operator(np.diag([0.0, 1.0, 3.0]), hermitian=True)
    L = vectorize_liouvillian(H, LindbladSet([]))
    assert np.abs(np.linalg.eigvals(L.matrix).real).max() < 1e-12


def test_rejects_bad_arguments():
    L = damped_mode()
    with pytest.raises(ValueError):
        propagator(L, -1.0)
    with pytest.raises(ValueError):
        propagator_derivative(L, np.eye(4), 0.1, 0.0)
    with pytest.raises(ValueError):
        vectorize_liouvillian(Hilbert.Operator([[0, 1], [0, 0]]), LindbladSet([]))


def test_drift_coefficients(system, space):
    H = system.hamiltonians.H_drift.matrix
    g0s = system.params.g_co * system.params.s
    cav, osc = space.index(0, 1, 0), space.index(0, 0, 1)
    assert H[cav, osc].real == pytest.approx(-2 * math.pi * g0s)
    assert abs(H[cav, cav] - H[osc, osc]) < 1e-9
    assert system.hamiltonians.H_drift.is_hermitian()


def test_atom_x_control_norm(system):
    assert np.linalg.norm(system.hamiltonians.H_controls[1].matrix, 2) == pytest.approx(math.pi)


def test_single_steady_eigenvalue(system):
    eigs = np.linalg.eigvals(system.liouvillian(idle_controls()).matrix)
    small = np.abs(eigs) <= 1e-6
    assert small.sum() == 1
    assert np.all(eigs[~small].real < 0)


def test_trace_preserved(system):
    F = system.propagator([120.0, 10.0, -5.0], TAU).matrix
    eye = vec(np.eye(system.space.N))
    np.testing.assert_allclose(eye.conj() @ F, eye.conj(), atol=1e-9)


def test_completely_positive(system):
    F = system.propagator([0.0, 20.0, 3.0], TAU)
    choi = choi_matrix(F)
    assert la.eigvalsh(0.5 * (choi + choi.conj().T))[0] >= -1e-8


def test_hermiticity_preserved(system):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(18, 18)) + 1j * rng.normal(size=(18, 18))
    X = X + X.conj().T
    out = system.propagator([-400.0, 5.0, 5.0], TAU).apply(X)
    np.testing.assert_allclose(out, out.conj().T, atol=1e-10)


def test_semigroup(system):
    L = system.liouvillian([50.0, 8.0, 0.0])
    F1 = propagator(L, 0.002).matrix
    F2 = propagator(L, 0.003).matrix
    F12 = propagator(L, TAU).matrix
    assert np.abs(F1 @ F2 - F12).max() <= 1e-9


def test_finite_derivative_small_step():
    H = np.array([[1.0, 0.5], [0.5, -1.0]])
    Hs = hamiltonian_superop(H)
    tau = 0.1
    dF = propagator_derivative(np.zeros((4, 4)), Hs, tau, 1e-6).matrix
    np.testing.assert_allclose(dF, -1j * tau * Hs, atol=1e-6)


def test_finite_derivative_first_order_error(system):
    u = [0.0, 10.0, 0.0]
    Hj = system.control_supers[1]
    closed = system.closed().liouvillian(u)
    exact = propagator_derivative_spectral(closed, Hj, TAU).matrix
    errors = [np.linalg.norm(propagator_derivative(closed, Hj, TAU, d).matrix - exact)
              for d in (1e-2, 2e-2)]
    # one-sided differences: error doubles with the step
    assert errors[1] / errors[0] == pytest.approx(2.0, rel=0.05)


def test_finite_derivative_against_central_difference(system):
    u = np.array([-200.0, 12.0, -4.0])
    L = system.liouvillian(u)
    for j, Hj in enumerate(system.control_supers):
        dF = propagator_derivative(L, Hj, TAU, Liouville.derivative_step(u[j])).matrix
        h = 1e-4 * max(1.0, abs(u[j]))
        central = (la.expm(TAU * (L.matrix - 1j * h * Hj))
                   - la.expm(TAU * (L.matrix + 1j * h * Hj))) / (2 * h)
        assert np.linalg.norm(dF - central) <= 1e-5 * np.linalg.norm(central)


def test_spectral_matches_central_difference(system):
    closed = system.closed()
    u = np.array([300.0, -7.0, 9.0])
    L = closed.liouvillian(u)
    decomposition = Liouville.spectral_decomposition(L)
    for Hj in closed.control_supers:
        exact = propagator_derivative_spectral(L, Hj, TAU, decomposition).matrix
        h = 1e-4
        central = (la.expm(TAU * (L.matrix - 1j * h * Hj))
                   - la.expm(TAU * (L.matrix + 1j * h * Hj))) / (2 * h)
        assert np.linalg.norm(exact - central) <= 1e-6 * np.linalg.norm(central)


def test_spectral_commuting_case():
    H0 = np.diag([0.0, 1.0, 3.0])
    Hj = hamiltonian_superop(np.diag([1.0, 2.0, 2.0]))
    L = -1j * hamiltonian_superop(H0)
    tau = 0.7
    F = la.expm(tau * L)
    dF = propagator_derivative_spectral(L, Hj, tau).matrix
    np.testing.assert_allclose(dF, -1j * tau * Hj @ F, atol=1e-12)
    np.testing.assert_allclose(propagator_derivative_spectral(L, Hj, 0.0).matrix, 0.0,
                               atol=1e-15)


def test_spectral_rejects_dissipative(system):
    with pytest.raises(NormalityError):
        Liouville.spectral_decomposition(system.liouvillian(idle_controls()))


def test_derivative_self_test(system):
    report = Liouville.check_derivative_step(system, np.array([-1000.0, 10.0, 0.0]), TAU, j=1)
    assert report['passed']
    assert report['control'] == 'atomX'
    assert report['step'] == pytest.approx(1e-5)
    assert report['small'] and report['disagreement'] <= 1e-4


def test_propagator_cache(system):
    system.clear_cache()
    F = system.propagator([1.0, 2.0, 3.0], TAU)
    assert system.propagator(np.array([1.0, 2.0, 3.0]), TAU) is F
    for k in range(Liouville.CACHE_SIZE + 5):
        system.propagator([float(k), 0.0, 0.0], TAU)
    assert len(system._cache) == Liouville.CACHE_SIZE
    assert system.__getstate__()['_cache'] == {}
    assert not F.matrix.flags.writeable


def test_squeezing_drift_couples_pair_creation(set1, space):
    frame = Model.derive_frame(set1, interaction=Model.SQUEEZING)
    H = Liouville.build_hamiltonians(set1, frame, space).H_drift.matrix
    vacuum, pair = space.index(0, 0, 0), space.index(0, 1, 1)
    assert H[pair, vacuum].real == pytest.approx(-2 * math.pi * set1.g_co * set1.s)
    assert H[space.index(0, 1, 0), space.index(0, 0, 1)] == 0.0
