import numpy as np
import pytest

from hybridoc import Analysis, Dynamics, Hilbert, Model
from hybridoc.Dynamics import ControlSequence
from hybridoc.errors import (AmbiguousSteadyStateError, ConfigError, DimensionError,
                             PositivityError)
from hybridoc.Liouville import ControlSystem, vec

TAU = 0.005


def test_sequence_geometry(set1):
    bounds = Dynamics.default_bounds(set1)
    np.testing.assert_allclose(bounds, [[-1000.0, 3500.0], [-32.0, 32.0], [-32.0, 32.0]])
    seq = ControlSequence.idle(200, TAU, bounds=bounds)
    assert seq.n_slots == 200
    assert seq.total_time == pytest.approx(1.0)
    assert seq.times()[-1] == pytest.approx(1.0)
    assert seq.within_bounds()
    wild = seq.with_controls(np.tile([4000.0, 50.0, -50.0], (200, 1)))
    assert not wild.within_bounds()


def test_sequence_rejects_bad_input():
    with pytest.raises(DimensionError):
        ControlSequence(np.zeros((4, 2)), TAU)
    with pytest.raises(ValueError):
        ControlSequence(np.zeros((4, 3)), 0.0)
    empty = ControlSequence([], TAU)
    assert empty.n_slots == 0
    assert empty.total_time == 0.0


def test_steady_state_is_fixed_point(system, drift_steady):
    traj = Dynamics.propagate(drift_steady, ControlSequence.idle(40, TAU), system)
    assert len(traj) == 41
    for which in Hilbert.SUBSYSTEMS:
        pops = traj.populations(which)
        assert np.abs(pops - pops[0]).max() <= 1e-6
    assert Analysis.trace_distance(traj.final, drift_steady) <= 1e-7


@pytest.mark.parametrize('frame', [Dynamics.LASER, Dynamics.DRIFT])
def test_steady_state_is_density(system, frame):
    rho = Dynamics.steady_state(system, frame=frame)
    Dynamics.check_density(rho)
    L = Dynamics.steady_generator(system, frame=frame)
    assert np.linalg.norm(L @ vec(rho)) <= 1e-9 * np.linalg.norm(L, 2)


def test_steady_populations(system, steady):
    pops = Dynamics.steady_populations(steady, system.space)
    np.testing.assert_allclose(pops[Hilbert.CAVITY][:2], [0.9922, 0.0078], atol=0.002)
    np.testing.assert_allclose(pops[Hilbert.OSC][:2], [0.9912, 0.0087], atol=0.002)
    assert pops[Hilbert.ATOM][1] < 1e-3


def test_steady_populations_at_dim_4(system):
    rho = Dynamics.SteadySettings().solve(system.resized(4))
    pops = Dynamics.steady_populations(rho, system.space.resized(4))
    assert pops[Hilbert.CAVITY][1] == pytest.approx(0.0078, abs=0.002)
    assert pops[Hilbert.OSC][1] == pytest.approx(0.0087, abs=0.002)


def test_drift_frame_steady_state(system, drift_steady):
    # no g*s atom drive in this generator
    pops = Dynamics.steady_populations(drift_steady, system.space)
    assert 0.0044 <= pops[Hilbert.CAVITY][1] <= 0.0053
    assert 0.0052 <= pops[Hilbert.OSC][1] <= 0.0062


def test_steady_settings(system, steady):
    settings = Dynamics.SteadySettings()
    assert settings.to_dict() == {'frame': 'laser', 'detuning_mhz': Dynamics.STEADY_DETUNING}
    np.testing.assert_allclose(settings.solve(system), steady, atol=1e-12)
    drift = Dynamics.SteadySettings.for_frame(Dynamics.DRIFT)
    assert drift.detuning == Dynamics.FAR_DETUNING
    with pytest.raises(ConfigError) as err:
        Dynamics.SteadySettings('lab')
    assert err.value.field == 'steady_frame'


def test_steady_state_without_optomechanics(space):
    params = Model.SET1.with_changes(g_co=1e-12)
    rho = Dynamics.steady_state(ControlSystem(params, space), frame=Dynamics.DRIFT)
    assert Analysis.populations(rho, Hilbert.CAVITY, space)[0] > 1 - 1e-6


def test_closed_system_steady_state_is_ambiguous(system):
    with pytest.raises(AmbiguousSteadyStateError):
        Dynamics.steady_state(system.closed(), frame=Dynamics.DRIFT)


def test_unknown_steady_frame(system):
    with pytest.raises(ValueError):
        Dynamics.steady_state(system, frame='lab')


def test_long_time_propagation_reaches_steady_state(system, drift_steady, space):
    rho0 = Hilbert.ket_to_dm(Hilbert.fock_state(space, 1, 1, 0))
    seq = ControlSequence.idle(50, 50.0 / system.params.kappa / 50)
    rho = Dynamics.final_state(rho0, seq, system)
    assert Analysis.trace_distance(rho, drift_steady) <= 1e-5


def test_closed_system_conserves_purity(system, space):
    closed = system.closed()
    rng = np.random.default_rng(11)
    u = rng.uniform([-1000.0, -32.0, -32.0], [3500.0, 32.0, 32.0], size=(10, 3))
    psi = (Hilbert.fock_state(space, 1, 0, 0) + Hilbert.fock_state(space, 0, 1, 1)) / np.sqrt(2)
    traj = Dynamics.propagate(Hilbert.ket_to_dm(psi), ControlSequence(u, TAU), closed)
    np.testing.assert_allclose(traj.purity(), 1.0, atol=1e-9)


def test_substeps(system, steady):
    seq = ControlSequence.constant(3, TAU, (0.0, 20.0, 0.0))
    coarse = Dynamics.propagate(steady, seq, system)
    fine = Dynamics.propagate(steady, seq, system, substeps=4)
    assert len(fine) == 13
    np.testing.assert_allclose(fine.times[4::4], coarse.times[1:], atol=1e-15)
    np.testing.assert_allclose(fine.final, coarse.final, atol=1e-10)
    with pytest.raises(ValueError):
        Dynamics.propagate(steady, seq, system, substeps=0)


def test_propagate_rejects_wrong_dimension(system):
    with pytest.raises(DimensionError):
        Dynamics.propagate(np.eye(8) / 8, ControlSequence.idle(2, TAU), system)


def test_trajectory_superop_matches_propagation(system, steady):
    rng = np.random.default_rng(5)
    seq = ControlSequence(rng.uniform(-20, 20, size=(4, 3)), TAU)
    total = Dynamics.trajectory_superop(seq, system)
    np.testing.assert_allclose(total.apply(steady), Dynamics.final_state(steady, seq, system),
                               atol=1e-12)


def test_check_density_rejects():
    with pytest.raises(PositivityError):
        Dynamics.check_density(np.diag([1.5, -0.5]).astype(complex))
    with pytest.raises(PositivityError):
        Dynamics.check_density(np.diag([0.5, 0.4]).astype(complex))


def test_embed_state_keeps_populations(space, steady):
    big = space.resized(4)
    rho = Dynamics.embed_state(steady, space, big)
    assert rho.shape == (32, 32)
    for which in Hilbert.SUBSYSTEMS:
        small_pops = Analysis.populations(steady, which, space)
        big_pops = Analysis.populations(rho, which, big)
        np.testing.assert_allclose(big_pops[:len(small_pops)], small_pops, atol=1e-14)
    psi = Hilbert.fock_state(space, 1, 2, 1) + Hilbert.fock_state(space, 0, 0, 2)
    moved = Dynamics.embed_state(Hilbert.ket_to_dm(psi / np.sqrt(2)), space, big)
    i, j = big.index(1, 2, 1), big.index(0, 0, 2)
    assert moved[i, j] == pytest.approx(0.5)
    assert np.abs(moved).sum() == pytest.approx(2.0)
    with pytest.raises(DimensionError):
        Dynamics.embed_state(rho, big, space)


def test_trajectory_observables(system, space):
    rho0 = Hilbert.ket_to_dm(Hilbert.fock_state(space, 0, 0, 0))
    traj = Dynamics.propagate(rho0, ControlSequence.constant(5, TAU, (0.0, 32.0, 0.0)), system)
    excited = traj.atom_excited()
    assert excited[0] == 0.0
    assert excited[-1] > excited[1] > 0.0
    assert traj.reduced([Hilbert.OSC]).shape == (6, 3, 3)
    assert traj.purity()[0] == pytest.approx(1.0)
