import numpy as np
import pandas as pd
import pytest

from hybridoc import Dynamics, export
from hybridoc.Dynamics import ControlSequence
from hybridoc.errors import ConfigError, MissingInputError

TAU = 0.005


@pytest.fixture(scope='module')
def trajectory(system, steady):
    seq = ControlSequence.constant(3, TAU, (0.0, 20.0, 0.0))
    return Dynamics.propagate(steady, seq, system)


def test_sequence_round_trip(tmpdir, set1):
    rng = np.random.default_rng(0)
    bounds = Dynamics.default_bounds(set1)
    seq = ControlSequence(rng.uniform(-30, 30, size=(7, 3)), 0.0025, bounds)
    path = str(tmpdir.join('sequence.csv'))
    export.write_sequence(seq, path)
    back = export.read_sequence(path, bounds)
    assert back.tau == seq.tau
    np.testing.assert_array_equal(back.u, seq.u)
    np.testing.assert_array_equal(back.bounds, bounds)
    with open(path) as handle:
        assert handle.readline().startswith('# tau_us=')
        assert handle.readline().strip() == ','.join(export.SEQUENCE_COLUMNS)


def test_missing_sequence_names_producer(tmpdir):
    path = str(tmpdir.join('best_sequence.csv'))
    with pytest.raises(MissingInputError) as err:
        export.read_sequence(path, producer='optimize')
    assert err.value.producer == 'optimize'
    assert 'hybridoc optimize' in str(err.value)


def test_sequence_without_header(tmpdir):
    path = str(tmpdir.join('sequence.csv'))
    pd.DataFrame({'slot': [0], 'u_detuning': [0.0], 'u_atomX': [0.0],
                  'u_atomY': [0.0]}).to_csv(path, index=False)
    with pytest.raises(ConfigError):
        export.read_sequence(path)


def test_sequence_missing_column(tmpdir):
    path = str(tmpdir.join('sequence.csv'))
    with open(path, 'w') as handle:
        handle.write('# tau_us=0.005\nslot,u_detuning,u_atomX\n0,1.0,2.0\n')
    with pytest.raises(ConfigError) as err:
        export.read_sequence(path)
    assert err.value.field == 'u_atomY'


@pytest.mark.parametrize('fmt, name', [(export.HDF5, 'states.h5'),
                                       (export.JSON, 'states.json')])
def test_states_read_back(tmpdir, trajectory, fmt, name):
    path = str(tmpdir.join(name))
    export.write_states(trajectory, path, fmt, tau=TAU)
    times, states, space = export.read_states(path)
    assert space.dims == trajectory.space.dims
    np.testing.assert_allclose(times, trajectory.times)
    np.testing.assert_allclose(states, trajectory.states, atol=1e-15)


def test_unknown_state_format(tmpdir, trajectory):
    with pytest.raises(ConfigError):
        export.write_states(trajectory, str(tmpdir.join('states.npy')), 'npy')


def test_single_state(tmpdir, steady, space):
    path = str(tmpdir.join('steady_state.h5'))
    export.write_state(steady, space, path)
    times, states, _ = export.read_states(path)
    assert states.shape == (1, space.N, space.N)
    np.testing.assert_array_equal(states[0], steady)
    assert export.read_meta(path) == {}


@pytest.mark.parametrize('fmt, name', [(export.HDF5, 'steady_state.h5'),
                                       (export.JSON, 'steady_state.json')])
def test_state_metadata(tmpdir, steady, space, fmt, name):
    path = str(tmpdir.join(name))
    meta = {'params': 'set1', 'frame': 'laser', 'detuning_mhz': -1.0e5}
    export.write_state(steady, space, path, fmt, meta=meta)
    assert export.read_meta(path, 'steady') == meta
    with pytest.raises(MissingInputError):
        export.read_meta(str(tmpdir.join('absent.h5')), 'steady')


def test_trajectory_columns(trajectory):
    frame = export.trajectory_frame(trajectory)
    assert list(frame.columns) == ['time', 'cavity_p0', 'cavity_p1', 'cavity_p2', 'osc_p0',
                                   'osc_p1', 'osc_p2', 'atom_p1', 'purity']
    assert len(frame) == 4
    np.testing.assert_allclose(frame[['osc_p0', 'osc_p1', 'osc_p2']].sum(axis=1), 1.0)


def test_malformed_json(tmpdir):
    path = tmpdir.join('summary.json')
    path.write('{\n  "fidelity": 0.5,\n  "mana":\n}\n')
    with pytest.raises(ConfigError) as err:
        export.read_json(str(path), 'optimize')
    assert err.value.line == 4
    with pytest.raises(MissingInputError):
        export.read_json(str(tmpdir.join('absent.json')), 'baseline')


def test_json_hash_is_canonical():
    a = {'fidelity': np.float64(0.25), 'slots': np.arange(3), 'name': 'fock1'}
    b = {'name': 'fock1', 'slots': [0, 1, 2], 'fidelity': 0.25}
    assert export.sha256_json(a) == export.sha256_json(b)
    assert export.sha256_json(a) != export.sha256_json(dict(b, fidelity=0.5))


def test_file_hash(tmpdir, trajectory):
    first = str(tmpdir.join('a.csv'))
    second = str(tmpdir.join('b.csv'))
    export.write_trajectory(trajectory, first)
    export.write_trajectory(trajectory, second)
    assert export.sha256_file(first) == export.sha256_file(second)
