"""CSV and HDF5 writers and readers for sequences, trajectories and grids."""
import hashlib
import json
import logging
import os

import h5py
import numpy as np
import pandas as pd

from hybridoc import Hilbert
from hybridoc.Dynamics import ControlSequence, Trajectory
from hybridoc.errors import ConfigError, MissingInputError

logger = logging.getLogger(__name__)

SEQUENCE_COLUMNS = ['slot', 'u_detuning', 'u_atomX', 'u_atomY']
HDF5 = 'hdf5'
JSON = 'json'


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def sha256_json(data):
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'), default=_jsonable)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError('%r is not JSON serialisable' % (value,))


def write_json(data, path):
    with open(path, 'w') as handle:
        json.dump(data, handle, indent=2, default=_jsonable)
        handle.write('\n')
    return path


def read_json(path, producer):
    if not os.path.isfile(path):
        raise MissingInputError(path, producer)
    with open(path) as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as err:
            raise ConfigError('malformed JSON in %s: %s' % (path, err.msg), line=err.lineno)


def sequence_frame(seq):
    frame = pd.DataFrame(seq.u, columns=SEQUENCE_COLUMNS[1:])
    frame.insert(0, 'slot', np.arange(seq.n_slots))
    return frame


def write_sequence(seq, path):
    """slot, u_detuning, u_atomX, u_atomY in MHz; tau goes in the header comment."""
    with open(path, 'w') as handle:
        handle.write('# tau_us=%r\n' % seq.tau)
        sequence_frame(seq).to_csv(handle, index=False, float_format='%.17g')
    return path


def read_sequence(path, bounds=None, producer='optimize'):
    if not os.path.isfile(path):
        raise MissingInputError(path, producer)
    with open(path) as handle:
        header = handle.readline().strip()
        if not header.startswith('# tau_us='):
            raise ConfigError('sequence file %s lacks the tau header' % path, 'tau_us', 1)
        try:
            tau = float(header.split('=', 1)[1])
        except ValueError:
            raise ConfigError('bad tau header in %s' % path, 'tau_us', 1)
        frame = pd.read_csv(handle, float_precision='round_trip')
    missing = [c for c in SEQUENCE_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError('sequence file %s lacks column' % path, missing[0])
    frame = frame.sort_values('slot')
    return ControlSequence(frame[SEQUENCE_COLUMNS[1:]].to_numpy(dtype=float), tau, bounds)


def trajectory_frame(trajectory):
    space = trajectory.space
    frame = pd.DataFrame({'time': trajectory.times})
    for which, prefix in ((Hilbert.CAVITY, 'cavity'), (Hilbert.OSC, 'osc')):
        pops = trajectory.populations(which)
        for level in range(pops.shape[1]):
            frame['%s_p%d' % (prefix, level)] = pops[:, level]
    frame['atom_p1'] = trajectory.atom_excited()
    frame['purity'] = trajectory.purity()
    logger.debug('trajectory table: %d rows on %r', len(frame), space)
    return frame


def write_trajectory(trajectory, path):
    trajectory_frame(trajectory).to_csv(path, index=False, float_format='%.12g')
    return path


def write_wigner(grid, path):
    grid.to_frame().to_csv(path, index=False, float_format='%.12g')
    return path


def write_table(rows, path):
    pd.DataFrame(rows).to_csv(path, index=False, float_format='%.12g')
    return path


def write_states(trajectory, path, fmt=HDF5, tau=None, meta=None):
    """Full density operators with their shape metadata.

    `meta` is a JSON-serialisable dict describing how the states were made.
    """
    dims = list(trajectory.space.dims)
    if fmt == HDF5:
        with h5py.File(path, 'w') as handle:
            dset = handle.create_dataset('states', data=trajectory.states,
                                        compression='gzip', track_times=False)
            dset.attrs['dims'] = dims
            dset.attrs['ordering'] = ','.join(Hilbert.SUBSYSTEMS)
            if tau is not None:
                dset.attrs['tau_us'] = tau
            if meta is not None:
                dset.attrs['meta'] = json.dumps(meta, sort_keys=True, default=_jsonable)
            handle.create_dataset('times', data=trajectory.times, track_times=False)
    elif fmt == JSON:
        data = {'dims': dims, 'ordering': list(Hilbert.SUBSYSTEMS), 'tau_us': tau,
                'times': trajectory.times.tolist(),
                'real': trajectory.states.real.tolist(),
                'imag': trajectory.states.imag.tolist(), 'meta': meta}
        write_json(data, path)
    else:
        raise ConfigError('unknown state format %r' % (fmt,), 'state_format')
    return path


def read_states(path, producer='propagate'):
    """Returns (times, states, Space)."""
    if not os.path.isfile(path):
        raise MissingInputError(path, producer)
    if path.endswith('.json'):
        data = read_json(path, producer)
        states = np.array(data['real']) + 1j * np.array(data['imag'])
        times = np.array(data['times'], dtype=float)
        dims = data['dims']
    else:
        with h5py.File(path, 'r') as handle:
            states = handle['states'][()]
            dims = list(handle['states'].attrs['dims'])
            times = handle['times'][()]
    space = Hilbert.Space(cavity_dim=int(dims[1]), osc_dim=int(dims[2]), atom_dim=int(dims[0]))
    return times, states, space


def write_state(rho, space, path, fmt=HDF5, meta=None):
    """A single density operator, stored as a one-entry trajectory."""
    return write_states(Trajectory([0.0], [rho], space), path, fmt, meta=meta)


def read_meta(path, producer='propagate'):
    """The `meta` dict stored with a state file, empty when there is none."""
    if not os.path.isfile(path):
        raise MissingInputError(path, producer)
    if path.endswith('.json'):
        return read_json(path, producer).get('meta') or {}
    with h5py.File(path, 'r') as handle:
        raw = handle['states'].attrs.get('meta')
    if raw is None:
        return {}
    if isinstance(raw, bytes):
        raw = raw.decode('utf-8')
    return json.loads(raw)
