import argparse
import logging
import sys

from hybridoc.errors import HybridocError
from hybridoc.export import HDF5, JSON
from hybridoc.MainApp import COMMANDS, MainApp
from hybridoc.Model import PRESETS


def parse_arguments(argv=None):
    parser = argparse.ArgumentParser(prog='hybridoc',
                                     description='Prepare non-classical states of a mechanical '
                                                 'oscillator through a cavity and an atom')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--preset', choices=sorted(PRESETS), default=None,
                        help='Parameter set, used when no --config is given (default set1)')
    parser.add_argument('--config', default=None,
                        help='JSON parameter or problem file')
    parser.add_argument('--dims', type=int, default=None,
                        help='Fock levels kept for the cavity and the oscillator')
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--restarts', type=int, default=None)
    parser.add_argument('--budget', type=float, default=None,
                        help='Wall-clock seconds for the dissipative stage of each restart')
    parser.add_argument('--verify-dim', type=int, default=None,
                        help='Rerun the result at this truncation and report the change')
    parser.add_argument('--target', default=None,
                        help='fock1, noon11 or a state file')
    parser.add_argument('--sequence', default=None, help='Control sequence CSV to propagate')
    parser.add_argument('--input', default=None, help='State file to analyze')
    parser.add_argument('--out-dir', default='hybridoc_out')
    parser.add_argument('--workers', type=int, default=1)
    parser.add_argument('--state-format', choices=[HDF5, JSON], default=HDF5)
    parser.add_argument('--check', action='store_true',
                        help='Compare the results with the reference values')
    parser.add_argument('--force', action='store_true',
                        help='Write into a non-empty output directory')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true')
    verbosity.add_argument('--quiet', action='store_true')
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_arguments(argv)
    try:
        MainApp(args).run()
    except HybridocError as err:
        logging.getLogger('hybridoc').error('%s', err)
        print('Error: %s' % err, file=sys.stderr)
        return err.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
