import datetime
import logging
import os
import timeit

import numpy as np

import hybridoc
from hybridoc import (Analysis, Dynamics, Hilbert, Model, Optimizer, PiPulse, acceptance, export,
                      units)
from hybridoc import config as run_config
from hybridoc.errors import AcceptanceError, ConfigError, MissingInputError
from hybridoc.Liouville import ControlSystem

logger = logging.getLogger(__name__)

COMMANDS = ('derive', 'steady', 'propagate', 'optimize', 'baseline', 'analyze')
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class RunManifest(object):
    """Inventory of one command's outputs with content hashes."""
    def __init__(self, command, config, config_hash):
        self.command = command
        self.config = config
        self.config_hash = config_hash
        self.started = datetime.datetime.now().isoformat(timespec='seconds')
        self.finished = None
        self.outputs = []

    def add(self, path):
        self.outputs.append(path)

    def to_dict(self, root):
        return {'command': self.command,
                'version': hybridoc.__version__,
                'config_sha256': self.config_hash,
                'params': self.config.params.name,
                'dims': self.config.dims,
                'seed': self.config.seed,
                'started': self.started,
                'finished': self.finished,
                'outputs': [{'path': os.path.relpath(p, root), 'sha256': export.sha256_file(p)}
                            for p in self.outputs]}


class MainApp(object):
    def __init__(self, args):
        self.command = args.command
        if self.command not in COMMANDS:
            raise ConfigError('unknown command %r' % self.command, 'command')
        self.check = args.check
        self.workers = max(1, args.workers)
        self.state_format = args.state_format
        self.verify = args.verify_dim
        self.sequence_path = args.sequence
        self.input_path = args.input
        self.out_root = args.out_dir
        self.output = os.path.join(args.out_dir, self.command)
        self.config = run_config.load_run_config(args.config, args.preset)
        run_config.apply_overrides(self.config, dims=args.dims, seed=args.seed,
                                   restarts=args.restarts, budget=args.budget,
                                   target=args.target)
        self._timer = timeit.default_timer()
        self._setup_output(args.force)
        self._setup_logging(args.verbose, args.quiet)
        self.manifest = RunManifest(self.command, self.config,
                                    export.sha256_json(self.config.to_dict()))
        self.report = {'command': self.command, 'config': self.config.to_dict()}
        self.misses = []
        self._system = None

    def _setup_output(self, force):
        # Create output directories
        if os.path.isdir(self.output):
            if os.listdir(self.output) and not force:
                raise ConfigError('output directory %s is not empty, use --force or an '
                                  'empty directory' % self.output, 'out_dir')
        else:
            os.makedirs(self.output)

    def _setup_logging(self, verbose, quiet):
        level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
        root = logging.getLogger()
        root.setLevel(logging.DEBUG)
        for handler in list(root.handlers):
            if getattr(handler, '_hybridoc', False):
                root.removeHandler(handler)
                handler.close()
        console = logging.StreamHandler()
        console.setLevel(level)
        console.setFormatter(logging.Formatter('%(levelname)s %(message)s'))
        self.log_path = os.path.join(self.output, 'run.log')
        logfile = logging.FileHandler(self.log_path, mode='w')
        logfile.setLevel(logging.DEBUG if verbose else logging.INFO)
        logfile.setFormatter(logging.Formatter(LOG_FORMAT))
        for handler in (console, logfile):
            handler._hybridoc = True
            root.addHandler(handler)
        self._logfile = logfile

    def run(self):
        logger.info('hybridoc %s: %s with %s, dims %d', hybridoc.__version__, self.command,
                    self.config.params.name, self.config.dims)
        getattr(self, 'cmd_' + self.command)()
        self.report['wall_time_s'] = timeit.default_timer() - self._timer
        if self.check:
            self.report['check'] = {'passed': not self.misses, 'misses': self.misses}
        self._write_json(self.report, 'summary.json')
        self._finish()
        if self.check and self.misses:
            for miss in self.misses:
                print('CHECK FAILED: ' + miss)
            raise AcceptanceError('%d acceptance check(s) missed' % len(self.misses))
        if self.check:
            print('All acceptance checks passed')
        return self.report

    def _finish(self):
        self.manifest.finished = datetime.datetime.now().isoformat(timespec='seconds')
        self._logfile.flush()
        self.manifest.add(self.log_path)
        export.write_json(self.manifest.to_dict(self.out_root),
                          os.path.join(self.output, 'manifest.json'))
        logging.getLogger().removeHandler(self._logfile)
        self._logfile.close()

    def _path(self, name):
        return os.path.join(self.output, name)

    def _write_json(self, data, name):
        path = export.write_json(data, self._path(name))
        self.manifest.add(path)
        return path

    def _add(self, path):
        self.manifest.add(path)
        return path

    def _state_name(self, stem):
        return stem + ('.json' if self.state_format == export.JSON else '.h5')

    @property
    def space(self):
        return Hilbert.Space(cavity_dim=self.config.dims, osc_dim=self.config.dims)

    @property
    def system(self):
        if self._system is None:
            frame = Model.derive_frame(self.config.params, self.config.interaction)
            self._system = ControlSystem(self.config.params, self.space, frame)
        return self._system

    def _steady_meta(self):
        """What the initial state depends on, stored next to it."""
        meta = {'params': self.config.params.name,
                'params_sha256': export.sha256_json(Model.params_to_dict(self.config.params)),
                'interaction': self.config.interaction}
        meta.update(self.config.steady.to_dict())
        return meta

    def _initial_state(self):
        """Steady state from the steady command when it matches, else solved here."""
        path = os.path.join(self.out_root, 'steady', self._state_name('steady_state'))
        if os.path.isfile(path):
            _, states, space = export.read_states(path, 'steady')
            if space == self.space and export.read_meta(path, 'steady') == self._steady_meta():
                logger.info('initial state read from %s', path)
                return states[0]
            logger.info('%s belongs to another problem or truncation, solving again', path)
        return self.config.steady.solve(self.system)

    def _cost_config(self, space):
        target = self.config.target
        if target in Optimizer.TARGETS:
            return Optimizer.named_target(target, space, self.config.penalty_weight,
                                          reduced=self.config.reduced_target)
        if not os.path.isfile(target):
            raise MissingInputError(target, 'propagate')
        _, states, target_space = export.read_states(target, 'propagate')
        if target_space != space:
            raise ConfigError('target state lives on %r, run uses %r' % (target_space, space),
                              'target')
        return Optimizer.CostConfig(target=states[-1], penalty_weight=self.config.penalty_weight,
                                    penalized_levels=Optimizer.top_levels(space),
                                    name=os.path.basename(target))

    def _write_trajectory(self, traj, stem):
        self._add(export.write_trajectory(traj, self._path(stem + '.csv')))
        self._add(export.write_states(traj, self._path(self._state_name(stem + '_states')),
                                      self.state_format))

    # commands

    def cmd_derive(self):
        params = self.config.params
        frame = Model.derive_frame(params, self.config.interaction)
        report = Model.frame_report(params, frame)
        self.report['derive'] = report
        print('Transformed frame for %s (%s)' % (params.name, frame.interaction))
        for key in ('re_r', 'im_r', 'E', 'eta', 'delta_prime', 'wc_prime', 'cavity_shift',
                    'wl', 'wr', 'g_s', 'g0_s', 'alpha_abs'):
            print('  %-16s %.6g' % (key, report['frame'][key]))
        print('Thermal: x = %.6g, n_bar = %.4g, gamma\' = %s' % (
            report['thermal']['x'], report['thermal']['n_bar'],
            units.format_frequency(report['thermal']['gamma_eff'])))
        print('Diagnostics')
        for key, value in report['diagnostics'].items():
            print('  %-36s %.4g' % (key, value))
        print('RWA significance')
        for key, value in report['rwa_significance'].items():
            print('  %-36s %.3g' % (key, value))
        for warning in report['regime_warnings']:
            logger.warning('regime condition fails: %s', warning)
        if self.check:
            self.misses.extend(acceptance.check_frame(params.name, report['frame'],
                                                      report['diagnostics'],
                                                      report['rwa_significance']))

    def _steady_rows(self, rho, space, label):
        rows = []
        for which in Hilbert.SUBSYSTEMS:
            for level, p in enumerate(Analysis.populations(rho, which, space)):
                rows.append({'frame': label, 'subsystem': which, 'level': level,
                             'population': p})
        return rows

    def cmd_steady(self):
        system = self.system
        settings = self.config.steady
        rho = settings.solve(system)
        rows = self._steady_rows(rho, system.space, settings.frame)
        if settings.frame == Dynamics.LASER:
            other = Dynamics.SteadySettings.for_frame(Dynamics.DRIFT, self.config.far_detuning)
        else:
            other = Dynamics.SteadySettings.for_frame(Dynamics.LASER)
        rows.extend(self._steady_rows(other.solve(system), system.space, other.frame))
        self._add(export.write_table(rows, self._path('populations.csv')))
        self._add(export.write_state(rho, system.space,
                                     self._path(self._state_name('steady_state')),
                                     self.state_format, meta=self._steady_meta()))
        pops = {}
        for which, prefix in ((Hilbert.CAVITY, 'cavity'), (Hilbert.OSC, 'osc')):
            for level, p in enumerate(Analysis.populations(rho, which, system.space)):
                pops['%s_p%d' % (prefix, level)] = float(p)
        sensitivity = {}
        for factor in (0.8, 1.2):
            alt = Dynamics.SteadySettings(settings.frame, settings.detuning * factor).solve(system)
            sensitivity['%g MHz' % (settings.detuning * factor)] = {
                'cavity_p1': float(Analysis.populations(alt, Hilbert.CAVITY, system.space)[1]),
                'osc_p1': float(Analysis.populations(alt, Hilbert.OSC, system.space)[1])}
        self.report['steady'] = {'populations': pops, 'settings': settings.to_dict(),
                                 'atom_excited': float(Analysis.populations(
                                     rho, Hilbert.ATOM, system.space)[1]),
                                 'purity': Analysis.purity(rho),
                                 'detuning_sensitivity': sensitivity}
        print('Steady state (%s frame, atom at %g MHz)' % (settings.frame, settings.detuning))
        print('  cavity      p0 = %.4f  p1 = %.4f' % (pops['cavity_p0'], pops['cavity_p1']))
        print('  oscillator  p0 = %.4f  p1 = %.4f' % (pops['osc_p0'], pops['osc_p1']))
        if self.check:
            self.misses.extend(acceptance.check_steady(self.config.params.name, pops))

    def _load_sequence(self):
        candidates = [self.sequence_path] if self.sequence_path else [
            os.path.join(self.out_root, 'optimize', 'sequence.csv'),
            os.path.join(self.out_root, 'baseline', 'sequence.csv')]
        for path in candidates:
            if os.path.isfile(path):
                logger.info('sequence read from %s', path)
                return export.read_sequence(path, self.config.bounds)
        raise MissingInputError(candidates[0], 'optimize')

    def cmd_propagate(self):
        seq = self._load_sequence()
        rho0 = self._initial_state()
        traj = Dynamics.propagate(rho0, seq, self.system)
        self._write_trajectory(traj, 'trajectory')
        cfg = self._cost_config(self.system.space)
        metrics = Analysis.summary(traj.final, self.system.space)
        metrics['fidelity'] = Optimizer.report_fidelity(traj.final, cfg, self.system.space)
        self.report['propagate'] = {'n_slots': seq.n_slots, 'tau_us': seq.tau,
                                    'final': metrics}
        if self.verify:
            problem = self._problem(rho0)
            self.report['propagate']['verify'] = Optimizer.verify_dim(seq, problem, self.verify)
        print('Final fidelity %.4f, mana %.4f, log-negativity %.4f'
              % (metrics['fidelity'], metrics['mana'], metrics['log_negativity']))

    def _problem(self, rho0):
        space = self.system.space
        return Optimizer.Problem(system=self.system, rho0=rho0, cfg=self._cost_config(space),
                                 n_slots=self.config.n_slots, tau=self.config.tau,
                                 bounds=self.config.bounds, steady=self.config.steady)

    def cmd_optimize(self):
        rho0 = self._initial_state()
        problem = self._problem(rho0)
        derivative_check = Optimizer.derivative_self_test(problem, self.config.schedule.derivative)
        best, results = Optimizer.multi_restart(problem, self.config.restarts, self.config.seed,
                                                self.config.schedule, self.workers)
        self._add(export.write_sequence(best.sequence, self._path('sequence.csv')))
        self._add(export.write_table([r.summary() for r in results],
                                     self._path('restarts.csv')))
        traj = Dynamics.propagate(rho0, best.sequence, self.system)
        self._write_trajectory(traj, 'trajectory')
        rho_osc = Analysis.partial_trace(traj.final, [Hilbert.OSC], self.system.space)
        self._add(export.write_wigner(Analysis.wigner(rho_osc), self._path('wigner.csv')))
        metrics = Analysis.summary(traj.final, self.system.space)
        metrics['fidelity'] = best.fidelity
        result = {'best': best.summary(), 'final': metrics,
                  'cost_history': best.cost_history, 'derivative_check': derivative_check,
                  'defaults': {'n_slots': self.config.n_slots, 'T_us': self.config.T,
                               'penalty_weight': self.config.penalty_weight,
                               'bounds_mhz': self.config.bounds.tolist(),
                               'line_search': 'strong Wolfe, c1 = 1e-4, c2 = 0.9, '
                                              'projected Armijo fallback'}}
        verify = None
        if self.verify:
            verify = Optimizer.verify_dim(best.sequence, problem, self.verify)
            result['verify'] = verify
            print('Fidelity at dim %d: %.4f (change %+.4f)'
                  % (self.verify, verify['verify_fidelity'], verify['delta']))
        self.report['optimize'] = result
        print('Best of %d restarts: fidelity %.4f, mana %.4f, log-negativity %.4f'
              % (len(results), best.fidelity, metrics['mana'], metrics['log_negativity']))
        if self.check:
            baseline = self._baseline_fidelity()
            self.misses.extend(acceptance.check_optimize(
                self.config.params.name, self.config.target, self.config.restarts,
                metrics, baseline, verify))

    def _baseline_fidelity(self):
        path = os.path.join(self.out_root, 'baseline', 'summary.json')
        if not os.path.isfile(path):
            logger.warning('no baseline result in %s, skipping the baseline comparison', path)
            return None
        return export.read_json(path, 'baseline')['baseline']['metrics']['fidelity']

    def cmd_baseline(self):
        system = self.system
        rho0 = self._initial_state()
        plan0 = PiPulse.nominal_plan(self.config.params, system.frame, self.config.pi_amp,
                                     self.config.pi_hop_detuning)
        tuned = PiPulse.tune_pi_sequence(plan0, system, rho0, self.config.baseline_tau,
                                         bounds=self.config.bounds)
        traj, metrics = PiPulse.evaluate_baseline(tuned.sequence, system, rho0)
        self._add(export.write_sequence(tuned.sequence, self._path('sequence.csv')))
        self._write_trajectory(traj, 'trajectory')
        self.report['baseline'] = {'tuning': tuned.summary(), 'metrics': metrics}
        print('Pi-pulse durations %s ns: fidelity %.4f, mana %.4f, cavity peak %.3f'
              % (', '.join('%.1f' % (1e3 * t) for t in tuned.plan.durations),
                 metrics['fidelity'], metrics['mana'], metrics['cavity_peak']))
        if self.check:
            self.misses.extend(acceptance.check_baseline(self.config.params.name, metrics))

    def _load_states(self):
        if self.input_path:
            return export.read_states(self.input_path, 'propagate')
        for producer in ('optimize', 'propagate', 'baseline'):
            path = os.path.join(self.out_root, producer, self._state_name('trajectory_states'))
            if os.path.isfile(path):
                logger.info('states read from %s', path)
                return export.read_states(path, producer)
        raise MissingInputError(os.path.join(self.out_root, 'propagate',
                                             self._state_name('trajectory_states')),
                                'propagate')

    def cmd_analyze(self):
        times, states, space = self._load_states()
        traj = Dynamics.Trajectory(times, states, space)
        final = traj.final
        metrics = Analysis.summary(final, space)
        try:
            cfg = self._cost_config(space)
            metrics['fidelity'] = Optimizer.report_fidelity(final, cfg, space)
        except (ConfigError, MissingInputError) as err:
            logger.warning('no fidelity reported: %s', err)
        rho_osc = Analysis.partial_trace(final, [Hilbert.OSC], space)
        self._add(export.write_wigner(Analysis.wigner(rho_osc), self._path('wigner.csv')))
        series = {'time': traj.times,
                  'log_negativity': Analysis.log_negativity_series(traj),
                  'mana_raw': Analysis.mana_series(traj)}
        self._add(export.write_table(series, self._path('series.csv')))
        self.report['analyze'] = {'final': metrics, 'n_times': len(traj),
                                  'max_log_negativity': float(np.max(series['log_negativity']))}
        print('Final state: fidelity %s, mana %.4f (raw %.2e), log-negativity %.4f'
              % ('%.4f' % metrics['fidelity'] if 'fidelity' in metrics else 'n/a',
                 metrics['mana'], metrics['mana_raw'], metrics['log_negativity']))
