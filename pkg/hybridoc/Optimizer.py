"""Cost functional, gradient and the BFGS search over control sequences.

The cost of a sequence is

    1/2 |sigma|_F^2 - Re tr(sigma_T^dag sigma) + lambda * int tr(P rho(t)) dt

with sigma the (optionally reduced) final state, sigma_T the target and P the
projector onto the highest retained Fock level of the cavity and oscillator.
The time integral is the trapezoid rule over the slot boundaries.
"""
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from hybridoc import Analysis, Hilbert
from hybridoc.Dynamics import (ControlSequence, SteadySettings, embed_state, final_state,
                               propagate)
from hybridoc.errors import ConfigError, DimensionError
from hybridoc.Liouville import (CONTROL_NAMES, check_derivative_step, derivative_step,
                                propagator_derivative, propagator_derivative_spectral,
                                spectral_decomposition, unvec, vec)

logger = logging.getLogger(__name__)

PENALTY_WEIGHT = 10.0
INIT_FRACTION = 0.1
FINITE = 'finite'
SPECTRAL = 'spectral'
AUTO = 'auto'
DERIVATIVE_MODES = (AUTO, SPECTRAL, FINITE)

FOCK1 = 'fock1'
NOON11 = 'noon11'
TARGETS = (FOCK1, NOON11)

CONVERGED = 'gradient norm below tolerance'
MAX_ITER = 'iteration limit'
TIME_LIMIT = 'time budget'
LINE_SEARCH_FAILED = 'line search failed'


@dataclass
class CostConfig:
    """What the final state is compared to and which levels are penalised."""
    target: np.ndarray
    penalty_weight: float = PENALTY_WEIGHT
    penalized_levels: tuple = ()
    reduce_to: tuple = None
    name: str = 'custom'
    report_keep: tuple = None

    def __post_init__(self):
        if self.penalty_weight < 0:
            raise ConfigError('penalty weight must be nonnegative', 'penalty_weight')
        target = np.asarray(self.target, dtype=complex)
        if target.ndim == 1:
            target = Hilbert.ket_to_dm(target)
        self.target = target
        self.reduce_to = tuple(self.reduce_to) if self.reduce_to else None

    def projector(self, space):
        P = np.zeros((space.N, space.N), dtype=complex)
        for which, level in self.penalized_levels:
            d = space.dim_of(which)
            if level != d - 1:
                logger.debug('penalising %s level %d below the top level %d', which, level, d - 1)
            P += Hilbert.embed(Hilbert.fock_dm(d, level), which, space).matrix
        return P

    def for_space(self, space):
        """Same target on another truncation.

        Named targets are rebuilt; a full-space target read from a file is
        padded with zeros, which needs equal cavity and oscillator cut-offs.
        """
        if self.name in TARGETS:
            return named_target(self.name, space, self.penalty_weight,
                                reduced=self.reduce_to is not None)
        if self.reduce_to is not None:
            raise ConfigError('a reduced file target cannot be moved to another truncation',
                              'target')
        dim = int(round(np.sqrt(self.target.shape[0] / 2.0)))
        source = space.resized(dim)
        if source.N != self.target.shape[0]:
            raise ConfigError('target of size %d is not on a square truncation'
                              % self.target.shape[0], 'target')
        return CostConfig(target=embed_state(self.target, source, space),
                          penalty_weight=self.penalty_weight,
                          penalized_levels=top_levels(space), name=self.name)


def top_levels(space):
    return ((Hilbert.CAVITY, space.cavity_dim - 1), (Hilbert.OSC, space.osc_dim - 1))


def named_target(name, space, penalty_weight=PENALTY_WEIGHT, reduced=False):
    """fock1: oscillator |1>; noon11: (|01> + |10>)/sqrt(2) on cavity x oscillator.

    By default the target lives on the full space with the atom in |g> and
    the cavity empty for fock1; reduced=True compares partial traces instead.
    """
    if name == FOCK1:
        report = (Hilbert.OSC,)
        if reduced:
            target = Analysis.fock_ket(space.osc_dim, 1)
        else:
            target = Hilbert.fock_state(space, 0, 0, 1)
    elif name == NOON11:
        report = (Hilbert.CAVITY, Hilbert.OSC)
        noon = Analysis.noon11_ket(space.cavity_dim, space.osc_dim)
        if reduced:
            target = noon
        else:
            target = np.kron(Analysis.fock_ket(space.atom_dim, 0), noon)
    else:
        raise ConfigError('unknown target %r, choose from %s' % (name, ', '.join(TARGETS)),
                          'target')
    return CostConfig(target=target, penalty_weight=penalty_weight,
                      penalized_levels=top_levels(space),
                      reduce_to=report if reduced else None, name=name, report_keep=report)


def report_target(cfg, space):
    """Pure target on the reported subsystems, for fidelities and summaries."""
    keep = cfg.report_keep
    if keep is None:
        return cfg.target, None
    reduced = named_target(cfg.name, space, reduced=True)
    return reduced.target, keep


def report_fidelity(rho, cfg, space):
    target, keep = report_target(cfg, space)
    if keep is None:
        return Analysis.fidelity(rho, target)
    return Analysis.reduced_fidelity(rho, target, keep, space)


def trapezoid_weights(n_slots, tau):
    w = np.full(n_slots + 1, tau)
    if n_slots == 0:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * tau
    return w


class Objective(object):
    """Cost and gradient of one problem, memoising the last forward pass."""
    def __init__(self, system, rho0, cfg, tau, scale=None, derivative=AUTO, workers=1):
        if derivative not in DERIVATIVE_MODES:
            raise ConfigError('derivative mode must be one of %s' % ', '.join(DERIVATIVE_MODES),
                              'derivative')
        self.system = system
        self.space = system.space
        self.rho0 = np.asarray(rho0, dtype=complex)
        if self.rho0.shape != (self.space.N, self.space.N):
            raise DimensionError('initial state does not live on %r' % self.space)
        self.cfg = cfg
        self.tau = float(tau)
        self.scale = np.ones(len(CONTROL_NAMES)) if scale is None else np.asarray(scale, float)
        self.derivative = derivative
        self.workers = max(1, int(workers))
        self.projector = cfg.projector(self.space)
        self.projector_vec = vec(self.projector)
        d_target = cfg.target.shape[0]
        d_expected = self._reduced_dim()
        if d_target != d_expected:
            raise DimensionError('target of size %d, compared space has size %d'
                                 % (d_target, d_expected))
        self.n_evaluations = 0
        self._last = None

    def _reduced_dim(self):
        if self.cfg.reduce_to is None:
            return self.space.N
        return int(np.prod([self.space.dim_of(w) for w in self.cfg.reduce_to]))

    def _compare(self, rho):
        if self.cfg.reduce_to is None:
            return rho
        return Analysis.partial_trace(rho, self.cfg.reduce_to, self.space)

    def controls(self, x):
        return np.asarray(x, dtype=float).reshape(-1, len(CONTROL_NAMES)) * self.scale

    def _forward(self, u):
        key = u.tobytes()
        if self._last is not None and self._last[0] == key:
            return self._last[1]
        self.n_evaluations += 1
        N = self.space.N
        n = u.shape[0]
        props = [self.system.propagator(u[k], self.tau).matrix for k in range(n)]
        states = [vec(self.rho0)]
        for F in props:
            states.append(F @ states[-1])
        sigma = self._compare(unvec(states[-1], N))
        target = self.cfg.target
        distance = 0.5 * np.real(np.vdot(sigma, sigma)) - np.real(np.vdot(target, sigma))
        weights = trapezoid_weights(n, self.tau)
        leak = np.array([np.real(np.vdot(self.projector_vec, v)) for v in states])
        leakage = float(np.dot(weights, leak))
        penalty = self.cfg.penalty_weight * leakage
        result = {'u': u, 'props': props, 'states': states, 'sigma': sigma,
                  'weights': weights, 'leak': leak,
                  'breakdown': {'distance': float(distance), 'penalty': float(penalty),
                                'leakage_integral': leakage, 'max_leakage': float(leak.max()),
                                'total': float(distance + penalty)}}
        self._last = (key, result)
        return result

    def cost_u(self, u):
        fw = self._forward(np.asarray(u, dtype=float))
        return fw['breakdown']['total'], dict(fw['breakdown'])

    def value(self, x):
        return self.cost_u(self.controls(x))[0]

    def gradient_u(self, u):
        u = np.asarray(u, dtype=float)
        n = u.shape[0]
        if n == 0:
            return np.zeros((0, len(CONTROL_NAMES)))
        fw = self._forward(u)
        diff = fw['sigma'] - self.cfg.target
        if self.cfg.reduce_to is not None:
            diff = Analysis.expand_reduced(diff, self.cfg.reduce_to, self.space)
        lam_weight = self.cfg.penalty_weight
        costates = [None] * (n + 1)
        mu = vec(diff) + lam_weight * fw['weights'][n] * self.projector_vec
        costates[n] = mu
        for k in range(n - 1, -1, -1):
            mu = fw['props'][k].conj().T @ mu + lam_weight * fw['weights'][k] * self.projector_vec
            costates[k] = mu
        mode = self._mode()

        def slot(k):
            # slot k + 1 maps state k to state k + 1
            return self._slot_gradient(u[k], fw['props'][k], fw['states'][k],
                                       costates[k + 1], mode)

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(slot, range(n)))
        else:
            rows = [slot(k) for k in range(n)]
        return np.array(rows)

    def _mode(self):
        if self.derivative == AUTO:
            return FINITE if self.system.dissipative else SPECTRAL
        return self.derivative

    def _slot_gradient(self, u_k, F, v_prev, costate, mode):
        L = self.system.liouvillian(u_k)
        row = np.empty(len(CONTROL_NAMES))
        if mode == SPECTRAL:
            lam, Z = spectral_decomposition(L)
            for j, Hj in enumerate(self.system.control_supers):
                dF = propagator_derivative_spectral(L, Hj, self.tau, (lam, Z)).matrix
                row[j] = np.real(np.vdot(costate, dF @ v_prev))
        else:
            for j, Hj in enumerate(self.system.control_supers):
                dF = propagator_derivative(L, Hj, self.tau, derivative_step(u_k[j]), F).matrix
                row[j] = np.real(np.vdot(costate, dF @ v_prev))
        return row

    def gradient(self, x):
        return (self.gradient_u(self.controls(x)) * self.scale).ravel()


def cost(seq, cfg, system, rho0):
    """Cost value and its breakdown into distance and penalty terms."""
    return Objective(system, rho0, cfg, seq.tau).cost_u(seq.u)


def gradient(seq, cfg, system, rho0, derivative=AUTO, workers=1):
    """d cost / d u_j(t_k) as an n_slots x 3 array in cost units per MHz."""
    return Objective(system, rho0, cfg, seq.tau, derivative=derivative,
                     workers=workers).gradient_u(seq.u)


@dataclass
class BoxResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    history: list
    grad_norms: list
    iterations: int
    reason: str


def _projected_gradient(x, g, lower, upper, eps=1e-12):
    pg = g.copy()
    pg[(x <= lower + eps) & (g > 0)] = 0.0
    pg[(x >= upper - eps) & (g < 0)] = 0.0
    return pg


def _max_step(x, p, lower, upper):
    with np.errstate(divide='ignore', invalid='ignore'):
        up = np.where(p > 0, (upper - x) / p, np.inf)
        down = np.where(p < 0, (lower - x) / p, np.inf)
    return float(min(up.min(), down.min()))


def _armijo(fun, x, f, g, p, lower, upper, alpha, c1=1e-4, tries=40):
    for _ in range(tries):
        xn = np.clip(x + alpha * p, lower, upper)
        fn = fun(xn)
        if fn <= f + c1 * np.dot(g, xn - x) and fn <= f:
            return xn, fn
        alpha *= 0.5
    return None, None


def minimize_box_bfgs(fun, jac, x0, lower=None, upper=None, gtol=1e-6, maxiter=200,
                      max_seconds=None, c1=1e-4, c2=0.9, callback=None):
    """BFGS with a strong-Wolfe line search inside a box.

    Components held at a bound with the gradient pushing outwards are frozen
    for the step; the step length is capped so the iterate stays feasible.
    When the Wolfe search fails a projected Armijo backtracking is tried
    before giving up.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    x = np.clip(x, lower, upper)
    start = time.time()
    f = fun(x)
    g = jac(x)
    H = np.eye(n)
    old_old = f + np.linalg.norm(g) / 2.0
    history = [f]
    grad_norms = []
    reason = MAX_ITER
    k = 0
    while True:
        pg = _projected_gradient(x, g, lower, upper)
        gnorm = float(np.max(np.abs(pg))) if n else 0.0
        grad_norms.append(gnorm)
        if gnorm <= gtol:
            reason = CONVERGED
            break
        if k >= maxiter:
            reason = MAX_ITER
            break
        if max_seconds is not None and time.time() - start > max_seconds:
            reason = TIME_LIMIT
            break
        p = -H @ g
        frozen = ((x <= lower + 1e-12) & (p < 0)) | ((x >= upper - 1e-12) & (p > 0))
        p[frozen] = 0.0
        if np.dot(p, g) >= 0:
            H = np.eye(n)
            p = -pg
        amax = _max_step(x, p, lower, upper)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', optimize.OptimizeWarning)
            warnings.simplefilter('ignore', RuntimeWarning)
            try:
                alpha, _, _, fn, _, _ = optimize.line_search(
                    fun, jac, x, p, gfk=g, old_fval=f, old_old_fval=old_old,
                    c1=c1, c2=c2, amax=min(amax, 1e10))
            except (ValueError, FloatingPointError):
                alpha, fn = None, None
        if alpha is not None:
            xn = np.clip(x + alpha * p, lower, upper)
            fn = fun(xn)
            if fn > f:
                alpha = None
        if alpha is None:
            logger.debug('Wolfe search failed at iteration %d, backtracking', k)
            xn, fn = _armijo(fun, x, f, g, p, lower, upper, min(1.0, amax), c1)
            if xn is None:
                reason = LINE_SEARCH_FAILED
                break
        gn = jac(xn)
        s = xn - x
        y = gn - g
        sy = np.dot(s, y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            Hy = H @ y
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (rho * rho * np.dot(y, Hy) + rho) * np.outer(s, s))
        else:
            logger.debug('skipping inverse-Hessian update, curvature %.2e', sy)
        old_old = f
        x, f, g = xn, fn, gn
        k += 1
        history.append(f)
        if callback is not None:
            callback(k, x, f)
    return BoxResult(x=x, fun=f, grad=g, history=history, grad_norms=grad_norms,
                     iterations=k, reason=reason)


@dataclass
class OptimizationResult:
    sequence: ControlSequence
    cost_history: list
    grad_norm_history: list
    fidelity: float
    penalty: float
    max_leakage: float
    restart: int
    wall_time: float
    reason: str
    breakdown: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)

    @property
    def initial_cost(self):
        return self.cost_history[0]

    @property
    def final_cost(self):
        return self.cost_history[-1]

    def sort_key(self):
        return (-self.fidelity, self.penalty, self.restart)

    def summary(self):
        return {'restart': self.restart, 'fidelity': self.fidelity, 'penalty': self.penalty,
                'max_leakage': self.max_leakage, 'final_cost': self.final_cost,
                'initial_cost': self.initial_cost, 'iterations': len(self.cost_history) - 1,
                'wall_time_s': self.wall_time, 'termination': self.reason,
                'stages': self.stages}


def channel_scale(bounds):
    return np.maximum(np.abs(bounds[:, 0]), np.abs(bounds[:, 1]))


def bfgs_minimize(seq0, cfg, system, rho0, maxiter=200, max_seconds=None, gtol=1e-6,
                  derivative=AUTO, workers=1, restart=0):
    """Optimise one sequence; amplitudes are scaled per channel by their bound."""
    if seq0.bounds is None:
        raise ConfigError('sequence needs channel bounds for the search', 'bounds')
    if not seq0.within_bounds():
        raise ConfigError('initial sequence lies outside its bounds', 'bounds')
    start = time.time()
    scale = channel_scale(seq0.bounds)
    obj = Objective(system, rho0, cfg, seq0.tau, scale, derivative, workers)
    n = seq0.n_slots
    lower = np.tile(seq0.bounds[:, 0] / scale, n)
    upper = np.tile(seq0.bounds[:, 1] / scale, n)

    def progress(k, x, f):
        logger.debug('restart %d iteration %d: cost %.6f', restart, k, f)

    box = minimize_box_bfgs(obj.value, obj.gradient, (seq0.u / scale).ravel(), lower, upper,
                            gtol=gtol, maxiter=maxiter, max_seconds=max_seconds,
                            callback=progress)
    u = obj.controls(box.x)
    seq = seq0.with_controls(u)
    _, breakdown = obj.cost_u(u)
    rho_T = final_state(rho0, seq, system)
    fid = report_fidelity(rho_T, cfg, system.space)
    logger.info('restart %d stopped after %d iterations (%s): cost %.6f, fidelity %.4f',
                restart, box.iterations, box.reason, box.fun, fid)
    return OptimizationResult(sequence=seq, cost_history=list(box.history),
                              grad_norm_history=list(box.grad_norms), fidelity=fid,
                              penalty=breakdown['penalty'],
                              max_leakage=breakdown['max_leakage'], restart=restart,
                              wall_time=time.time() - start, reason=box.reason,
                              breakdown=breakdown)


@dataclass
class Schedule:
    """Budgets of the closed-system warm-up and the dissipative refinement."""
    stage_a_iterations: int = 200
    stage_a_seconds: float = 300.0
    stage_b_iterations: int = 2000
    stage_b_seconds: float = None
    gtol: float = 1e-6
    derivative: str = AUTO
    skip_stage_a: bool = False


@dataclass
class Problem:
    system: object
    rho0: np.ndarray
    cfg: CostConfig
    n_slots: int
    tau: float
    bounds: np.ndarray
    steady: SteadySettings = field(default_factory=SteadySettings)

    def idle_controls(self):
        return np.array([self.bounds[0, 0], 0.0, 0.0])

    def random_sequence(self, rng):
        lo = INIT_FRACTION * self.bounds[:, 0]
        hi = INIT_FRACTION * self.bounds[:, 1]
        u = rng.uniform(lo, hi, size=(self.n_slots, len(CONTROL_NAMES)))
        return ControlSequence(u, self.tau, self.bounds)


def derivative_self_test(problem, derivative=AUTO):
    """Step checks at the idle point, one per channel, for the dissipative stage.

    Empty when that stage does not use finite differences.
    """
    mode = derivative
    if mode == AUTO:
        mode = FINITE if problem.system.dissipative else SPECTRAL
    if mode != FINITE:
        return []
    u = problem.idle_controls()
    return [check_derivative_step(problem.system, u, problem.tau, j)
            for j in range(len(CONTROL_NAMES))]


def run_restart(problem, index, seed_seq, schedule, workers=1):
    """One restart: random start, closed-system stage, dissipative stage."""
    rng = np.random.default_rng(seed_seq)
    seq = problem.random_sequence(rng)
    start = time.time()
    stages = []
    if not schedule.skip_stage_a:
        closed = problem.system.closed()
        a = bfgs_minimize(seq, problem.cfg, closed, problem.rho0,
                          maxiter=schedule.stage_a_iterations,
                          max_seconds=schedule.stage_a_seconds, gtol=schedule.gtol,
                          derivative=schedule.derivative, workers=workers, restart=index)
        seq = a.sequence
        stages.append({'stage': 'closed', 'iterations': len(a.cost_history) - 1,
                       'termination': a.reason, 'final_cost': a.final_cost})
    b = bfgs_minimize(seq, problem.cfg, problem.system, problem.rho0,
                      maxiter=schedule.stage_b_iterations, max_seconds=schedule.stage_b_seconds,
                      gtol=schedule.gtol, derivative=schedule.derivative, workers=workers,
                      restart=index)
    stages.append({'stage': 'dissipative', 'iterations': len(b.cost_history) - 1,
                   'termination': b.reason, 'final_cost': b.final_cost})
    b.stages = stages
    b.wall_time = time.time() - start
    return b


def _restart_job(args):
    problem, index, seed_seq, schedule = args
    return run_restart(problem, index, seed_seq, schedule)


def multi_restart(problem, n_restarts, seed, schedule=None, workers=1):
    """Best of n_restarts independent optimisations, by (fidelity, -penalty, index)."""
    if n_restarts < 1:
        raise ConfigError('need at least one restart', 'restarts')
    schedule = schedule or Schedule()
    seeds = np.random.SeedSequence(seed).spawn(n_restarts)
    results = []
    try:
        if workers > 1 and n_restarts > 1:
            jobs = [(problem, i, seeds[i], schedule) for i in range(n_restarts)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_restart_job, job) for job in jobs]
                try:
                    for future in as_completed(futures):
                        results.append(future.result())
                except KeyboardInterrupt:
                    for future in futures:
                        future.cancel()
                    raise
        else:
            for i in range(n_restarts):
                results.append(run_restart(problem, i, seeds[i], schedule, workers=workers))
    except KeyboardInterrupt:
        if not results:
            raise
        logger.warning('interrupted after %d of %d restarts, keeping the best so far',
                       len(results), n_restarts)
    results.sort(key=lambda r: r.restart)
    best = min(results, key=OptimizationResult.sort_key)
    logger.info('best restart %d of %d: fidelity %.4f, penalty %.4g',
                best.restart, len(results), best.fidelity, best.penalty)
    return best, results


def verify_dim(seq, problem, dim=4):
    """Rerun a sequence at another truncation and report the fidelity change."""
    base_rho = propagate(problem.rho0, seq, problem.system, validate=False).final
    base = report_fidelity(base_rho, problem.cfg, problem.system.space)
    big = problem.system.resized(dim)
    rho0 = problem.steady.solve(big)
    cfg = problem.cfg.for_space(big.space)
    rho_T = propagate(rho0, seq, big, validate=False).final
    fid = report_fidelity(rho_T, cfg, big.space)
    logger.info('dim %d fidelity %.4f, dim %d fidelity %.4f', problem.system.space.cavity_dim,
                base, dim, fid)
    return {'dim': problem.system.space.cavity_dim, 'fidelity': base,
            'verify_dim': dim, 'verify_fidelity': fid, 'delta': fid - base}
