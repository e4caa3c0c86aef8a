"""Distributed dynamics over a communication graph.

Two pieces live here:

* ``DistributedIsbrag``: every agent estimates the others' strategies
  with dynamic average consensus (T sub-steps per strategy update) and
  plugs the estimates into its own supergradient.
* the shared-sample machinery: each agent keeps copies of everybody's
  worst-case scenarios, restricted to the coordinates it observes, plus
  slack variables; a primal-dual method with extrapolated multipliers
  drives the copies to agreement. ``run_algorithm1`` chains consensus,
  that solver and the strategy update.
"""

from dataclasses import dataclass

import numpy as np

from .ambiguity import check_samples_in_box
from .consensus import ConsensusGains, ConsensusState, DIVERGENCE_NORM
from .dro import (DroOracle, ScenarioSolution, l1_box_lmo, min_norm_supergradient,
                  project_l1_box, solve_scenarios)
from .errors import (ConfigurationError, DivergenceError, SampleOutsideBoxError, StageError)
from .game import Box, IntervalSet, Profile
from .isbrag import Trajectory, compose_phi, lyapunov_value, support_argmax


#%% estimates

@dataclass(frozen=True)
class AgentNode:
    """Snapshot of one agent's local state."""

    agent: int
    s: np.ndarray
    s_prev: np.ndarray
    estimates: Profile
    x: np.ndarray
    v: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class DisturbanceLog:
    """Errors of one round relative to the exact-information update."""

    delta: tuple
    delta_prime: tuple
    tracking_error: float

    @property
    def delta_norms(self):
        return np.array([np.linalg.norm(d) for d in self.delta])

    @property
    def delta_prime_norms(self):
        return np.array([np.linalg.norm(d) for d in self.delta_prime])

    @property
    def delta_prime_total(self):
        return float(self.delta_prime_norms.sum())


class _EstimateNetwork:
    """Consensus instances tracking every strategy coordinate at every node."""

    def __init__(self, game, graph, gains, s0, rng):
        if graph.n != game.n:
            raise ConfigurationError(f"graph has {graph.n} nodes, game has {game.n} agents")
        self.game = game
        self.n = game.n
        self.box = game.stacked_box()
        dims = game.dims
        self.owner = np.repeat(np.arange(self.n), dims)
        self.cols = np.arange(sum(dims))
        est0 = np.stack([self.box.sample(rng) for _ in range(self.n)])
        s0 = np.asarray(s0, dtype=float)
        est0[self.owner, self.cols] = s0
        self.cons = ConsensusState(graph, gains, width=sum(dims), x0=est0, u0=self.inputs(s0))

    def inputs(self, s):
        u = np.zeros((self.n, self.cols.size))
        u[self.owner, self.cols] = self.n * np.asarray(s, dtype=float)
        return u

    def read(self, s):
        """Projected estimates, own block replaced by the true own strategy."""
        est = np.clip(self.cons.x, self.box.lower, self.box.upper)
        est[self.owner, self.cols] = s
        return est

    def tracking_error(self, s):
        mask = np.ones_like(self.cons.x, dtype=bool)
        mask[self.owner, self.cols] = False
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(self.cons.x - s[None, :])[mask]))


class DistributedIsbrag:
    """d-ISBRAG on a digraph with ``T`` consensus sub-steps per update.

    Parameters
    ----------
    game : Game
    graph : Digraph
    params : AlgoParams
    T : int
        Sub-steps per strategy update; estimates are read after ``T - 1``.
    oracle : object
        ``oracle.agent(i, profile)`` returns agent i's min-norm supergradient
        at the profile it believes in.
    s0 : array_like
        Stacked initial strategies.
    gains : ConsensusGains
    seed : int
        Seeds the random initial estimates.
    """

    def __init__(self, game, graph, params, T, oracle, s0, gains=ConsensusGains(), seed=0):
        if T < 1:
            raise ConfigurationError("T must be at least 1")
        self.game = game
        self.params = params
        self.T = int(T)
        self.oracle = oracle
        self.s = game.project(s0).stacked
        self.p = self.s.copy()
        self.t = 0
        self.net = _EstimateNetwork(game, graph, gains, self.s, np.random.default_rng(seed))

    def _profile(self, vec):
        return Profile.from_stacked(vec, self.game.dims)

    def exact_phi(self):
        s, p = self._profile(self.s), self._profile(self.p)
        return [compose_phi(self.oracle.agent(i, s), s[i], p[i], self.params.mu[i], self.params.lam[i])
                for i in range(self.game.n)]

    def nodes(self):
        est = self.net.read(self.s)
        c = self.net.cons
        off = self.game.offsets
        return [AgentNode(i, self.s[off[i]:off[i + 1]].copy(), self.p[off[i]:off[i + 1]].copy(),
                          self._profile(est[i]), c.x[i].copy(), c.v[i].copy(), c.z[i].copy())
                for i in range(self.game.n)]

    def round(self):
        """One strategy update; returns the round's disturbance log."""
        g, prm = self.game, self.params
        u = self.net.inputs(self.s)
        self.net.cons.rebase(u)
        for _ in range(self.T - 1):
            self.net.cons.step(u)
        est = self.net.read(self.s)
        track = self.net.tracking_error(self.s)
        s, p = self._profile(self.s), self._profile(self.p)
        deltas, dprimes, new = [], [], []
        for i, box in enumerate(g.boxes):
            v_hat = self.oracle.agent(i, self._profile(est[i]))
            v = self.oracle.agent(i, s)
            phi_hat = compose_phi(v_hat, s[i], p[i], prm.mu[i], prm.lam[i])
            phi = compose_phi(v, s[i], p[i], prm.mu[i], prm.lam[i])
            target = support_argmax(phi_hat, box)
            deltas.append(v_hat - v)
            dprimes.append(target - support_argmax(phi, box))
            new.append(np.clip((1 - prm.alpha[i]) * s[i] + prm.alpha[i] * target, box.lower, box.upper))
        self.net.cons.step(u)
        self.p, self.s = self.s, np.concatenate(new)
        self.t += 1
        return DisturbanceLog(tuple(deltas), tuple(dprimes), track)


def disbrag_round(network, T=None, params=None):
    """Advance ``network`` by one round (optionally overriding T/params)."""
    if T is not None:
        network.T = int(T)
    if params is not None:
        network.params = params
    network.round()
    return network


def run_disbrag(network, horizon, bound=None, hook=None):
    """Iterate rounds; V is evaluated with exact information."""
    g = network.game
    S = np.empty((horizon + 1, sum(g.dims)))
    V = np.empty(horizon + 1)
    phin = np.empty((horizon + 1, g.n))
    dnorm = np.zeros((horizon, g.n))
    dpnorm = np.zeros((horizon, g.n))
    track = np.zeros(horizon)
    for t in range(horizon + 1):
        phi = network.exact_phi()
        S[t] = network.s
        V[t] = lyapunov_value(Profile.from_stacked(network.s, g.dims), phi, g.boxes)
        phin[t] = [np.linalg.norm(x) for x in phi]
        if hook is not None:
            hook(t, S[t], V[t], {"tracking_error": track[t - 1] if t else np.nan})
        if t == horizon:
            break
        log = network.round()
        dnorm[t] = log.delta_norms
        dpnorm[t] = log.delta_prime_norms
        track[t] = log.tracking_error
    margin = np.full(horizon, np.nan)
    if bound is not None and horizon > 0:
        margin = bound.increment_bound(V[:-1], dpnorm.sum(axis=1)) - np.diff(V)
    return Trajectory(S, V, phin, margin, bound,
                      {"delta_norm": dnorm, "delta_prime_norm": dpnorm, "tracking_error": track})


#%% shared-sample program

@dataclass(frozen=True)
class LocalProblem:
    """Agent ``agent``'s share of the distributed scenario program.

    The agent holds copies ``y_ji^k`` (all j, all k) and slacks ``z_ji`` (all
    j). It knows only the sample coordinates in ``owned`` and its own
    budget ``N eps_i``.
    """

    agent: int
    n: int
    N: int
    m: int
    owned: slice
    samples: np.ndarray
    budget: float
    lower: np.ndarray
    upper: np.ndarray
    in_neighbors: tuple
    profile: Profile = None

    @property
    def scenario_vectors(self):
        return self.n * self.N

    @property
    def slacks(self):
        return self.n

    @property
    def row_counts(self):
        return {"own_budget": 1, "neighbor_budget": self.n - 1,
                "consensus": self.n * self.N * self.m, "box": 2 * self.n * self.N * self.m}


def build_local_problem(agent, graph, samples, eps, bounds, profile=None):
    """Agent ``agent``'s local program from a shared SampleSet.

    Raises ConfigurationError when the partition misses the agent and
    SampleOutsideBoxError naming the coordinate when the data violate the
    support box.
    """
    sl = samples.owned_slice(agent)
    box = bounds if isinstance(bounds, Box) else Box(*bounds)
    H = samples.samples
    if box.dim != H.shape[1]:
        raise ConfigurationError(f"support box has {box.dim} coordinates, samples have {H.shape[1]}")
    local = H[:, sl]
    try:
        check_samples_in_box(local, box.lower[sl], box.upper[sl])
    except SampleOutsideBoxError as exc:
        raise SampleOutsideBoxError(exc.index, exc.coordinate + sl.start, local[exc.index, exc.coordinate],
                                    box.lower[sl][exc.coordinate], box.upper[sl][exc.coordinate]) from None
    return LocalProblem(agent, graph.n, H.shape[0], H.shape[1], sl, local.copy(), H.shape[0] * float(eps),
                        box.lower.copy(), box.upper.copy(), tuple(graph.in_neighbors(agent)), profile)


@dataclass
class SolverState:
    """Primal and dual variables of the distributed solver (for warm starts)."""

    Y: np.ndarray
    Ep: np.ndarray
    Em: np.ndarray
    Z: np.ndarray
    nu_split: np.ndarray
    nu_cons: np.ndarray
    lam: np.ndarray


@dataclass
class DistributedSolution:
    solutions: list
    consensus_residual: float
    budget_residual: float
    split_residual: float
    state: SolverState
    objective: float


class _SharedOperator:
    """Linear constraint map of the distributed program and its adjoint."""

    def __init__(self, problems, graph):
        self.n = len(problems)
        self.N, self.m = problems[0].N, problems[0].m
        self.Lap = graph.laplacian
        self.mask = np.zeros((self.n, self.m))
        for p in problems:
            self.mask[p.agent, p.owned] = 1.0
        self.M = self.mask[:, None, None, :]
        H = np.zeros((self.N, self.m))
        for p in problems:
            H[:, p.owned] = p.samples
        # assembled for the simulation; each holder only reads H through its mask
        self.H = H
        self.budget = np.diag([p.budget for p in sorted(problems, key=lambda q: q.agent)])

    def hold(self, X):
        return np.tensordot(self.Lap, X, axes=(1, 0))

    def hold_T(self, X):
        return np.tensordot(self.Lap.T, X, axes=(1, 0))

    def apply(self, Y, Ep, Em, Z):
        split = self.M * (Y - self.H - Ep + Em)
        cons = -self.hold(Y)
        bud = (self.M * (Ep + Em)).sum(axis=(2, 3)) + self.Lap @ Z
        return split, cons, bud

    def adjoint(self, ms, mc, mb):
        gY = self.M * ms - self.hold_T(mc)
        gEp = self.M * (-ms + mb[:, :, None, None])
        gEm = self.M * (ms + mb[:, :, None, None])
        gZ = self.Lap.T @ mb
        return gY, gEp, gEm, gZ

    def norm_sq(self, iters=60):
        """Power-iteration estimate of the squared operator norm (deterministic start)."""
        shape = (self.n, self.n, self.N, self.m)
        x = [np.ones(shape), np.ones(shape), np.ones(shape), np.ones((self.n, self.n))]
        x[1] *= self.M
        x[2] *= self.M
        lam = 0.0
        for _ in range(iters):
            nrm = np.sqrt(sum(float(np.sum(a * a)) for a in x))
            x = [a / nrm for a in x]
            y = self.adjoint(*self.apply(*x))
            lam = np.sqrt(sum(float(np.sum(a * a)) for a in y))
            x = list(y)
        return lam


def distributed_solve(problems, graph, utilities, T_opt, primal_weight=3.0, state=None, lf=0.0):
    """Run ``T_opt`` primal-dual iterations with extrapolated duals.

    Each iteration takes a projected gradient step on every holder's
    primal block against the current multipliers, then a dual ascent step
    evaluated at the extrapolated primal ``2 x+ - x``. Steps are constant,
    ``tau = w / |A|`` and ``sigma = 1 / (w |A|)`` (shrunk by 5%), so
    ``tau sigma |A|^2 < 1``.

    Parameters
    ----------
    problems : list of LocalProblem
        One per agent, each carrying the profile that agent believes in.
    graph : Digraph
    utilities : list of Utility
    T_opt : int
    primal_weight : float
        Ratio ``w`` between the primal and dual step sizes.
    state : SolverState, optional
        Warm start.
    lf : float
        Lipschitz constant of the objective gradient (0 for affine families).

    Returns
    -------
    DistributedSolution
    """
    problems = sorted(problems, key=lambda q: q.agent)
    n, N, m = len(problems), problems[0].N, problems[0].m
    if graph.n != n:
        raise ConfigurationError(f"graph has {graph.n} nodes but {n} local problems were given")
    if primal_weight <= 0:
        raise ConfigurationError("primal_weight must be positive")
    op = _SharedOperator(problems, graph)
    lo, hi = problems[0].lower, problems[0].upper
    if state is None:
        # holders start from the sample where they observe it, the box midpoint elsewhere
        mid = 0.5 * (lo + hi)
        Y = np.broadcast_to(np.where(op.M > 0, op.H, mid), (n, n, N, m))
        shape = (n, n, N, m)
        state = SolverState(Y.copy(), np.zeros(shape), np.zeros(shape), np.zeros((n, n)),
                            np.zeros(shape), np.zeros(shape), np.zeros((n, n)))
    else:
        state = SolverState(*(a.copy() for a in (state.Y, state.Ep, state.Em, state.Z,
                                                   state.nu_split, state.nu_cons, state.lam)))
    norm = np.sqrt(op.norm_sq())
    sigma = 0.95 / (primal_weight * norm)
    tau = 0.95 * primal_weight / norm
    if lf > 0:
        tau = min(tau, 0.95 / (0.5 * lf + sigma * norm ** 2))
    Y, Ep, Em, Z = state.Y, state.Ep, state.Em, state.Z
    nus, nuc, lam = state.nu_split, state.nu_cons, state.lam

    def f_grad(Y):
        g = np.zeros_like(Y)
        for p in problems:
            i = p.agent
            g[i, i] = utilities[i].grad_xi_batch(p.profile, Y[i, i]) / N
        return g

    for _ in range(int(T_opt)):
        gY, gEp, gEm, gZ = op.adjoint(nus, nuc, lam)
        Y1 = np.clip(Y - tau * (gY + f_grad(Y)), lo, hi)
        Ep1 = np.maximum(0.0, Ep - tau * gEp)
        Em1 = np.maximum(0.0, Em - tau * gEm)
        Z1 = Z - tau * gZ
        split, cons, bud = op.apply(2 * Y1 - Y, 2 * Ep1 - Ep, 2 * Em1 - Em, 2 * Z1 - Z)
        nus = nus + sigma * split
        nuc = nuc + sigma * cons
        lam = np.maximum(0.0, lam + sigma * (bud - op.budget))
        Y, Ep, Em, Z = Y1, Ep1, Em1, Z1
        if not np.isfinite(Y).all() or np.abs(nuc).max() > DIVERGENCE_NORM:
            raise DivergenceError("distributed solver diverged")
    split, cons, bud = op.apply(Y, Ep, Em, Z)
    bud = bud - op.budget
    sols = []
    obj = 0.0
    for p in problems:
        i = p.agent
        Yi = Y[i, i].copy()
        val = float(np.sum(utilities[i].values(p.profile, Yi)) / N)
        obj += val
        slack = max(p.budget - float(np.abs(Yi - op.H).sum()), 0.0)
        sols.append(ScenarioSolution(Yi, val, slack, np.nan, int(T_opt)))
    return DistributedSolution(sols, float(np.abs(cons).max()), float(np.maximum(bud, 0).max()),
                               float(np.abs(split).max()),
                               SolverState(Y, Ep, Em, Z, nus, nuc, lam), obj)


def centralized_reference_solve(utilities, profiles, samples, radii, bounds, tol=1e-8, max_iters=20000):
    """Stacked solve of every agent's scenario program in one solver.

    Parameters
    ----------
    utilities : list of Utility
    profiles : list of Profile
        Profile each agent's objective is evaluated at.
    samples : (N, m) array
    radii : array_like
        Per-agent radius.
    bounds : Box

    Returns
    -------
    list of ScenarioSolution, total objective
    """
    H = np.atleast_2d(np.asarray(samples, dtype=float))
    n, (N, m) = len(utilities), H.shape
    if n > 8 or N > 16 or m > 8:
        raise ConfigurationError("reference solve limited to n <= 8, N <= 16, m <= 8")
    box = bounds if isinstance(bounds, Box) else Box(*bounds)
    check_samples_in_box(H, box.lower, box.upper)
    radii = np.asarray(radii, dtype=float)
    budgets = N * radii
    center = np.broadcast_to(H, (n, N, m)).copy()

    def objective(Y):
        val = sum(float(np.sum(u.values(p, Y[i]))) for i, (u, p) in enumerate(zip(utilities, profiles))) / N
        g = np.stack([(u.grad_xi_batch(p, Y[i]) if u.depends_on_xi else np.zeros((N, m)))
                      for i, (u, p) in enumerate(zip(utilities, profiles))]) / N
        return val, g

    def project(Y):
        return np.stack([project_l1_box(Y[i], H, budgets[i], box.lower, box.upper) for i in range(n)])

    def lmo(g):
        return np.stack([l1_box_lmo(g[i], H, budgets[i], box.lower, box.upper) for i in range(n)])

    if np.all(budgets == 0):
        Y = center
    else:
        Y = solve_scenarios(objective, center, budgets, box.lower, box.upper, tol, max_iters,
                            project=project, lmo=lmo).scenarios
    sols = []
    for i, (u, p) in enumerate(zip(utilities, profiles)):
        val = float(np.sum(u.values(p, Y[i])) / N)
        sols.append(ScenarioSolution(Y[i].copy(), val, max(budgets[i] - float(np.abs(Y[i] - H).sum()), 0.0)))
    return sols, float(sum(s.value for s in sols))


#%% Algorithm 1

def run_algorithm1(game, graph, params, samples, radii, bounds, s0, horizon, T_con, T_opt,
                   gains=ConsensusGains(), seed=0, primal_weight=3.0, warm_start=True, bound=None,
                   exact_tol=1e-6, hook=None):
    """Consensus, distributed scenario solve and strategy update, repeated.

    Returns a Trajectory whose ``extra`` holds per-round tracking errors,
    solver residuals and disturbance norms. V is evaluated with exact
    information (centralized scenario solves at ``exact_tol``).
    """
    if samples.mode != "shared":
        raise ConfigurationError("the shared-sample loop needs a shared SampleSet")
    box = bounds if isinstance(bounds, Box) else Box(*bounds)
    radii = np.asarray(radii, dtype=float)
    rng = np.random.default_rng(seed)
    s = game.project(s0).stacked
    p = s.copy()
    net = _EstimateNetwork(game, graph, gains, s, rng)
    exact = DroOracle(game, samples, radii, [box] * game.n, tol=exact_tol)
    dims = game.dims
    S = np.empty((horizon + 1, s.size))
    V = np.empty(horizon + 1)
    phin = np.empty((horizon + 1, game.n))
    keys = ("tracking_error", "consensus_residual", "budget_residual")
    extra = {k: np.zeros(horizon) for k in keys}
    extra["delta_norm"] = np.zeros((horizon, game.n))
    extra["delta_prime_norm"] = np.zeros((horizon, game.n))
    solver_state = None

    def exact_phi(s, p):
        sp, pp = Profile.from_stacked(s, dims), Profile.from_stacked(p, dims)
        v = exact(sp)
        return [compose_phi(v[i], sp[i], pp[i], params.mu[i], params.lam[i]) for i in range(game.n)], v

    for t in range(horizon + 1):
        try:
            phi, v_exact = exact_phi(s, p)
        except Exception as exc:
            raise StageError("exact-evaluation", t, exc) from exc
        S[t] = s
        V[t] = lyapunov_value(Profile.from_stacked(s, dims), phi, game.boxes)
        phin[t] = [np.linalg.norm(x) for x in phi]
        if hook is not None:
            hook(t, S[t], V[t], {})
        if t == horizon:
            break
        try:
            u = net.inputs(s)
            net.cons.rebase(u)
            for _ in range(T_con):
                net.cons.step(u)
            est = net.read(s)
            extra["tracking_error"][t] = net.tracking_error(s)
        except Exception as exc:
            raise StageError("consensus", t, exc) from exc
        try:
            problems = [build_local_problem(i, graph, samples, radii[i], box,
                                            Profile.from_stacked(est[i], dims)) for i in range(game.n)]
            res = distributed_solve(problems, graph, game.utilities, T_opt, primal_weight,
                                    solver_state if warm_start else None)
            solver_state = res.state
            extra["consensus_residual"][t] = res.consensus_residual
            extra["budget_residual"][t] = res.budget_residual
        except Exception as exc:
            raise StageError("optimization", t, exc) from exc
        sp, pp = Profile.from_stacked(s, dims), Profile.from_stacked(p, dims)
        new = []
        for i, b in enumerate(game.boxes):
            prof_i = problems[i].profile
            u_i = game.utilities[i]
            if u_i.depends_on_xi:
                g = u_i.grad_own(prof_i, res.solutions[i].mean_scenario)
                v_hat = min_norm_supergradient(IntervalSet.point(g), b.faces(sp[i]))
            else:
                v_hat = min_norm_supergradient(game.supergradient(i, prof_i), b.faces(sp[i]))
            phi_hat = compose_phi(v_hat, sp[i], pp[i], params.mu[i], params.lam[i])
            target = support_argmax(phi_hat, b)
            extra["delta_norm"][t, i] = np.linalg.norm(v_hat - v_exact[i])
            extra["delta_prime_norm"][t, i] = np.linalg.norm(target - support_argmax(phi[i], b))
            new.append(np.clip((1 - params.alpha[i]) * sp[i] + params.alpha[i] * target, b.lower, b.upper))
        p, s = s, np.concatenate(new)
    margin = np.full(horizon, np.nan)
    if bound is not None and horizon > 0:
        margin = bound.increment_bound(V[:-1], extra["delta_prime_norm"].sum(axis=1)) - np.diff(V)
    return Trajectory(S, V, phin, margin, bound, extra)
