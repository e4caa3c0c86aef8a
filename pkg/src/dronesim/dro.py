"""Distributionally robust utility evaluation and supergradient selection.

The robust utility of agent i is the worst expected utility over the
l1-Wasserstein ball around the empirical distribution. With box support
this is the scenario program

    min_{y^1..y^N}  (1/N) sum_k U_i(s; y^k)
    s.t.            sum_k |h^k - y^k|_1 <= N eps,   lo <= y^k <= hi,

solved here by projected subgradient steps. Each projection onto the
l1-ball-intersect-box set is exact: the problem is separable once the
l1 multiplier is fixed, and the multiplier is found by bisection.
Termination uses a Frank-Wolfe duality gap, which upper-bounds the
suboptimality of the current scenarios for convex objectives.
"""

from dataclasses import dataclass

import numpy as np

from .ambiguity import check_samples_in_box
from .errors import ConfigurationError, ConvergenceError, NonDifferentiableError
from .game import Box, IntervalSet, as_profile

TOL_DRO = 1e-6
MAX_ITERS = 5000


@dataclass(frozen=True)
class ScenarioSolution:
    """Worst-case scenarios of one agent's robust program."""

    scenarios: np.ndarray
    value: float
    budget_slack: float
    gap: float = 0.0
    iterations: int = 0

    @property
    def mean_scenario(self):
        return self.scenarios.mean(axis=0)


@dataclass(frozen=True)
class SupergradientQuery:
    agent: int
    profile: object
    faces: np.ndarray
    result: np.ndarray


#%% projections

def project_l1_box(y, center, radius, lower, upper, iters=200):
    """Euclidean projection onto ``{|x - center|_1 <= radius} cap [lower, upper]``.

    ``center`` must lie in the box. Arrays may have any matching shape; the
    l1 norm runs over all entries.
    """
    w = y - center
    lo = np.broadcast_to(lower, y.shape) - center
    hi = np.broadcast_to(upper, y.shape) - center

    def clipped(theta):
        return np.clip(np.sign(w) * np.maximum(np.abs(w) - theta, 0.0), lo, hi)

    x = clipped(0.0)
    if np.abs(x).sum() <= radius:
        return center + x
    a, b = 0.0, float(np.abs(w).max())
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if np.abs(clipped(mid)).sum() > radius:
            a = mid
        else:
            b = mid
        if b - a <= 1e-15 * max(1.0, b):
            break
    return center + clipped(b)


def l1_box_lmo(g, center, radius, lower, upper):
    """Minimize ``<g, y>`` over the same set (greedy fractional knapsack)."""
    y = np.array(center, dtype=float, copy=True)
    flat_g = g.ravel()
    lo = np.broadcast_to(lower, y.shape).ravel()
    hi = np.broadcast_to(upper, y.shape).ravel()
    flat_y = y.ravel()
    budget = radius
    for j in np.argsort(-np.abs(flat_g), kind="stable"):
        if budget <= 0 or flat_g[j] == 0:
            break
        cap = flat_y[j] - lo[j] if flat_g[j] > 0 else hi[j] - flat_y[j]
        step = min(cap, budget)
        flat_y[j] += -step if flat_g[j] > 0 else step
        budget -= step
    return flat_y.reshape(y.shape)


#%% scenario program

def solve_scenarios(objective, center, radius, lower, upper, tol=TOL_DRO,
                    max_iters=MAX_ITERS, init=None, project=None, lmo=None):
    """Minimize a convex ``objective(Y) -> (value, grad)`` over the scenario set.

    ``project(Y)`` and ``lmo(g)`` default to the single-ball set defined by
    ``center``, ``radius``, ``lower``, ``upper``; pass both to solve over a
    product of such sets. Returns the best iterate as a ScenarioSolution;
    raises ConvergenceError when the duality gap stays above ``tol`` after
    ``max_iters`` steps.
    """
    if project is None:
        def project(Y):
            return project_l1_box(Y, center, radius, lower, upper)

        def lmo(g):
            return l1_box_lmo(g, center, radius, lower, upper)
    Y = center.copy() if init is None else project(init)
    val, g = objective(Y)
    diam = max(min(2.0 * float(np.sum(radius)),
                   float(np.linalg.norm(np.broadcast_to(upper - lower, Y.shape)))), 1e-12)
    best = (np.inf, Y, np.inf)
    scale = None
    for t in range(1, max_iters + 1):
        V = lmo(g)
        gap = float(np.sum(g * (Y - V)))
        if val < best[0] or (val == best[0] and gap < best[2]):
            best = (val, Y, gap)
        if gap <= tol:
            break
        # the linear-minimization vertex is exact for objectives affine in Y; jump when it helps
        v_val, v_g = objective(V)
        if v_val < val:
            Y, val, g = V, v_val, v_g
            continue
        gn = float(np.linalg.norm(g))
        if scale is None:
            scale = diam / max(gn, 1e-300)
        Y = project(Y - scale / np.sqrt(t) * g)
        val, g = objective(Y)
    else:
        gap = float(np.sum(g * (Y - lmo(g))))
        if val < best[0]:
            best = (val, Y, gap)
    val, Y, gap = best
    if gap > tol:
        raise ConvergenceError(f"scenario solver did not reach tolerance {tol} in {max_iters} iterations", gap)
    slack = max(float(np.sum(radius)) - float(np.abs(Y - center).sum()), 0.0)
    return ScenarioSolution(Y, float(val), slack, gap, t)


def dro_value(utility, s, samples, eps, bounds, tol=TOL_DRO, max_iters=MAX_ITERS, init=None):
    """Worst-case expected utility over the ball of radius ``eps``.

    Parameters
    ----------
    utility : Utility
    s : Profile
    samples : (N, m) array
        Observations the agent reasons about.
    eps : float
    bounds : Box or (lower, upper)
        Known support of the observations.

    Returns
    -------
    value : float
    solution : ScenarioSolution
    """
    H = np.atleast_2d(np.asarray(samples, dtype=float))
    box = bounds if isinstance(bounds, Box) else Box(*bounds)
    if box.dim != H.shape[1]:
        raise ConfigurationError(f"support box has {box.dim} coordinates, samples have {H.shape[1]}")
    check_samples_in_box(H, box.lower, box.upper)
    if eps < 0:
        raise ConfigurationError("radius must be nonnegative")
    N = H.shape[0]
    if eps == 0 or not utility.depends_on_xi:
        vals = utility.values(s, H)
        val = float(np.sum(vals) / N)
        return val, ScenarioSolution(H.copy(), val, N * eps, 0.0, 0)

    def objective(Y):
        return float(np.sum(utility.values(s, Y)) / N), utility.grad_xi_batch(s, Y) / N

    sol = solve_scenarios(objective, H, N * eps, box.lower, box.upper, tol, max_iters, init)
    return sol.value, sol


def individual_dro_value(utility, s, agent_samples, eps, bounds, **kw):
    """Same program on the agent's own observations and coordinates."""
    return dro_value(utility, s, agent_samples, eps, bounds, **kw)


def dro_supergradient(utility, s, scen, agent=None):
    """Own-strategy gradient of ``U_i`` at the averaged worst-case scenario."""
    xi = scen.mean_scenario if utility.depends_on_xi else None
    if not utility.smooth_own:
        raise NonDifferentiableError(
            f"agent {utility.agent}: family {utility.family!r} is not differentiable in the own "
            "strategy; use own_supergradient at the minimizing scenario instead")
    return utility.grad_own(s, xi)


#%% min-norm selection

def min_norm_supergradient(superset, faces):
    """Supergradient element closest to the normal cone.

    Solves ``min |z - zeta|`` over ``zeta`` in the interval product and
    ``z`` in the box normal cone coordinatewise. Ties (an interval touching
    the cone in a segment) are broken toward the least-norm ``zeta``.

    Parameters
    ----------
    superset : IntervalSet
    faces : int array
        Active-face codes from ``Box.faces``.
    """
    if not isinstance(superset, IntervalSet):
        superset = IntervalSet.point(superset)
    faces = np.broadcast_to(np.asarray(faces, dtype=int), superset.lower.shape)
    l, u = superset.lower, superset.upper
    out = np.empty_like(l)
    for j, (lj, uj, f) in enumerate(zip(l, u, faces)):
        if f == 0:      # cone {0}: nearest point of the interval to 0
            out[j] = min(max(0.0, lj), uj)
        elif f == -1:   # cone (-inf, 0]: zero distance iff lj <= 0
            out[j] = lj if lj > 0 else min(uj, 0.0)
        elif f == 1:    # cone [0, inf)
            out[j] = uj if uj < 0 else max(lj, 0.0)
        elif f == 2:    # degenerate coordinate, cone is the whole line
            out[j] = min(max(0.0, lj), uj)
        else:
            raise ConfigurationError(f"unknown face code {f}")
    return out


def query_supergradient(game, i, s, xi=None):
    """Min-norm supergradient of agent i at ``s`` with its cone descriptor."""
    s = game.profile(s)
    faces = game.boxes[i].faces(s[i])
    v = min_norm_supergradient(game.supergradient(i, s, xi), faces)
    return SupergradientQuery(i, s, faces, v)


#%% oracles feeding the dynamics

class NominalOracle:
    """Min-norm supergradients of the game at fixed ``xi`` (or xi-free)."""

    def __init__(self, game, xi=None):
        self.game = game
        self.xi = list(xi) if isinstance(xi, (list, tuple)) else [xi] * game.n

    def agent(self, i, s):
        return query_supergradient(self.game, i, s, self.xi[i]).result

    def __call__(self, s):
        return [self.agent(i, s) for i in range(self.game.n)]


class DroOracle:
    """Supergradients of the robust game from each agent's scenario program.

    Parameters
    ----------
    game : Game
    samples : SampleSet
    radii : array_like
        Per-agent (already inflated) radii.
    bounds : list of Box
        Support box each agent's observations live in.
    warm_start : bool
        Reuse the previous scenarios as the next initial point.
    """

    def __init__(self, game, samples, radii, bounds, tol=TOL_DRO, max_iters=MAX_ITERS,
                 warm_start=True):
        self.game = game
        self.samples = samples
        self.radii = np.asarray(radii, dtype=float)
        self.bounds = list(bounds)
        self.tol = tol
        self.max_iters = max_iters
        self.warm_start = warm_start
        self.solutions = [None] * game.n

    def solve(self, i, s):
        init = self.solutions[i].scenarios if (self.warm_start and self.solutions[i] is not None) else None
        _, sol = dro_value(self.game.utilities[i], s, self.samples.for_agent(i), self.radii[i],
                           self.bounds[i], self.tol, self.max_iters, init)
        return sol

    def agent(self, i, s):
        s = self.game.profile(s)
        u = self.game.utilities[i]
        if not u.depends_on_xi:
            return query_supergradient(self.game, i, s).result
        sol = self.solve(i, s)
        self.solutions[i] = sol
        g = dro_supergradient(u, s, sol, i)
        return min_norm_supergradient(IntervalSet.point(g), self.game.boxes[i].faces(s[i]))

    def __call__(self, s):
        return [self.agent(i, s) for i in range(self.game.n)]

    def value(self, i, s):
        s = as_profile(s, self.game.dims)
        return dro_value(self.game.utilities[i], s, self.samples.for_agent(i), self.radii[i],
                         self.bounds[i], self.tol, self.max_iters)[0]
