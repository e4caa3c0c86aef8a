"""Strategy sets, utility families and a brute-force eta-NE oracle.

Strategies are boxes. A profile is a tuple of per-agent vectors. Every
utility family exposes its value, an own-strategy supergradient set (a
product of intervals, which degenerates to a point where the family is
smooth) and, when it depends on the random variable, the gradient with
respect to that variable.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionError, ConfigurationError, EvaluationError,
                     NonDifferentiableError, UnsupportedFamilyError)

KINK_TOL = 1e-12


#%% strategy sets

@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ConfigurationError(f"box bounds must be 1-D of equal length, got {lo.shape} and {hi.shape}")
        if np.any(lo > hi):
            raise ConfigurationError("box lower bound exceeds upper bound")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size

    @property
    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def width(self):
        return self.upper - self.lower

    def max_abs(self):
        """Componentwise ``max |x|`` over the box."""
        return np.maximum(np.abs(self.lower), np.abs(self.upper))

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x):
        return project_box(x, self)

    def faces(self, x, tol=KINK_TOL):
        """Active-face code per coordinate.

        -1 lower face, +1 upper face, 0 interior, 2 degenerate (lower == upper).
        """
        x = np.asarray(x, dtype=float)
        at_lo = np.abs(x - self.lower) <= tol
        at_hi = np.abs(x - self.upper) <= tol
        code = np.zeros(self.dim, dtype=int)
        code[at_lo] = -1
        code[at_hi] = 1
        code[at_lo & at_hi] = 2
        return code

    def grid(self, points):
        """Tensor grid with ``points`` nodes per coordinate, shape (points**dim, dim)."""
        axes = [np.linspace(l, u, points) for l, u in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, rng, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.lower, self.upper, shape)


# the strategy-set name used throughout the docs
BoxStrategySet = Box


def project_box(x, box):
    """Componentwise clamp of ``x`` into ``box``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[-1] != box.dim:
        raise DimensionError(None, box.dim, x.shape[-1])
    return np.clip(x, box.lower, box.upper)


#%% profiles

@dataclass(frozen=True)
class Profile:
    """Per-agent strategy vectors; ``stacked`` concatenates them."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(np.atleast_1d(np.asarray(p, dtype=float)).copy() for p in self.parts)
        object.__setattr__(self, "parts", parts)

    @classmethod
    def from_stacked(cls, vec, dims):
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != sum(dims):
            raise DimensionError(None, sum(dims), vec.size)
        cuts = np.cumsum(dims)[:-1]
        return cls(tuple(np.split(vec, cuts)))

    @property
    def n(self):
        return len(self.parts)

    @property
    def dims(self):
        return tuple(p.size for p in self.parts)

    @property
    def stacked(self):
        return np.concatenate(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    def __len__(self):
        return len(self.parts)

    def with_agent(self, i, x):
        parts = list(self.parts)
        parts[i] = np.atleast_1d(np.asarray(x, dtype=float))
        return Profile(tuple(parts))


StrategyProfile = Profile


def as_profile(s, dims=None):
    """Coerce a profile, a sequence of per-agent values, or a stacked vector."""
    if isinstance(s, Profile):
        return s
    if dims is not None and np.ndim(s) == 1 and len(s) == sum(dims) and not _is_ragged(s):
        return Profile.from_stacked(s, dims)
    return Profile(tuple(s))


def _is_ragged(s):
    return any(np.ndim(x) > 0 for x in s)


#%% supergradient sets

@dataclass(frozen=True)
class IntervalSet:
    """Product of closed intervals; a point when ``lower == upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.size == 0:
            raise ConfigurationError("empty supergradient descriptor")
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ConfigurationError("malformed interval descriptor")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def point(cls, g):
        g = np.atleast_1d(np.asarray(g, dtype=float))
        return cls(g, g.copy())

    @property
    def dim(self):
        return self.lower.size

    @property
    def is_singleton(self):
        return bool(np.all(self.lower == self.upper))

    def contains(self, zeta, tol=0.0):
        zeta = np.asarray(zeta, dtype=float)
        return bool(np.all(zeta >= self.lower - tol) and np.all(zeta <= self.upper + tol))

    def sample(self, rng):
        return rng.uniform(self.lower, self.upper)

    def max_norm(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))


SupergradientSet = IntervalSet


#%% utility families

class Utility:
    """Base class for agent utilities ``U_i(s; xi)``.

    Subclasses implement ``value`` and ``supergradient``; families that
    depend on ``xi`` also implement ``grad_xi``. ``bounds`` returns the
    Lipschitz constant in ``xi`` (with respect to the l1 ground cost, i.e.
    a bound on the sup-norm of the xi-gradient) and a bound on the norm
    of every own-strategy supergradient.
    """

    family = "user-supplied"

    def __init__(self, agent):
        self.agent = int(agent)

    # -- evaluation
    def value(self, s, xi=None):
        raise NotImplementedError

    def values(self, s, XI):
        """Values at each row of ``XI``."""
        return np.array([self.value(s, xi) for xi in np.atleast_2d(XI)])

    def supergradient(self, s, xi=None):
        raise UnsupportedFamilyError(f"{type(self).__name__} has no supergradient oracle")

    def grad_own(self, s, xi=None):
        sg = self.supergradient(s, xi)
        if not sg.is_singleton:
            raise NonDifferentiableError(
                f"agent {self.agent}: utility not differentiable at this profile; "
                "use the supergradient set instead")
        return sg.lower.copy()

    def grad_xi(self, s, xi):
        raise UnsupportedFamilyError(f"{type(self).__name__} does not depend on xi")

    def grad_xi_batch(self, s, XI):
        return np.array([self.grad_xi(s, xi) for xi in np.atleast_2d(XI)])

    # -- declared constants
    def bounds(self, boxes, xi_box=None):
        """Return ``(L, B)``."""
        raise NotImplementedError

    def amicability(self, boxes):
        """Nominal amicability factor, or None when unknown.

        Coupled families have an unbounded ratio as the own displacement
        shrinks with the opponents' fixed, so the nominal value bounds it
        only for probes whose opponent displacement is no larger (in the
        sup norm) than the own one. Declare ``c`` when that is too weak.
        """
        return None

    @property
    def depends_on_xi(self):
        return False

    @property
    def smooth_own(self):
        return True

    def _scalar_parts(self, s):
        for j, p in enumerate(s.parts):
            if p.size != 1:
                raise DimensionError(j, 1, p.size)
        return np.array([p[0] for p in s.parts])


class WeightedAbsProduct(Utility):
    """``-w |s_i - c| prod_{j != i} s_j`` on scalar strategies."""

    family = "weighted-abs-product"

    def __init__(self, agent, target, weight=1.0):
        super().__init__(agent)
        self.target = float(target)
        self.weight = float(weight)

    def _parts(self, s):
        x = self._scalar_parts(s)
        others = self.weight * math.prod(v for k, v in enumerate(x) if k != self.agent)
        return x[self.agent] - self.target, others

    def value(self, s, xi=None):
        d, P = self._parts(s)
        return float(-abs(d) * P)

    def values(self, s, XI):
        return np.full(np.atleast_2d(XI).shape[0], self.value(s))

    def supergradient(self, s, xi=None):
        d, P = self._parts(s)
        if abs(d) <= KINK_TOL:
            return IntervalSet([-abs(P)], [abs(P)])
        return IntervalSet.point([-P if d > 0 else P])

    def bounds(self, boxes, xi_box=None):
        return 0.0, float(abs(self.weight) * _prod_max_abs(boxes, skip=(self.agent,)))

    def amicability(self, boxes):
        return _cross_partial_bound(self.weight, boxes, self.agent)

    @property
    def smooth_own(self):
        return False


class PureProduct(Utility):
    """``w prod_j s_j`` on scalar strategies (linear in the own strategy)."""

    family = "pure-product"

    def __init__(self, agent, weight=1.0):
        super().__init__(agent)
        self.weight = float(weight)

    def value(self, s, xi=None):
        return float(self.weight * np.prod(self._scalar_parts(s)))

    def values(self, s, XI):
        return np.full(np.atleast_2d(XI).shape[0], self.value(s))

    def supergradient(self, s, xi=None):
        x = self._scalar_parts(s)
        return IntervalSet.point([self.weight * np.prod(np.delete(x, self.agent))])

    def bounds(self, boxes, xi_box=None):
        return 0.0, float(abs(self.weight) * _prod_max_abs(boxes, skip=(self.agent,)))

    def amicability(self, boxes):
        return _cross_partial_bound(self.weight, boxes, self.agent)


class Quadratic(Utility):
    """Concave quadratic in the own strategy, affine in ``xi``.

    ``U = -a |s_i - r|^2 + sum_j b_ij <s_i, s_j> + <s_i, G xi> + <h, xi>``

    Without ``xi_gain``/``xi_offset`` the family is xi-free.
    """

    def __init__(self, agent, curvature=0.0, target=0.0, coupling=None,
                 xi_gain=None, xi_offset=None):
        super().__init__(agent)
        if curvature < 0:
            raise ConfigurationError(f"agent {agent}: curvature must be >= 0 for concavity")
        self.curvature = float(curvature)
        self.target = np.atleast_1d(np.asarray(target, dtype=float))
        self.coupling = {int(j): float(b) for j, b in (coupling or {}).items()}
        if self.agent in self.coupling:
            raise ConfigurationError(f"agent {agent}: self-coupling is folded into curvature")
        self.G = None if xi_gain is None else np.atleast_2d(np.asarray(xi_gain, dtype=float))
        self.h = None if xi_offset is None else np.atleast_1d(np.asarray(xi_offset, dtype=float))
        if self.G is not None and self.G.shape[0] != self.target.size:
            raise ConfigurationError(f"agent {agent}: xi_gain must have {self.target.size} rows")
        if self.G is not None and self.h is not None and self.G.shape[1] != self.h.size:
            raise ConfigurationError(f"agent {agent}: xi_gain and xi_offset disagree on xi length")

    @property
    def family(self):
        return "affine-in-xi" if self.depends_on_xi else "quadratic"

    @property
    def depends_on_xi(self):
        return self.G is not None or self.h is not None

    @property
    def xi_dim(self):
        if self.G is not None:
            return self.G.shape[1]
        return 0 if self.h is None else self.h.size

    def _own(self, s):
        x = s.parts[self.agent]
        if x.size != self.target.size:
            raise DimensionError(self.agent, self.target.size, x.size)
        return x

    def _xi(self, xi):
        if not self.depends_on_xi:
            return None
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.shape[-1] != self.xi_dim:
            raise DimensionError(self.agent, self.xi_dim, xi.shape[-1])
        return xi

    def _base(self, s):
        x = self._own(s)
        val = -self.curvature * float(np.sum((x - self.target) ** 2))
        for j, b in self.coupling.items():
            val += b * float(x @ s.parts[j])
        return val

    def _xi_coeff(self, s):
        x = self._own(s)
        c = np.zeros(self.xi_dim)
        if self.G is not None:
            c += self.G.T @ x
        if self.h is not None:
            c += self.h
        return c

    def value(self, s, xi=None):
        val = self._base(s)
        if self.depends_on_xi:
            val += float(self._xi_coeff(s) @ self._xi(xi))
        return val

    def values(self, s, XI):
        XI = np.atleast_2d(np.asarray(XI, dtype=float))
        base = self._base(s)
        if not self.depends_on_xi:
            return np.full(XI.shape[0], base)
        self._xi(XI[0])
        return base + XI @ self._xi_coeff(s)

    def supergradient(self, s, xi=None):
        x = self._own(s)
        g = -2.0 * self.curvature * (x - self.target)
        for j, b in self.coupling.items():
            g = g + b * s.parts[j]
        if self.G is not None:
            g = g + self.G @ self._xi(xi)
        return IntervalSet.point(g)

    def grad_xi(self, s, xi):
        if not self.depends_on_xi:
            return super().grad_xi(s, xi)
        self._xi(xi)
        return self._xi_coeff(s)

    def grad_xi_batch(self, s, XI):
        XI = np.atleast_2d(XI)
        return np.tile(self.grad_xi(s, XI[0]), (XI.shape[0], 1))

    def bounds(self, boxes, xi_box=None):
        own = boxes[self.agent]
        comp = 2.0 * self.curvature * np.maximum(np.abs(own.lower - self.target),
                                                 np.abs(own.upper - self.target))
        for j, b in self.coupling.items():
            comp = comp + abs(b) * boxes[j].max_abs()
        if self.G is not None:
            if xi_box is None:
                raise ConfigurationError(f"agent {self.agent}: xi support box needed to bound supergradients")
            comp = comp + np.abs(self.G) @ xi_box.max_abs()
        B = float(np.linalg.norm(comp))
        L = 0.0
        if self.depends_on_xi:
            # exact sup over the own box of |G^T x + h|_inf (linear in x, attained at vertices)
            G = self.G if self.G is not None else np.zeros((own.dim, self.xi_dim))
            h = self.h if self.h is not None else np.zeros(self.xi_dim)
            hi = h + np.maximum(G * own.lower[:, None], G * own.upper[:, None]).sum(axis=0)
            lo = h + np.minimum(G * own.lower[:, None], G * own.upper[:, None]).sum(axis=0)
            L = float(np.max(np.maximum(np.abs(hi), np.abs(lo))))
        return L, B

    def amicability(self, boxes):
        return 2.0 * self.curvature + sum(abs(b) for b in self.coupling.values())


class UserUtility(Utility):
    """Callback-backed family; constants must be declared by the caller."""

    family = "user-supplied"

    def __init__(self, agent, value_fn, supergradient_fn, lipschitz, supergrad_bound,
                 grad_xi_fn=None, amicability=None, smooth=True):
        super().__init__(agent)
        if supergradient_fn is None:
            raise ConfigurationError("user-supplied utilities must provide a supergradient callback")
        self._value = value_fn
        self._sg = supergradient_fn
        self._gxi = grad_xi_fn
        self._L = float(lipschitz)
        self._B = float(supergrad_bound)
        self._c = amicability
        self._smooth = smooth

    def value(self, s, xi=None):
        return float(self._value(s, xi))

    def supergradient(self, s, xi=None):
        out = self._sg(s, xi)
        return out if isinstance(out, IntervalSet) else IntervalSet.point(out)

    def grad_xi(self, s, xi):
        if self._gxi is None:
            return super().grad_xi(s, xi)
        return np.atleast_1d(np.asarray(self._gxi(s, xi), dtype=float))

    @property
    def depends_on_xi(self):
        return self._gxi is not None

    @property
    def smooth_own(self):
        return self._smooth

    def bounds(self, boxes, xi_box=None):
        return self._L, self._B

    def amicability(self, boxes):
        return self._c


def _prod_max_abs(boxes, skip=()):
    out = 1.0
    for j, b in enumerate(boxes):
        if j not in skip:
            out *= float(b.max_abs()[0])
    return out


def _cross_partial_bound(weight, boxes, agent):
    # sum over opponents of sup |d zeta_i / d s_j| on the box
    return float(sum(abs(weight) * _prod_max_abs(boxes, skip=(agent, j))
                     for j in range(len(boxes)) if j != agent))


#%% game

class Game:
    """Box-constrained continuous game.

    Parameters
    ----------
    boxes : list of Box
        Strategy set of each agent.
    utilities : list of Utility
        ``utilities[i].agent`` must equal ``i``.
    xi_box : Box or list of Box, optional
        Support of the random variable each agent's utility receives (one
        box shared by all agents, or one per agent when each agent only
        sees its own block).
    lipschitz, supergrad_bounds : array_like, optional
        Overrides of the per-family constants.
    concavity_probes : int
        Random midpoint-concavity checks per agent at construction.
    """

    def __init__(self, boxes, utilities, xi_box=None, lipschitz=None,
                 supergrad_bounds=None, concavity_probes=32, seed=0):
        if len(boxes) != len(utilities):
            raise ConfigurationError("one utility per agent required")
        if not boxes:
            raise ConfigurationError("a game needs at least one agent")
        self.boxes = [b if isinstance(b, Box) else Box(*b) for b in boxes]
        self.utilities = list(utilities)
        if xi_box is None or isinstance(xi_box, Box):
            self.xi_boxes = [xi_box] * len(boxes)
        else:
            self.xi_boxes = list(xi_box)
            if len(self.xi_boxes) != len(boxes):
                raise ConfigurationError("one xi support box per agent required")
        for i, u in enumerate(self.utilities):
            if u.agent != i:
                raise ConfigurationError(f"utility at position {i} is bound to agent {u.agent}")
            if isinstance(u, (WeightedAbsProduct, PureProduct)) and self.boxes[i].dim != 1:
                raise ConfigurationError(f"agent {i}: product families need scalar strategies")
            if isinstance(u, WeightedAbsProduct):
                others = [b for j, b in enumerate(self.boxes) if j != i]
                if any(b.lower[0] < 0 for b in others):
                    raise ConfigurationError(
                        f"agent {i}: weighted-abs-product is concave only on nonnegative opponent boxes")
            if isinstance(u, Quadratic) and u.target.size != self.boxes[i].dim:
                if u.target.size == 1:
                    u.target = np.full(self.boxes[i].dim, u.target[0])
                else:
                    raise DimensionError(i, self.boxes[i].dim, u.target.size)
        consts = [u.bounds(self.boxes, xb) for u, xb in zip(self.utilities, self.xi_boxes)]
        self.lipschitz = np.array([c[0] for c in consts]) if lipschitz is None \
            else np.asarray(lipschitz, dtype=float)
        self.supergrad_bounds = np.array([c[1] for c in consts]) if supergrad_bounds is None \
            else np.asarray(supergrad_bounds, dtype=float)
        if concavity_probes:
            bad = concavity_violations(self, np.random.default_rng(seed), concavity_probes)
            if bad:
                raise ConfigurationError(f"utility not concave in own strategy for agents {sorted(set(bad))}")

    @property
    def n(self):
        return len(self.boxes)

    @property
    def dims(self):
        return tuple(b.dim for b in self.boxes)

    @property
    def diameters(self):
        return np.array([b.diameter for b in self.boxes])

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.dims)])

    def stacked_box(self):
        return Box(np.concatenate([b.lower for b in self.boxes]),
                   np.concatenate([b.upper for b in self.boxes]))

    def profile(self, s):
        if isinstance(s, Profile) and s.dims == self.dims:
            return s
        p = as_profile(s, self.dims)
        if p.n != self.n:
            raise DimensionError(None, self.n, p.n)
        for i, (x, b) in enumerate(zip(p.parts, self.boxes)):
            if x.size != b.dim:
                raise DimensionError(i, b.dim, x.size)
        return p

    def project(self, s):
        p = self.profile(s)
        return Profile(tuple(project_box(x, b) for x, b in zip(p.parts, self.boxes)))

    def contains(self, s, tol=0.0):
        p = self.profile(s)
        return all(b.contains(x, tol) for x, b in zip(p.parts, self.boxes))

    def utility(self, i, s, xi=None):
        return utility_eval(self.utilities[i], self.profile(s), xi)

    def supergradient(self, i, s, xi=None):
        return own_supergradient(self.utilities[i], self.profile(s), xi)

    def amicability(self):
        """Closed-form amicability factors (NaN where unknown)."""
        return np.array([np.nan if (c := u.amicability(self.boxes)) is None else c
                         for u in self.utilities])

    def sample_profile(self, rng):
        return Profile(tuple(b.sample(rng) for b in self.boxes))


def utility_eval(utility, s, xi=None):
    """``U_i(s; xi)`` for one agent's utility."""
    return utility.value(s, xi)


def own_supergradient(utility, s, xi=None):
    """Supergradient set of ``U_i`` in the own strategy at ``s``."""
    return utility.supergradient(s, xi)


def concavity_violations(game, rng, probes=32, tol=1e-9):
    """Agents failing random midpoint-concavity checks."""
    bad = []
    for i, u in enumerate(game.utilities):
        for _ in range(probes):
            s = game.sample_profile(rng)
            xi = None
            if u.depends_on_xi:
                if game.xi_boxes[i] is None:
                    break
                xi = game.xi_boxes[i].sample(rng)
            x, y = game.boxes[i].sample(rng), game.boxes[i].sample(rng)
            lam = rng.uniform()
            mid = u.value(s.with_agent(i, lam * x + (1 - lam) * y), xi)
            ends = lam * u.value(s.with_agent(i, x), xi) + (1 - lam) * u.value(s.with_agent(i, y), xi)
            if mid < ends - tol * max(1.0, abs(ends)):
                bad.append(i)
                break
    return bad


#%% eta-NE oracle

def eta_ne_residual(evaluator, s, boxes, grid_points_per_dim=201):
    """Largest unilateral gain of each agent over a uniform grid.

    Parameters
    ----------
    evaluator : callable
        ``evaluator(i, profile) -> float``.
    s : Profile
    boxes : list of Box
    grid_points_per_dim : int

    Returns
    -------
    ndarray
        Per-agent residual ``max_grid U_i(x, s_-i) - U_i(s)``, floored at 0.
    """
    if grid_points_per_dim < 2:
        raise ValueError("grid_points_per_dim must be at least 2")
    s = as_profile(s)
    out = np.zeros(len(boxes))
    for i, box in enumerate(boxes):
        try:
            base = evaluator(i, s)
            best = max(evaluator(i, s.with_agent(i, x)) for x in box.grid(grid_points_per_dim))
        except Exception as exc:  # propagate with the agent index attached
            raise EvaluationError(i, exc) from exc
        out[i] = max(0.0, best - base)
    return out
