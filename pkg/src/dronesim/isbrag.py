"""Centralized inertial supported better-response dynamics.

Each agent mixes its current strategy with the maximizer of a linear
functional over its box. The functional is a scaled supergradient plus
an inertial pull toward the previous strategy.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .game import Profile, as_profile


#%% parameters

@dataclass(frozen=True)
class AlgoParams:
    """Per-agent step ``alpha``, gain ``mu``, inertia ``lam``, scale ``kappa``,
    amicability factor ``c`` and locality radius ``d``."""

    alpha: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    kappa: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(getattr(self, k), dtype=float))
                for k in ("alpha", "mu", "lam", "kappa", "c", "d")]
        n = max(a.size for a in arrs)
        for k, a in zip(("alpha", "mu", "lam", "kappa", "c", "d"), arrs):
            if a.size not in (1, n):
                raise ParameterError(f"{k} has {a.size} entries, expected 1 or {n}")
            a = np.broadcast_to(a, (n,)).copy()
            a.flags.writeable = False
            object.__setattr__(self, k, a)

    @classmethod
    def uniform(cls, n, alpha, mu, lam, kappa=2.0, c=0.0, d=np.inf):
        return cls(*(np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in (alpha, mu, lam, kappa, c, d)))

    @property
    def n(self):
        return self.alpha.size

    @property
    def alpha_bar(self):
        return float(self.alpha.max())

    @property
    def alpha_under(self):
        return float(self.alpha.min())

    @property
    def mu_bar(self):
        return float(self.mu.max())

    def replace(self, **kw):
        vals = {k: getattr(self, k) for k in ("alpha", "mu", "lam", "kappa", "c", "d")}
        vals.update(kw)
        return AlgoParams(**vals)


@dataclass(frozen=True)
class Violation:
    agent: int
    name: str
    value: float
    interval: tuple
    rule: str

    def __str__(self):
        lo, hi = self.interval
        return f"agent {self.agent}: {self.name}={self.value:g} violates {self.rule}; admissible ({lo:g}, {hi:g})"


@dataclass(frozen=True)
class ValidityReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def summary(self):
        return "valid" if self.ok else "; ".join(str(v) for v in self.violations)


def validate_params(params, diameters):
    """Check the step-size and inertia conditions of the convergence result.

    Returns a report listing every violated inequality with the admissible
    interval; never raises.
    """
    D = np.broadcast_to(np.asarray(diameters, dtype=float), (params.n,))
    out = []
    d_min = float(params.d.min())
    for i in range(params.n):
        a, mu, lam, k, c, d = (params.alpha[i], params.mu[i], params.lam[i],
                               params.kappa[i], params.c[i], params.d[i])
        if not d > 0:
            out.append(Violation(i, "d", d, (0, np.inf), "locality radius must be positive"))
        if not mu > 0:
            out.append(Violation(i, "mu", mu, (0, np.inf), "gain must be positive"))
        if not k > 1:
            out.append(Violation(i, "kappa", k, (1, np.inf), "scale factor must exceed 1"))
        a_max = min(d_min / D[i], 0.5)
        if not 0 < a <= a_max:
            rule = "step-size bound alpha <= 1/2" if a_max == 0.5 else "step-size bound alpha <= d_min/D_i"
            out.append(Violation(i, "alpha", a, (0, a_max), rule))
        if mu > 0 and k > 1:
            if c > 0:
                lo, hi = 1.0 / (k * mu * c), 1.0 / (mu * c)
            else:
                lo, hi = 1.0 / (k * mu), np.inf
            if not lo < lam < hi:
                out.append(Violation(i, "lam", lam, (lo, hi), "inertia bound"))
    return ValidityReport(tuple(out))


#%% building blocks

def support_argmax(phi, box):
    """Box vertex maximizing ``<x, phi>``; zero components pick the lower bound."""
    phi = np.asarray(phi, dtype=float)
    return np.where(phi > 0, box.upper, box.lower)


def compose_phi(v, s, s_prev, mu, lam):
    """``mu v - (s - s_prev) / lam``."""
    return mu * np.asarray(v, dtype=float) - (np.asarray(s, dtype=float) - np.asarray(s_prev, dtype=float)) / lam


def lyapunov_value(s, phi, boxes):
    """``sum_i max_{x in S_i} <x - s_i, phi_i>``; nonnegative."""
    s = as_profile(s, tuple(b.dim for b in boxes))
    phis = phi if isinstance(phi, (list, tuple)) else Profile.from_stacked(phi, tuple(b.dim for b in boxes)).parts
    return float(sum(lyapunov_term(s[i], phis[i], b) for i, b in enumerate(boxes)))


def lyapunov_term(s_i, phi_i, box):
    return max(float((support_argmax(phi_i, box) - s_i) @ phi_i), 0.0)


#%% state and stepping

@dataclass(frozen=True)
class IsbragState:
    s: Profile
    p: Profile
    phi: tuple = None
    t: int = 0

    @classmethod
    def initial(cls, s0):
        s0 = as_profile(s0)
        return cls(s0, s0, None, 0)


def isbrag_step(state, oracle, params, boxes):
    """One synchronous update of every agent.

    ``oracle(s)`` returns the per-agent min-norm supergradients at ``s``. If
    it raises, the exception propagates and ``state`` is untouched.
    """
    v = oracle(state.s)
    phi = tuple(compose_phi(v[i], state.s[i], state.p[i], params.mu[i], params.lam[i])
                for i in range(len(boxes)))
    new = tuple(np.clip((1 - params.alpha[i]) * state.s[i] + params.alpha[i] * support_argmax(phi[i], b),
                        b.lower, b.upper)
                for i, b in enumerate(boxes))
    return IsbragState(Profile(new), state.s, phi, state.t + 1)


def phi_at(state, oracle, params):
    """phi evaluated at the current state without stepping."""
    v = oracle(state.s)
    return tuple(compose_phi(v[i], state.s[i], state.p[i], params.mu[i], params.lam[i])
                 for i in range(len(v)))


#%% bounds

def rho1(x, y):
    return x - x * x + y


def rho2(A, B, alpha_bar, mu_bar):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return float(np.max(A - B) * alpha_bar * mu_bar + np.max(A) * mu_bar)


@dataclass(frozen=True)
class ConvergenceBound:
    A: np.ndarray
    K_i: np.ndarray
    K: float
    J: float
    rho1: float
    rho2: float
    M: float
    alpha_under: float

    @property
    def ceiling(self):
        """Ultimate bound on V for the exact dynamics."""
        return self.K * self.rho1 / (self.M * self.alpha_under)

    @property
    def ceiling_distributed(self):
        return (self.K * self.rho1 + self.J * self.rho2) / (self.M * self.alpha_under)

    def increment_bound(self, V, disturbance=0.0):
        """Right side of the one-step Lyapunov inequality."""
        return -self.alpha_under * V + self.K * self.rho1 + self.rho2 * disturbance


def bound_constants(params, B, D, Dbar=None, M=0.5, J=None, boxes=None):
    """Constants entering the ultimate bounds.

    Parameters
    ----------
    params : AlgoParams
    B, D : array_like
        Supergradient bounds and box diameters.
    Dbar : array_like, optional
        Constants of the change-of-max inequality; default ``D``.
    M : float
        Fraction in (0, 1) used to turn the decrease condition into a ceiling.
    J : float, optional
        Bound on the norm of any stacked strategy; computed from ``boxes``
        when omitted.
    """
    n = params.n
    B = np.broadcast_to(np.asarray(B, dtype=float), (n,))
    D = np.broadcast_to(np.asarray(D, dtype=float), (n,))
    Dbar = D if Dbar is None else np.broadcast_to(np.asarray(Dbar, dtype=float), (n,))
    if not 0 < M < 1:
        raise ParameterError("M must lie in (0, 1)")
    c_tilde = np.where(params.c > 0, params.c, 1.0)
    A = 2 * B + D * params.kappa * c_tilde
    K_i = np.maximum(D ** 2 / params.lam, A * Dbar)
    K = n * float(K_i.max())
    if J is None:
        if boxes is None:
            raise ParameterError("either J or boxes is required")
        J = float(np.linalg.norm(np.concatenate([b.max_abs() for b in boxes])))
    return ConvergenceBound(A, K_i, K, float(J), rho1(params.alpha_bar, params.mu_bar),
                            rho2(A, B, params.alpha_bar, params.mu_bar), M, params.alpha_under)


#%% amicability probe

def estimate_amicability(game, oracle, s, agent, radius, num_probes, rng):
    """Largest observed amicability ratio around ``s`` (a lower estimate of c_i).

    ``oracle(i, profile)`` returns the supergradient selection used for
    agent ``i``. Probes are drawn in the box intersected with the ball of
    ``radius`` around ``s``; probes with no own displacement are skipped.
    """
    s = game.profile(s)
    i = agent
    z1 = oracle(i, s)
    best = -np.inf
    x = s.stacked
    lo = game.stacked_box().lower
    hi = game.stacked_box().upper
    for _ in range(num_probes):
        step = rng.normal(size=x.size)
        step *= radius * rng.uniform() ** (1.0 / x.size) / max(np.linalg.norm(step), 1e-300)
        sbar = game.profile(np.clip(x + step, lo, hi))
        di = sbar[i] - s[i]
        nrm = float(di @ di)
        if nrm == 0:
            continue
        z2 = oracle(i, sbar.with_agent(i, s[i]))
        z3 = oracle(i, s.with_agent(i, sbar[i]))
        best = max(best, (float((z2 - z1) @ di) - float((z3 - z1) @ di)) / nrm)
    return float(best)


#%% trajectories

@dataclass
class Trajectory:
    """Iterates, Lyapunov values and per-step diagnostics of one run."""

    S: np.ndarray
    V: np.ndarray
    phi_norm: np.ndarray
    lyap_margin: np.ndarray
    bound: ConvergenceBound = None
    extra: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return self.S.shape[0] - 1


def run_isbrag(game, oracle, params, s0, horizon, bound=None, hook=None):
    """Iterate the dynamics for ``horizon`` steps.

    ``lyap_margin[t]`` is the bound minus the realized increment of V
    between steps t and t+1 (negative means the inequality failed).
    """
    state = IsbragState.initial(game.project(s0))
    S = np.empty((horizon + 1, sum(game.dims)))
    V = np.empty(horizon + 1)
    phin = np.empty((horizon + 1, game.n))
    for t in range(horizon + 1):
        phi = phi_at(state, oracle, params)
        S[t] = state.s.stacked
        V[t] = lyapunov_value(state.s, list(phi), game.boxes)
        phin[t] = [np.linalg.norm(p) for p in phi]
        if hook is not None:
            hook(t, state.s, V[t], {"phi_norm": phin[t]})
        if t == horizon:
            break
        new = tuple(np.clip((1 - params.alpha[i]) * state.s[i] + params.alpha[i] * support_argmax(phi[i], b),
                            b.lower, b.upper)
                    for i, b in enumerate(game.boxes))
        state = IsbragState(Profile(new), state.s, phi, t + 1)
    margin = np.full(horizon, np.nan)
    if bound is not None and horizon > 0:
        margin = bound.increment_bound(V[:-1]) - np.diff(V)
    return Trajectory(S, V, phin, margin, bound)
