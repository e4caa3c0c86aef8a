"""Samples, empirical distributions and Wasserstein ambiguity radii."""

import csv
from dataclasses import dataclass
from math import log

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigurationError, ParameterError, SampleOutsideBoxError
from .game import Box

MAX_ATOMS = 64


#%% containers

@dataclass(frozen=True)
class SampleSet:
    """Observed samples in shared or individual mode.

    Shared mode: ``samples`` is an (N, m) array and ``partition`` assigns
    each agent a contiguous half-open coordinate range ``(p, q)``.
    Individual mode: ``samples`` is a list with agent i's (N_i, m_i) array.
    """

    samples: object
    mode: str = "shared"
    partition: tuple = ()

    def __post_init__(self):
        if self.mode == "shared":
            arr = np.atleast_2d(np.asarray(self.samples, dtype=float))
            if arr.size == 0:
                raise ConfigurationError("empty sample set")
            object.__setattr__(self, "samples", arr)
            if self.partition:
                ranges = [tuple(int(v) for v in r) for r in self.partition]
                cursor = 0
                for p, q in ranges:
                    if p != cursor or q <= p:
                        raise ConfigurationError(f"index ranges {ranges} do not partition 0..{arr.shape[1]}")
                    cursor = q
                if cursor != arr.shape[1]:
                    raise ConfigurationError(f"index ranges {ranges} do not partition 0..{arr.shape[1]}")
                object.__setattr__(self, "partition", tuple(ranges))
        elif self.mode == "individual":
            arrs = tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in self.samples)
            if not arrs or any(a.size == 0 for a in arrs):
                raise ConfigurationError("empty sample set")
            object.__setattr__(self, "samples", arrs)
        else:
            raise ConfigurationError(f"unknown sample mode {self.mode!r}")

    @property
    def m(self):
        if self.mode == "shared":
            return self.samples.shape[1]
        return sum(a.shape[1] for a in self.samples)

    def count(self, agent=None):
        if self.mode == "shared":
            return self.samples.shape[0]
        return self.samples[agent].shape[0]

    def for_agent(self, i):
        """Samples agent i reasons about: all of them (shared) or its own (individual)."""
        return self.samples if self.mode == "shared" else self.samples[i]

    def owned_slice(self, i):
        if self.mode != "shared" or not self.partition:
            raise ConfigurationError(f"no index range declared for agent {i}")
        if i >= len(self.partition):
            raise ConfigurationError(f"no index range declared for agent {i}")
        p, q = self.partition[i]
        return slice(p, q)


@dataclass(frozen=True)
class AmbiguitySpec:
    """Radius inputs for each agent's Wasserstein ball."""

    theta: tuple = ()
    eps: tuple = ()
    C: float = 0.0
    lower: np.ndarray = None
    upper: np.ndarray = None
    c1: float = 1.0
    c2: float = 1.0
    a: float = 2.0

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0 or self.a <= 1:
            raise ParameterError("concentration constants need c1, c2 > 0 and a > 1")
        if any(not 0 < t < 1 for t in self.theta):
            raise ParameterError("confidence levels must lie in (0, 1)")
        if any(e < 0 for e in self.eps):
            raise ParameterError("radii must be nonnegative")
        if self.C < 0:
            raise ParameterError("inflation must be nonnegative")
        if self.lower is not None:
            Box(self.lower, self.upper)

    def radii(self, counts, dims):
        """Per-agent inflated radius, explicit or from the concentration formula."""
        if self.eps:
            base = list(self.eps)
        else:
            base = [wasserstein_radius(N, m, t, self.c1, self.c2, self.a)
                    for N, m, t in zip(counts, dims, self.theta)]
        return np.array([inflate_radius(e, self.C) for e in base])


@dataclass(frozen=True)
class DiscreteDistribution:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        if atoms.ndim == 2 and atoms.shape[0] == 1 and np.ndim(self.atoms) == 1:
            atoms = atoms.T
        w = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != w.size:
            raise ParameterError("one weight per atom required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)


#%% radii

def wasserstein_radius(N, m, theta, c1=1.0, c2=1.0, a=2.0):
    """Radius of the ball containing the true law with confidence ``1 - theta``."""
    if not 0 < theta < 1:
        raise ParameterError(f"theta must lie in (0, 1), got {theta}")
    if N < 1 or m < 1:
        raise ParameterError("N and m must be positive")
    if c1 <= 0 or c2 <= 0 or a <= 1:
        raise ParameterError("need c1, c2 > 0 and a > 1")
    num = log(c1 / theta)
    if num <= 0:
        raise ParameterError("log(c1/theta) must be positive; raise c1 or lower theta")
    ratio = num / (c2 * N)
    expo = 1.0 / max(m, 2) if N >= num / c2 else 1.0 / a
    return ratio ** expo


def inflate_radius(eps, C):
    if eps < 0 or C < 0:
        raise ParameterError("radius and inflation must be nonnegative")
    return (C + 1.0) * eps


def eta_bound(eps, L, C=0.0):
    """Equilibrium-gap guarantee ``2 (C+1) max_i eps_i L_i``."""
    eps = np.asarray(eps, dtype=float).ravel()
    L = np.asarray(L, dtype=float).ravel()
    if eps.size == 0 or L.size == 0:
        raise ParameterError("at least one agent required")
    if eps.size != L.size:
        raise ParameterError("eps and L must have the same length")
    if np.any(eps < 0) or np.any(L < 0) or C < 0:
        raise ParameterError("inputs must be nonnegative")
    return float(2.0 * (C + 1.0) * np.max(eps * L))


#%% empirical distributions

def empirical_center(samples):
    """Uniform distribution on the observed rows (no deduplication)."""
    arr = samples.samples if isinstance(samples, SampleSet) and samples.mode == "shared" else samples
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] == 0:
        raise ConfigurationError("empty sample set")
    w = np.full(arr.shape[0], 1.0 / arr.shape[0])
    w /= w.sum()
    return DiscreteDistribution(arr, w)


def discrete_wasserstein(P, Q):
    """1-Wasserstein distance with l1 ground cost via the transportation LP."""
    if P.atoms.shape[1] != Q.atoms.shape[1]:
        raise ParameterError("atom dimensions differ")
    a, b = P.weights.size, Q.weights.size
    if a > MAX_ATOMS or b > MAX_ATOMS:
        raise ParameterError(f"transportation oracle limited to {MAX_ATOMS} atoms per side")
    cost = np.abs(P.atoms[:, None, :] - Q.atoms[None, :, :]).sum(axis=2)
    A_eq = np.vstack([np.kron(np.eye(a), np.ones(b)), np.kron(np.ones(a), np.eye(b))])
    b_eq = np.concatenate([P.weights, Q.weights])
    # default feasibility tolerances let the solver leave mass on near-zero-cost arcs
    res = linprog(cost.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise ParameterError(f"transportation LP failed: {res.message}")
    return float(max(res.fun, 0.0))


#%% io and checks

def check_samples_in_box(samples, lower, upper, tol=0.0):
    samples = np.atleast_2d(samples)
    bad = np.argwhere((samples < np.asarray(lower) - tol) | (samples > np.asarray(upper) + tol))
    if bad.size:
        k, l = bad[0]
        raise SampleOutsideBoxError(int(k), int(l), float(samples[k, l]),
                                    float(np.asarray(lower)[l]), float(np.asarray(upper)[l]))


def load_samples_csv(path):
    """Read a header row of component names then one sample per row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty sample file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigurationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ConfigurationError(f"{path}: no samples")
    return [h.strip() for h in header], np.array(rows)
