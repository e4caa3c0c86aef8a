"""Directed communication graphs and dynamic average consensus.

Node i keeps ``(x_i, v_i, z_i)`` per tracked scalar and injects a local
reference ``u_i``. One sub-step reads

    v+ = v + b1 b2 b3 (L x)
    z+ = (1 - b1 b2) z - b1 v - b1 b3 (L x)
    x+ = z+ + u

where ``(L x)_i = sum_j a_ij (x_i - x_j)``. On a weight-balanced,
strongly connected digraph ``sum_i v_i`` is conserved, so with ``v(0) = 0``
the node states track the average of the references.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError

BALANCE_TOL = 1e-12
DIVERGENCE_NORM = 1e9


#%% graphs

class Digraph:
    """Weighted digraph with ``a_ij > 0`` iff node i hears node j.

    Parameters
    ----------
    adjacency : (n, n) array_like
    require_balanced : bool
        Reject graphs whose weighted in- and out-degrees differ.
    """

    def __init__(self, adjacency, require_balanced=True):
        A = np.asarray(adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigurationError("adjacency must be square")
        if np.any(A < 0):
            raise ConfigurationError("edge weights must be nonnegative")
        if np.any(np.diag(A) != 0):
            raise ConfigurationError("self-loops are not allowed")
        self.A = A
        self.n = A.shape[0]
        if not self.is_strongly_connected():
            raise ConfigurationError("graph is not strongly connected")
        if require_balanced and not self.is_balanced():
            raise ConfigurationError(
                f"graph is not weight-balanced: in-degrees {self.A.sum(1)} vs out-degrees {self.A.sum(0)}")

    @classmethod
    def from_edges(cls, n, edges, **kw):
        """Edges ``(j, i, w)`` meaning j sends to i (0-indexed)."""
        A = np.zeros((n, n))
        for j, i, w in edges:
            A[i, j] = w
        return cls(A, **kw)

    @classmethod
    def from_file(cls, path, n=None, **kw):
        """Edge list ``i j a_ij`` (1-indexed), i sending to j."""
        edges = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) not in (2, 3):
                    raise ConfigurationError(f"{path}:{lineno}: expected 'i j [weight]'")
                try:
                    i, j = int(parts[0]), int(parts[1])
                    w = float(parts[2]) if len(parts) == 3 else 1.0
                except ValueError:
                    raise ConfigurationError(f"{path}:{lineno}: malformed edge {line!r}") from None
                if i < 1 or j < 1:
                    raise ConfigurationError(f"{path}:{lineno}: node ids are 1-indexed")
                edges.append((i - 1, j - 1, w))
        size = n if n is not None else max(max(e[0], e[1]) for e in edges) + 1
        return cls.from_edges(size, edges, **kw)

    @classmethod
    def cycle(cls, n):
        """Directed ring 1 -> 2 -> ... -> n -> 1 with unit weights."""
        if n == 1:
            return cls(np.zeros((1, 1)))
        return cls.from_edges(n, [(k, (k + 1) % n, 1.0) for k in range(n)])

    @classmethod
    def complete(cls, n):
        return cls(np.ones((n, n)) - np.eye(n))

    @classmethod
    def line(cls, n):
        """Undirected path (both arc directions present)."""
        edges = [(k, k + 1, 1.0) for k in range(n - 1)] + [(k + 1, k, 1.0) for k in range(n - 1)]
        return cls.from_edges(n, edges)

    @property
    def laplacian(self):
        return np.diag(self.A.sum(axis=1)) - self.A

    def in_neighbors(self, i):
        return np.flatnonzero(self.A[i]).tolist()

    def is_balanced(self, tol=BALANCE_TOL):
        return bool(np.all(np.abs(self.A.sum(axis=1) - self.A.sum(axis=0)) <= tol))

    def is_strongly_connected(self):
        # forward and reverse reachability from node 0
        return self._reach(self.A.T) and self._reach(self.A)

    def _reach(self, M):
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            k = queue.popleft()
            for j in np.flatnonzero(M[k]):
                if not seen[j]:
                    seen[j] = True
                    queue.append(j)
        return bool(seen.all())

    def permuted(self, perm):
        P = np.asarray(perm)
        return Digraph(self.A[np.ix_(P, P)])


#%% consensus

@dataclass(frozen=True)
class ConsensusGains:
    b1: float = 0.5
    b2: float = 0.5
    b3: float = 1.0

    def __post_init__(self):
        if min(self.b1, self.b2, self.b3) <= 0:
            raise ConfigurationError("consensus gains must be positive")


def substep_matrix(graph, gains):
    """Linear map of one sub-step on ``(v, z)`` with zero input."""
    n = graph.n
    L = graph.laplacian
    b1, b2, b3 = gains.b1, gains.b2, gains.b3
    I = np.eye(n)
    # x = z + u and L u only shifts the fixed point, so the homogeneous part acts on (v, z)
    return np.block([[I, b1 * b2 * b3 * L],
                     [-b1 * I, (1 - b1 * b2) * I - b1 * b3 * L]])


def stability_radius(graph, gains):
    """Spectral radius of the sub-step map with the conserved mode removed."""
    ev = np.linalg.eigvals(substep_matrix(graph, gains))
    drop = int(np.argmin(np.abs(ev - 1.0)))
    rest = np.delete(ev, drop)
    return float(np.max(np.abs(rest))) if rest.size else 0.0


class ConsensusState:
    """Node states for ``width`` parallel scalar instances.

    Arrays have shape (n, width); column c is an independent instance.
    """

    def __init__(self, graph, gains=ConsensusGains(), width=1, x0=None, u0=None, check=True):
        self.graph = graph
        self.gains = gains
        self.L = graph.laplacian
        if check and graph.n > 1:
            r = stability_radius(graph, gains)
            if not r < 1:
                raise ConfigurationError(f"consensus gains unstable on this graph (spectral radius {r:.4f})")
        u0 = np.zeros((graph.n, width)) if u0 is None else np.asarray(u0, dtype=float).reshape(graph.n, width)
        x0 = u0.copy() if x0 is None else np.asarray(x0, dtype=float).reshape(graph.n, width)
        self.u = u0.copy()
        self.x = x0.copy()
        self.z = self.x - self.u
        self.v = np.zeros_like(self.x)

    @property
    def width(self):
        return self.x.shape[1]

    def step(self, u):
        """Advance one sub-step with reference ``u`` (shape (n, width))."""
        b1, b2, b3 = self.gains.b1, self.gains.b2, self.gains.b3
        Lx = self.L @ self.x
        v_new = self.v + b1 * b2 * b3 * Lx
        self.z = (1 - b1 * b2) * self.z - b1 * self.v - b1 * b3 * Lx
        self.v = v_new
        self.u = np.asarray(u, dtype=float).reshape(self.x.shape)
        self.x = self.z + self.u
        if not np.all(np.isfinite(self.x)) or np.abs(self.x).max() > DIVERGENCE_NORM:
            raise DivergenceError(f"consensus state exceeded {DIVERGENCE_NORM:g}")
        return self

    def rebase(self, u):
        """Swap in a new reference without a sub-step (keeps ``x = z + u``)."""
        self.u = np.asarray(u, dtype=float).reshape(self.x.shape)
        self.x = self.z + self.u
        return self


def consensus_substep(state, u):
    """Functional form of one sub-step; returns ``state`` after updating."""
    return state.step(u)


def tracking_error(x, u):
    """``max_i |x_i - mean(u)|`` (columnwise for parallel instances)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return float(np.max(np.abs(x - u.mean(axis=0))))


def scaled_input_for_owner(n, s_component):
    """Reference injected by the owner so the network average is ``s_component``."""
    return n * s_component
