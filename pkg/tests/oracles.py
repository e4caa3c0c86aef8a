"""Independent reference computations shared by the test modules."""

import numpy as np

from dronesim.game import Box
from dronesim.isbrag import support_argmax

BOX_TYPES = {
    "scalar": Box(0.0, 2.0),
    "cube": Box([-1.0, 0.0, 0.5], [1.0, 2.0, 3.0]),
    "degenerate": Box([0.0, 1.0], [2.0, 1.0]),
    "negative": Box([-3.0, -2.0], [-1.0, -0.5]),
}


def change_of_max_violations(box, rng, draws=1000, scale=3.0):
    """Count draws where f(p2) > f(p1) + <x*, p2 - p1> + D |p2 - p1|."""
    D = box.diameter
    bad = 0
    for _ in range(draws):
        p1, p2 = rng.normal(0, scale, box.dim), rng.normal(0, scale, box.dim)
        x1 = support_argmax(p1, box)
        lhs = support_argmax(p2, box) @ p2
        if lhs > x1 @ p1 + x1 @ (p2 - p1) + D * np.linalg.norm(p2 - p1) + 1e-12:
            bad += 1
    return bad


def cone_distance(zeta, face):
    if face == 0:
        return np.abs(zeta)
    if face == -1:
        return np.maximum(zeta, 0.0)
    if face == 1:
        return np.maximum(-zeta, 0.0)
    return np.zeros_like(zeta)


def min_norm_grid(lo, hi, face, levels=6, points=401):
    """Zooming grid search for the least-norm minimizer of the cone distance."""
    a, b = lo, hi
    best = lo
    for _ in range(levels):
        z = np.linspace(a, b, points)
        d = cone_distance(z, face)
        tie = np.flatnonzero(d <= d.min() + 1e-13)
        best = z[tie[np.argmin(np.abs(z[tie]))]]
        h = (b - a) / (points - 1)
        a, b = max(lo, best - 2 * h), min(hi, best + 2 * h)
    return best


def random_min_norm_instance(rng):
    dim = rng.integers(1, 4)
    lo = rng.uniform(-3, 3, dim)
    hi = lo + rng.choice([0.0, 1.0, 4.0]) * rng.uniform(0, 1, dim)
    faces = rng.choice([-1, 0, 1, 2], dim)
    return lo, hi, faces
