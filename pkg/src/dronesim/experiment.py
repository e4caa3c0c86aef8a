"""Build games and dynamics from configs, run them, and summarize.

Everything that ends up in a CSV is a deterministic function of the
config and seed, so reruns are byte-identical.
"""

import csv
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ambiguity import SampleSet, eta_bound, inflate_radius, load_samples_csv, wasserstein_radius
from .config import builtin_config, load_config
from .consensus import ConsensusGains, Digraph
from .disbrag import DistributedIsbrag, run_algorithm1, run_disbrag
from .dro import DroOracle, NominalOracle
from .errors import ConfigurationError
from .game import Box, Game, Profile, PureProduct, Quadratic, WeightedAbsProduct, eta_ne_residual
from .isbrag import AlgoParams, bound_constants, run_isbrag, validate_params

SIG = 12


#%% construction

def _per_agent(value, n, name):
    if np.ndim(value) == 0:
        return [value] * n
    if len(value) != n:
        raise ConfigurationError(f"{name} needs {n} entries, got {len(value)}")
    return list(value)


def build_boxes(gc):
    lo = _per_agent(gc.lower, gc.n, "game.lower")
    hi = _per_agent(gc.upper, gc.n, "game.upper")
    return [Box(l, h) for l, h in zip(lo, hi)]


def build_samples(cfg, rng_seed=None):
    """SampleSet, support box and per-agent support boxes (None in reference mode)."""
    ac, gc, mode = cfg.ambiguity, cfg.game, cfg.run.mode
    if mode == "stochastic-reference":
        return None, None, None
    if ac.samples:
        _, H = load_samples_csv(cfg.resolve(ac.samples))
    elif ac.generate == "uniform":
        if ac.N < 1 or ac.lower is None:
            raise ConfigurationError("ambiguity.generate needs N, lower and upper")
        rng = np.random.default_rng(ac.sample_seed if rng_seed is None else rng_seed)
        lo = np.atleast_1d(np.asarray(ac.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(ac.upper, dtype=float))
        H = rng.uniform(lo, hi, (ac.N, lo.size))
    else:
        raise ConfigurationError(f"unknown sample generator {ac.generate!r}")
    if ac.lower is None or ac.upper is None:
        raise ConfigurationError("ambiguity.lower and ambiguity.upper (known support) are required")
    support = Box(np.broadcast_to(np.asarray(ac.lower, dtype=float), (H.shape[1],)),
                  np.broadcast_to(np.asarray(ac.upper, dtype=float), (H.shape[1],)))
    part = ac.partition or [[i, i + 1] for i in range(gc.n)]
    if mode == "dro-shared":
        samples = SampleSet(H, "shared", tuple(tuple(p) for p in part))
        boxes = [support] * gc.n
    else:
        SampleSet(H, "shared", tuple(tuple(p) for p in part))  # partition check
        samples = SampleSet([H[:, p:q] for p, q in part], "individual")
        boxes = [Box(support.lower[p:q], support.upper[p:q]) for p, q in part]
    return samples, support, boxes


def build_game(cfg, xi_boxes=None):
    gc = cfg.game
    boxes = build_boxes(gc)
    n = gc.n
    if gc.family == "weighted-abs-product":
        if gc.targets is None:
            raise ConfigurationError("weighted-abs-product needs game.targets")
        utils = [WeightedAbsProduct(i, t, gc.weight) for i, t in enumerate(_per_agent(gc.targets, n, "game.targets"))]
    elif gc.family == "pure-product":
        utils = [PureProduct(i, gc.weight) for i in range(n)]
    else:
        curv = _per_agent(gc.curvature, n, "game.curvature")
        tgt = _per_agent(gc.target, n, "game.target")
        coup = np.zeros((n, n)) if gc.coupling is None else np.asarray(gc.coupling, dtype=float)
        if coup.shape != (n, n):
            raise ConfigurationError("game.coupling must be n x n")
        gains = [None] * n if gc.xi_gain is None else _per_agent(gc.xi_gain, n, "game.xi_gain")
        offs = [None] * n if gc.xi_offset is None else _per_agent(gc.xi_offset, n, "game.xi_offset")
        utils = [Quadratic(i, curv[i], tgt[i], {j: coup[i, j] for j in range(n) if j != i and coup[i, j]},
                           gains[i], offs[i]) for i in range(n)]
    if xi_boxes is None and cfg.run.mode == "stochastic-reference" and cfg.ambiguity.lower is not None:
        xi_boxes = _reference_xi_boxes(cfg)
    return Game(boxes, utils, xi_box=xi_boxes, lipschitz=gc.lipschitz,
                supergrad_bounds=gc.supergrad_bounds, seed=cfg.run.seed)


def _reference_xi_boxes(cfg):
    ac = cfg.ambiguity
    lo = np.atleast_1d(np.asarray(ac.lower, dtype=float))
    hi = np.atleast_1d(np.asarray(ac.upper, dtype=float))
    if ac.partition:
        return [Box(lo[p:q], hi[p:q]) for p, q in ac.partition]
    return Box(lo, hi)


def build_params(cfg, game):
    ac = cfg.algorithm
    n = game.n
    c = ac.c
    if c is None:
        c = game.amicability()
        if np.any(np.isnan(c)):
            raise ConfigurationError("amicability factors unknown for this family; declare algorithm.c")
    d = game.diameters if ac.d is None else ac.d
    vals = [np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in (ac.alpha, ac.mu, ac.lam, ac.kappa, c, d)]
    return AlgoParams(*vals)


def build_radii(cfg, samples):
    """Base (uninflated) and inflated radii per agent."""
    ac, n = cfg.ambiguity, cfg.game.n
    if samples is None:
        return np.zeros(n), np.zeros(n)
    if ac.eps is not None:
        base = np.broadcast_to(np.asarray(ac.eps, dtype=float), (n,)).copy()
    elif ac.theta is not None:
        th = _per_agent(ac.theta, n, "ambiguity.theta")
        if samples.mode == "shared":
            dims = [samples.m] * n
            counts = [samples.count()] * n
        else:
            dims = [a.shape[1] for a in samples.samples]
            counts = [a.shape[0] for a in samples.samples]
        base = np.array([wasserstein_radius(N, m, t, ac.c1, ac.c2, ac.a) for N, m, t in zip(counts, dims, th)])
    else:
        raise ConfigurationError("declare ambiguity.eps or ambiguity.theta")
    return base, np.array([inflate_radius(e, ac.C) for e in base])


def build_graph(cfg):
    nc, n = cfg.network, cfg.game.n
    if nc.file:
        return Digraph.from_file(cfg.resolve(nc.file), n=n)
    kinds = {"cycle": Digraph.cycle, "complete": Digraph.complete, "line": Digraph.line}
    if nc.kind not in kinds:
        raise ConfigurationError(f"unknown network.kind {nc.kind!r}")
    return kinds[nc.kind](n)


def ne_set(cfg, game):
    """Declared equilibria (rows) or None."""
    gc = cfg.game
    if gc.ne is not None:
        return np.atleast_2d(np.asarray(gc.ne, dtype=float))
    if gc.ne_family == "product-parity":
        lo = np.array([b.lower[0] for b in game.boxes])
        hi = np.array([b.upper[0] for b in game.boxes])
        rows = [np.zeros(game.n)]
        for bits in itertools.product((0, 1), repeat=game.n):
            if sum(bits) % 2 == 0:
                rows.append(np.where(np.array(bits) == 1, lo, hi))
        return np.array(rows)
    if gc.ne_family:
        raise ConfigurationError(f"unknown game.ne_family {gc.ne_family!r}")
    return None


#%% metrics

def steady_state(S, fraction=0.1):
    k = max(1, int(round(fraction * (S.shape[0] - 1))))
    return S[-k:].mean(axis=0)


def nearest(ne, x):
    d = np.abs(ne - x).max(axis=1)
    return ne[int(np.argmin(d))]


def steps_to_ball(S, target, radius):
    """First step with every coordinate within ``radius`` of ``target``."""
    hit = np.flatnonzero(np.abs(S - target).max(axis=1) <= radius)
    return int(hit[0]) if hit.size else None


def steps_to_converge(S, target, radius):
    """First step after which the trajectory never leaves the ball."""
    out = np.abs(S - target).max(axis=1) > radius
    if out[-1]:
        return None
    bad = np.flatnonzero(out)
    return 0 if bad.size == 0 else int(bad[-1] + 1)


#%% results

@dataclass
class RunResult:
    name: str
    columns: list
    rows: np.ndarray
    summary: dict
    invariants: dict
    trajectory: object = None
    runtime: float = 0.0

    @property
    def passed(self):
        return all(self.invariants.values())


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIG}g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return " ".join(_fmt(v) for v in np.ravel(x))
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _make_oracle(cfg, game, samples, radii, boxes):
    mode = cfg.run.mode
    if mode == "stochastic-reference":
        xm = cfg.ambiguity.xi_mean
        if xm is None:
            return NominalOracle(game)
        xm = np.asarray(xm, dtype=float)
        part = cfg.ambiguity.partition
        xi = [xm[p:q] for p, q in part] if part else [xm] * game.n
        return NominalOracle(game, xi)
    return DroOracle(game, samples, radii, boxes, tol=cfg.ambiguity.tol, max_iters=cfg.ambiguity.max_iters)


def _evaluator(cfg, game, oracle):
    if isinstance(oracle, DroOracle):
        return oracle.value
    return lambda i, s: game.utility(i, s, oracle.xi[i])


def run_experiment(cfg, out_dir=None, plots=False):
    """Run one configured experiment and optionally write its outputs.

    Returns a RunResult whose ``invariants`` map names to pass/fail.
    """
    t0 = time.perf_counter()
    r = cfg.run
    samples, support, xboxes = build_samples(cfg)
    game = build_game(cfg, xboxes)
    params = build_params(cfg, game)
    report = validate_params(params, game.diameters)
    if not report.ok:
        raise ConfigurationError(f"invalid algorithm parameters: {report.summary()}")
    base_eps, radii = build_radii(cfg, samples)
    bound = bound_constants(params, game.supergrad_bounds, game.diameters, cfg.algorithm.Dbar,
                            cfg.algorithm.M, boxes=game.boxes)
    init = game.project(cfg.game.init if cfg.game.init is not None
                        else [0.5 * (b.lower + b.upper) for b in game.boxes]).stacked
    distributed = r.algorithm != "isbrag"
    slack = r.lyapunov_slack if r.lyapunov_slack is not None else (1e-6 if distributed else 1e-7)
    if r.algorithm == "isbrag":
        oracle = _make_oracle(cfg, game, samples, radii, xboxes)
        traj = run_isbrag(game, oracle, params, init, r.horizon, bound)
    elif r.algorithm == "d-isbrag":
        oracle = _make_oracle(cfg, game, samples, radii, xboxes)
        gains = ConsensusGains(cfg.network.b1, cfg.network.b2, cfg.network.b3)
        net = DistributedIsbrag(game, build_graph(cfg), params, cfg.network.T_con, oracle, init, gains, r.seed)
        traj = run_disbrag(net, r.horizon, bound)
    else:
        gains = ConsensusGains(cfg.network.b1, cfg.network.b2, cfg.network.b3)
        traj = run_algorithm1(game, build_graph(cfg), params, samples, radii, support, init, r.horizon,
                              cfg.network.T_con, cfg.network.T_opt, gains, r.seed, cfg.network.primal_weight,
                              cfg.network.warm_start, bound, cfg.ambiguity.tol)
        oracle = DroOracle(game, samples, radii, [support] * game.n, tol=cfg.ambiguity.tol)
    S, V = traj.S, traj.V
    H = r.horizon
    ne = ne_set(cfg, game)
    ceiling = bound.ceiling_distributed if distributed else bound.ceiling
    steady = steady_state(S, r.steady_fraction)

    # eta residual on the sampled cadence plus the final row
    evaluator = _evaluator(cfg, game, oracle)
    eta = np.full(H + 1, np.nan)
    marks = set(range(0, H + 1, r.eta_every)) if r.eta_every else set()
    marks.add(H)
    for t in sorted(marks):
        eta[t] = float(eta_ne_residual(evaluator, Profile.from_stacked(S[t], game.dims), game.boxes,
                                       r.grid_points).max())
    eta_steady = float(eta_ne_residual(evaluator, Profile.from_stacked(steady, game.dims), game.boxes,
                                       r.grid_points).max())

    dims = sum(game.dims)
    columns = ["t"] + [f"s_{k + 1}" for k in range(dims)] + ["V", "omega", "ne_sup", "eta_residual", "ceiling"]
    omega = np.full(H + 1, np.nan)
    ne_sup = np.full(H + 1, np.nan)
    if ne is not None:
        diff = S[:, None, :] - ne[None, :, :]
        omega = np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)
        ne_sup = np.abs(diff).max(axis=2).min(axis=1)
    cols = [np.arange(H + 1)[:, None], S, V[:, None], omega[:, None], ne_sup[:, None], eta[:, None],
            np.full((H + 1, 1), ceiling)]
    if distributed:
        pad = lambda a: np.concatenate([np.atleast_1d(a), [np.nan]])[:, None]
        columns += ["tracking_error", "delta_prime_norm"]
        cols += [pad(traj.extra["tracking_error"]), pad(traj.extra["delta_prime_norm"].sum(axis=1))]
        if r.algorithm == "algorithm1":
            columns += ["consensus_residual", "budget_residual"]
            cols += [pad(traj.extra["consensus_residual"]), pad(traj.extra["budget_residual"])]
    rows = np.hstack(cols)

    burn = int(np.floor(r.burn_in * H))
    margin = traj.lyap_margin
    lyap_viol = int(np.sum(margin < -slack)) if H else 0
    invariants = {
        "lyapunov_inequality": lyap_viol == 0,
        "ultimate_bound": bool(np.all(V[burn:] <= ceiling)),
        "lyapunov_nonnegative": bool(np.all(V >= 0)),
        "box_invariance": game.stacked_box().contains(S),
    }
    summary = {
        "name": r.name,
        "algorithm": r.algorithm,
        "mode": r.mode,
        "horizon": H,
        "seed": r.seed,
        "final_profile": S[-1],
        "steady_profile": steady,
        "final_V": V[-1],
        "max_V_after_burn_in": float(V[burn:].max()),
        "ceiling": ceiling,
        "K": bound.K,
        "rho1": bound.rho1,
        "rho2": bound.rho2,
        "lyapunov_violations": lyap_viol,
        "worst_lyapunov_margin": float(np.nanmin(margin)) if H else np.nan,
        "eta_residual_final": eta[-1],
        "eta_residual_steady": eta_steady,
        "eta_bound": eta_bound(base_eps, game.lipschitz, cfg.ambiguity.C),
        "radii": radii,
    }
    if ne is not None:
        target = nearest(ne, steady)
        summary.update({
            "ne_target": target,
            "steady_ne_error": float(np.abs(steady - target).max()),
            "final_ne_error": float(np.abs(S[-1] - target).max()),
            "steps_to_ball": steps_to_ball(S, target, r.ball_radius),
            "steps_to_converge": steps_to_converge(S, target, r.ball_radius),
        })
    if distributed:
        summary["max_delta_prime"] = float(traj.extra["delta_prime_norm"].sum(axis=1).max()) if H else 0.0
        summary["final_tracking_error"] = float(traj.extra["tracking_error"][-1]) if H else 0.0
    for k, v in invariants.items():
        summary[f"check_{k}"] = v
    result = RunResult(r.name, columns, rows, summary, invariants, traj, time.perf_counter() - t0)
    if out_dir is not None:
        write_outputs(result, out_dir, plots)
    return result


def write_outputs(result, out_dir, plots=False):
    out = Path(out_dir)
    write_csv(out / f"{result.name}_trajectory.csv", result.columns, result.rows)
    write_csv(out / f"{result.name}_summary.csv", ["key", "value"], list(result.summary.items()))
    if plots:
        plot_result(result, out / f"{result.name}.png")


def plot_result(result, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = result.columns
    k = [i for i, c in enumerate(cols) if c.startswith("s_")]
    t = result.rows[:, 0]
    fig, ax = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for i in k:
        ax[0].plot(t, result.rows[:, i], lw=1, label=cols[i])
    ax[0].set_ylabel("strategy")
    ax[0].legend(ncol=3, fontsize=7)
    ax[1].semilogy(t, np.maximum(result.rows[:, cols.index("V")], 1e-16), lw=1)
    ax[1].set_ylabel("V")
    ax[1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


#%% replication of the shipped simulation cases

CASE_VARIANTS = {
    1: [{"algorithm.alpha": 0.1}, {"algorithm.alpha": 0.01}],
    2: [{"network.T_con": 10, "algorithm.alpha": 0.01},
        {"network.T_con": 50, "algorithm.alpha": 0.01},
        {"network.T_con": 100, "algorithm.alpha": 0.01},
        {"network.T_con": 100, "algorithm.alpha": 0.1}],
}


def variant_name(case, ov):
    if case == 1:
        return f"case1_alpha{ov['algorithm.alpha']:g}"
    return f"case2_T{ov['network.T_con']}_alpha{ov['algorithm.alpha']:g}"


def replicate(case, variant=None, out_dir=None, plots=False, seed=None):
    """Run the built-in variants of ``case``; returns (results, claims)."""
    if case not in CASE_VARIANTS:
        raise ConfigurationError(f"unknown case {case!r}; choose 1 or 2")
    variants = CASE_VARIANTS[case]
    if variant is not None:
        variants = [variants[variant]]
    results = []
    for ov in variants:
        cfg = builtin_config(f"case{case}")
        for k, v in ov.items():
            cfg.override(k, v)
        cfg.run.name = variant_name(case, ov)
        if seed is not None:
            cfg.run.seed = seed
        results.append(run_experiment(cfg, out_dir, plots))
    claims = section8_claims(case, results) if variant is None else []
    if out_dir is not None:
        header = ["variant", "steady_ne_error", "final_ne_error", "steps_to_ball", "steps_to_converge",
                  "eta_residual_steady", "max_V_after_burn_in", "ceiling", "invariants_ok"]
        write_csv(Path(out_dir) / f"case{case}_comparison.csv", header,
                  [[r.name] + [r.summary.get(k) for k in header[1:-1]] + [r.passed] for r in results])
        if claims:
            write_csv(Path(out_dir) / f"case{case}_claims.csv", ["claim", "passed", "detail"], claims)
    return results, claims


def section8_claims(case, results):
    """Qualitative statements checked against a full set of variant runs."""
    by = {r.name: r.summary for r in results}
    out = []
    if case == 1:
        fast, slow = by["case1_alpha0.1"], by["case1_alpha0.01"]
        err = float(np.abs(slow["final_profile"] - slow["ne_target"]).max())
        out.append(("small-step run ends within 0.05 of the equilibrium", err <= 0.05, f"max error {err:.4g}"))
        out.append(("small step has the smaller steady-state residual",
                    slow["steady_ne_error"] < fast["steady_ne_error"],
                    f"{slow['steady_ne_error']:.4g} vs {fast['steady_ne_error']:.4g}"))
        a, b = fast["steps_to_ball"], slow["steps_to_ball"]
        out.append(("large step enters the 0.1-ball first",
                    a is not None and (b is None or a < b), f"{a} vs {b} steps"))
    else:
        for r in results:
            e = r.summary["steady_ne_error"]
            out.append((f"{r.name} settles on the equilibrium family", e <= 0.1, f"max error {e:.4g}"))
        steps = [by[f"case2_T{T}_alpha0.01"]["steps_to_converge"] for T in (10, 50, 100)]
        ok = all(s is not None for s in steps) and steps[2] < steps[1] < steps[0]
        out.append(("convergence time decreases with consensus steps", ok,
                    "T=10/50/100: " + "/".join(str(s) for s in steps)))
    return out


#%% sweeps

def parse_grid(spec):
    """``"algorithm.alpha=0.01,0.1;algorithm.mu=0.5"`` -> dict of lists."""
    grid = {}
    for part in filter(None, (p.strip() for p in spec.split(";"))):
        key, _, vals = part.partition("=")
        if not vals:
            raise ConfigurationError(f"malformed grid entry {part!r}")
        try:
            grid[key.strip()] = [float(v) for v in vals.split(",")]
        except ValueError:
            raise ConfigurationError(f"non-numeric grid values in {part!r}") from None
    return grid


def _sweep_point(args):
    path, point = args
    cfg = load_config(path)
    for k, v in point.items():
        if k in ("network.T_con", "network.T_opt", "run.horizon", "run.seed"):
            v = int(v)
        cfg.override(k, v)
    cfg.run.name = "sweep"
    samples, _, xboxes = build_samples(cfg)
    game = build_game(cfg, xboxes)
    params = build_params(cfg, game)
    rep = validate_params(params, game.diameters)
    bound = bound_constants(params, game.supergrad_bounds, game.diameters, cfg.algorithm.Dbar,
                            cfg.algorithm.M, boxes=game.boxes)
    ceiling = bound.ceiling if cfg.run.algorithm == "isbrag" else bound.ceiling_distributed
    row = dict(point)
    row["ceiling"] = ceiling
    if not rep.ok:
        rules = sorted({v.rule for v in rep.violations})
        row.update(status="invalid: violates " + ", ".join(rules), final_V=None, eta_residual=None,
                   steps_to_ball=None)
        return row
    try:
        res = run_experiment(cfg)
    except Exception as exc:  # collected, not fatal
        row.update(status=f"error: {exc}", final_V=None, eta_residual=None, steps_to_ball=None)
        return row
    row.update(status="ok" if res.passed else "invariant failure", final_V=res.summary["final_V"],
               eta_residual=res.summary["eta_residual_final"], steps_to_ball=res.summary.get("steps_to_ball"))
    return row


def sweep(config_path, grid, out_dir=None, workers=1):
    """One summary row per grid point (cartesian product), keyed and sorted by the point."""
    keys = sorted(grid)
    points = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    jobs = [(str(config_path), p) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    rows.sort(key=lambda r: tuple(r[k] for k in keys))
    header = keys + ["status", "final_V", "eta_residual", "steps_to_ball", "ceiling"]
    if out_dir is not None:
        write_csv(Path(out_dir) / "sweep.csv", header, [[r.get(h) for h in header] for r in rows])
    return header, rows
