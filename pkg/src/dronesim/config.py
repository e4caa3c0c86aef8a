"""Experiment configuration: sectioned TOML files mapped onto dataclasses."""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError

BUILTIN_DIR = Path(__file__).with_name("configs")

MODES = ("stochastic-reference", "dro-individual", "dro-shared")
ALGORITHMS = ("isbrag", "d-isbrag", "algorithm1")
FAMILIES = ("weighted-abs-product", "pure-product", "quadratic")


@dataclass
class GameConfig:
    family: str = "quadratic"
    n: int = 2
    lower: object = 0.0
    upper: object = 1.0
    init: list = None
    # weighted-abs-product / pure-product
    targets: list = None
    weight: float = 1.0
    # quadratic
    curvature: object = 0.0
    target: object = 0.0
    coupling: list = None
    xi_gain: list = None
    xi_offset: list = None
    # declared constants (override the family's closed forms)
    lipschitz: list = None
    supergrad_bounds: list = None
    # declared equilibria for distance reporting
    ne: list = None
    ne_family: str = ""


@dataclass
class AlgorithmConfig:
    alpha: object = 0.01
    mu: object = 0.5
    lam: object = 1.0
    kappa: object = 2.0
    c: object = None
    d: object = None
    M: float = 0.5
    Dbar: object = None


@dataclass
class NetworkConfig:
    kind: str = ""
    file: str = ""
    T_con: int = 10
    T_opt: int = 3000
    b1: float = 0.5
    b2: float = 0.5
    b3: float = 1.0
    primal_weight: float = 3.0
    warm_start: bool = True


@dataclass
class AmbiguityConfig:
    samples: str = ""
    generate: str = ""
    N: int = 0
    sample_seed: int = 0
    partition: list = None
    lower: object = None
    upper: object = None
    eps: list = None
    theta: list = None
    C: float = 0.0
    c1: float = 1.0
    c2: float = 1.0
    a: float = 2.0
    xi_mean: list = None
    tol: float = 1e-6
    max_iters: int = 5000


@dataclass
class RunConfig:
    name: str = "experiment"
    mode: str = "stochastic-reference"
    algorithm: str = "isbrag"
    horizon: int = 1000
    seed: int = 0
    grid_points: int = 201
    eta_every: int = 0
    burn_in: float = 0.8
    steady_fraction: float = 0.1
    ball_radius: float = 0.1
    lyapunov_slack: float = None


@dataclass
class ExperimentConfig:
    run: RunConfig = field(default_factory=RunConfig)
    game: GameConfig = field(default_factory=GameConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    ambiguity: AmbiguityConfig = field(default_factory=AmbiguityConfig)
    base_dir: Path = field(default=Path("."), repr=False)

    def resolve(self, name):
        """Resolve a referenced file against the config directory, then built-ins."""
        p = Path(name)
        for cand in (p if p.is_absolute() else self.base_dir / p, BUILTIN_DIR / p):
            if cand.exists():
                return cand
        raise ConfigurationError(f"referenced file not found: {name}")

    def override(self, dotted, value):
        """Set ``section.field`` (used by sweeps and CLI flags)."""
        sec, _, key = dotted.partition(".")
        target = getattr(self, sec, None)
        if target is None or not dataclasses.is_dataclass(target) or key not in _names(target):
            raise ConfigurationError(f"unknown field {dotted!r}")
        setattr(target, key, value)
        return self


def _names(dc):
    return {f.name for f in dataclasses.fields(dc)}


_SECTIONS = {"run": RunConfig, "game": GameConfig, "algorithm": AlgorithmConfig,
             "network": NetworkConfig, "ambiguity": AmbiguityConfig}


def parse_config(text, base_dir=Path("."), source="<config>"):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    cfg = ExperimentConfig(base_dir=Path(base_dir))
    for sec, body in raw.items():
        if sec not in _SECTIONS:
            raise ConfigurationError(f"{source}: unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigurationError(f"{source}: [{sec}] must be a table")
        obj = getattr(cfg, sec)
        allowed = _names(obj)
        for key, value in body.items():
            if key not in allowed:
                raise ConfigurationError(f"{source}: unknown field {sec}.{key}")
            setattr(obj, key, value)
    check_config(cfg, source)
    return cfg


def load_config(path):
    path = Path(path)
    if not path.exists():
        cand = BUILTIN_DIR / path.name
        if not path.suffix:
            cand = BUILTIN_DIR / f"{path.name}.toml"
        if not cand.exists():
            raise ConfigurationError(f"config not found: {path}")
        path = cand
    return parse_config(path.read_text(), path.parent, str(path))


def builtin_config(name):
    return load_config(BUILTIN_DIR / f"{name}.toml")


def check_config(cfg, source="<config>"):
    """Range checks that do not need the game to be built."""
    r = cfg.run

    def bad(msg):
        raise ConfigurationError(f"{source}: {msg}")

    if r.mode not in MODES:
        bad(f"run.mode must be one of {MODES}")
    if r.algorithm not in ALGORITHMS:
        bad(f"run.algorithm must be one of {ALGORITHMS}")
    if not isinstance(r.horizon, int) or r.horizon < 0:
        bad("run.horizon must be a nonnegative integer")
    if not isinstance(r.seed, int):
        bad("run.seed must be an integer")
    if r.grid_points < 2:
        bad("run.grid_points must be at least 2")
    if not 0 <= r.burn_in <= 1:
        bad("run.burn_in must lie in [0, 1]")
    if not 0 < r.steady_fraction <= 1:
        bad("run.steady_fraction must lie in (0, 1]")
    if cfg.game.family not in FAMILIES:
        bad(f"game.family must be one of {FAMILIES}")
    if not isinstance(cfg.game.n, int) or cfg.game.n < 1:
        bad("game.n must be a positive integer")
    if not 0 < cfg.algorithm.M < 1:
        bad("algorithm.M must lie in (0, 1)")
    if r.algorithm != "isbrag":
        if not (cfg.network.kind or cfg.network.file):
            bad("distributed runs need network.kind or network.file")
        if cfg.network.T_con < 1:
            bad("network.T_con must be at least 1")
    if r.algorithm == "algorithm1" and r.mode != "dro-shared":
        bad("algorithm1 runs in dro-shared mode")
    if r.algorithm == "d-isbrag" and r.mode == "dro-shared":
        bad("d-isbrag needs individual information; use algorithm1 for shared samples")
    if r.mode != "stochastic-reference" and not (cfg.ambiguity.samples or cfg.ambiguity.generate):
        bad("DRO modes need ambiguity.samples or ambiguity.generate")
    for name in ("samples",):
        if getattr(cfg.ambiguity, name):
            cfg.resolve(getattr(cfg.ambiguity, name))
    if cfg.network.file:
        cfg.resolve(cfg.network.file)
