"""Run configuration: ``key = value`` files and the built-in parameter presets.

Example file::

    # practical algorithm, 3 looks
    algorithm = practical
    looks = 3
    tau_over_beta = 0.006666666666666667
    lambda = 1.3
"""

import math
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError
from .patches import BlockMatchConfig
from .solver import WEIGHT_INIT_MODES, AlgoParams, ModelParams

ALGORITHMS = ("practical", "fixed")

# block matching per number of looks: (search window, patch side, patches per group)
MATCHING = {1: (50, 10, 150), 3: (50, 9, 120), 5: (50, 8, 100)}

# (rho, gamma) per number of looks
FIDELITY = {1: (0.01, 4.0), 3: (1.5, 1.9), 5: (2.0, 1.3)}

# (tau / beta, lambda) for the practical algorithm
PRACTICAL = {
    "standard": {1: (1 / 50, 2.6), 3: (1 / 150, 1.3), 5: (1 / 250, 0.8)},
    "remote": {1: (1 / 50, 2.6), 3: (1 / 150, 1.2), 5: (1 / 250, 0.7)},
}

# (tau / beta, lambda) for the fixed-group algorithm
FIXED = {
    "standard": {1: (1 / 50, 1.8), 3: (1 / 150, 1.0), 5: (1 / 250, 0.6)},
    "remote": {1: (1 / 100, 1.0), 3: (1 / 150, 0.45), 5: (1 / 200, 0.15)},
}

# default outer iterations of the practical algorithm
PRACTICAL_ITERS = {1: 68, 3: 24, 5: 19}


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "practical"
    looks: int = 3
    tau_over_beta: float = 1 / 150
    lam: float = 1.3
    mu: float = 1.0
    rho: float = 1.5
    gamma: float = 1.9
    eps: float = 1e-10
    alpha: float = 0.001
    beta: float = 1.001
    max_iters: int = 24
    rel_tol: float = 1e-3
    center: bool = True
    weight_init: str = "denoised"
    search_window: int = 50
    patch_side: int = 9
    patches_per_group: int = 120
    reference_stride: int = 0  # 0 means patch_side // 2
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(key, msg)

        need(self.algorithm in ALGORITHMS, "algorithm", f"must be one of {ALGORITHMS}")
        need(isinstance(self.looks, int) and self.looks >= 1, "looks", "must be a positive integer")
        need(self.tau_over_beta > 0, "tau_over_beta", "must be positive")
        need(self.lam >= 0, "lambda", "must be nonnegative")
        need(self.mu > 0, "mu", "must be positive")
        need(self.rho >= 0, "rho", "must be nonnegative")
        need(self.gamma >= 1, "gamma", "must be >= 1")
        need(self.eps > 0, "eps", "must be positive")
        need(self.alpha > 0 or self.algorithm == "practical", "alpha", "must be positive")
        need(self.beta > 0, "beta", "must be positive")
        need(self.max_iters >= 0, "max_iters", "must be nonnegative")
        need(self.rel_tol >= 0, "rel_tol", "must be nonnegative")
        need(self.weight_init in WEIGHT_INIT_MODES, "weight_init", f"must be one of {WEIGHT_INIT_MODES}")
        need(self.patch_side >= 1, "patch_side", "must be positive")
        need(self.search_window >= self.patch_side, "search_window", "must be at least patch_side")
        need(self.patches_per_group >= self.patch_side**2, "patches_per_group", "must be at least patch_side**2")
        need(self.reference_stride >= 0, "reference_stride", "must be nonnegative")
        need(0 <= self.seed < 2**64, "seed", "must fit in an unsigned 64-bit integer")

    @property
    def tau(self):
        return self.tau_over_beta * self.beta

    def model(self):
        return ModelParams(tau=self.tau, lam=self.lam, mu=self.mu, rho=self.rho,
                           gamma=self.gamma, eps=self.eps, center=self.center)

    def algo(self, threads=1, diagnostics=False):
        return AlgoParams(beta=self.beta, alpha=self.alpha, max_iters=self.max_iters,
                          rel_tol=self.rel_tol if self.rel_tol > 0 else None,
                          weight_init=self.weight_init, diagnostics=diagnostics, threads=threads)

    def matching(self):
        return BlockMatchConfig(looks=self.looks, search_window=self.search_window,
                                patch_side=self.patch_side, patches_per_group=self.patches_per_group,
                                reference_stride=self.reference_stride or None)


# file key -> dataclass field
_KEYS = {f.name: f.name for f in fields(RunConfig)}
_KEYS["lambda"] = "lam"
del _KEYS["lam"]
_FIELD_TO_KEY = {v: k for k, v in _KEYS.items()}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key, field_name, text):
    kind = _TYPES[field_name]
    try:
        if kind in (bool, "bool"):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            val = float(text)
            if not math.isfinite(val):
                raise ValueError(text)
            return val
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}") from None


def parse_config(text, base=None):
    """Parse ``key = value`` lines on top of ``base`` (default :class:`RunConfig`)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        values[_KEYS[key]] = _convert(key, _KEYS[key], val)
    return replace(base or RunConfig(), **values)


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def format_config(cfg):
    lines = []
    for name, val in asdict(cfg).items():
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{_FIELD_TO_KEY[name]} = {val}")
    return "\n".join(lines) + "\n"


def preset(name):
    """Built-in settings.

    ``L{1,3,5}-{standard,remote}`` select the practical algorithm;
    a ``fixed-`` prefix selects the fixed-group algorithm.
    """
    algorithm = "practical"
    key = name
    if key.startswith("fixed-"):
        algorithm, key = "fixed", key[len("fixed-"):]
    try:
        looks_s, kind = key.split("-")
        looks = int(looks_s.lstrip("L"))
        table = PRACTICAL if algorithm == "practical" else FIXED
        ratio, lam = table[kind][looks]
    except (ValueError, KeyError):
        raise ConfigError("preset", f"unknown preset {name!r}; known: {', '.join(preset_names())}") from None
    window, side, count = MATCHING[looks]
    rho, gamma = FIDELITY[looks]
    return RunConfig(
        algorithm=algorithm, looks=looks, tau_over_beta=ratio, lam=lam, mu=1.0, rho=rho, gamma=gamma,
        eps=1e-10, alpha=0.001, beta=1.001,
        max_iters=PRACTICAL_ITERS[looks] if algorithm == "practical" else 100,
        weight_init="denoised" if algorithm == "practical" else "signal",
        search_window=window, patch_side=side, patches_per_group=count,
    )


def preset_names():
    base = [f"L{L}-{k}" for k in ("standard", "remote") for L in (1, 3, 5)]
    return base + ["fixed-" + b for b in base]
