"""Flat key-value experiment configs with strict schemas.

Config files hold one ``key = value`` pair per line; ``#`` starts a
comment, blank lines are skipped.  Lists are comma separated, seed lists
additionally accept the inclusive range form ``a..b``.  Unknown keys are
rejected so typos fail loudly.  Command-line flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .selectors import Method


class ConfigError(ValueError):
    """Bad config file contents."""


def parse_kv_file(path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in mapping:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            mapping[key] = value.strip()
    return mapping


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_seeds(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    t = str(text).strip()
    if ".." in t:
        lo_s, hi_s = t.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if hi < lo:
            raise ConfigError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(v) for v in t.split(",") if v.strip() != ""]


def parse_method_spec(token: str) -> tuple[str, int]:
    """``WKH`` means one machine; ``WKH:5`` means five workers."""
    t = token.strip().upper()
    s = 1
    if ":" in t:
        t, s_str = t.split(":", 1)
        s = int(s_str)
        if s < 1:
            raise ConfigError(f"worker count must be positive in {token!r}")
    try:
        Method(t)
    except ValueError:
        valid = ", ".join(m.value for m in Method)
        raise ConfigError(f"unknown method {token!r} (valid: {valid})") from None
    return t, s


def parse_methods(text) -> list[tuple[str, int]]:
    if isinstance(text, (list, tuple)):
        return [parse_method_spec(str(v)) for v in text]
    specs = [parse_method_spec(tok) for tok in str(text).split(",") if tok.strip()]
    if not specs:
        raise ConfigError("need at least one method")
    return specs


def _parse_bandwidth(text: str):
    t = str(text).strip().lower()
    if t == "median":
        return "median"
    value = float(t)
    if value <= 0:
        raise ConfigError(f"bandwidth must be positive, got {text!r}")
    return value


def _parse_int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip() != ""]


@dataclass
class MixtureConfig:
    methods: list = field(default_factory=lambda: [("MC_RANDOM", 1), ("KH_UNIFORM", 1),
                                                   ("WKH", 1), ("SBQ", 1)])
    k: int = 50
    seeds: list = field(default_factory=lambda: [0])
    pool_size: int = 2000
    components: int = 20
    dim: int = 2
    mean_low: float = -5.0
    mean_high: float = 5.0
    cov_low: float = 0.05
    cov_high: float = 0.5
    dirichlet_alpha: float = 1.0
    bandwidth: object = "median"
    target_form: str = "continuous"
    out: str = "out"
    threads: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.k < 1 or self.pool_size < 1 or self.components < 1 or self.dim < 1:
            raise ConfigError("k, pool_size, components and dim must be positive")
        if self.target_form not in ("continuous", "empirical"):
            raise ConfigError("target_form must be 'continuous' or 'empirical'")
        if self.threads < 1:
            raise ConfigError("threads must be positive")


@dataclass
class SummarizeConfig:
    methods: list = field(default_factory=lambda: [("WKH", 1), ("SBQ", 1)])
    k_grid: list = field(default_factory=lambda: [10, 25, 50])
    seeds: list = field(default_factory=lambda: [0])
    dataset: str = "blobs"
    n: int = 500
    dim: int = 128
    separation: float = 2.5
    spread: float = 1.0
    val_fraction: float = 0.1
    test_fraction: float = 0.2
    lam: float = 1.0
    weighted_retrain: bool = False
    out: str = "out"
    threads: int = 1
    timing: bool = False

    def __post_init__(self):
        if not self.k_grid or min(self.k_grid) < 1:
            raise ConfigError("k_grid must hold positive sizes")
        if any(m == "KH_UNIFORM" for m, _ in self.methods):
            raise ConfigError("summarize supports WKH, SBQ and MC_RANDOM")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be positive")


@dataclass
class DiagnoseConfig:
    out: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError("threads must be positive")


_CASTERS = {
    "methods": parse_methods,
    "seeds": parse_seeds,
    "k_grid": _parse_int_list,
    "bandwidth": _parse_bandwidth,
    "timing": _parse_bool,
    "weighted_retrain": _parse_bool,
    "k": int,
    "pool_size": int,
    "components": int,
    "dim": int,
    "n": int,
    "threads": int,
    "mean_low": float,
    "mean_high": float,
    "cov_low": float,
    "cov_high": float,
    "dirichlet_alpha": float,
    "separation": float,
    "spread": float,
    "val_fraction": float,
    "test_fraction": float,
    "lam": float,
    "target_form": str,
    "dataset": str,
    "out": str,
}

# config files say "lambda"; the dataclass field avoids the keyword
_ALIASES = {"lambda": "lam", "workers": None}


def build_config(config_cls, mapping: dict) -> object:
    """Validate a raw mapping against one experiment schema."""
    allowed = {f.name for f in fields(config_cls)}
    kwargs = {}
    unknown = []
    for key, value in mapping.items():
        name = _ALIASES.get(key, key)
        if key == "workers":
            # shorthand: apply one worker count to every listed method
            continue
        if name not in allowed:
            unknown.append(key)
            continue
        caster = _CASTERS.get(name, str)
        try:
            kwargs[name] = caster(value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
    if unknown:
        raise ConfigError(f"unknown config keys for {config_cls.__name__}: {sorted(unknown)}")
    cfg = config_cls(**kwargs)
    if "workers" in mapping and hasattr(cfg, "methods"):
        try:
            s = int(mapping["workers"])
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for 'workers': {mapping['workers']!r}") from None
        if s < 1:
            raise ConfigError("workers must be positive")
        # the shorthand only touches methods that can actually run distributed
        cfg.methods = [(m, s if (sm == 1 and m in ("WKH", "SBQ")) else sm)
                       for m, sm in cfg.methods]
    for m, sm in getattr(cfg, "methods", []):
        if sm > 1 and m not in ("WKH", "SBQ"):
            raise ConfigError(f"method {m} cannot run with {sm} workers (WKH/SBQ only)")
    return cfg
