"""Plain-text ``key = value`` run configuration."""
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .estimation import NormMode
from .experiments import DetectorId, ScenarioConfig, ThetaSource
from .model import DEFAULT_THETA

EXPERIMENTS = ("roc", "pfa-sweep", "compare", "spectrum", "timing", "crb", "info")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    experiment: str = "compare"
    N: int = 50
    M: int = 10
    theta: tuple = tuple(DEFAULT_THETA)
    snr_db: float = 0.0
    p_fa_internal: float = 0.3
    dd_theta_source: str = ThetaSource.BIHT_BITS.value
    norm_mode: str = NormMode.UNIT.value
    sparsity: int = None
    biht_iterations: int = 100
    redraw_matrix: bool = False
    trials: int = 10_000
    seed: int = 1
    grid_size: int = 200
    detector: str = "sign-glrt"
    spectrum_sensors: tuple = (40, 100)
    runs: int = 1000
    output: str = None

    def scenario_config(self):
        return ScenarioConfig(
            theta=self.theta,
            n_sensors=self.N,
            snr_db=self.snr_db,
            sparsity=self.sparsity,
            norm_mode=self.norm_mode,
            biht_iterations=self.biht_iterations,
            redraw_matrix=self.redraw_matrix,
        )

    def as_items(self):
        out = []
        for k, v in asdict(self).items():
            if isinstance(v, (tuple, list)):
                v = ",".join(_fmt(x) for x in v)
            out.append((k, "" if v is None else _fmt(v)))
        return out


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


_ALIASES = {
    "n_sensors": "N", "n": "N", "dim": "M", "m": "M",
    "dd-theta-source": "dd_theta_source", "norm-mode": "norm_mode",
    "snr-db": "snr_db", "p-fa-internal": "p_fa_internal",
}


def _int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {raw!r}") from None


def _float(key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {raw!r}") from None
    if not np.isfinite(v):
        raise ConfigError(key, "must be finite")
    return v


def _bool(key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {raw!r}")


def _list(key, raw, conv):
    items = [p for p in raw.strip().strip("[]").replace(";", ",").split(",") if p.strip()]
    if not items:
        raise ConfigError(key, "empty list")
    return tuple(conv(key, p.strip()) for p in items)


_PARSERS = {
    "experiment": lambda k, v: v.strip(),
    "N": _int, "M": _int,
    "theta": lambda k, v: _list(k, v, _float),
    "snr_db": _float, "p_fa_internal": _float,
    "dd_theta_source": lambda k, v: v.strip(),
    "norm_mode": lambda k, v: v.strip(),
    "sparsity": _int, "biht_iterations": _int,
    "redraw_matrix": _bool,
    "trials": _int, "seed": _int, "grid_size": _int,
    "detector": lambda k, v: v.strip(),
    "spectrum_sensors": lambda k, v: _list(k, v, _int),
    "runs": _int,
    "output": lambda k, v: v.strip() or None,
}


_OPTIONAL = ("sparsity", "output")


def canonical_key(key):
    key = key.strip()
    key = _ALIASES.get(key, _ALIASES.get(key.lower(), key))
    return key


def parse_config(text, base=None):
    """Parse ``key = value`` lines (``#`` starts a comment) into a validated RunConfig."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = canonical_key(key)
        if key not in _PARSERS:
            raise ConfigError(key, "unknown key")
        if not raw.strip() and key in _OPTIONAL:
            values[key] = None
        else:
            values[key] = _PARSERS[key](key, raw)
    return build_config(values, base)


def build_config(values, base=None):
    """Apply overrides to ``base`` (defaults if None) and validate the result."""
    unknown = set(values) - {f.name for f in fields(RunConfig)}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(key, "unknown key")
    cfg = RunConfig(**{**(asdict(base) if base else {}), **values})
    explicit_theta = "theta" in values
    if "M" in values and not explicit_theta and cfg.M != len(cfg.theta):
        if cfg.M < len(DEFAULT_THETA):
            raise ConfigError("M", f"M={cfg.M} is shorter than the default theta; set theta explicitly")
        cfg.theta = tuple(np.pad(DEFAULT_THETA, (0, cfg.M - len(DEFAULT_THETA))))
    if explicit_theta and "M" not in values:
        cfg.M = len(cfg.theta)
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if cfg.N < 1:
        raise ConfigError("N", "must be at least 1")
    if cfg.M < 1:
        raise ConfigError("M", "must be at least 1")
    if len(cfg.theta) != cfg.M:
        raise ConfigError("theta", f"has length {len(cfg.theta)} but M={cfg.M}")
    if not any(cfg.theta):
        raise ConfigError("theta", "must not be all zero (SNR undefined)")
    if not 0.0 < cfg.p_fa_internal < 1.0:
        raise ConfigError("p_fa_internal", f"must lie in (0, 1), got {cfg.p_fa_internal}")
    try:
        ThetaSource(cfg.dd_theta_source)
    except ValueError:
        raise ConfigError("dd_theta_source", f"must be one of {[s.value for s in ThetaSource]}") from None
    try:
        NormMode(cfg.norm_mode)
    except ValueError:
        raise ConfigError("norm_mode", f"must be one of {[m.value for m in NormMode]}") from None
    if cfg.sparsity is not None and not 1 <= cfg.sparsity <= cfg.M:
        raise ConfigError("sparsity", f"must lie in [1, M={cfg.M}]")
    for key in ("biht_iterations", "trials", "runs"):
        if getattr(cfg, key) < 1:
            raise ConfigError(key, "must be at least 1")
    if cfg.grid_size < 2:
        raise ConfigError("grid_size", "must be at least 2")
    if cfg.seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    if any(n < 1 for n in cfg.spectrum_sensors):
        raise ConfigError("spectrum_sensors", "entries must be at least 1")
    try:
        DetectorId(cfg.detector)
    except ValueError:
        raise ConfigError("detector", f"must be one of {[d.value for d in DetectorId]}") from None
    return cfg
