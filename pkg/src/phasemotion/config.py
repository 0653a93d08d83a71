"""``key = value`` configuration files with ``[section]`` headers.

Every key is range-checked at load time and unknown sections or keys are
rejected with their line number. CLI flags override file values.
"""

import math
from dataclasses import dataclass, field, fields, replace

from .errors import UsageError


@dataclass
class PyramidSection:
    scales: int = 4
    orientations: int = 4
    min_band: int = 16


@dataclass
class MotionSection:
    eps_amp: float = 0.05
    kappa_max: float = 1e4
    smoothing_radius: float = 0.0


@dataclass
class PredictSection:
    steps: int = 1
    clamp: float = math.pi / 2
    amplitude_extrapolation: bool = True
    method: str = "advect"
    substeps: int = 2


@dataclass
class TransferSection:
    alpha: float = 1.0
    amplitude_gate: float = 0.05
    lambda_t: float = 0.0
    correlation_layer: int = 1
    use_correlation_weighting: bool = False
    method: str = "advect"


@dataclass
class OptimizeSection:
    iters: int = 200
    step: float = 0.25
    style_weight: float = 1.0
    content_weight: float = 1.0
    temporal_weight: float = 0.0


@dataclass
class IOSection:
    precision: str = "f64"
    out_depth: int = 8


@dataclass
class Config:
    pyramid: PyramidSection = field(default_factory=PyramidSection)
    motion: MotionSection = field(default_factory=MotionSection)
    predict: PredictSection = field(default_factory=PredictSection)
    transfer: TransferSection = field(default_factory=TransferSection)
    optimize: OptimizeSection = field(default_factory=OptimizeSection)
    io: IOSection = field(default_factory=IOSection)


# (low, high, low_inclusive); None means unbounded
_RANGES = {
    ("pyramid", "scales"): (1, 255, True),
    ("pyramid", "orientations"): (2, 255, True),
    ("pyramid", "min_band"): (1, None, True),
    ("motion", "eps_amp"): (0.0, 1.0, True),
    ("motion", "kappa_max"): (1.0, None, True),
    ("motion", "smoothing_radius"): (0.0, None, True),
    ("predict", "steps"): (1, None, True),
    ("predict", "clamp"): (0.0, math.pi, False),
    ("predict", "substeps"): (1, 64, True),
    ("transfer", "amplitude_gate"): (0.0, 1.0, True),
    ("transfer", "lambda_t"): (0.0, None, True),
    ("transfer", "correlation_layer"): (0, None, True),
    ("optimize", "iters"): (0, None, True),
    ("optimize", "step"): (0.0, None, True),
    ("optimize", "style_weight"): (0.0, None, True),
    ("optimize", "content_weight"): (0.0, None, True),
    ("optimize", "temporal_weight"): (0.0, None, True),
}
_CHOICES = {
    ("io", "precision"): ("f64", "f32"),
    ("io", "out_depth"): (8, 16),
    ("predict", "method"): ("advect", "delta"),
    ("transfer", "method"): ("advect", "delta"),
}


def _parse_value(raw, typ, where):
    if typ is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{where}: expected a boolean, got {raw!r}")
    if typ is int:
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"{where}: expected an integer, got {raw!r}") from None
    if typ is float:
        try:
            return float(raw)
        except ValueError:
            raise UsageError(f"{where}: expected a number, got {raw!r}") from None
    return raw


def check_value(section, key, value, where=None):
    """Validate one field; raises :class:`UsageError` naming the field."""
    name = f"{section}.{key}"
    where = f"{where}: {name}" if where else name
    if isinstance(value, float) and not math.isfinite(value):
        raise UsageError(f"{where} must be finite, got {value}")
    if (section, key) in _CHOICES and value not in _CHOICES[section, key]:
        raise UsageError(f"{where} must be one of {_CHOICES[section, key]}, got {value!r}")
    if (section, key) in _RANGES:
        lo, hi, lo_inc = _RANGES[section, key]
        if lo is not None and (value < lo or (value == lo and not lo_inc)):
            raise UsageError(f"{where} = {value} out of range (must be {'>=' if lo_inc else '>'} {lo})")
        if hi is not None and value > hi:
            raise UsageError(f"{where} = {value} out of range (must be <= {hi})")


def _types(section_obj):
    return {f.name: f.type for f in fields(section_obj)}


def parse_config(text, source="<config>"):
    cfg = Config()
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not stripped:
            continue
        where = f"{source}:{lineno}"
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise UsageError(f"{where}: malformed section header {stripped!r}")
            section = stripped[1:-1].strip()
            if not hasattr(cfg, section):
                raise UsageError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise UsageError(f"{where}: expected 'key = value', got {stripped!r}")
        if section is None:
            raise UsageError(f"{where}: key outside of any [section]")
        key, raw = (p.strip() for p in stripped.split("=", 1))
        sec = getattr(cfg, section)
        types = _types(sec)
        if key not in types:
            raise UsageError(f"{where}: unknown key '{key}' in [{section}]")
        typ = {"int": int, "float": float, "bool": bool, "str": str}.get(types[key], types[key])
        value = _parse_value(raw, typ, f"{where}: {section}.{key}")
        check_value(section, key, value, where)
        setattr(cfg, section, replace(sec, **{key: value}))
    return cfg


def load_config(path=None):
    """Read a config file; ``None`` gives all defaults."""
    if path is None:
        return Config()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)


def override(cfg, section, **values):
    """Apply non-None CLI overrides, validating each."""
    sec = getattr(cfg, section)
    changes = {k: v for k, v in values.items() if v is not None}
    for k, v in changes.items():
        check_value(section, k, v)
    setattr(cfg, section, replace(sec, **changes))
    return cfg
