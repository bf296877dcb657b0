"""Flat key-value run configuration.

One ``key = value`` pair per line, ``#`` starts a comment, blank lines are
ignored.  Unknown keys are rejected and every parse error carries the line
number.  Example:

    # laser
    laser.rep_rate_hz = 76e6
    rates.k_s_per_mw  = 0.8
    run.n_pulses      = 1000000
    run.powers_mw     = 0.5, 1, 2, 5, 10
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .model import (
    LaserConfig,
    MaterialConfig,
    ModelConfig,
    RateConstants,
    default_config,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text", "config_digest"]


class ConfigError(ValueError):
    """Configuration fault; message carries the file line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RunConfig:
    """A ModelConfig plus run parameters."""

    model: ModelConfig
    n_pulses: int = 1_000_000
    seed: int = 1
    powers_mw: tuple[float, ...] = ()
    bin_width_ps: int | None = None  # None: largest divisor of rep period <= 100
    max_lag_multiples: int = 6
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_pulses < 1:
            raise ConfigError("run.n_pulses must be at least 1")
        if self.workers < 1:
            raise ConfigError("run.workers must be at least 1")
        if self.max_lag_multiples < 1:
            raise ConfigError("run.max_lag_multiples must be at least 1")
        if any(p < 0 for p in self.powers_mw):
            raise ConfigError("run.powers_mw must be non-negative")
        if self.bin_width_ps is not None and self.bin_width_ps < 1:
            raise ConfigError("run.bin_width_ps must be at least 1")

    def resolved_bin_width_ps(self) -> int:
        if self.bin_width_ps is not None:
            return self.bin_width_ps
        return default_bin_width(self.model.rep_period_ps)


def default_bin_width(rep_period_ps: int, limit: int = 100) -> int:
    """Largest divisor of the repetition period not exceeding ``limit``, so
    the comb peaks align with bin centers."""
    for width in range(min(limit, rep_period_ps), 0, -1):
        if rep_period_ps % width == 0:
            return width
    return 1


# key prefix -> (dataclass, attribute on the assembled config)
_SECTIONS = {
    "laser": LaserConfig,
    "material": MaterialConfig,
    "rates": RateConstants,
}

_DETECTOR_KEYS = {
    "detector.jitter_ps": ("detector_jitter_ps", float),
    "detector.coincidence_window_ps": ("coincidence_window_ps", int),
    "detector.dead_time_ps": ("dead_time_ps", int),
}

_RUN_KEYS = {
    "run.n_pulses": ("n_pulses", int),
    "run.seed": ("seed", int),
    "run.powers_mw": ("powers_mw", "float_list"),
    "run.bin_width_ps": ("bin_width_ps", int),
    "run.max_lag_multiples": ("max_lag_multiples", int),
    "run.workers": ("workers", int),
}


def _known_keys() -> set[str]:
    keys = set(_DETECTOR_KEYS) | set(_RUN_KEYS)
    for prefix, cls in _SECTIONS.items():
        for f in fields(cls):
            keys.add(f"{prefix}.{f.name}")
    return keys


def _parse_value(raw: str, kind, key: str, line: int):
    raw = raw.strip()
    try:
        if kind is int:
            as_float = float(raw)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if kind is float:
            return float(raw)
        if kind == "float_list":
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"cannot parse {key} value {raw!r}", line) from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    known = _known_keys()
    section_values: dict[str, dict] = {name: {} for name in _SECTIONS}
    detector: dict = {}
    run: dict = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        stripped = rawline.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno)
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in _DETECTOR_KEYS:
            attr, kind = _DETECTOR_KEYS[key]
            detector[attr] = _parse_value(raw, kind, key, lineno)
            continue
        if key in _RUN_KEYS:
            attr, kind = _RUN_KEYS[key]
            run[attr] = _parse_value(raw, kind, key, lineno)
            continue
        prefix, _, name = key.partition(".")
        cls = _SECTIONS[prefix]
        kind = str if name == "stokes_statistics" else float
        section_values[prefix][name] = _parse_value(raw, kind, key, lineno)
    try:
        model = ModelConfig(
            laser=LaserConfig(**section_values["laser"]),
            material=MaterialConfig(**section_values["material"]),
            rates=RateConstants(**section_values["rates"]),
            **detector,
        )
        return RunConfig(model=model, **run)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config_text(text, source=str(path))


def canonical_text(cfg: RunConfig) -> str:
    """Stable flat rendering of every key; input to the config digest."""
    model = cfg.model
    pairs: list[tuple[str, object]] = []
    for prefix, obj in (
        ("laser", model.laser),
        ("material", model.material),
        ("rates", model.rates),
    ):
        for f in fields(obj):
            pairs.append((f"{prefix}.{f.name}", getattr(obj, f.name)))
    pairs += [
        ("detector.jitter_ps", model.detector_jitter_ps),
        ("detector.coincidence_window_ps", model.coincidence_window_ps),
        ("detector.dead_time_ps", model.dead_time_ps),
        ("run.n_pulses", cfg.n_pulses),
        ("run.seed", cfg.seed),
        ("run.powers_mw", ",".join(repr(p) for p in cfg.powers_mw)),
        ("run.bin_width_ps", cfg.bin_width_ps),
        ("run.max_lag_multiples", cfg.max_lag_multiples),
    ]
    return "\n".join(f"{k}={v!r}" for k, v in sorted(pairs))


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()
