"""Experiment configuration: schema, validation, presets.

A config arrives as a JSON file, a plain dict, or a previously emitted
manifest (whose resolved config block is reused verbatim, which is what makes
replays exact).  Validation collects every problem before raising so a bad
file reports all its mistakes at once.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .features import NOISE_FAMILIES
from .risk import TARGET_MODES
from .spectral import KINDS, MODES

METHODS = ("monte-carlo", "closed-form")
TARGET_NOISE_MODES = ("shared", "fresh", "clean")


class ValidationError(ValueError):
    """Carries the full list of config problems in .errors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join("  - " + e for e in self.errors))


@dataclass
class ExperimentConfig:
    n: int
    p: int
    s_grid: list
    spectrum_kind: str = "polynomial"
    gamma: float | None = 2.0
    d: int | None = None
    omega1: float = 1.0
    mode: str = "eigencoordinate"
    noise_family: str = "gaussian"
    alpha: float = 0.5
    sigma_sq: float = 0.5
    target_mode: str = "realizable-clean"
    target_norm: float = 1.0
    tail_energy: float = 1.0
    test_points: int = 4096
    label_redraws: int = 500
    ensemble_replicates: int = 20
    master_seed: int | None = None
    a: float = 2.0
    delta: float = 0.05
    bias_multiplier: float = 1.0
    variance_multiplier: float = 1.0
    lower_multiplier: float = 0.1
    m0: float | None = None
    clean_test: bool = False
    target_noise: str = "fresh"
    method: str = "monte-carlo"
    workers: int = 1
    out_dir: str = "out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def spectrum_params(self) -> dict:
        out = {"omega1": self.omega1}
        if self.spectrum_kind == "polynomial":
            out["gamma"] = self.gamma
        if self.spectrum_kind == "finite-rank":
            out["d"] = self.d
        return out


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_SPECTRUM_KEYS = {"kind", "gamma", "d", "omega1"}

# 25 log-spaced feature counts from 10 to 10^4; hits s = n = 100 exactly,
# which is where the risk peak should sit
_DEFAULT_S_GRID = [10, 13, 18, 24, 32, 42, 56, 75, 100, 133, 178, 237, 316,
                   422, 562, 750, 1000, 1334, 1778, 2371, 3162, 4217, 5623,
                   7499, 10000]

PRESETS = {
    "double-descent-default": {
        "n": 100,
        "p": 2000,
        "s_grid": list(_DEFAULT_S_GRID),
        "spectrum": {"kind": "polynomial", "gamma": 2.0, "omega1": 1.0},
        "mode": "eigencoordinate",
        "noise_family": "gaussian",
        "alpha": 0.5,
        "sigma_sq": 0.5,
        "target_mode": "realizable-clean",
        "target_norm": 1.0,
        "test_points": 4096,
        "label_redraws": 500,
        "ensemble_replicates": 20,
    },
}


def _flatten(raw: dict) -> tuple[dict, list]:
    """Lift a nested spectrum block into flat fields; report unknown keys."""
    errors = []
    flat = {}
    for key, value in raw.items():
        if key == "spectrum":
            if not isinstance(value, dict):
                errors.append("spectrum must be an object")
                continue
            for sk, sv in value.items():
                if sk not in _SPECTRUM_KEYS:
                    errors.append(f"unknown spectrum key: {sk!r}")
                elif sk == "kind":
                    flat["spectrum_kind"] = sv
                else:
                    flat[sk] = sv
        elif key in _FIELDS:
            flat[key] = value
        else:
            errors.append(f"unknown config key: {key!r}")
    return flat, errors


def validate(cfg: ExperimentConfig) -> list:
    """Return every constraint violation; empty list means the config is usable."""
    e = []
    if not isinstance(cfg.n, int) or cfg.n < 2:
        e.append("n must be an integer >= 2")
    if not isinstance(cfg.p, int) or cfg.p < 1:
        e.append("p must be an integer >= 1")
    grid = cfg.s_grid
    if (not isinstance(grid, (list, tuple)) or len(grid) == 0
            or any(not isinstance(s, int) or s < 1 for s in grid)):
        e.append("s_grid must be a nonempty list of integers >= 1")
    elif any(b <= a for a, b in zip(grid, grid[1:])):
        e.append("s_grid must be strictly increasing")
    if cfg.spectrum_kind not in KINDS:
        e.append(f"spectrum kind must be one of {KINDS}")
    elif cfg.spectrum_kind == "polynomial":
        if cfg.gamma is None or not cfg.gamma > 1:
            e.append("polynomial spectra need gamma > 1; slower decay has a divergent trace")
    elif cfg.spectrum_kind == "finite-rank":
        if cfg.d is None or not isinstance(cfg.d, int) or not (1 <= cfg.d):
            e.append("finite-rank spectra need an integer rank d >= 1")
        elif isinstance(cfg.p, int) and cfg.d > cfg.p:
            e.append("finite-rank d cannot exceed p")
    if not cfg.omega1 > 0:
        e.append("omega1 must be > 0")
    if cfg.mode not in MODES:
        e.append(f"mode must be one of {MODES}")
    if cfg.noise_family not in NOISE_FAMILIES:
        e.append(f"noise_family must be one of {NOISE_FAMILIES}")
    if not cfg.alpha >= 0:
        e.append("alpha must be >= 0: the noise energy s**(-alpha) may not grow with s")
    if not cfg.sigma_sq >= 0:
        e.append("sigma_sq must be >= 0")
    if cfg.target_mode not in TARGET_MODES:
        e.append(f"target_mode must be one of {TARGET_MODES}")
    if not cfg.target_norm > 0:
        e.append("target_norm must be > 0")
    if cfg.target_mode == "unrealizable" and not cfg.tail_energy > 0:
        e.append("tail_energy must be > 0 for unrealizable targets")
    if not isinstance(cfg.test_points, int) or cfg.test_points < 1:
        e.append("test_points must be an integer >= 1")
    if not isinstance(cfg.label_redraws, int) or cfg.label_redraws < 2:
        e.append("label_redraws must be an integer >= 2 (a variance needs replicates)")
    if not isinstance(cfg.ensemble_replicates, int) or cfg.ensemble_replicates < 1:
        e.append("ensemble_replicates must be an integer >= 1")
    if cfg.master_seed is not None and (not isinstance(cfg.master_seed, int) or cfg.master_seed < 0):
        e.append("master_seed must be a nonnegative integer")
    if not cfg.a > 0:
        e.append("a must be > 0")
    if not (0 < cfg.delta < 1):
        e.append("delta must lie in (0, 1)")
    if not cfg.bias_multiplier > 0:
        e.append("bias_multiplier must be > 0")
    if not cfg.variance_multiplier > 0:
        e.append("variance_multiplier must be > 0")
    if not cfg.lower_multiplier > 0:
        e.append("lower_multiplier must be > 0")
    if cfg.m0 is not None and not cfg.m0 >= 0:
        e.append("m0 must be >= 0")
    if cfg.target_noise not in TARGET_NOISE_MODES:
        e.append(f"target_noise must be one of {TARGET_NOISE_MODES}")
    if cfg.method not in METHODS:
        e.append(f"method must be one of {METHODS}")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        e.append("workers must be an integer >= 1")
    if cfg.method == "closed-form" and cfg.target_mode == "unrealizable":
        e.append("closed-form risk is only available for realizable targets")
    return e


def parse_config(source, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from a path, a dict, or an emitted manifest.

    overrides (flat field: value) win over the source.  Raises
    ValidationError listing every problem found.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    elif isinstance(source, dict):
        raw = dict(source)
    else:
        raise TypeError("source must be a path or a dict")
    if not isinstance(raw, dict):
        raise ValidationError(["top level must be a JSON object"])
    if "artifact_version" in raw and isinstance(raw.get("config"), dict):
        raw = dict(raw["config"])  # a manifest replays through its resolved config
    flat, errors = _flatten(raw)
    if overrides:
        extra, more = _flatten(overrides)
        errors.extend(more)
        flat.update(extra)
    missing = [k for k in ("n", "p", "s_grid") if k not in flat]
    errors.extend(f"missing required key: {k!r}" for k in missing)
    if errors and missing:
        raise ValidationError(errors)
    try:
        cfg = ExperimentConfig(**flat)
    except TypeError:
        raise ValidationError(errors or ["could not construct config"])
    errors.extend(validate(cfg))
    if errors:
        raise ValidationError(errors)
    return cfg


def preset_config(name: str, overrides: dict | None = None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValidationError([f"unknown preset: {name!r}; have {sorted(PRESETS)}"])
    return parse_config(PRESETS[name], overrides)
