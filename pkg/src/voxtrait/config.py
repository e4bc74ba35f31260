"""Run configuration shared by the pipeline and the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any

from .errors import InputError


@dataclass(frozen=True)
class RunConfig:
    """Every tunable the pipeline reads, with range-checked defaults.

    Defaults follow the canonical operating point: 11025 Hz analysis rate,
    400 ms pause floor, significance levels .01/.05, stability gates
    0.75/0.75, voicing threshold 0.45 and an F0 search range of 75-500 Hz.
    """

    sample_rate: int = 11025
    f0_floor: float = 75.0
    f0_ceiling: float = 500.0
    voicing_threshold: float = 0.45
    pause_min_duration: float = 0.400
    frame_length: float = 0.025
    frame_hop: float = 0.010
    prosody_window: float = 0.080
    spectral_window: float = 0.040
    nucleus_drop_db: float = 6.0
    min_vowel_duration: float = 0.030
    min_nucleus_separation: float = 0.060
    speech_floor_drop_db: float = 20.0
    entry_p: float = 0.05
    removal_p: float = 0.10
    min_identical_fraction: float = 0.75
    min_r_ratio: float = 0.75
    max_absent_fraction: float = 0.10
    alphas: tuple[float, float] = (0.01, 0.05)
    seed: int = 42
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise InputError("sample_rate must be positive")
        if not 0 < self.f0_floor < self.f0_ceiling:
            raise InputError("need 0 < f0_floor < f0_ceiling")
        if self.f0_ceiling >= self.sample_rate / 2:
            raise InputError("f0_ceiling must lie below the Nyquist rate")
        if not 0 < self.voicing_threshold < 1:
            raise InputError("voicing_threshold must lie in (0, 1)")
        if self.pause_min_duration <= 0:
            raise InputError("pause_min_duration must be positive")
        if not 0 < self.frame_hop <= self.frame_length:
            raise InputError("need 0 < frame_hop <= frame_length")
        if self.spectral_window <= 0 or self.prosody_window < self.frame_length:
            raise InputError("analysis windows too short")
        for name in ("entry_p", "removal_p"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InputError(f"{name} must lie in (0, 1)")
        for name in ("min_identical_fraction", "min_r_ratio", "max_absent_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InputError(f"{name} must lie in [0, 1]")
        alphas = tuple(sorted(self.alphas))
        if len(alphas) != 2 or not all(0 < a < 1 for a in alphas):
            raise InputError("alphas must be two levels in (0, 1)")
        object.__setattr__(self, "alphas", alphas)
        if self.jobs < 1:
            raise InputError("jobs must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["alphas"] = list(self.alphas)
        return d


def load_config(path: str | None, **overrides: Any) -> RunConfig:
    """Read a JSON config file (optional) and apply keyword overrides.

    Overrides with value None are ignored so CLI flags can default to None.
    """
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InputError("config file must hold a JSON object")
        values.update(raw)
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    if "alphas" in values:
        values["alphas"] = tuple(values["alphas"])
    return RunConfig(**values)
