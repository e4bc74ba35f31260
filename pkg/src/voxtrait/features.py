"""The 30 nonverbal descriptors and their per-recording extraction.

Vector layout (and CSV column order) is fixed:

  spkrate         total vowel length / total speech length
  mean_pause      mean pause duration (s)
  pauses_second   pauses per second of recording
  pause_speech_ratio  total pause length / total speech length
  rhythm          vowels per second of recording
  vowel_mean/vowel_std    vowel duration statistics (s)
  intensity_std   std of stressed-window mean intensities (dB)
  f0_std/f0_mean  pooled voiced subframe F0 statistics (Hz)
  vowel_f0_range  mean per-stressed-vowel F0 range (Hz)
  harmonicity     mean HNR (dB)
  jitter_loc jitter_ppq5 shimmer_loc shimmer_apq5   perturbation means
  f1 f2 f3 b1 b2 b3    formant frequency and bandwidth means (Hz)
  cep1..cep8      mel cepstrum means

A measure that cannot be computed is absent (None), never silently zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import acoustics
from .audio_io import AudioClip
from .config import RunConfig
from .errors import DuplicateKeyError, InputError, TableFormatError
from .segmentation import SegmentationResult, segment_clip

FEATURE_NAMES: tuple[str, ...] = (
    "spkrate",
    "mean_pause",
    "pauses_second",
    "pause_speech_ratio",
    "rhythm",
    "vowel_mean",
    "vowel_std",
    "intensity_std",
    "f0_std",
    "f0_mean",
    "vowel_f0_range",
    "harmonicity",
    "jitter_loc",
    "jitter_ppq5",
    "shimmer_loc",
    "shimmer_apq5",
    "f1",
    "f2",
    "f3",
    "b1",
    "b2",
    "b3",
    "cep1",
    "cep2",
    "cep3",
    "cep4",
    "cep5",
    "cep6",
    "cep7",
    "cep8",
)

SESSIONS: tuple[str, ...] = ("S1", "S2", "S3")


@dataclass(frozen=True)
class FeatureVector:
    """Mapping of the 30 descriptor names to values, None where absent."""

    values: dict[str, float | None]

    def __post_init__(self) -> None:
        unknown = set(self.values) - set(FEATURE_NAMES)
        if unknown:
            raise InputError(f"unknown feature names: {sorted(unknown)}")
        full = {name: self.values.get(name) for name in FEATURE_NAMES}
        object.__setattr__(self, "values", full)

    def __getitem__(self, name: str) -> float | None:
        if name not in FEATURE_NAMES:
            raise KeyError(name)
        return self.values[name]

    def present(self, name: str) -> bool:
        return self[name] is not None

    def as_array(self) -> np.ndarray:
        """Values in canonical order with NaN for absent."""
        return np.array(
            [np.nan if self.values[n] is None else self.values[n] for n in FEATURE_NAMES]
        )


@dataclass(frozen=True)
class TableRow:
    speaker_id: str
    session: str
    features: FeatureVector


@dataclass
class FeatureTable:
    """Feature vectors keyed by (speaker_id, session)."""

    rows: list[TableRow] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen = set()
        for row in self.rows:
            key = (row.speaker_id, row.session)
            if key in seen:
                raise DuplicateKeyError(f"duplicate row for {key}")
            seen.add(key)

    def add(self, speaker_id: str, session: str, features: FeatureVector) -> None:
        if session not in SESSIONS:
            raise InputError(f"session must be one of {SESSIONS}, got {session!r}")
        if self.get(speaker_id, session) is not None:
            raise DuplicateKeyError(f"duplicate row for {(speaker_id, session)}")
        self.rows.append(TableRow(speaker_id, session, features))

    def get(self, speaker_id: str, session: str) -> FeatureVector | None:
        for row in self.rows:
            if row.speaker_id == speaker_id and row.session == session:
                return row.features
        return None

    def speakers(self) -> list[str]:
        out = []
        for row in self.rows:
            if row.speaker_id not in out:
                out.append(row.speaker_id)
        return out


def build_table(
    entries: list[tuple[str, str, FeatureVector]],
) -> FeatureTable:
    table = FeatureTable()
    for speaker_id, session, vector in entries:
        table.add(speaker_id, session, vector)
    return table


def _std(values: list[float]) -> float | None:
    # sample standard deviation; undefined below two observations
    if len(values) < 2:
        return None
    return float(np.std(np.asarray(values), ddof=1))


def temporal_features(seg: SegmentationResult) -> dict[str, float | None]:
    """The five duration-bookkeeping descriptors plus vowel-length stats."""
    total = seg.total_duration
    speech = seg.total_speech
    vowel_durs = [v.duration for v in seg.vowels]
    pause_durs = [p.duration for p in seg.pauses]
    out: dict[str, float | None] = {}
    out["spkrate"] = sum(vowel_durs) / speech if speech > 0 else None
    out["mean_pause"] = float(np.mean(pause_durs)) if pause_durs else None
    out["pauses_second"] = len(pause_durs) / total if total > 0 else None
    out["pause_speech_ratio"] = sum(pause_durs) / speech if speech > 0 else None
    out["rhythm"] = len(vowel_durs) / total if total > 0 else None
    out["vowel_mean"] = float(np.mean(vowel_durs)) if vowel_durs else None
    out["vowel_std"] = _std(vowel_durs)
    return out


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def _window(x: np.ndarray, rate: int, center: float, length_s: float) -> np.ndarray:
    n = int(round(length_s * rate))
    lo = max(int(round(center * rate)) - n // 2, 0)
    hi = min(lo + n, x.size)
    return x[lo:hi]


def extract_features(
    clip: AudioClip,
    config: RunConfig | None = None,
    seg: SegmentationResult | None = None,
) -> FeatureVector:
    """Compute all 30 descriptors for one canonical-rate clip.

    Prosody and voice-quality measures use 80 ms windows at stressed vowel
    centers, spectral measures 40 ms windows at the same centers. Pass a
    precomputed segmentation to skip redoing it.
    """
    cfg = config or RunConfig()
    if clip.sample_rate != cfg.sample_rate:
        raise InputError(
            f"clip rate {clip.sample_rate} != analysis rate {cfg.sample_rate}; resample first"
        )
    if seg is None:
        seg = segment_clip(clip, cfg)
    values: dict[str, float | None] = dict.fromkeys(FEATURE_NAMES)
    values.update(temporal_features(seg))

    x = clip.samples
    rate = clip.sample_rate
    flen_min = int(round(cfg.frame_length * rate))
    spectral_len = int(round(cfg.spectral_window * rate))

    pooled_f0: list[float] = []
    ranges: list[float] = []
    intensities: list[float] = []
    hnrs: list[float] = []
    perturb: dict[str, list[float]] = {
        "jitter_loc": [],
        "jitter_ppq5": [],
        "shimmer_loc": [],
        "shimmer_apq5": [],
    }
    formant_slots: dict[str, list[float]] = {
        name: [] for name in ("f1", "f2", "f3", "b1", "b2", "b3")
    }
    cep_rows: list[tuple[float, ...]] = []

    for vowel in seg.stressed:
        pros_samples = _window(x, rate, vowel.center, cfg.prosody_window)
        if pros_samples.size >= flen_min:
            pw = acoustics.analyze_prosody_window(
                pros_samples,
                rate,
                vowel.center,
                f0_floor=cfg.f0_floor,
                f0_ceiling=cfg.f0_ceiling,
                voicing_threshold=cfg.voicing_threshold,
            )
            intensities.append(pw.mean_intensity)
            voiced = pw.voiced_f0
            if voiced:
                pooled_f0.extend(voiced)
                ranges.append(pw.f0_max - pw.f0_min)
                f0_med = float(np.median(voiced))
            else:
                f0_med = None
            qw = acoustics.analyze_quality_window(pros_samples, rate, vowel.center, f0_med)
            if qw.jitter_local is not None:
                perturb["jitter_loc"].append(qw.jitter_local)
            if qw.jitter_ppq5 is not None:
                perturb["jitter_ppq5"].append(qw.jitter_ppq5)
            if qw.shimmer_local is not None:
                perturb["shimmer_loc"].append(qw.shimmer_local)
            if qw.shimmer_apq5 is not None:
                perturb["shimmer_apq5"].append(qw.shimmer_apq5)
            if qw.harmonicity_db is not None:
                hnrs.append(qw.harmonicity_db)

        spec_samples = _window(x, rate, vowel.center, cfg.spectral_window)
        if spec_samples.size >= spectral_len:
            sw = acoustics.analyze_spectral_window(spec_samples, rate, vowel.center)
            for i, name in enumerate(("f1", "f2", "f3")):
                if sw.formants[i] is not None:
                    formant_slots[name].append(sw.formants[i])
            for i, name in enumerate(("b1", "b2", "b3")):
                if sw.bandwidths[i] is not None:
                    formant_slots[name].append(sw.bandwidths[i])
            cep_rows.append(sw.cepstra)

    values["f0_mean"] = _mean_or_none(pooled_f0)
    values["f0_std"] = _std(pooled_f0)
    values["vowel_f0_range"] = _mean_or_none(ranges)
    values["intensity_std"] = _std(intensities)
    values["harmonicity"] = _mean_or_none(hnrs)
    for name, vals in perturb.items():
        values[name] = _mean_or_none(vals)
    for name, vals in formant_slots.items():
        values[name] = _mean_or_none(vals)
    if cep_rows:
        means = np.mean(np.asarray(cep_rows), axis=0)
        for i in range(8):
            values[f"cep{i + 1}"] = float(means[i])
    return FeatureVector(values)


def write_table_csv(path: str, table: FeatureTable) -> None:
    """speaker_id,session plus the 30 columns; absent cells stay empty.

    Floats are written with repr, which round-trips float64 exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["speaker_id", "session", *FEATURE_NAMES])
        for row in table.rows:
            cells = [row.speaker_id, row.session]
            for name in FEATURE_NAMES:
                v = row.features[name]
                cells.append("" if v is None else repr(float(v)))
            writer.writerow(cells)


def read_table_csv(path: str) -> FeatureTable:
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["speaker_id", "session", *FEATURE_NAMES]:
                raise TableFormatError(f"{path}: unexpected feature CSV header")
            table = FeatureTable()
            for lineno, cells in enumerate(reader, start=2):
                if not cells:
                    continue
                if len(cells) != 2 + len(FEATURE_NAMES):
                    raise TableFormatError(f"{path}:{lineno}: wrong column count")
                values = {
                    name: (None if cell == "" else float(cell))
                    for name, cell in zip(FEATURE_NAMES, cells[2:])
                }
                table.add(cells[0], cells[1], FeatureVector(values))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise TableFormatError(f"{path}: bad numeric cell: {exc}") from exc
    return table
