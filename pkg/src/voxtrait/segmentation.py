"""Frame analysis, vowel nuclei, stressed-vowel selection and pause detection.

Timing convention: frame i starts at i*hop and is frame_length long, but for
segment boundaries each frame labels the hop-sized slice starting at its own
start. Pause runs are then widened by (frame_length - hop)/2 per side, which
makes measured gap durations land in [gap - hop, gap]: a constructed 0.39 s
gap can never cross the 0.400 s pause floor, while 0.5 s gaps stay within a
hop of truth.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import irfft, rfft

from . import acoustics
from .audio_io import AudioClip
from .config import RunConfig
from .errors import ClipTooShortError, InputError

PAUSE_MIN_DURATION_S = 0.400
NUCLEUS_DROP_DB = 6.0
MIN_VOWEL_DURATION_S = 0.030
MIN_NUCLEUS_SEPARATION_S = 0.060
SPEECH_FLOOR_DROP_DB = 20.0


@dataclass(frozen=True)
class FrameTrack:
    """Per-frame energy and voicing over a clip."""

    sample_rate: int
    frame_length_samples: int
    hop_samples: int
    energy_db: np.ndarray
    voicing_strength: np.ndarray
    voiced: np.ndarray

    @property
    def n_frames(self) -> int:
        return int(self.energy_db.size)

    @property
    def frame_length(self) -> float:
        return self.frame_length_samples / self.sample_rate

    @property
    def hop(self) -> float:
        return self.hop_samples / self.sample_rate

    def frame_start(self, i: int) -> float:
        return i * self.hop_samples / self.sample_rate


@dataclass(frozen=True)
class VowelSegment:
    start: float
    end: float
    stressed: bool = False

    def __post_init__(self) -> None:
        if not self.end > self.start:
            raise InputError("vowel segment must have positive duration")

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def center(self) -> float:
        return 0.5 * (self.start + self.end)


@dataclass(frozen=True)
class PauseSegment:
    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.end > self.start:
            raise InputError("pause segment must have positive duration")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SegmentationResult:
    vowels: tuple[VowelSegment, ...]
    pauses: tuple[PauseSegment, ...]
    total_duration: float

    @property
    def total_speech(self) -> float:
        return self.total_duration - sum(p.duration for p in self.pauses)

    @property
    def stressed(self) -> tuple[VowelSegment, ...]:
        return tuple(v for v in self.vowels if v.stressed)


def analyze_frames(
    clip: AudioClip,
    frame_length: float = acoustics.SUBFRAME_LENGTH_S,
    hop: float = acoustics.SUBFRAME_HOP_S,
    f0_floor: float = acoustics.F0_FLOOR_HZ,
    f0_ceiling: float = acoustics.F0_CEILING_HZ,
    voicing_threshold: float = acoustics.VOICING_THRESHOLD,
) -> FrameTrack:
    """Slice a clip into frames and score energy plus voicing for each.

    Voicing strength is the peak normalized autocorrelation in the pitch lag
    range; a frame is voiced when it reaches the threshold. Digital silence
    scores 0 and lands at the -120 dB energy floor.
    """
    rate = clip.sample_rate
    flen = int(round(frame_length * rate))
    hop_s = int(round(hop * rate))
    if flen <= 1 or hop_s < 1 or hop_s > flen:
        raise InputError("bad frame geometry")
    x = clip.samples
    if x.size < flen:
        raise ClipTooShortError(
            f"clip of {x.size} samples is shorter than one {flen}-sample frame"
        )
    n_frames = (x.size - flen) // hop_s + 1
    idx = np.arange(flen)[None, :] + hop_s * np.arange(n_frames)[:, None]
    frames = x[idx]

    sq = frames * frames
    mean_sq = sq.mean(axis=1)
    energy = np.full(n_frames, acoustics.SILENCE_FLOOR_DB)
    audible = mean_sq > 1e-12
    energy[audible] = np.maximum(
        10.0 * np.log10(mean_sq[audible]), acoustics.SILENCE_FLOOR_DB
    )

    lo = max(2, int(math.ceil(rate / f0_ceiling)))
    hi = min(int(math.floor(rate / f0_floor)), flen - 8)
    nfft = 1 << int(flen + hi).bit_length()
    spec = rfft(frames, nfft, axis=1)
    ac = irfft(spec * np.conj(spec), nfft, axis=1)[:, : hi + 1]
    csum = np.cumsum(sq, axis=1)
    total = csum[:, -1][:, None]
    lags = np.arange(hi + 1)
    head = csum[:, flen - 1 - lags]
    tail = total - np.concatenate(
        (np.zeros((n_frames, 1)), csum[:, :hi]), axis=1
    )
    denom = np.sqrt(head * tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        ncc = np.where(denom > 1e-30, ac / np.maximum(denom, 1e-30), 0.0)
    strength = np.clip(ncc[:, lo : hi + 1], -1.0, 1.0).max(axis=1)

    return FrameTrack(
        sample_rate=rate,
        frame_length_samples=flen,
        hop_samples=hop_s,
        energy_db=energy,
        voicing_strength=strength,
        voiced=strength >= voicing_threshold,
    )


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [first, last] index runs of True."""
    out = []
    i = 0
    n = mask.size
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append((i, j))
            i = j + 1
        else:
            i += 1
    return out


def detect_vowels(
    track: FrameTrack,
    nucleus_drop_db: float = NUCLEUS_DROP_DB,
    min_duration: float = MIN_VOWEL_DURATION_S,
    min_separation: float = MIN_NUCLEUS_SEPARATION_S,
) -> list[VowelSegment]:
    """Vowel segments grown from voiced-energy nuclei.

    Nuclei are voiced local energy maxima at least min_separation apart;
    each grows over contiguous voiced frames within nucleus_drop_db of its
    own energy. Stronger nuclei claim frames first, so one burst yields one
    segment. Segments shorter than min_duration are dropped.
    """
    energy = track.energy_db
    voiced = track.voiced
    n = track.n_frames
    if n == 0:
        return []
    hop = track.hop

    is_peak = voiced.copy()
    if n > 1:
        is_peak[1:] &= energy[1:] >= energy[:-1]
        is_peak[:-1] &= energy[:-1] >= energy[1:]
    candidates = np.flatnonzero(is_peak)
    if candidates.size == 0:
        return []
    order = candidates[np.argsort(-energy[candidates], kind="stable")]

    min_sep_frames = max(1, int(round(min_separation / hop)))
    claimed = np.zeros(n, dtype=bool)
    accepted: list[int] = []
    spans: list[tuple[int, int]] = []
    for c in order:
        if claimed[c]:
            continue
        if any(abs(c - a) < min_sep_frames for a in accepted):
            continue
        floor = energy[c] - nucleus_drop_db
        a = c
        while a - 1 >= 0 and voiced[a - 1] and energy[a - 1] >= floor and not claimed[a - 1]:
            a -= 1
        b = c
        while b + 1 < n and voiced[b + 1] and energy[b + 1] >= floor and not claimed[b + 1]:
            b += 1
        claimed[a : b + 1] = True
        accepted.append(c)
        spans.append((a, b))

    segments = []
    for a, b in spans:
        start = a * hop
        end = (b + 1) * hop
        if end - start >= min_duration:
            segments.append(VowelSegment(start=start, end=end))
    segments.sort(key=lambda s: s.start)
    return segments


def select_stressed(vowels: list[VowelSegment]) -> list[VowelSegment]:
    """Flag the ceil(n/2) longest vowels as stressed, earlier start wins ties.

    Returns fresh segments in the original order.
    """
    n = len(vowels)
    if n == 0:
        return []
    k = math.ceil(n / 2)
    ranked = sorted(range(n), key=lambda i: (-vowels[i].duration, vowels[i].start))
    chosen = set(ranked[:k])
    return [replace(v, stressed=(i in chosen)) for i, v in enumerate(vowels)]


def detect_pauses(
    track: FrameTrack,
    total_duration: float,
    min_duration: float = PAUSE_MIN_DURATION_S,
    speech_floor_drop_db: float = SPEECH_FLOOR_DROP_DB,
) -> list[PauseSegment]:
    """Maximal non-voice stretches of at least min_duration seconds.

    A frame is non-voice when it is unvoiced and its energy sits more than
    speech_floor_drop_db below the median voiced energy. With no voiced
    frames at all, every unvoiced frame qualifies. Leading and trailing
    stretches count; the last run extends to the clip end.
    """
    n = track.n_frames
    if n == 0:
        return []
    voiced = track.voiced
    if voiced.any():
        floor = float(np.median(track.energy_db[voiced])) - speech_floor_drop_db
        quiet = (~voiced) & (track.energy_db < floor)
    else:
        quiet = ~voiced
    hop = track.hop
    widen = 0.5 * (track.frame_length - hop)
    pauses = []
    for a, b in _runs(quiet):
        start = max(a * hop - widen, 0.0)
        end = (b + 1) * hop + widen
        if b == n - 1:
            end = total_duration
        end = min(end, total_duration)
        if end - start >= min_duration:
            pauses.append(PauseSegment(start=start, end=end))
    return pauses


def segment_clip(clip: AudioClip, config: RunConfig | None = None) -> SegmentationResult:
    """Full segmentation: vowels with stress flags, pauses, total duration.

    Pauses are trimmed so they never overlap a vowel segment (the widening
    step can otherwise brush a directly adjacent vowel), and re-checked
    against the duration floor after trimming.
    """
    cfg = config or RunConfig()
    track = analyze_frames(
        clip,
        frame_length=cfg.frame_length,
        hop=cfg.frame_hop,
        f0_floor=cfg.f0_floor,
        f0_ceiling=cfg.f0_ceiling,
        voicing_threshold=cfg.voicing_threshold,
    )
    vowels = select_stressed(
        detect_vowels(
            track,
            nucleus_drop_db=cfg.nucleus_drop_db,
            min_duration=cfg.min_vowel_duration,
            min_separation=cfg.min_nucleus_separation,
        )
    )
    raw_pauses = detect_pauses(
        track,
        clip.duration,
        min_duration=cfg.pause_min_duration,
        speech_floor_drop_db=cfg.speech_floor_drop_db,
    )
    pauses = []
    for p in raw_pauses:
        start, end = p.start, p.end
        for v in vowels:
            if v.end <= start or v.start >= end:
                continue
            # vowel pokes into this pause from one side; push the boundary
            if v.center <= start:
                start = max(start, v.end)
            else:
                end = min(end, v.start)
        if end - start >= cfg.pause_min_duration:
            pauses.append(PauseSegment(start=start, end=end))
    return SegmentationResult(
        vowels=tuple(vowels),
        pauses=tuple(pauses),
        total_duration=clip.duration,
    )


def write_segments_csv(path: str, result: SegmentationResult) -> None:
    """Debug dump: kind,start_s,end_s,stressed rows sorted by start."""
    rows = [("vowel", v.start, v.end, v.stressed) for v in result.vowels]
    rows += [("pause", p.start, p.end, False) for p in result.pauses]
    rows.sort(key=lambda r: r[1])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "start_s", "end_s", "stressed"])
        for kind, start, end, stressed in rows:
            writer.writerow([kind, repr(start), repr(end), int(stressed)])
