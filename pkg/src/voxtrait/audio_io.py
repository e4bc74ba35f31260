"""WAV loading and sample-rate conversion.

Clips are canonicalized to mono float64 in [-1, 1]. Integer PCM is scaled by
2**(bits-1), so a 16-bit sample of 32767 maps to 32767/32768. Analysis
elsewhere assumes the canonical 11025 Hz rate; `resample` gets clips there.
"""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass

import numpy as np
from scipy.signal import upfirdn

from .errors import EmptyAudioError, InputError, NonPcmError, WavReadError

TARGET_RATE = 11025

# Half-length factor of the windowed-sinc prototype, in units of the larger
# of the up/down factors. 10 matches common polyphase practice.
_HALF_LEN_FACTOR = 10
_KAISER_BETA = 8.6
_CUTOFF_FRACTION = 0.45


@dataclass(frozen=True)
class AudioClip:
    """Mono audio with its sampling rate and a label for reporting."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self) -> None:
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise InputError("AudioClip samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise InputError("sample_rate must be positive")
        if x.size and float(np.max(np.abs(x))) > 1.0 + 1e-9:
            raise InputError("AudioClip samples must lie within [-1, 1]")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _find_chunks(data: bytes) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavReadError("not a RIFF/WAVE file")
    chunks: dict[bytes, bytes] = {}
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if cid not in chunks:
            chunks[cid] = body
        pos += 8 + size + (size & 1)  # chunk bodies are word-aligned
    return chunks


def load_wav(path: str, source_id: str | None = None) -> AudioClip:
    """Decode a linear PCM WAV file (8/16/24-bit, mono or multichannel).

    Multichannel audio is averaged down to mono after scaling. Raises
    WavReadError for unreadable containers, NonPcmError for unsupported
    encodings and EmptyAudioError when the data chunk holds no samples.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise WavReadError(f"cannot read {path}: {exc}") from exc

    chunks = _find_chunks(data)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise WavReadError(f"{path}: missing fmt or data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise WavReadError(f"{path}: fmt chunk truncated")
    audio_format, n_channels, rate, _, block_align, bits = struct.unpack_from(
        "<HHIIHH", fmt
    )
    if audio_format != 1:
        raise NonPcmError(f"{path}: WAV format code {audio_format} is not linear PCM")
    if bits not in (8, 16, 24):
        raise NonPcmError(f"{path}: {bits}-bit PCM is not supported")
    if n_channels < 1 or rate <= 0:
        raise WavReadError(f"{path}: malformed fmt chunk")

    body = chunks[b"data"]
    bytes_per_sample = bits // 8
    frame_size = bytes_per_sample * n_channels
    if block_align and block_align != frame_size:
        raise WavReadError(f"{path}: block alignment does not match sample layout")
    n_frames = len(body) // frame_size
    if n_frames == 0:
        raise EmptyAudioError(f"{path}: zero-length data chunk")
    body = body[: n_frames * frame_size]

    if bits == 8:
        raw = np.frombuffer(body, dtype=np.uint8).astype(np.float64)
        scaled = (raw - 128.0) / 128.0
    elif bits == 16:
        raw = np.frombuffer(body, dtype="<i2").astype(np.float64)
        scaled = raw / 32768.0
    else:  # 24-bit: assemble little-endian triplets and sign-extend
        b = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        val -= (val & 0x800000) << 1
        scaled = val.astype(np.float64) / float(1 << 23)

    frames = scaled.reshape(n_frames, n_channels)
    mono = frames.mean(axis=1)
    sid = source_id if source_id is not None else path
    return AudioClip(samples=mono, sample_rate=int(rate), source_id=sid)


def write_wav(path: str, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float samples as 16-bit PCM."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    with wave.open(path, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.tobytes())


def _design_lowpass(n_taps: int, cutoff: float) -> np.ndarray:
    # cutoff in cycles per sample of the grid the filter runs on
    mid = (n_taps - 1) / 2
    t = np.arange(n_taps) - mid
    h = 2.0 * cutoff * np.sinc(2.0 * cutoff * t)
    return h * np.kaiser(n_taps, _KAISER_BETA)


def resample(clip: AudioClip, target_rate: int = TARGET_RATE) -> AudioClip:
    """Rate-convert with a Kaiser windowed-sinc polyphase filter.

    The anti-alias cutoff is 0.45x the lower of the two rates. A clip
    already at the target rate is returned unchanged. Output length is
    round(n * target / source), so duration is preserved to within one
    output sample period.
    """
    if int(target_rate) != target_rate or target_rate <= 0:
        raise InputError("target_rate must be a positive integer")
    target_rate = int(target_rate)
    if clip.sample_rate == target_rate:
        return clip

    src = clip.sample_rate
    g = math.gcd(src, target_rate)
    up, down = target_rate // g, src // g
    n_out = int(round(clip.samples.size * target_rate / src))
    if n_out == 0:
        return AudioClip(np.zeros(0), target_rate, clip.source_id)

    # Choose an odd tap count whose group delay is a whole number of output
    # steps on the upsampled grid, so the delay trim is exact.
    blocks = math.ceil(_HALF_LEN_FACTOR * max(up, down) / down)
    half = blocks * down
    cutoff_hz = _CUTOFF_FRACTION * min(src, target_rate)
    cutoff = cutoff_hz / (src * up)
    h = _design_lowpass(2 * half + 1, cutoff) * up

    y = upfirdn(h, clip.samples, up=up, down=down)
    start = half // down
    out = y[start : start + n_out]
    if out.size < n_out:  # guard; cannot happen for half >= down
        out = np.pad(out, (0, n_out - out.size))
    out = np.clip(out, -1.0, 1.0)
    return AudioClip(out, target_rate, clip.source_id)
