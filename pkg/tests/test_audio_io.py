"""WAV container handling and rate conversion."""

import math
import os
import struct
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxtrait.audio_io import AudioClip, load_wav, resample, write_wav
from voxtrait.errors import EmptyAudioError, InputError, NonPcmError, WavReadError

RATE = 11025

# hypothesis forbids function-scoped tmp_path; one shared scratch file is fine
_PROPERTY_DIR = tempfile.mkdtemp(prefix="voxtrait_prop_")


def _riff(fmt_body: bytes, data_body: bytes) -> bytes:
    chunks = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    if len(fmt_body) & 1:
        chunks += b"\x00"
    chunks += b"data" + struct.pack("<I", len(data_body)) + data_body
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def _fmt(audio_format, channels, rate, bits):
    block = channels * (bits // 8)
    return struct.pack("<HHIIHH", audio_format, channels, rate, rate * block, block, bits)


def test_clip_validation():
    with pytest.raises(InputError):
        AudioClip(np.zeros((2, 3)), RATE)
    with pytest.raises(InputError):
        AudioClip(np.array([2.0]), RATE)
    with pytest.raises(InputError):
        AudioClip(np.zeros(4), 0)
    clip = AudioClip(np.zeros(RATE), RATE)
    assert clip.duration == pytest.approx(1.0)
    assert not clip.samples.flags.writeable


def test_write_read_round_trip(tmp_path):
    t = np.arange(2000) / RATE
    x = 0.8 * np.sin(2.0 * math.pi * 220.0 * t)
    path = str(tmp_path / "tone.wav")
    write_wav(path, x, RATE)
    clip = load_wav(path)
    assert clip.sample_rate == RATE
    assert clip.samples.size == x.size
    # writer scales by 32767, reader by 32768: error <= (|x| + 0.5) / 32768
    assert np.max(np.abs(clip.samples - x)) <= 1.31 / 32768.0
    assert clip.source_id == path
    assert load_wav(path, source_id="tone").source_id == "tone"


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, width=32),
        min_size=1,
        max_size=200,
    )
)
def test_write_read_bound_holds_for_any_samples(samples):
    path = os.path.join(_PROPERTY_DIR, "prop.wav")
    x = np.asarray(samples, dtype=np.float64)
    write_wav(path, x, RATE)
    back = load_wav(path).samples
    assert back.size == x.size
    assert np.max(np.abs(back - x)) <= (np.max(np.abs(x)) + 0.5) / 32768.0


def test_eight_bit_decoding(tmp_path):
    # unsigned bytes center on 128
    data = bytes([128, 255, 0, 192])
    path = tmp_path / "u8.wav"
    path.write_bytes(_riff(_fmt(1, 1, 8000, 8), data))
    clip = load_wav(str(path))
    assert clip.sample_rate == 8000
    assert np.allclose(clip.samples, [0.0, 127 / 128, -1.0, 0.5])


def test_twenty_four_bit_decoding(tmp_path):
    vals = [0x7FFFFF, -0x800000, 0, 0x400000]
    body = b"".join(struct.pack("<i", v)[:3] for v in vals)
    path = tmp_path / "s24.wav"
    path.write_bytes(_riff(_fmt(1, 1, 22050, 24), body))
    clip = load_wav(str(path))
    expect = [v / float(1 << 23) for v in vals]
    assert np.allclose(clip.samples, expect)


def test_stereo_averaged_to_mono(tmp_path):
    frames = struct.pack("<4h", 16384, -16384, 8192, 8192)
    path = tmp_path / "st.wav"
    path.write_bytes(_riff(_fmt(1, 2, RATE, 16), frames))
    clip = load_wav(str(path))
    assert np.allclose(clip.samples, [0.0, 0.25])


def test_rejects_non_pcm_and_bad_depths(tmp_path):
    p1 = tmp_path / "float.wav"
    p1.write_bytes(_riff(_fmt(3, 1, RATE, 32), b"\x00" * 8))
    with pytest.raises(NonPcmError):
        load_wav(str(p1))
    p2 = tmp_path / "b32.wav"
    p2.write_bytes(_riff(_fmt(1, 1, RATE, 32), b"\x00" * 8))
    with pytest.raises(NonPcmError):
        load_wav(str(p2))


def test_rejects_broken_containers(tmp_path):
    p = tmp_path / "junk.wav"
    p.write_bytes(b"RIFX" + b"\x00" * 40)
    with pytest.raises(WavReadError):
        load_wav(str(p))
    p.write_bytes(b"RIFF" + struct.pack("<I", 4) + b"WAVE")  # no chunks at all
    with pytest.raises(WavReadError):
        load_wav(str(p))
    with pytest.raises(WavReadError):
        load_wav(str(tmp_path / "absent.wav"))


def test_rejects_empty_data_chunk(tmp_path):
    p = tmp_path / "empty.wav"
    p.write_bytes(_riff(_fmt(1, 1, RATE, 16), b""))
    with pytest.raises(EmptyAudioError):
        load_wav(str(p))


def test_resample_preserves_tone():
    src_rate = 44100
    t = np.arange(src_rate) / src_rate
    x = 0.5 * np.sin(2.0 * math.pi * 440.0 * t)
    out = resample(AudioClip(x, src_rate, "tone"))
    assert out.sample_rate == RATE
    assert out.samples.size == round(x.size * RATE / src_rate)
    assert out.source_id == "tone"

    ref = 0.5 * np.sin(2.0 * math.pi * 440.0 * np.arange(out.samples.size) / RATE)
    # ignore filter edges when comparing
    a, b = out.samples[200:-200], ref[200:-200]
    r = float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))
    assert r > 0.999


def test_resample_upsamples():
    src_rate = 8000
    t = np.arange(4000) / src_rate
    x = 0.5 * np.sin(2.0 * math.pi * 300.0 * t)
    out = resample(AudioClip(x, src_rate))
    assert out.sample_rate == RATE
    assert abs(out.duration - 0.5) < 1.0 / RATE
    ref = 0.5 * np.sin(2.0 * math.pi * 300.0 * np.arange(out.samples.size) / RATE)
    a, b = out.samples[200:-200], ref[200:-200]
    r = float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))
    assert r > 0.999


def test_resample_identity_and_validation():
    clip = AudioClip(np.zeros(100), RATE)
    assert resample(clip) is clip
    with pytest.raises(InputError):
        resample(clip, target_rate=0)
