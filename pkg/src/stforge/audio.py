"""Audio container, WAV file I/O, resampling, and per-clip normalization.

All functions are pure: they take and return immutable :class:`AudioClip`
values and never mutate their inputs, so callers may parallelize over files.
Pipeline-internal audio is mono; integer WAV data is scaled to [-1, 1] on
load by dividing by 32768.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

INT16_SCALE = 32768.0  # symmetric choice: -32768 maps to exactly -1.0
RESAMPLE_TAPS = 64


class AudioError(Exception):
    """Unreadable or unsupported audio input."""


def _as_readonly(samples: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(samples, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1] and a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = np.asarray(self.samples)
        if arr.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {arr.shape}")
        object.__setattr__(self, "samples", _as_readonly(arr))

    @property
    def duration(self) -> float:
        """Length in seconds (exact by definition)."""
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


def load_wav(path) -> AudioClip:
    """Read a mono PCM WAV file (16-bit int or 32-bit float).

    Integer samples are scaled to [-1, 1] by dividing by 32768. Raises
    :class:`AudioError` with the offending path for missing files,
    non-mono data, and unsupported encodings.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise AudioError(f"{path}: no such file")
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise AudioError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.ndim != 1:
        raise AudioError(f"{path}: non-mono ({data.shape[1]} channels)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / INT16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioError(f"{path}: unsupported encoding {data.dtype} (need int16 or float32)")
    return AudioClip(samples, int(rate))


def write_wav(path, clip: AudioClip, encoding: str = "pcm16") -> None:
    """Write a clip as RIFF WAV; ``encoding`` is ``pcm16`` or ``float32``.

    pcm16 rounds samples*32768 and clips to the int16 range, so a clip
    loaded from a 16-bit file round-trips bit-exactly. ``path`` may be
    an open binary file object.
    """
    target = path if hasattr(path, "write") else os.fspath(path)
    if encoding == "pcm16":
        ints = np.clip(np.round(clip.samples * INT16_SCALE), -32768, 32767).astype(np.int16)
        wavfile.write(target, clip.sample_rate, ints)
    elif encoding == "float32":
        wavfile.write(target, clip.sample_rate, clip.samples.astype(np.float32))
    else:
        raise ValueError(f"unknown encoding {encoding!r}")


def _sinc_resample(x: np.ndarray, in_rate: float, out_rate: float) -> np.ndarray:
    """Band-limited resampling with a fixed 64-tap windowed-sinc kernel.

    Output length is round(len(x) * out_rate / in_rate). The kernel is a
    Hann-windowed sinc, low-passed at min(in, out) Nyquist, with per-output
    normalization to unity DC gain. Rates may be fractional; only their
    ratio matters.
    """
    n = len(x)
    ratio = out_rate / in_rate
    out_len = int(np.floor(n * ratio + 0.5))
    if out_len == 0 or n == 0:
        return np.zeros(0)
    cutoff = min(1.0, ratio)
    half = RESAMPLE_TAPS // 2
    # Input-time positions of output samples, and the tap grid around them.
    t = np.arange(out_len) / ratio
    base = np.floor(t).astype(np.int64)
    offsets = np.arange(-half + 1, half + 1)
    idx = base[:, None] + offsets[None, :]
    delta = idx - t[:, None]
    kernel = cutoff * np.sinc(cutoff * delta)
    kernel *= 0.5 + 0.5 * np.cos(np.pi * delta / half)
    kernel /= kernel.sum(axis=1, keepdims=True)
    padded = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])
    return np.einsum("ot,ot->o", kernel, padded[idx + half])


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample to ``target_rate`` Hz via windowed-sinc interpolation."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    return AudioClip(_sinc_resample(clip.samples, clip.sample_rate, target_rate), target_rate)


def normalize_zero_mean_unit_var(clip: AudioClip) -> AudioClip:
    """Normalize to zero mean and unit (population) variance.

    Constant clips come out all-zero: silent segments occur in real
    corpora and must not error.
    """
    if len(clip) < 2:
        raise ValueError(f"need at least 2 samples to normalize, got {len(clip)}")
    centered = clip.samples - clip.samples.mean()
    std = np.sqrt(np.mean(centered**2))
    if std < 1e-12:
        return AudioClip(np.zeros(len(clip)), clip.sample_rate)
    return AudioClip(centered / std, clip.sample_rate)


def extract_segment(clip: AudioClip, offset: float, duration: float) -> AudioClip:
    """Cut [offset, offset+duration) seconds out of a clip.

    The request may overshoot the clip end by at most one sample.
    """
    if offset < 0:
        raise ValueError(f"negative offset {offset}")
    if duration < 0:
        raise ValueError(f"negative duration {duration}")
    if offset + duration > clip.duration + 1.0 / clip.sample_rate:
        raise ValueError(
            f"segment [{offset:.6f}, {offset + duration:.6f}) out of range for a {clip.duration:.6f} s clip"
        )
    start = int(np.floor(offset * clip.sample_rate + 0.5))
    end = int(np.floor((offset + duration) * clip.sample_rate + 0.5))
    end = min(end, len(clip))
    return AudioClip(clip.samples[start:end].copy(), clip.sample_rate)
