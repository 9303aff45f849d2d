"""Audio basics: clips, WAV round-trips, resampling, cutting.

Everything downstream (segmentation, augmentation) consumes AudioClip,
an immutable float64 buffer plus a sample rate. This walkthrough builds
a tone, saves and reloads it, resamples it, and cuts a piece out.
"""

import tempfile

import numpy as np

from stforge.audio import (
    AudioClip,
    extract_segment,
    load_wav,
    normalize_zero_mean_unit_var,
    resample,
    write_wav,
)


def main():
    rate = 16000
    t = np.arange(rate) / rate
    clip = AudioClip(0.5 * np.sin(2 * np.pi * 440.0 * t), rate)
    print(f"built a 440 Hz tone: {clip.duration:.2f} s at {clip.sample_rate} Hz")

    with tempfile.NamedTemporaryFile(suffix=".wav") as fh:
        write_wav(fh.name, clip)
        back = load_wav(fh.name)
    print(f"pcm16 round trip: max abs error {np.max(np.abs(back.samples - clip.samples)):.2e}")

    down = resample(clip, 8000)
    print(f"resampled to 8 kHz: {len(down.samples)} samples ({down.duration:.2f} s)")

    norm = normalize_zero_mean_unit_var(clip)
    print(f"normalized: mean {norm.samples.mean():+.2e}, power {np.mean(norm.samples ** 2):.4f}")

    middle = extract_segment(clip, offset=0.25, duration=0.5)
    print(f"cut [0.25 s, 0.75 s): {len(middle.samples)} samples")


if __name__ == "__main__":
    main()
