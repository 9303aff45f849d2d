"""Waveform augmentation: tempo, pitch, echo, and the sampling policy."""

import random

import numpy as np

from stforge.audio import AudioClip
from stforge.augment import AugmentPolicy, apply_augmentation, echo, pitch, sample_params, tempo


def tone(freq=440.0, seconds=1.0, rate=16000):
    t = np.arange(int(seconds * rate)) / rate
    return AudioClip(0.5 * np.sin(2 * np.pi * freq * t), rate)


def dominant_hz(clip):
    spectrum = np.abs(np.fft.rfft(clip.samples * np.hanning(len(clip.samples))))
    return np.fft.rfftfreq(len(clip.samples), 1.0 / clip.sample_rate)[spectrum.argmax()]


def main():
    clip = tone()
    print(f"input: {clip.duration:.3f} s of 440 Hz")

    # time stretch changes duration, not pitch
    for factor in (0.85, 1.3):
        out = tempo(clip, factor)
        print(
            f"tempo x{factor}: {out.duration:.3f} s "
            f"(expected ~{clip.duration / factor:.3f}), peak {dominant_hz(out):.0f} Hz"
        )

    # pitch shift changes frequency, not duration
    for cents in (300, -300):
        out = pitch(clip, cents)
        print(f"pitch {cents:+d} cents: peak {dominant_hz(out):.1f} Hz, {out.duration:.3f} s")

    echoed = echo(clip, delay_ms=100.0, decay=0.2)
    print(f"echo 100 ms @ 0.2: peak amplitude {np.max(np.abs(echoed.samples)):.3f}")

    policy = AugmentPolicy()
    rng = random.Random(0)
    draws = [sample_params(policy, rng) for _ in range(10_000)]
    hit = sum(p is not None for p in draws)
    print(f"\npolicy hits {hit / len(draws):.1%} of clips (target p_aug={policy.p_aug})")

    params = next(p for p in draws if p is not None)
    out = apply_augmentation(clip, params)
    print(
        f"one draw: tempo {params.tempo:.3f}, pitch {params.pitch_cents:+.0f} cents, "
        f"echo {params.echo_delay_ms:.0f} ms @ {params.echo_decay:.2f} -> {out.duration:.3f} s"
    )


if __name__ == "__main__":
    main()
