"""Splitting long recordings where the recognizer hears nothing.

A frame transcript assigns one ASR token to every fixed-width frame.
Frames without letters are untranscribable; maximal runs of them longer
than min_gap are candidate split points. The splitter cuts at the
middle of the largest gap, recursing until every piece fits max_seg_len.
"""

import random

from stforge.segmenter import (
    FrameTranscript,
    SegmentationConfig,
    find_gaps,
    split_recursive,
    sweep_max_seg_len,
)


def synthetic_talk(seed, n_frames=3000):
    # alternate speech stretches with pauses of varying length; only
    # pauses reaching min_gap become candidate split points
    rng = random.Random(seed)
    tokens = []
    while len(tokens) < n_frames:
        tokens.extend(["wort"] * rng.randint(50, 300))
        tokens.extend([""] * rng.randint(4, 40))
    return FrameTranscript("talk.wav", 20, tuple(tokens[:n_frames]))  # 20 ms frames


def main():
    talk = synthetic_talk(7)
    print(f"transcript: {len(talk.tokens)} frames, {talk.duration:.0f} s")

    gaps = find_gaps(talk, min_gap=0.2)
    print(f"gaps of at least 0.2 s: {len(gaps)} (longest {max(g.num_frames for g in gaps)} frames)")

    cfg = SegmentationConfig(max_seg_len=10.0, min_gap=0.2)
    segments = split_recursive(talk, cfg)
    print(f"\nsplit with max_seg_len={cfg.max_seg_len}: {len(segments)} segments")
    for seg in segments[:5]:
        print(f"  {seg.wav} offset={seg.offset:7.2f} duration={seg.duration:6.2f}")
    print("  ...")

    # shorter caps force more cuts; the count can only fall as the cap grows
    swept = sweep_max_seg_len([talk], lo=5.0, hi=25.0, step=5.0, min_gap=0.2)
    print("\nmax_seg_len sweep:")
    for value in sorted(swept):
        print(f"  {value:5.1f} s -> {len(swept[value]):3d} segments")


if __name__ == "__main__":
    main()
