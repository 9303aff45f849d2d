"""The whole pipeline through the command-line interface.

Builds a small synthetic fixture (WAVs, frame transcripts, a manifest,
ASR hypotheses) in a temp directory, then drives stforge's subcommands
exactly as a shell script would: segment, filter, augment, sample,
batch, score. Rerun it: every artifact is byte-identical under the
same seed.
"""

import json
import pathlib
import tempfile

import numpy as np

from stforge.audio import AudioClip, write_wav
from stforge.cli import main as stforge
from stforge.sampler import ManifestEntry, write_manifest

TEXTS = [
    ("Guten Morgen meine Damen", "Good morning dear ladies"),
    ("und sehr geehrte Herren", "and dearest gentlemen too"),
    ("das Wetter bleibt heute gut", "the weather stays good today"),
    ("die Reise beginnt morgen früh", "the journey starts tomorrow morning"),
]


def build_fixture(root: pathlib.Path):
    (root / "audio").mkdir()
    rate = 16000
    entries, hyps, frames = [], [], []
    for i, (src, tgt) in enumerate(TEXTS):
        ident = f"u{i}"
        t = np.arange(rate + 2000 * i) / rate
        write_wav(root / "audio" / f"{ident}.wav", AudioClip(0.4 * np.sin(2 * np.pi * (220 + 30 * i) * t), rate))
        entries.append(ManifestEntry(ident, f"{ident}.wav", len(t), len(tgt.split()), "MuST-C-train", src, tgt))
        hyps.append(f"{ident}\t{src.lower()}")
        frames.append(json.dumps({"audio": f"{ident}.wav", "frame_ms": 100, "tokens": ["ja"] * 30 + [""] * 5 + ["ja"] * 30}))
    with open(root / "manifest.tsv", "w", encoding="utf-8") as fh:
        write_manifest(entries, fh)
    (root / "hyps.tsv").write_text("\n".join(hyps) + "\n", encoding="utf-8")
    (root / "frames.jsonl").write_text("\n".join(frames) + "\n", encoding="utf-8")
    (root / "ref.txt").write_text("".join(t + "\n" for _, t in TEXTS), encoding="utf-8")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        root = pathlib.Path(tmp)
        build_fixture(root)
        steps = [
            ["segment", "--transcripts", f"{root}/frames.jsonl", "--max-seg-len", "4", "--out", f"{root}/segments.yaml"],
            ["filter", "--manifest", f"{root}/manifest.tsv", "--asr-hyps", f"{root}/hyps.tsv",
             "--out", f"{root}/kept.tsv", "--report", f"{root}/report.tsv"],
            ["--seed", "9", "augment", "--in", f"{root}/kept.tsv", "--audio-root", f"{root}/audio",
             "--out", f"{root}/augmented"],
            ["--seed", "9", "sample", "--manifest", f"{root}/kept.tsv", "--epoch", "0", "--out", f"{root}/epoch0.tsv"],
            ["batch", "--in", f"{root}/epoch0.tsv", "--out", f"{root}/batches.jsonl"],
            ["score", "--hyp", f"{root}/ref.txt", "--ref", f"{root}/ref.txt"],
        ]
        for argv in steps:
            print(f"$ stforge {' '.join(argv)}")
            rc = stforge(argv)
            assert rc == 0, rc

        print("\nartifacts:")
        for path in sorted(root.rglob("*")):
            if path.is_file():
                print(f"  {path.relative_to(root)}  ({path.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
