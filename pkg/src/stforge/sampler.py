"""Epoch composition and batch packing for the training corpus.

Each epoch re-draws a subset of the over-represented splits at a fixed
ratio, drops over-length examples, and packs the rest into size-capped
batches. Everything is deterministic given the epoch seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

TRAINING_SPLITS = (
    "MuST-C-train",
    "EuroparlST-train",
    "EuroparlST-dev",
    "CoVoST-train",
    "CoVoST-dev",
)

DEFAULT_RATIOS = {
    "MuST-C-train": 1.0,
    "EuroparlST-train": 1.0,
    "EuroparlST-dev": 1.0,
    "CoVoST-train": 0.3,
    "CoVoST-dev": 0.3,
}

MANIFEST_COLUMNS = ("id", "audio", "n_samples", "n_tgt_tokens", "split", "src_text", "tgt_text")


@dataclass(frozen=True)
class ManifestEntry:
    """One training example's bookkeeping row."""

    id: str
    audio: str
    n_samples: int
    n_tgt_tokens: int
    split: str
    src_text: str = ""
    tgt_text: str = ""

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError(f"{self.id}: n_samples must be positive, got {self.n_samples}")
        if self.n_tgt_tokens < 0:
            raise ValueError(f"{self.id}: n_tgt_tokens must be >= 0, got {self.n_tgt_tokens}")
        if self.split not in TRAINING_SPLITS:
            raise ValueError(f"{self.id}: unknown split {self.split!r}")


@dataclass(frozen=True)
class SamplingSpec:
    ratios: dict = field(default_factory=lambda: dict(DEFAULT_RATIOS))

    def __post_init__(self):
        for split, ratio in self.ratios.items():
            if not 0 < ratio <= 1:
                raise ValueError(f"ratio for {split} must be in (0, 1], got {ratio}")


@dataclass(frozen=True)
class BatchSpec:
    max_batch_samples: int = 440000
    max_src_samples: int = 400000
    max_tgt_tokens: int = 1024

    def __post_init__(self):
        if self.max_batch_samples <= 0 or self.max_src_samples <= 0 or self.max_tgt_tokens <= 0:
            raise ValueError("batch limits must be positive")
        if self.max_src_samples > self.max_batch_samples:
            raise ValueError(
                f"max_src_samples {self.max_src_samples} exceeds "
                f"max_batch_samples {self.max_batch_samples}"
            )


def _sample_count(ratio: float, n: int) -> int:
    # floor of the exact product; the tiny rounding step keeps decimal
    # ratios like 0.3 from landing one below an integer product
    return math.floor(round(ratio * n, 9))


def epoch_sample(manifest: list, spec: SamplingSpec, epoch_seed: int) -> list:
    """Draw one epoch's worth of entries.

    Ratio-1.0 splits are included whole; a ratio-r split contributes
    floor(r * N) entries drawn uniformly without replacement. The draw
    and the final order are functions of epoch_seed alone.
    """
    groups: dict = {}
    for entry in manifest:
        if entry.split not in spec.ratios:
            raise ValueError(f"{entry.id}: no sampling ratio for split {entry.split!r}")
        groups.setdefault(entry.split, []).append(entry)

    rng = random.Random(epoch_seed)
    chosen = []
    for split, group in groups.items():  # insertion order: first appearance
        ratio = spec.ratios[split]
        if ratio == 1.0:
            chosen.extend(group)
        else:
            chosen.extend(rng.sample(group, _sample_count(ratio, len(group))))
    rng.shuffle(chosen)
    return chosen


def filter_lengths(entries: list, spec: BatchSpec) -> list:
    """Drop entries over the source-sample or target-token caps."""
    return [
        e
        for e in entries
        if e.n_samples <= spec.max_src_samples and e.n_tgt_tokens <= spec.max_tgt_tokens
    ]


def build_batches(entries: list, spec: BatchSpec) -> list:
    """Pack entries into batches of at most max_batch_samples summed samples.

    Entries are sorted by n_samples descending (stable) and placed
    first-fit, so batches hold similar-length examples and padding waste
    stays bounded. The result is a partition of the input.
    """
    ordered = sorted(entries, key=lambda e: -e.n_samples)
    batches: list = []
    loads: list = []
    for entry in ordered:
        if entry.n_samples > spec.max_batch_samples:
            raise ValueError(
                f"{entry.id}: {entry.n_samples} samples exceed the "
                f"{spec.max_batch_samples}-sample batch cap; run filter_lengths first"
            )
        for i, load in enumerate(loads):
            if load + entry.n_samples <= spec.max_batch_samples:
                batches[i].append(entry)
                loads[i] += entry.n_samples
                break
        else:
            batches.append([entry])
            loads.append(entry.n_samples)
    return batches


def batch_stats(batches: list, accumulation: int = 16, world_size: int = 4) -> dict:
    """Summary numbers for a packed epoch.

    Gradient accumulation and data parallelism are reported as the
    effective-batch multiplier only; nothing here simulates training.
    """
    sizes = [sum(e.n_samples for e in batch) for batch in batches]
    return {
        "num_batches": len(batches),
        "num_entries": sum(len(b) for b in batches),
        "max_batch_samples": max(sizes) if sizes else 0,
        "mean_batch_samples": sum(sizes) / len(sizes) if sizes else 0.0,
        "effective_batch_multiplier": accumulation * world_size,
    }


def read_manifest(stream) -> list:
    """Parse a tab-separated manifest with the standard header.

    Columns: id, audio, n_samples, n_tgt_tokens, split, src_text,
    tgt_text. No quoting; fields must not contain tabs.
    """
    lines = iter(stream.splitlines() if isinstance(stream, str) else stream)
    try:
        header = next(lines).rstrip("\n")
    except StopIteration:
        raise ValueError("empty manifest: missing header") from None
    cols = tuple(header.split("\t"))
    if cols != MANIFEST_COLUMNS:
        raise ValueError(f"bad manifest header: {header!r}")
    entries = []
    for lineno, line in enumerate(lines, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(MANIFEST_COLUMNS):
            raise ValueError(f"manifest line {lineno}: expected {len(MANIFEST_COLUMNS)} fields, got {len(parts)}")
        try:
            entries.append(
                ManifestEntry(
                    id=parts[0],
                    audio=parts[1],
                    n_samples=int(parts[2]),
                    n_tgt_tokens=int(parts[3]),
                    split=parts[4],
                    src_text=parts[5],
                    tgt_text=parts[6],
                )
            )
        except ValueError as exc:
            raise ValueError(f"manifest line {lineno}: {exc}") from None
    return entries


def write_manifest(entries: list, stream) -> None:
    """Serialize entries in the standard tab-separated layout."""
    stream.write("\t".join(MANIFEST_COLUMNS) + "\n")
    for e in entries:
        fields = (e.id, e.audio, str(e.n_samples), str(e.n_tgt_tokens), e.split, e.src_text, e.tgt_text)
        for f in fields:
            if "\t" in f or "\n" in f:
                raise ValueError(f"{e.id}: manifest fields must not contain tabs or newlines")
        stream.write("\t".join(fields) + "\n")
