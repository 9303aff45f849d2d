"""Per-corpus epoch sampling and size-capped batch packing.

Mixing corpora of very different sizes needs downsampling: each split
contributes floor(ratio * N) entries per epoch, drawn without
replacement with a fresh seed per epoch. Batches then pack entries
first-fit by descending length under a summed-samples cap.
"""

from collections import Counter

from stforge.sampler import (
    BatchSpec,
    ManifestEntry,
    SamplingSpec,
    batch_stats,
    build_batches,
    epoch_sample,
)


def corpus():
    entries = []
    for split, n in (("MuST-C-train", 40), ("EuroparlST-train", 10), ("CoVoST-train", 50)):
        tag = split.split("-")[0].lower()
        entries.extend(
            ManifestEntry(f"{tag}{i}", f"{tag}{i}.wav", 8000 * (1 + i % 40), 5, split)
            for i in range(n)
        )
    return entries


def main():
    entries = corpus()
    spec = SamplingSpec()
    print("sampling ratios:", spec.ratios)

    for epoch in range(3):
        drawn = epoch_sample(entries, spec, epoch_seed=epoch)
        by_split = Counter(e.split for e in drawn)
        print(f"epoch {epoch}: {len(drawn):3d} entries  {dict(by_split)}")
    print("CoVoST contributes floor(0.3 * 50) = 15 every epoch, different 15 each time")

    batch_spec = BatchSpec(max_batch_samples=440_000)
    batches = build_batches(epoch_sample(entries, spec, epoch_seed=0), batch_spec)
    stats = batch_stats(batches)
    print(f"\npacked into {stats['num_batches']} batches:")
    for key in ("num_entries", "max_batch_samples", "mean_batch_samples"):
        print(f"  {key} = {stats[key]}")
    worst = max(sum(e.n_samples for e in b) for b in batches)
    print(f"  largest batch carries {worst} samples (cap {batch_spec.max_batch_samples})")


if __name__ == "__main__":
    main()
