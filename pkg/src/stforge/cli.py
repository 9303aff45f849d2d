"""Command-line entry point: every pipeline stage as a subcommand.

Shared behavior: a ``--config`` file supplies defaults (overridable by
``STFORGE_*`` environment variables, then by flags), ``--seed`` pins all
randomness, outputs are written atomically, and reruns with identical
inputs produce byte-identical artifacts. Exit codes: 0 success, 1
processing error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor

from . import config as config_mod
from .audio import load_wav, write_wav
from .augment import AugmentPolicy, apply_augmentation, sample_params
from .coupling import build_reference_inventory, group_counts, lna_trainable_mask
from .evalign import corpus_bleu, resegment_mwer, score_segmentation, tokenize_13a
from .ioutil import atomic_write
from .sampler import (
    BatchSpec,
    batch_stats,
    build_batches,
    epoch_sample,
    filter_lengths,
    read_manifest,
    write_manifest,
)
from .segmenter import (
    SegmentationConfig,
    parse_frame_transcript,
    parse_segments_yaml,
    split_recursive,
    sweep_max_seg_len,
    write_segments_yaml,
)
from .textfilter import FilterConfig, TranscriptPair, clean_target, filter_pair, normalize_for_asr

logger = logging.getLogger("stforge.cli")

EPOCH_SEED_STRIDE = 1_000_003  # epoch_seed = seed * stride + epoch


def _read_text(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _map_ordered(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _pick(flag_value, config_value):
    return config_value if flag_value is None else flag_value


def cmd_segment(args, cfg: config_mod.PipelineConfig) -> int:
    seg_cfg = SegmentationConfig(
        max_seg_len=_pick(args.max_seg_len, cfg.segmentation.max_seg_len),
        min_gap=_pick(args.min_gap, cfg.segmentation.min_gap),
    )
    transcripts = parse_frame_transcript(_read_text(args.transcripts))
    per_file = _map_ordered(lambda t: split_recursive(t, seg_cfg), transcripts, args.jobs)
    segments = [seg for segs in per_file for seg in segs]
    with atomic_write(args.out) as fh:
        fh.write(write_segments_yaml(segments))
    logger.info("segmented %d files into %d segments", len(transcripts), len(segments))
    return 0


def cmd_sweep(args, cfg: config_mod.PipelineConfig) -> int:
    transcripts = parse_frame_transcript(_read_text(args.transcripts))
    min_gap = _pick(args.min_gap, cfg.segmentation.min_gap)
    swept = sweep_max_seg_len(transcripts, args.lo, args.hi, args.step, min_gap)
    with atomic_write(args.out) as fh:
        for value in sorted(swept):
            fh.write(f"{value:g}\t{len(swept[value])}\n")
    if args.seg_dir:
        for value, segments in sorted(swept.items()):
            path = os.path.join(args.seg_dir, f"max_seg_len_{value:g}.yaml")
            with atomic_write(path) as fh:
                fh.write(write_segments_yaml(segments))
    logger.info("swept %d max_seg_len values", len(swept))
    return 0


def _read_hyps_tsv(path) -> dict:
    hyps = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line:
            continue
        ident, sep, text = line.partition("\t")
        if not sep:
            raise ValueError(f"{path} line {lineno}: expected id<TAB>text")
        hyps[ident] = text
    return hyps


def cmd_filter(args, cfg: config_mod.PipelineConfig) -> int:
    fcfg = FilterConfig(
        event_lexicon=cfg.filter.event_lexicon,
        wer_threshold=_pick(args.wer_threshold, cfg.filter.wer_threshold),
        max_samples=_pick(args.max_samples, cfg.filter.max_samples),
    )
    entries = read_manifest(_read_text(args.manifest))
    hyps = _read_hyps_tsv(args.asr_hyps)
    kept, dropped = [], []
    for entry in entries:
        if entry.id not in hyps:
            raise ValueError(f"{entry.id}: no ASR hypothesis in {args.asr_hyps}")
        # text filters run first, then the length and WER gates judge
        # the filtered pair; thousands separators are a EuroparlST quirk
        fix_thousands = entry.split.startswith("EuroparlST")
        cleaned = dataclasses.replace(
            entry,
            src_text=clean_target(entry.src_text, fcfg.event_lexicon, fix_thousands),
            tgt_text=clean_target(entry.tgt_text, fcfg.event_lexicon, fix_thousands),
        )
        pair = TranscriptPair(cleaned.id, cleaned.n_samples, cleaned.src_text, cleaned.tgt_text)
        decision = filter_pair(pair, normalize_for_asr(hyps[entry.id]), fcfg)
        if decision.keep:
            kept.append(cleaned)
        else:
            dropped.append((entry.id, decision.reason))
    with atomic_write(args.out) as fh:
        write_manifest(kept, fh)
    with atomic_write(args.report) as fh:
        for ident, reason in dropped:
            fh.write(f"{ident}\t{reason}\n")
    logger.info("kept %d of %d entries (%d dropped)", len(kept), len(entries), len(dropped))
    return 0


def cmd_augment(args, cfg: config_mod.PipelineConfig) -> int:
    base = cfg.augment_policy
    policy = AugmentPolicy(
        p_aug=_pick(args.p_aug, base.p_aug),
        tempo_range=tuple(_pick(args.tempo, base.tempo_range)),
        pitch_range_cents=tuple(_pick(args.pitch, base.pitch_range_cents)),
        echo_delay_ms_range=tuple(_pick(args.echo_delay, base.echo_delay_ms_range)),
        echo_decay_range=tuple(_pick(args.echo_decay, base.echo_decay_range)),
    )
    seed = _pick(args.seed, cfg.seed)
    audio_root = _pick(args.audio_root, cfg.audio_root)

    if args.input.endswith(".tsv"):
        entries = read_manifest(_read_text(args.input))
        items = [(e.id, os.path.join(audio_root, e.audio)) for e in entries]
    else:
        stem = os.path.splitext(os.path.basename(args.input))[0]
        items = [(stem, args.input)]
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        raise ValueError("duplicate output names; ids must be unique")

    def worker(item):
        name, path = item
        clip = load_wav(path)
        # per-file stream: stable under reordering and parallelism
        rng = random.Random(f"{seed}:{name}")
        params = sample_params(policy, rng)
        return name, params, apply_augmentation(clip, params)

    results = _map_ordered(worker, items, args.jobs)
    for name, _, clip in results:
        with atomic_write(os.path.join(args.out, f"{name}.wav"), "wb") as fh:
            write_wav(fh, clip)
    with atomic_write(os.path.join(args.out, "augment_log.tsv")) as fh:
        for name, params, _ in results:
            if params is None:
                fh.write(f"{name}\t0\t-\t-\t-\t-\n")
            else:
                fh.write(
                    f"{name}\t1\t{params.tempo:.6f}\t{params.pitch_cents:.6f}"
                    f"\t{params.echo_delay_ms:.6f}\t{params.echo_decay:.6f}\n"
                )
    logger.info("augmented %d of %d clips", sum(1 for _, p, _ in results if p), len(results))
    return 0


def cmd_sample(args, cfg: config_mod.PipelineConfig) -> int:
    entries = read_manifest(_read_text(args.manifest))
    seed = _pick(args.seed, cfg.seed)
    chosen = epoch_sample(entries, cfg.sampling, seed * EPOCH_SEED_STRIDE + args.epoch)
    with atomic_write(args.out) as fh:
        write_manifest(chosen, fh)
    logger.info("epoch %d: sampled %d of %d entries", args.epoch, len(chosen), len(entries))
    return 0


def cmd_batch(args, cfg: config_mod.PipelineConfig) -> int:
    bspec = BatchSpec(
        max_batch_samples=_pick(args.max_batch, cfg.batch.max_batch_samples),
        max_src_samples=cfg.batch.max_src_samples,
        max_tgt_tokens=cfg.batch.max_tgt_tokens,
    )
    entries = read_manifest(_read_text(args.input))
    usable = filter_lengths(entries, bspec)
    if len(usable) < len(entries):
        logger.info("dropped %d over-length entries", len(entries) - len(usable))
    batches = build_batches(usable, bspec)
    with atomic_write(args.out) as fh:
        for i, batch in enumerate(batches):
            row = {
                "index": i,
                "n_entries": len(batch),
                "total_samples": sum(e.n_samples for e in batch),
                "ids": [e.id for e in batch],
            }
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    print(json.dumps(batch_stats(batches), sort_keys=True))
    return 0


def _bleu_line(result) -> str:
    p = "/".join(f"{100.0 * x:.1f}" for x in result.precisions)
    line = (
        f"BLEU = {result.score:.2f} {p} (bp = {result.brevity_penalty:.3f}, "
        f"hyp_len = {result.hyp_len}, ref_len = {result.ref_len})"
    )
    if result.empty_hyp:
        line += " [empty hypothesis]"
    return line


def cmd_score(args, cfg: config_mod.PipelineConfig) -> int:
    hyp_lines = _read_text(args.hyp).splitlines()
    ref_lines = _read_text(args.ref).splitlines()
    refs = [tokenize_13a(line) for line in ref_lines]
    if args.resegment:
        hyp_tokens = [tok for line in hyp_lines for tok in tokenize_13a(line)]
        groups = resegment_mwer(hyp_tokens, refs)
    else:
        if len(hyp_lines) != len(ref_lines):
            raise ValueError(
                f"{len(hyp_lines)} hypothesis lines vs {len(ref_lines)} references; "
                "use --resegment for unaligned output"
            )
        groups = [tokenize_13a(line) for line in hyp_lines]
    print(_bleu_line(corpus_bleu(groups, refs)))
    return 0


def _sweep_value(stem: str) -> float:
    tail = stem.rsplit("_", 1)[-1]
    try:
        return float(tail)
    except ValueError:
        raise ValueError(f"cannot read a max_seg_len value from file name {stem!r}") from None


def cmd_sweep_score(args, cfg: config_mod.PipelineConfig) -> int:
    refs = [tokenize_13a(line) for line in _read_text(args.ref).splitlines()]
    rows = []
    names = sorted(n for n in os.listdir(args.segdir) if n.endswith((".yaml", ".yml")))
    if not names:
        raise ValueError(f"no segmentation YAML files in {args.segdir}")
    for name in names:
        stem = os.path.splitext(name)[0]
        value = _sweep_value(stem)
        segments = parse_segments_yaml(_read_text(os.path.join(args.segdir, name)))
        trans_path = os.path.join(args.trans, stem + ".txt")
        translations = _read_text(trans_path).splitlines()
        if len(translations) != len(segments):
            raise ValueError(
                f"{trans_path}: {len(translations)} translations for {len(segments)} segments"
            )
        result = score_segmentation(segments, translations, refs)
        rows.append((value, result.score))
    rows.sort()
    with atomic_write(args.out) as fh:
        for value, score in rows:
            fh.write(f"{value:g}\t{score:.4f}\n")
    logger.info("scored %d segmentations", len(rows))
    return 0


def cmd_params_report(args, cfg: config_mod.PipelineConfig) -> int:
    inv = build_reference_inventory()
    if args.lna:
        inv = lna_trainable_mask(inv)
    groups = group_counts(inv)
    name_width = max(len(g) for g in groups)
    header = f"{'group':<{name_width}}  {'params':>12}"
    if args.lna:
        header += f"  {'trainable':>12}"
    print(header)
    for group, (total, trainable) in groups.items():
        line = f"{group:<{name_width}}  {total:>12,}"
        if args.lna:
            line += f"  {trainable:>12,}"
        print(line)
    print(f"total parameters: {inv.total_params():,}")
    if args.lna:
        print(f"trainable parameters: {inv.trainable_params():,}")
        print(f"trainable fraction: {inv.trainable_fraction():.4f}")
    return 0


def _range_flag(sub, name: str, help_text: str) -> None:
    sub.add_argument(name, nargs=2, type=float, default=None, metavar=("LO", "HI"), help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stforge",
        description="Corpus engineering and evaluation for end-to-end speech translation.",
    )
    parser.add_argument("--config", default=None, help="configuration file (TOML-like)")
    parser.add_argument("--seed", type=int, default=None, help="seed controlling all randomness")
    parser.add_argument("--jobs", type=int, default=1, help="file-level worker count")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("segment", help="split audio at untranscribable periods")
    p.add_argument("--transcripts", required=True, help="frame-transcript JSONL")
    p.add_argument("--max-seg-len", type=float, default=None, help="max segment seconds")
    p.add_argument("--min-gap", type=float, default=None, help="min splittable gap seconds")
    p.add_argument("--out", required=True, help="segment YAML output")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("sweep", help="segment once per max_seg_len value")
    p.add_argument("--transcripts", required=True, help="frame-transcript JSONL")
    p.add_argument("--lo", type=float, default=5.0, help="first max_seg_len value")
    p.add_argument("--hi", type=float, default=25.0, help="last max_seg_len value")
    p.add_argument("--step", type=float, default=1.0, help="grid step")
    p.add_argument("--min-gap", type=float, default=None, help="min splittable gap seconds")
    p.add_argument("--out", required=True, help="TSV of (max_seg_len, segment count)")
    p.add_argument("--seg-dir", default=None, help="also write one segment YAML per value here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("filter", help="keep/drop training pairs")
    p.add_argument("--manifest", required=True, help="input manifest TSV")
    p.add_argument("--asr-hyps", required=True, help="TSV of id<TAB>ASR hypothesis")
    p.add_argument("--wer-threshold", type=float, default=None, help="drop pairs above this WER")
    p.add_argument("--max-samples", type=int, default=None, help="drop longer sources")
    p.add_argument("--out", required=True, help="kept-entries manifest TSV")
    p.add_argument("--report", required=True, help="TSV of id<TAB>drop reason")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("augment", help="tempo/pitch/echo augmentation")
    p.add_argument("--in", dest="input", required=True, help="WAV file or manifest TSV")
    p.add_argument("--p-aug", type=float, default=None, help="per-clip augmentation probability")
    _range_flag(p, "--tempo", "tempo factor range")
    _range_flag(p, "--pitch", "pitch shift range in cents")
    _range_flag(p, "--echo-delay", "echo delay range in ms")
    _range_flag(p, "--echo-decay", "echo decay range")
    p.add_argument("--audio-root", default=None, help="base dir for manifest audio paths")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("sample", help="draw one epoch with per-split ratios")
    p.add_argument("--manifest", required=True, help="input manifest TSV")
    p.add_argument("--epoch", type=int, default=0, help="epoch number (varies the draw)")
    p.add_argument("--out", required=True, help="epoch manifest TSV")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("batch", help="pack entries into size-capped batches")
    p.add_argument("--in", dest="input", required=True, help="epoch manifest TSV")
    p.add_argument("--max-batch", type=int, default=None, help="summed-samples cap per batch")
    p.add_argument("--out", required=True, help="batches JSONL")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("score", help="corpus BLEU, optionally resegmenting first")
    p.add_argument("--hyp", required=True, help="hypothesis text, one segment per line")
    p.add_argument("--ref", required=True, help="reference text, one segment per line")
    p.add_argument("--resegment", action="store_true", help="realign hypothesis to references")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep-score", help="BLEU per swept segmentation")
    p.add_argument("--segdir", required=True, help="directory of *_<value>.yaml segmentations")
    p.add_argument("--trans", required=True, help="directory of matching .txt translations")
    p.add_argument("--ref", required=True, help="reference text, one segment per line")
    p.add_argument("--out", required=True, help="TSV of (max_seg_len, BLEU)")
    p.set_defaults(func=cmd_sweep_score)

    p = sub.add_parser("params-report", help="architecture parameter inventory")
    p.add_argument("--lna", action="store_true", help="mark the fine-tuned subset")
    p.set_defaults(func=cmd_params_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load_config(args.config, dict(os.environ))
        return args.func(args, cfg)
    except Exception as exc:
        logger.error("%s", exc)
        if args.verbose:
            logger.exception("traceback")
        return 1


def console_main() -> None:
    sys.exit(main())
