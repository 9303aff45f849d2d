"""Cleaning transcripts and dropping pairs the audio cannot support.

Subtitle-style transcripts carry speaker labels, bracketed event marks,
and typography the audio never says. The cleanup strips those; the gate
then compares the cleaned source against an ASR hypothesis and drops
the pair when the word error rate exceeds 0.5.
"""

from stforge.textfilter import (
    FilterConfig,
    TranscriptPair,
    clean_target,
    filter_pair,
    normalize_for_asr,
    number_to_words,
    strip_speaker_prefix,
    word_error_rate,
)


def main():
    print("speaker prefixes go:")
    for raw in ("David Gallo: Das ist Bill Lange.", "DG: Genau.", "Es ist 15:30 Uhr."):
        print(f"  {raw!r} -> {strip_speaker_prefix(raw)!r}")

    print("\nevent marks go, quoted speech survives:")
    for raw in ("Danke. (Applaus)", "(Musik) Guten Morgen.", "(Mann: Lauf!)"):
        print(f"  {raw!r} -> {clean_target(raw)!r}")

    print("\nnumbers spell out for WER scoring:")
    for n in ("7", "25", "101", "1984"):
        print(f"  {n} -> {number_to_words(n)}")
    print(f"  normalize_for_asr('25 Katzen!') -> {normalize_for_asr('25 Katzen!')}")

    cfg = FilterConfig()
    print(f"\ngate at WER <= {cfg.wer_threshold}, length <= {cfg.max_samples} samples:")
    cases = [
        ("gut e0", 16000, "Guten Morgen allerseits", ["guten", "morgen", "allerseits"]),
        ("bad e1", 16000, "Guten Morgen allerseits", ["etwas", "ganz", "anderes"]),
        ("long e2", 500_000, "Guten Morgen allerseits", ["guten", "morgen", "allerseits"]),
    ]
    for ident, n_samples, src, hyp in cases:
        pair = TranscriptPair(ident, n_samples, src, "good morning everyone")
        decision = filter_pair(pair, hyp, cfg)
        rate = word_error_rate(hyp, normalize_for_asr(src))
        verdict = "keep" if decision.keep else f"drop ({decision.reason})"
        print(f"  {ident}: WER {rate:.2f} -> {verdict}")


if __name__ == "__main__":
    main()
