"""Scoring translations of audio the system segmented by itself.

When the system picks its own segment boundaries, its output lines do
not correspond to the reference lines, so corpus BLEU cannot be taken
directly. The fix: concatenate the hypothesis words and re-split them
to minimize total word edit distance against the reference segments,
then score the realigned groups.
"""

from stforge.evalign import corpus_bleu, resegment_mwer, tokenize_13a


def main():
    print("tokenizer (international BLEU convention):")
    for text in ("Hello, world!", "A 4.5% rise; nice."):
        print(f"  {text!r} -> {tokenize_13a(text)}")

    refs = [
        tokenize_13a("Good morning dear ladies."),
        tokenize_13a("And dearest gentlemen, welcome here!"),
    ]

    # the system produced 3 segments where the reference has 2
    hyp_lines = ["Good morning", "dear ladies. And dearest", "gentlemen, welcome here!"]
    stream = [tok for line in hyp_lines for tok in tokenize_13a(line)]
    groups = resegment_mwer(stream, refs)
    print("\nresegmented hypothesis stream:")
    for group, ref in zip(groups, refs):
        print(f"  {' '.join(group):45s} | ref: {' '.join(ref)}")

    result = corpus_bleu(groups, refs)
    precisions = "/".join(f"{100 * p:.1f}" for p in result.precisions)
    print(
        f"\nBLEU = {result.score:.2f} {precisions} "
        f"(bp = {result.brevity_penalty:.3f}, hyp_len = {result.hyp_len}, ref_len = {result.ref_len})"
    )
    print("a perfect realignment scores 100 even though line counts differed")


if __name__ == "__main__":
    main()
