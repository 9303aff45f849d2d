"""Scoring for re-segmented translation output.

Aligns a hypothesis word stream to reference segments by minimum total
edit distance, tokenizes text the way the mteval-13a scorer does, and
computes corpus BLEU-4 with exponential smoothing. Together these score
a candidate audio segmentation against sentence-level references.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

NGRAM_ORDER = 4

# list of tokens; invariant: no empty tokens
TokenStream = list


@dataclass(frozen=True)
class BleuScore:
    """Corpus BLEU with its components; precisions are ratios in [0, 1]."""

    score: float
    precisions: tuple
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    empty_hyp: bool = False


def tokenize_13a(text: str) -> list[str]:
    """Tokenize like mteval-v13a: split out punctuation, keep numbers whole.

    Periods and commas stay attached only between digits; a dash splits
    only after a digit. HTML entities are mapped back to characters
    first.
    """
    norm = text
    norm = norm.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")

    norm = f" {norm} "
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", " \\1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", "\\1 \\2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", " \\1 \\2", norm)
    norm = re.sub(r"([0-9])(-)", "\\1 \\2 ", norm)
    return norm.split()


_NON_WORD_RE = re.compile(r"[^\w']")


def _align_key(word: str) -> str:
    # lowercased, punctuation-stripped comparison key; pure-punctuation
    # tokens keep their casefolded form so they stay distinguishable
    stripped = _NON_WORD_RE.sub("", word.casefold())
    return stripped if stripped else word.casefold()


def _chain_costs(hyp_keys: list, ref_key_segments: list) -> list:
    """Forward DP table D[s][j]: min total edit distance of assigning the
    first j hypothesis words to the first s reference segments."""
    nhyp = len(hyp_keys)
    # zero segments consume zero words; leftovers are impossible
    d_prev = [0] + [math.inf] * nhyp
    tables = [d_prev]
    for ref in ref_key_segments:
        nref = len(ref)
        # row[l] tracks min over boundary i of D_prev[i] + dist(hyp[i:j], ref[:l])
        row = [d_prev[0] + l for l in range(nref + 1)]
        d_cur = [row[nref]]
        for j in range(1, nhyp + 1):
            word = hyp_keys[j - 1]
            new = [min(row[0] + 1, d_prev[j])]
            for l in range(1, nref + 1):
                new.append(
                    min(
                        row[l] + 1,
                        new[l - 1] + 1,
                        row[l - 1] + (word != ref[l - 1]),
                    )
                )
            row = new
            d_cur.append(row[nref])
        tables.append(d_cur)
        d_prev = d_cur
    return tables


def alignment_cost(hyp_words: list, ref_segments: list) -> int:
    """Minimum total edit distance achievable by resegment_mwer."""
    if not ref_segments:
        raise ValueError("need at least one reference segment")
    hyp_keys = [_align_key(w) for w in hyp_words]
    ref_keys = [[_align_key(w) for w in seg] for seg in ref_segments]
    return int(_chain_costs(hyp_keys, ref_keys)[-1][len(hyp_keys)])


def resegment_mwer(hyp_words: list, ref_segments: list) -> list:
    """Split hyp_words into len(ref_segments) contiguous groups minimizing
    the summed word-level edit distance to the references.

    Comparison runs on lowercased, punctuation-stripped keys; the
    returned groups keep the original tokens. Among optimal splits the
    boundary vector is the lexicographically smallest, so ties fall
    toward earlier boundaries.
    """
    if not ref_segments:
        raise ValueError("need at least one reference segment")
    hyp_keys = [_align_key(w) for w in hyp_words]
    ref_keys = [[_align_key(w) for w in seg] for seg in ref_segments]
    nhyp, nseg = len(hyp_keys), len(ref_keys)

    # suffix costs via the same DP on the reversed problem
    rev_tables = _chain_costs(hyp_keys[::-1], [seg[::-1] for seg in ref_keys[::-1]])

    def suffix_cost(j: int, s: int) -> float:
        # min cost of assigning hyp[j:] to segments s..nseg-1
        return rev_tables[nseg - s][nhyp - j]

    total = suffix_cost(0, 0)
    groups = []
    start = 0
    used = 0
    for s, ref in enumerate(ref_keys):
        nref = len(ref)
        # edit distance of hyp[start:e] vs ref, extended one word at a time
        v = list(range(nref + 1))
        end = -1
        for e in range(start, nhyp + 1):
            if e > start:
                word = hyp_keys[e - 1]
                new = [v[0] + 1]
                for l in range(1, nref + 1):
                    new.append(min(v[l] + 1, new[l - 1] + 1, v[l - 1] + (word != ref[l - 1])))
                v = new
            if used + v[nref] + suffix_cost(e, s + 1) == total:
                end = e
                break
        if end < 0:  # unreachable if the DP is consistent
            raise AssertionError("boundary recovery failed")
        groups.append(list(hyp_words[start:end]))
        used += v[nref]
        start = end
    return groups


def _ngram_counts(tokens: list, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hyp_segments: list, ref_segments: list) -> BleuScore:
    """Corpus BLEU-4 over parallel segment lists.

    Precisions with zero matches are exponentially smoothed: the k-th
    zero order scores 1/(2^k * denominator), with the denominator
    clamped to at least 1 so orders longer than the hypothesis still
    contribute a finite penalty. Brevity penalty is exp(1 - ref/hyp)
    for short hypotheses; an empty hypothesis corpus scores 0 with the
    penalty reported as 0 and flagged.
    """
    if len(hyp_segments) != len(ref_segments):
        raise ValueError(
            f"segment count mismatch: {len(hyp_segments)} hyp vs {len(ref_segments)} ref"
        )
    if not any(ref_segments):
        raise ValueError("need at least one nonempty reference segment")

    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyp_segments, ref_segments):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, NGRAM_ORDER + 1):
            hyp_counts = _ngram_counts(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngram_counts(ref, n)
            total[n - 1] += max(len(hyp) - n + 1, 0)
            correct[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())

    if hyp_len == 0:
        return BleuScore(0.0, (0.0,) * NGRAM_ORDER, 0.0, 0, ref_len, empty_hyp=True)

    precisions = []
    smooth = 1.0
    for n in range(NGRAM_ORDER):
        if correct[n] == 0:
            smooth *= 2.0
            precisions.append(1.0 / (smooth * max(total[n], 1)))
        else:
            precisions.append(correct[n] / total[n])

    brevity_penalty = 1.0
    if hyp_len < ref_len:
        brevity_penalty = math.exp(1.0 - ref_len / hyp_len)
    geo_mean = math.exp(sum(math.log(p) for p in precisions) / NGRAM_ORDER)
    score = 100.0 * brevity_penalty * geo_mean
    return BleuScore(score, tuple(precisions), brevity_penalty, hyp_len, ref_len)


def score_segmentation(segments: list, translations: list, refs: list) -> BleuScore:
    """BLEU of per-segment translations against reference segments.

    Translations are concatenated in (wav, offset) order so the
    candidate segmentation's boundaries drop out, re-split against the
    references by resegment_mwer, and scored. refs are 13a-tokenized
    reference segments.
    """
    if len(segments) != len(translations):
        raise ValueError(
            f"{len(segments)} segments but {len(translations)} translations"
        )
    order = sorted(range(len(segments)), key=lambda i: (segments[i].wav, segments[i].offset))
    hyp_tokens = []
    for i in order:
        hyp_tokens.extend(tokenize_13a(translations[i]))
    hyp_groups = resegment_mwer(hyp_tokens, refs)
    return corpus_bleu(hyp_groups, refs)
