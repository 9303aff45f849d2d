"""Transcript text filtering, ASR-side normalization, and WER-based gating.

Covers the three keep/drop rules for training pairs: source audio over the
sample cap, target text empty once speaker prefixes and parenthesized
events are removed, and ASR hypothesis WER above the threshold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

DEFAULT_EVENT_LEXICON = frozenset({"Gelächter", "Applaus", "Musik", "Video", "Beifall"})

DROP_TOO_LONG = "too_long"
DROP_EMPTY = "empty_after_filtering"
DROP_WER = "asr_wer"

# A speaker prefix is either a run of capitalized words ("David Gallo") or
# 2-4 uppercase initials ("DG"), followed by a colon. The initials cap
# keeps acronym-initial sentences longer than 4 letters intact.
_CAPWORD = r"(?:[A-ZÄÖÜ][a-zäöüß]+)+(?:-(?:[A-ZÄÖÜ][a-zäöüß]+)+)?"
SPEAKER_PREFIX_RE = re.compile(rf"^(?:{_CAPWORD}(?: {_CAPWORD})*|[A-ZÄÖÜ]{{2,4}}): *")

_INNER_GROUP_RE = re.compile(r"\(([^()]*)\)")


@dataclass(frozen=True)
class TranscriptPair:
    """One training example: source audio stats plus its texts."""

    id: str
    n_samples: int
    src_text: str
    tgt_text: str

    def __post_init__(self):
        if self.n_samples < 0:
            raise ValueError(f"{self.id}: negative n_samples")


@dataclass(frozen=True)
class FilterConfig:
    event_lexicon: frozenset = DEFAULT_EVENT_LEXICON
    wer_threshold: float = 0.5
    max_samples: int = 400000

    def __post_init__(self):
        if self.wer_threshold <= 0:
            raise ValueError(f"wer_threshold must be positive, got {self.wer_threshold}")
        if self.max_samples <= 0:
            raise ValueError(f"max_samples must be positive, got {self.max_samples}")
        object.__setattr__(self, "event_lexicon", frozenset(self.event_lexicon))


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: str | None = None


def strip_speaker_prefix(sentence: str) -> str:
    """Remove one leading "Name:" / "DG:" style speaker marker, if present."""
    return SPEAKER_PREFIX_RE.sub("", sentence, count=1)


def remove_events(sentence: str, lexicon: frozenset = DEFAULT_EVENT_LEXICON) -> str:
    """Delete parenthesized non-textual events; unwrap quoted speakers.

    A balanced group is deleted when its trimmed inner text is in the
    lexicon or is a single non-speaker word; a group whose inner text
    starts with a speaker prefix is unwrapped with the prefix stripped.
    Other groups, and anything with unbalanced parentheses, stay
    untouched. When a deletion at the very start of the sentence exposes
    a "Name:" marker (a secondary-speaker utterance), that marker is
    stripped as well.
    """
    lex = {w.casefold() for w in lexicon}
    text = sentence
    deleted_at_start = False
    changed_any = False
    while True:
        changed = False
        pieces = []
        last = 0
        for m in _INNER_GROUP_RE.finditer(text):
            inner = m.group(1).strip()
            if inner.casefold() in lex or inner == "":
                replacement = ""
            elif SPEAKER_PREFIX_RE.match(inner):
                replacement = strip_speaker_prefix(inner)
            elif " " not in inner:
                replacement = ""
            else:
                continue
            if replacement == "" and not text[: m.start()].strip():
                deleted_at_start = True
            pieces.append(text[last : m.start()])
            pieces.append(replacement)
            last = m.end()
            changed = True
        if not changed:
            break
        pieces.append(text[last:])
        text = "".join(pieces)
        changed_any = True
    if not changed_any:
        return sentence
    text = re.sub(r"\s+", " ", text).strip()
    text = re.sub(r" ([.,!?;:])", r"\1", text)
    if deleted_at_start:
        text = strip_speaker_prefix(text)
    return text


_THOUSANDS_RE = re.compile(r"(?<!\d)(\d{1,3}(?: \d{3})+)(?!\d)")


def normalize_thousands(sentence: str) -> str:
    """Turn space-separated thousands groups into comma-separated ones."""
    return _THOUSANDS_RE.sub(lambda m: m.group(1).replace(" ", ","), sentence)


_ONES = "zero one two three four five six seven eight nine".split()
_TEENS = "ten eleven twelve thirteen fourteen fifteen sixteen seventeen eighteen nineteen".split()
_TENS = "zero ten twenty thirty forty fifty sixty seventy eighty ninety".split()


def _spell_under_1000(n: int) -> list[str]:
    words = []
    if n >= 100:
        words += [_ONES[n // 100], "hundred"]
        n %= 100
    if n >= 20:
        words.append(_TENS[n // 10])
        n %= 10
        if n:
            words.append(_ONES[n])
    elif n >= 10:
        words.append(_TEENS[n - 10])
    elif n:
        words.append(_ONES[n])
    return words


def number_to_words(digits) -> str:
    """Spell out a digit run; space-joined, no hyphens, no "and".

    Values under a million are spelled in full ("twenty five"); longer
    runs fall back to digit-by-digit ("one two three ...").
    """
    digits = str(digits)
    n = int(digits)
    if n >= 1_000_000:
        return " ".join(_ONES[int(d)] for d in digits)
    if n == 0:
        return "zero"
    words = []
    if n >= 1000:
        words += _spell_under_1000(n // 1000) + ["thousand"]
        n %= 1000
    if n:
        words += _spell_under_1000(n)
    return " ".join(words)


def normalize_for_asr(text: str) -> list[str]:
    """Lowercase, strip punctuation, and spell out numbers for WER scoring.

    Mirrors what the ASR vocabulary can produce: only [a-z'] word
    characters survive; apostrophes stay because contractions are ASR
    words.
    """
    text = text.lower()
    text = re.sub(r"[^a-z0-9' ]", " ", text)
    text = re.sub(r"\d+", lambda m: " " + number_to_words(m.group()) + " ", text)
    return text.split()


def word_error_rate(hyp: list[str], ref: list[str]) -> float:
    """Word-level Levenshtein distance divided by the reference length."""
    if not ref:
        raise ValueError("empty reference")
    prev = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, start=1):
        cur = [i]
        for j, r in enumerate(ref, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (h != r)))
        prev = cur
    return prev[len(ref)] / len(ref)


def clean_target(sentence: str, lexicon: frozenset = DEFAULT_EVENT_LEXICON, fix_thousands: bool = False) -> str:
    """Full target-side cleanup: speaker prefix, events, optional thousands fix."""
    out = strip_speaker_prefix(sentence)
    out = remove_events(out, lexicon)
    if fix_thousands:
        out = normalize_thousands(out)
    return out


def filter_pair(pair: TranscriptPair, asr_hyp: list[str], cfg: FilterConfig) -> FilterDecision:
    """Keep/drop decision for one training pair.

    Checks run in order: source duration cap, empty-after-filtering
    target, ASR WER strictly above the threshold. A source that
    normalizes to no words cannot be verified against the hypothesis and
    is dropped under the WER reason.
    """
    if pair.n_samples > cfg.max_samples:
        return FilterDecision(False, DROP_TOO_LONG)
    if not clean_target(pair.tgt_text, cfg.event_lexicon).strip():
        return FilterDecision(False, DROP_EMPTY)
    ref = normalize_for_asr(pair.src_text)
    if not ref:
        return FilterDecision(False, DROP_WER)
    if word_error_rate(asr_hyp, ref) > cfg.wer_threshold:
        return FilterDecision(False, DROP_WER)
    return FilterDecision(True)
