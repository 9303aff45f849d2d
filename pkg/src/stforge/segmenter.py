"""ASR-driven audio segmentation.

Splits each audio file recursively on the largest untranscribable period
found in a frame-level ASR token stream, until every segment fits under a
maximum length or no qualifying split point remains. Frames are
untranscribable when their token contains no ASCII letter, which is why the
interchange format encodes the CTC blank as "" and the word separator as
"|".
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass

import yaml

LETTER_RE = re.compile(r"[A-Za-z]")


@dataclass(frozen=True)
class FrameTranscript:
    """Per-file sequence of ASR token predictions at a fixed frame step."""

    audio_id: str
    frame_ms: int
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.frame_ms <= 0:
            raise ValueError(f"{self.audio_id}: frame_ms must be positive, got {self.frame_ms}")
        if not self.tokens:
            raise ValueError(f"{self.audio_id}: empty transcript")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def duration(self) -> float:
        """Covered duration in seconds."""
        return len(self.tokens) * self.frame_ms / 1000.0


@dataclass(frozen=True)
class Gap:
    """Maximal run of untranscribable frames."""

    start_frame: int
    num_frames: int


@dataclass(frozen=True)
class Segment:
    """One (wav, offset, duration) unit of a segmentation, in seconds."""

    wav: str
    offset: float
    duration: float
    speaker_id: str

    def __post_init__(self):
        if self.offset < 0:
            raise ValueError(f"negative offset {self.offset}")
        if self.duration <= 0:
            raise ValueError(f"non-positive duration {self.duration}")


@dataclass(frozen=True)
class SegmentationConfig:
    max_seg_len: float = 22.0
    min_gap: float = 0.2

    def __post_init__(self):
        if not self.max_seg_len > self.min_gap > 0:
            raise ValueError(
                f"need max_seg_len > min_gap > 0, got {self.max_seg_len}, {self.min_gap}"
            )


def parse_frame_transcript(stream: str) -> list[FrameTranscript]:
    """Parse JSON-lines frame transcripts.

    One object per audio file: {"audio": str, "frame_ms": int, "tokens": [str...]}.
    """
    out = []
    for lineno, line in enumerate(stream.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: malformed JSON ({exc})") from exc
        for field in ("audio", "frame_ms", "tokens"):
            if field not in obj:
                raise ValueError(f"line {lineno}: missing field {field!r}")
        if not isinstance(obj["tokens"], list):
            raise ValueError(f"line {lineno}: tokens must be a list")
        try:
            out.append(
                FrameTranscript(
                    audio_id=str(obj["audio"]),
                    frame_ms=int(obj["frame_ms"]),
                    tokens=tuple(str(t) for t in obj["tokens"]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return out


def is_transcribable(token: str) -> bool:
    """True iff the token contains at least one ASCII letter."""
    return LETTER_RE.search(token) is not None


def _min_gap_frames(min_gap: float, frame_ms: int) -> int:
    # Smallest frame count whose duration reaches min_gap; the epsilon
    # absorbs float noise so a run of exactly min_gap seconds qualifies.
    return max(1, math.ceil(min_gap * 1000.0 / frame_ms - 1e-9))


def find_gaps(t: FrameTranscript, min_gap: float) -> list[Gap]:
    """All maximal untranscribable runs lasting at least ``min_gap`` seconds."""
    if min_gap <= 0:
        raise ValueError(f"min_gap must be positive, got {min_gap}")
    threshold = _min_gap_frames(min_gap, t.frame_ms)
    flags = [not is_transcribable(tok) for tok in t.tokens]
    return [Gap(start, length) for start, length in _runs(flags) if length >= threshold]


def _runs(flags) -> list[tuple[int, int]]:
    """(start, length) of each maximal True run."""
    runs = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, len(flags) - start))
    return runs


def _speaker_for(audio_id: str) -> str:
    stem = os.path.basename(audio_id)
    return stem.rsplit(".", 1)[0] if "." in stem else stem


def split_recursive(t: FrameTranscript, cfg: SegmentationConfig) -> list[Segment]:
    """Recursively split a transcript on its largest untranscribable period.

    A span no longer than max_seg_len is emitted as one segment. Otherwise
    the largest qualifying gap is chosen (ties go to the gap whose midpoint
    is closest to the span center, then to the leftmost) and the span is
    split at the gap's midpoint frame. A span with no usable gap is emitted
    whole even when over-length: that is the algorithm's termination
    clause. Output segments are sorted, non-overlapping, and cover
    [0, file duration).
    """
    frame_s = t.frame_ms / 1000.0
    max_frames = int(math.floor(cfg.max_seg_len * 1000.0 / t.frame_ms + 1e-9))
    threshold = _min_gap_frames(cfg.min_gap, t.frame_ms)
    flags = [not is_transcribable(tok) for tok in t.tokens]
    speaker = _speaker_for(t.audio_id)

    segments: list[Segment] = []
    stack = [(0, len(t.tokens))]
    while stack:
        start, end = stack.pop()
        mid = _split_point(flags, start, end, max_frames, threshold)
        if mid is None:
            segments.append(
                Segment(
                    wav=t.audio_id,
                    offset=start * frame_s,
                    duration=(end - start) * frame_s,
                    speaker_id=speaker,
                )
            )
        else:
            # Right first so the left half is processed next (ordered output).
            stack.append((mid, end))
            stack.append((start, mid))
    return segments


def _split_point(flags, start: int, end: int, max_frames: int, threshold: int):
    """Midpoint frame of the gap to split [start, end) at, or None to emit."""
    if end - start <= max_frames:
        return None
    best = None  # (num_frames, -center_distance_rank, midpoint)
    for run_start, run_len in _runs(flags[start:end]):
        if run_len < threshold:
            continue
        mid = start + run_start + run_len // 2
        if not start < mid < end:
            continue
        # |2*mid - (start+end)| compares midpoint distance to the span
        # center without floats.
        dist = abs(2 * mid - (start + end))
        if best is None or run_len > best[0] or (run_len == best[0] and dist < best[1]):
            best = (run_len, dist, mid)
    return None if best is None else best[2]


def sweep_max_seg_len(
    transcripts: list[FrameTranscript],
    lo: float,
    hi: float,
    step: float = 1.0,
    min_gap: float = 0.2,
) -> dict[float, list[Segment]]:
    """Segment every transcript once per max_seg_len value in [lo, hi].

    Returns {max_seg_len: segments over all transcripts, in input order}.
    """
    if lo > hi:
        raise ValueError(f"lo must not exceed hi, got {lo} > {hi}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    result: dict[float, list[Segment]] = {}
    k = 0
    while True:
        value = round(lo + k * step, 9)
        if value > hi + 1e-9:
            break
        cfg = SegmentationConfig(max_seg_len=value, min_gap=min_gap)
        result[value] = [seg for t in transcripts for seg in split_recursive(t, cfg)]
        k += 1
    return result


_PLAIN_YAML = re.compile(r"^[A-Za-z0-9_./-]+$")


def _yaml_str(value: str) -> str:
    if _PLAIN_YAML.match(value):
        return value
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_segments_yaml(segments: list[Segment]) -> str:
    """Segment list as YAML: one flow mapping per line, 6-decimal times."""
    lines = [
        "- {duration: %.6f, offset: %.6f, speaker_id: %s, wav: %s}"
        % (s.duration, s.offset, _yaml_str(s.speaker_id), _yaml_str(s.wav))
        for s in segments
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_segments_yaml(text: str) -> list[Segment]:
    """Inverse of :func:`write_segments_yaml`; validates every entry."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValueError(f"malformed segment YAML: {exc}") from exc
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ValueError("segment YAML must be a list of mappings")
    segments = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ValueError(f"entry {i}: not a mapping")
        missing = {"duration", "offset", "speaker_id", "wav"} - entry.keys()
        if missing:
            raise ValueError(f"entry {i}: missing keys {sorted(missing)}")
        segments.append(
            Segment(
                wav=str(entry["wav"]),
                offset=float(entry["offset"]),
                duration=float(entry["duration"]),
                speaker_id=str(entry["speaker_id"]),
            )
        )
    return segments
