"""Pipeline configuration: one key/value document for every constant.

The file format is a small TOML subset: ``[dotted.section]`` headers,
``key = value`` lines with string/number/boolean/array values, and ``#``
comments. Environment variables prefixed ``STFORGE_`` override file
values, and command-line flags override both.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .augment import AugmentPolicy
from .sampler import BatchSpec, SamplingSpec
from .segmenter import SegmentationConfig
from .textfilter import FilterConfig

ENV_PREFIX = "STFORGE_"

_BARE_KEY_RE = re.compile(r"[A-Za-z0-9_-]+")
_NUMBER_RE = re.compile(r"[+-]?(\d+\.\d*([eE][+-]?\d+)?|\d+[eE][+-]?\d+|\.\d+([eE][+-]?\d+)?|\d+)")
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


class ConfigError(ValueError):
    """Malformed configuration text or unknown keys."""


def _parse_string(text: str, pos: int, lineno: int):
    # pos points at the opening quote
    out = []
    i = pos + 1
    while i < len(text):
        ch = text[i]
        if ch == '"':
            return "".join(out), i + 1
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _ESCAPES:
                raise ConfigError(f"line {lineno}: bad escape in string")
            out.append(_ESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    raise ConfigError(f"line {lineno}: unterminated string")


def _parse_value(text: str, pos: int, lineno: int):
    while pos < len(text) and text[pos] in " \t":
        pos += 1
    if pos >= len(text):
        raise ConfigError(f"line {lineno}: missing value")
    ch = text[pos]
    if ch == '"':
        return _parse_string(text, pos, lineno)
    if ch == "[":
        items = []
        pos += 1
        while True:
            while pos < len(text) and text[pos] in " \t":
                pos += 1
            if pos >= len(text):
                raise ConfigError(f"line {lineno}: unterminated array")
            if text[pos] == "]":
                return items, pos + 1
            value, pos = _parse_value(text, pos, lineno)
            items.append(value)
            while pos < len(text) and text[pos] in " \t":
                pos += 1
            if pos < len(text) and text[pos] == ",":
                pos += 1
    if text.startswith("true", pos):
        return True, pos + 4
    if text.startswith("false", pos):
        return False, pos + 5
    m = _NUMBER_RE.match(text, pos)
    if m:
        token = m.group()
        value = int(token) if re.fullmatch(r"[+-]?\d+", token) else float(token)
        return value, m.end()
    raise ConfigError(f"line {lineno}: cannot parse value at {text[pos:pos + 20]!r}")


def _parse_key(text: str, pos: int, lineno: int):
    if text[pos] == '"':
        return _parse_string(text, pos, lineno)
    m = _BARE_KEY_RE.match(text, pos)
    if not m:
        raise ConfigError(f"line {lineno}: bad key at {text[pos:pos + 20]!r}")
    return m.group(), m.end()


def parse_config_text(text: str) -> dict:
    """Parse the TOML-subset document into nested dicts."""
    root: dict = {}
    section = root
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated section header")
            section = root
            for part in line[1:-1].strip().split("."):
                part = part.strip()
                if not _BARE_KEY_RE.fullmatch(part):
                    raise ConfigError(f"line {lineno}: bad section name {part!r}")
                section = section.setdefault(part, {})
                if not isinstance(section, dict):
                    raise ConfigError(f"line {lineno}: section {part!r} collides with a value")
            continue
        key, pos = _parse_key(line, 0, lineno)
        while pos < len(line) and line[pos] in " \t":
            pos += 1
        if pos >= len(line) or line[pos] != "=":
            raise ConfigError(f"line {lineno}: expected '=' after key {key!r}")
        value, pos = _parse_value(line, pos + 1, lineno)
        rest = line[pos:].strip()
        if rest and not rest.startswith("#"):
            raise ConfigError(f"line {lineno}: trailing junk {rest!r}")
        section[key] = value
    return root


def apply_env_overrides(data: dict, environ: dict) -> dict:
    """Fold STFORGE_<SECTION>_<KEY> variables into the config dict.

    The first underscore after the prefix splits section from key, so
    only top-level scalar keys are addressable this way.
    """
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        section, _, key = rest.partition("_")
        if not section or not key:
            raise ConfigError(f"{name}: expected {ENV_PREFIX}<SECTION>_<KEY>")
        try:
            value, pos = _parse_value(raw, 0, 0)
            if raw[pos:].strip():
                value = raw
        except ConfigError:
            value = raw
        data.setdefault(section.lower(), {})[key.lower()] = value
    return data


@dataclass(frozen=True)
class PipelineConfig:
    """Typed view of the whole pipeline's knobs with their defaults."""

    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    augment_policy: AugmentPolicy = field(default_factory=AugmentPolicy)
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    batch: BatchSpec = field(default_factory=BatchSpec)
    audio_root: str = "."
    output_dir: str = "."
    seed: int = 0


def _take(section: dict, key: str, default):
    return section.pop(key, default)


def _pair(value, name: str) -> tuple:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"{name} must be a 2-element array")
    return (float(value[0]), float(value[1]))


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a PipelineConfig, defaulting every omitted key.

    Unknown sections or keys are errors: a typo must not silently fall
    back to a default.
    """
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    defaults = PipelineConfig()

    seg = data.pop("segmenter", {})
    segmentation = SegmentationConfig(
        max_seg_len=float(_take(seg, "max_seg_len", defaults.segmentation.max_seg_len)),
        min_gap=float(_take(seg, "min_gap", defaults.segmentation.min_gap)),
    )

    flt = data.pop("filter", {})
    lexicon = _take(flt, "event_lexicon", sorted(defaults.filter.event_lexicon))
    filter_cfg = FilterConfig(
        event_lexicon=frozenset(str(w) for w in lexicon),
        wer_threshold=float(_take(flt, "wer_threshold", defaults.filter.wer_threshold)),
        max_samples=int(_take(flt, "max_samples", defaults.filter.max_samples)),
    )

    aug = data.pop("augment", {})
    policy = AugmentPolicy(
        p_aug=float(_take(aug, "p_aug", defaults.augment_policy.p_aug)),
        tempo_range=_pair(_take(aug, "tempo", list(defaults.augment_policy.tempo_range)), "augment.tempo"),
        pitch_range_cents=_pair(
            _take(aug, "pitch_cents", list(defaults.augment_policy.pitch_range_cents)), "augment.pitch_cents"
        ),
        echo_delay_ms_range=_pair(
            _take(aug, "echo_delay_ms", list(defaults.augment_policy.echo_delay_ms_range)), "augment.echo_delay_ms"
        ),
        echo_decay_range=_pair(
            _take(aug, "echo_decay", list(defaults.augment_policy.echo_decay_range)), "augment.echo_decay"
        ),
    )

    smp = data.pop("sampler", {})
    ratios = _take(smp, "ratios", None)
    sampling = SamplingSpec() if ratios is None else SamplingSpec({str(k): float(v) for k, v in ratios.items()})

    bat = data.pop("batch", {})
    batch = BatchSpec(
        max_batch_samples=int(_take(bat, "max_batch_samples", defaults.batch.max_batch_samples)),
        max_src_samples=int(_take(bat, "max_src_samples", defaults.batch.max_src_samples)),
        max_tgt_tokens=int(_take(bat, "max_tgt_tokens", defaults.batch.max_tgt_tokens)),
    )

    paths = data.pop("paths", {})
    audio_root = str(_take(paths, "audio_root", defaults.audio_root))
    output_dir = str(_take(paths, "output_dir", defaults.output_dir))

    seeds = data.pop("seeds", {})
    seed = int(_take(seeds, "seed", defaults.seed))

    leftovers = []
    for section_name, section in [
        ("segmenter", seg), ("filter", flt), ("augment", aug), ("sampler", smp),
        ("batch", bat), ("paths", paths), ("seeds", seeds),
    ]:
        leftovers.extend(f"{section_name}.{k}" for k in section)
    leftovers.extend(str(k) for k in data)
    if leftovers:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(leftovers))}")

    return PipelineConfig(
        segmentation=segmentation,
        filter=filter_cfg,
        augment_policy=policy,
        sampling=sampling,
        batch=batch,
        audio_root=audio_root,
        output_dir=output_dir,
        seed=seed,
    )


def load_config(path=None, environ: dict | None = None) -> PipelineConfig:
    """Read the config file (if any), apply env overrides, return typed config."""
    data: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = parse_config_text(fh.read())
    if environ:
        apply_env_overrides(data, environ)
    return config_from_dict(data)
