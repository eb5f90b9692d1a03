"""Forced-alignment ingestion and word-time to unit-index conversion.

Word time intervals (from TextGrid files or JSON Lines) are converted to
half-open unit-index spans at 50 Hz. Gap handling is fixed so that spans
partition the frame axis exactly: leading silence attaches to the first
word, inter-word gaps and trailing silence attach to the preceding word.
"""

import json
import math
import re
from dataclasses import dataclass, field

from .errors import AlignmentError, DataError, ParseError

RATE_HZ = 50

_SILENCE_LABELS = {"", "sil", "sp"}


@dataclass(frozen=True)
class WordAlignment:
    word: str
    start_sec: float
    end_sec: float


@dataclass
class AlignedPair:
    """One utterance: 50 Hz unit sequence + transcript words + derived spans."""

    id: str
    units: list
    words: list
    unit_spans: list = field(default_factory=list)
    duration_sec: float = 0.0

    def __post_init__(self):
        if not self.unit_spans and self.words:
            self.unit_spans = to_unit_spans(self.words, len(self.units))
        if not self.duration_sec:
            self.duration_sec = len(self.units) / RATE_HZ


@dataclass
class ValidationReport:
    ok: bool
    violations: list


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def to_unit_spans(words, n_units: int, rate_hz: int = RATE_HZ):
    """Convert word time intervals into half-open frame spans.

    Boundary for word i is round(start_sec_i * rate_hz), pushed forward to
    keep boundaries strictly increasing and clamped so every remaining word
    keeps at least one frame. The first boundary is forced to 0 and the last
    to n_units, which realizes the gap-attachment rules.
    """
    n_words = len(words)
    if n_words == 0:
        raise AlignmentError("cannot build spans for an empty word list")
    if n_units < n_words:
        raise AlignmentError(
            f"{n_units} frames cannot give each of {n_words} words a non-empty span")
    bounds = [0]
    for i in range(1, n_words):
        b = _round_half_up(words[i].start_sec * rate_hz)
        b = max(b, bounds[i - 1] + 1)
        b = min(b, n_units - (n_words - i))
        bounds.append(b)
    bounds.append(n_units)
    return [(bounds[i], bounds[i + 1]) for i in range(n_words)]


def validate_pair(pair: AlignedPair) -> ValidationReport:
    """Check all AlignedPair invariants; never raises, never mutates."""
    v = []
    n = len(pair.units)
    if len(pair.unit_spans) != len(pair.words):
        v.append("span_count")
    prev_hi = 0
    for lo, hi in pair.unit_spans:
        if hi <= lo:
            v.append("empty_span")
        if lo < prev_hi:
            v.append("span_overlap")
        elif lo > prev_hi:
            v.append("span_gap")
        prev_hi = hi
    if pair.unit_spans and prev_hi != n:
        v.append("span_coverage")
    if not pair.unit_spans and n > 0:
        v.append("no_spans")
    prev_end = 0.0
    for w in pair.words:
        if not (0 <= w.start_sec < w.end_sec):
            v.append("word_times")
        if w.start_sec < prev_end - 1e-9:
            v.append("word_overlap")
        prev_end = w.end_sec
    if abs(pair.duration_sec - n / RATE_HZ) > 1.0 / RATE_HZ:
        v.append("duration_mismatch")
    return ValidationReport(ok=not v, violations=v)


# ---------------------------------------------------------------------------
# TextGrid parsing (long and short formats, interval tier "words")

_NUM_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?")
_QUOTED_RE = re.compile(r'"((?:[^"]|"")*)"')


def _decode(content) -> str:
    if isinstance(content, str):
        return content
    for enc in ("utf-8-sig", "utf-16"):
        try:
            return content.decode(enc)
        except UnicodeDecodeError:
            continue
    raise ParseError("TextGrid is neither UTF-8 nor UTF-16")


def _num_on(line: str, lineno: int) -> float:
    m = _NUM_RE.search(line)
    if not m:
        raise ParseError(f"line {lineno}: expected a numeric field in {line.strip()!r}")
    return float(m.group(0))


def _text_on(line: str, lineno: int) -> str:
    m = _QUOTED_RE.search(line)
    if m is None:
        raise ParseError(f"line {lineno}: expected a quoted string in {line.strip()!r}")
    return m.group(1).replace('""', '"')


def parse_textgrid(content, tier: str = "words"):
    """Extract the named interval tier as a list of WordAlignment.

    Handles both the long (keyed) and short (bare values) TextGrid layouts.
    Silence intervals (empty, "sil", "sp") are dropped; ordering and overlap
    violations raise ParseError with the offending line number.
    """
    text = _decode(content)
    lines = text.splitlines()
    if not any("TextGrid" in l for l in lines[:5]):
        raise ParseError("not a TextGrid: missing object class header")
    is_long = any("item" in l and "[" in l for l in lines) or \
        any(l.strip().startswith("xmin") for l in lines)
    intervals = (_parse_long(lines, tier) if is_long else _parse_short(lines, tier))
    words = []
    last_end = None
    for (xmin, xmax, label, lineno) in intervals:
        if label.strip().lower() in _SILENCE_LABELS:
            continue
        if xmin < 0 or xmax <= xmin:
            raise ParseError(f"line {lineno}: bad interval times [{xmin}, {xmax}]")
        if last_end is not None and xmin < last_end - 1e-9:
            raise ParseError(f"line {lineno}: interval starting at {xmin} overlaps "
                             f"previous end {last_end}")
        words.append(WordAlignment(word=label.strip(), start_sec=xmin, end_sec=xmax))
        last_end = xmax
    return words


def _parse_long(lines, tier):
    i = 0
    n = len(lines)
    while i < n:
        stripped = lines[i].strip()
        if stripped.startswith("name") and "=" in stripped:
            name = _text_on(lines[i], i + 1)
            if name == tier:
                return _collect_long_intervals(lines, i)
        i += 1
    raise ParseError(f'no interval tier named "{tier}" found')


def _collect_long_intervals(lines, start):
    n = len(lines)
    i = start
    size = None
    while i < n:
        s = lines[i].strip()
        if s.startswith("intervals:") or s.startswith("intervals: size"):
            size = int(_num_on(lines[i], i + 1))
            i += 1
            break
        if s.startswith("item ["):  # ran into the next tier
            raise ParseError(f"line {i + 1}: tier has no intervals block")
        i += 1
    if size is None:
        raise ParseError("tier has no intervals block")
    out = []
    while i < n and len(out) < size:
        s = lines[i].strip()
        if s.startswith("item ["):
            break
        if s.startswith("intervals ["):
            xmin = _num_on(lines[i + 1], i + 2)
            xmax = _num_on(lines[i + 2], i + 3)
            label = _text_on(lines[i + 3], i + 4)
            out.append((xmin, xmax, label, i + 1))
            i += 4
        else:
            i += 1
    if len(out) != size:
        raise ParseError(f"expected {size} intervals, found {len(out)}")
    return out


def _parse_short(lines, tier):
    # short format: header, xmin, xmax, <exists>, ntiers, then per tier:
    # "IntervalTier", name, xmin, xmax, n, then n * (xmin, xmax, "text")
    vals = []
    for lineno, raw in enumerate(lines, 1):
        s = raw.strip()
        if not s or s.startswith("File type") or s.startswith("Object class"):
            continue
        vals.append((s, lineno))
    idx = 0

    def take():
        nonlocal idx
        if idx >= len(vals):
            raise ParseError("short TextGrid truncated")
        v = vals[idx]
        idx += 1
        return v

    take()  # xmin
    take()  # xmax
    exists, _ = take()
    if "exists" not in exists and exists not in ("1", "<exists>"):
        raise ParseError("short TextGrid missing tier-existence flag")
    ntiers = int(_num_on(*take()))
    for _ in range(ntiers):
        klass, kl = take()
        name = _text_on(*take())
        take()  # tier xmin
        take()  # tier xmax
        count = int(_num_on(*take()))
        items = []
        if "IntervalTier" in klass:
            for _ in range(count):
                xmin = _num_on(*take())
                xmax = _num_on(*take())
                label_line, ll = take()
                items.append((xmin, xmax, _text_on(label_line, ll), ll))
        else:
            for _ in range(count):  # point tier: time + mark
                take()
                take()
        if name == tier and "IntervalTier" in klass:
            return items
    raise ParseError(f'no interval tier named "{tier}" found')


# ---------------------------------------------------------------------------
# JSON Lines ingestion

def load_words_jsonl(path):
    """{"id": str, "words": [{"w": str, "start": float, "end": float}]} per line."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                words = [WordAlignment(w["w"], float(w["start"]), float(w["end"]))
                         for w in rec["words"]]
                out[rec["id"]] = words
            except (KeyError, ValueError, TypeError) as e:
                raise ParseError(f"{path}:{lineno}: bad words record: {e}")
    return out


def load_units_jsonl(path):
    """{"id": str, "units": [int]} per line."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[rec["id"]] = [int(u) for u in rec["units"]]
            except (KeyError, ValueError, TypeError) as e:
                raise ParseError(f"{path}:{lineno}: bad units record: {e}")
    return out


def write_pairs_jsonl(path, pairs):
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            rec = {"id": p.id, "units": [int(u) for u in p.units],
                   "words": [{"w": w.word, "start": w.start_sec, "end": w.end_sec}
                             for w in p.words],
                   "spans": [[lo, hi] for lo, hi in p.unit_spans]}
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_pairs_jsonl(path):
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                words = [WordAlignment(w["w"], float(w["start"]), float(w["end"]))
                         for w in rec["words"]]
                spans = [tuple(s) for s in rec.get("spans", [])]
                pairs.append(AlignedPair(id=rec["id"], units=rec["units"],
                                         words=words, unit_spans=spans))
            except (KeyError, ValueError, TypeError) as e:
                raise ParseError(f"{path}:{lineno}: bad pair record: {e}")
    return pairs


def build_pairs(units_by_id, words_by_id):
    """Join unit and word records by id into validated AlignedPairs."""
    pairs = []
    for sid in units_by_id:
        if sid not in words_by_id:
            raise DataError(f"utterance {sid!r} has units but no word alignment")
        pair = AlignedPair(id=sid, units=units_by_id[sid], words=words_by_id[sid])
        report = validate_pair(pair)
        if not report.ok:
            raise DataError(f"utterance {sid!r} failed validation: {report.violations}")
        pairs.append(pair)
    return pairs
