"""Three-step interleaved-sequence construction.

1. plan_segments: split an aligned pair into N = min(floor(S/10)+1, #words)
   contiguous word groups with near-equal speech duration.
2. draw_choices: per segment, pick the main modality uniformly and decide
   (p = 0.5 by default) whether to insert the other modality's copy.
3. render: emit tokens segment by segment, inserting <|correspond|> before a
   same-segment cross-modality copy and <|continue|> at segment junctions
   where the modality changes; nothing at same-modality junctions.
"""

import json
import math
from dataclasses import dataclass

from .errors import DataError, DomainError
from .vocab import (TAG_SPECIAL, TAG_TEXT, TAG_UNIT, TEXT, UNIT, SPECIAL,
                    VocabLayout, modality_of)

SEGMENT_TARGET_SEC = 10.0

ROLE_MAIN = 0
ROLE_SUB = 1


@dataclass(frozen=True)
class SegmentationPlan:
    n_segments: int
    boundaries: tuple  # interior cut points: word index where each later segment starts

    def ranges(self, n_words: int):
        cuts = (0,) + self.boundaries + (n_words,)
        return [(cuts[i], cuts[i + 1]) for i in range(self.n_segments)]


@dataclass(frozen=True)
class SegmentChoice:
    main: str  # TEXT or UNIT
    insert_sub: bool


@dataclass
class InterleavedSequence:
    id: str
    ids: list
    tags: list
    provenance: list  # per token: (segment index, ROLE_MAIN | ROLE_SUB)
    seed: int = 0


def plan_segments(pair, target_sec: float = SEGMENT_TARGET_SEC) -> SegmentationPlan:
    """Equal-duration segmentation snapped to word boundaries.

    N = min(floor(S / target_sec) + 1, word count). Cut i lands after the
    first word whose end time reaches i*S/N; forced adjustments push cuts
    later so no segment is left empty.
    """
    n_words = len(pair.words)
    if n_words == 0:
        raise DataError(f"pair {pair.id!r} has no words to segment")
    s = pair.duration_sec
    n = min(int(math.floor(s / target_sec)) + 1, n_words)
    cuts = []
    prev = 0
    for i in range(1, n):
        target = i * s / n
        cut = None
        for j in range(prev, n_words):
            if pair.words[j].end_sec >= target:
                cut = j + 1
                break
        if cut is None:
            cut = n_words
        cut = max(cut, prev + 1)
        cut = min(cut, n_words - (n - i))
        cuts.append(cut)
        prev = cut
    return SegmentationPlan(n_segments=n, boundaries=tuple(cuts))


def draw_choices(plan: SegmentationPlan, rng, insert_prob: float = 0.5):
    """Per segment: main ~ uniform{unit, text}, then insert ~ Bernoulli(p).

    Consumes exactly two draws per segment in fixed order so the stream
    position is independent of the outcomes.
    """
    choices = []
    for _ in range(plan.n_segments):
        main = UNIT if rng.random() < 0.5 else TEXT
        insert = rng.random() < insert_prob
        choices.append(SegmentChoice(main=main, insert_sub=insert))
    return choices


def _segment_frame_range(pair, lo_word: int, hi_word: int):
    return pair.unit_spans[lo_word][0], pair.unit_spans[hi_word - 1][1]


def _segment_tokens(pair, lo_word, hi_word, modality, layout, text_tok):
    if modality == UNIT:
        f_lo, f_hi = _segment_frame_range(pair, lo_word, hi_word)
        seg = pair.units[f_lo:f_hi]
        if seg and not (0 <= min(seg) and max(seg) < layout.unit_count):
            raise DomainError(f"unit index outside [0, {layout.unit_count})")
        base = layout.unit_base
        return [base + int(u) for u in seg], TAG_UNIT
    toks = text_tok.encode_words([w.word for w in pair.words[lo_word:hi_word]])
    return list(toks), TAG_TEXT


def render(pair, plan: SegmentationPlan, choices, layout: VocabLayout,
           text_tok) -> InterleavedSequence:
    """Emit the interleaved token sequence for one aligned pair."""
    if len(choices) != plan.n_segments:
        raise DataError(f"{len(choices)} choices for {plan.n_segments} segments")
    ids, tags, prov = [], [], []
    prev_mod = None
    for seg_idx, ((lo, hi), choice) in enumerate(zip(plan.ranges(len(pair.words)), choices)):
        blocks = [(choice.main, ROLE_MAIN)]
        if choice.insert_sub:
            blocks.append((UNIT if choice.main == TEXT else TEXT, ROLE_SUB))
        for modality, role in blocks:
            toks, tag = _segment_tokens(pair, lo, hi, modality, layout, text_tok)
            if not toks:
                raise DataError(f"segment {seg_idx} rendered no {modality} tokens")
            if prev_mod is not None and modality != prev_mod:
                special = layout.correspond_id if role == ROLE_SUB else layout.continue_id
                ids.append(special)
                tags.append(TAG_SPECIAL)
                prov.append((seg_idx, role))
            ids.extend(toks)
            tags.extend([tag] * len(toks))
            prov.extend([(seg_idx, role)] * len(toks))
            prev_mod = modality
    return InterleavedSequence(id=pair.id, ids=ids, tags=tags, provenance=prov)


def verify_roundtrip(seq: InterleavedSequence, pair, plan: SegmentationPlan,
                     choices, layout: VocabLayout, text_tok) -> bool:
    """True iff `seq` is exactly what the construction rules demand.

    Checks tag/layout consistency, special-token placement, that main-role
    blocks reproduce each segment's chosen-modality content, that sub-role
    blocks reproduce the other modality, and that segments cover every word
    and frame exactly once.
    """
    n = len(seq.ids)
    if len(seq.tags) != n or len(seq.provenance) != n or n == 0:
        return False
    for tid, tag in zip(seq.ids, seq.tags):
        try:
            mod = modality_of(layout, tid)
        except DomainError:
            return False
        if {TEXT: TAG_TEXT, UNIT: TAG_UNIT, SPECIAL: TAG_SPECIAL}[mod] != tag:
            return False
    # structural special-token rules
    if seq.tags[0] == TAG_SPECIAL or seq.tags[-1] == TAG_SPECIAL:
        return False
    for i in range(n):
        if seq.tags[i] != TAG_SPECIAL:
            continue
        if seq.tags[i - 1] == TAG_SPECIAL or seq.tags[i + 1] == TAG_SPECIAL:
            return False
        if seq.tags[i - 1] == seq.tags[i + 1]:
            return False
        prev_seg, _ = seq.provenance[i - 1]
        next_seg, next_role = seq.provenance[i + 1]
        if seq.ids[i] == layout.correspond_id:
            if not (next_role == ROLE_SUB and next_seg == prev_seg):
                return False
        elif seq.ids[i] == layout.continue_id:
            if not (next_role == ROLE_MAIN and next_seg == prev_seg + 1):
                return False
        else:
            return False
    # same-modality junctions must carry no special token
    for i in range(1, n):
        if seq.tags[i] != TAG_SPECIAL and seq.tags[i - 1] != TAG_SPECIAL:
            if seq.tags[i] != seq.tags[i - 1]:
                return False
    # group content tokens by (segment, role) preserving order
    if plan.n_segments != len(choices):
        return False
    ranges = plan.ranges(len(pair.words))
    got = {}
    for tid, tag, (seg, role) in zip(seq.ids, seq.tags, seq.provenance):
        if tag == TAG_SPECIAL:
            continue
        got.setdefault((seg, role), []).append(tid)
    for seg_idx, ((lo, hi), choice) in enumerate(zip(ranges, choices)):
        expect_main, _ = _segment_tokens(pair, lo, hi, choice.main, layout, text_tok)
        if got.pop((seg_idx, ROLE_MAIN), None) != expect_main:
            return False
        if choice.insert_sub:
            other = UNIT if choice.main == TEXT else TEXT
            expect_sub, _ = _segment_tokens(pair, lo, hi, other, layout, text_tok)
            if got.pop((seg_idx, ROLE_SUB), None) != expect_sub:
                return False
    if got:
        return False
    # coverage: ranges partition words, frame ranges partition units
    if [r for r in ranges if r[0] >= r[1]]:
        return False
    if ranges[0][0] != 0 or ranges[-1][1] != len(pair.words):
        return False
    if any(ranges[i][1] != ranges[i + 1][0] for i in range(len(ranges) - 1)):
        return False
    f_prev = 0
    for lo, hi in ranges:
        f_lo, f_hi = _segment_frame_range(pair, lo, hi)
        if f_lo != f_prev:
            return False
        f_prev = f_hi
    return f_prev == len(pair.units)


def write_sequences_jsonl(path, sequences, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for seq in sequences:
            rec = {"id": seq.id, "ids": seq.ids, "tags": seq.tags, "seed": seed}
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_sequences_jsonl(path):
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(InterleavedSequence(id=rec["id"], ids=rec["ids"],
                                           tags=rec["tags"], provenance=[],
                                           seed=rec.get("seed", 0)))
    return out
