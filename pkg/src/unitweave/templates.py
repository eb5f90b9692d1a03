"""Fine-tuning templates, ablation-setup sequences, and evaluation sequences.

Single-turn dialog template (canonical scaffold, bit-exact):

    <bos> U(S1) <|correspond|> T1 <sep_a> T2 <|correspond|> U2 <eos>

Loss is computed only on the transcript (T1), answer text (T2) and answer
units (U2), each together with its terminating control token; the prompt
scaffold (bos, input units, the first correspond) is masked out.

The direct speech-to-speech variant drops the text bridge entirely:

    <bos> U(S1) <sep_a> U2 <eos>
"""

import json
import math
from dataclasses import dataclass, field

from . import interleaver
from .alignment import AlignedPair, WordAlignment
from .errors import DataError, DomainError, TemplateError
from .interleaver import ROLE_MAIN, ROLE_SUB, InterleavedSequence, SegmentChoice
from .vocab import TAG_SPECIAL, TAG_TEXT, TAG_UNIT, TEXT, UNIT, VocabLayout

# evaluation sequence kinds
UNCOND_TEXT = "uncond_text"
UNCOND_UNIT = "uncond_unit"
CORR_U2T = "corr_u2t"
CORR_T2U = "corr_t2u"
CONT_U2T = "cont_u2t"
CONT_T2U = "cont_t2u"
EVAL_KINDS = (UNCOND_TEXT, UNCOND_UNIT, CORR_U2T, CORR_T2U, CONT_U2T, CONT_T2U)


class WordTokenizer:
    """Whitespace word-to-id tokenizer over a corpus-built lexicon.

    Ids 0-3 are reserved for control tokens, id 4 is the OOV id, known words
    start at 5. Any object with encode_words(list[str]) -> list[int] mapping
    into the layout's text region can replace it.
    """

    OOV_ID = 4
    FIRST_WORD_ID = 5

    def __init__(self, word_to_id: dict, oov_id: int = OOV_ID):
        self.word_to_id = dict(word_to_id)
        self.oov_id = oov_id
        self.id_to_word = {i: w for w, i in self.word_to_id.items()}

    @classmethod
    def from_words(cls, words, layout: VocabLayout):
        """Assign ids in first-seen order; words beyond capacity map to OOV."""
        mapping = {}
        next_id = cls.FIRST_WORD_ID
        for w in words:
            if w in mapping:
                continue
            if next_id >= layout.text_size:
                continue
            mapping[w] = next_id
            next_id += 1
        return cls(mapping)

    def encode_words(self, words):
        return [self.word_to_id.get(w, self.oov_id) for w in words]

    def decode(self, ids):
        return [self.id_to_word.get(i, "<oov>") for i in ids]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"oov_id": self.oov_id, "word_to_id": self.word_to_id},
                      f, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            rec = json.load(f)
        return cls(rec["word_to_id"], oov_id=rec["oov_id"])


@dataclass
class DialogSample:
    id: str
    input: AlignedPair
    response_text: list  # words (T2)
    response_units: list  # unit indices (U2)


@dataclass
class TrainingSample:
    id: str
    ids: list
    loss_mask: list
    region_map: dict = field(default_factory=dict)  # name -> (lo, hi), ordered


def _unit_ids(layout, units):
    if len(units) and not (0 <= min(units) and max(units) < layout.unit_count):
        raise DomainError(f"unit index outside [0, {layout.unit_count})")
    base = layout.unit_base
    return [base + int(u) for u in units]


def build_text_dialog_template(d: DialogSample, layout: VocabLayout,
                               text_tok) -> TrainingSample:
    """Text-only dialog variant: <bos> T1 <sep_a> T2 <eos>, loss on T2 + eos."""
    if not d.response_text:
        raise TemplateError(f"dialog {d.id!r}: empty response text")
    t1 = text_tok.encode_words([w.word for w in d.input.words])
    t2 = text_tok.encode_words(list(d.response_text))
    if not t1:
        raise TemplateError(f"dialog {d.id!r}: empty input transcript")
    ids = [layout.bos_id] + t1 + [layout.sep_a_id] + t2 + [layout.eos_id]
    p = 2 + len(t1)
    regions = {"prompt": (0, p), "answer_text": (p, len(ids))}
    mask = [False] * p + [True] * (len(t2) + 1)
    return TrainingSample(id=d.id, ids=ids, loss_mask=mask, region_map=regions)


def build_sdm_template(d: DialogSample, layout: VocabLayout, text_tok) -> TrainingSample:
    """Single-turn spoken-dialog sample with the standard loss mask."""
    if not len(d.input.units):
        raise TemplateError(f"dialog {d.id!r}: empty input units")
    if not d.response_text:
        raise TemplateError(f"dialog {d.id!r}: empty response text")
    if not len(d.response_units):
        raise TemplateError(f"dialog {d.id!r}: empty response units")
    u1 = _unit_ids(layout, d.input.units)
    t1 = text_tok.encode_words([w.word for w in d.input.words])
    t2 = text_tok.encode_words(list(d.response_text))
    u2 = _unit_ids(layout, d.response_units)
    if not t1:
        raise TemplateError(f"dialog {d.id!r}: empty input transcript")

    ids = [layout.bos_id] + u1 + [layout.correspond_id] \
        + t1 + [layout.sep_a_id] + t2 + [layout.correspond_id] + u2 + [layout.eos_id]
    p = 2 + len(u1)                       # prompt: bos, U1, correspond
    regions = {
        "prompt": (0, p),
        "transcript": (p, p + len(t1) + 1),          # T1 + sep_a
        "answer_text": (p + len(t1) + 1, p + len(t1) + len(t2) + 2),   # T2 + corr
        "answer_units": (p + len(t1) + len(t2) + 2, len(ids)),         # U2 + eos
    }
    mask = [False] * len(ids)
    for name in ("transcript", "answer_text", "answer_units"):
        lo, hi = regions[name]
        for i in range(lo, hi):
            mask[i] = True
    return TrainingSample(id=d.id, ids=ids, loss_mask=mask, region_map=regions)


def build_s1s2_template(d: DialogSample, layout: VocabLayout) -> TrainingSample:
    """Direct unit-to-unit sample: no intermediate text anywhere."""
    if not len(d.input.units):
        raise TemplateError(f"dialog {d.id!r}: empty input units")
    if not len(d.response_units):
        raise TemplateError(f"dialog {d.id!r}: empty response units")
    u1 = _unit_ids(layout, d.input.units)
    u2 = _unit_ids(layout, d.response_units)
    ids = [layout.bos_id] + u1 + [layout.sep_a_id] + u2 + [layout.eos_id]
    p = 2 + len(u1)
    regions = {"prompt": (0, p), "answer_units": (p, len(ids))}
    mask = [False] * p + [True] * (len(u2) + 1)
    return TrainingSample(id=d.id, ids=ids, loss_mask=mask, region_map=regions)


def midpoint_split(pair: AlignedPair) -> int:
    """Word index where the second half starts: duration midpoint snapped to
    a word boundary, both halves non-empty."""
    n_words = len(pair.words)
    if n_words < 2:
        raise TemplateError(f"pair {pair.id!r}: cannot split a {n_words}-word pair in half")
    target = pair.duration_sec / 2.0
    cut = n_words - 1
    for j in range(n_words):
        if pair.words[j].end_sec >= target:
            cut = j + 1
            break
    return max(1, min(cut, n_words - 1))


def _halves(pair, layout, text_tok):
    cut = midpoint_split(pair)
    f_mid = pair.unit_spans[cut - 1][1]
    u1 = _unit_ids(layout, pair.units[:f_mid])
    u2 = _unit_ids(layout, pair.units[f_mid:])
    t1 = text_tok.encode_words([w.word for w in pair.words[:cut]])
    t2 = text_tok.encode_words([w.word for w in pair.words[cut:]])
    return u1, u2, t1, t2


def build_setup_sequence(pair: AlignedPair, setup: int, rng,
                         layout: VocabLayout, text_tok) -> InterleavedSequence:
    """Ablation pretraining sequences.

    Setup 1: continuation-only interleaving (sub-insertion disabled).
    Setup 2: whole-utterance correspondence, direction drawn uniformly.
    Setup 3: fixed template U(first half) <corr> T(all) <corr> U(second half).
    """
    if setup == 1:
        plan = interleaver.plan_segments(pair)
        choices = [SegmentChoice(c.main, False)
                   for c in interleaver.draw_choices(plan, rng)]
        return interleaver.render(pair, plan, choices, layout, text_tok)

    corr = layout.correspond_id
    if setup == 2:
        u = _unit_ids(layout, pair.units)
        t = text_tok.encode_words([w.word for w in pair.words])
        unit_first = rng.random() < 0.5
        first, ftag = (u, TAG_UNIT) if unit_first else (t, TAG_TEXT)
        second, stag = (t, TAG_TEXT) if unit_first else (u, TAG_UNIT)
        ids = first + [corr] + second
        tags = [ftag] * len(first) + [TAG_SPECIAL] + [stag] * len(second)
        prov = [(0, ROLE_MAIN)] * len(first) + [(0, ROLE_SUB)] * (len(second) + 1)
        return InterleavedSequence(id=pair.id, ids=ids, tags=tags, provenance=prov)

    if setup == 3:
        u1, u2, t1, t2 = _halves(pair, layout, text_tok)
        t = t1 + t2
        ids = u1 + [corr] + t + [corr] + u2
        tags = ([TAG_UNIT] * len(u1) + [TAG_SPECIAL] + [TAG_TEXT] * len(t)
                + [TAG_SPECIAL] + [TAG_UNIT] * len(u2))
        prov = ([(0, ROLE_MAIN)] * len(u1) + [(0, ROLE_SUB)] * (len(t) + 1)
                + [(1, ROLE_MAIN)] * (len(u2) + 1))
        return InterleavedSequence(id=pair.id, ids=ids, tags=tags, provenance=prov)

    raise DataError(f"unknown setup {setup!r}; expected 1, 2 or 3")


@dataclass
class EvalSequence:
    id: str
    kind: str
    ids: list
    target_span: tuple  # (lo, hi) half-open
    target_modality: str  # TEXT or UNIT


def build_eval_sequence(pair: AlignedPair, kind: str, layout: VocabLayout,
                        text_tok, special_override=None) -> EvalSequence:
    """One of the six evaluation sequence types.

    `special_override` replaces the junction special token, for scoring
    models pretrained with only one of the two special tokens.
    """
    if kind not in EVAL_KINDS:
        raise DataError(f"unknown eval kind {kind!r}")
    u_all = _unit_ids(layout, pair.units)
    t_all = text_tok.encode_words([w.word for w in pair.words])

    if kind == UNCOND_TEXT:
        return EvalSequence(pair.id, kind, t_all, (0, len(t_all)), TEXT)
    if kind == UNCOND_UNIT:
        return EvalSequence(pair.id, kind, u_all, (0, len(u_all)), UNIT)

    if kind in (CORR_U2T, CORR_T2U):
        junction = layout.correspond_id if special_override is None else special_override
        ctx, tgt, mod = ((u_all, t_all, TEXT) if kind == CORR_U2T
                         else (t_all, u_all, UNIT))
    else:
        junction = layout.continue_id if special_override is None else special_override
        u1, u2, t1, t2 = _halves(pair, layout, text_tok)
        ctx, tgt, mod = ((u1, t2, TEXT) if kind == CONT_U2T else (t1, u2, UNIT))

    ids = ctx + [junction] + tgt
    lo = len(ctx) + 1
    return EvalSequence(pair.id, kind, ids, (lo, len(ids)), mod)


def load_dialogs_jsonl(path):
    """{"id", "input_units":[int], "input_words":[{"w","start","end"}],
    "response_text": str, "response_units":[int]} per line."""
    from .errors import ParseError

    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                words = [WordAlignment(w["w"], float(w["start"]), float(w["end"]))
                         for w in rec["input_words"]]
                pair = AlignedPair(id=rec["id"], units=[int(u) for u in rec["input_units"]],
                                   words=words)
                out.append(DialogSample(
                    id=rec["id"], input=pair,
                    response_text=rec["response_text"].split(),
                    response_units=[int(u) for u in rec["response_units"]]))
            except (KeyError, ValueError, TypeError) as e:
                raise ParseError(f"{path}:{lineno}: bad dialog record: {e}")
    return out


def write_training_samples_jsonl(path, samples):
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            rec = {"id": s.id, "ids": s.ids,
                   "loss_mask": [1 if m else 0 for m in s.loss_mask],
                   "regions": {k: list(v) for k, v in s.region_map.items()}}
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")
