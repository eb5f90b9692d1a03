"""Desk-scale scorer and evaluation protocol.

A count-based n-gram model with add-k smoothing and longest-context backoff
stands in for the LLM: every probability it emits is hand-checkable from the
count tables. On top of it:

- corpus NLL (the autoregressive training objective, mask-aware),
- modality-restricted NLL, where each next-token distribution is
  renormalized over a single modality's sub-vocabulary,
- exp-mean-log PPL aggregation across sequence kinds,
- WER, attention-profile aggregation, and a unit-histogram label probe.
"""

import math
import pickle
import string
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError
from .templates import (CONT_T2U, CONT_U2T, CORR_T2U, CORR_U2T, EVAL_KINDS,
                        UNCOND_TEXT, UNCOND_UNIT, build_eval_sequence)
from .vocab import TAG_TEXT, TAG_UNIT, TEXT, UNIT, VocabLayout, layout_hash

_TEXT_KINDS = (UNCOND_TEXT, CORR_U2T, CONT_U2T)
_UNIT_KINDS = (UNCOND_UNIT, CORR_T2U, CONT_T2U)


class NGramScorer:
    """Order-n count model over the unified vocabulary.

    Counts are kept per context length m = 0..n-1 as flat Counters over
    (context..., next) tuples, which makes shard merging exact. Lookup
    structures are built lazily.
    """

    def __init__(self, n: int, add_k: float, layout: VocabLayout):
        if n < 1:
            raise DataError(f"n-gram order {n} must be >= 1")
        if add_k <= 0:
            raise DataError(f"add_k {add_k} must be > 0")
        self.n = n
        self.add_k = float(add_k)
        self.layout_hash = layout_hash(layout)
        self.vocab_size = layout.total_size
        self.text_size = layout.text_size
        self.unit_count = layout.unit_count
        self.flat = [Counter() for _ in range(n)]
        self._grouped = None
        self._mod_totals = {}

    # -- training ----------------------------------------------------------

    def add_document(self, ids) -> None:
        seq = [int(t) for t in ids]
        for m in range(self.n):
            if len(seq) <= m and m > 0:
                continue
            self.flat[m].update(zip(*(seq[i:] for i in range(m + 1))))
        self._grouped = None
        self._mod_totals = {}

    def merge(self, other: "NGramScorer") -> "NGramScorer":
        if (self.n, self.layout_hash, self.add_k) != (other.n, other.layout_hash, other.add_k):
            raise DataError("cannot merge scorers with different order/layout/smoothing")
        out = NGramScorer.__new__(NGramScorer)
        out.__dict__.update({k: v for k, v in self.__dict__.items()
                             if k not in ("flat", "_grouped", "_mod_totals")})
        out.flat = [a + b for a, b in zip(self.flat, other.flat)]
        out._grouped = None
        out._mod_totals = {}
        return out

    def _finalize(self):
        if self._grouped is not None:
            return self._grouped
        grouped = [dict() for _ in range(self.n)]
        for m in range(self.n):
            g = grouped[m]
            for key, cnt in self.flat[m].items():
                ctx, nxt = key[:-1], key[-1]
                entry = g.get(ctx)
                if entry is None:
                    entry = g[ctx] = [{}, 0]
                entry[0][nxt] = entry[0].get(nxt, 0) + cnt
                entry[1] += cnt
        self._grouped = grouped
        return grouped

    # -- probability queries -------------------------------------------------

    def _backoff(self, context):
        """Longest trained context suffix: (counts dict, total) or (None, 0)."""
        grouped = self._finalize()
        ctx = tuple(int(t) for t in context[max(0, len(context) - (self.n - 1)):])
        for m in range(len(ctx), -1, -1):
            entry = grouped[m].get(ctx[len(ctx) - m:])
            if entry is not None:
                return entry[0], entry[1], m, ctx[len(ctx) - m:]
        return None, 0, 0, ()

    def next_dist(self, context) -> np.ndarray:
        """Smoothed next-token distribution over the full vocabulary."""
        counts, total, _, _ = self._backoff(context)
        dist = np.full(self.vocab_size, self.add_k, dtype=np.float64)
        if counts:
            for tok, c in counts.items():
                dist[tok] += c
        dist /= total + self.add_k * self.vocab_size
        return dist

    def token_logprob(self, token: int, context) -> float:
        counts, total, _, _ = self._backoff(context)
        c = counts.get(int(token), 0) if counts else 0
        return math.log((c + self.add_k) / (total + self.add_k * self.vocab_size))

    def _modality_totals(self, m, ctx, counts):
        key = (m, ctx)
        cached = self._mod_totals.get(key)
        if cached is None:
            t_lo = self.text_size
            u_lo = self.text_size + 2
            tot_text = tot_unit = 0
            if counts:
                for tok, c in counts.items():
                    if tok < t_lo:
                        tot_text += c
                    elif tok >= u_lo:
                        tot_unit += c
            cached = self._mod_totals[key] = (tot_text, tot_unit)
        return cached

    def restricted_logprob(self, token: int, context, modality: str) -> float:
        """log p(token | context) renormalized over one modality's ids."""
        counts, total, m, ctx = self._backoff(context)
        c = counts.get(int(token), 0) if counts else 0
        tot_text, tot_unit = self._modality_totals(m, ctx, counts)
        if modality == TEXT:
            tot_m, size_m = tot_text, self.text_size
        elif modality == UNIT:
            tot_m, size_m = tot_unit, self.unit_count
        else:
            raise DomainError(f"cannot restrict to modality {modality!r}")
        return math.log((c + self.add_k) / (tot_m + self.add_k * size_m))


def train_ngram(corpus, n: int, add_k: float, layout: VocabLayout) -> NGramScorer:
    """Count contexts of every order <= n over the corpus documents.

    `corpus` can be a CorpusFile, a list of PackedBins, or an iterable of
    sequences (id lists or objects with .ids). Contexts never cross document
    boundaries.
    """
    scorer = NGramScorer(n=n, add_k=add_k, layout=layout)
    for ids in _iter_docs(corpus):
        scorer.add_document(ids)
    return scorer


def _iter_docs(corpus):
    from .packer import CorpusFile, PackedBin, iter_documents

    if isinstance(corpus, CorpusFile):
        for ids, _ in iter_documents(corpus.bins):
            yield ids
        return
    if isinstance(corpus, (list, tuple)) and corpus and isinstance(corpus[0], PackedBin):
        for ids, _ in iter_documents(corpus):
            yield ids
        return
    for seq in corpus:
        ids = getattr(seq, "ids", seq)
        yield ids


def save_scorer(scorer: NGramScorer, path) -> None:
    rec = {"n": scorer.n, "add_k": scorer.add_k, "layout_hash": scorer.layout_hash,
           "vocab_size": scorer.vocab_size, "text_size": scorer.text_size,
           "unit_count": scorer.unit_count,
           "flat": [dict(c) for c in scorer.flat]}
    with open(path, "wb") as f:
        pickle.dump(rec, f, protocol=pickle.HIGHEST_PROTOCOL)


def load_scorer(path, layout: VocabLayout = None) -> NGramScorer:
    with open(path, "rb") as f:
        rec = pickle.load(f)
    scorer = NGramScorer.__new__(NGramScorer)
    scorer.n = rec["n"]
    scorer.add_k = rec["add_k"]
    scorer.layout_hash = rec["layout_hash"]
    scorer.vocab_size = rec["vocab_size"]
    scorer.text_size = rec["text_size"]
    scorer.unit_count = rec["unit_count"]
    scorer.flat = [Counter(d) for d in rec["flat"]]
    scorer._grouped = None
    scorer._mod_totals = {}
    if layout is not None and scorer.layout_hash != layout_hash(layout):
        raise DataError(f"{path}: scorer layout hash {scorer.layout_hash:016x} "
                        f"does not match the supplied layout")
    return scorer


# ---------------------------------------------------------------------------
# NLL / PPL protocol

def corpus_nll(scorer: NGramScorer, sequences) -> float:
    """Total negative log-likelihood (nats) of the sequences.

    When a sequence carries a loss_mask, masked-out positions contribute
    nothing; contexts still include them.
    """
    total = 0.0
    w = scorer.n - 1
    for seq in sequences:
        ids = getattr(seq, "ids", seq)
        mask = getattr(seq, "loss_mask", None)
        ids = [int(t) for t in ids]
        for k in range(len(ids)):
            if mask is not None and not mask[k]:
                continue
            total -= scorer.token_logprob(ids[k], ids[max(0, k - w):k])
    return total


def restricted_nll(scorer: NGramScorer, ids, target_span, target_modality: str,
                   layout: VocabLayout) -> np.ndarray:
    """Per-token NLL over the span, renormalized over the target modality."""
    if scorer.layout_hash != layout_hash(layout):
        raise DomainError("scorer was trained under a different layout")
    lo, hi = target_span
    ids = [int(t) for t in ids]
    if not (0 <= lo <= hi <= len(ids)):
        raise DomainError(f"target span {target_span} outside sequence of {len(ids)}")
    from .vocab import modality_of
    for k in range(lo, hi):
        if modality_of(layout, ids[k]) != target_modality:
            raise DomainError(
                f"token at {k} is {modality_of(layout, ids[k])}, expected {target_modality}")
    out = np.empty(hi - lo, dtype=np.float64)
    w = scorer.n - 1
    for k in range(lo, hi):
        out[k - lo] = -scorer.restricted_logprob(
            ids[k], ids[max(0, k - w):k], target_modality)
    return out


def ppl_aggregate(ppls) -> float:
    """exp(mean(log(ppl_i))): the geometric mean."""
    vals = list(ppls)
    if not vals:
        raise DomainError("cannot aggregate an empty PPL list")
    if any(p < 1.0 for p in vals):
        raise DomainError(f"PPL values must be >= 1, got {min(vals)}")
    return float(math.exp(sum(math.log(p) for p in vals) / len(vals)))


@dataclass
class EvalReport:
    per_kind: dict  # kind -> (ppl, token count)
    text_ppl: float = float("nan")
    unit_ppl: float = float("nan")

    def lines(self):
        out = [f"kind={k} ppl={p:.6f} tokens={n}" for k, (p, n) in self.per_kind.items()]
        out.append(f"aggregate=text ppl={self.text_ppl:.6f}")
        out.append(f"aggregate=unit ppl={self.unit_ppl:.6f}")
        return out

    def csv_lines(self):
        out = ["kind,ppl,tokens"]
        out += [f"{k},{p:.12g},{n}" for k, (p, n) in self.per_kind.items()]
        out.append(f"aggregate_text,{self.text_ppl:.12g},")
        out.append(f"aggregate_unit,{self.unit_ppl:.12g},")
        return out


def evaluate_eval_suite(scorer: NGramScorer, pairs, layout: VocabLayout, text_tok,
                        kinds=EVAL_KINDS, special_override=None) -> EvalReport:
    """Token-pooled restricted PPL per sequence kind + per-modality aggregates.

    Pairs with fewer than two words are skipped for continuation kinds (they
    cannot be split in half).
    """
    per_kind = {}
    for kind in kinds:
        total_nll = 0.0
        total_tok = 0
        for pair in pairs:
            if kind in (CONT_U2T, CONT_T2U) and len(pair.words) < 2:
                continue
            ev = build_eval_sequence(pair, kind, layout, text_tok,
                                     special_override=special_override)
            nll = restricted_nll(scorer, ev.ids, ev.target_span,
                                 ev.target_modality, layout)
            total_nll += float(nll.sum())
            total_tok += len(nll)
        if total_tok == 0:
            raise DataError(f"no evaluable tokens for kind {kind!r}")
        per_kind[kind] = (float(math.exp(total_nll / total_tok)), total_tok)
    report = EvalReport(per_kind=per_kind)
    text_ppls = [per_kind[k][0] for k in _TEXT_KINDS if k in per_kind]
    unit_ppls = [per_kind[k][0] for k in _UNIT_KINDS if k in per_kind]
    if text_ppls:
        report.text_ppl = ppl_aggregate(text_ppls)
    if unit_ppls:
        report.unit_ppl = ppl_aggregate(unit_ppls)
    return report


# ---------------------------------------------------------------------------
# WER

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def _normalize_words(words):
    if isinstance(words, str):
        words = words.split()
    out = []
    for w in words:
        w = w.lower().translate(_PUNCT_TABLE)
        if w:
            out.append(w)
    return out


def wer(ref, hyp) -> float:
    """(S + D + I) / len(ref) after case folding and punctuation stripping."""
    r = _normalize_words(ref)
    h = _normalize_words(hyp)
    if not r:
        raise DomainError("reference is empty after normalization")
    prev = list(range(len(h) + 1))
    for i, rw in enumerate(r, 1):
        cur = [i] + [0] * len(h)
        for j, hw in enumerate(h, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (rw != hw))
        prev = cur
    return prev[len(h)] / len(r)


# ---------------------------------------------------------------------------
# Attention-profile aggregation

def attention_modality_profile(attn, source_tags) -> np.ndarray:
    """Per-layer, per-target (p_speech, p_text, p_other) attention mass.

    `attn` is a layers x heads x targets x sources probability tensor whose
    source rows each sum to 1; head probabilities are averaged, then source
    mass is pooled by modality tag.
    """
    a = np.asarray(attn, dtype=np.float64)
    if a.ndim != 4:
        raise DomainError(f"attention tensor must be 4-D, got shape {a.shape}")
    n_sources = a.shape[3]
    tags = list(source_tags)
    if len(tags) != n_sources:
        raise DomainError(f"{len(tags)} source tags for {n_sources} sources")
    sums = a.sum(axis=3)
    if np.abs(sums - 1.0).max() > 1e-4:
        raise DomainError("attention rows are not normalized to 1 (+- 1e-4)")

    def is_kind(tag, kind):
        if kind == UNIT:
            return tag in (UNIT, TAG_UNIT, "speech")
        return tag in (TEXT, TAG_TEXT)

    speech_mask = np.array([is_kind(t, UNIT) for t in tags])
    text_mask = np.array([is_kind(t, TEXT) for t in tags])
    other_mask = ~(speech_mask | text_mask)
    mean_heads = a.mean(axis=1)  # layers x targets x sources
    profile = np.stack([mean_heads[..., speech_mask].sum(axis=-1),
                        mean_heads[..., text_mask].sum(axis=-1),
                        mean_heads[..., other_mask].sum(axis=-1)], axis=-1)
    return profile


# ---------------------------------------------------------------------------
# Paralinguistic label probe

def probe_label_accuracy(train, test, num_units: int = None) -> float:
    """Train a per-class unit-frequency model; report test accuracy.

    Each class gets a multinomial over unit ids with add-1 smoothing; test
    sequences are classified by argmax posterior (prior = class frequency),
    ties resolved to the lowest class index.
    """
    train = list(train)
    test = list(test)
    if not test:
        raise DataError("empty probe test set")
    classes = sorted({label for _, label in train})
    if len(classes) < 2:
        raise DataError(f"need >= 2 label classes in train, got {classes}")
    if num_units is None:
        hi = 0
        for units, _ in train + test:
            if len(units):
                hi = max(hi, int(np.max(units)))
        num_units = hi + 1
    counts = np.zeros((len(classes), num_units), dtype=np.float64)
    priors = np.zeros(len(classes), dtype=np.float64)
    index = {c: i for i, c in enumerate(classes)}
    for units, label in train:
        i = index[label]
        counts[i] += np.bincount(np.asarray(units, dtype=np.int64), minlength=num_units)
        priors[i] += 1
    log_prior = np.log(priors / priors.sum())
    log_cond = np.log((counts + 1.0) / (counts.sum(axis=1, keepdims=True) + num_units))
    correct = 0
    for units, label in test:
        hist = np.bincount(np.asarray(units, dtype=np.int64), minlength=num_units)
        scores = log_prior + log_cond @ hist
        pred = classes[int(np.argmax(scores))]
        correct += pred == label
    return correct / len(test)
