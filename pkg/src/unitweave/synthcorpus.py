"""Fully synthetic aligned unit/text corpora with known ground truth.

Generative story: every lexicon word owns a base feature vector; an
utterance's frames are that word's base plus a prosody-class offset plus
Gaussian noise, emitted at 50 Hz. Word durations are sampled per occurrence
and quantized to whole frames, so alignment arithmetic is exact. The
ground-truth codebook contains every distinct (word, class) prototype (plus
far-away filler centroids up to the configured size), so quantizing
noiseless features reproduces the true units exactly.

Utterances open with the lexicon's sentence-start marker (index 0) and
continue with words drawn uniformly from the rest of the lexicon, giving
the corpus a learnable sentence-initial statistic.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .alignment import RATE_HZ, AlignedPair, WordAlignment
from .errors import ConfigError
from .quantizer import Codebook, quantize
from .rng import sample_rng
from .templates import DialogSample

_BASE_SCALE = 10.0
_FILLER_SHIFT = 1000.0

RESPONSE_RULES = ("echo", "reverse")


@dataclass
class SynthConfig:
    n_samples: int = 100
    lexicon_size: int = 20
    words_per_utterance: tuple = (3, 8)
    word_duration_range: tuple = (0.1, 0.4)
    feature_dim: int = 4
    unit_codebook_size: int = 256
    prosody_classes: int = 1
    prosody_offset: float = 0.0
    noise_scale: float = 0.1
    response_rule: str = "echo"
    seed: int = 0

    def validate(self):
        if self.n_samples < 1 or self.lexicon_size < 2 or self.feature_dim < 1:
            raise ConfigError("n_samples, lexicon_size >= 2 and feature_dim must be positive")
        if self.unit_codebook_size < 1 or self.prosody_classes < 1:
            raise ConfigError("unit_codebook_size and prosody_classes must be positive")
        lo, hi = self.words_per_utterance
        if not (1 <= lo <= hi):
            raise ConfigError(f"bad words_per_utterance range {self.words_per_utterance}")
        dlo, dhi = self.word_duration_range
        if not (0.0 < dlo <= dhi <= 10.0):
            raise ConfigError(f"word durations must lie in (0, 10], got {self.word_duration_range}")
        if self.prosody_offset < 0:
            raise ConfigError("prosody_offset must be >= 0")
        if self.response_rule not in RESPONSE_RULES:
            raise ConfigError(f"unknown response rule {self.response_rule!r}; "
                              f"expected one of {RESPONSE_RULES}")


@dataclass
class SynthSample:
    id: str
    features: np.ndarray
    units: np.ndarray
    words: list
    label: int
    pair: AlignedPair


@dataclass
class SynthCorpus:
    config: SynthConfig
    lexicon: list
    codebook: Codebook
    prototype_units: np.ndarray  # (lexicon, classes) -> true centroid index
    samples: list = field(default_factory=list)


def _world(config: SynthConfig):
    """Lexicon, per-class offsets, prototype grid and the true codebook."""
    rng = sample_rng(config.seed, "world")
    lexicon = [f"w{i:03d}" for i in range(config.lexicon_size)]
    bases = rng.normal(0.0, _BASE_SCALE, size=(config.lexicon_size, config.feature_dim))
    dirs = rng.normal(size=(config.prosody_classes, config.feature_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    prototypes = bases[:, None, :] + config.prosody_offset * dirs[None, :, :]

    seen = {}
    rows = []
    proto_units = np.empty((config.lexicon_size, config.prosody_classes), dtype=np.int64)
    for w in range(config.lexicon_size):
        for c in range(config.prosody_classes):
            key = prototypes[w, c].tobytes()
            if key not in seen:
                seen[key] = len(rows)
                rows.append(prototypes[w, c])
            proto_units[w, c] = seen[key]
    if len(rows) > config.unit_codebook_size:
        raise ConfigError(
            f"unit_codebook_size={config.unit_codebook_size} cannot host "
            f"{len(rows)} distinct (word, class) prototypes")
    n_fillers = config.unit_codebook_size - len(rows)
    fillers = rng.normal(_FILLER_SHIFT, 1.0, size=(n_fillers, config.feature_dim))
    centroids = np.vstack([np.asarray(rows), fillers]) if n_fillers else np.asarray(rows)
    codebook = Codebook(k=config.unit_codebook_size, dim=config.feature_dim,
                        centroids=centroids, seed=config.seed)
    return lexicon, prototypes, proto_units, codebook


def _sample_words(config, rng):
    """Word indices and per-word frame counts for one utterance."""
    lo, hi = config.words_per_utterance
    n_words = int(rng.integers(lo, hi + 1))
    idx = np.empty(n_words, dtype=np.int64)
    idx[0] = 0
    if n_words > 1:
        idx[1:] = rng.integers(1, config.lexicon_size, size=n_words - 1)
    dlo, dhi = config.word_duration_range
    durs = rng.uniform(dlo, dhi, size=n_words)
    frames = np.maximum(1, np.floor(durs * RATE_HZ + 0.5).astype(np.int64))
    return idx, frames


def _alignment_for(lexicon, idx, frames):
    words = []
    spans = []
    cum = 0
    for w, n in zip(idx, frames):
        words.append(WordAlignment(word=lexicon[w], start_sec=cum / RATE_HZ,
                                   end_sec=(cum + n) / RATE_HZ))
        spans.append((cum, cum + int(n)))
        cum += int(n)
    return words, spans, cum


def generate(config: SynthConfig) -> SynthCorpus:
    """Deterministic corpus of (features, true units, alignments, label)."""
    config.validate()
    lexicon, prototypes, proto_units, codebook = _world(config)
    corpus = SynthCorpus(config=config, lexicon=lexicon, codebook=codebook,
                         prototype_units=proto_units)
    for i in range(config.n_samples):
        rng = sample_rng(config.seed, f"utt:{i:08d}")
        label = int(rng.integers(config.prosody_classes))
        idx, frames = _sample_words(config, rng)
        words, spans, n_frames = _alignment_for(lexicon, idx, frames)
        feats = np.repeat(prototypes[idx, label], frames, axis=0)
        if config.noise_scale > 0:
            feats = feats + config.noise_scale * rng.normal(size=feats.shape)
        units = quantize(feats, codebook)
        sid = f"utt{i:06d}"
        pair = AlignedPair(id=sid, units=[int(u) for u in units], words=words,
                           unit_spans=spans, duration_sec=n_frames / RATE_HZ)
        corpus.samples.append(SynthSample(id=sid, features=feats, units=units,
                                          words=words, label=label, pair=pair))
    return corpus


def _apply_rule(rule, words):
    if rule == "echo":
        return list(words)
    if rule == "reverse":
        return list(reversed(words))
    raise ConfigError(f"unknown response rule {rule!r}")


def generate_dialogs(config: SynthConfig):
    """Single-turn dialogs whose response is a deterministic rule of the input.

    Response units come from the noiseless (word, class) prototypes through
    the true codebook, so the mapping is exactly learnable.
    """
    config.validate()
    lexicon, prototypes, proto_units, codebook = _world(config)
    word_index = {w: i for i, w in enumerate(lexicon)}
    dialogs = []
    for i in range(config.n_samples):
        rng = sample_rng(config.seed, f"dlg:{i:08d}")
        label = int(rng.integers(config.prosody_classes))
        idx, frames = _sample_words(config, rng)
        words, spans, n_frames = _alignment_for(lexicon, idx, frames)
        feats = np.repeat(prototypes[idx, label], frames, axis=0)
        if config.noise_scale > 0:
            feats = feats + config.noise_scale * rng.normal(size=feats.shape)
        units = quantize(feats, codebook)
        sid = f"dlg{i:06d}"
        pair = AlignedPair(id=sid, units=[int(u) for u in units], words=words,
                           unit_spans=spans, duration_sec=n_frames / RATE_HZ)

        resp_words = _apply_rule(config.response_rule, [w.word for w in words])
        dlo, dhi = config.word_duration_range
        resp_durs = rng.uniform(dlo, dhi, size=len(resp_words))
        resp_frames = np.maximum(1, np.floor(resp_durs * RATE_HZ + 0.5).astype(np.int64))
        resp_units = np.repeat(proto_units[[word_index[w] for w in resp_words], label],
                               resp_frames)
        dialogs.append(DialogSample(id=sid, input=pair,
                                    response_text=resp_words,
                                    response_units=[int(u) for u in resp_units]))
    return dialogs


# ---------------------------------------------------------------------------
# File emission (formats consumed by the alignment/quantizer modules)

def write_corpus_files(corpus: SynthCorpus, outdir) -> None:
    import os

    from .quantizer import write_codebook, write_features

    os.makedirs(os.path.join(outdir, "features"), exist_ok=True)
    with open(os.path.join(outdir, "units.jsonl"), "w", encoding="utf-8") as f:
        for s in corpus.samples:
            f.write(json.dumps({"id": s.id, "units": [int(u) for u in s.units]},
                               separators=(",", ":")) + "\n")
    with open(os.path.join(outdir, "words.jsonl"), "w", encoding="utf-8") as f:
        for s in corpus.samples:
            rec = {"id": s.id, "words": [{"w": w.word, "start": w.start_sec, "end": w.end_sec}
                                         for w in s.words]}
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")
    with open(os.path.join(outdir, "labels.jsonl"), "w", encoding="utf-8") as f:
        for s in corpus.samples:
            f.write(json.dumps({"id": s.id, "label": s.label},
                               separators=(",", ":")) + "\n")
    for s in corpus.samples:
        write_features(os.path.join(outdir, "features", f"{s.id}.usdf"), s.features)
    write_codebook(os.path.join(outdir, "codebook.usdc"), corpus.codebook)


def write_dialogs_jsonl(path, dialogs) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in dialogs:
            rec = {"id": d.id,
                   "input_units": [int(u) for u in d.input.units],
                   "input_words": [{"w": w.word, "start": w.start_sec, "end": w.end_sec}
                                   for w in d.input.words],
                   "response_text": " ".join(d.response_text),
                   "response_units": [int(u) for u in d.response_units]}
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")
