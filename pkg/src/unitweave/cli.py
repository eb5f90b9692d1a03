"""Command-line entry point for batch corpus construction and evaluation.

Every subcommand is a pure function of (inputs, config, seed): outputs carry
no timestamps or hidden state, so identical invocations produce identical
files. Config keys live in a flat JSON file; every key has a flag twin and
flags win. Exit codes: 0 ok, 2 config error, 3 data error, 4 checksum error.
"""

import argparse
import concurrent.futures
import glob
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import alignment, interleaver, packer, quantizer, scoring, synthcorpus, templates, vocab
from .errors import ConfigError, CorpusError, DataError, UnitweaveError
from .rng import sample_rng

log = logging.getLogger("unitweave")


@dataclass
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    text_size: int = 256
    unit_count: int = vocab.DEFAULT_UNIT_COUNT
    segment_target_sec: float = interleaver.SEGMENT_TARGET_SEC
    insert_prob: float = 0.5
    capacity: int = packer.DEFAULT_CAPACITY
    setup: str = "unified"
    kinds: str = "all"

    def validate(self):
        if not 0.0 <= self.insert_prob <= 1.0:
            raise ConfigError(f"insert_prob {self.insert_prob} outside [0, 1]")
        if self.capacity < 16:
            raise ConfigError(f"capacity {self.capacity} must be >= 16")
        if self.workers < 1:
            raise ConfigError(f"workers {self.workers} must be >= 1")
        if self.setup not in ("unified", "1", "2", "3"):
            raise ConfigError(f"setup must be unified|1|2|3, got {self.setup!r}")


def _resolve_config(args) -> PipelineConfig:
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                file_cfg = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config file {args.config}: {e}")
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{args.config}: config must be a flat JSON object")
    cfg = PipelineConfig()
    for key in vars(cfg):
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            setattr(cfg, key, flag_val)
        elif key in file_cfg:
            setattr(cfg, key, type(getattr(cfg, key))(file_cfg[key]))
    cfg.validate()
    log.info("resolved-config %s", json.dumps(vars(cfg), sort_keys=True))
    return cfg


def _load_layout_arg(args) -> vocab.VocabLayout:
    if not getattr(args, "vocab", None):
        raise ConfigError("--vocab layout file is required for this subcommand")
    return vocab.load_layout(args.vocab)


def _load_tokenizer(args, fallback_words=None, layout=None):
    if getattr(args, "lexicon", None):
        return templates.WordTokenizer.load(args.lexicon)
    if fallback_words is None:
        raise ConfigError("--lexicon tokenizer file is required for this subcommand")
    return templates.WordTokenizer.from_words(fallback_words, layout)


def _load_pairs(args):
    if getattr(args, "pairs", None):
        pairs = alignment.load_pairs_jsonl(args.pairs)
    else:
        if not (getattr(args, "units", None) and getattr(args, "words", None)):
            raise ConfigError("need --pairs, or both --units and --words")
        units = alignment.load_units_jsonl(args.units)
        words = alignment.load_words_jsonl(args.words)
        pairs = alignment.build_pairs(units, words)
    if not pairs:
        raise DataError("no aligned pairs loaded")
    return pairs


# ---------------------------------------------------------------------------
# subcommands

def _cmd_synth(args):
    cfg = _resolve_config(args)
    syn = synthcorpus.SynthConfig(
        n_samples=args.n_samples, lexicon_size=args.lexicon_size,
        words_per_utterance=(args.words_min, args.words_max),
        word_duration_range=(args.dur_min, args.dur_max),
        feature_dim=args.feature_dim, unit_codebook_size=cfg.unit_count,
        prosody_classes=args.prosody_classes, prosody_offset=args.prosody_offset,
        noise_scale=args.noise_scale, response_rule=args.response_rule,
        seed=cfg.seed)
    min_text = templates.WordTokenizer.FIRST_WORD_ID + syn.lexicon_size
    if cfg.text_size < min_text:
        raise ConfigError(f"text_size {cfg.text_size} cannot host a "
                          f"{syn.lexicon_size}-word lexicon (need >= {min_text})")
    corpus = synthcorpus.generate(syn)
    os.makedirs(args.out, exist_ok=True)
    synthcorpus.write_corpus_files(corpus, args.out)
    alignment.write_pairs_jsonl(os.path.join(args.out, "pairs.jsonl"),
                                [s.pair for s in corpus.samples])
    layout = vocab.build_layout(text_size=cfg.text_size,
                                unit_count=syn.unit_codebook_size)
    vocab.save_layout(layout, os.path.join(args.out, "vocab.layout"))
    tok = templates.WordTokenizer.from_words(corpus.lexicon, layout)
    tok.save(os.path.join(args.out, "lexicon.json"))
    if args.dialogs:
        dialogs = synthcorpus.generate_dialogs(syn)
        synthcorpus.write_dialogs_jsonl(os.path.join(args.out, "dialogs.jsonl"), dialogs)
    log.info("synth wrote %d utterances to %s", len(corpus.samples), args.out)
    return 0


def _cmd_quantize(args):
    _resolve_config(args)
    codebook = quantizer.read_codebook(args.codebook)
    feature_files = ([args.features] if os.path.isfile(args.features)
                     else sorted(glob.glob(os.path.join(args.features, "*.usdf"))))
    if not feature_files:
        raise DataError(f"no feature files found under {args.features}")
    with open(args.out, "w", encoding="utf-8") as f:
        for path in feature_files:
            sid = os.path.splitext(os.path.basename(path))[0]
            units = quantizer.quantize(quantizer.read_features(path), codebook)
            f.write(json.dumps({"id": sid, "units": [int(u) for u in units]},
                               separators=(",", ":")) + "\n")
    log.info("quantized %d files -> %s", len(feature_files), args.out)
    return 0


def _cmd_align(args):
    _resolve_config(args)
    units = alignment.load_units_jsonl(args.units)
    if args.textgrid:
        tg_files = ([args.textgrid] if os.path.isfile(args.textgrid)
                    else sorted(glob.glob(os.path.join(args.textgrid, "*.TextGrid"))))
        words_by_id = {}
        for path in tg_files:
            sid = os.path.splitext(os.path.basename(path))[0]
            with open(path, "rb") as f:
                words_by_id[sid] = alignment.parse_textgrid(f.read())
    else:
        if not args.words:
            raise ConfigError("need --textgrid or --words")
        words_by_id = alignment.load_words_jsonl(args.words)
    pairs = alignment.build_pairs(units, words_by_id)
    alignment.write_pairs_jsonl(args.out, pairs)
    log.info("aligned %d utterances -> %s", len(pairs), args.out)
    return 0


# module-level worker state for data-parallel rendering
_WORK = {}


def _init_worker(layout_bytes, tok_mapping, cfg_dict):
    _WORK["layout"] = vocab.build_layout(
        text_size=cfg_dict["text_size"], unit_count=cfg_dict["unit_count"],
        control_ids=tuple(cfg_dict["control_ids"]))
    _WORK["tok"] = templates.WordTokenizer(tok_mapping)
    _WORK["cfg"] = cfg_dict


def _render_one(pair):
    layout, tok, cfg = _WORK["layout"], _WORK["tok"], _WORK["cfg"]
    rng = sample_rng(cfg["seed"], pair.id)
    if cfg["setup"] == "unified":
        plan = interleaver.plan_segments(pair, target_sec=cfg["segment_target_sec"])
        choices = interleaver.draw_choices(plan, rng, insert_prob=cfg["insert_prob"])
        return interleaver.render(pair, plan, choices, layout, tok)
    return templates.build_setup_sequence(pair, int(cfg["setup"]), rng, layout, tok)


def _cmd_interleave(args):
    cfg = _resolve_config(args)
    layout = _load_layout_arg(args)
    pairs = _load_pairs(args)
    tok = _load_tokenizer(args, fallback_words=[w.word for p in pairs for w in p.words],
                          layout=layout)
    cfg_dict = {"seed": cfg.seed, "setup": cfg.setup, "insert_prob": cfg.insert_prob,
                "segment_target_sec": cfg.segment_target_sec,
                "text_size": layout.text_size, "unit_count": layout.unit_count,
                "control_ids": list(layout.control_ids)}
    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=cfg.workers, initializer=_init_worker,
                initargs=(None, tok.word_to_id, cfg_dict)) as ex:
            sequences = list(ex.map(_render_one, pairs, chunksize=64))
    else:
        _init_worker(None, tok.word_to_id, cfg_dict)
        sequences = [_render_one(p) for p in pairs]
    interleaver.write_sequences_jsonl(args.out, sequences, seed=cfg.seed)
    log.info("interleaved %d sequences (setup=%s) -> %s", len(sequences), cfg.setup, args.out)
    return 0


def _cmd_template(args):
    _resolve_config(args)
    layout = _load_layout_arg(args)
    dialogs = templates.load_dialogs_jsonl(args.dialogs)
    words = [w.word for d in dialogs for w in d.input.words]
    words += [w for d in dialogs for w in d.response_text]
    tok = _load_tokenizer(args, fallback_words=words, layout=layout)
    if args.template == "sdm":
        samples = [templates.build_sdm_template(d, layout, tok) for d in dialogs]
    elif args.template == "text":
        samples = [templates.build_text_dialog_template(d, layout, tok) for d in dialogs]
    else:
        samples = [templates.build_s1s2_template(d, layout) for d in dialogs]
    templates.write_training_samples_jsonl(args.out, samples)
    log.info("built %d %s templates -> %s", len(samples), args.template, args.out)
    return 0


def _load_docs_jsonl(path):
    """Sequences or training samples: {"id", "ids", ["loss_mask"]} per line."""
    docs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            mask = rec.get("loss_mask")
            docs.append(templates.TrainingSample(
                id=rec["id"], ids=rec["ids"],
                loss_mask=[bool(m) for m in mask] if mask else [True] * len(rec["ids"])))
    return docs


def _cmd_pack(args):
    cfg = _resolve_config(args)
    layout = _load_layout_arg(args)
    docs = _load_docs_jsonl(args.inp)
    bins = packer.pack_ffd(docs, capacity=cfg.capacity)
    checksum = packer.write_corpus(bins, layout, args.out)
    log.info("packed %d docs into %d bins (capacity %d, checksum %016x) -> %s",
             len(docs), len(bins), cfg.capacity, checksum, args.out)
    return 0


def _cmd_train_scorer(args):
    _resolve_config(args)
    layout = _load_layout_arg(args)
    if args.inp.endswith(".jsonl"):
        corpus = _load_docs_jsonl(args.inp)
    else:
        corpus = packer.read_corpus(args.inp, layout=layout)
    scorer = scoring.train_ngram(corpus, n=args.order, add_k=args.add_k, layout=layout)
    scoring.save_scorer(scorer, args.out)
    log.info("trained order-%d scorer (add_k=%g) -> %s", args.order, args.add_k, args.out)
    return 0


def _cmd_eval_ppl(args):
    cfg = _resolve_config(args)
    layout = _load_layout_arg(args)
    scorer = scoring.load_scorer(args.scorer, layout=layout)
    pairs = _load_pairs(args)
    tok = _load_tokenizer(args, fallback_words=[w.word for p in pairs for w in p.words],
                          layout=layout)
    kinds = templates.EVAL_KINDS if cfg.kinds == "all" else tuple(cfg.kinds.split(","))
    for k in kinds:
        if k not in templates.EVAL_KINDS:
            raise ConfigError(f"unknown eval kind {k!r}")
    override = None
    if args.special_override == "correspond":
        override = layout.correspond_id
    elif args.special_override == "continue":
        override = layout.continue_id
    report = scoring.evaluate_eval_suite(scorer, pairs, layout, tok, kinds=kinds,
                                         special_override=override)
    text = "\n".join(report.lines()) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    sys.stdout.write(text)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write("\n".join(report.csv_lines()) + "\n")
    return 0


def _cmd_wer(args):
    _resolve_config(args)
    with open(args.ref, "r", encoding="utf-8") as f:
        refs = [l.rstrip("\n") for l in f if l.strip()]
    with open(args.hyp, "r", encoding="utf-8") as f:
        hyps = [l.rstrip("\n") for l in f if l.strip()]
    if len(refs) != len(hyps):
        raise DataError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    rates = []
    edits = words = 0
    for r, h in zip(refs, hyps):
        rate = scoring.wer(r, h)
        n_ref = len(scoring._normalize_words(r))
        rates.append(rate)
        edits += round(rate * n_ref)
        words += n_ref
    result = {"n": len(rates), "per_line": rates, "corpus_wer": edits / words}
    out = json.dumps(result, separators=(",", ":")) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out)
    sys.stdout.write(out)
    return 0


def _load_labeled_units(units_path, labels_path):
    units = alignment.load_units_jsonl(units_path)
    labeled = []
    with open(labels_path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["id"] not in units:
                raise DataError(f"label for unknown utterance {rec['id']!r}")
            labeled.append((units[rec["id"]], int(rec["label"])))
    return labeled


def _cmd_probe(args):
    _resolve_config(args)
    train = _load_labeled_units(args.train_units, args.train_labels)
    test = _load_labeled_units(args.test_units, args.test_labels)
    acc = scoring.probe_label_accuracy(train, test)
    out = json.dumps({"accuracy": acc, "n_train": len(train), "n_test": len(test)}) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out)
    sys.stdout.write(out)
    return 0


def _cmd_attn_profile(args):
    _resolve_config(args)
    data = np.load(args.attn)
    attn = data["attn"] if hasattr(data, "files") else data
    with open(args.tags, "r", encoding="utf-8") as f:
        tags = json.load(f)
    profile = scoring.attention_modality_profile(attn, tags)
    lines = ["layer,target,p_speech,p_text,p_other"]
    for l in range(profile.shape[0]):
        for t in range(profile.shape[1]):
            p = profile[l, t]
            lines.append(f"{l},{t},{p[0]:.8f},{p[1]:.8f},{p[2]:.8f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    sys.stdout.write(text)
    return 0


def _cmd_stats(args):
    _resolve_config(args)
    layout = vocab.load_layout(args.vocab) if args.vocab else None
    corpus = packer.read_corpus(args.inp, layout=layout)
    n_tokens = sum(len(b.ids) for b in corpus.bins)
    n_docs = sum(len(b.doc_offsets) for b in corpus.bins)
    fill = n_tokens / (len(corpus.bins) * corpus.capacity) if corpus.bins else 0.0
    info = {"version": corpus.version, "layout_hash": f"{corpus.layout_hash:016x}",
            "capacity": corpus.capacity, "n_bins": len(corpus.bins),
            "n_docs": n_docs, "n_tokens": n_tokens, "fill_rate": round(fill, 6),
            "checksum": f"{corpus.checksum:016x}"}
    sys.stdout.write(json.dumps(info, sort_keys=True) + "\n")
    if args.dump:
        with open(args.dump, "w", encoding="utf-8") as f:
            for b in corpus.bins:
                rec = {"ids": b.ids, "loss_mask": [1 if m else 0 for m in b.loss_mask],
                       "doc_offsets": b.doc_offsets}
                f.write(json.dumps(rec, separators=(",", ":")) + "\n")
        log.info("dumped %d bins -> %s", len(corpus.bins), args.dump)
    return 0


# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="flat key-value JSON config; flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--text-size", dest="text_size", type=int, default=None)
    p.add_argument("--unit-count", dest="unit_count", type=int, default=None)
    p.add_argument("--insert-prob", dest="insert_prob", type=float, default=None)
    p.add_argument("--capacity", type=int, default=None)
    p.add_argument("--setup", choices=("unified", "1", "2", "3"), default=None)
    p.add_argument("--kinds", default=None)
    p.add_argument("--segment-target-sec", dest="segment_target_sec", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unitweave")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic aligned corpus")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=100)
    p.add_argument("--lexicon-size", dest="lexicon_size", type=int, default=20)
    p.add_argument("--words-min", dest="words_min", type=int, default=3)
    p.add_argument("--words-max", dest="words_max", type=int, default=8)
    p.add_argument("--dur-min", dest="dur_min", type=float, default=0.1)
    p.add_argument("--dur-max", dest="dur_max", type=float, default=0.4)
    p.add_argument("--feature-dim", dest="feature_dim", type=int, default=4)
    p.add_argument("--prosody-classes", dest="prosody_classes", type=int, default=1)
    p.add_argument("--prosody-offset", dest="prosody_offset", type=float, default=0.0)
    p.add_argument("--noise-scale", dest="noise_scale", type=float, default=0.1)
    p.add_argument("--response-rule", dest="response_rule", default="echo")
    p.add_argument("--dialogs", action="store_true", help="also emit dialogs.jsonl")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("quantize", help="map feature files to unit sequences")
    _add_common(p)
    p.add_argument("--features", required=True, help=".usdf file or directory")
    p.add_argument("--codebook", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("align", help="join units with word alignments")
    _add_common(p)
    p.add_argument("--units", required=True)
    p.add_argument("--textgrid", help="TextGrid file or directory")
    p.add_argument("--words", help="words JSONL (alternative to --textgrid)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("interleave", help="build interleaved training sequences")
    _add_common(p)
    p.add_argument("--vocab", required=True)
    p.add_argument("--pairs")
    p.add_argument("--units")
    p.add_argument("--words")
    p.add_argument("--lexicon")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_interleave)

    p = sub.add_parser("template", help="build fine-tuning templates from dialogs")
    _add_common(p)
    p.add_argument("--vocab", required=True)
    p.add_argument("--dialogs", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--template", choices=("sdm", "s1s2", "text"), default="sdm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_template)

    p = sub.add_parser("pack", help="pack sequences into a binary training corpus")
    _add_common(p)
    p.add_argument("--vocab", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("train-scorer", help="train the n-gram scorer")
    _add_common(p)
    p.add_argument("--vocab", required=True)
    p.add_argument("--in", dest="inp", required=True, help="packed corpus or JSONL")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--add-k", dest="add_k", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_scorer)

    p = sub.add_parser("eval-ppl", help="six-kind restricted-PPL evaluation")
    _add_common(p)
    p.add_argument("--vocab", required=True)
    p.add_argument("--scorer", required=True)
    p.add_argument("--pairs")
    p.add_argument("--units")
    p.add_argument("--words")
    p.add_argument("--lexicon")
    p.add_argument("--special-override", dest="special_override",
                   choices=("none", "correspond", "continue"), default="none")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_eval_ppl)

    p = sub.add_parser("wer", help="word error rate between parallel text files")
    _add_common(p)
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_wer)

    p = sub.add_parser("probe", help="unit-histogram label probe accuracy")
    _add_common(p)
    p.add_argument("--train-units", dest="train_units", required=True)
    p.add_argument("--train-labels", dest="train_labels", required=True)
    p.add_argument("--test-units", dest="test_units", required=True)
    p.add_argument("--test-labels", dest="test_labels", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("attn-profile", help="aggregate attention mass by modality")
    _add_common(p)
    p.add_argument("--attn", required=True, help=".npz with an 'attn' array (L,H,T,S)")
    p.add_argument("--tags", required=True, help="JSON list of source modality tags")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_attn_profile)

    p = sub.add_parser("stats", help="packed-corpus statistics and golden dump")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--vocab")
    p.add_argument("--dump", help="write a per-bin JSONL reference dump")
    p.set_defaults(func=_cmd_stats)

    return ap


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnitweaveError, OSError) as e:
        if isinstance(e, ConfigError):
            code = 2
        elif isinstance(e, CorpusError):
            code = 4
        else:
            code = 3
        sys.stderr.write(json.dumps({"error": type(e).__name__, "exit_code": code,
                                     "message": str(e)}) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
