"""Train n-gram scorers on differently-constructed pretraining data and
compare them on the six evaluation sequence kinds.

Mirrors the ablation: a model that only ever saw continuation junctions
falls apart on correspondence sequences, and vice versa; the unified
interleaving handles both.
"""
from unitweave import (SynthConfig, WordTokenizer, build_layout, draw_choices,
                       evaluate_eval_suite, generate, plan_segments, render,
                       train_ngram)
from unitweave.interleaver import SegmentChoice
from unitweave.rng import sample_rng
from unitweave.templates import build_setup_sequence

cfg = SynthConfig(n_samples=1800, lexicon_size=30, words_per_utterance=(3, 40),
                  word_duration_range=(0.08, 0.5), unit_codebook_size=48,
                  noise_scale=0.05, seed=21)
corpus = generate(cfg)
layout = build_layout(text_size=40, unit_count=48)
tok = WordTokenizer.from_words(corpus.lexicon, layout)
train_pairs = [s.pair for s in corpus.samples[:1000]]
eval_pairs = [s.pair for s in corpus.samples[1000:] if 2 <= len(s.words) <= 8][:150]
print(f"{len(train_pairs)} training utterances, {len(eval_pairs)} eval utterances")


def dataset(setup):
    seqs = []
    for pair in train_pairs:
        rng = sample_rng(99, pair.id)
        if setup == "unified":
            plan = plan_segments(pair)
            seqs.append(render(pair, plan, draw_choices(plan, rng), layout, tok))
        elif setup == 1:
            plan = plan_segments(pair)
            choices = [SegmentChoice(c.main, False) for c in draw_choices(plan, rng)]
            seqs.append(render(pair, plan, choices, layout, tok))
        else:
            seqs.append(build_setup_sequence(pair, setup, rng, layout, tok))
    return seqs


overrides = {"unified": None, 1: layout.continue_id,
             2: layout.correspond_id, 3: layout.correspond_id}
print(f"{'setup':>8} {'corr_u2t':>10} {'cont_u2t':>10} {'cont_t2u':>10} "
      f"{'text-agg':>10} {'unit-agg':>10}")
for setup in ("unified", 1, 2, 3):
    scorer = train_ngram(dataset(setup), n=2, add_k=0.1, layout=layout)
    rep = evaluate_eval_suite(scorer, eval_pairs, layout, tok,
                              special_override=overrides[setup])
    print(f"{str(setup):>8} {rep.per_kind['corr_u2t'][0]:>10.2f} "
          f"{rep.per_kind['cont_u2t'][0]:>10.2f} {rep.per_kind['cont_t2u'][0]:>10.2f} "
          f"{rep.text_ppl:>10.2f} {rep.unit_ppl:>10.2f}")
