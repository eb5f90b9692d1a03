"""The three-step interleaved-sequence construction, step by step.

Segmentation (N = floor(S/10)+1 capped by word count), per-segment main
modality + 50% sub-modality insertion, and token rendering where
<|correspond|> announces the same segment in the other modality and
<|continue|> a later position after a modality change.
"""
from unitweave import (SynthConfig, WordTokenizer, build_layout, draw_choices,
                       generate, plan_segments, render, verify_roundtrip)
from unitweave.rng import sample_rng
from unitweave.vocab import id_to_token

cfg = SynthConfig(n_samples=3, lexicon_size=10, words_per_utterance=(4, 6),
                  word_duration_range=(0.2, 0.6), unit_codebook_size=32,
                  noise_scale=0.05, seed=7)
corpus = generate(cfg)
layout = build_layout(text_size=16, unit_count=32)
tok = WordTokenizer.from_words(corpus.lexicon, layout)

pair = corpus.samples[0].pair
plan = plan_segments(pair)
print(f"utterance {pair.id}: {pair.duration_sec:.2f}s, {len(pair.words)} words "
      f"-> N = {plan.n_segments}")

rng = sample_rng(42, pair.id)
choices = draw_choices(plan, rng)
print("choices:", [(c.main, c.insert_sub) for c in choices])

seq = render(pair, plan, choices, layout, tok)


def pretty(token_id):
    mod, val = id_to_token(layout, token_id)
    if mod == "special":
        return f"<|{val}|>"
    if mod == "unit":
        return f"u{val}"
    return tok.id_to_word.get(val, f"t{val}")


print("rendered:", " ".join(pretty(t) for t in seq.ids[:30]),
      "..." if len(seq.ids) > 30 else "")
print("round trip ok:", verify_roundtrip(seq, pair, plan, choices, layout, tok))

# determinism: the (corpus seed, sample id) pair fully decides the sequence
again = render(pair, plan, draw_choices(plan, sample_rng(42, pair.id)), layout, tok)
print("same seed, same tokens:", again.ids == seq.ids)
