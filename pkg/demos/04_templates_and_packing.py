"""Dialog fine-tuning templates, loss masks, and corpus packing.

The single-turn template is  <bos> U(S1) <corr> T1 <sep> T2 <corr> U2 <eos>
with loss on T1/T2/U2 (+ terminators) only. Templates are then packed
first-fit-decreasing into capacity-bounded bins and written to a
checksummed binary file.
"""
from unitweave import (SynthConfig, WordTokenizer, build_layout,
                       build_s1s2_template, build_sdm_template, generate_dialogs,
                       pack_ffd, read_corpus, write_corpus)

cfg = SynthConfig(n_samples=40, lexicon_size=12, words_per_utterance=(2, 6),
                  word_duration_range=(0.1, 0.4), unit_codebook_size=32,
                  noise_scale=0.05, response_rule="reverse", seed=13)
dialogs = generate_dialogs(cfg)
layout = build_layout(text_size=32, unit_count=32)
tok = WordTokenizer.from_words([f"w{i:03d}" for i in range(12)], layout)

sample = build_sdm_template(dialogs[0], layout, tok)
print("template length:", len(sample.ids))
print("regions:", sample.region_map)
print("masked-in tokens:", sum(sample.loss_mask), "of", len(sample.ids))

s1s2 = build_s1s2_template(dialogs[0], layout)
print("s1->s2 length:", len(s1s2.ids), "(no text bridge)")

samples = [build_sdm_template(d, layout, tok) for d in dialogs]
bins = pack_ffd(samples, capacity=512)
fill = sum(len(b.ids) for b in bins) / (len(bins) * 512)
print(f"packed {len(samples)} docs into {len(bins)} bins, fill rate {fill:.2f}")

checksum = write_corpus(bins, layout, "/tmp/demo_corpus.usdm")
print(f"wrote corpus, checksum {checksum:016x}")
loaded = read_corpus("/tmp/demo_corpus.usdm", layout=layout)
print("read back:", len(loaded.bins), "bins,",
      sum(len(b.doc_offsets) for b in loaded.bins), "docs")
