import pytest

from unitweave import SynthConfig, WordTokenizer, build_layout, generate


@pytest.fixture(scope="session")
def small_layout():
    return build_layout(text_size=32, unit_count=64)


@pytest.fixture(scope="session")
def small_corpus():
    cfg = SynthConfig(n_samples=40, lexicon_size=12, words_per_utterance=(2, 7),
                      word_duration_range=(0.1, 0.5), feature_dim=4,
                      unit_codebook_size=64, noise_scale=0.05, seed=11)
    return generate(cfg)


@pytest.fixture(scope="session")
def small_tok(small_corpus, small_layout):
    return WordTokenizer.from_words(small_corpus.lexicon, small_layout)
