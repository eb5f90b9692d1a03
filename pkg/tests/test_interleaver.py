import copy

import numpy as np
import pytest

from unitweave import SynthConfig, generate
from unitweave.alignment import AlignedPair, WordAlignment
from unitweave.errors import DataError
from unitweave.interleaver import (ROLE_MAIN, ROLE_SUB, SegmentChoice,
                                   draw_choices, plan_segments, render,
                                   verify_roundtrip)
from unitweave.rng import sample_rng
from unitweave.vocab import TAG_SPECIAL, TEXT, UNIT, build_layout
from unitweave.templates import WordTokenizer


class FakeRng:
    """Scripted .random() draws, for forcing choices."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def make_pair(word_frames, sid="p0", duration_sec=None):
    """Pair with the given per-word frame counts; units are 0,1,2,..."""
    words, spans = [], []
    cum = 0
    for i, n in enumerate(word_frames):
        words.append(WordAlignment(f"w{i:03d}", cum / 50, (cum + n) / 50))
        spans.append((cum, cum + n))
        cum += n
    return AlignedPair(id=sid, units=[u % 64 for u in range(cum)], words=words,
                       unit_spans=spans, duration_sec=duration_sec or cum / 50)


@pytest.fixture(scope="module")
def layout():
    return build_layout(text_size=1024, unit_count=64)


@pytest.fixture(scope="module")
def tok(layout):
    return WordTokenizer.from_words([f"w{i:03d}" for i in range(200)], layout)


def test_segment_count_formula(layout):
    for dur_s, expect_n in ((0.5, 1), (9.99, 1), (10.0, 2), (25.3, 3)):
        frames = int(dur_s * 50)
        # 12 words sharing the frames
        per = [frames // 12] * 12
        per[-1] += frames - sum(per)
        pair = make_pair(per, duration_sec=dur_s)
        assert plan_segments(pair).n_segments == expect_n


def test_segment_count_capped_by_words():
    pair = make_pair([500])  # 10 s, one word
    assert plan_segments(pair).n_segments == 1


def test_segment_boundaries_near_equal_duration():
    # 4 words x 4 s = 16 s -> N = 2, midpoint 8 s falls at word 2's end
    pair = make_pair([200, 200, 200, 200])
    plan = plan_segments(pair)
    assert plan.n_segments == 2
    assert plan.boundaries == (2,)
    assert plan.ranges(4) == [(0, 2), (2, 4)]


def test_segment_all_words_covered_fuzz():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n_words = int(rng.integers(1, 20))
        frames = [int(rng.integers(1, 120)) for _ in range(n_words)]
        plan = plan_segments(make_pair(frames))
        ranges = plan.ranges(n_words)
        assert ranges[0][0] == 0 and ranges[-1][1] == n_words
        assert all(lo < hi for lo, hi in ranges)
        assert all(a[1] == b[0] for a, b in zip(ranges, ranges[1:]))


def test_draw_choices_forced():
    plan = plan_segments(make_pair([10]))
    choices = draw_choices(plan, FakeRng([0.2, 0.3]))
    assert choices == [SegmentChoice(main=UNIT, insert_sub=True)]
    choices = draw_choices(plan, FakeRng([0.9, 0.7]))
    assert choices == [SegmentChoice(main=TEXT, insert_sub=False)]


def test_draw_choices_consumes_two_per_segment():
    pair = make_pair([300, 300, 300, 300])  # 24 s -> N=3
    plan = plan_segments(pair)
    fake = FakeRng([0.1] * (2 * plan.n_segments))
    draw_choices(plan, fake)
    assert fake.values == []


def test_draw_choices_insert_and_main_rates():
    plan = plan_segments(make_pair([100] * 8))
    rng = sample_rng(123, "rate-check")
    n, inserts, unit_main = 0, 0, 0
    while n < 10000:
        for c in draw_choices(plan, rng):
            inserts += c.insert_sub
            unit_main += c.main == UNIT
            n += 1
    assert 0.48 <= inserts / n <= 0.52
    three_sigma = 3 * (0.25 / n) ** 0.5
    assert abs(unit_main / n - 0.5) <= three_sigma


def test_draw_choices_seed_determinism():
    plan = plan_segments(make_pair([100] * 6))
    a = draw_choices(plan, sample_rng(5, "x"))
    b = draw_choices(plan, sample_rng(5, "x"))
    assert a == b


def test_render_single_segment_with_sub(layout, tok):
    pair = make_pair([3])
    plan = plan_segments(pair)
    seq = render(pair, plan, [SegmentChoice(UNIT, True)], layout, tok)
    u = [layout.unit_base + 0, layout.unit_base + 1, layout.unit_base + 2]
    t = tok.encode_words(["w000"])
    assert seq.ids == u + [layout.correspond_id] + t
    assert seq.provenance == [(0, ROLE_MAIN)] * 3 + [(0, ROLE_SUB)] * 2


def test_render_three_segment_example(layout, tok):
    # T1 <cont> U2 <corr> T2 T3 and nothing between T2 and T3
    pair = make_pair([2, 2, 2])
    plan = plan_segments(pair)
    choices = [SegmentChoice(TEXT, False), SegmentChoice(UNIT, True),
               SegmentChoice(TEXT, False)]
    # force a 3-segment plan for a short pair: use explicit boundaries
    from unitweave.interleaver import SegmentationPlan
    plan = SegmentationPlan(n_segments=3, boundaries=(1, 2))
    seq = render(pair, plan, choices, layout, tok)
    t1 = tok.encode_words(["w000"])
    u2 = [layout.unit_base + u for u in pair.units[2:4]]
    t2 = tok.encode_words(["w001"])
    t3 = tok.encode_words(["w002"])
    assert seq.ids == (t1 + [layout.continue_id] + u2 + [layout.correspond_id]
                       + t2 + t3)


def test_render_same_modality_junction_has_no_special(layout, tok):
    pair = make_pair([2, 2])
    from unitweave.interleaver import SegmentationPlan
    plan = SegmentationPlan(n_segments=2, boundaries=(1,))
    seq = render(pair, plan, [SegmentChoice(UNIT, False), SegmentChoice(UNIT, False)],
                 layout, tok)
    assert seq.ids == [layout.unit_base + u for u in pair.units]
    assert TAG_SPECIAL not in seq.tags


def test_roundtrip_accepts_render_output(layout, tok):
    pair = make_pair([4, 3, 6])
    from unitweave.interleaver import SegmentationPlan
    plan = SegmentationPlan(n_segments=3, boundaries=(1, 2))
    choices = [SegmentChoice(UNIT, True), SegmentChoice(TEXT, True),
               SegmentChoice(TEXT, False)]
    seq = render(pair, plan, choices, layout, tok)
    assert verify_roundtrip(seq, pair, plan, choices, layout, tok)


def test_roundtrip_rejects_mutations(layout, tok):
    pair = make_pair([4, 3])
    from unitweave.interleaver import SegmentationPlan
    plan = SegmentationPlan(n_segments=2, boundaries=(1,))
    choices = [SegmentChoice(UNIT, True), SegmentChoice(TEXT, False)]
    seq = render(pair, plan, choices, layout, tok)
    assert verify_roundtrip(seq, pair, plan, choices, layout, tok)

    # delete one unit token
    broken = copy.deepcopy(seq)
    del broken.ids[1], broken.tags[1], broken.provenance[1]
    assert not verify_roundtrip(broken, pair, plan, choices, layout, tok)

    # move the correspond token to a same-modality junction
    moved = copy.deepcopy(seq)
    i = moved.ids.index(layout.correspond_id)
    for lst in (moved.ids, moved.tags, moved.provenance):
        item = lst.pop(i)
        lst.insert(i + 1, item)
    assert not verify_roundtrip(moved, pair, plan, choices, layout, tok)

    # flip a special token type
    flipped = copy.deepcopy(seq)
    flipped.ids[flipped.ids.index(layout.correspond_id)] = layout.continue_id
    assert not verify_roundtrip(flipped, pair, plan, choices, layout, tok)


def test_render_deterministic_from_seed(layout, tok):
    cfg = SynthConfig(n_samples=6, lexicon_size=10, words_per_utterance=(2, 6),
                      word_duration_range=(0.1, 0.4), unit_codebook_size=64,
                      noise_scale=0.02, seed=2)
    corpus = generate(cfg)
    for s in corpus.samples:
        outs = []
        for _ in range(2):
            rng = sample_rng(99, s.id)
            plan = plan_segments(s.pair)
            choices = draw_choices(plan, rng)
            outs.append(render(s.pair, plan, choices, layout, tok).ids)
        assert outs[0] == outs[1]


def test_render_rejects_wrong_choice_count(layout, tok):
    pair = make_pair([4, 3])
    plan = plan_segments(pair)
    with pytest.raises(DataError):
        render(pair, plan, [SegmentChoice(UNIT, False)] * (plan.n_segments + 1),
               layout, tok)


def test_plan_empty_words_raises():
    pair = AlignedPair(id="e", units=[1, 2], words=[], unit_spans=[], duration_sec=0.04)
    with pytest.raises(DataError):
        plan_segments(pair)
