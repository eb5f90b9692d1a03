import numpy as np
import pytest

from unitweave.alignment import (AlignedPair, WordAlignment, build_pairs,
                                 load_pairs_jsonl, load_units_jsonl,
                                 load_words_jsonl, parse_textgrid, to_unit_spans,
                                 validate_pair, write_pairs_jsonl)
from unitweave.errors import AlignmentError, DataError, ParseError

LONG_TG = """File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 0.5
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 0.5
        intervals: size = 2
        intervals [1]:
            xmin = 0
            xmax = 0.12
            text = ""
        intervals [2]:
            xmin = 0.12
            xmax = 0.5
            text = "hi"
"""

SHORT_TG = """File type = "ooTextFile"
Object class = "TextGrid"

0
1.0
<exists>
1
"IntervalTier"
"words"
0
1.0
3
0
0.2
"sil"
0.2
0.6
"hello"
0.6
1.0
"world"
"""


def w(word, start, end):
    return WordAlignment(word, start, end)


def test_parse_long_drops_silence():
    words = parse_textgrid(LONG_TG)
    assert words == [w("hi", 0.12, 0.5)]


def test_parse_accepts_bytes():
    words = parse_textgrid(LONG_TG.encode("utf-8"))
    assert words == [w("hi", 0.12, 0.5)]


def test_parse_short_format():
    words = parse_textgrid(SHORT_TG)
    assert words == [w("hello", 0.2, 0.6), w("world", 0.6, 1.0)]


def test_parse_empty_words_tier_is_valid():
    tg = LONG_TG.replace('text = "hi"', 'text = "sp"')
    assert parse_textgrid(tg) == []


def test_parse_out_of_order_raises():
    # make the first interval a real word and start the second before it ends
    tg = LONG_TG.replace('text = ""', 'text = "oops"')
    tg = tg.replace("xmin = 0.12\n            xmax = 0.5",
                    "xmin = 0.05\n            xmax = 0.5")
    with pytest.raises(ParseError):
        parse_textgrid(tg)


def test_parse_missing_tier_raises():
    with pytest.raises(ParseError):
        parse_textgrid(LONG_TG.replace('"words"', '"phones"'))


def test_parse_rejects_non_textgrid():
    with pytest.raises(ParseError):
        parse_textgrid("hello\nworld\n")


def test_spans_single_word_absorbs_edges():
    spans = to_unit_spans([w("hi", 0.48, 0.90)], 45)
    assert spans == [(0, 45)]


def test_spans_clean_boundary():
    spans = to_unit_spans([w("a", 0.0, 0.5), w("b", 0.5, 1.0)], 50)
    assert spans == [(0, 25), (25, 50)]


def test_spans_gap_attaches_to_preceding():
    # derived by hand: b_1 = round(0.9 * 50) = 45
    spans = to_unit_spans([w("a", 0.0, 0.2), w("b", 0.9, 1.0)], 50)
    assert spans == [(0, 45), (45, 50)]


def test_spans_too_few_frames():
    with pytest.raises(AlignmentError):
        to_unit_spans([w("a", 0.0, 0.1), w("b", 0.1, 0.2), w("c", 0.2, 0.3)], 2)


def test_spans_crowded_words_clamped():
    words = [w(f"w{i}", i * 0.01, (i + 1) * 0.01) for i in range(5)]
    spans = to_unit_spans(words, 5)
    assert spans == [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]


def test_spans_partition_property_fuzz():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n_words = int(rng.integers(1, 12))
        starts = np.sort(rng.uniform(0, 8, size=n_words))
        words = []
        for i, s in enumerate(starts):
            end = starts[i + 1] if i + 1 < n_words else s + float(rng.uniform(0.05, 0.5))
            if end <= s:
                end = s + 0.02
            words.append(w(f"w{i}", float(s), float(end)))
        n_units = max(n_words, int(words[-1].end_sec * 50) + int(rng.integers(0, 10)))
        spans = to_unit_spans(words, n_units)
        assert spans == to_unit_spans(words, n_units)  # deterministic
        assert spans[0][0] == 0 and spans[-1][1] == n_units
        for (lo, hi), (lo2, _) in zip(spans, spans[1:]):
            assert lo < hi and hi == lo2
        assert all(lo < hi for lo, hi in spans)


def test_validate_pair_pass():
    pair = AlignedPair(id="x", units=list(range(10)),
                       words=[w("a", 0.0, 0.1), w("b", 0.1, 0.2)])
    report = validate_pair(pair)
    assert report.ok and report.violations == []


def test_validate_pair_overlap_and_empty():
    pair = AlignedPair(id="x", units=list(range(10)),
                       words=[w("a", 0.0, 0.1), w("b", 0.1, 0.2)],
                       unit_spans=[(0, 6), (4, 10)], duration_sec=0.2)
    assert "span_overlap" in validate_pair(pair).violations
    pair2 = AlignedPair(id="x", units=list(range(10)),
                        words=[w("a", 0.0, 0.1), w("b", 0.1, 0.2)],
                        unit_spans=[(0, 10), (10, 10)], duration_sec=0.2)
    assert "empty_span" in validate_pair(pair2).violations


def test_validate_duration_mismatch():
    pair = AlignedPair(id="x", units=list(range(10)), words=[w("a", 0.0, 0.2)],
                       unit_spans=[(0, 10)], duration_sec=5.0)
    assert "duration_mismatch" in validate_pair(pair).violations


def test_jsonl_roundtrip(tmp_path):
    units_path = tmp_path / "units.jsonl"
    words_path = tmp_path / "words.jsonl"
    units_path.write_text('{"id":"u1","units":[1,2,3,4,5]}\n')
    words_path.write_text('{"id":"u1","words":[{"w":"hi","start":0.0,"end":0.1}]}\n')
    pairs = build_pairs(load_units_jsonl(units_path), load_words_jsonl(words_path))
    assert len(pairs) == 1 and pairs[0].unit_spans == [(0, 5)]
    out = tmp_path / "pairs.jsonl"
    write_pairs_jsonl(out, pairs)
    again = load_pairs_jsonl(out)
    assert again[0].units == pairs[0].units
    assert again[0].unit_spans == pairs[0].unit_spans


def test_build_pairs_missing_words(tmp_path):
    with pytest.raises(DataError):
        build_pairs({"u1": [1, 2]}, {})
