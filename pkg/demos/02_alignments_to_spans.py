"""Word time intervals -> 50 Hz unit-index spans.

Leading silence attaches to the first word, inter-word gaps to the
preceding word, so the spans always partition the frame axis.
"""
from unitweave import WordAlignment, parse_textgrid, to_unit_spans

TEXTGRID = """File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 1.0
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 1.0
        intervals: size = 3
        intervals [1]:
            xmin = 0
            xmax = 0.12
            text = ""
        intervals [2]:
            xmin = 0.12
            xmax = 0.55
            text = "hello"
        intervals [3]:
            xmin = 0.6
            xmax = 1.0
            text = "world"
"""

words = parse_textgrid(TEXTGRID)
print("parsed words:", [(w.word, w.start_sec, w.end_sec) for w in words])

spans = to_unit_spans(words, n_units=50)
print("spans over 50 frames:", spans)  # leading 6 frames fold into "hello"

# a gap between words goes to the earlier word
gappy = [WordAlignment("a", 0.0, 0.2), WordAlignment("b", 0.9, 1.0)]
print("gap example:", to_unit_spans(gappy, 50))  # [(0, 45), (45, 50)]
