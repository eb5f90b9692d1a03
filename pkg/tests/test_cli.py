import json

import numpy as np
import pytest

from unitweave.cli import main


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Full pipeline artifacts shared across CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    out = root / "synth"
    code = run(["synth", "--out", str(out), "--n-samples", "30", "--seed", "9",
                "--lexicon-size", "12", "--words-min", "2", "--words-max", "6",
                "--prosody-classes", "2", "--prosody-offset", "3.0", "--dialogs"])
    assert code == 0
    return root


def test_synth_outputs_exist(workdir):
    out = workdir / "synth"
    for name in ("units.jsonl", "words.jsonl", "labels.jsonl", "pairs.jsonl",
                 "vocab.layout", "lexicon.json", "codebook.usdc", "dialogs.jsonl"):
        assert (out / name).exists(), name


def test_quantize_reproduces_units(workdir):
    out = workdir / "synth"
    dest = workdir / "requant.jsonl"
    assert run(["quantize", "--features", str(out / "features"),
                "--codebook", str(out / "codebook.usdc"), "--out", str(dest)]) == 0
    original = {json.loads(l)["id"]: json.loads(l)["units"]
                for l in (out / "units.jsonl").read_text().splitlines()}
    requant = {json.loads(l)["id"]: json.loads(l)["units"]
               for l in dest.read_text().splitlines()}
    assert requant == original


def test_align_from_words_jsonl(workdir):
    out = workdir / "synth"
    dest = workdir / "aligned.jsonl"
    assert run(["align", "--units", str(out / "units.jsonl"),
                "--words", str(out / "words.jsonl"), "--out", str(dest)]) == 0
    first = json.loads(dest.read_text().splitlines()[0])
    assert first["spans"][0][0] == 0


def test_interleave_deterministic_and_parallel(workdir):
    out = workdir / "synth"
    seqs = []
    for name in ("a.jsonl", "b.jsonl"):
        dest = workdir / name
        assert run(["interleave", "--vocab", str(out / "vocab.layout"),
                    "--pairs", str(out / "pairs.jsonl"),
                    "--lexicon", str(out / "lexicon.json"),
                    "--seed", "7", "--out", str(dest)]) == 0
        seqs.append(dest.read_bytes())
    assert seqs[0] == seqs[1]
    dest = workdir / "c.jsonl"
    assert run(["interleave", "--vocab", str(out / "vocab.layout"),
                "--pairs", str(out / "pairs.jsonl"),
                "--lexicon", str(out / "lexicon.json"),
                "--seed", "7", "--workers", "2", "--out", str(dest)]) == 0
    assert dest.read_bytes() == seqs[0]
    changed = workdir / "d.jsonl"
    assert run(["interleave", "--vocab", str(out / "vocab.layout"),
                "--pairs", str(out / "pairs.jsonl"),
                "--lexicon", str(out / "lexicon.json"),
                "--seed", "8", "--out", str(changed)]) == 0
    assert changed.read_bytes() != seqs[0]


def test_interleave_setup_flag(workdir):
    out = workdir / "synth"
    dest = workdir / "setup2.jsonl"
    assert run(["interleave", "--vocab", str(out / "vocab.layout"),
                "--pairs", str(out / "pairs.jsonl"),
                "--lexicon", str(out / "lexicon.json"),
                "--seed", "7", "--setup", "2", "--out", str(dest)]) == 0
    layout_text = (out / "vocab.layout").read_text()
    text_size = int([l for l in layout_text.splitlines() if l.startswith("text_size")][0]
                    .split("=")[1])
    for line in dest.read_text().splitlines():
        rec = json.loads(line)
        specials = [t for t in rec["ids"] if t in (text_size, text_size + 1)]
        assert specials == [text_size]  # exactly one correspond


def test_template_pack_stats_scorer_eval(workdir):
    out = workdir / "synth"
    tpl = workdir / "templates.jsonl"
    assert run(["template", "--vocab", str(out / "vocab.layout"),
                "--dialogs", str(out / "dialogs.jsonl"),
                "--lexicon", str(out / "lexicon.json"),
                "--template", "sdm", "--out", str(tpl)]) == 0
    corpus = workdir / "corpus.usdm"
    assert run(["pack", "--vocab", str(out / "vocab.layout"), "--in", str(tpl),
                "--capacity", "2048", "--out", str(corpus)]) == 0

    dump = workdir / "dump.jsonl"
    import io
    from contextlib import redirect_stdout
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert run(["stats", "--in", str(corpus), "--vocab", str(out / "vocab.layout"),
                    "--dump", str(dump)]) == 0
    info = json.loads(buf.getvalue())
    assert info["capacity"] == 2048
    total_ids = sum(len(json.loads(l)["ids"]) for l in dump.read_text().splitlines())
    assert total_ids == info["n_tokens"]

    scorer = workdir / "scorer.pkl"
    assert run(["train-scorer", "--vocab", str(out / "vocab.layout"),
                "--in", str(corpus), "--order", "2", "--add-k", "0.5",
                "--out", str(scorer)]) == 0

    report = workdir / "report.txt"
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert run(["eval-ppl", "--vocab", str(out / "vocab.layout"),
                    "--scorer", str(scorer), "--pairs", str(out / "pairs.jsonl"),
                    "--lexicon", str(out / "lexicon.json"),
                    "--kinds", "all", "--out", str(report),
                    "--csv", str(workdir / "report.csv")]) == 0
    lines = report.read_text().splitlines()
    assert len([l for l in lines if l.startswith("kind=")]) == 6
    assert len([l for l in lines if l.startswith("aggregate=")]) == 2


def test_pack_default_capacity_is_8192(workdir, tmp_path):
    out = workdir / "synth"
    tpl = workdir / "templates.jsonl"
    corpus = tmp_path / "default.usdm"
    assert run(["pack", "--vocab", str(out / "vocab.layout"), "--in", str(tpl),
                "--out", str(corpus)]) == 0
    import io
    from contextlib import redirect_stdout
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert run(["stats", "--in", str(corpus)]) == 0
    assert json.loads(buf.getvalue())["capacity"] == 8192


def test_wer_cli(workdir, tmp_path):
    ref = tmp_path / "ref.txt"
    hyp = tmp_path / "hyp.txt"
    ref.write_text("the cat sat\nhello world\n")
    hyp.write_text("the bat\nhello world\n")
    import io
    from contextlib import redirect_stdout
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert run(["wer", "--ref", str(ref), "--hyp", str(hyp)]) == 0
    rec = json.loads(buf.getvalue())
    assert rec["per_line"][0] == pytest.approx(2 / 3)
    assert rec["per_line"][1] == 0.0
    assert rec["corpus_wer"] == pytest.approx(2 / 5)


def test_probe_cli(workdir):
    out = workdir / "synth"
    assert run(["probe", "--train-units", str(out / "units.jsonl"),
                "--train-labels", str(out / "labels.jsonl"),
                "--test-units", str(out / "units.jsonl"),
                "--test-labels", str(out / "labels.jsonl")]) == 0


def test_attn_profile_cli(tmp_path):
    attn = np.full((1, 2, 3, 4), 0.25)
    np.savez(tmp_path / "attn.npz", attn=attn)
    (tmp_path / "tags.json").write_text('["unit","unit","text","text"]')
    dest = tmp_path / "profile.csv"
    assert run(["attn-profile", "--attn", str(tmp_path / "attn.npz"),
                "--tags", str(tmp_path / "tags.json"), "--out", str(dest)]) == 0
    lines = dest.read_text().splitlines()
    assert lines[0] == "layer,target,p_speech,p_text,p_other"
    assert lines[1].startswith("0,0,0.5")


def test_exit_codes(workdir, tmp_path):
    out = workdir / "synth"
    # config error: bad insert probability
    assert run(["interleave", "--vocab", str(out / "vocab.layout"),
                "--pairs", str(out / "pairs.jsonl"),
                "--lexicon", str(out / "lexicon.json"),
                "--insert-prob", "1.5", "--out", str(tmp_path / "x.jsonl")]) == 2
    # checksum error: corrupted corpus
    corpus = workdir / "corpus.usdm"
    bad = tmp_path / "bad.usdm"
    raw = bytearray(corpus.read_bytes())
    raw[40] ^= 0x55
    bad.write_bytes(bytes(raw))
    assert run(["stats", "--in", str(bad)]) == 4
    # data error: missing units file
    assert run(["align", "--units", str(tmp_path / "missing.jsonl"),
                "--words", str(out / "words.jsonl"),
                "--out", str(tmp_path / "y.jsonl")]) == 3


def test_config_file_with_flag_override(workdir, tmp_path):
    out = workdir / "synth"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"seed": 3, "insert_prob": 0.25}))
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    assert run(["interleave", "--config", str(cfg_path),
                "--vocab", str(out / "vocab.layout"),
                "--pairs", str(out / "pairs.jsonl"),
                "--lexicon", str(out / "lexicon.json"), "--out", str(a)]) == 0
    # flag overrides the config seed
    assert run(["interleave", "--config", str(cfg_path), "--seed", "3",
                "--vocab", str(out / "vocab.layout"),
                "--pairs", str(out / "pairs.jsonl"),
                "--lexicon", str(out / "lexicon.json"), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
