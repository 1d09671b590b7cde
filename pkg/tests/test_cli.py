import io
import json
from argparse import Namespace

import pytest

from pathkg.cli import Context, build_parser, cmd_chat, main
from pathkg.config import load_config
from conftest import DEMO, GOLDEN

CFG = str(DEMO / "config.yaml")


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_evaluate_matches_golden_table(tmp_path, capsys):
    code, out, _ = _run(capsys, "-c", CFG, "--split", "test", "--out", str(tmp_path),
                        "evaluate", "--predictions", str(DEMO / "predictions.jsonl"))
    assert code == 0
    golden = (GOLDEN / "eval_demo_test.txt").read_text(encoding="utf-8")
    assert out == golden
    assert (tmp_path / "eval.txt").read_text(encoding="utf-8") == golden
    report = json.loads((tmp_path / "eval.json").read_text(encoding="utf-8"))
    assert report["sample_count"] == 10 and report["meta"]["seed"] == 13
    manifest = json.loads((tmp_path / "manifest.evaluate.json").read_text(encoding="utf-8"))
    assert manifest["inputs"]["predictions"]["file"] == "predictions.jsonl"
    assert manifest["seed"] == 13


def test_generate_twice_is_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert _run(capsys, "-c", CFG, "--out", str(tmp_path / name), "generate")[0] == 0
    a = (tmp_path / "a" / "predictions.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "predictions.jsonl").read_bytes()
    assert len(a.splitlines()) == 15


def test_missing_kg_is_config_error(tmp_path, capsys):
    code, _, err = _run(capsys, "-c", CFG, "--kg", str(tmp_path / "nope.tsv"), "--out", str(tmp_path), "mine")
    assert code == 3
    assert json.loads(err.strip().splitlines()[-1])["error"] == "ConfigError"


def test_missing_config_and_bad_data(tmp_path, capsys):
    assert _run(capsys, "-c", str(tmp_path / "none.yaml"), "mine")[0] == 3
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{oops\n", encoding="utf-8")
    assert _run(capsys, "-c", CFG, "--corpus", str(bad), "--out", str(tmp_path), "encode")[0] == 4


def test_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 1\nbogus: 2\n", encoding="utf-8")
    assert _run(capsys, "-c", str(p), "kg", "stats")[0] == 3


def test_kg_stats(capsys):
    code, out, _ = _run(capsys, "-c", CFG, "kg", "stats")
    stats = json.loads(out)
    assert code == 0 and stats["triplets"] == 40
    assert sum(stats["relations"].values()) == 40


def test_prompt_command(capsys):
    code, out, _ = _run(capsys, "-c", CFG, "prompt", "--dialogue", "test-001", "--turn", "1")
    assert code == 0
    assert "### 医学知识" in out and out.rstrip().endswith("我最近饭后胃痛，还有点反酸。")
    assert _run(capsys, "-c", CFG, "prompt", "--dialogue", "test-001", "--turn", "2")[0] == 4
    assert _run(capsys, "-c", CFG, "prompt", "--dialogue", "nope", "--turn", "1")[0] == 4


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["prompt"])
    assert ei.value.code == 2


def test_options_before_and_after_subcommand(tmp_path):
    parser = build_parser()
    a = parser.parse_args(["--seed", "5", "mine"])
    b = parser.parse_args(["mine", "--seed", "5"])
    assert a.seed == b.seed == 5


def test_help_lists_every_flag(capsys):
    with pytest.raises(SystemExit):
        main(["mine", "--help"])
    out = capsys.readouterr().out
    for flag in ("--config", "--kg", "--lexicon", "--corpus", "--out", "--seed", "--profile", "--split", "--workers"):
        assert flag in out


def test_chat_repl():
    ctx = Context(load_config(CFG))
    stdin = io.StringIO("医生，我胃痛还反酸\n\n还有点恶心\n/quit\nnever read\n")
    stdout = io.StringIO()
    cmd_chat(ctx, Namespace(), stdin=stdin, stdout=stdout)
    text = stdout.getvalue()
    assert text.count("doctor> ") == 2
    assert "[entities] 胃痛、反酸" in text
    assert "[potential via 胃溃疡]" in text


def test_kamed_profile_filters_placeholder(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    rows = [
        {"id": "keep", "turns": [{"role": "patient", "text": "胃痛"}, {"role": "doctor", "text": "多久了"}]},
        {"id": "drop", "turns": [{"role": "patient", "text": "The image/voice is not available for privacy concern"},
                                 {"role": "doctor", "text": "好"}]},
    ]
    corpus.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    code, _, _ = _run(capsys, "-c", CFG, "--profile", "kamed", "--corpus", str(corpus), "--out", str(tmp_path), "encode")
    assert code == 0
    ids = [json.loads(line)["dialogue_id"] for line in (tmp_path / "encoded.jsonl").read_text().splitlines()]
    assert ids == ["keep"]
