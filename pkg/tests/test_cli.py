import json
import re

import pytest

from spannca.cli import build_parser, main
from spannca.config import ConfigError, load_run_config, parse_override

FAST = [
    "--set", "encoder.char_dim=4", "--set", "encoder.char_filters=4", "--set", "encoder.lstm_hidden=6",
    "--set", "encoder.span_dim=6", "--set", "train.epochs=2", "--set", "train.k=5",
]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["gen-synthetic", "--out", str(d), "--train", "16", "--dev", "6", "--test", "5", "--dim", "8"]) == 0
    return d


@pytest.fixture(scope="module")
def trained(data_dir):
    run = data_dir / "run_instance"
    code = main(["train", "-c", str(data_dir / "config.ini"), "--out", str(run), "--no-plot", *FAST])
    assert code == 0
    return run


def cfg_args(data_dir, run):
    return ["-c", str(data_dir / "config.ini"), "--out", str(run), *FAST]


def test_help_lists_every_flag(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {"train", "predict", "eval", "explain", "ablate", "compare", "dump-features", "gen-synthetic"}
    for name, p in sub.choices.items():
        with pytest.raises(SystemExit) as exc:
            main([name, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for action in p._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)
            if action.option_strings and action.dest != "help":
                assert action.help, (name, action.dest)


def test_usage_errors_exit_1(capsys, tmp_path):
    assert main([]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus"])
    assert exc.value.code == 1
    assert main(["train", "-c", str(tmp_path / "missing.ini")]) == 1
    assert main(["eval", "--gold", "x"]) == 1
    capsys.readouterr()


def test_missing_embeddings_names_the_field(data_dir, tmp_path, capsys):
    text = (data_dir / "config.ini").read_text().replace("embeddings = embeddings.txt", "embeddings = nowhere.txt")
    cfg = tmp_path / "c.ini"
    cfg.write_text(text)
    for name in ("train", "dev", "test"):
        (tmp_path / f"{name}.bio").write_text((data_dir / f"{name}.bio").read_text())
    assert main(["train", "-c", str(cfg), "--out", str(tmp_path / "r")]) == 1
    assert "data.embeddings" in capsys.readouterr().err


def test_bad_values_exit_1(data_dir, capsys):
    base = ["train", "-c", str(data_dir / "config.ini")]
    assert main([*base, "--set", "encoder.lstm_hidden=abc"]) == 1
    assert main([*base, "--set", "train.nope=1"]) == 1
    assert main([*base, "--set", "noequals"]) == 1
    err = capsys.readouterr().err
    assert "encoder.lstm_hidden" in err and "train.nope" in err


def test_gen_synthetic_outputs(data_dir):
    names = {p.name for p in data_dir.iterdir()}
    assert {"train.bio", "dev.bio", "test.bio", "embeddings.txt", "config.ini"} <= names
    cfg = load_run_config(data_dir / "config.ini")
    assert cfg.task == "flat-ner" and cfg.encoder.word_dim == 8
    assert main(["gen-synthetic", "--out", str(data_dir / "x"), "--train", "0"]) == 1


def test_train_outputs_and_resolved_config(trained, data_dir):
    for name in ("model.ckpt", "report.jsonl", "summary.json", "resolved_config.ini"):
        assert (trained / name).is_file(), name
    assert len((trained / "report.jsonl").read_text().splitlines()) == 2
    echoed = load_run_config(trained / "resolved_config.ini")
    assert echoed.encoder.lstm_hidden == 6 and echoed.train.epochs == 2
    assert echoed.path("train") == (data_dir / "train.bio").resolve()


def test_seed_flag_changes_run_deterministically(data_dir, tmp_path):
    reports = {}
    for tag, seed in (("a", 3), ("b", 3), ("c", 4)):
        run = tmp_path / tag
        args = ["train", *cfg_args(data_dir, run), "--seed", str(seed), "--no-plot",
                "--set", "train.head=classifier"]
        assert main(args) == 0
        reports[tag] = (run / "report.jsonl").read_bytes()
    assert reports["a"] == reports["b"] != reports["c"]


def test_eval_gold_against_itself(data_dir, capsys):
    gold = str(data_dir / "test.bio")
    assert main(["eval", "--gold", gold, "--pred", gold]) == 0
    assert "F1=100.00" in capsys.readouterr().out


def test_predict_and_eval_with_model(trained, data_dir, capsys, tmp_path):
    out = tmp_path / "pred.jsonl"
    spans = tmp_path / "spans.jsonl"
    assert main(["predict", *cfg_args(data_dir, trained), "--output", str(out), "--span-output", str(spans), "--full"]) == 0
    assert len(out.read_text().splitlines()) == 5
    first = json.loads(spans.read_text().splitlines()[0])
    assert {"sentence", "a", "b", "label", "prob", "distribution"} <= set(first)
    metrics = tmp_path / "m.json"
    assert main(["eval", *cfg_args(data_dir, trained), "--output", str(metrics)]) == 0
    scored = capsys.readouterr().out
    assert re.search(r"P=\d+\.\d\d R=\d+\.\d\d F1=\d+\.\d\d", scored)
    assert set(json.loads(metrics.read_text())) == {"tp", "fp", "fn", "precision", "recall", "f1"}
    # the predictions file is itself a corpus and scores the same as in-process evaluation
    again = tmp_path / "m2.json"
    assert main(["eval", "--gold", str(data_dir / "test.bio"), "--pred", str(out), "--output", str(again)]) == 0
    assert again.read_text() == metrics.read_text()


def test_checkpoint_digest_mismatch_exits_2(trained, data_dir, capsys):
    assert main(["eval", *cfg_args(data_dir, trained), "--set", "encoder.span_dim=7"]) == 2
    assert "DigestMismatch" in capsys.readouterr().err


def test_explain_prints_five_neighbors(trained, data_dir, capsys, tmp_path):
    out = tmp_path / "e.json"
    assert main(["explain", *cfg_args(data_dir, trained), "--sentence", "0", "--span", "1,1", "--output", str(out)]) == 0
    text = capsys.readouterr().out
    rows = [line for line in text.splitlines() if re.match(r"^[1-5]\s", line)]
    assert len(rows) == 5
    assert len(json.loads(out.read_text())["neighbors"]) == 5
    assert main(["explain", *cfg_args(data_dir, trained), "--sentence", "0", "--span", "1,99"]) == 2
    assert main(["explain", *cfg_args(data_dir, trained), "--sentence", "99", "--span", "1,1"]) == 1
    assert main(["explain", *cfg_args(data_dir, trained), "--sentence", "0", "--span", "x"]) == 1


def test_dump_features(trained, data_dir, tmp_path, capsys):
    out = tmp_path / "f.jsonl"
    assert main(["dump-features", *cfg_args(data_dir, trained), "--split", "dev", "--output", str(out)]) == 0
    recs = [json.loads(x) for x in out.read_text().splitlines()]
    assert recs and all(len(r["vector"]) == 6 and r["split"] == "dev" for r in recs)


def test_ablate_writes_eight_rows(data_dir, tmp_path, capsys):
    run = tmp_path / "abl"
    assert main(["ablate", *cfg_args(data_dir, run), "--set", "train.epochs=1"]) == 2
    assert "batch_size" in capsys.readouterr().err
    assert main(["ablate", *cfg_args(data_dir, run), "--set", "train.epochs=1", "--set", "train.batch_size=1"]) == 0
    rows = [json.loads(x) for x in (run / "ablation.jsonl").read_text().splitlines()]
    assert len(rows) == 8
    assert [r["train_sentences"] for r in rows[:4]] == [16, 8, 4, 2]
    assert (run / "ablation.tsv").read_text().count("\n") == 9
    assert (run / "ablation.png").stat().st_size > 0
    assert main(["ablate", *cfg_args(data_dir, run), "--fractions", "1,2"]) == 1
    assert main(["ablate", *cfg_args(data_dir, run), "--heads", "svm"]) == 1


def test_compare(data_dir, tmp_path, capsys):
    run = tmp_path / "cmp"
    assert main(["compare", *cfg_args(data_dir, run), "--runs", "1", "--heads", "classifier", "--no-plot",
                 "--set", "train.epochs=1", "--dataset", "synth"]) == 0
    rows = [json.loads(x) for x in (run / "compare.jsonl").read_text().splitlines()]
    assert [(r["dataset"], r["head"], r["runs"]) for r in rows] == [("synth", "classifier", 1)]


def test_parse_override():
    assert parse_override("train.k=7") == ("train", "k", "7")
    with pytest.raises(ConfigError):
        parse_override("k=7")
