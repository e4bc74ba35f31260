"""Command-line plumbing: exit codes, outputs, sidecar configs."""

import csv
import json
import os

import numpy as np
import pytest

from voxtrait.cli import main
from voxtrait.features import (
    FEATURE_NAMES,
    FeatureTable,
    FeatureVector,
    read_table_csv,
    write_table_csv,
)
from voxtrait.regression import RatingTable, load_model, write_ratings_csv
from voxtrait.stats import read_matrix_csv


@pytest.fixture(scope="module")
def features_csv(extracted, tmp_path_factory):
    """The 18-row corpus feature table as a CSV on disk."""
    path = str(tmp_path_factory.mktemp("cli") / "features.csv")
    write_table_csv(path, extracted[0])
    return path


@pytest.fixture()
def toy_csvs(tmp_path):
    """Hand-built strong-signal table: spkrate drives the cooperative rating."""
    rng = np.random.default_rng(3)
    live = ["spkrate", "mean_pause", "f0_mean", "f1", "cep1", "cep2"]
    table = FeatureTable()
    ratings = RatingTable()
    for i in range(12):
        sid = f"sp{i:02d}"
        vals = {name: float(rng.standard_normal() + k) for k, name in enumerate(live)}
        table.add(sid, "S1", FeatureVector(vals))
        table.add(sid, "S2", FeatureVector({k: v + 0.1 for k, v in vals.items()}))
        rating = int(np.clip(round(4 + 1.5 * vals["spkrate"]), 1, 7))
        ratings.add(sid, "cooperative", "P", rating)
    f_path = str(tmp_path / "features.csv")
    r_path = str(tmp_path / "ratings.csv")
    write_table_csv(f_path, table)
    write_ratings_csv(r_path, ratings)
    return f_path, r_path


def test_extract_full_manifest(corpus, tmp_path, capsys):
    out = str(tmp_path / "features.csv")
    code = main(["extract", "--manifest", corpus.manifest, "--out", out])
    assert code == 0
    table = read_table_csv(out)
    assert len(table.rows) == 18
    sidecar = json.loads(open(out + ".run.json").read())
    assert sidecar["command"] == "extract"
    assert sidecar["config"]["sample_rate"] == 11025


def test_extract_partial_failure(corpus, tmp_path, capsys):
    # manifest paths resolve relative to the manifest file, so absolutize
    manifest = tmp_path / "manifest.csv"
    with open(corpus.manifest, newline="") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        row[0] = os.path.join(corpus.root, row[0])
    rows.append(["missing.wav", "spXX", "S1"])
    with open(manifest, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    out = str(tmp_path / "features.csv")
    code = main(["extract", "--manifest", str(manifest), "--out", out])
    assert code == 4
    assert len(read_table_csv(out).rows) == 18
    assert "warning:" in capsys.readouterr().err


def test_extract_total_failure(tmp_path, capsys):
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("path,speaker_id,session\na.wav,sp01,S1\nb.wav,sp02,S1\n")
    code = main(["extract", "--manifest", str(manifest), "--out", str(tmp_path / "f.csv")])
    assert code == 2


def test_extract_config_override_lands_in_sidecar(corpus, tmp_path, capsys):
    out = str(tmp_path / "f.csv")
    code = main(
        ["extract", "--manifest", corpus.manifest, "--out", out,
         "--pause-min-duration", "0.9", "--jobs", "1"]
    )
    assert code == 0
    sidecar = json.loads(open(out + ".run.json").read())
    assert sidecar["config"]["pause_min_duration"] == 0.9


def test_compare_topics_merges_both_tests(features_csv, tmp_path, capsys):
    out = str(tmp_path / "matrix.csv")
    code = main(["compare-topics", "--features", features_csv, "--out", out, "--test", "both"])
    assert code == 0
    matrix = read_matrix_csv(out)
    assert len(matrix.cells) == 30 * 3 * 2
    assert os.path.exists(out + ".run.json")


def test_transition_similarity_published(capsys):
    code = main(["transition-similarity", "--published", "--alpha", "0.01", "--test", "W"])
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("cos(")]
    assert len(lines) == 3
    for line in lines:
        float(line.split("=")[1])  # parsable value


def test_transition_similarity_needs_a_matrix(capsys):
    assert main(["transition-similarity"]) == 2
    assert "error:" in capsys.readouterr().err


def test_train_stable_then_evaluate(toy_csvs, tmp_path, capsys):
    f_path, r_path = toy_csvs
    out = str(tmp_path / "model.json")
    code = main(
        ["train", "--features", f_path, "--ratings", r_path,
         "--dv", "cooperative", "--session", "S1", "--out", out]
    )
    assert code == 0
    assert "stable=True" in capsys.readouterr().out
    model = load_model(out)
    assert "spkrate" in model.predictors

    code = main(
        ["evaluate", "--model", out, "--features", f_path, "--ratings", r_path,
         "--session", "S2"]
    )
    assert code == 0
    assert "r = " in capsys.readouterr().out


def test_train_unstable_exits_five(features_csv, corpus, tmp_path, capsys):
    # 6 speakers cannot clear the Bonferroni entry gate: empty, unstable
    out = str(tmp_path / "model.json")
    code = main(
        ["train", "--features", features_csv, "--ratings", corpus.ratings,
         "--dv", "cooperative", "--session", "S1", "--out", out]
    )
    assert code == 5
    assert "stable=False" in capsys.readouterr().out
    assert os.path.exists(out)


def test_train_rejects_sa(toy_csvs, tmp_path, capsys):
    f_path, r_path = toy_csvs
    code = main(
        ["train", "--features", f_path, "--ratings", r_path, "--rater-type", "SA",
         "--dv", "cooperative", "--session", "S1", "--out", str(tmp_path / "m.json")]
    )
    assert code == 2


def test_score_against_registry(features_csv, capsys):
    code = main(["score", "--features", features_csv, "--dv", "cooperative",
                 "--session", "S1"])
    assert code == 0
    out_lines = capsys.readouterr().out.splitlines()
    assert out_lines[0].startswith("#")
    assert out_lines[1] == "speaker,session,dv,model_session,score,top_terms,text_uncertain"
    data = out_lines[2:]
    assert len(data) == 18  # every table row scored against the one model
    for line in data:
        cells = line.split(",")
        assert cells[2] == "cooperative" and cells[3] == "S1"
        float(cells[4])


def test_score_with_explicit_stats(tmp_path, capsys):
    # one row, identity standardization: the score is just sum(beta * x)
    table = FeatureTable()
    table.add(
        "solo",
        "S1",
        FeatureVector({"pause_speech_ratio": 0.5, "mean_pause": -1.0, "cep1": 2.0}),
    )
    f_path = str(tmp_path / "f.csv")
    write_table_csv(f_path, table)
    s_path = str(tmp_path / "stats.csv")
    with open(s_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "mean", "std"])
        for name in ("pause_speech_ratio", "mean_pause", "cep1"):
            w.writerow([name, "0.0", "1.0"])
    code = main(["score", "--features", f_path, "--stats", s_path,
                 "--dv", "cooperative", "--session", "S1"])
    assert code == 0
    line = capsys.readouterr().out.splitlines()[-1]
    got = float(line.split(",")[4])
    expect = -0.67 * 0.5 + -0.35 * -1.0 + 0.29 * 2.0
    assert got == pytest.approx(expect, abs=1e-4)


def test_synth_corpus_command(tmp_path, capsys):
    out = str(tmp_path / "corp")
    code = main(["synth-corpus", "--out", out, "--speakers", "2", "--seed", "5"])
    assert code == 0
    assert os.path.exists(os.path.join(out, "manifest.csv"))
    assert os.path.exists(os.path.join(out, "ratings.csv"))
    assert os.path.exists(os.path.join(out, "corpus.run.json"))
    assert "manifest:" in capsys.readouterr().out


def test_windows_dump(corpus, capsys):
    wav = os.path.join(corpus.wav_dir, sorted(os.listdir(corpus.wav_dir))[0])
    code = main(["windows", "--wav", wav])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split(",")[:3] == ["start_s", "end_s", "f0_mean"]
    assert len(lines) > 1
    assert all(len(line.split(",")) == 10 for line in lines)


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_missing_input_file(tmp_path, capsys):
    code = main(["compare-topics", "--features", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "m.csv")])
    assert code == 2
