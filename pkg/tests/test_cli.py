import subprocess
import sys

import numpy as np
import pytest

from wavegcn import cli, haar
from wavegcn.graph import load_features, load_graph


@pytest.fixture()
def dataset(tmp_path):
    prefix = str(tmp_path / "toy")
    assert cli.main(["gen-planted", "--n", "40", "--channels", "4", "--seed", "1",
                     "--prefix", prefix]) == 0
    return tmp_path, prefix + ".graph.txt", prefix + ".features.txt", prefix + ".labels.txt"


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_planted_files(dataset):
    _, graph, feats, labels = dataset
    g = load_graph(graph)
    assert g.n == 40 and load_features(feats).shape == (40, 4)


def test_transform_writes_coefficients_and_layout(dataset):
    tmp, graph, feats, _ = dataset
    out = str(tmp / "p.txt")
    assert cli.main(["transform", "--graph", graph, "--features", feats, "--out", out]) == 0
    p = load_features(out)
    f = load_features(feats)
    assert abs(np.linalg.norm(p) - np.linalg.norm(f)) < 1e-12 * np.linalg.norm(f)
    layout = open(out + ".layout").read().splitlines()
    assert layout[0] == "block start rows" and layout[-1].startswith("average")
    h = haar.load_hierarchy(out + ".hier")
    np.testing.assert_allclose(haar.inverse(h, p), f, atol=1e-12)


def test_compress_reconstruct_round_trip(dataset):
    tmp, graph, feats, _ = dataset
    dense = str(tmp / "c.txt")
    assert cli.main(["compress", "--graph", graph, "--features", feats, "--alpha", "0.25",
                     "--out", dense]) == 0
    assert load_features(dense).shape == (10, 4)
    rec = str(tmp / "r.txt")
    assert cli.main(["reconstruct", "--dense", dense, "--index", dense + ".idx",
                     "--hierarchy", dense + ".hier", "--out", rec]) == 0
    f = load_features(feats)
    err = np.linalg.norm(load_features(rec) - f)
    assert 0 < err < np.linalg.norm(f)
    # alpha = 1 reconstructs exactly
    assert cli.main(["compress", "--graph", graph, "--features", feats, "--alpha", "1",
                     "--out", dense]) == 0
    assert cli.main(["reconstruct", "--dense", dense, "--index", dense + ".idx",
                     "--hierarchy", dense + ".hier", "--out", rec]) == 0
    np.testing.assert_allclose(load_features(rec), f, atol=1e-12)


def test_mse_sweep_csv(capsys):
    code, out, _ = run(["mse-sweep", "--n", "128", "--q-max", "3"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "scheme,compression_ratio,alpha,bits,mse"
    assert len(lines) == 1 + 3 * 5


def test_train_infer_and_report(dataset, capsys):
    tmp, graph, feats, labels = dataset
    model = str(tmp / "m.txt")
    code, out, _ = run(["train", "--graph", graph, "--features", feats, "--labels", labels,
                        "--epochs", "5", "--hidden", "6", "--alpha", "0.5", "--out", model], capsys)
    assert code == 0
    assert out.splitlines()[0] == "epoch,loss,train_acc,val_acc" and len(out.splitlines()) == 6
    code, out, _ = run(["infer", "--model", model, "--graph", graph, "--features", feats], capsys)
    assert code == 0
    logits = np.array([[float(v) for v in ln.split()] for ln in out.splitlines()[1:]])
    assert logits.shape == (40, 2)
    code, out, _ = run(["report-compression", "--model", model, "--graph", graph,
                        "--alpha", "0.25", "--bits-a", "8"], capsys)
    assert code == 0
    assert out.splitlines()[-1].endswith(",16.0")


def test_report_without_model(capsys):
    code, out, _ = run(["report-compression", "--alpha", "0.125", "--bits-a", "8"], capsys)
    assert code == 0 and out.splitlines()[-1].endswith(",32.0")


@pytest.mark.parametrize("args", [
    [],
    ["transform"],
    ["compress", "--graph", "g", "--features", "f"],
    ["train", "--graph", "g", "--features", "f", "--labels", "l", "--out", "m", "--bits-w", "40"],
    ["bogus"],
])
def test_usage_errors_exit_one(args, capsys):
    assert cli.main(args) == 1
    assert "error" in capsys.readouterr().err


def test_data_errors_exit_two(tmp_path, dataset, capsys):
    _, graph, feats, _ = dataset
    bad = tmp_path / "bad.txt"
    bad.write_text("3 1\n0 0\n")
    assert cli.main(["transform", "--graph", str(bad), "--features", feats]) == 2
    assert "self-loop" in capsys.readouterr().err
    assert cli.main(["transform", "--graph", str(tmp_path / "missing"), "--features", feats]) == 2
    assert cli.main(["compress", "--graph", graph, "--features", feats, "--alpha", "1.5",
                     "--out", str(tmp_path / "x")]) == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "wavegcn.cli", "report-compression", "--bits-a", "4"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.splitlines()[-1].endswith(",8.0")
