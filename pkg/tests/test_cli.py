import json

import numpy as np
import pytest

from gradseek.cli import main, read_samples
from gradseek.imageseg import write_image, write_label_matrix

FAST = ["--grid-sigma", "0.3,1,3", "--grid-lambda", "0.01,1", "--folds", "3", "--n", "200"]


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)])
    return code, out


def load(out):
    return json.loads((out / "summary.json").read_text())


def test_estimate_synthetic_has_error_columns(tmp_path):
    code, out = run(tmp_path, "--task", "estimate", "--spec", "gauss", "--dim", "1", *FAST)
    assert code == 0
    header = (out / "gradients.csv").read_text().splitlines()[0]
    assert header == "x1,g1,true1,sq_error"
    summary = load(out)
    assert summary["seed"] == 0 and summary["config"]["grid_sigma"] == [0.3, 1.0, 3.0]
    data = np.loadtxt(out / "gradients.csv", delimiter=",", skiprows=1)
    assert summary["mse"] == pytest.approx(data[:, 3].mean(), rel=1e-12)


def test_estimate_is_byte_identical_on_repeat(tmp_path):
    a = main(["--task", "estimate", "--spec", "gmm2", *FAST, "--out", str(tmp_path / "a")])
    b = main(["--task", "estimate", "--spec", "gmm2", *FAST, "--out", str(tmp_path / "b")])
    assert a == b == 0
    assert (tmp_path / "a/gradients.csv").read_bytes() == (tmp_path / "b/gradients.csv").read_bytes()


def test_estimate_with_kde_from_csv(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "x.csv"
    np.savetxt(path, rng.normal(size=(80, 2)), delimiter=",", header="a,b", comments="")
    code, out = run(tmp_path, "--task", "estimate", "--input", str(path), "--with-kde", *FAST)
    assert code == 0
    header = (out / "gradients.csv").read_text().splitlines()[0]
    assert header == "x1,x2,g1,g2,kde1,kde2"
    assert "mse" not in load(out)


def test_empty_grid_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["--task", "estimate", "--spec", "gauss", "--grid-sigma", ""])
    assert err.value.code == 2
    assert "empty" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["--spec", "gauss"],
    ["--task", "estimate"],
    ["--task", "cluster", "--spec", "gauss", "--folds", "1"],
    ["--task", "segment"],
    ["--task", "cluster", "--spec", "gmm3", "--truth", "a", "b"],
])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


def test_missing_input_exits_one(tmp_path):
    code, _ = run(tmp_path, "--task", "estimate", "--input", str(tmp_path / "nope.csv"))
    assert code == 1
    code, _ = run(tmp_path, "--task", "segment", "--input", str(tmp_path / "nope.ppm"))
    assert code == 1


def test_cluster_gmm3(tmp_path):
    code, out = run(tmp_path, "--task", "cluster", "--spec", "gmm3", "--dim", "2", *FAST)
    assert code == 0
    summary = load(out)
    assert summary["k"] >= 1 and -1 <= summary["ari"] <= 1
    labels = np.loadtxt(out / "labels.csv", skiprows=1)
    assert labels.shape == (200,) and labels.max() == summary["k"] - 1
    modes = np.loadtxt(out / "modes.csv", delimiter=",", skiprows=1, ndmin=2)
    assert modes.shape == (summary["k"], 2)


def test_cluster_meanshift_same_schema(tmp_path):
    code, out = run(tmp_path, "--task", "cluster", "--spec", "gmm3", "--method", "meanshift", *FAST)
    assert code == 0
    a = load(out)
    code, out2 = run(tmp_path / "x", "--task", "cluster", "--spec", "gmm3", *FAST)
    assert set(a) == set(load(out2))


def test_cluster_with_truth_file(tmp_path):
    x = np.vstack([np.zeros((20, 1)) - 5, np.zeros((20, 1)) + 5]) + \
        np.random.default_rng(1).normal(scale=0.2, size=(40, 1))
    np.savetxt(tmp_path / "x.csv", x, delimiter=",")
    np.savetxt(tmp_path / "t.txt", np.repeat([0, 1], 20), fmt="%d")
    code, out = run(tmp_path, "--task", "cluster", "--input", str(tmp_path / "x.csv"),
                    "--truth", str(tmp_path / "t.txt"), "--seed", "1")
    assert code == 0 and load(out)["ari"] is not None
    np.savetxt(tmp_path / "bad.txt", [0, 1], fmt="%d")
    code, _ = run(tmp_path, "--task", "cluster", "--input", str(tmp_path / "x.csv"),
                  "--truth", str(tmp_path / "bad.txt"))
    assert code == 1


def test_one_row_cluster_warns(tmp_path, capsys):
    (tmp_path / "one.csv").write_text("1.5,2.5\n")
    code, out = run(tmp_path, "--task", "cluster", "--input", str(tmp_path / "one.csv"))
    assert code == 0
    assert "warning" in capsys.readouterr().err
    assert load(out)["k"] == 1


def test_segment_writes_outputs(tmp_path):
    img = np.zeros((8, 10, 3), dtype=np.uint8)
    img[:, 5:] = 200
    write_image(tmp_path / "img.ppm", img)
    truth = np.zeros((8, 10), dtype=int)
    truth[:, 5:] = 1
    write_label_matrix(tmp_path / "t1.txt", truth)
    write_label_matrix(tmp_path / "t2.txt", truth)
    code, out = run(tmp_path, "--task", "segment", "--input", str(tmp_path / "img.ppm"),
                    "--truth", str(tmp_path / "t1.txt"), str(tmp_path / "t2.txt"),
                    "--grid-sigma", "1,3", "--grid-lambda", "0.1", "--folds", "2")
    assert code == 0
    assert (out / "smoothed.ppm").exists()
    assert np.loadtxt(out / "labels.txt").shape == (8, 10)
    summary = load(out)
    assert len(summary["ari_per_truth"]) == 2
    assert summary["ari"] == pytest.approx(np.mean(summary["ari_per_truth"]))


def test_bench_gradient_one_rep(tmp_path):
    code, out = run(tmp_path, "--task", "bench-gradient", "--dims", "1", "--reps", "1", *FAST)
    assert code == 0
    lines = (out / "rows.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("method,d,rep")
    assert {s["method"] for s in load(out)["summary"]} == {"lsldg", "kde"}


def test_config_file_sets_defaults(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"task": "estimate", "spec": "gauss", "grid-sigma": "0.5,1",
                               "grid_lambda": [0.1], "folds": 2, "n": 50, "seed": 4}))
    code, out = run(tmp_path, "--config", str(cfg), "--seed", "5")
    assert code == 0
    summary = load(out)
    assert summary["seed"] == 5 and summary["config"]["grid_sigma"] == [0.5, 1.0]
    cfg.write_text(json.dumps({"colour": 1}))
    with pytest.raises(SystemExit):
        main(["--config", str(cfg)])


def test_read_samples_header_detection(tmp_path):
    (tmp_path / "a.csv").write_text("1,2\n3,4\n")
    (tmp_path / "b.csv").write_text("u,v\n1,2\n3,4\n")
    np.testing.assert_array_equal(read_samples(tmp_path / "a.csv"), read_samples(tmp_path / "b.csv"))
