import subprocess
import sys

import numpy as np
import pytest

from mklkit.harness.cli import main
from mklkit.kernels import read_labels, write_index_pairs, write_labels, write_matrix_csv


@pytest.fixture
def inst_dir(tmp_path):
    out = tmp_path / "inst"
    assert main(["gen", "--l", "4", "--m", "40", "--n", "4", "--tau", "2", "--p", "4",
                 "--seed", "1", "--out", str(out)]) == 0
    return out


def test_gen_writes_files(inst_dir):
    names = {p.name for p in inst_dir.iterdir()}
    assert {"kernel_0.csv", "kernel_3.csv", "test_kernel_3.csv", "train_labels.txt",
            "test_labels.txt", "provenance.csv"} <= names


@pytest.mark.parametrize("method", ["linf", "l1", "l2", "boost", "svm"])
def test_train_predict(inst_dir, tmp_path, method, capsys):
    model = tmp_path / f"{method}.model"
    assert main(["train", "--data", str(inst_dir), "--method", method, "--normalize",
                 "--out", str(model)]) == 0
    pred = tmp_path / "pred.txt"
    conf = tmp_path / "conf.csv"
    assert main(["predict", "--model", str(model), "--data", str(inst_dir), "--out", str(pred),
                 "--confusion", str(conf)]) == 0
    y = read_labels(pred)
    truth = read_labels(inst_dir / "test_labels.txt")
    assert y.shape == truth.shape and set(np.unique(y)) <= {-1, 1}
    assert np.mean(y == truth) > 0.6
    assert "accuracy" in capsys.readouterr().err
    assert conf.read_text().startswith("true\\pred,-1,1\n")


def test_ckl_with_grouping(inst_dir, tmp_path):
    write_index_pairs(tmp_path / "groups.csv", {0: 0, 1: 0, 2: 1, 3: 1})
    model = tmp_path / "ckl.model"
    assert main(["train", "--data", str(inst_dir), "--method", "ckl", "--grouping",
                 str(tmp_path / "groups.csv"), "--out", str(model)]) == 0
    assert "[group.1]" in model.read_text()


def test_multiclass_distances(tmp_path):
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1, 2], 8)
    X = 3 * y[None, :] + 0.3 * rng.standard_normal((2, 24))
    T = 3 * np.repeat([0, 1, 2], 2)[None, :] + 0.3 * rng.standard_normal((2, 6))
    sq = lambda A, B: ((A[:, :, None] - B[:, None, :]) ** 2).sum(axis=0)
    write_matrix_csv(tmp_path / "d.csv", sq(X, X))
    write_matrix_csv(tmp_path / "dt.csv", sq(X, T))
    write_labels(tmp_path / "y.txt", y)
    write_labels(tmp_path / "yt.txt", np.repeat([0, 1, 2], 2))
    assert main(["train", "--kernels", str(tmp_path / "d.csv"), "--labels", str(tmp_path / "y.txt"),
                 "--distances", "--method", "svm", "--out", str(tmp_path / "m")]) == 0
    assert main(["predict", "--model", str(tmp_path / "m"), "--kernels", str(tmp_path / "dt.csv"),
                 "--truth", str(tmp_path / "yt.txt"), "--out", str(tmp_path / "p.txt")]) == 0
    assert np.array_equal(read_labels(tmp_path / "p.txt"), np.repeat([0, 1, 2], 2))


def test_experiment_and_report(tmp_path, capsys):
    args = ["experiment", "redundancy", "--l", "4", "--m", "20", "--n", "4", "--tau", "2",
            "--p-values", "1,4", "--repeats", "1", "--seed", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "redundancy_summary.csv" in files and "redundancy_config.ini" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    # the written config reproduces the run
    assert main(["experiment", "redundancy", "--config", str(tmp_path / "a" / "redundancy_config.ini"),
                 "--out", str(tmp_path / "c")]) == 0
    assert ((tmp_path / "c" / "redundancy_summary.csv").read_bytes()
            == (tmp_path / "a" / "redundancy_summary.csv").read_bytes())
    capsys.readouterr()
    assert main(["report", str(tmp_path / "a" / "redundancy_summary.csv")]) == 0
    assert "mean_acc_linf" in capsys.readouterr().out


def test_set_overrides(tmp_path):
    assert main(["experiment", "csweep", "--set", "l=4", "--set", "m=20", "--set", "n=4",
                 "--set", "p=4", "--set", "tau=2", "--set", "repeats=1", "--set", "C_grid=0.1,1",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "csweep_summary.csv").read_text().count("\n") == 3


def test_exit_codes(inst_dir, tmp_path):
    # validation errors
    assert main(["experiment", "redundancy", "--set", "repeats=0", "--out", str(tmp_path)]) == 2
    assert main(["experiment", "redundancy", "--set", "nonsense", "--out", str(tmp_path)]) == 2
    assert main(["gen", "--l", "4", "--p", "3", "--n", "4", "--out", str(tmp_path / "x")]) == 2
    assert main(["train", "--data", str(inst_dir), "--method", "ckl", "--out",
                 str(tmp_path / "m")]) == 2  # no grouping
    # non-convergence
    assert main(["train", "--data", str(inst_dir), "--max-iter", "1", "--out",
                 str(tmp_path / "m")]) == 3
    # I/O
    assert main(["predict", "--model", str(tmp_path / "missing"), "--data", str(inst_dir)]) == 4
    assert main(["train", "--kernels", str(tmp_path / "nope.csv"), "--labels",
                 str(inst_dir / "train_labels.txt"), "--out", str(tmp_path / "m")]) == 4


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "mklkit", "gen", "--l", "2", "--m", "4", "--n", "2",
                        "--p", "2", "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and "wrote 2 kernels" in r.stdout
