import csv
import io
import json
import logging

import numpy as np
import pytest

from rpca_sdp import cli
from rpca_sdp.datasets import iris_subsample, load_csv, load_iris, parse_csv_text
from rpca_sdp.exceptions import DegenerateColumnError, InvalidArgumentError, InvalidInputError
from rpca_sdp.experiments import (
    ExperimentConfig,
    SyntheticConfig,
    make_corrupted_low_rank,
    preprocess,
    preset_config,
    report_to_csv,
    report_to_json,
    run_projection_experiment,
    run_regression_experiment,
    run_synthetic,
    substream,
)
from rpca_sdp.robust_stats import euclidean_median, madn

# --- loading ---------------------------------------------------------------------------


def test_load_csv_basic(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2\n3,4\n5,6\n")
    X = load_csv(f)
    assert X.shape == (3, 2) and X[2, 1] == 6


def test_load_csv_header_and_delimiter(tmp_path):
    f = tmp_path / "a.tsv"
    f.write_text("a\tb\n1\t2\n3\t4\n")
    assert load_csv(f, delimiter="\t", header=True).tolist() == [[1, 2], [3, 4]]


def test_load_csv_na_policies(tmp_path, caplog):
    f = tmp_path / "a.csv"
    f.write_text("1,2\nNA,4\n5,6\n")
    with pytest.raises(InvalidInputError, match="line 2"):
        load_csv(f)
    with caplog.at_level(logging.INFO):
        X = load_csv(f, na_policy="drop-row")
    assert X.tolist() == [[1, 2], [5, 6]]
    assert "dropped 1 row" in caplog.text


def test_load_csv_parse_errors(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2\n3,x\n")
    with pytest.raises(InvalidInputError, match="line 2"):
        load_csv(f)
    f.write_text("1,2\n3\n")
    with pytest.raises(InvalidInputError, match="line 2"):
        load_csv(f)
    with pytest.raises(InvalidArgumentError):
        load_csv(tmp_path / "missing.csv")
    with pytest.raises(InvalidArgumentError):
        load_csv(f, na_policy="impute")


def test_whitespace_parsing():
    X = parse_csv_text("1  2 3\n 4 5   6\n", delimiter=None)
    assert X.tolist() == [[1, 2, 3], [4, 5, 6]]


def test_iris_embedded():
    X, labels = load_iris()
    assert X.shape == (150, 4)
    assert (labels == "setosa").sum() == 50
    assert X[0].tolist() == [5.1, 3.5, 1.4, 0.2]


def test_iris_subsample_default_and_seeded():
    X, labels = iris_subsample()
    assert X.shape == (60, 4)
    assert list(labels[:50]) == ["setosa"] * 50
    assert list(labels[50:55]) == ["virginica"] * 5 and list(labels[55:]) == ["versicolor"] * 5
    full, _ = load_iris()
    assert np.array_equal(X[50], full[100]) and np.array_equal(X[55], full[50])
    Y, _ = iris_subsample(seed=3)
    Z, _ = iris_subsample(seed=3)
    assert np.array_equal(Y, Z) and not np.array_equal(Y, X)


# --- configuration and preprocessing ----------------------------------------------------


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig("iris", methods=("pca", "ica"))
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig("iris", gamma="large")
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig("iris", drop_columns=(0,))
    assert ExperimentConfig("iris", methods="pca, lld").methods == ("pca", "lld")
    assert ExperimentConfig("iris", gamma="0.25").gamma == 0.25


def test_substreams_differ_by_name():
    a = np.random.default_rng(substream(1, "mdr")).random()
    b = np.random.default_rng(substream(1, "lld")).random()
    assert a != b and a == np.random.default_rng(substream(1, "mdr")).random()


def test_preprocess_centering_symmetric():
    X = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]]) + [3, 4]
    Y = preprocess(X, ExperimentConfig("x"))
    assert np.abs(Y - (X - [3, 4])).max() < 1e-10


def test_preprocess_drop_and_madn(rng):
    X = rng.standard_normal((218, 18)) * rng.uniform(0.5, 5, 18)
    cfg = ExperimentConfig("bus", drop_columns=(9,), column_scaling="madn", centering="none")
    Y = preprocess(X, cfg)
    assert Y.shape == (218, 17)
    assert np.allclose(Y[:, 8] * madn(X[:, 9]), X[:, 9], rtol=1e-14)
    assert all(abs(madn(Y[:, j]) - 1) < 1e-10 for j in range(17))


def test_preprocess_order_scale_then_center(rng):
    X = rng.standard_normal((30, 3)) * [1, 10, 100] + 5
    cfg = ExperimentConfig("x", column_scaling="madn")
    s = np.array([madn(X[:, j]) for j in range(3)])
    mu, _ = euclidean_median(X / s, rng=np.random.default_rng(substream(0, "centering")))
    assert np.allclose(preprocess(X, cfg), X / s - mu)


def test_preprocess_zero_madn_column():
    X = np.array([[1.0, 0], [2, 0], [3, 0], [4, 1]])
    with pytest.raises(DegenerateColumnError) as ei:
        preprocess(X, ExperimentConfig("x", column_scaling="madn"))
    assert ei.value.index == 1


def test_preprocess_drop_out_of_range():
    with pytest.raises(InvalidArgumentError):
        preprocess(np.ones((4, 2)), ExperimentConfig("x", drop_columns=(3,)))


# --- runners ----------------------------------------------------------------------------


def test_projection_pca_only(rng):
    X = rng.standard_normal((40, 3))
    rep = run_projection_experiment(ExperimentConfig("x", methods=("pca",)), X=X)
    r = rep.results["pca"]
    v = np.linalg.svd(X)[2][0]
    assert min(np.abs(np.array(r["component"]) - v).max(), np.abs(np.array(r["component"]) + v).max()) < 1e-12
    y = np.array(r["projection"])
    q25, q75 = np.percentile(y, [25, 75])
    assert r["box"]["iqr"] == pytest.approx(q75 - q25)


def test_projection_isolates_method_failures():
    # N+L1 with lambda tiny returns L = 0, a rank-deficient error
    X = np.random.default_rng(0).standard_normal((20, 3))
    cfg = ExperimentConfig("x", methods=("pca", "nl1", "sph"), lam=1e-4)
    rep = run_projection_experiment(cfg, X=X)
    assert rep.failed == ["nl1"]
    assert rep.results["nl1"]["error"]["type"] == "RankDeficientError"
    assert "box" in rep.results["pca"] and "box" in rep.results["sph"]
    assert list(rep.results) == ["pca", "nl1", "sph"]


def test_projection_rejects_t_not_one():
    with pytest.raises(InvalidArgumentError):
        run_projection_experiment(ExperimentConfig("x", T=2), X=np.eye(4))


def test_projection_deterministic_json():
    cfg = preset_config("iris", methods=("mdr", "lld", "pca", "sph"))
    a = report_to_json(run_projection_experiment(cfg), include_timing=False)
    b = report_to_json(run_projection_experiment(cfg), include_timing=False)
    assert a == b
    d = json.loads(report_to_json(run_projection_experiment(cfg)))
    assert set(d) == {"kind", "config", "results", "timing", "version"}


def test_csv_and_json_round_trip():
    rep = run_projection_experiment(preset_config("iris", methods=("lld", "pca")))
    d = json.loads(report_to_json(rep))
    rows = list(csv.reader(io.StringIO(report_to_csv(rep))))
    assert rows[0] == ["Method", "IQR", "min", "25th", "75th", "max", "out%"]
    assert [r[0] for r in rows[1:]] == ["LLD", "PCA"]
    for row, m in zip(rows[1:], ("lld", "pca")):
        b = d["results"][m]["box"]
        want = [b["iqr"], b["min"], b["q25"], b["q75"], b["max"], 100 * b["outlier_fraction"]]
        for got, w in zip(row[1:], want):
            assert float(got) == float(f"{w:.12g}")


def test_regression_pca_only(rng):
    X = rng.standard_normal((30, 4))
    rep = run_regression_experiment(ExperimentConfig("x", methods=("pca",), T=2), X=X)
    r = rep.results["pca"]
    pairs = np.array(r["sorted_pairs"])
    assert np.array_equal(pairs[:, 0], pairs[:, 1])
    assert r["fraction_below"] == 0


def test_regression_exact_low_rank(rng):
    X = rng.standard_normal((40, 2)) @ rng.standard_normal((2, 5))
    cfg = ExperimentConfig("x", methods=("pca", "lld", "sph", "mdr"), T=2, centering="none", gamma=0.5)
    rep = run_regression_experiment(cfg, X=X)
    for m, r in rep.results.items():
        assert max(r["distances"]) < 1e-6 * np.linalg.norm(X), m


def test_synthetic_recovery():
    rep = run_synthetic(SyntheticConfig(seed=1))
    r = rep.results["lld"]
    assert r["precision"] >= 0.9 and r["recall"] >= 0.9
    assert r["angle_error"] < 1e-4


def test_synthetic_no_corruption_gamma_one():
    r = run_synthetic(SyntheticConfig(corrupt_fraction=0.0, gamma=1.0)).results["lld"]
    assert r["precision"] == 1.0 and r["recall"] == 1.0
    assert r["angle_error"] < 1e-6


def test_synthetic_zero_scale_below_threshold():
    r = run_synthetic(SyntheticConfig(corrupt_scale=0.0, seed=2)).results["lld"]
    assert r["detected"] == []


def test_synthetic_generator_support(rng):
    X, L, support = make_corrupted_low_rank(50, 6, 2, 0.2, 5.0, rng)
    assert support.sum() == 10
    assert np.array_equal(X[~support], L[~support])
    with pytest.raises(InvalidArgumentError):
        SyntheticConfig(corrupt_fraction=1.0)


# --- command line ---------------------------------------------------------------------


def test_cli_project_csv(capsys):
    code = cli.main(["project", "iris", "--methods", "pca,lld", "--format", "csv"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines()[0] == "Method,IQR,min,25th,75th,max,out%"


def test_cli_project_json_file(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["project", "iris", "--methods", "mdr", "-K", "10", "-o", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["config"]["K"] == 10 and 0 < d["results"]["mdr"]["extras"]["ratio"][0] <= 1


def test_cli_config_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main(["project", "iris", "--methods", "ica"])
    assert ei.value.code == 2
    assert cli.main(["project", str(tmp_path / "nope.csv")]) == 2
    assert cli.main(["project", "iris", "--gamma", "-1"]) == 2


def test_cli_solver_failure_exit_code(tmp_path):
    f = tmp_path / "x.csv"
    np.savetxt(f, np.random.default_rng(0).standard_normal((20, 3)), delimiter=",")
    assert cli.main(["project", str(f), "--methods", "pca,nl1", "--lambda", "1e-4"]) == 3


def test_cli_synthetic_and_oracle(tmp_path, capsys):
    assert cli.main(["synthetic", "-n", "60", "-p", "8", "--seed", "3"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["kind"] == "synthetic"
    f = tmp_path / "x.csv"
    f.write_text("1,0\n0,1\n")
    assert cli.main(["oracle", str(f)]) == 0
    out = capsys.readouterr().out
    assert "norm_2to1\t1.414213562373095" in out


def test_cli_regress(capsys, rng, tmp_path):
    f = tmp_path / "x.csv"
    np.savetxt(f, rng.standard_normal((30, 5)), delimiter=",")
    assert cli.main(["regress", str(f), "-T", "2", "--methods", "pca,lld,sph", "--gamma", "0.8", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "Method,fraction_below,q75,pca_q75" and len(lines) == 4
