import csv
import json

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import FIGURE1_EDGES, figure1_covariance
from mtp2bbd import io
from mtp2bbd.cli import main


@pytest.fixture(scope="module")
def instance_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("inst")
    assert main(["synth", "--model", "ba", "--p", "80", "--chi", "0.015", "--seed", "3", "--out", str(d)]) == 0
    return d


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_synth_files_and_determinism(tmp_path, instance_dir):
    files = sorted(p.name for p in instance_dir.iterdir())
    assert files == ["A.mtx", "Lambda.mtx", "S.mtx", "manifest.json", "theta_true.mtx"]
    again = tmp_path / "again"
    assert main(["synth", "--model", "ba", "--p", "80", "--chi", "0.015", "--seed", "3", "--out", str(again)]) == 0
    for name in files:
        assert (instance_dir / name).read_bytes() == (again / name).read_bytes()
    manifest = json.loads((instance_dir / "manifest.json").read_text())
    assert manifest["config"]["n_samples"] is None
    S = io.read_matrix(instance_dir / "S.mtx")
    assert S.shape == (80, 80)


def test_synth_sbm(tmp_path):
    assert main(["synth", "--model", "sbm", "--p", "60", "--blocks", "3", "--out", str(tmp_path)]) == 0
    A = io.read_matrix(tmp_path / "A.mtx")
    labels = np.repeat(np.arange(3), 20)
    same = labels[:, None] == labels[None, :]
    assert A[same].mean() > A[~same].mean()


def test_synth_invalid_flags(tmp_path, capsys):
    assert run(["synth", "--model", "ba", "--p", "1", "--out", tmp_path], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--model", "er", "--p", "10", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_estimate_verify_pipeline(tmp_path, instance_dir, capsys):
    d = instance_dir
    out, rep = tmp_path / "theta.mtx", tmp_path / "r.json"
    code, stdout, _ = run(
        ["estimate", "--cov", d / "S.mtx", "--lambda", d / "Lambda.mtx", "--tol", "1e-8",
         "--out", out, "--report", rep, "--threads", "1"],
        capsys,
    )
    assert code == 0
    report = json.loads(rep.read_text())
    for key in ("p", "n_edges", "n_bridges", "K", "cluster_sizes", "cluster_solve_ms",
                "decomposition_ms", "assembly_ms", "total_ms", "cluster_iterations",
                "kkt_residual", "objective", "config"):
        assert key in report
    assert report["config"]["tolerance"] == 1e-8 and report["config"]["seed"] == 0
    assert sum(report["cluster_sizes"]) == report["p"] == 80
    code, stdout, _ = run(
        ["verify", "--cov", d / "S.mtx", "--lambda", d / "Lambda.mtx", "--theta", out,
         "--tol", "1e-6", "--inverse"],
        capsys,
    )
    assert code == 0, stdout
    assert "PASS" in stdout and "inverse_residual" in stdout


def test_estimate_decomposed_vs_monolithic(tmp_path, instance_dir):
    d = instance_dir
    a, b = tmp_path / "a.mtx", tmp_path / "b.mtx"
    common = ["--cov", str(d / "S.mtx"), "--lambda", str(d / "Lambda.mtx"), "--threads", "1"]
    assert main(["estimate", *common, "--out", str(a)]) == 0
    assert main(["estimate", *common, "--out", str(b), "--no-decompose"]) == 0
    assert np.abs(io.read_matrix(a) - io.read_matrix(b)).max() <= 1e-5


def test_estimate_trace(tmp_path, instance_dir):
    d = instance_dir
    ref, tr = tmp_path / "ref.mtx", tmp_path / "trace.csv"
    common = ["--cov", str(d / "S.mtx"), "--lambda", str(d / "Lambda.mtx")]
    assert main(["estimate", *common, "--out", str(ref)]) == 0
    assert main(["estimate", *common, "--out", str(tmp_path / "m.mtx"), "--no-decompose",
                 "--trace", str(tr), "--reference", str(ref)]) == 0
    rows = list(csv.DictReader(tr.open()))
    assert rows[0]["iteration"] == "0"
    assert float(rows[-1]["relative_error"]) < 1e-6
    assert main(["estimate", *common, "--out", str(ref), "--trace", str(tr)]) == 2


def test_estimate_chi_derivation(tmp_path, instance_dir):
    out = tmp_path / "t.mtx"
    assert main(["estimate", "--cov", str(instance_dir / "S.mtx"), "--chi", "0.2", "--eps", "0.01",
                 "--out", str(out)]) == 0
    assert io.read_matrix(out).shape == (80, 80)


def test_estimate_from_data(tmp_path, capsys):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 5)) + rng.standard_normal((200, 1))
    path = tmp_path / "x.csv"
    np.savetxt(path, X, delimiter=",", header="a,b,c,d,e", comments="")
    out = tmp_path / "t.mtx"
    code, *_ = run(["estimate", "--data", path, "--chi", "0.01", "--ddof", "1", "--out", out], capsys)
    assert code == 0
    S = io.covariance_from_data(io.read_data_csv(path), ddof=1)
    np.testing.assert_allclose(S, np.cov(X, rowvar=False), rtol=1e-12)


def test_exit_codes(tmp_path, instance_dir, capsys):
    d = instance_dir
    bad = tmp_path / "bad.mtx"
    bad.write_text("not a matrix\n")
    assert run(["estimate", "--cov", bad, "--chi", "0.1", "--out", tmp_path / "o.mtx"], capsys)[0] == 2
    assert run(["estimate", "--cov", d / "S.mtx", "--out", tmp_path / "o.mtx"], capsys)[0] == 2
    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    io.write_dense(tmp_path / "s.mtx", S)
    io.write_dense(tmp_path / "l.mtx", np.zeros((2, 2)))
    assert run(["estimate", "--cov", tmp_path / "s.mtx", "--lambda", tmp_path / "l.mtx",
                "--out", tmp_path / "o.mtx"], capsys)[0] == 3
    out = tmp_path / "partial.mtx"
    code, _, err = run(["estimate", "--cov", d / "S.mtx", "--lambda", d / "Lambda.mtx",
                        "--max-iter", "2", "--out", out], capsys)
    assert code == 4 and out.exists() and "no convergence" in err


def test_verify_failures(tmp_path, instance_dir, capsys):
    d = instance_dir
    S = io.read_matrix(d / "S.mtx")
    eye = tmp_path / "eye.mtx"
    io.write_sparse(eye, sp.eye(80))
    code, stdout, _ = run(["verify", "--cov", d / "S.mtx", "--lambda", d / "Lambda.mtx",
                           "--theta", eye, "--tol", "1e-6"], capsys)
    assert code == 5
    assert "kkt_residual" in stdout and "FAIL" in stdout
    # one cross-cluster nonzero
    good = tmp_path / "good.mtx"
    assert main(["estimate", "--cov", str(d / "S.mtx"), "--lambda", str(d / "Lambda.mtx"),
                 "--out", str(good)]) == 0
    theta = io.read_matrix(good)
    Lam = io.read_matrix(d / "Lambda.mtx")
    T = (S - Lam > 0) & ~np.eye(80, dtype=bool)
    i, j = map(int, np.argwhere(~T & ~np.eye(80, dtype=bool))[0])
    theta[i, j] = theta[j, i] = -1e-3
    bad = tmp_path / "corrupt.mtx"
    io.write_sparse(bad, sp.csr_array(theta))
    rep = tmp_path / "v.json"
    code, stdout, _ = run(["verify", "--cov", d / "S.mtx", "--lambda", d / "Lambda.mtx",
                           "--theta", bad, "--tol", "1e-6", "--report", rep], capsys)
    assert code == 5
    assert json.loads(rep.read_text())["support_contained"] is False


def write_figure1(tmp_path):
    S = figure1_covariance()
    io.write_dense(tmp_path / "S.mtx", S)
    io.write_dense(tmp_path / "L.mtx", np.zeros((16, 16)))
    return tmp_path / "S.mtx", tmp_path / "L.mtx"


def test_decompose_figure1(tmp_path, capsys):
    s, l = write_figure1(tmp_path)
    part = tmp_path / "part.txt"
    rep = tmp_path / "d.json"
    code, stdout, _ = run(["decompose", "--cov", s, "--lambda", l, "--report", rep,
                           "--partition-out", part], capsys)
    assert code == 0
    data = json.loads(rep.read_text())
    assert data["bridges"] == [[5, 6], [9, 10]]
    assert data["K"] == 3 and data["n_edges"] == len(FIGURE1_EDGES)
    assert part.read_text().splitlines() == ["1 2 3 4 5", "6 7 8 9", "10 11 12 13 14 15 16"]
    assert "bridge 5 6" in stdout


def test_decompose_degenerate(tmp_path, capsys):
    S = np.full((5, 5), 0.1) + 0.9 * np.eye(5)
    io.write_dense(tmp_path / "S.mtx", S)
    io.write_dense(tmp_path / "hi.mtx", np.full((5, 5), 0.5) - 0.5 * np.eye(5))
    io.write_dense(tmp_path / "lo.mtx", np.zeros((5, 5)))
    rep = tmp_path / "d.json"
    assert main(["decompose", "--cov", str(tmp_path / "S.mtx"), "--lambda", str(tmp_path / "hi.mtx"),
                 "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["K"] == 5
    assert main(["decompose", "--cov", str(tmp_path / "S.mtx"), "--lambda", str(tmp_path / "lo.mtx"),
                 "--report", str(rep)]) == 0
    data = json.loads(rep.read_text())
    assert data["K"] == 1 and data["n_bridges"] == 0


def test_bench_single(tmp_path, capsys):
    code, stdout, _ = run(["bench", "--model", "ba", "--p", "100", "--chi", "0.01", "--seed", "1",
                           "--threads", "1", "--out", tmp_path], capsys)
    assert code == 0
    mono = list(csv.DictReader((tmp_path / "trace_monolithic.csv").open()))
    dec = list(csv.DictReader((tmp_path / "trace_decomposed.csv").open()))
    assert len(mono) > 2 and len(dec) == 8
    assert float(dec[-1]["relative_error"]) < 1e-6
    assert "ratio" in stdout


def test_bench_grid(tmp_path, capsys):
    code, stdout, _ = run(["bench", "--grid-K", "4", "8", "16", "--grid-size", "16", "32",
                           "--trials", "1", "--threads", "1", "--out", tmp_path], capsys)
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "ratio_table.csv").open()))
    assert [(r["K"], r["cluster_size"]) for r in rows] == [
        (str(k), str(s)) for k in (4, 8, 16) for s in (16, 32)
    ]
    assert all(float(r["median_ratio"]) > 0 for r in rows)


def test_bench_budget_flags_partial(tmp_path, capsys):
    code, stdout, _ = run(["bench", "--grid-K", "4", "--grid-size", "16", "--trials", "1",
                           "--budget", "1e-9", "--target-re", "1e-15", "--out", tmp_path], capsys)
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "ratio_table.csv").open()))
    assert rows[0]["timed_out"] == "True"


def test_matrix_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    A = rng.standard_normal((7, 7)) * 10.0 ** rng.integers(-8, 8, (7, 7))
    A = A + A.T
    io.write_dense(tmp_path / "a.mtx", A)
    assert np.array_equal(io.read_matrix(tmp_path / "a.mtx"), A)
    B = sp.random(30, 30, density=0.1, random_state=2)
    B = B + B.T
    io.write_sparse(tmp_path / "b.mtx", B)
    assert np.array_equal(io.read_matrix(tmp_path / "b.mtx"), B.toarray())
    G = rng.standard_normal((3, 4))
    io.write_dense(tmp_path / "g.mtx", G)
    assert np.array_equal(io.read_matrix(tmp_path / "g.mtx"), G)
