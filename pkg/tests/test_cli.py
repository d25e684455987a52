"""Command line behavior: outputs, exit codes, determinism."""

import json

import numpy as np
import pytest

from bwopt import read_sdpa, read_trace_csv, validate_trace_csv
from bwopt.cli import main, parse_gen_spec


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "family.json"
    rc = run_cli("gen-data", "--gen", "method=2,n=6,d=3,alpha=1,beta=2",
                 "--seed", "7", "--out", str(path))
    assert rc == 0
    return path


def test_parse_gen_spec():
    spec = parse_gen_spec("method=2,n=10,d=5,alpha=1,beta=4", default_seed=42)
    assert spec.method == 2 and spec.n == 10 and spec.d == 5
    assert spec.alpha == 1.0 and spec.beta == 4.0
    assert spec.seed == 42
    override = parse_gen_spec("method=1,n=2,d=2,seed=9", default_seed=42)
    assert override.seed == 9
    with pytest.raises(ValueError, match="bad generator field"):
        parse_gen_spec("method=1,bogus=3", default_seed=0)
    with pytest.raises(ValueError, match="bad generator value"):
        parse_gen_spec("method=1,n=x", default_seed=0)


def test_gen_data_round_trip_is_bitwise(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    c = tmp_path / "c.json"
    args = ("gen-data", "--gen", "method=3,n=5,d=2", "--seed", "1")
    assert run_cli(*args, "--out", str(a)) == 0
    assert run_cli(*args, "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()
    assert run_cli("gen-data", "--gen", "method=3,n=5,d=2", "--seed", "2",
                   "--out", str(c)) == 0
    assert a.read_bytes() != c.read_bytes()


def test_barycenter_run_writes_trace_and_summary(dataset, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    summary = tmp_path / "summary.json"
    rc = run_cli("barycenter", "--input", str(dataset),
                 "--out-trace", str(trace), "--out-summary", str(summary))
    assert rc == 0
    out = capsys.readouterr().out
    assert f"wrote {trace}" in out
    assert f"wrote {summary}" in out
    assert "stop=gradient_tolerance" in out
    check = validate_trace_csv(trace)
    assert check["first_iter"] == 0
    payload = json.loads(summary.read_text())
    assert payload["command"] == "barycenter"
    assert payload["converged"] is True
    assert payload["final"]["dimension"] == 3
    assert payload["config"]["algorithm"] == "gd"


def test_barycenter_reference_populates_distance_column(dataset, tmp_path):
    summary = tmp_path / "summary.json"
    assert run_cli("barycenter", "--input", str(dataset),
                   "--out-summary", str(summary)) == 0
    trace = tmp_path / "ref_trace.csv"
    rc = run_cli("barycenter", "--input", str(dataset), "--ref", str(summary),
                 "--out-trace", str(trace))
    assert rc == 0
    rows = read_trace_csv(trace)
    dists = [row["w2sq_to_ref"] for row in rows]
    assert all(np.isfinite(v) for v in dists)
    assert dists[-1] <= 1e-12


def test_barycenter_gen_input_is_deterministic(tmp_path):
    t1 = tmp_path / "t1.csv"
    t2 = tmp_path / "t2.csv"
    args = ("barycenter", "--gen", "method=2,n=5,d=3", "--seed", "3",
            "--sgd", "--max-iters", "40")
    assert run_cli(*args, "--out-trace", str(t1)) == 3
    assert run_cli(*args, "--out-trace", str(t2)) == 3
    # Identical up to the wall-clock column; unset distances read as NaN.
    strip = lambda rows: [
        {k: (None if isinstance(v, float) and np.isnan(v) else v)
         for k, v in r.items() if k != "wall_ns"}
        for r in rows]
    assert strip(read_trace_csv(t1)) == strip(read_trace_csv(t2))


def test_sgd_budget_exit_is_distinct(dataset, tmp_path):
    rc = run_cli("barycenter", "--input", str(dataset), "--sgd",
                 "--max-iters", "25", "--trace-stride", "5")
    assert rc == 3


def test_gd_budget_exhaustion(dataset):
    rc = run_cli("barycenter", "--input", str(dataset), "--max-iters", "2",
                 "--grad-tol", "1e-14")
    assert rc == 3


def test_rbarycenter_run(dataset, tmp_path):
    summary = tmp_path / "summary.json"
    rc = run_cli("rbarycenter", "--input", str(dataset), "--gamma", "1.0",
                 "--out-summary", str(summary))
    assert rc == 0
    payload = json.loads(summary.read_text())
    assert payload["command"] == "rbarycenter"
    assert payload["config"]["gamma"] == 1.0


def test_rbarycenter_requires_gamma(dataset):
    with pytest.raises(SystemExit) as err:
        run_cli("rbarycenter", "--input", str(dataset))
    assert err.value.code == 2


def test_median_noncentered_augments_and_reports_mean(tmp_path):
    data = tmp_path / "shifted.json"
    payload = {
        "dimension": 2,
        "atoms": [
            {"mean": [1.0, 0.0], "cov": [1.0, 0.0, 0.0, 1.0]},
            {"mean": [3.0, 0.0], "cov": [1.2, 0.0, 0.0, 0.8]},
            {"mean": [2.0, 1.0], "cov": [0.9, 0.1, 0.1, 1.1]},
        ],
        "weights": [0.4, 0.3, 0.3],
    }
    data.write_text(json.dumps(payload))
    summary = tmp_path / "summary.json"
    rc = run_cli("median", "--input", str(data), "--epsilon", "0.3",
                 "--grad-tol", "1e-8", "--out-summary", str(summary))
    assert rc == 0
    out = json.loads(summary.read_text())
    assert out["config"]["augmented"] is True
    assert out["final"]["dimension"] == 2
    assert np.linalg.norm(out["final"]["mean"]) > 0.5


def test_euclidean_run_and_sgd_budget(dataset, tmp_path):
    trace = tmp_path / "egd.csv"
    rc = run_cli("euclidean", "--input", str(dataset), "--step", "0.9",
                 "--max-iters", "3000", "--out-trace", str(trace))
    assert rc == 0
    rows = read_trace_csv(trace)
    assert rows[-1]["grad_norm_sq"] <= (1e-13) ** 2
    rc = run_cli("euclidean", "--input", str(dataset), "--sgd",
                 "--max-iters", "30")
    assert rc == 3


def test_dim_sweep_table(tmp_path, capsys):
    table = tmp_path / "sweep.csv"
    rc = run_cli("dim-sweep", "--dims", "2,3", "--n", "5", "--r", "1,3",
                 "--out-table", str(table))
    assert rc == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "d,r,passes,var_p,ref_iterations,ref_grad_norm_sq"
    assert len(lines) == 5
    out = capsys.readouterr().out
    assert "d=2 r=1" in out and "d=3 r=3" in out


def test_robustness_table(tmp_path):
    table = tmp_path / "robust.csv"
    rc = run_cli("robustness", "--n", "4", "--d", "2", "--scales", "1,3",
                 "--alpha", "1", "--beta", "2", "--out-table", str(table))
    assert rc == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "perturbation,median_shift,barycenter_shift"
    assert len(lines) == 3


def test_sdp_export_command(dataset, tmp_path):
    out = tmp_path / "bary.dat-s"
    rc = run_cli("sdp-export", "--input", str(dataset), "--out", str(out))
    assert rc == 0
    parsed = read_sdpa(out)
    assert parsed["m"] == (2 * 6 - 1) * 3 * 4 // 2
    assert parsed["block_sizes"] == [6] * 6


def test_plot_rendering(dataset, tmp_path):
    png = tmp_path / "trace.png"
    rc = run_cli("barycenter", "--input", str(dataset), "--out-plot", str(png))
    assert rc == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_missing_input_file_exits_1(tmp_path, capsys):
    rc = run_cli("barycenter", "--input", str(tmp_path / "nope.json"))
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_parse_error_names_file_and_location(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimension": 2,\n1}\n')
    rc = run_cli("barycenter", "--input", str(bad))
    assert rc == 1
    err = capsys.readouterr().err
    assert "bad.json:2:1" in err


def test_reference_dimension_mismatch_exits_1(dataset, tmp_path, capsys):
    wrong = tmp_path / "wrong.json"
    run_cli("gen-data", "--gen", "method=2,n=1,d=2", "--out", str(wrong))
    rc = run_cli("barycenter", "--input", str(dataset), "--ref", str(wrong))
    assert rc == 1
    assert "does not match" in capsys.readouterr().err


def test_nonfinite_dataset_exits_4(tmp_path, capsys):
    bad = tmp_path / "nan.json"
    bad.write_text(
        '{"dimension": 1, "atoms": [{"mean": [0.0], "cov": [NaN]}], '
        '"weights": [1.0]}')
    rc = run_cli("barycenter", "--input", str(bad))
    assert rc == 4
    assert "numerical failure" in capsys.readouterr().err


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as err:
        run_cli()
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        run_cli("barycenter", "--input", "x.json", "--no-such-flag")
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        run_cli("barycenter")  # --input/--gen required
    assert err.value.code == 2


def test_bad_gen_spec_exits_1(capsys):
    rc = run_cli("barycenter", "--gen", "method=1,junk")
    assert rc == 1
    assert "bad generator field" in capsys.readouterr().err
