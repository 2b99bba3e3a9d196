import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gwit import io as gio
from gwit import report
from gwit.cli import EXIT_DIFF, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main, parse_targets
from gwit.model import ConvexK, Individual, InputError
from gwit.partitions import bell, parse_partition, stirling2

GOLDEN = Path(__file__).parent / "golden"
TINY = ["--ga-population", "12", "--ga-generations", "5", "--ga-restarts", "1"]


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("GWIT_THREADS", "1")


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def tms_file(tmp_path):
    path = tmp_path / "tms.json"
    assert run("synth", "tms", "--r", 0.5, "--delta-c", 1e-3, "--out", path) == EXIT_OK
    return path


def analyze(path, out, *extra):
    return run("analyze", "-i", path, "--out", out, "--no-timestamp", *TINY, *extra)


def shape(x):
    if isinstance(x, dict):
        return {k: shape(v) for k, v in sorted(x.items())}
    if isinstance(x, list):
        return [shape(x[0])] if x else []
    return type(x).__name__


# target parsing --------------------------------------------------------------

def test_parse_targets_mixed():
    got = parse_targets("K=2,partition=1,2:3,K=3", 3)
    assert got == [ConvexK(2), Individual(parse_partition("1,2:3", 3)), ConvexK(3)]


def test_parse_targets_all():
    got = parse_targets("all", 6)
    assert sum(isinstance(t, ConvexK) for t in got) == 6
    assert sum(isinstance(t, Individual) for t in got) == 203


def test_parse_targets_groups_and_dedup():
    assert parse_targets("convex, K=1", 3) == [ConvexK(1), ConvexK(2), ConvexK(3)]
    assert len(parse_targets("partitions", 4)) == bell(4)


def test_parse_targets_large_n():
    assert all(isinstance(t, ConvexK) for t in parse_targets("all", 9))
    with pytest.raises(InputError, match="--all-partitions"):
        parse_targets("partitions", 9)
    assert len(parse_targets("partitions", 9, allow_large=True)) == bell(9)


@pytest.mark.parametrize("spec", ["", "K=0", "K=4", "foo", "partition=1:1,2", "K=2;K=3"])
def test_parse_targets_errors(spec):
    with pytest.raises(InputError):
        parse_targets(spec, 3)


# synth -----------------------------------------------------------------------

def test_synth_vacuum(tmp_path):
    out = tmp_path / "vac.json"
    assert run("synth", "vacuum", "--modes", 6, "--out", out) == EXIT_OK
    state = gio.load_state(out)
    assert state.matrix.shape == (12, 12)
    assert np.trace(state.matrix) == pytest.approx(6.0)


def test_synth_spopo_validates(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run("synth", "spopo-like", "--seed", 7, "--out", out) == EXIT_OK
    assert out.read_text().startswith("# label: spopo-like")
    assert run("validate", "-i", out) == EXIT_OK
    assert "purity: 1" in capsys.readouterr().out


def test_synth_mixture_label(tmp_path):
    out = tmp_path / "mix.json"
    spec = "1/3*tms:1,2;1/3*tms:1,3;1/3*tms:2,3"
    assert run("synth", "mixture", "--modes", 3, "--r", 1, "--mixture", spec,
               "--delta-c", 1e-3, "--out", out) == EXIT_OK
    state = gio.load_state(out)
    assert state.label.endswith("separable K=2")
    assert np.all(state.uncertainty == 1e-3)


def test_synth_stdout(capsys):
    assert run("synth", "squeezed", "--db=-2.6,3") == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["n_modes"] == 2
    assert data["matrix"][0][0] == pytest.approx(0.2748, abs=5e-5)


@pytest.mark.parametrize("argv", [
    ["synth", "squeezed"],
    ["synth", "spopo-like", "--impurity", "0.5"],
    ["synth", "mixture", "--mixture", "1/2*tms:1,2"],
    ["synth", "mixture", "--mixture", "1*foo"],
    ["synth", "tms", "--pair", "1,5"],
    ["synth", "bogus"],
])
def test_synth_errors(argv, capsys):
    assert main(argv) == EXIT_INPUT


# analyze ---------------------------------------------------------------------

def test_analyze_vacuum(tmp_path):
    src = tmp_path / "vac.json"
    run("synth", "vacuum", "--modes", 2, "--delta-c", 1e-3, "--out", src)
    out = tmp_path / "r.json"
    assert analyze(src, out, "--targets", "K=1") == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["state"]["purity"] == pytest.approx(1.0)
    (row,) = rep["convex"]
    assert abs(row["sigma"]) < 1e-6 and not row["detected"]
    assert rep["partitions"] == []


def test_analyze_tms_partition(tms_file, tmp_path):
    out = tmp_path / "r.json"
    assert analyze(tms_file, out, "--targets", "partition=1:2") == EXIT_OK
    rep = json.loads(out.read_text())
    (row,) = rep["partitions"]
    assert row["partition"] == "1:2" and row["sigma"] < 0 and row["detected"]


def test_report_schema_golden(tms_file, tmp_path):
    out = tmp_path / "r.json"
    assert analyze(tms_file, out) == EXIT_OK
    rep = json.loads(out.read_text())
    assert "generated_at" not in rep
    rep["state"]["diagnostics"] = ["str"]
    golden = json.loads((GOLDEN / "report_schema.json").read_text())
    assert shape(rep) == golden
    assert rep["schema"] == report.SCHEMA and rep["schema_version"] == report.SCHEMA_VERSION


def test_report_timestamp(tms_file, tmp_path):
    out = tmp_path / "r.json"
    assert run("analyze", "-i", tms_file, "--out", out, "--targets", "K=1", *TINY) == EXIT_OK
    assert "generated_at" in json.loads(out.read_text())


def test_analyze_sorted_partitions_and_counts(tmp_path):
    src = tmp_path / "s.json"
    run("synth", "spopo-like", "--modes", 4, "--seed", 1, "--delta-c", 1e-3, "--out", src)
    out = tmp_path / "r.json"
    assert analyze(src, out, "--include-witness") == EXIT_OK
    rep = json.loads(out.read_text())
    assert [r["k"] for r in rep["convex"]] == [1, 2, 3, 4]
    assert rep["partition_counts"] == {str(k): stirling2(4, k) for k in range(1, 5)}
    rows = rep["partitions"]
    assert len(rows) == bell(4)
    for k in range(1, 5):
        sig = [r["sigma"] for r in rows if r["k"] == k]
        assert sig == sorted(sig)
    assert np.array(rows[0]["witness"]).shape == (8, 8)


@pytest.mark.slow
def test_analyze_spopo_all(tmp_path):
    src = tmp_path / "s.json"
    run("synth", "spopo-like", "--delta-c", 1e-3, "--out", src)
    out = tmp_path / "r.json"
    assert run("analyze", "-i", src, "--out", out, "--no-timestamp", "--ga-population", 8,
               "--ga-generations", 2, "--ga-restarts", 1) == EXIT_OK
    rep = json.loads(out.read_text())
    assert len(rep["convex"]) == 6
    assert len(rep["partitions"]) == 203
    assert rep["partition_counts"] == {"1": 1, "2": 31, "3": 90, "4": 65, "5": 15, "6": 1}


def test_analyze_csv(tms_file, tmp_path):
    out = tmp_path / "r.csv"
    assert analyze(tms_file, out, "--format", "csv") == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["target"] for r in rows] == ["K=1", "K=2", "partition=1,2", "partition=1:2"]
    assert list(rows[0]) == list(report.ROW_FIELDS)


def test_analyze_ga_config_file(tms_file, tmp_path):
    cfg = tmp_path / "ga.json"
    cfg.write_text(json.dumps({"population_size": 10, "generations": 3, "restarts": 1}))
    out = tmp_path / "r.json"
    assert run("analyze", "-i", tms_file, "--ga-config", cfg, "--ga-generations", 4,
               "--targets", "K=2", "--out", out) == EXIT_OK
    ga = json.loads(out.read_text())["ga"]
    assert (ga["population_size"], ga["generations"], ga["restarts"]) == (10, 4, 1)


def test_analyze_input_errors(tmp_path, tms_file):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert analyze(bad, tmp_path / "r.json") == EXIT_INPUT
    assert analyze(tmp_path / "missing.json", tmp_path / "r.json") == EXIT_INPUT
    assert analyze(tms_file, tmp_path / "r.json", "--targets", "K=5") == EXIT_INPUT
    assert analyze(tms_file, tmp_path / "r.json", "--ga-population", 0) == EXIT_INPUT
    assert main(["analyze"]) == EXIT_INPUT


def test_analyze_zero_uncertainty(tmp_path):
    src = tmp_path / "t.json"
    run("synth", "tms", "--out", src)
    assert analyze(src, tmp_path / "r.json") == EXIT_INPUT


def test_analyze_numerical_failure(tmp_path, monkeypatch):
    from gwit import optimizer
    from gwit.model import NumericalError

    def boom(*a, **k):
        raise NumericalError("pairing failed")

    monkeypatch.setattr(optimizer, "sweep", boom)
    src = tmp_path / "t.json"
    run("synth", "tms", "--delta-c", 1e-3, "--out", src)
    assert analyze(src, tmp_path / "r.json") == EXIT_NUMERICAL


def test_validate_unphysical(tmp_path, capsys):
    src = tmp_path / "u.json"
    src.write_text(json.dumps({"n_modes": 1, "units": "vacuum_half",
                               "matrix": [[0.4, 0], [0, 0.4]]}))
    assert run("validate", "-i", src) == EXIT_OK
    assert "unphysical" in capsys.readouterr().out
    src.write_text(json.dumps({"n_modes": 1, "units": "vacuum_half",
                               "matrix": [[1, 0], [0.5, 1]]}))
    assert run("validate", "-i", src) == EXIT_INPUT


# reproducibility and report-check ------------------------------------------------

def test_same_seed_byte_identical(tms_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert analyze(tms_file, a, "--seed", 3) == EXIT_OK
    assert analyze(tms_file, b, "--seed", 3) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert run("report-check", a, b) == EXIT_OK


def test_report_check_different_seeds(tms_file, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    analyze(tms_file, a, "--seed", 1)
    analyze(tms_file, b, "--seed", 2)
    assert run("report-check", a, b) == EXIT_DIFF
    assert "difference" in capsys.readouterr().out
    assert run("report-check", a, b, "--tolerance", 1e9) == EXIT_OK


def test_report_check_timestamp_ignored(tms_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("analyze", "-i", tms_file, "--out", a, "--seed", 1, *TINY)
    analyze(tms_file, b, "--seed", 1)
    assert run("report-check", a, b) == EXIT_OK


def test_report_check_schema_mismatch(tms_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    analyze(tms_file, a, "--targets", "K=1")
    analyze(tms_file, b, "--targets", "K=1,K=2")
    assert run("report-check", a, b) == EXIT_INPUT
    b.write_text(json.dumps({"schema": "other"}))
    assert run("report-check", a, b) == EXIT_INPUT


def test_entry_point_subprocess(tmp_path):
    out = tmp_path / "v.json"
    proc = subprocess.run([sys.executable, "-m", "gwit.cli", "synth", "vacuum", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "gwit.cli", "validate", "-i", str(tmp_path / "x")],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "error" in proc.stderr
