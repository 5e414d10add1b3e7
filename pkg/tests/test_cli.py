import json
import subprocess
import sys

import numpy as np
import pytest

from stablecluster.cli import dumps, main
from stablecluster.clustering import same_partition


@pytest.fixture
def instance(tmp_path):
    csv = tmp_path / "inst.csv"
    assert main(["generate", "--k", "3", "--n", "300", "--alpha", "6", "--seed", "1", "--out", str(csv)]) == 0
    return csv


def _solve(csv, out, *extra):
    return main(["solve", "--input", str(csv), "--k", "3", "--output", str(out), *extra])


def test_generate_then_verify(instance, tmp_path, capsys):
    capsys.readouterr()
    assert main(["verify", "--input", str(instance)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["center_proximity"]["certified_alpha"] >= 6


def test_dp_recovers_ground_truth(instance, tmp_path):
    out = tmp_path / "r.json"
    assert _solve(instance, out, "--algorithm", "dp", "--sidecar", str(instance.with_suffix(".json"))) == 0
    rec = json.loads(out.read_text())
    truth = json.loads(instance.with_suffix(".json").read_text())
    assert rec["algorithm"] == "dp" and set(rec["timings"]) == {"mst_ms", "dp_ms"}
    assert same_partition(rec["labels"], truth["labels"])
    assert rec["stability_certified"] is True


def test_no_timings_is_byte_identical(instance, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert _solve(instance, out, "--algorithm", "local", "--objective", "median", "--seed", "3",
                      "--no-timings") == 0
    assert a.read_bytes() == b.read_bytes()
    assert "timings" not in json.loads(a.read_text())


def test_cross_check_reports_agreement(tmp_path):
    csv = tmp_path / "small.csv"
    main(["generate", "--k", "3", "--n", "12", "--alpha", "6", "--seed", "2", "--out", str(csv)])
    out = tmp_path / "r.json"
    assert _solve(csv, out, "--objective", "median", "--metric", "l1", "--cross-check") == 0
    check = json.loads(out.read_text())["cross_check"]
    assert check["oracle_run"] and check["agrees"]


def test_merge_tree_dump(instance, tmp_path):
    tree = tmp_path / "tree.json"
    assert _solve(instance, tmp_path / "r.json", "--dump-merge-tree", str(tree)) == 0
    data = json.loads(tree.read_text())
    assert data["n"] == 300 and len(data["nodes"]) == 599


@pytest.mark.parametrize("argv,code", [
    (["--k", "400"], 2),
    (["--k", "0"], 2),
    (["--k", "3", "--algorithm", "dp", "--engine", "naive"], 2),
    (["--k", "3", "--algorithm", "local", "--engine", "accelerated", "--metric", "euclidean",
      "--objective", "median"], 2),
    (["--k", "3", "--objective", "center", "--metric", "euclidean"], 2),
    (["--k", "20", "--algorithm", "oracle"], 2),
])
def test_parameter_errors_exit_2(instance, argv, code):
    assert main(["solve", "--input", str(instance), *argv]) == code


def test_io_errors_exit_3(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    assert main(["solve", "--input", str(bad), "--k", "1"]) == 3
    assert main(["solve", "--input", str(tmp_path / "missing.csv"), "--k", "1"]) == 3


def test_unknown_flag_is_rejected():
    with pytest.raises(SystemExit) as err:
        main(["solve", "--bogus"])
    assert err.value.code == 2


def test_threads_env_fallback(instance, tmp_path, monkeypatch):
    monkeypatch.setenv("STABLE_CLUSTER_THREADS", "0")
    assert _solve(instance, tmp_path / "r.json", "--algorithm", "local", "--objective", "median") == 2


def test_bench_table_and_json(tmp_path, capsys):
    out = tmp_path / "bench.json"
    assert main(["bench", "--k", "3", "--n", "500,1000", "--repeats", "2", "--local-n", "60",
                 "--output", str(out)]) == 0
    table = capsys.readouterr().out
    assert "median_ms" in table and "local search n=60" in table
    rec = json.loads(out.read_text())
    assert [r["n"] for r in rec["rows"]] == [500, 1000]
    assert all(r["insertions"] <= r["bound"] for r in rec["rows"])
    assert rec["local_search"][0]["within"]


def test_dumps_uses_17_significant_digits():
    text = dumps({"x": 0.1, "y": [1.0 / 3.0, float("inf")], "n": np.int64(4), "ok": True})
    assert '"x": 0.10000000000000001' in text
    assert "0.33333333333333331" in text and '"inf"' in text and '"n": 4' in text
    assert json.loads(text)["y"][0] == 1.0 / 3.0


def test_module_entry_point(instance):
    proc = subprocess.run([sys.executable, "-m", "stablecluster", "verify", "--input", str(instance)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["passed"]
