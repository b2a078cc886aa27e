import csv
import json
import subprocess
import sys

import pytest

from specrad import __version__
from specrad.cli import main

GRAPH = "1\t2\t1\n2\t3\t1\n3\t1\t2\n1\t3\t0.5\n"


@pytest.fixture
def graph(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text(GRAPH)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    assert code == 0, out
    return json.loads(out)


def test_toeplitz_example(capsys):
    d = run_json(capsys, "toeplitz", "--n", "25", "--sub", "1", "--super", "1")
    assert d["tool"] == "specrad" and d["version"] == __version__
    assert d["rho"] == 1.985418
    assert d["perron"]["kappa"] == 1.0
    assert "timings_seconds" not in d


def test_toeplitz_extras(capsys):
    d = run_json(capsys, "toeplitz", "--n", "10", "--sub", "0.1", "--super", "1", "--circulant", "--symmetrize", "--vectors")
    # with --circulant the headline radius is the completed cycle's
    assert d["rho"] == 1.1 and d["circulant"]["rho"] == 1.1
    assert d["perron"]["rho"] == 0.606837
    assert d["symmetrized_rho"] == pytest.approx(1.1 * 0.959493, abs=1e-6)
    assert len(d["perron"]["u"]) == 10


def test_analyze(capsys, graph):
    d = run_json(capsys, "analyze", graph)
    assert d["input"]["n"] == 3 and d["input"]["m"] == 4
    assert d["perron"]["converged"] is True
    full = run_json(capsys, "analyze", graph, "--precision", "full", "--timings")
    assert round(full["perron"]["rho"], 6) == d["perron"]["rho"]
    assert set(full["timings_seconds"]) >= {"load", "perron"}


def test_output_is_deterministic(capsys, graph):
    args = ("rank", graph, "--epsilon", "0.5", "--exact", "--threads", "1")
    assert run(capsys, *args) == run(capsys, *args)


def test_threads_from_environment(capsys, graph, monkeypatch):
    base = run(capsys, "rank", graph, "--epsilon", "0.5", "--exact", "--threads", "1")
    monkeypatch.setenv("SPECRAD_THREADS", "3")
    assert run(capsys, "rank", graph, "--epsilon", "0.5", "--exact") == base


def test_rank_formats(capsys, graph):
    d = run_json(capsys, "rank", graph, "--epsilon", "0.5", "--top-k", "2")
    assert len(d["plan"]["ranked"]) == 2
    alphas = [e["alpha"] for e in d["plan"]["ranked"]]
    assert alphas == sorted(alphas, reverse=True)
    code, out = run(capsys, "rank", graph, "--mode", "remove", "--output-format", "csv", "--index-base", "1")
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert rows and set(rows[0]) >= {"h", "k", "alpha", "preserves_irreducibility"}


def test_rank_errors(capsys, graph):
    code, out = run(capsys, "rank", graph, "--epsilon", "1.5")
    assert code == 1 and "negative weight" in json.loads(out)["error"]


def test_perturb(capsys, graph):
    d = run_json(capsys, "perturb", graph, "--kind", "sparsity_structured", "--epsilon", "0.01")
    r = d["report"]
    assert r["kappa_structured"] <= r["kappa_plain"]
    assert r["measured_increase"] == pytest.approx(r["predicted_increase"], rel=0.05)


def test_mask(capsys, tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("person_id,w_in,w_out\na,1,1\nb,0.5,0.5\nc,1,1\n")
    d = run_json(capsys, "mask", str(p), "--top-k", "1", "--exact")
    assert d["perron"]["rho"] == 0.707107
    top = d["plan"]["ranked"][0]
    assert top["exact_impact"] is not None and top["from_person"] in "abc"


def test_sis(capsys, tmp_path):
    p = tmp_path / "path.tsv"
    p.write_text("".join(f"{i}\t{i + 1}\t1\n{i + 1}\t{i}\t1\n" for i in range(1, 25)))
    d = run_json(capsys, "sis", str(p), "--delta", "1", "--sweep", "0.4:0.8:0.4", "--t-end", "100")
    assert [s["died_out"] for s in d["sweep"]] == [True, False]
    traj = tmp_path / "t.csv"
    d = run_json(capsys, "sis", str(p), "--delta", "1", "--beta", "0.8", "--t-end", "1", "--trajectory", str(traj))
    assert traj.read_text().startswith("t,s_1,")


def test_heatmap(capsys, tmp_path):
    out = tmp_path / "h.csv"
    d = run_json(capsys, "heatmap", "--n", "10", "--sub", "0.1", "--super", "1", "--kind", "wilkinson", "--out", str(out))
    assert (d["max_entry"]["row"], d["max_entry"]["col"]) == (10, 1)
    assert len(out.read_text().splitlines()) == 10


def test_missing_file(capsys):
    code, out = run(capsys, "analyze", "/nonexistent/graph.tsv")
    assert code == 1
    err = json.loads(out)
    assert err["error"].startswith("file not found")


def test_bad_input_reports_line(capsys, tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("1\t2\t1\n2\tx\t1\n")
    code, out = run(capsys, "analyze", str(p))
    assert code == 1 and "2" in json.loads(out)["error"]


def test_usage_errors_exit_2():
    r = subprocess.run([sys.executable, "-m", "specrad", "toeplitz", "--n", "5"], capture_output=True, text=True)
    assert r.returncode == 2 and "required" in r.stderr
    r = subprocess.run([sys.executable, "-m", "specrad", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
