import json
import math
from pathlib import Path

import numpy as np
import pytest

from hypernet.cli import main
from hypernet.core import MeasureHypernetwork
from hypernet import serialize

from graphs import knn_graph, relabeled_copy

FIX = Path(__file__).resolve().parent.parent / "fixtures"


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_build_five_node_incidence(capsys):
    code, out, _ = run(["build", FIX / "five_node.txt", "--mu", "uniform", "--nu", "uniform", "--omega", "incidence"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["omega"] == [[1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 1, 1, 1], [0, 0, 1, 0]]
    assert doc["nodes"] == ["1", "2", "3", "4", "5"] and doc["hyperedges"] == ["a", "b", "c", "d"]


def test_build_roundtrip_bytes(tmp_path, capsys):
    out = tmp_path / "h.json"
    assert run(["build", FIX / "five_node.txt", "--out", out], capsys)[0] == 0
    text = out.read_text()
    assert serialize.dumps(MeasureHypernetwork.from_doc(json.loads(text)).to_doc()) == text


def test_build_empty_hyperedge(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("a: 1 2\nb:\n")
    code, out, err = run(["build", bad], capsys)
    assert code == 2 and out == ""
    assert err.startswith("E_PARSE:") and "'b'" in err and "line 2" in err


def test_build_disconnected(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("a: 1 2\nb: 3 4\n")
    code, _, err = run(["build", g], capsys)
    assert code == 2 and err.startswith("E_DISCONNECTED:")
    assert run(["build", g, "--fill-disconnected"], capsys)[0] == 0


def test_missing_file(capsys):
    code, _, err = run(["build", "/nonexistent/file.txt"], capsys)
    assert code == 2 and err.startswith("E_IO:")


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["build", "x", "--bogus"])
    assert exc.value.code == 2


def test_bad_flag_value_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["dist", "a", "b", "--p", "0.5"])
    with pytest.raises(SystemExit):
        main(["dist", "a", "b", "--restarts", "0"])


def test_dist_self_zero(capsys):
    code, out, _ = run(["dist", FIX / "weak_a.json", FIX / "weak_a.json"], capsys)
    assert code == 0 and json.loads(out)["distance"] < 1e-8


def test_dist_h_alpha_fixture(capsys):
    code, out, _ = run(["dist", FIX / "h_alpha4.json", FIX / "h_alpha1.json"], capsys)
    assert abs(json.loads(out)["distance"] - 3 / math.sqrt(2)) < 1e-6
    code, out, _ = run(["dist", FIX / "h_alpha4.json", FIX / "h_alpha1.json", "--bruteforce", "--p", "1"], capsys)
    doc = json.loads(out)
    assert abs(doc["distance"] - 1.5) <= 1e-12 and doc["certified"] is True


def test_dist_inf(capsys):
    code, out, _ = run(["dist", FIX / "weak_a.json", FIX / "weak_b.json", "--p", "inf"], capsys)
    doc = json.loads(out)
    assert doc["p"] == "inf" and doc["certified"] is False


def test_dist_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    code, _, err = run(["dist", bad, bad], capsys)
    assert code == 2 and err.startswith("E_PARSE:")


def test_match_pies(capsys):
    code, out, _ = run(["match", FIX / "five_node.txt", FIX / "five_node.txt", "--restarts", "3"], capsys)
    doc = json.loads(out)
    assert doc["distance"] < 1e-8
    for pie in list(doc["node_pie"].values()) + list(doc["hyperedge_pie"].values()):
        assert abs(sum(pie.values()) - 1) < 1e-12
    assert set(doc["node_match"]) == {"1", "2", "3", "4", "5"}


def test_graphify_maps(tmp_path, capsys):
    for m, n in (("B", 4), ("Qq", 2), ("Lq", 2), ("Lmp", 2)):
        code, out, _ = run(["graphify", FIX / "h_alpha2.json", "--map", m], capsys)
        doc = json.loads(out)
        assert code == 0 and len(doc["nodes"]) == n
        if m == "B":
            assert doc["bipartite_labels"] == ["X", "X", "Y", "Y"]
        if m == "Lmp":
            assert doc["omega"] == [[2.0, 0.0], [0.0, 2.0]]


def test_simplify_outputs(tmp_path, capsys):
    tr, csv = tmp_path / "t.json", tmp_path / "c.csv"
    code, _, _ = run(["simplify", FIX / "five_node.txt", "--restarts", "2", "--out", tr, "--curve-out", csv], capsys)
    assert code == 0
    doc = json.loads(tr.read_text())
    assert doc["steps"][0]["min_distance"] <= 1e-8
    assert csv.read_text().startswith("step,merge_weight,min_distance,n_restarts")


def test_multiscale_with_truth(tmp_path, capsys):
    G = knn_graph(0, n=12)
    H, truth = relabeled_copy(G, 0)
    a, b, t = tmp_path / "a.txt", tmp_path / "b.txt", tmp_path / "truth.tsv"
    a.write_text("".join(f"{u} {v}\n" for u, v in G.edges))
    b.write_text("".join(f"{u} {v}\n" for u, v in H.edges))
    t.write_text("".join(f"{x}\t{y}\n" for x, y in truth.items()))
    tsv = tmp_path / "m.tsv"
    code, out, err = run(["multiscale", a, b, "--n-alpha", "4", "--seed-order", "heat", "--truth", t,
                          "--match-tsv", tsv], capsys)
    assert code == 0, err
    doc = json.loads(out)
    assert doc["match"]["objective"] <= 1e-6
    assert 0 <= doc["accuracy"]["exact_rate"] <= 1
    assert tsv.read_text().startswith("source\ttarget\tmass\n")


def test_help_documents_flags(capsys):
    with pytest.raises(SystemExit):
        main(["dist", "--help"])
    out = capsys.readouterr().out
    for flag in ("--p", "--solver", "--eps", "--restarts", "--max-iter", "--tol", "--seed"):
        assert flag in out
