"""Command-line entry point: build, dist, match, graphify, simplify, multiscale."""
from __future__ import annotations

import argparse
import json
import sys

from . import serialize
from .coot import coot_distance, coot_distance_bruteforce
from .core import DistanceParams, MeasureHypernetwork, parse_order
from .errors import HypernetError, ParseError
from .graphify import graphify
from .hypergraph import ModelParams, build_hypernetwork, load_hypergraph
from .multiscale import hard_match, iterated_nerve, load_graph, match_accuracy, multiscale_match
from .simplify import distance_curve, simplification_sequence

MU = {"uniform": "uniform", "degree": "degree"}
NU = {"uniform": "uniform", "degsum": "degree_sum"}
OMEGA = {"incidence": "incidence", "jaccard": "jaccard_sp", "intersection": "intersection_sp", "overlap": "overlap_sp"}


def _order(text):
    try:
        return parse_order(text)
    except HypernetError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _add_model(p):
    g = p.add_argument_group("hypernetwork model")
    g.add_argument("--mu", choices=sorted(MU), default="degree",
                   help="node measure: uniform, or node degree normalized to 1 (default: degree)")
    g.add_argument("--nu", choices=sorted(NU), default="degsum",
                   help="hyperedge measure: uniform, or sum of member degrees normalized (default: degsum)")
    g.add_argument("--omega", choices=sorted(OMEGA), default="jaccard",
                   help="relation: incidence 0/1, or shortest path on the line graph weighted by "
                        "reciprocal Jaccard index |y u y'|/|y n y'|, reciprocal intersection size, "
                        "or overlap size (default: jaccard)")
    g.add_argument("--fill-disconnected", action="store_true",
                   help="on a disconnected line graph use max finite distance + 1 instead of failing")


def _add_dist(p):
    g = p.add_argument_group("distance solver")
    g.add_argument("--p", type=_order, default=2.0, help="order p >= 1 or 'inf' (default: 2)")
    g.add_argument("--solver", choices=["exact", "entropic"], default="exact",
                   help="inner OT solver: exact network simplex or entropic Sinkhorn (default: exact)")
    g.add_argument("--eps", type=_positive_float, default=1e-2, help="entropic regularization (default: 0.01)")
    g.add_argument("--restarts", type=_positive_int, default=10,
                   help="restart 0 uses product couplings, the rest seeded random couplings (default: 10)")
    g.add_argument("--max-iter", type=_positive_int, default=200, help="descent iterations per restart (default: 200)")
    g.add_argument("--tol", type=_positive_float, default=1e-8,
                   help="stop when the relative objective improvement falls below this (default: 1e-8)")
    g.add_argument("--seed", type=_seed, default=0, help="64-bit seed for random restarts (default: 0)")


def _model(args):
    return ModelParams(MU[args.mu], NU[args.nu], OMEGA[args.omega],
                       "fill" if args.fill_disconnected else "error")


def _dparams(args):
    return DistanceParams(p=args.p, solver=args.solver, epsilon=args.eps, restarts=args.restarts,
                          max_iter=args.max_iter, tol=args.tol, seed=args.seed)


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_hypernetwork(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return MeasureHypernetwork.from_doc(doc)


def cmd_build(args):
    G = load_hypergraph(args.input)
    H = build_hypernetwork(G, _model(args))
    _emit(serialize.dumps(H.to_doc()), args.out)


def cmd_dist(args):
    H1, H2 = _load_hypernetwork(args.a), _load_hypernetwork(args.b)
    if args.bruteforce:
        res = coot_distance_bruteforce(H1, H2, args.p)
    else:
        res = coot_distance(H1, H2, _dparams(args))
    _emit(serialize.dumps(res.to_doc()), args.out)


def _pie(P, src, tgt):
    """Per-target breakdown of incoming mass over source labels (columns normalized)."""
    out = {}
    for j, t in enumerate(tgt):
        col = P[:, j]
        tot = col.sum()
        out[t] = {s: float(col[i] / tot) for i, s in enumerate(src) if col[i] > 0}
    return out


def cmd_match(args):
    model = _model(args)
    H1 = build_hypernetwork(load_hypergraph(args.a), model)
    H2 = build_hypernetwork(load_hypergraph(args.b), model)
    res = coot_distance(H1, H2, _dparams(args))
    doc = res.to_doc()
    doc["nodes"] = {"source": list(H1.node_ids), "target": list(H2.node_ids)}
    doc["hyperedges"] = {"source": list(H1.hyperedge_ids), "target": list(H2.hyperedge_ids)}
    doc["node_pie"] = _pie(res.pi, H1.node_ids, H2.node_ids)
    doc["hyperedge_pie"] = _pie(res.xi, H1.hyperedge_ids, H2.hyperedge_ids)
    doc["node_match"] = hard_match(res.pi, H1.node_ids, H2.node_ids).mapping
    doc["hyperedge_match"] = hard_match(res.xi, H1.hyperedge_ids, H2.hyperedge_ids).mapping
    _emit(serialize.dumps(doc), args.out)


def cmd_graphify(args):
    H = _load_hypernetwork(args.input)
    q = args.q if args.q is not None else float("inf")
    net = graphify(H, args.map, q)
    _emit(serialize.dumps(net.to_doc()), args.out)


def cmd_simplify(args):
    G = load_hypergraph(args.input)
    trace = simplification_sequence(G, args.mode, args.weight)
    distance_curve(trace, _model(args), _dparams(args))
    _emit(serialize.dumps(trace.to_doc()), args.out)
    if args.curve_out:
        _emit(trace.curve_csv(), args.curve_out)


def _load_truth(path):
    truth = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{path} line {lineno}: expected 'source target'")
            truth[parts[0]] = parts[1]
    return truth


def cmd_multiscale(args):
    GA, GB = load_graph(args.a), load_graph(args.b)
    kw = dict(t_override=args.t_override, seed_order=args.seed_order, rng_seed=args.seed)
    sA = iterated_nerve(GA, args.n_alpha, **kw)
    sB = iterated_nerve(GB, args.n_alpha, **kw)
    m = multiscale_match(sA, sB, _model(args), _dparams(args))
    hm = hard_match(m.couplings[0], GA.nodes, GB.nodes)
    doc = {"covers": {"a": sA.to_doc(), "b": sB.to_doc()}, "match": m.to_doc(), "hard_match": hm.mapping,
           "low_confidence": hm.low_confidence}
    if args.truth:
        truth = _load_truth(args.truth)
        acc = match_accuracy(hm, truth, GB)
        doc["accuracy"] = {"exact_rate": acc.exact_rate, "mean_graph_distance": acc.mean_graph_distance,
                           "unreachable": acc.unreachable}
    _emit(serialize.dumps(doc), args.out)
    if args.match_tsv:
        _emit(hm.to_tsv(), args.match_tsv)


def build_parser():
    parser = argparse.ArgumentParser(prog="hypernet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="hypergraph file -> hypernetwork JSON")
    p.add_argument("input", help="hypergraph as JSON {'hyperedges': {...}} or text lines 'label: n1 n2'")
    p.add_argument("--out", help="output path (default: stdout)")
    _add_model(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("dist", help="distance between two hypernetwork JSON files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out")
    p.add_argument("--bruteforce", action="store_true", help="exact vertex enumeration (tiny inputs only)")
    _add_dist(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("match", help="soft matching of two hypergraphs with per-target mass breakdowns")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out")
    _add_model(p)
    _add_dist(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("graphify", help="hypernetwork JSON -> network JSON")
    p.add_argument("input")
    p.add_argument("--map", choices=["B", "Qq", "Lq", "Lmp"], required=True,
                   help="B bipartite incidence, Qq q-clique expansion, Lq q-line graph, Lmp matrix-product line graph")
    p.add_argument("--q", type=_order, default=None, help="order q >= 1 or 'inf' for Qq/Lq (default: inf)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graphify)

    p = sub.add_parser("simplify", help="MST-based simplification with distance curve and elbow")
    p.add_argument("input")
    p.add_argument("--mode", choices=["hyperedge", "node"], default="hyperedge")
    p.add_argument("--weight", choices=["jaccard", "intersection"], default="jaccard",
                   help="line-graph weight used for the spanning tree")
    p.add_argument("--out", help="trace JSON path (default: stdout)")
    p.add_argument("--curve-out", help="curve CSV path")
    _add_model(p)
    _add_dist(p)
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("multiscale", help="iterated nerve covers of two graphs and cyclic multiscale matching")
    p.add_argument("a", help="edge list 'u v [w]' or graph JSON")
    p.add_argument("b")
    p.add_argument("--n-alpha", type=_positive_int, default=10, help="stop reducing below this many nodes")
    p.add_argument("--t-override", type=_positive_float, default=None,
                   help="diffusion time for every level (default: log10 of the level's node count)")
    p.add_argument("--seed-order", choices=["label", "random", "heat"], default="label",
                   help="cover seed choice among unvisited nodes")
    p.add_argument("--truth", help="TSV 'source target' ground truth for accuracy")
    p.add_argument("--match-tsv", help="write hard matches as TSV")
    p.add_argument("--out")
    _add_model(p)
    _add_dist(p)
    p.set_defaults(func=cmd_multiscale)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except HypernetError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
