"""Measure-preserving hypergraph simplification along a line-graph MST, with distance curves."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .coot import coot_distance
from .core import DistanceParams
from .errors import DisconnectedError, HypernetError, SolverError, ValidationError
from .hypergraph import CombinatorialHypergraph, ModelParams, build_hypernetwork, natural_key, pair_weight
from .ot import OtProblem, solve_exact


@dataclass
class SimplificationStep:
    index: int
    weight: Fraction | None
    merged: list
    hypergraph: CombinatorialHypergraph
    groups: dict  # simplified label -> original labels (hyperedges or nodes, by mode)
    distances: list = field(default_factory=list)
    min_distance: float | None = None

    def to_doc(self):
        return {
            "step": self.index,
            "merge_weight": None if self.weight is None else float(self.weight),
            "merge_weight_exact": None if self.weight is None else str(self.weight),
            "merged": self.merged,
            "n_hyperedges": len(self.hypergraph.hyperedges),
            "n_nodes": len(self.hypergraph.nodes),
            "hypergraph": self.hypergraph.to_doc(),
            "distances": list(self.distances),
            "min_distance": self.min_distance,
        }


@dataclass
class SimplificationTrace:
    original: CombinatorialHypergraph
    mode: str
    weight: str
    steps: list
    elbow_candidates: list = field(default_factory=list)
    no_elbow: bool = False

    @property
    def curve(self):
        return [s.min_distance for s in self.steps]

    def to_doc(self):
        return {
            "mode": self.mode,
            "weight": self.weight,
            "steps": [s.to_doc() for s in self.steps],
            "elbow": [{"step": i, "score": sc} for i, sc in self.elbow_candidates],
            "no_elbow": self.no_elbow,
        }

    def curve_csv(self):
        buf = io.StringIO()
        width = max((len(s.distances) for s in self.steps), default=0)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "merge_weight", "min_distance", "n_restarts"] + [f"restart_{k}" for k in range(width)])
        for s in self.steps:
            row = [s.index, "" if s.weight is None else repr(float(s.weight)),
                   "" if s.min_distance is None else repr(s.min_distance), len(s.distances)]
            writer.writerow(row + [repr(d) for d in s.distances])
        return buf.getvalue()


def mst_edges(sets, labels, weight):
    """Kruskal on the weighted line graph; ties broken by (weight, natural label order)."""
    cand = []
    order = {lab: k for k, lab in enumerate(labels)}
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            w = pair_weight(sets[i], sets[j], weight)
            if w is not None:
                a, b = sorted((labels[i], labels[j]), key=lambda s: (natural_key(s), order[s]))
                cand.append((w, natural_key(a), natural_key(b), labels[i], labels[j]))
    cand.sort(key=lambda t: t[:3])
    ds = DisjointSet(labels)
    tree = []
    for w, _, _, a, b in cand:
        if ds.merge(a, b):
            tree.append((w, a, b))
    if ds.n_subsets > 1:
        comps = [sorted(s, key=order.get) for s in ds.subsets()]
        comps.sort(key=lambda c: order[c[0]])
        raise DisconnectedError(
            "line graph is disconnected: " + "; ".join("{" + ", ".join(c) + "}" for c in comps),
            components=comps,
        )
    return tree


def _merge_edges(G: CombinatorialHypergraph, groups):
    edges, mult = {}, {}
    for members in groups:
        label = "+".join(members)
        edges[label] = frozenset().union(*(G.hyperedges[y] for y in members))
        mult[label] = sum(G.multiplicity[y] for y in members)
    return CombinatorialHypergraph(edges, G.nodes, G.node_weights, mult)


def simplification_sequence(G: CombinatorialHypergraph, mode="hyperedge", weight="jaccard") -> SimplificationTrace:
    """Cumulative merges along the MST, one step per distinct MST weight.

    In node mode the same procedure runs on the dual hypergraph and each
    step is dualized back. Merged elements carry multiplicities so the
    re-derived measures stay measure-preserving for exact duplicates.
    """
    if mode not in ("hyperedge", "node"):
        raise ValidationError("mode must be 'hyperedge' or 'node'", got=mode)
    if weight not in ("jaccard", "intersection"):
        raise ValidationError("weight must be 'jaccard' or 'intersection'", got=weight)
    base = G if mode == "hyperedge" else G.dual()
    labels = list(base.hyperedges)
    sets = [base.hyperedges[y] for y in labels]
    tree = mst_edges(sets, labels, weight)
    order = {lab: k for k, lab in enumerate(labels)}

    def groups_of(ds):
        gs = [sorted(s, key=order.get) for s in ds.subsets()]
        gs.sort(key=lambda g: order[g[0]])
        return gs

    def emit(index, w, merged, ds):
        gs = groups_of(ds)
        simp = _merge_edges(base, gs)
        if mode == "node":
            simp = simp.dual()
        return SimplificationStep(index, w, merged, simp, {"+".join(g): list(g) for g in gs})

    ds = DisjointSet(labels)
    steps = [emit(0, None, [], ds)]
    weights = sorted({w for w, _, _ in tree})
    for k, w in enumerate(weights, 1):
        touched = []
        for ww, a, b in tree:
            if ww == w:
                ds.merge(a, b)
                touched.append(a)
        merged = []
        seen = set()
        for a in touched:
            g = sorted(ds.subset(a), key=order.get)
            if g[0] not in seen:
                seen.add(g[0])
                merged.append(g)
        merged.sort(key=lambda g: order[g[0]])
        steps.append(emit(k, w, merged, ds))
    return SimplificationTrace(G, mode, weight, steps)


def _map_coupling(a, b, pairs):
    """Coupling of (a, b) putting maximal mass on the given (row, col) cells."""
    cost = np.ones((len(a), len(b)))
    for i, j in pairs:
        cost[i, j] = 0.0
    c, _ = solve_exact(OtProblem(a, b, cost))
    return c.matrix


def _warm_start(G0, H0, step: SimplificationStep, Hi, mode):
    inv = {}
    for new, olds in step.groups.items():
        for o in olds:
            inv[o] = new
    n_idx = {x: k for k, x in enumerate(Hi.node_ids)}
    e_idx = {y: k for k, y in enumerate(Hi.hyperedge_ids)}
    if mode == "hyperedge":
        npairs = [(k, n_idx[x]) for k, x in enumerate(H0.node_ids)]
        epairs = [(k, e_idx[inv[y]]) for k, y in enumerate(H0.hyperedge_ids)]
    else:
        npairs = [(k, n_idx[inv[x]]) for k, x in enumerate(H0.node_ids)]
        epairs = [(k, e_idx[y]) for k, y in enumerate(H0.hyperedge_ids)]
    return _map_coupling(H0.mu, Hi.mu, npairs), _map_coupling(H0.nu, Hi.nu, epairs)


def distance_curve(trace: SimplificationTrace, model: ModelParams | None = None,
                   dist_params: DistanceParams | None = None, warm_start=True) -> SimplificationTrace:
    """Fill d(H_0, H_i) for every step with all restart values and their minimum.

    With ``warm_start`` the coupling induced by the merge map is added as an
    extra start, so exact collapses are found at distance 0.
    """
    model = model or ModelParams()
    dist_params = dist_params or DistanceParams()
    H0 = build_hypernetwork(trace.original, model)
    p = dist_params.p

    def one(step):
        Hi = build_hypernetwork(step.hypergraph, model)
        init = [_warm_start(trace.original, H0, step, Hi, trace.mode)] if warm_start else None
        serial = DistanceParams(**{**dist_params.__dict__, "workers": 1})
        try:
            res = coot_distance(H0, Hi, serial, init=init)
        except HypernetError as exc:
            raise SolverError(f"step {step.index}: {exc}", step=step.index) from exc
        vals = [float(max(r.objective, 0.0) ** (1.0 / p)) if np.isfinite(p) else float("nan")
                for r in res.per_restart]
        return vals, float(res.distance)

    if dist_params.workers > 1:
        with ThreadPoolExecutor(max_workers=dist_params.workers) as pool:
            out = list(pool.map(one, trace.steps))
    else:
        out = [one(s) for s in trace.steps]
    for s, (vals, best) in zip(trace.steps, out):
        s.distances = vals
        s.min_distance = best
    if len(trace.steps) >= 3:
        el = detect_elbow(trace.curve)
        trace.elbow_candidates = el.candidates
        trace.no_elbow = el.no_elbow
    return trace


@dataclass
class Elbow:
    candidates: list
    no_elbow: bool


def detect_elbow(curve, top=3) -> Elbow:
    """Rank steps by the backward second difference c[i] - 2c[i-1] + c[i-2], i >= 2.

    Ties go to the lower index; if no score is positive the result is
    flagged as having no elbow.
    """
    c = np.asarray(curve, dtype=float)
    if c.ndim != 1 or c.size < 3:
        raise ValidationError("elbow detection needs a curve of length >= 3", length=int(c.size))
    scores = c[2:] - 2.0 * c[1:-1] + c[:-2]  # scores[k] belongs to step k + 2
    order = sorted(range(len(scores)), key=lambda k: (-scores[k], k))[:top]
    cands = [(k + 2, float(scores[k])) for k in order]
    thresh = 1e-12 * max(1.0, float(np.abs(c).max()))
    return Elbow(cands, bool(scores.max() <= thresh))
