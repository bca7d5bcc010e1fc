"""Combinatorial hypergraphs, their weighted line graphs and the mu/nu/omega modeling menu."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .core import MeasureHypernetwork, MeasureNetwork, normalize
from .errors import DisconnectedError, ParseError, ValidationError

MU_SCHEMES = ("uniform", "degree")
NU_SCHEMES = ("uniform", "degree_sum")
OMEGA_SCHEMES = ("incidence", "jaccard_sp", "intersection_sp", "overlap_sp")
WEIGHTS = ("jaccard", "intersection", "overlap")


def natural_key(label):
    s = str(label)
    return tuple((0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.findall(r"\d+|\D+", s))


class CombinatorialHypergraph:
    """Nodes plus named hyperedges (node subsets).

    ``node_weights`` and ``multiplicity`` default to 1 and record how many
    original nodes / hyperedges a simplified element stands for.
    """

    def __init__(self, hyperedges, nodes=None, node_weights=None, multiplicity=None):
        edges = {}
        for label, members in dict(hyperedges).items():
            members = frozenset(str(x) for x in members)
            if not members:
                raise ValidationError("empty hyperedge", hyperedge=label)
            edges[str(label)] = members
        if not edges:
            raise ValidationError("hypergraph has no hyperedges")
        used = set().union(*edges.values())
        if nodes is None:
            nodes = sorted(used, key=natural_key)
        nodes = [str(x) for x in nodes]
        if len(set(nodes)) != len(nodes):
            raise ValidationError("duplicate node labels")
        missing = used - set(nodes)
        if missing:
            raise ValidationError("hyperedge members not declared as nodes", nodes=sorted(missing, key=natural_key))
        self.nodes = tuple(nodes)
        self.hyperedges = edges
        self.node_weights = {x: 1 for x in nodes}
        if node_weights:
            self.node_weights.update({str(k): v for k, v in node_weights.items()})
        self.multiplicity = {y: 1 for y in edges}
        if multiplicity:
            self.multiplicity.update({str(k): v for k, v in multiplicity.items()})

    @property
    def edge_labels(self):
        return tuple(self.hyperedges)

    def incidence(self):
        idx = {x: i for i, x in enumerate(self.nodes)}
        inc = np.zeros((len(self.nodes), len(self.hyperedges)))
        for j, members in enumerate(self.hyperedges.values()):
            for x in members:
                inc[idx[x], j] = 1.0
        return inc

    def degree(self):
        """deg(x) = number of hyperedges containing x (counted with multiplicity)."""
        m = np.array([self.multiplicity[y] for y in self.hyperedges], dtype=float)
        return self.incidence() @ m

    def dual(self):
        """Swap roles: one hyperedge per node, holding the hyperedges that contain it."""
        members = {x: [] for x in self.nodes}
        for y, s in self.hyperedges.items():
            for x in s:
                members[x].append(y)
        empty = [x for x, v in members.items() if not v]
        if empty:
            raise ValidationError("isolated nodes have no dual hyperedge", nodes=empty)
        return CombinatorialHypergraph(members, nodes=list(self.hyperedges),
                                       node_weights=self.multiplicity, multiplicity=self.node_weights)

    def to_doc(self):
        doc = {
            "nodes": list(self.nodes),
            "hyperedges": {y: sorted(s, key=natural_key) for y, s in self.hyperedges.items()},
        }
        if any(v != 1 for v in self.node_weights.values()):
            doc["node_weights"] = {x: self.node_weights[x] for x in self.nodes}
        if any(v != 1 for v in self.multiplicity.values()):
            doc["multiplicity"] = {y: self.multiplicity[y] for y in self.hyperedges}
        return doc

    def __eq__(self, other):
        return isinstance(other, CombinatorialHypergraph) and self.to_doc() == other.to_doc()

    __hash__ = None

    def __repr__(self):
        return f"CombinatorialHypergraph(nodes={len(self.nodes)}, hyperedges={len(self.hyperedges)})"


@dataclass(frozen=True)
class ModelParams:
    mu_scheme: str = "degree"
    nu_scheme: str = "degree_sum"
    omega_scheme: str = "jaccard_sp"
    disconnected: str = "error"

    def __post_init__(self):
        if self.mu_scheme not in MU_SCHEMES:
            raise ValidationError("unknown mu scheme", got=self.mu_scheme)
        if self.nu_scheme not in NU_SCHEMES:
            raise ValidationError("unknown nu scheme", got=self.nu_scheme)
        if self.omega_scheme not in OMEGA_SCHEMES:
            raise ValidationError("unknown omega scheme", got=self.omega_scheme)
        if self.disconnected not in ("error", "fill"):
            raise ValidationError("disconnected must be 'error' or 'fill'")


def pair_weight(s, t, weight):
    """Exact edge weight between two overlapping node sets (None when disjoint)."""
    inter = len(s & t)
    if inter == 0:
        return None
    if weight == "jaccard":
        return Fraction(len(s | t), inter)
    if weight == "intersection":
        return Fraction(1, inter)
    if weight == "overlap":
        return Fraction(inter)
    raise ValidationError("unknown line-graph weight", got=weight)


def line_graph_weights(G: CombinatorialHypergraph, weight="jaccard"):
    """Dense matrix of exact weights as floats; 0 marks a non-edge and the diagonal."""
    sets = list(G.hyperedges.values())
    m = len(sets)
    W = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            w = pair_weight(sets[i], sets[j], weight)
            if w is not None:
                W[i, j] = W[j, i] = float(w)
    return W


def weighted_line_graph(G: CombinatorialHypergraph, weight="jaccard") -> MeasureNetwork:
    W = line_graph_weights(G, weight)
    m = W.shape[0]
    return MeasureNetwork(W, np.full(m, 1.0 / m), G.edge_labels)


def _components(W, labels):
    ncomp, lab = connected_components(csr_matrix(W), directed=False)
    return [[labels[i] for i in np.flatnonzero(lab == c)] for c in range(ncomp)]


def hyperedge_distances(G: CombinatorialHypergraph, weight="jaccard", disconnected="error"):
    """All-pairs shortest-path lengths on the weighted line graph."""
    W = line_graph_weights(G, weight)
    comps = _components(W, G.edge_labels)
    D = dijkstra(csr_matrix(W), directed=False)
    if len(comps) > 1:
        if disconnected == "error":
            raise DisconnectedError(
                "line graph is disconnected: " + "; ".join("{" + ", ".join(c) + "}" for c in comps),
                components=comps,
            )
        finite = D[np.isfinite(D)]
        D[~np.isfinite(D)] = (finite.max() if finite.size else 0.0) + 1.0
    return D


def _sp_omega(G, D):
    inc = G.incidence() > 0
    isolated = [G.nodes[i] for i in np.flatnonzero(~inc.any(axis=1))]
    if isolated:
        raise ValidationError("isolated nodes have no shortest-path relation", nodes=isolated)
    omega = np.empty(inc.shape)
    for i in range(inc.shape[0]):
        omega[i] = D[inc[i]].min(axis=0)
    return omega


def hyperedge_overlap_sp(G: CombinatorialHypergraph, disconnected="error"):
    """omega(x,y) = 0 if x in y, else the least total overlap size along a hyperedge path."""
    return _sp_omega(G, hyperedge_distances(G, "overlap", disconnected))


def build_hypernetwork(G: CombinatorialHypergraph, params: ModelParams | None = None) -> MeasureHypernetwork:
    params = params or ModelParams()
    inc = G.incidence()
    w = np.array([G.node_weights[x] for x in G.nodes], dtype=float)
    mult = np.array([G.multiplicity[y] for y in G.hyperedges], dtype=float)
    deg = inc @ mult
    if params.mu_scheme == "degree" or params.nu_scheme == "degree_sum":
        if np.any(deg == 0):
            bad = [G.nodes[i] for i in np.flatnonzero(deg == 0)]
            raise ValidationError("degree-based measures need every node in some hyperedge", nodes=bad)
    if params.mu_scheme == "uniform":
        mu = normalize(w)
    else:
        mu = normalize(w * deg)
    if params.nu_scheme == "uniform":
        nu = normalize(mult)
    else:
        nu = normalize(mult * (inc.T @ (w * deg)))
    if params.omega_scheme == "incidence":
        omega = inc
    else:
        weight = params.omega_scheme[: -len("_sp")]
        omega = _sp_omega(G, hyperedge_distances(G, weight, params.disconnected))
    return MeasureHypernetwork(omega, mu, nu, G.nodes, G.edge_labels)


# ---- file formats ----

def parse_hypergraph_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("hyperedges"), dict):
        raise ParseError("hypergraph JSON needs a 'hyperedges' object")
    for label, members in doc["hyperedges"].items():
        if not isinstance(members, list):
            raise ParseError(f"hyperedge '{label}' must list its nodes")
        if not members:
            raise ParseError(f"empty hyperedge '{label}'")
    return CombinatorialHypergraph(
        doc["hyperedges"], doc.get("nodes"), doc.get("node_weights"), doc.get("multiplicity")
    )


def parse_hypergraph_text(text):
    """One hyperedge per line: 'label: n1 n2 ...'. '#' starts a comment.

    An optional '!nodes n1 n2 ...' line declares the node order (and isolated nodes).
    """
    edges = {}
    nodes = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("!nodes"):
            nodes = line[len("!nodes"):].split()
            continue
        if ":" not in line:
            raise ParseError(f"line {lineno}: expected 'label: node ...'")
        label, rest = line.split(":", 1)
        label = label.strip()
        if not label:
            raise ParseError(f"line {lineno}: missing hyperedge label")
        members = rest.split()
        if not members:
            raise ParseError(f"line {lineno}: empty hyperedge '{label}'")
        if label in edges:
            raise ParseError(f"line {lineno}: duplicate hyperedge '{label}'")
        edges[label] = members
    if not edges:
        raise ParseError("no hyperedges found")
    return CombinatorialHypergraph(edges, nodes)


def dump_hypergraph_text(G: CombinatorialHypergraph):
    lines = ["!nodes " + " ".join(G.nodes)]
    for y, s in G.hyperedges.items():
        lines.append(f"{y}: " + " ".join(sorted(s, key=natural_key)))
    return "\n".join(lines) + "\n"


def load_hypergraph(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return parse_hypergraph_json(text)
    return parse_hypergraph_text(text)
