"""Heat-kernel covers, iterated nerve graphs and cyclic multiscale matching."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.sparse import csr_matrix, diags, identity
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.sparse.linalg import eigsh

from .coot import RestartRecord, cost_for_pi, cost_for_xi, random_coupling, restart_rng
from .core import DistanceParams, MeasureHypernetwork, as_matrix
from .errors import DisconnectedError, ParseError, SolverError, ValidationError, HypernetError
from .hypergraph import CombinatorialHypergraph, ModelParams, build_hypernetwork, natural_key
from .ot import solve

DENSE_LIMIT = 2000
EIG_BUDGET = 300


class SimpleGraph:
    """Undirected graph with positive edge weights (default 1) and no self-loops."""

    def __init__(self, nodes, edges):
        self.nodes = tuple(str(x) for x in nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise ValidationError("duplicate node labels")
        if not self.nodes:
            raise ValidationError("graph has no nodes")
        idx = {x: i for i, x in enumerate(self.nodes)}
        self.edges = {}
        for e in edges:
            u, v = str(e[0]), str(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if u == v:
                raise ValidationError("self-loop", node=u)
            if u not in idx or v not in idx:
                raise ValidationError("edge endpoint not declared", edge=(u, v))
            if not w > 0 or not math.isfinite(w):
                raise ValidationError("edge weights must be positive", edge=(u, v), weight=w)
            key = (u, v) if idx[u] < idx[v] else (v, u)
            self.edges[key] = w
        self._idx = idx

    @property
    def n(self):
        return len(self.nodes)

    def adjacency(self):
        A = np.zeros((self.n, self.n))
        for (u, v), w in self.edges.items():
            i, j = self._idx[u], self._idx[v]
            A[i, j] = A[j, i] = w
        return A

    def sparse_adjacency(self):
        if not self.edges:
            return csr_matrix((self.n, self.n))
        rows, cols, vals = [], [], []
        for (u, v), w in self.edges.items():
            i, j = self._idx[u], self._idx[v]
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
        return csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def components(self):
        ncomp, lab = connected_components(self.sparse_adjacency(), directed=False)
        return [[self.nodes[i] for i in np.flatnonzero(lab == c)] for c in range(ncomp)]

    def relabel(self, mapping):
        return SimpleGraph([mapping[x] for x in self.nodes],
                           [(mapping[u], mapping[v], w) for (u, v), w in self.edges.items()])

    def to_doc(self):
        return {"nodes": list(self.nodes), "edges": [[u, v, w] for (u, v), w in self.edges.items()]}

    @classmethod
    def from_doc(cls, doc):
        try:
            return cls(doc["nodes"], [tuple(e) for e in doc["edges"]])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed graph document: {exc}") from None


def parse_edge_list(text, nodes=None):
    """Whitespace edge list 'u v [w]', '#' comments; nodes in natural label order."""
    edges = []
    seen = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"line {lineno}: expected 'u v [w]'")
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise ParseError(f"line {lineno}: bad weight '{parts[2]}'") from None
            edges.append((parts[0], parts[1], w))
        else:
            edges.append((parts[0], parts[1]))
        seen += parts[:2]
    if not edges:
        raise ParseError("no edges found")
    if nodes is None:
        nodes = sorted(set(seen), key=natural_key)
    return SimpleGraph(nodes, edges)


def load_graph(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            return SimpleGraph.from_doc(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_edge_list(text)


# ---- Step 1: covers ----

@dataclass
class HeatKernel:
    phi: np.ndarray
    lam: np.ndarray
    t: float

    def column(self, i):
        return self.phi @ (np.exp(-self.t * self.lam) * self.phi[i])

    def diagonal(self):
        return (self.phi**2) @ np.exp(-self.t * self.lam)


def normalized_laplacian(G: SimpleGraph):
    A = G.sparse_adjacency()
    d = np.asarray(A.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(d)
    return identity(G.n, format="csr") - diags(dinv) @ A @ diags(dinv)


def heat_kernel(G: SimpleGraph, t: float, eig_budget=EIG_BUDGET, dense_limit=DENSE_LIMIT) -> HeatKernel:
    """K^t = Phi exp(-t Lambda) Phi^T; truncated to the eig_budget smallest
    Laplacian eigenvalues (largest kernel eigenvalues) above dense_limit nodes."""
    L = normalized_laplacian(G)
    if G.n <= dense_limit:
        lam, phi = eigh(L.toarray())
    else:
        k = min(eig_budget, G.n - 2)
        lam, phi = eigsh(L, k=k, which="SA")
    return HeatKernel(phi, lam, t)


def heat_kernel_cover(G: SimpleGraph, t: float | None = None, eig_budget=EIG_BUDGET, rng_seed=None,
                      seed_order="label", prefix="c", dense_limit=DENSE_LIMIT):
    """FWHM-style cover from heat diffusion around successive seed nodes.

    Each seed x gives v = K^t delta_x; {v >= max(v)/2} is marked visited and
    {v >= max(v)/4} becomes a cover element. Seeds are chosen among unvisited
    nodes by natural label order ('label'), a seeded shuffle ('random'), or
    largest heat-kernel diagonal ('heat', independent of labels).
    Returns (cover dict label -> frozenset of node labels, nerve SimpleGraph).
    """
    if t is None:
        t = math.log10(G.n)
    if not t > 0:
        raise ValidationError("diffusion time must be > 0", t=t)
    comps = G.components()
    if len(comps) > 1:
        raise DisconnectedError("graph is disconnected", components=comps)
    K = heat_kernel(G, t, eig_budget, dense_limit)
    n = G.n
    if seed_order == "label":
        order = sorted(range(n), key=lambda i: natural_key(G.nodes[i]))
    elif seed_order == "random":
        order = list(np.random.default_rng(rng_seed).permutation(n))
    elif seed_order == "heat":
        diag = K.diagonal()
        order = sorted(range(n), key=lambda i: (-round(float(diag[i]), 12), natural_key(G.nodes[i])))
    else:
        raise ValidationError("seed_order must be 'label', 'random' or 'heat'", got=seed_order)
    visited = np.zeros(n, bool)
    elements = []
    for x in order:
        if visited[x]:
            continue
        v = K.column(x)
        top = v.max()
        visited |= v >= top / 2.0
        visited[x] = True
        elem = v >= top / 4.0
        elem[x] = True
        key = frozenset(np.flatnonzero(elem).tolist())
        if key not in {frozenset(e) for e in elements}:
            elements.append(sorted(key))
    cover = {f"{prefix}{k}": frozenset(G.nodes[i] for i in e) for k, e in enumerate(elements)}
    return cover, nerve_graph(cover)


def nerve_graph(cover):
    labels = list(cover)
    edges = []
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            if cover[labels[i]] & cover[labels[j]]:
                edges.append((labels[i], labels[j]))
    return SimpleGraph(labels, edges)


@dataclass
class CoverLevel:
    graph: SimpleGraph
    cover: dict | None  # label -> subset of the previous level's nodes
    t: float | None = None


@dataclass
class CoverSequence:
    levels: list
    stop_reason: str = ""

    @property
    def depth(self):
        return len(self.levels) - 1

    def cover_hypergraphs(self):
        """Level i cover as a hypergraph on level i nodes, i = 0 .. depth-1."""
        out = []
        for prev, cur in zip(self.levels, self.levels[1:]):
            out.append(CombinatorialHypergraph(cur.cover, nodes=prev.graph.nodes))
        return out

    def to_doc(self):
        return {
            "stop_reason": self.stop_reason,
            "levels": [
                {
                    "n_nodes": lv.graph.n,
                    "t": lv.t,
                    "graph": lv.graph.to_doc(),
                    "cover": None if lv.cover is None else {k: sorted(s, key=natural_key) for k, s in lv.cover.items()},
                }
                for lv in self.levels
            ],
        }


def iterated_nerve(G: SimpleGraph, n_alpha: int, t_override=None, eig_budget=EIG_BUDGET,
                   seed_order="label", rng_seed=None) -> CoverSequence:
    """Repeat cover + nerve with t = log10 |V| until fewer than n_alpha nodes remain.

    Also stops (recording why) when a cover no longer reduces the node count
    or its nerve is disconnected; such a level is not appended.
    """
    if int(n_alpha) < 1:
        raise ValidationError("n_alpha must be >= 1")
    comps = G.components()
    if len(comps) > 1:
        raise DisconnectedError("graph is disconnected", components=comps)
    levels = [CoverLevel(G, None)]
    reason = ""
    while True:
        cur = levels[-1].graph
        if cur.n < n_alpha:
            reason = "below_threshold"
            break
        t = t_override if t_override is not None else math.log10(cur.n)
        if not t > 0:
            reason = "single_node"
            break
        cover, nerve = heat_kernel_cover(cur, t, eig_budget, rng_seed, seed_order, prefix=f"L{len(levels)}c")
        if nerve.n >= cur.n:
            reason = "no_reduction"
            break
        if len(nerve.components()) > 1:
            reason = "disconnected_nerve"
            break
        levels.append(CoverLevel(nerve, cover, t))
    return CoverSequence(levels, reason)


# ---- Step 2: cyclic matching ----

@dataclass
class MultiscaleMatch:
    couplings: list  # interface matrices C_0 .. C_{k+1}
    objectives: list
    level_costs: list
    per_restart: list = field(default_factory=list)
    padded: bool = False
    hypernetworks: tuple = ()

    @property
    def pis(self):
        return self.couplings[:-1]

    @property
    def xis(self):
        return self.couplings[1:]

    @property
    def objective(self):
        return float(sum(self.level_costs))

    def to_doc(self):
        return {
            "objective": self.objective,
            "level_costs": list(self.level_costs),
            "objectives": list(self.objectives),
            "padded": self.padded,
            "pi": [c.tolist() for c in self.pis],
            "xi": [c.tolist() for c in self.xis],
            "restarts": [r.to_doc() for r in self.per_restart],
        }


def _pad(hgs, depth):
    hgs = list(hgs)
    while len(hgs) < depth:
        nodes = list(hgs[-1].hyperedges) if hgs else None
        hgs.append(CombinatorialHypergraph({f"pad{len(hgs)}": nodes}, nodes=nodes))
    return hgs


def level_hypernetworks(seq: CoverSequence, model: ModelParams, depth=None):
    """Hypernetworks H_0..H_k with mu_{i+1} replaced by nu_i so interfaces share marginals."""
    hgs = seq.cover_hypergraphs()
    if not hgs:
        g = seq.levels[0].graph
        hgs = [CombinatorialHypergraph({"pad0": list(g.nodes)}, nodes=g.nodes)]
    if depth is not None:
        hgs = _pad(hgs, depth)
    out = []
    for i, hg in enumerate(hgs):
        H = build_hypernetwork(hg, model)
        if i > 0:
            prev = out[-1]
            if tuple(prev.hyperedge_ids) != tuple(H.node_ids):
                raise ValidationError("level dimension mismatch between a cover and the next level", level=i)
            H = MeasureHypernetwork(H.omega, prev.nu, H.nu, H.node_ids, H.hyperedge_ids)
        out.append(H)
    return out


def _level_depth(seq):
    return max(1, len(seq.levels) - 1)


def _objective(Hs, Hs2, C, p):
    costs = []
    for i, (A, B) in enumerate(zip(Hs, Hs2)):
        costs.append(float(np.sum(np.maximum(cost_for_pi(A.omega, B.omega, C[i + 1], p), 0.0) * C[i])))
    return costs


def _sweeps(Hs, Hs2, C, p, params):
    k = len(Hs) - 1
    marg = [(Hs[0].mu, Hs2[0].mu)] + [(H.nu, H2.nu) for H, H2 in zip(Hs, Hs2)]

    def update(j):
        M = np.zeros((len(marg[j][0]), len(marg[j][1])))
        if j >= 1:
            M += cost_for_xi(Hs[j - 1].omega, Hs2[j - 1].omega, C[j - 1], p)
        if j <= k:
            M += cost_for_pi(Hs[j].omega, Hs2[j].omega, C[j + 1], p)
        C[j], _ = solve(marg[j][0], marg[j][1], np.maximum(M, 0.0), params.solver, params.epsilon)

    obj = sum(_objective(Hs, Hs2, C, p))
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        for j in range(1, k + 2):
            update(j)
        for j in range(k, -1, -1):
            update(j)
        new = sum(_objective(Hs, Hs2, C, p))
        trace.append(new)
        if obj - new <= params.tol * obj or new == 0.0:
            obj = min(obj, new)
            converged = True
            break
        obj = new
    return C, obj, RestartRecord(obj, it, converged, trace)


def multiscale_match(seqA: CoverSequence, seqB: CoverSequence, model: ModelParams | None = None,
                     params: DistanceParams | None = None, initial=None) -> MultiscaleMatch:
    """Cyclic block-coordinate descent over the shared interface couplings.

    C_0 = pi_0, C_j = xi_{j-1} = pi_j, C_{k+1} = xi_k. A left-to-right pass
    updates C_1..C_{k+1}, a right-to-left pass C_k..C_0; each update is an
    exact OT on the summed cost from both adjacent levels, so the total
    objective (sum of per-level distortions^p) never increases.
    ``initial`` is a list of interface lists tried before the product start.
    """
    model = model or ModelParams()
    params = params or DistanceParams()
    p = 2.0 if math.isinf(params.p) else params.p
    depth = max(_level_depth(seqA), _level_depth(seqB))
    padded = _level_depth(seqA) != _level_depth(seqB)
    Hs = level_hypernetworks(seqA, model, depth)
    Hs2 = level_hypernetworks(seqB, model, depth)
    marg = [(Hs[0].mu, Hs2[0].mu)] + [(H.nu, H2.nu) for H, H2 in zip(Hs, Hs2)]

    starts = []
    for init in initial or []:
        if len(init) != len(marg):
            raise ValidationError("initial couplings must cover every interface", expected=len(marg), got=len(init))
        starts.append([as_matrix(c, a, b).copy() for c, (a, b) in zip(init, marg)])
    starts.append([np.outer(a, b) for a, b in marg])
    for r in range(1, params.restarts):
        rng = restart_rng(params.seed, r)
        starts.append([random_coupling(rng, a, b) for a, b in marg])

    results = []
    for r, C0 in enumerate(starts):
        try:
            results.append(_sweeps(Hs, Hs2, list(C0), p, params))
        except HypernetError as exc:
            raise SolverError(f"restart {r} failed: {exc}", restart=r) from exc
    best = min(range(len(results)), key=lambda r: (results[r][1], r))
    C, _, rec = results[best]
    return MultiscaleMatch(C, rec.trace, _objective(Hs, Hs2, C, p), [x[2] for x in results], padded,
                           (tuple(Hs), tuple(Hs2)))


def identity_couplings(Hs):
    """Diagonal interface couplings for matching a level stack against itself."""
    out = [np.diag(Hs[0].mu)]
    for H in Hs:
        out.append(np.diag(H.nu))
    return out


# ---- evaluation ----

@dataclass
class HardMatch:
    mapping: dict
    mass: dict
    low_confidence: list

    def to_tsv(self):
        lines = ["source\ttarget\tmass"]
        for x, y in self.mapping.items():
            lines.append(f"{x}\t{y}\t{self.mass[x]!r}")
        return "\n".join(lines) + "\n"


def hard_match(pi, source_ids=None, target_ids=None, tie_tol=1e-12) -> HardMatch:
    """Row-wise argmax; ties go to the lowest column index and are flagged."""
    P = np.asarray(getattr(pi, "matrix", pi), dtype=float)
    n, m = P.shape
    src = list(source_ids) if source_ids is not None else list(range(n))
    tgt = list(target_ids) if target_ids is not None else list(range(m))
    mapping, mass, low = {}, {}, []
    for i in range(n):
        j = int(np.argmax(P[i]))
        mapping[src[i]] = tgt[j]
        mass[src[i]] = float(P[i, j])
        if np.sum(P[i] >= P[i, j] - tie_tol) > 1:
            low.append(src[i])
    return HardMatch(mapping, mass, low)


@dataclass
class Accuracy:
    exact_rate: float
    mean_graph_distance: float
    unreachable: list


def match_accuracy(match, truth, G: SimpleGraph) -> Accuracy:
    """Fraction matched exactly and mean hop distance in G between match(x) and truth(x).

    Both maps send source nodes to nodes of G (the target graph); they must
    have the same source set.
    """
    mapping = match.mapping if isinstance(match, HardMatch) else dict(match)
    if set(mapping) != set(truth):
        diff = sorted(set(mapping) ^ set(truth), key=natural_key)
        raise ValidationError("match and truth must have the same source nodes", differing=diff[:5])
    idx = {x: i for i, x in enumerate(G.nodes)}
    foreign = [y for y in list(mapping.values()) + list(truth.values()) if y not in idx]
    if foreign:
        raise ValidationError("matched nodes must belong to the target graph", nodes=foreign[:5])
    A = G.sparse_adjacency()
    A.data[:] = 1.0
    D = shortest_path(A, directed=False, unweighted=True)
    finite = D[np.isfinite(D)]
    diam = float(finite.max()) if finite.size else 0.0
    hits, dists, bad = 0, [], []
    sources = sorted(mapping, key=natural_key)
    for x in sources:
        a, b = mapping[x], truth[x]
        hits += a == b
        d = D[idx[a], idx[b]]
        if not np.isfinite(d):
            bad.append(x)
            d = diam + 1.0
        dists.append(float(d))
    return Accuracy(hits / len(sources), float(np.mean(dists)), bad)
