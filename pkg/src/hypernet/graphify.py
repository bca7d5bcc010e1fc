"""Maps from hypernetworks to networks: bipartite incidence, q-clique expansion, q-line graph."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    LabeledBipartiteNetwork,
    MeasureHypernetwork,
    MeasureNetwork,
    dualize,
    parse_order,
)
from .errors import ValidationError


@dataclass(frozen=True)
class GraphifyParams:
    q: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "q", parse_order(self.q))


def bipartite_incidence(H: MeasureHypernetwork) -> LabeledBipartiteNetwork:
    """Star expansion on X + Y with mu_B = (mu, nu)/2 and omega mirrored across the blocks."""
    n, m = H.shape
    w = np.zeros((n + m, n + m))
    w[:n, n:] = H.omega
    w[n:, :n] = H.omega.T
    mu = np.concatenate([H.mu, H.nu]) / 2.0
    ids = [f"X:{x}" for x in H.node_ids] + [f"Y:{y}" for y in H.hyperedge_ids]
    net = MeasureNetwork(w, mu, ids)
    return LabeledBipartiteNetwork(net, range(n), range(n, n + m))


def bipartite_inverse(B: LabeledBipartiteNetwork) -> MeasureHypernetwork:
    """(X, 2 mu|X, Y, 2 mu|Y, omega|X x Y)."""
    N = B.network
    L, R = B.left, B.right

    def strip(s, tag):
        return s[len(tag):] if isinstance(s, str) and s.startswith(tag) else s

    return MeasureHypernetwork(
        N.omega[np.ix_(L, R)].copy(),
        2.0 * N.mu[L],
        2.0 * N.mu[R],
        [strip(N.node_ids[i], "X:") for i in L],
        [strip(N.node_ids[i], "Y:") for i in R],
    )


def _clique(omega, nu, q):
    # min over pairs of rows, then L^q(nu) norm along the hyperedge axis
    mins = np.minimum(omega[:, None, :], omega[None, :, :])
    if math.isinf(q):
        return mins.max(axis=2)
    if q == 1:
        return mins @ nu
    return (mins**q @ nu) ** (1.0 / q)


def clique_expansion(H: MeasureHypernetwork, q=math.inf) -> MeasureNetwork:
    q = parse_order(q)
    return MeasureNetwork(_clique(H.omega, H.nu, q), H.mu.copy(), H.node_ids)


def line_graph(H: MeasureHypernetwork, q=math.inf) -> MeasureNetwork:
    return clique_expansion(dualize(H), q)


def matrix_product_line_graph(H: MeasureHypernetwork) -> MeasureNetwork:
    """(Y, nu, omega^T diag(mu) omega)."""
    w = H.omega
    return MeasureNetwork(w.T @ (H.mu[:, None] * w), H.nu.copy(), H.hyperedge_ids)


def graphify(H: MeasureHypernetwork, kind: str, q=math.inf):
    kind = kind.lower()
    if kind == "b":
        return bipartite_incidence(H)
    if kind == "qq":
        return clique_expansion(H, q)
    if kind == "lq":
        return line_graph(H, q)
    if kind == "lmp":
        return matrix_product_line_graph(H)
    raise ValidationError("unknown graphification", kind=kind)


__all__ = [
    "GraphifyParams",
    "bipartite_incidence",
    "bipartite_inverse",
    "clique_expansion",
    "line_graph",
    "matrix_product_line_graph",
    "graphify",
]
