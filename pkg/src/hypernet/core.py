"""Finite measure networks and hypernetworks, couplings and distortion functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError, HypernetError

INF = math.inf
MASS_TOL = 1e-12
MARGINAL_TOL = 1e-9
SUPPORT_EPS = 1e-15


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_prob(vec, name):
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(vec <= 0):
        bad = int(np.flatnonzero(vec <= 0)[0])
        raise ValidationError(f"{name} must have full support", index=bad, value=float(vec[bad]))
    s = float(vec.sum())
    if abs(s - 1.0) > MASS_TOL:
        raise ValidationError(f"{name} must sum to 1", total=repr(s))
    return vec


def _check_omega(omega, shape):
    omega = np.asarray(omega, dtype=float)
    if omega.shape != shape:
        raise ValidationError("omega has wrong shape", expected=shape, got=omega.shape)
    if not np.all(np.isfinite(omega)):
        raise ValidationError("omega has non-finite entries")
    if np.any(omega < 0):
        raise ValidationError("omega must be nonnegative")
    return omega


def _ids(ids, n, prefix):
    if ids is None:
        return tuple(f"{prefix}{i}" for i in range(n))
    ids = tuple(ids)
    if len(ids) != n:
        raise ValidationError(f"expected {n} labels", got=len(ids))
    if len(set(ids)) != n:
        raise ValidationError("labels must be distinct")
    return ids


def normalize(w):
    """Scale a positive vector to a probability vector, fixing the rounding drift."""
    w = np.asarray(w, dtype=float)
    p = w / w.sum()
    # one correction pass keeps |sum - 1| at the ulp level
    p[np.argmax(p)] += 1.0 - p.sum()
    return p


class MeasureNetwork:
    """Square relation omega on nodes carrying a full-support probability mu."""

    def __init__(self, omega, mu=None, node_ids=None):
        omega = np.asarray(omega, dtype=float)
        if omega.ndim != 2 or omega.shape[0] != omega.shape[1] or omega.shape[0] == 0:
            raise ValidationError("network omega must be a nonempty square matrix", shape=omega.shape)
        n = omega.shape[0]
        if mu is None:
            mu = np.full(n, 1.0 / n)
        self.mu = _frozen(_check_prob(mu, "mu"))
        if self.mu.size != n:
            raise ValidationError("mu length does not match omega", n=n, got=self.mu.size)
        self.omega = _frozen(_check_omega(omega, (n, n)))
        self.node_ids = _ids(node_ids, n, "x")

    @property
    def n(self):
        return self.omega.shape[0]

    def as_hypernetwork(self):
        # a network is a hypernetwork with Y = X, nu = mu
        return MeasureHypernetwork(self.omega, self.mu, self.mu, self.node_ids, self.node_ids)

    def to_doc(self):
        return {"nodes": list(self.node_ids), "mu": self.mu.tolist(), "omega": self.omega.tolist()}

    @classmethod
    def from_doc(cls, doc):
        try:
            return cls(doc["omega"], doc.get("mu"), doc.get("nodes"))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed network document: {exc}") from None

    def __repr__(self):
        return f"MeasureNetwork(n={self.n})"


class MeasureHypernetwork:
    """The quintuple (X, mu, Y, nu, omega) with omega of shape |X| x |Y|."""

    def __init__(self, omega, mu=None, nu=None, node_ids=None, hyperedge_ids=None):
        omega = np.asarray(omega, dtype=float)
        if omega.ndim != 2 or 0 in omega.shape:
            raise ValidationError("hypernetwork omega must be a nonempty matrix", shape=omega.shape)
        n, m = omega.shape
        if mu is None:
            mu = np.full(n, 1.0 / n)
        if nu is None:
            nu = np.full(m, 1.0 / m)
        mu = _check_prob(mu, "mu")
        nu = _check_prob(nu, "nu")
        if mu.size != n or nu.size != m:
            raise ValidationError("measure lengths do not match omega", shape=(n, m), mu=mu.size, nu=nu.size)
        self.mu = _frozen(mu)
        self.nu = _frozen(nu)
        self.omega = _frozen(_check_omega(omega, (n, m)))
        self.node_ids = _ids(node_ids, n, "x")
        self.hyperedge_ids = _ids(hyperedge_ids, m, "y")

    @property
    def shape(self):
        return self.omega.shape

    def to_doc(self):
        return {
            "nodes": list(self.node_ids),
            "hyperedges": list(self.hyperedge_ids),
            "mu": self.mu.tolist(),
            "nu": self.nu.tolist(),
            "omega": self.omega.tolist(),
        }

    @classmethod
    def from_doc(cls, doc):
        try:
            return cls(doc["omega"], doc.get("mu"), doc.get("nu"), doc.get("nodes"), doc.get("hyperedges"))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed hypernetwork document: {exc}") from None

    def __eq__(self, other):
        if not isinstance(other, MeasureHypernetwork):
            return NotImplemented
        return (
            self.node_ids == other.node_ids
            and self.hyperedge_ids == other.hyperedge_ids
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.nu, other.nu)
            and np.array_equal(self.omega, other.omega)
        )

    __hash__ = None

    def __repr__(self):
        return f"MeasureHypernetwork(shape={self.shape})"


class LabeledBipartiteNetwork:
    """Measure network with a fixed split of its nodes into a left and a right block."""

    def __init__(self, network: MeasureNetwork, left: Sequence[int], right: Sequence[int]):
        self.network = network
        self.left = np.array(sorted(left), dtype=int)
        self.right = np.array(sorted(right), dtype=int)
        n = network.n
        if sorted(np.concatenate([self.left, self.right]).tolist()) != list(range(n)):
            raise ValidationError("left/right blocks must partition the nodes")
        if len(self.left) == 0 or len(self.right) == 0:
            raise ValidationError("both blocks must be nonempty")
        mu = network.mu
        for name, blk in (("left", self.left), ("right", self.right)):
            if abs(mu[blk].sum() - 0.5) > MASS_TOL:
                raise ValidationError(f"{name} block must carry mass 1/2", mass=repr(float(mu[blk].sum())))
        w = network.omega
        if np.any(w[np.ix_(self.left, self.left)] != 0) or np.any(w[np.ix_(self.right, self.right)] != 0):
            raise ValidationError("omega must vanish within blocks")
        if not np.array_equal(w[np.ix_(self.left, self.right)], w[np.ix_(self.right, self.left)].T):
            raise ValidationError("omega must be symmetric across blocks")

    @property
    def labels(self):
        out = ["X"] * self.network.n
        for i in self.right:
            out[i] = "Y"
        return out

    def to_doc(self):
        doc = self.network.to_doc()
        doc["bipartite_labels"] = self.labels
        return doc

    @classmethod
    def from_doc(cls, doc):
        net = MeasureNetwork.from_doc(doc)
        labels = doc.get("bipartite_labels")
        if labels is None:
            raise ValidationError("bipartite_labels missing")
        left = [i for i, s in enumerate(labels) if s == "X"]
        right = [i for i, s in enumerate(labels) if s == "Y"]
        return cls(net, left, right)


def is_inf(p):
    return p is None or (isinstance(p, (int, float)) and math.isinf(p)) or p == "inf"


def parse_order(p):
    """Accept a number >= 1 or one of 'inf'/'infinity'."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return INF
        try:
            p = float(p)
        except ValueError:
            raise ValidationError("order must be a number >= 1 or 'inf'", got=p) from None
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValidationError("order must be >= 1", got=p)
    return p


@dataclass(frozen=True)
class DistanceParams:
    p: float = 2.0
    solver: str = "exact"
    epsilon: float = 1e-2
    restarts: int = 10
    max_iter: int = 200
    tol: float = 1e-8
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "p", parse_order(self.p))
        if self.solver not in ("exact", "entropic"):
            raise ValidationError("solver must be 'exact' or 'entropic'", got=self.solver)
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be > 0")
        if int(self.restarts) < 1:
            raise ValidationError("restarts must be >= 1")
        if int(self.max_iter) < 1:
            raise ValidationError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def to_doc(self):
        return {
            "p": "inf" if math.isinf(self.p) else self.p,
            "solver": self.solver,
            "epsilon": self.epsilon,
            "restarts": self.restarts,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass
class Coupling:
    """Nonnegative matrix whose row/column sums match the prescribed marginals."""

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    tol: float = field(default=MARGINAL_TOL, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.row_marginal = np.asarray(self.row_marginal, dtype=float)
        self.col_marginal = np.asarray(self.col_marginal, dtype=float)
        check_coupling(self.matrix, self.row_marginal, self.col_marginal, self.tol)

    @classmethod
    def product(cls, a, b):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        return cls(np.outer(a, b), a, b)

    @property
    def T(self):
        return Coupling(self.matrix.T, self.col_marginal, self.row_marginal, self.tol)


def check_coupling(mat, a, b, tol=MARGINAL_TOL):
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (len(a), len(b)):
        raise ValidationError("coupling has wrong shape", expected=(len(a), len(b)), got=mat.shape)
    if not np.all(np.isfinite(mat)):
        raise ValidationError("coupling has non-finite entries")
    if np.any(mat < 0):
        raise ValidationError("coupling has negative entries", min=float(mat.min()))
    r = np.abs(mat.sum(axis=1) - a).max()
    c = np.abs(mat.sum(axis=0) - b).max()
    if r > tol or c > tol:
        raise ValidationError("coupling marginals violated", row_residual=float(r), col_residual=float(c))
    return mat


def as_matrix(pi, a, b, tol=MARGINAL_TOL):
    """Return the raw matrix of a Coupling or array after checking it couples a with b."""
    if isinstance(pi, Coupling):
        pi = pi.matrix
    return check_coupling(pi, a, b, tol)


def _pow_abs(d, p):
    d = np.abs(d)
    if p == 1:
        return d
    if p == 2:
        return d * d
    return d**p


def _distortion_pow(w1, w2, pi, xi, p):
    """sum |w1(x,y) - w2(x',y')|^p pi(x,x') xi(y,y') by direct summation over supp(pi)."""
    total = 0.0
    rows, cols = np.nonzero(pi > 0)
    for i, j in zip(rows, cols):
        d = _pow_abs(w1[i][:, None] - w2[j][None, :], p)
        total += pi[i, j] * float(np.sum(d * xi))
    return total


def _distortion_sup(w1, w2, pi, xi):
    rows, cols = np.nonzero(pi > SUPPORT_EPS)
    ys, yps = np.nonzero(xi > SUPPORT_EPS)
    best = 0.0
    for i, j in zip(rows, cols):
        d = np.abs(w1[i][ys] - w2[j][yps])
        if d.size:
            best = max(best, float(d.max()))
    return best


def coot_distortion(H: MeasureHypernetwork, H2: MeasureHypernetwork, pi, xi, p=2.0) -> float:
    """L^p(pi x xi) norm of omega - omega'; for p = inf the max over the support product."""
    if H.shape[0] != len(H.mu) or H2.shape[0] != len(H2.mu):
        raise ValidationError("dimension mismatch")
    pi = as_matrix(pi, H.mu, H2.mu)
    xi = as_matrix(xi, H.nu, H2.nu)
    p = parse_order(p)
    if math.isinf(p):
        return _distortion_sup(H.omega, H2.omega, pi, xi)
    val = _distortion_pow(H.omega, H2.omega, pi, xi, p)
    return max(val, 0.0) ** (1.0 / p)


def gw_distortion(N: MeasureNetwork, N2: MeasureNetwork, pi, p=2.0) -> float:
    """L^p(pi x pi) norm of omega - omega'."""
    pi = as_matrix(pi, N.mu, N2.mu)
    p = parse_order(p)
    if math.isinf(p):
        return _distortion_sup(N.omega, N2.omega, pi, pi)
    val = _distortion_pow(N.omega, N2.omega, pi, pi, p)
    return max(val, 0.0) ** (1.0 / p)


def dualize(H: MeasureHypernetwork) -> MeasureHypernetwork:
    return MeasureHypernetwork(H.omega.T.copy(), H.nu, H.mu, H.hyperedge_ids, H.node_ids)


def pair_label(a, b):
    return f"({a},{b})"


def geodesic_point(H: MeasureHypernetwork, H2: MeasureHypernetwork, pi, xi, t: float) -> MeasureHypernetwork:
    """Point at time t on the straight-line path between H and H2 built from (pi, xi)."""
    if not 0.0 <= t <= 1.0:
        raise ValidationError("t must lie in [0, 1]", t=t)
    pi = as_matrix(pi, H.mu, H2.mu)
    xi = as_matrix(xi, H.nu, H2.nu)
    xs, xps = np.nonzero(pi > 0)
    ys, yps = np.nonzero(xi > 0)
    if xs.size == 0 or ys.size == 0:
        raise HypernetError("empty coupling support")
    omega = (1.0 - t) * H.omega[np.ix_(xs, ys)] + t * H2.omega[np.ix_(xps, yps)]
    mu = pi[xs, xps]
    nu = xi[ys, yps]
    node_ids = [pair_label(H.node_ids[i], H2.node_ids[j]) for i, j in zip(xs, xps)]
    edge_ids = [pair_label(H.hyperedge_ids[i], H2.hyperedge_ids[j]) for i, j in zip(ys, yps)]
    # coupling masses sum to 1 only up to the marginal tolerance
    return MeasureHypernetwork(omega, normalize(mu), normalize(nu), node_ids, edge_ids)


def _groups(vectors, tol):
    """Greedy grouping of rows; lowest index is the representative."""
    n = vectors.shape[0]
    assigned = np.full(n, -1)
    reps = []
    for i in range(n):
        if assigned[i] >= 0:
            continue
        assigned[i] = len(reps)
        reps.append(i)
        for j in range(i + 1, n):
            if assigned[j] < 0:
                same = np.array_equal(vectors[i], vectors[j]) if tol == 0 else np.max(np.abs(vectors[i] - vectors[j])) <= tol
                if same:
                    assigned[j] = assigned[i]
    return reps, assigned


def collapse_canonical(H: MeasureHypernetwork, tol: float = 0.0) -> MeasureHypernetwork:
    """Merge identical rows then identical columns until nothing changes."""
    if tol < 0:
        raise ValidationError("tol must be >= 0")
    omega = np.array(H.omega)
    mu, nu = np.array(H.mu), np.array(H.nu)
    nodes, edges = list(H.node_ids), list(H.hyperedge_ids)
    while True:
        changed = False
        reps, assigned = _groups(omega, tol)
        if len(reps) < omega.shape[0]:
            mu = np.bincount(assigned, weights=mu, minlength=len(reps))
            omega = omega[reps]
            nodes = [nodes[i] for i in reps]
            changed = True
        reps, assigned = _groups(omega.T, tol)
        if len(reps) < omega.shape[1]:
            nu = np.bincount(assigned, weights=nu, minlength=len(reps))
            omega = omega[:, reps]
            edges = [edges[i] for i in reps]
            changed = True
        if not changed:
            break
    return MeasureHypernetwork(omega, mu, nu, nodes, edges)
