"""Hypernetwork distance by alternating optimal transport over node and hyperedge couplings."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Coupling,
    DistanceParams,
    MeasureHypernetwork,
    _pow_abs,
    as_matrix,
    coot_distortion,
    parse_order,
)
from .errors import HypernetError, SolverError, ValidationError
from .ot import OtProblem, solve, solve_exact
from .polytope import transport_vertices, vertex_count_estimate


@dataclass
class RestartRecord:
    objective: float
    iters: int
    converged: bool
    trace: list = field(default_factory=list, repr=False)

    def to_doc(self):
        return {"objective": self.objective, "iters": self.iters, "converged": self.converged}


@dataclass
class CootResult:
    distance: float
    pi: np.ndarray
    xi: np.ndarray
    per_restart: list
    params_echo: DistanceParams | None = None
    p: float = 2.0
    certified: bool = False
    method: str = "bcd"

    def to_doc(self):
        doc = {
            "distance": self.distance,
            "p": "inf" if math.isinf(self.p) else self.p,
            "pi": self.pi.tolist(),
            "xi": self.xi.tolist(),
            "restarts": [r.to_doc() for r in self.per_restart],
        }
        if self.method != "bcd" or math.isinf(self.p):
            doc["method"] = self.method
            doc["certified"] = self.certified
        return doc


def cost_for_xi(w1, w2, pi, p=2.0):
    """M[y,y'] = sum_{x,x'} |w1(x,y) - w2(x',y')|^p pi(x,x')."""
    if p == 2:
        r = pi.sum(axis=1)
        c = pi.sum(axis=0)
        M = ((w1 * w1).T @ r)[:, None] + ((w2 * w2).T @ c)[None, :] - 2.0 * (w1.T @ pi @ w2)
        return M
    M = np.zeros((w1.shape[1], w2.shape[1]))
    rows, cols = np.nonzero(pi)
    for i, j in zip(rows, cols):
        M += pi[i, j] * _pow_abs(w1[i][:, None] - w2[j][None, :], p)
    return M


def cost_for_pi(w1, w2, xi, p=2.0):
    """M[x,x'] = sum_{y,y'} |w1(x,y) - w2(x',y')|^p xi(y,y')."""
    return cost_for_xi(w1.T, w2.T, xi, p)


def coot_cost_matrix_for_xi(H: MeasureHypernetwork, H2: MeasureHypernetwork, pi, p=2.0):
    if H.shape[0] != len(H.mu) or H2.shape[0] != len(H2.mu):
        raise ValidationError("dimension mismatch")
    pi = as_matrix(pi, H.mu, H2.mu)
    M = cost_for_xi(H.omega, H2.omega, pi, parse_order(p))
    return np.maximum(M, 0.0)


def coot_cost_matrix_for_pi(H: MeasureHypernetwork, H2: MeasureHypernetwork, xi, p=2.0):
    xi = as_matrix(xi, H.nu, H2.nu)
    M = cost_for_pi(H.omega, H2.omega, xi, parse_order(p))
    return np.maximum(M, 0.0)


def sinkhorn_project(K, a, b, iters=100):
    """Alternate row/column scaling of a positive matrix toward marginals (a, b)."""
    P = np.array(K, dtype=float)
    for _ in range(iters):
        P *= (a / P.sum(axis=1))[:, None]
        P *= (b / P.sum(axis=0))[None, :]
    return P


def random_coupling(rng, a, b, iters=100):
    """Exp(1) entries projected toward the marginals; columns exact, rows to ~1e-9 or better."""
    P = sinkhorn_project(rng.exponential(1.0, size=(len(a), len(b))), a, b, iters)
    # one exact repair so the start is a valid coupling: spread the row defect by column mass
    return _repair(P, a, b)


def _repair(P, a, b):
    """Nudge a nearly-feasible positive plan onto the exact marginals (Altschuler-style rounding)."""
    P = P * np.minimum(a / np.maximum(P.sum(1), 1e-300), 1.0)[:, None]
    P = P * np.minimum(b / np.maximum(P.sum(0), 1e-300), 1.0)[None, :]
    er = a - P.sum(1)
    ec = b - P.sum(0)
    s = ec.sum()
    if s > 0:
        P = P + np.outer(er, ec) / s
    return P


def restart_rng(seed, r):
    return np.random.default_rng([int(seed), int(r)])


def _bcd(w1, w2, mu1, mu2, nu1, nu2, pi, xi, p, params: DistanceParams):
    """Alternate exact (or entropic) OT half-steps; returns (pi, xi, objective, record)."""
    obj = float(np.sum(cost_for_pi(w1, w2, xi, p) * pi))
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        M = np.maximum(cost_for_xi(w1, w2, pi, p), 0.0)
        xi, _ = solve(nu1, nu2, M, params.solver, params.epsilon)
        trace.append(float(np.sum(M * xi)))
        M = np.maximum(cost_for_pi(w1, w2, xi, p), 0.0)
        pi, new = solve(mu1, mu2, M, params.solver, params.epsilon)
        new = float(new)
        trace.append(new)
        if obj - new <= params.tol * obj or new == 0.0:
            obj = min(obj, new) if params.solver == "exact" else new
            converged = True
            break
        obj = new
    return pi, xi, obj, RestartRecord(obj, it, converged, trace)


def _marg_key(a):
    return (len(a), tuple(np.asarray(a).tolist()))


def _block_key(a, b):
    return tuple(sorted([_marg_key(a), _marg_key(b)]))


def _oriented_random(rng, a, b):
    """Random coupling drawn in a canonical orientation, so swapping the inputs transposes it."""
    ka, kb = _marg_key(a), _marg_key(b)
    if ka < kb:
        return random_coupling(rng, a, b)
    if ka > kb:
        return random_coupling(rng, b, a).T
    # equal marginals: a symmetric start is its own transpose
    P = random_coupling(rng, a, b)
    return 0.5 * (P + P.T)


def _initial_pairs(H, H2, params, init):
    pairs = [(np.outer(H.mu, H2.mu), np.outer(H.nu, H2.nu))]
    # starts are keyed on the marginals only, so swapping the two inputs
    # transposes them and dualizing both inputs exchanges the two blocks
    pi_first = _block_key(H.mu, H2.mu) <= _block_key(H.nu, H2.nu)
    for r in range(1, params.restarts):
        rng = restart_rng(params.seed, r)
        if pi_first:
            pi0 = _oriented_random(rng, H.mu, H2.mu)
            xi0 = _oriented_random(rng, H.nu, H2.nu)
        else:
            xi0 = _oriented_random(rng, H.nu, H2.nu)
            pi0 = _oriented_random(rng, H.mu, H2.mu)
        pairs.append((pi0, xi0))
    for pi0, xi0 in init or []:
        pairs.append((as_matrix(pi0, H.mu, H2.mu), as_matrix(xi0, H.nu, H2.nu)))
    return pairs


def _bcd_both_orders(w1, w2, mu1, mu2, nu1, nu2, pi, xi, p, params):
    """Run the descent with xi updated first and again with pi updated first; keep the better.

    The pi-first run is the xi-first run on the transposed problem, so the set
    of trajectories is unchanged when both inputs are dualized.
    """
    a = _bcd(w1, w2, mu1, mu2, nu1, nu2, pi, xi, p, params)
    xb, pb, ob, rb = _bcd(w1.T, w2.T, nu1, nu2, mu1, mu2, xi, pi, p, params)
    if ob < a[2]:
        return pb, xb, ob, rb
    return a


def coot_distance(H: MeasureHypernetwork, H2: MeasureHypernetwork, params: DistanceParams | None = None,
                  init=None) -> CootResult:
    """Best block-coordinate-descent local optimum over restarts.

    Restart 0 starts from the product couplings, restarts 1.. from seeded
    random couplings, and any (pi, xi) pairs in ``init`` are appended as
    further starts. Each start is descended twice, once updating xi first and
    once updating pi first, and the better run is kept. For p = inf the descent runs at p = 2 and the sup
    distortion is evaluated at the result (an upper bound, not certified).
    """
    params = params or DistanceParams()
    p_eval = params.p
    p_run = 2.0 if math.isinf(p_eval) else p_eval
    pairs = _initial_pairs(H, H2, params, init)
    w1, w2 = H.omega, H2.omega

    def run(r):
        pi0, xi0 = pairs[r]
        try:
            return _bcd_both_orders(w1, w2, H.mu, H2.mu, H.nu, H2.nu, pi0, xi0, p_run, params)
        except HypernetError as exc:
            raise SolverError(f"restart {r} failed: {exc}", restart=r) from exc

    if params.workers > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            results = list(pool.map(run, range(len(pairs))))
    else:
        results = [run(r) for r in range(len(pairs))]

    best = min(range(len(results)), key=lambda r: (results[r][2], r))
    pi, xi = results[best][0], results[best][1]
    dist = coot_distortion(H, H2, Coupling(pi, H.mu, H2.mu, tol=_ctol(params)),
                           Coupling(xi, H.nu, H2.nu, tol=_ctol(params)), p_eval)
    return CootResult(
        distance=dist,
        pi=pi,
        xi=xi,
        per_restart=[r[3] for r in results],
        params_echo=params,
        p=p_eval,
        certified=False,
        method="bcd" if not math.isinf(p_eval) else "bcd-p2-then-sup",
    )


def _ctol(params):
    return 1e-9 if params.solver == "exact" else max(1e-9, 1e-6)


def coot_distance_bruteforce(H: MeasureHypernetwork, H2: MeasureHypernetwork, p=2.0) -> CootResult:
    """Exact minimum for tiny instances.

    The objective is bilinear in (pi, xi), so some optimum has xi at a vertex
    of its transportation polytope; for each such vertex the pi-subproblem is
    a linear program solved exactly. The side with fewer vertices is enumerated.
    """
    p = parse_order(p)
    if math.isinf(p):
        raise ValidationError("exact enumeration is not available for p = inf")
    try:
        n_xi = vertex_count_estimate(H.nu, H2.nu)
    except HypernetError:
        n_xi = None
    try:
        n_pi = vertex_count_estimate(H.mu, H2.mu)
    except HypernetError:
        n_pi = None
    if n_xi is None and n_pi is None:
        vertex_count_estimate(H.nu, H2.nu)  # re-raise the size error
    w1, w2 = H.omega, H2.omega
    enum_xi = n_pi is None or (n_xi is not None and n_xi <= n_pi)
    best = None
    if enum_xi:
        for xi in transport_vertices(H.nu, H2.nu):
            M = np.maximum(cost_for_pi(w1, w2, xi, p), 0.0)
            c, val = solve_exact(OtProblem(H.mu, H2.mu, M))
            if best is None or val < best[0] - 1e-15:
                best = (val, c.matrix, xi)
    else:
        for pi in transport_vertices(H.mu, H2.mu):
            M = np.maximum(cost_for_xi(w1, w2, pi, p), 0.0)
            c, val = solve_exact(OtProblem(H.nu, H2.nu, M))
            if best is None or val < best[0] - 1e-15:
                best = (val, pi, c.matrix)
    _, pi, xi = best
    dist = coot_distortion(H, H2, pi, xi, p)
    rec = RestartRecord(dist**p, 0, True)
    return CootResult(dist, pi, xi, [rec], None, p, certified=True, method="vertex-enumeration")
