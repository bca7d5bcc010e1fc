"""Discrete optimal transport: exact transportation simplex and entropic Sinkhorn."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import Coupling, _check_prob
from .errors import ConvergenceError, SolverError, ValidationError


@dataclass
class OtProblem:
    a: np.ndarray
    b: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        self.a = _check_prob(self.a, "a")
        self.b = _check_prob(self.b, "b")
        self.cost = np.asarray(self.cost, dtype=float)
        if self.cost.shape != (self.a.size, self.b.size):
            raise ValidationError("cost shape does not match marginals", shape=self.cost.shape)
        if not np.all(np.isfinite(self.cost)):
            raise ValidationError("cost has non-finite entries")


def _min_cost_tree(a, b, cost):
    """Matrix-minimum starting basis: n+m-1 cells forming a spanning tree."""
    n, m = len(a), len(b)
    ra, rb = a.copy(), b.copy()
    row_on = np.ones(n, bool)
    col_on = np.ones(m, bool)
    masked = cost.astype(float).copy()
    cells, flows = [], []
    nr, nc = n, m
    for _ in range(n + m - 1):
        flat = int(np.argmin(masked))
        i, j = divmod(flat, m)
        f = min(ra[i], rb[j])
        cells.append((i, j))
        flows.append(f)
        ra[i] -= f
        rb[j] -= f
        if (ra[i] <= rb[j] and nr > 1) or nc == 1:
            row_on[i] = False
            masked[i, :] = np.inf
            nr -= 1
        else:
            col_on[j] = False
            masked[:, j] = np.inf
            nc -= 1
    return cells, flows


class _Tree:
    """Spanning tree over n row nodes and m column nodes (column j is node n + j)."""

    def __init__(self, n, m, cells, flows):
        self.n, self.m = n, m
        self.adj = [dict() for _ in range(n + m)]
        for (i, j), f in zip(cells, flows):
            self.add(i, j, f)

    def add(self, i, j, f):
        self.adj[i][self.n + j] = f
        self.adj[self.n + j][i] = f

    def remove(self, i, j):
        del self.adj[i][self.n + j]
        del self.adj[self.n + j][i]

    def set(self, i, j, f):
        self.adj[i][self.n + j] = f
        self.adj[self.n + j][i] = f

    def potentials(self, cost):
        n = self.n
        u = np.zeros(n)
        v = np.zeros(self.m)
        seen = [False] * (n + self.m)
        seen[0] = True
        queue = deque([0])
        while queue:
            k = queue.popleft()
            for q in self.adj[k]:
                if seen[q]:
                    continue
                seen[q] = True
                if k < n:
                    v[q - n] = cost[k, q - n] - u[k]
                else:
                    u[q] = cost[q, k - n] - v[k - n]
                queue.append(q)
        return u, v

    def path(self, src, dst):
        parent = {src: None}
        queue = deque([src])
        while queue:
            k = queue.popleft()
            if k == dst:
                break
            for q in self.adj[k]:
                if q not in parent:
                    parent[q] = k
                    queue.append(q)
        out = [dst]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])
        return out[::-1]

    def matrix(self):
        mat = np.zeros((self.n, self.m))
        for i in range(self.n):
            for q, f in self.adj[i].items():
                mat[i, q - self.n] = f
        return mat


def _cell(n, k, q):
    return (k, q - n) if k < n else (q, k - n)


def solve_exact(prob: OtProblem, max_pivots=None, gap_tol=1e-9):
    """Network simplex on the transportation problem.

    Returns (Coupling, objective). The basis starts from the matrix-minimum
    rule; entering cells follow the most negative reduced cost, switching
    to the lowest-index rule after a run of degenerate pivots.
    """
    a, b, cost = prob.a, prob.b, prob.cost
    n, m = cost.shape
    cells, flows = _min_cost_tree(a, b, cost)
    tree = _Tree(n, m, cells, flows)
    scale = max(1.0, float(np.abs(cost).max()))
    thresh = 1e-12 * scale
    if max_pivots is None:
        max_pivots = 50 * (n + m) * (n + m) + 1000
    degenerate_run = 0
    for _ in range(max_pivots):
        u, v = tree.potentials(cost)
        red = cost - u[:, None] - v[None, :]
        if degenerate_run > 2 * (n + m):
            neg = np.flatnonzero(red.ravel() < -thresh)
            if neg.size == 0:
                break
            flat = int(neg[0])
        else:
            flat = int(np.argmin(red))
            if red.flat[flat] >= -thresh:
                break
        ei, ej = divmod(flat, m)
        # cycle: entering cell (+), then tree path from column ej back to row ei
        path = tree.path(n + ej, ei)
        minus = []
        plus = []
        for s in range(len(path) - 1):
            c = _cell(n, path[s], path[s + 1])
            (minus if s % 2 == 0 else plus).append(c)
        theta = np.inf
        leave = None
        for c in minus:
            f = tree.adj[c[0]][n + c[1]]
            if f < theta:
                theta, leave = f, c
        theta = max(theta, 0.0)
        degenerate_run = degenerate_run + 1 if theta == 0.0 else 0
        for c in minus:
            tree.set(c[0], c[1], max(tree.adj[c[0]][n + c[1]] - theta, 0.0))
        for c in plus:
            tree.set(c[0], c[1], tree.adj[c[0]][n + c[1]] + theta)
        tree.remove(*leave)
        tree.add(ei, ej, theta)
    else:
        raise SolverError("network simplex exceeded its pivot budget", pivots=max_pivots, shape=(n, m))
    mat = tree.matrix()
    obj = float(np.sum(cost * mat))
    dual = float(a @ u + b @ v)
    if abs(obj - dual) > gap_tol * max(1.0, abs(obj)):
        raise SolverError("primal-dual gap too large", primal=obj, dual=dual)
    # rounding in the flow updates stays at ulp level; report against the exact marginals
    return Coupling(mat, a, b), obj


def solve_entropic(prob: OtProblem, epsilon: float, max_iter: int = 100000, tol: float = 1e-9):
    """Sinkhorn scaling on exp(-cost/epsilon), switching to log-domain updates on underflow.

    Returns (Coupling, objective) where the objective is the unregularized
    linear cost at the returned plan. The plan's column sums are exact up to
    rounding; the row residual (L1) is at most tol.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be > 0")
    a, b, C = prob.a, prob.b, prob.cost
    C0 = C - C.min()
    span = float(C0.max()) / epsilon
    if span < 100:
        mat, err, it = _sinkhorn_kernel(a, b, np.exp(-C0 / epsilon), max_iter, tol)
        # scalings near exp(+-span) make the kernel iteration stall well before overflow
        if mat is None or not np.all(np.isfinite(mat)) or err > tol:
            mat, err, it = _sinkhorn_log(a, b, C0, epsilon, max_iter, tol)
    else:
        mat, err, it = _sinkhorn_log(a, b, C0, epsilon, max_iter, tol)
    if err > tol:
        raise ConvergenceError(
            "Sinkhorn did not reach the marginal tolerance",
            diagnostics={"iterations": it, "marginal_error": err, "plan": mat},
            epsilon=epsilon,
        )
    return Coupling(mat, a, b, tol=max(tol, 1e-9)), float(np.sum(C * mat))


def _sinkhorn_kernel(a, b, K, max_iter, tol):
    u = np.ones_like(a)
    v = np.ones_like(b)
    err = np.inf
    for it in range(1, max_iter + 1):
        Ktu = K.T @ u
        if np.any(Ktu == 0) or not np.all(np.isfinite(Ktu)):
            return None, np.inf, it
        v = b / Ktu
        Kv = K @ v
        if np.any(Kv == 0) or not np.all(np.isfinite(Kv)):
            return None, np.inf, it
        if it % 10 == 0 or it == max_iter:
            err = float(np.abs(u * Kv - a).sum())
            if err <= tol:
                break
        u = a / Kv
    mat = u[:, None] * K * v[None, :]
    err = max(float(np.abs(mat.sum(1) - a).sum()), float(np.abs(mat.sum(0) - b).sum()))
    return mat, err, it


SINKHORN_STALL = 5000
NEWTON_STEPS = 100
NEWTON_DAMPING = 1e-6


def _sinkhorn_log(a, b, C, eps, max_iter, tol):
    # epsilon-scaling: warm-start the potentials through a decreasing schedule
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    la, lb = np.log(a), np.log(b)
    schedule = []
    e = max(float(C.max()), eps)
    while e > eps:
        schedule.append(e)
        e *= 0.5
    schedule.append(eps)
    it = 0
    err = np.inf
    for stage, e in enumerate(schedule):
        last = stage == len(schedule) - 1
        budget = min(SINKHORN_STALL, max_iter - it) if last else min(200, max_iter - it)
        for _ in range(budget):
            it += 1
            f = e * (la - logsumexp((g[None, :] - C) / e, axis=1))
            g = e * (lb - logsumexp((f[:, None] - C) / e, axis=0))
            if last and it % 10 == 0:
                rows = np.exp(logsumexp((f[:, None] + g[None, :] - C) / e, axis=1))
                err = float(np.abs(rows - a).sum())
                if err <= tol:
                    break
    if err > tol and it < max_iter:
        f, g, it = _newton_polish(a, b, C, eps, f, g, tol, it, max_iter)
    mat = np.exp((f[:, None] + g[None, :] - C) / eps)
    err = max(float(np.abs(mat.sum(1) - a).sum()), float(np.abs(mat.sum(0) - b).sum()))
    return mat, err, it


def _newton_polish(a, b, C, eps, f, g, tol, it, max_iter):
    """Damped Newton ascent on the entropic dual, used when Sinkhorn stalls.

    Near-tied optimal vertices give a mixed plan on which Sinkhorn contracts
    very slowly; the dual is smooth and strictly concave once the last
    potential is pinned, so Newton converges in a handful of steps.
    """
    n, m = C.shape

    def dual(f, g):
        return float(a @ f + b @ g - eps * np.exp(logsumexp((f[:, None] + g[None, :] - C) / eps)))

    def marg_err(f, g):
        P = np.exp((f[:, None] + g[None, :] - C) / eps)
        return max(np.abs(P.sum(1) - a).sum(), np.abs(P.sum(0) - b).sum())

    cur = dual(f, g)
    best = (marg_err(f, g), f, g)
    for _ in range(NEWTON_STEPS):
        if it >= max_iter or best[0] <= tol:
            break
        it += 1
        P = np.exp((f[:, None] + g[None, :] - C) / eps)
        r, c = P.sum(1), P.sum(0)
        grad = np.r_[a - r, (b - c)[:-1]]
        hess = np.zeros((n + m - 1, n + m - 1))
        hess[:n, :n] = np.diag(r)
        hess[n:, n:] = np.diag(c[:-1])
        hess[:n, n:] = P[:, :-1]
        hess[n:, :n] = P[:, :-1].T
        # the damping term keeps a finite step along blocks that are numerically
        # decoupled in the current support, where the curvature vanishes
        step = np.linalg.solve(hess / eps + NEWTON_DAMPING * np.eye(n + m - 1), grad)
        slope = float(grad @ step)
        if not slope > 0:
            break
        df, dg = step[:n], np.r_[step[n:], 0.0]
        lam = 1.0
        while lam > 1e-14:
            nf, ng = f + lam * df, g + lam * dg
            with np.errstate(over="ignore"):
                val = dual(nf, ng)
            if val >= cur + 1e-4 * lam * slope:
                break
            lam *= 0.5
        else:
            break
        f, g, cur = nf, ng, val
        e = marg_err(f, g)
        if e < best[0]:
            best = (e, f, g)
    return best[1], best[2], it


def solve(a, b, cost, solver="exact", epsilon=1e-2):
    """Convenience dispatch used by the descent loops; returns (matrix, objective)."""
    prob = OtProblem(a, b, cost)
    if solver == "exact":
        c, obj = solve_exact(prob)
    else:
        c, obj = solve_entropic(prob, epsilon)
    return c.matrix, obj
