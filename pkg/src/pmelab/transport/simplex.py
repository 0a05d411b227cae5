"""Exact discrete optimal transport by the transportation simplex method.

The basis is a spanning tree of the bipartite supply/demand graph with
``m + n - 1`` cells.  Vogel's approximation gives the starting tree;
entering cells follow Dantzig's most-negative reduced cost.  Ties for the
leaving cell are always broken by lowest index, and once ``bland_after``
consecutive degenerate pivots have occurred the entering cell is chosen by
Bland's lowest-index rule as well, until a pivot moves mass again.  Any
cycle would consist of degenerate pivots only, so this rules out cycling.
"""
from __future__ import annotations

import numpy as np

from .measures import DiscreteMeasure, TransportError, TransportPlan, check_balanced


def _vogel(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    m, n = C.shape
    supply = a.copy()
    demand = b.copy()
    rows = np.ones(m, bool)
    cols = np.ones(n, bool)
    basis = []
    flows = []

    def second_gap(mat, axis):
        k = mat.shape[axis]
        if k >= 2:
            part = np.partition(mat, 1, axis=axis)
            lo = np.take(part, 0, axis=axis)
            hi = np.take(part, 1, axis=axis)
            return hi - lo
        return np.take(mat, 0, axis=axis)

    while True:
        ri = np.nonzero(rows)[0]
        ci = np.nonzero(cols)[0]
        if ri.size == 1:
            i = ri[0]
            for j in ci:
                basis.append((i, j))
                flows.append(demand[j])
            break
        if ci.size == 1:
            j = ci[0]
            for i in ri:
                basis.append((i, j))
                flows.append(supply[i])
            break
        sub = C[np.ix_(ri, ci)]
        rpen = second_gap(sub, 1)
        cpen = second_gap(sub, 0)
        rbest = int(np.argmax(rpen))
        cbest = int(np.argmax(cpen))
        if rpen[rbest] >= cpen[cbest]:
            i = ri[rbest]
            j = ci[int(np.argmin(sub[rbest]))]
        else:
            j = ci[cbest]
            i = ri[int(np.argmin(sub[:, cbest]))]
        x = min(supply[i], demand[j])
        basis.append((i, j))
        flows.append(x)
        if supply[i] <= demand[j]:
            demand[j] -= supply[i]
            supply[i] = 0.0
            rows[i] = False
        else:
            supply[i] -= demand[j]
            demand[j] = 0.0
            cols[j] = False
    return basis, flows


class _Tree:
    """Rooted basis tree over nodes ``0..m-1`` (rows) and ``m..m+n-1`` (columns).

    Each non-root node stores its parent and the flow on the edge to it, so
    the pivot cycle is found by climbing from both ends of the entering
    cell, and only the subtree cut off by the leaving cell is re-hung.
    """

    def __init__(self, m, n, basis, flows):
        self.m = m
        self.n = n
        N = m + n
        adj = [[] for _ in range(N)]
        flow = {}
        for (i, j), x in zip(basis, flows):
            adj[i].append(m + j)
            adj[m + j].append(i)
            flow[(i, m + j)] = x
        self.parent = [-1] * N
        self.depth = [0] * N
        self.children = [set() for _ in range(N)]
        self.up_flow = [0.0] * N
        seen = [False] * N
        seen[0] = True
        stack = [0]
        while stack:
            a = stack.pop()
            for b in adj[a]:
                if not seen[b]:
                    seen[b] = True
                    self.parent[b] = a
                    self.depth[b] = self.depth[a] + 1
                    self.children[a].add(b)
                    self.up_flow[b] = flow[(min(a, b), max(a, b))]
                    stack.append(b)
        if not all(seen):
            raise TransportError("initial basis is not a spanning tree")

    def cell(self, a, b):
        i, c = (a, b) if a < self.m else (b, a)
        return i, c - self.m

    def duals(self, C):
        m = self.m
        pot = [0.0] * (m + self.n)
        order = [0]
        for a in order:
            for b in self.children[a]:
                i, j = self.cell(a, b)
                pot[b] = C[i, j] - pot[a]
                order.append(b)
        return np.array(pot[:m]), np.array(pot[m:])

    def cycle(self, a, b):
        """Tree path from ``a`` to ``b`` as a list of child nodes, in order."""
        left, right = [], []
        while a != b:
            if self.depth[a] >= self.depth[b]:
                left.append((a, True))
                a = self.parent[a]
            else:
                right.append((b, False))
                b = self.parent[b]
        return left + right[::-1]

    def subtree(self, root):
        out = [root]
        for a in out:
            out.extend(self.children[a])
        return out

    def rehang(self, cut, s, t, theta):
        """Remove the edge above ``cut``, attach ``s`` (inside) under ``t``."""
        # Reverse parent pointers on the path s -> cut.
        path = [s]
        while path[-1] != cut:
            path.append(self.parent[path[-1]])
        p = self.parent[cut]
        self.children[p].discard(cut)
        for k in range(len(path) - 1, 0, -1):
            child, par = path[k - 1], path[k]
            self.children[par].discard(child)
            self.children[child].add(par)
            self.parent[par] = child
            self.up_flow[par] = self.up_flow[child]
        self.parent[s] = t
        self.children[t].add(s)
        self.up_flow[s] = theta
        for a in self.subtree(s):
            self.depth[a] = self.depth[self.parent[a]] + 1


def transportation_simplex(a, b, C, tol: float | None = None, max_pivots: int = 1_000_000, bland_after: int = 20):
    """Solve ``min <C, pi>`` over couplings of ``a`` and ``b``.

    Returns
    -------
    (pi, u, v, pivots)
        The optimal plan, dual potentials with ``u_i + v_j <= C_ij`` and the
        number of pivots performed.
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    if a.shape != (m,) or b.shape != (n,):
        raise TransportError("cost shape does not match the marginals")
    # Absorb rounding-level imbalance into the largest demand.
    b[np.argmax(b)] += a.sum() - b.sum()
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.max(np.abs(C))))

    basis, flows = _vogel(a, b, C)
    tree = _Tree(m, n, basis, flows)
    u, v = tree.duals(C)
    pivots = 0
    streak = 0
    while True:
        red = C - u[:, None] - v[None, :]
        if streak >= bland_after:
            cand = np.flatnonzero(red < -tol)
            if cand.size == 0:
                break
            flat = int(cand[0])
        else:
            flat = int(np.argmin(red))
            if red.flat[flat] >= -tol:
                break
        ei, ej = divmod(flat, n)
        col = m + ej
        # Cycle edges, identified by their child node; starting from the
        # entering column the signs alternate -, +, -, ...
        path = tree.cycle(col, ei)
        # Order edges along the walk col -> ... -> ei.
        minus = []
        plus = []
        for k, (node, _) in enumerate(path):
            (minus if k % 2 == 0 else plus).append(node)
        theta = min(tree.up_flow[c] for c in minus)
        ties = [c for c in minus if tree.up_flow[c] == theta]
        cut = min(ties, key=lambda c: tree.cell(c, tree.parent[c]))
        on_col_side = any(node == cut for node, from_left in path if from_left)
        for c in minus:
            tree.up_flow[c] -= theta
        for c in plus:
            tree.up_flow[c] += theta
        r = red[ei, ej]
        if on_col_side:
            inside, outside = col, ei
        else:
            inside, outside = ei, col
        members = tree.subtree(cut)
        rows = [k for k in members if k < m]
        cols = [k - m for k in members if k >= m]
        sign = 1.0 if inside == col else -1.0
        u[rows] -= sign * r
        v[cols] += sign * r
        tree.rehang(cut, inside, outside, theta)
        streak = streak + 1 if theta == 0.0 else 0
        pivots += 1
        if pivots > max_pivots:
            raise TransportError("pivot limit exceeded")
    u, v = tree.duals(C)
    pi = np.zeros((m, n))
    for node in range(1, m + n):
        i, j = tree.cell(node, tree.parent[node])
        pi[i, j] = tree.up_flow[node]
    return pi, u, v, pivots


def exact_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, cost) -> TransportPlan:
    """Exact optimal plan between two discrete measures of equal mass.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
    cost : ndarray, shape (len(mu), len(nu))
        Ground cost, e.g. squared geodesic distances.
    """
    check_balanced(mu, nu)
    C = np.asarray(cost, dtype=float)
    if C.shape != (len(mu), len(nu)):
        raise TransportError(f"cost has shape {C.shape}, expected {(len(mu), len(nu))}")
    pi, u, v, pivots = transportation_simplex(mu.weights, nu.weights, C)
    return TransportPlan(pi, float(np.sum(pi * C)), u, v, pivots)
