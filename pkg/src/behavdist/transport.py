"""Exact Kantorovich transport between finitely supported distributions.

``kantorovich`` runs the transportation simplex (MODI potentials, Bland's rule)
on the primal problem and returns the optimal coupling together with a single
Lipschitz dual witness ``h`` on the union of both supports.

``lipschitz_vertices`` enumerates the extreme points of the dual feasible set
``{h : h_i - h_j <= m_ij}``. Since those do not depend on the two
distributions, ``W(P, Q) = max_v v . (P - Q)`` can then be evaluated for many
pairs of marginals at once, which the functional uses for its theta scans.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import DiscreteDistribution, PseudometricTable

MARGINAL_TOL = 1e-9
REDUCED_COST_TOL = 1e-12


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class TransportPlan:
    """Optimal coupling ``plan[i, j]`` between ``source[i]`` and ``target[j]``.

    ``potentials[k]`` is the dual witness at ``points[k]`` (the sorted union of
    both supports), shifted so its minimum is 0.
    """

    source: tuple[int, ...]
    target: tuple[int, ...]
    plan: np.ndarray
    cost: float
    points: tuple[int, ...]
    potentials: np.ndarray

    def potential(self, point: int) -> float:
        return float(self.potentials[self.points.index(point)])

    def dual_value(self, P: DiscreteDistribution, Q: DiscreteDistribution) -> float:
        h = dict(zip(self.points, self.potentials))
        return float(
            sum(w * h[s] for s, w in zip(P.support, P.weights))
            - sum(w * h[s] for s, w in zip(Q.support, Q.weights))
        )


def _cost_matrix(m, rows, cols) -> np.ndarray:
    a = m.entries if isinstance(m, PseudometricTable) else np.asarray(m, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise TransportError(f"cost table must be square, got shape {a.shape}")
    for s in itertools.chain(rows, cols):
        if not 0 <= s < n:
            raise TransportError(f"support index {s} outside cost table of size {n}")
    return a


def _northwest_corner(supply: np.ndarray, demand: np.ndarray):
    a, b = supply.size, demand.size
    s, d = supply.copy(), demand.copy()
    x = np.zeros((a, b))
    basis = []
    i = j = 0
    while True:
        q = min(s[i], d[j])
        x[i, j] = q
        s[i] -= q
        d[j] -= q
        basis.append((i, j))
        if i == a - 1 and j == b - 1:
            break
        if i == a - 1:
            j += 1
        elif j == b - 1 or s[i] <= d[j]:
            i += 1
        else:
            j += 1
    return x, basis


def _potentials(cost: np.ndarray, basis, a: int, b: int):
    # Rows are nodes 0..a-1, columns a..a+b-1; the basis is a spanning tree.
    u = np.full(a, np.nan)
    v = np.full(b, np.nan)
    u[0] = 0.0
    adj = [[] for _ in range(a + b)]
    for i, j in basis:
        adj[i].append(a + j)
        adj[a + j].append(i)
    stack = [0]
    while stack:
        node = stack.pop()
        for nb in adj[node]:
            if node < a:
                j = nb - a
                if np.isnan(v[j]):
                    v[j] = cost[node, j] - u[node]
                    stack.append(nb)
            else:
                if np.isnan(u[nb]):
                    u[nb] = cost[nb, node - a] - v[node - a]
                    stack.append(nb)
    return u, v


def _tree_path(basis, a: int, b: int, start: int, goal: int):
    adj = [[] for _ in range(a + b)]
    for i, j in basis:
        adj[i].append(a + j)
        adj[a + j].append(i)
    prev = {start: None}
    queue = [start]
    for node in queue:
        if node == goal:
            break
        for nb in sorted(adj[node]):
            if nb not in prev:
                prev[nb] = node
                queue.append(nb)
    path = [goal]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def transport_simplex(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray):
    """Optimal transportation plan for a dense cost matrix.

    Returns ``(plan, u, v)`` with ``u[i] + v[j] <= cost[i, j]`` and equality on
    the final basis. Entering cells are chosen by Bland's rule (first cell in
    row-major order with negative reduced cost); the leaving cell is the
    lowest-index minimiser of the ratio test.
    """
    a, b = supply.size, demand.size
    x, basis = _northwest_corner(supply, demand)
    max_pivots = 50 * (a + b) * a * b + 100
    for _ in range(max_pivots):
        u, v = _potentials(cost, basis, a, b)
        reduced = cost - u[:, None] - v[None, :]
        in_basis = np.zeros((a, b), dtype=bool)
        for i, j in basis:
            in_basis[i, j] = True
        candidates = np.argwhere((reduced < -REDUCED_COST_TOL) & ~in_basis)
        if candidates.size == 0:
            return x, u, v
        ei, ej = (int(k) for k in candidates[0])
        # Path col ej -> row ei in the basis tree closes the cycle with (ei, ej).
        path = _tree_path(basis, a, b, a + ej, ei)
        cells = []
        for p, q in zip(path[:-1], path[1:]):
            cells.append((q, p - a) if p >= a else (p, q - a))
        # cells alternate -, +, -, ... starting from the column side
        minus = cells[0::2]
        plus = cells[1::2]
        step = min(x[c] for c in minus)
        leaving = min(c for c in minus if x[c] == step)
        for c in minus:
            x[c] -= step
        for c in plus:
            x[c] += step
        x[ei, ej] += step
        x[leaving] = 0.0
        basis = [c for c in basis if c != leaving] + [(ei, ej)]
    raise TransportError("transportation simplex did not terminate")


def kantorovich(m, P: DiscreteDistribution, Q: DiscreteDistribution) -> TransportPlan:
    """Exact optimal transport cost ``W(m)(P, Q)`` with plan and dual witness."""
    if not P.support or not Q.support:
        raise TransportError("degenerate (empty-support) distribution")
    table = _cost_matrix(m, P.support, Q.support)
    rows, cols = list(P.support), list(Q.support)
    cost = table[np.ix_(rows, cols)]
    plan, u, v = transport_simplex(cost, np.asarray(P.weights), np.asarray(Q.weights))
    plan = np.clip(plan, 0.0, None)
    total = float(np.clip(np.sum(plan * cost), 0.0, 1.0))

    points = tuple(sorted(set(rows) | set(cols)))
    # c-transform of the column potentials: Lipschitz w.r.t. the table and tight
    # on the optimal plan.
    h = np.array([np.min(table[z, cols] - v) for z in points])
    h -= h.min()
    return TransportPlan(P.support, Q.support, plan, total, points, h)


def verify_coupling(
    plan, P: DiscreteDistribution, Q: DiscreteDistribution, tol: float = MARGINAL_TOL
) -> bool:
    """True iff ``plan`` has marginals ``P`` (rows) and ``Q`` (columns)."""
    gamma = plan.plan if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    if gamma.shape != (len(P.support), len(Q.support)):
        raise TransportError(
            f"plan shape {gamma.shape} does not match supports "
            f"{len(P.support)} x {len(Q.support)}"
        )
    if np.any(gamma < -tol):
        return False
    return bool(
        np.all(np.abs(gamma.sum(axis=1) - P.weights) <= tol)
        and np.all(np.abs(gamma.sum(axis=0) - Q.weights) <= tol)
    )


@lru_cache(maxsize=None)
def _spanning_trees(k: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All labelled spanning trees of K_k as (parent, child) edges in BFS order from 0."""
    if k == 1:
        return ((),)
    trees = []
    for code in itertools.product(range(k), repeat=k - 2):
        degree = [1] * k
        for c in code:
            degree[c] += 1
        edges = []
        for c in code:
            leaf = min(i for i in range(k) if degree[i] == 1)
            edges.append((leaf, c))
            degree[leaf] -= 1
            degree[c] -= 1
        u, w = (i for i in range(k) if degree[i] == 1)
        edges.append((u, w))
        adj = {i: [] for i in range(k)}
        for p, q in edges:
            adj[p].append(q)
            adj[q].append(p)
        order, seen, queue = [], {0}, [0]
        for node in queue:
            for nb in sorted(adj[node]):
                if nb not in seen:
                    seen.add(nb)
                    order.append((node, nb))
                    queue.append(nb)
        trees.append(tuple(order))
    return tuple(trees)


@lru_cache(maxsize=None)
def _sign_patterns(k: int) -> np.ndarray:
    return np.array(list(itertools.product((-1.0, 1.0), repeat=max(k - 1, 0))))


MAX_VERTEX_POINTS = 6


def lipschitz_vertices(cost: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Extreme points (up to constants, ``h[0] = 0``) of ``{h : h_i - h_j <= cost_ij}``.

    Each vertex has a spanning tree of tight constraints, so all trees and all
    edge orientations are enumerated and the feasible ones kept. Intended for
    at most ``MAX_VERTEX_POINTS`` points.
    """
    cost = np.asarray(cost, dtype=float)
    k = cost.shape[0]
    if k > MAX_VERTEX_POINTS:
        raise TransportError(f"vertex enumeration limited to {MAX_VERTEX_POINTS} points")
    if k == 1:
        return np.zeros((1, 1))
    signs = _sign_patterns(k)
    found = []
    for tree in _spanning_trees(k):
        h = np.zeros((signs.shape[0], k))
        for e, (p, q) in enumerate(tree):
            h[:, q] = h[:, p] + signs[:, e] * cost[p, q]
        gap = h[:, :, None] - h[:, None, :] - cost[None, :, :]
        ok = np.all(gap <= tol, axis=(1, 2))
        if np.any(ok):
            found.append(h[ok])
    verts = np.concatenate(found)
    _, keep = np.unique(np.round(verts, 12), axis=0, return_index=True)
    return verts[np.sort(keep)]


def dual_transport_value(vertices: np.ndarray, diff: np.ndarray) -> np.ndarray:
    """``max_v v . diff`` for ``diff = P - Q`` of shape (k,) or (k, n_cases)."""
    return np.max(vertices @ diff, axis=0)


def wasserstein_1d(
    x_pos: np.ndarray, x_w: np.ndarray, y_pos: np.ndarray, y_w: np.ndarray
) -> float:
    """Exact W1 for ground cost ``|a - b|`` on the real line: ``int |F - G|``."""
    pos = np.concatenate([x_pos, y_pos])
    signed = np.concatenate([x_w, -np.asarray(y_w)])
    order = np.argsort(pos, kind="stable")
    pos, signed = pos[order], signed[order]
    cdf_gap = np.cumsum(signed)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(pos)))
