"""The discounted functional ``F_c(m)(x, y) = sup_t c^t W(m)(P_t(x), P_t(y))``.

The supremum is taken over ``theta = exp(-rate * t)`` in ``(0, 1]``, where the
discount is ``theta**beta``. In ``theta_grid`` mode the objective is scanned
on a uniform grid (``theta = 1`` exact, ``1e-12`` as the left sentinel for
``t -> inf``) and the best grid cell is refined by golden-section search. The
objective has kinks wherever the optimal coupling changes, so no global
unimodality is assumed; the search is only local around the best grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DiscountSpec, Model, PseudometricTable, kernel_at
from .transport import (
    MAX_VERTEX_POINTS,
    dual_transport_value,
    kantorovich,
    lipschitz_vertices,
)

THETA_SENTINEL = 1e-12
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SupStrategy:
    mode: str = "theta_grid"
    grid_points: int = 8193
    refine_iters: int = 60
    fixed_theta: float | None = None

    def __post_init__(self):
        if self.mode not in ("theta_grid", "discrete_step"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be nonnegative")
        if self.mode == "discrete_step":
            if self.fixed_theta is None or not 0.0 < self.fixed_theta <= 1.0:
                raise ValueError("discrete_step needs fixed_theta in (0, 1]")

    def grid(self) -> np.ndarray:
        thetas = np.linspace(0.0, 1.0, self.grid_points)
        thetas[0] = THETA_SENTINEL
        return thetas


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax_theta: float


def discounted_transport(
    model: Model, disc: DiscountSpec, m: PseudometricTable, x: int, y: int, theta: float
) -> float:
    """``theta**beta * W(m)(P(x), P(y))`` at a single theta, via the exact solver."""
    P = kernel_at(model, x, theta)
    if x == y:
        return 0.0
    Q = kernel_at(model, y, theta)
    value = float(disc.weight(theta)) * kantorovich(m, P, Q).cost
    return min(max(value, 0.0), 1.0)


def golden_section_max(
    f: Callable[[float], float], a: float, b: float, iters: int
) -> tuple[float, float]:
    """Best point seen by ``iters`` golden-section steps on ``[a, b]``."""
    best = max(((a, f(a)), (b, f(b))), key=lambda p: p[1])
    if iters == 0 or b <= a:
        return best
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    for p in ((c, fc), (d, fd)):
        if p[1] > best[1]:
            best = p
    return best


class PairObjective:
    """``theta -> theta**beta * W(m)(P_theta(x), P_theta(y))`` for one state pair.

    With at most ``MAX_VERTEX_POINTS`` support points the transport value is
    the maximum over the extreme points of the dual feasible set, which makes
    whole-grid evaluation a single matrix product. Larger supports fall back to
    one transportation-simplex solve per theta.
    """

    def __init__(self, model: Model, disc: DiscountSpec, m: PseudometricTable, x: int, y: int):
        self.model, self.disc, self.m, self.x, self.y = model, disc, m, x, y
        points = sorted(set(model.targets(x)) | set(model.targets(y)))
        self.points = points
        cx = model.coefficient_matrix(x, points)
        cy = model.coefficient_matrix(y, points)
        width = max(cx.shape[1], cy.shape[1])
        diff = np.zeros((len(points), width))
        diff[:, : cx.shape[1]] += cx
        diff[:, : cy.shape[1]] -= cy
        self._diff_coeffs = diff.T
        sub = m.entries[np.ix_(points, points)]
        self._vertices = lipschitz_vertices(sub) if len(points) <= MAX_VERTEX_POINTS else None

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self._vertices is None:
            flat = np.atleast_1d(theta)
            out = np.array(
                [discounted_transport(self.model, self.disc, self.m, self.x, self.y, t) for t in flat]
            )
            return out.reshape(theta.shape) if theta.ndim else float(out[0])
        diff = np.polynomial.polynomial.polyval(theta, self._diff_coeffs)
        w = dual_transport_value(self._vertices, diff)
        out = np.clip(self.disc.weight(theta) * w, 0.0, 1.0)
        return out if theta.ndim else float(out)


def sup_over_time(
    model: Model,
    disc: DiscountSpec,
    m: PseudometricTable,
    x: int,
    y: int,
    strat: SupStrategy = SupStrategy(),
) -> SupResult:
    if x == y:
        return SupResult(0.0, 1.0)
    if strat.mode == "discrete_step":
        theta = float(strat.fixed_theta)
        return SupResult(discounted_transport(model, disc, m, x, y, theta), theta)

    objective = PairObjective(model, disc, m, x, y)
    grid = strat.grid()
    values = objective(grid)
    k = int(np.argmax(values))
    best = (float(grid[k]), float(values[k]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    refined = golden_section_max(objective, float(lo), float(hi), strat.refine_iters)
    if refined[1] > best[1]:
        best = refined
    return SupResult(best[1], best[0])


@dataclass(frozen=True)
class FunctionalResult:
    table: PseudometricTable
    argmax_theta: np.ndarray


def evaluate_functional(
    model: Model, disc: DiscountSpec, m: PseudometricTable, strat: SupStrategy = SupStrategy()
) -> FunctionalResult:
    """``F_c(m)`` for every unordered pair, with the maximising theta of each."""
    n = model.n_states
    out = np.zeros((n, n))
    arg = np.ones((n, n))
    for x, y in m.pairs():
        res = sup_over_time(model, disc, m, x, y, strat)
        out[x, y] = out[y, x] = res.value
        arg[x, y] = arg[y, x] = res.argmax_theta
    return FunctionalResult(PseudometricTable.from_matrix(out), arg)


def apply_functional(
    model: Model, disc: DiscountSpec, m: PseudometricTable, strat: SupStrategy = SupStrategy()
) -> PseudometricTable:
    return evaluate_functional(model, disc, m, strat).table


def functional_jacobian(
    model: Model, disc: DiscountSpec, m: PseudometricTable, argmax_theta: np.ndarray
) -> np.ndarray:
    """Sensitivities ``d F_c(m)(p) / d m(q)`` over unordered pairs ``p, q``.

    By the envelope theorem the derivative of ``theta**beta * W(m)`` with
    respect to one cost entry is the discounted mass the optimal coupling at
    the maximiser puts on that entry (both orientations). Where the optimal
    coupling is not unique this is one element of the generalised gradient.
    """
    pairs = m.pairs()
    where = {p: k for k, p in enumerate(pairs)}
    J = np.zeros((len(pairs), len(pairs)))
    for k, (x, y) in enumerate(pairs):
        theta = float(argmax_theta[x, y])
        plan = kantorovich(m, kernel_at(model, x, theta), kernel_at(model, y, theta))
        scale = float(disc.weight(theta))
        for i, a in enumerate(plan.source):
            for j, b in enumerate(plan.target):
                if a != b and plan.plan[i, j] > 0.0:
                    J[k, where[(min(a, b), max(a, b))]] += scale * plan.plan[i, j]
    return J
