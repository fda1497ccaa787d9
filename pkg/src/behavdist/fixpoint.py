"""Monotone iteration of ``F_c`` from the observable metric.

Plain iteration ``delta_{n+1} = F_c(delta_n)`` is entrywise nondecreasing and
every iterate is a lower bound on the least fixpoint, but it can be very
slow: ``F_c`` is not a contraction, and on the toy model several entries
approach a fixpoint where the one-dimensional map is tangent to the
diagonal, so the error only decays like ``1/n``.

With ``accelerate=True`` each plain step is followed by a safeguarded Newton
step on ``F_c(m) - m = 0`` restricted to the pairs that are still moving,
using the envelope-theorem Jacobian from the optimal couplings. On tangent
fixpoints Newton halves the remaining error per step. A Newton step is kept
only if it is monotone (no entry decreases below the plain step) and the
result is still a valid pseudometric; otherwise the plain step is used.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import DiscountSpec, Model, PseudometricError, PseudometricTable, obs_metric
from .functional import SupStrategy, apply_functional, evaluate_functional, functional_jacobian

# F_c(m) - m below NOISE_FLOOR is treated as zero; below STALL_FLOOR a rejected
# Newton step means no further progress is possible in double precision.
NOISE_FLOOR = 1e-15
STALL_FLOOR = 1e-12
FIXPOINT_TOL = 1e-6


class FixpointPreconditionError(ValueError):
    """The table handed to the least-fixpoint check is not a fixpoint above delta_0."""


@dataclass
class IterationTrace:
    tables: list[PseudometricTable]
    residuals: list[float]
    converged: bool
    iterations: int
    steps: list[str] = field(default_factory=list)
    final_residual: float = float("nan")

    @property
    def result(self) -> PseudometricTable:
        return self.tables[-1]

    def check_monotone(self, tol: float = 1e-9) -> bool:
        return all(
            np.all(b.entries >= a.entries - tol) for a, b in zip(self.tables, self.tables[1:])
        )

    def pair_rows(self, names):
        for n, table in enumerate(self.tables):
            for i, j in table.pairs():
                yield n, names[i], names[j], float(table.entries[i, j])

    def residual_rows(self):
        for n, r in enumerate(self.residuals):
            yield n, r


def _sup_norm(a: PseudometricTable, b: PseudometricTable) -> float:
    return float(np.max(np.abs(a.entries - b.entries)))


def _newton_step(model, disc, m, fm, argmax):
    """Newton trial point and its step length, or ``None`` if rejected."""
    pairs = m.pairs()
    f = np.array([fm.entries[p] - m.entries[p] for p in pairs])
    active = f > NOISE_FLOOR
    if not np.any(active):
        return None
    J = functional_jacobian(model, disc, m, argmax)
    A = np.eye(int(active.sum())) - J[np.ix_(active, active)]
    try:
        d = np.linalg.solve(A, f[active])
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)) or np.any(d < -NOISE_FLOOR):
        return None
    delta = np.zeros(len(pairs))
    delta[active] = d
    trial = m.entries.copy()
    for k, (i, j) in enumerate(pairs):
        trial[i, j] = trial[j, i] = m.entries[i, j] + delta[k]
    trial = np.maximum(trial, fm.entries)
    # Backtrack towards the plain step until the trial is a valid pseudometric.
    scale = 1.0
    for _ in range(30):
        point = fm.entries + scale * (trial - fm.entries)
        if np.all(point <= 1.0 + 1e-12):
            try:
                table = PseudometricTable.from_matrix(point)
            except PseudometricError:
                pass
            else:
                return table, scale * float(np.max(delta))
        scale *= 0.5
    return None


def iterate(
    model: Model,
    disc: DiscountSpec,
    strat: SupStrategy = SupStrategy(),
    tol_fix: float = 1e-9,
    max_iter: int = 200,
    accelerate: bool = True,
) -> IterationTrace:
    """Iterate ``F_c`` from ``obs_metric(model)``.

    Stops when the fixpoint residual ``||F_c(m) - m||`` drops below
    ``tol_fix`` (and, when accelerating, the Newton correction is below
    ``tol_fix`` too, since at tangent fixpoints the residual is quadratic in
    the error), or when no step makes progress at solver roundoff.
    Non-convergence within ``max_iter`` is reported through ``converged``
    and ``final_residual``.
    """
    if tol_fix <= 0:
        raise ValueError("tol_fix must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    m = obs_metric(model)
    tables, residuals, steps = [m], [], []
    converged = False
    rho = float("nan")
    for _ in range(max_iter):
        res = evaluate_functional(model, disc, m, strat)
        fm = res.table
        rho = _sup_norm(fm, m)
        nxt, kind, estimate = fm, "plain", rho
        if accelerate and rho > NOISE_FLOOR:
            trial = _newton_step(model, disc, m, fm, res.argmax_theta)
            if trial is not None:
                nxt, estimate = trial
                kind = "newton"
        tables.append(nxt)
        residuals.append(_sup_norm(nxt, m))
        steps.append(kind)
        m = nxt
        stalled = kind == "plain" and rho < STALL_FLOOR
        if rho <= NOISE_FLOOR or stalled or (rho < tol_fix and estimate < tol_fix):
            converged = True
            break
    return IterationTrace(tables, residuals, converged, len(residuals), steps, rho)


def verify_fixpoint(
    model: Model, disc: DiscountSpec, strat: SupStrategy, m: PseudometricTable
) -> float:
    """``||F_c(m) - m||_inf``."""
    return _sup_norm(apply_functional(model, disc, m, strat), m)


def check_least_fixpoint_bound(
    model: Model,
    disc: DiscountSpec,
    strat: SupStrategy,
    m: PseudometricTable,
    delta_bar: PseudometricTable,
    tol: float = FIXPOINT_TOL,
) -> bool:
    """Whether a fixpoint ``m`` above the observable metric dominates ``delta_bar``.

    Every such fixpoint bounds the least one from above, so a ``False``
    result means ``delta_bar`` overshoots the least fixpoint."""
    base = obs_metric(model)
    if np.any(m.entries < base.entries - 1e-12):
        raise FixpointPreconditionError("m is not above the observable metric")
    residual = verify_fixpoint(model, disc, strat, m)
    if residual > tol:
        raise FixpointPreconditionError(f"m is not a fixpoint (residual {residual:.3g})")
    return bool(np.all(m.entries >= delta_bar.entries - tol))


def trace_to_csv(trace: IterationTrace, names) -> tuple[str, str]:
    """Two CSV documents: ``iteration,state_a,state_b,value`` and ``iteration,residual``."""
    pairs = io.StringIO()
    w = csv.writer(pairs, lineterminator="\n")
    w.writerow(["iteration", "state_a", "state_b", "value"])
    for n, a, b, v in trace.pair_rows(names):
        w.writerow([n, a, b, f"{v:.12g}"])
    res = io.StringIO()
    w = csv.writer(res, lineterminator="\n")
    w.writerow(["iteration", "residual"])
    for n, r in trace.residual_rows():
        w.writerow([n, f"{r:.12g}"])
    return pairs.getvalue(), res.getvalue()
