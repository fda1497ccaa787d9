"""Continuous-state examples built on standard Brownian motion.

* absorbed Brownian motion on [0, 1] (stopped on hitting 0 or 1), with
  ``obs(x) = x``, simulated by Euler steps as a particle cloud;
* the geometric process ``X_t = x * exp(B_t)``, for which only the
  hitting-time lower bound ``sup_t c^t P(tau' < t)`` is evaluated.

Absorption is checked after every step, including crossings that happen
between grid points: given both endpoints inside (0, 1), a Brownian bridge
of length ``h`` crosses 0 with probability ``exp(-2ab/h)`` (and 1 with the
mirrored formula). Without that correction the discretely absorbed walk is
not a martingale and its mean drifts by ``O(sqrt(h))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .transport import wasserstein_1d

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class ParticleDistribution:
    """Weighted atoms in [0, 1]; ``source`` is ``"exact_atom"`` or ``"monte_carlo"``."""

    positions: np.ndarray
    weights: np.ndarray
    source: str
    seed: int | None = None
    n_samples: int = 1

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pos.size != w.size or pos.size == 0:
            raise ValueError("positions and weights must be nonempty and equal in length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must be nonnegative and sum to 1")
        if np.any(pos < 0.0) or np.any(pos > 1.0):
            raise ValueError("positions must lie in [0, 1]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, x: float) -> ParticleDistribution:
        return cls(np.array([x]), np.ones(1), "exact_atom")

    def mean(self) -> float:
        return float(self.weights @ self.positions)

    def variance(self) -> float:
        mu = self.mean()
        return float(self.weights @ (self.positions - mu) ** 2)

    def mass_at(self, point: float) -> float:
        return float(self.weights[self.positions == point].sum())

    def standard_error(self) -> float:
        """Standard error of :meth:`mean` (0 for exact atoms)."""
        if self.source == "exact_atom":
            return 0.0
        return math.sqrt(self.variance() / self.n_samples)


def default_step(t: float) -> float:
    return 1e-3 * max(t, 1.0)


def _collapse(b: np.ndarray, seed, n: int) -> ParticleDistribution:
    at0 = np.count_nonzero(b == 0.0)
    at1 = np.count_nonzero(b == 1.0)
    interior = np.sort(b[(b > 0.0) & (b < 1.0)])
    pos = [interior]
    w = [np.full(interior.size, 1.0 / n)]
    for point, count in ((0.0, at0), (1.0, at1)):
        if count:
            pos.append(np.array([point]))
            w.append(np.array([count / n]))
    weights = np.concatenate(w)
    return ParticleDistribution(
        np.concatenate(pos), weights / weights.sum(), "monte_carlo", seed, n
    )


def simulate_absorbed(
    x: float, times, n_samples: int, seed: int, step: float | None = None
) -> list[ParticleDistribution]:
    """Snapshots of absorbed Brownian motion from ``x`` at each of ``times``.

    All snapshots come from the same ``n_samples`` paths. ``step`` defaults
    to ``1e-3 * max(max(times), 1)``; each inter-snapshot interval is split
    into equal substeps no longer than ``step``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    times = [float(t) for t in times]
    if any(t < 0 for t in times):
        raise ValueError("times must be nonnegative")
    if x in (0.0, 1.0):
        return [ParticleDistribution.dirac(x) for _ in times]
    h = step if step is not None else default_step(max(times, default=0.0))
    if h <= 0:
        raise ValueError("step must be positive")

    rng = np.random.default_rng(seed)
    b = np.full(n_samples, float(x))
    alive = np.ones(n_samples, dtype=bool)
    now = 0.0
    snapshots: dict[float, ParticleDistribution] = {}
    for target in sorted(set(times)):
        span = target - now
        if span > 0:
            k = max(1, math.ceil(span / h - 1e-12))
            dt = span / k
            for _ in range(k):
                idx = np.flatnonzero(alive)
                if idx.size == 0:
                    break
                a = b[idx]
                nb = a + math.sqrt(dt) * rng.standard_normal(idx.size)
                u = rng.random(idx.size)
                lo = nb <= 0.0
                hi = nb >= 1.0
                inside = ~(lo | hi)
                p0 = np.exp(-2.0 * a * np.where(inside, nb, 0.0) / dt)
                p1 = np.exp(-2.0 * (1.0 - a) * np.where(inside, 1.0 - nb, 0.0) / dt)
                cross0 = inside & (u < p0)
                cross1 = inside & ~cross0 & (u < p0 + p1)
                lo |= cross0
                hi |= cross1
                nb[lo] = 0.0
                nb[hi] = 1.0
                b[idx] = nb
                alive[idx[lo | hi]] = False
            now = target
        snapshots[target] = _collapse(b, seed, n_samples)
    return [snapshots[t] for t in times]


def absorbed_bm_kernel(
    x: float, t: float, n_samples: int, seed: int, step: float | None = None
) -> ParticleDistribution:
    """Monte Carlo approximation of the law of ``B_{t ^ tau}`` started at ``x``."""
    if t == 0:
        return ParticleDistribution.dirac(x)
    return simulate_absorbed(x, [t], n_samples, seed, step if step else default_step(t))[0]


@dataclass(frozen=True)
class BMResult:
    value: float
    argmax_t: float
    standard_error: float
    seed: int | None
    # (t, c^t * W, standard error) for every grid time
    terms: tuple[tuple[float, float, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "argmax_t": self.argmax_t,
            "standard_error": self.standard_error,
            "seed": self.seed,
            "terms": [list(term) for term in self.terms],
        }


def default_bm_times() -> np.ndarray:
    return np.array([0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0])


def bm_delta1(
    x: float,
    y: float,
    c: float,
    t_grid=None,
    n_samples: int = 100_000,
    seed: int = 0,
    step: float | None = None,
) -> BMResult:
    """``sup_t c^t W(|.-.|)(P_t(x), P_t(y))`` over ``t_grid`` (``t = 0`` always included).

    The reported standard error is that of the maximising term, computed as
    if the transport cost were the difference of means (exact when one side is
    a point mass, as for ``(0, x)`` and ``(1, y)``).
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError("x and y must lie in [0, 1]")
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    times = np.asarray(default_bm_times() if t_grid is None else t_grid, dtype=float)
    times = np.unique(np.concatenate([[0.0], times]))
    terms = [(0.0, abs(x - y), 0.0)]
    if x != y:
        seed_x, seed_y = np.random.SeedSequence(seed).spawn(2)
        clouds_x = simulate_absorbed(x, times, n_samples, seed_x, step)
        clouds_y = simulate_absorbed(y, times, n_samples, seed_y, step)
        for t, px, py in zip(times, clouds_x, clouds_y):
            if t == 0.0:
                continue
            w = wasserstein_1d(px.positions, px.weights, py.positions, py.weights)
            se = c**t * math.hypot(px.standard_error(), py.standard_error())
            terms.append((float(t), float(c**t * w), float(se)))
    t_best, v_best, se_best = max(terms, key=lambda term: term[1])
    return BMResult(v_best, t_best, se_best, seed, tuple(terms))


def hitting_cdf(x: float, t: float) -> float:
    """``P^x(H_0 < t) = sqrt(2/pi) * int_{x/sqrt(t)}^inf exp(-s^2/2) ds``.

    ``x = 0`` is taken as the limit ``x / sqrt(t) -> 0+`` (value 1).
    """
    if x < 0 or t < 0:
        raise ValueError("hitting_cdf needs x >= 0 and t >= 0")
    if x == 0.0:
        return 1.0
    if t == 0.0:
        return 0.0
    return math.erfc(x / math.sqrt(2.0 * t))


def default_gbm_times() -> np.ndarray:
    return np.unique(np.concatenate([[0.0, 4.0], np.geomspace(1e-3, 1e3, 2401)]))


def gbm_lower_bound(x: float, c: float, t_grid=None) -> tuple[float, float]:
    """``max_t c^t P(tau' < t)`` for ``X_t = x exp(B_t)``, ``tau'`` the hitting time of
    ``-ln x`` by standard Brownian motion. Returns ``(bound, argmax_t)``."""
    if not 0.0 < x <= 1.0:
        raise ValueError("x must lie in (0, 1]")
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    times = np.asarray(default_gbm_times() if t_grid is None else t_grid, dtype=float)
    level = -math.log(x)
    best, arg = -1.0, float("nan")
    for t in times:
        v = c**t * hitting_cdf(level, float(t))
        if v > best:
            best, arg = v, float(t)
    return float(best), arg
