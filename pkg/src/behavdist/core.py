"""Domain types for finite continuous-time Markov processes.

Kernels are polynomials in ``theta = exp(-rate * t)``, so time ``t`` in
``[0, inf)`` maps onto ``theta`` in ``(0, 1]`` and a discount ``c**t`` becomes
``theta**beta`` with ``beta = -ln(c) / rate``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

KERNEL_TOL = 1e-12
TRIANGLE_TOL = 1e-9
VALIDATION_GRID = np.concatenate([[1e-6, 1e-3], np.linspace(0.0, 1.0, 1026)[1:]])


class ModelError(ValueError):
    """Raised when a model file or model object violates an invariant."""


class ModelParseError(ModelError):
    pass


class DistributionError(ValueError):
    pass


class PseudometricError(ValueError):
    pass


@dataclass(frozen=True)
class ThetaPolynomial:
    """Polynomial in theta, coefficients lowest degree first."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coefficients)
        if not coeffs:
            coeffs = (0.0,)
        if not all(math.isfinite(a) for a in coeffs):
            raise ModelError(f"non-finite polynomial coefficient in {coeffs}")
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, theta):
        return np.polynomial.polynomial.polyval(theta, self.coefficients)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def is_zero(self) -> bool:
        return all(a == 0.0 for a in self.coefficients)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported probability distribution over point indices."""

    support: tuple[int, ...]
    weights: np.ndarray

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(support) == 0:
            raise DistributionError("distribution has empty support")
        if len(support) != weights.size:
            raise DistributionError("support and weights differ in length")
        if len(set(support)) != len(support):
            raise DistributionError(f"support entries are not distinct: {support}")
        if np.any(weights < 0):
            raise DistributionError("negative weight")
        if abs(weights.sum() - 1.0) > KERNEL_TOL:
            raise DistributionError(f"weights sum to {weights.sum()!r}, expected 1")
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, index: int) -> DiscreteDistribution:
        return cls((index,), np.ones(1))

    def as_dict(self) -> dict[int, float]:
        return {s: float(w) for s, w in zip(self.support, self.weights)}


@dataclass(frozen=True)
class PseudometricTable:
    """Symmetric 1-bounded pseudometric on ``size`` points."""

    entries: np.ndarray
    check_triangle: bool = field(default=True, compare=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise PseudometricError(f"expected a square matrix, got shape {a.shape}")
        if np.any(np.diag(a) != 0.0):
            raise PseudometricError("diagonal must be exactly 0")
        if not np.array_equal(a, a.T):
            raise PseudometricError("table is not exactly symmetric")
        if np.any(a < 0.0) or np.any(a > 1.0) or not np.all(np.isfinite(a)):
            raise PseudometricError("entries must lie in [0, 1]")
        if self.check_triangle:
            worst = triangle_violation(a)
            if worst > TRIANGLE_TOL:
                raise PseudometricError(f"triangle inequality violated by {worst:.3g}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def from_matrix(cls, a, check_triangle: bool = True) -> PseudometricTable:
        """Symmetrise, zero the diagonal and clamp to [0, 1] before validating."""
        a = np.array(a, dtype=float)
        a = np.clip(0.5 * (a + a.T), 0.0, 1.0)
        np.fill_diagonal(a, 0.0)
        return cls(a, check_triangle=check_triangle)

    @classmethod
    def zeros(cls, size: int) -> PseudometricTable:
        return cls(np.zeros((size, size)))

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, key):
        return self.entries[key]

    def pairs(self):
        """Unordered index pairs ``(i, j)`` with ``i < j``."""
        n = self.size
        return [(i, j) for i in range(n) for j in range(i + 1, n)]


def triangle_violation(a: np.ndarray) -> float:
    """Largest ``a[i,k] - a[i,j] - a[j,k]`` over all triples (0 if none)."""
    if a.shape[0] < 3:
        return 0.0
    via = a[:, :, None] + a[None, :, :]  # via[i, j, k] = a[i,j] + a[j,k]
    return float(max(0.0, np.max(a - via.min(axis=1))))


@dataclass(frozen=True)
class DiscountSpec:
    """Discount ``c`` with ``beta = -ln(c)/rate`` so that ``c**t == theta**beta``."""

    c: float
    rate: float
    beta: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.c < 1.0):
            raise ValueError(f"discount c must lie in (0, 1), got {self.c}")
        if not self.rate > 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        object.__setattr__(self, "beta", -math.log(self.c) / self.rate)

    @classmethod
    def default_for(cls, model: Model) -> DiscountSpec:
        """The discount ``c = exp(-rate)``, i.e. ``beta = 1``."""
        return cls(math.exp(-model.rate), model.rate)

    def weight(self, theta):
        return np.power(theta, self.beta)


@dataclass(frozen=True)
class Model:
    """Finite-state continuous-time Markov process with theta-polynomial kernels.

    ``kernel[i]`` is a tuple of ``(target, ThetaPolynomial)`` rows giving
    ``P_t(i, {target})`` at ``theta = exp(-rate * t)``. Set
    ``identity_at_zero=False`` for one-step (discrete-time) models whose
    kernel does not depend on theta.
    """

    names: tuple[str, ...]
    obs: np.ndarray
    rate: float
    kernel: tuple[tuple[tuple[int, ThetaPolynomial], ...], ...]
    identity_at_zero: bool = True

    def __post_init__(self):
        obs = np.array(self.obs, dtype=float).reshape(-1)
        obs.setflags(write=False)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))
        self.validate()

    @property
    def n_states(self) -> int:
        return len(self.names)

    def index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.n_states:
                raise ModelError(f"state index {name} out of range")
            return int(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise ModelError(f"unknown state {name!r}") from None

    def validate(self) -> None:
        n = self.n_states
        if n == 0:
            raise ModelError("model has no states")
        if len(set(self.names)) != n:
            raise ModelError("state names are not unique")
        if self.obs.size != n:
            raise ModelError(f"obs has {self.obs.size} values for {n} states")
        bad = [self.names[i] for i in range(n) if not 0.0 <= self.obs[i] <= 1.0]
        if bad:
            raise ModelError(f"obs range: obs must lie in [0, 1], violated at {bad}")
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ModelError(f"rate must be positive, got {self.rate}")
        if len(self.kernel) != n:
            raise ModelError(f"kernel has {len(self.kernel)} rows for {n} states")
        grid = VALIDATION_GRID
        for i, row in enumerate(self.kernel):
            targets = [t for t, _ in row]
            if len(set(targets)) != len(targets):
                raise ModelError(f"kernel row {self.names[i]!r} repeats a target")
            total = np.zeros_like(grid)
            for t, poly in row:
                if not 0 <= t < n:
                    raise ModelError(f"kernel row {self.names[i]!r} targets index {t}")
                vals = poly(grid)
                if np.any(vals < -KERNEL_TOL) or np.any(vals > 1 + KERNEL_TOL):
                    k = int(np.argmax((vals < -KERNEL_TOL) | (vals > 1 + KERNEL_TOL)))
                    raise ModelError(
                        f"kernel entry {self.names[i]!r}->{self.names[t]!r} leaves [0, 1] "
                        f"at theta={grid[k]:.6g} (value {vals[k]:.6g})"
                    )
                total = total + vals
            err = np.abs(total - 1.0)
            if np.any(err > KERNEL_TOL):
                k = int(np.argmax(err))
                raise ModelError(
                    f"honesty: kernel row {self.names[i]!r} sums to {total[k]:.12g} "
                    f"at theta={grid[k]:.6g}"
                )
            if self.identity_at_zero:
                at_one = {t: float(poly(1.0)) for t, poly in row}
                for t, w in at_one.items():
                    want = 1.0 if t == i else 0.0
                    if abs(w - want) > KERNEL_TOL:
                        raise ModelError(
                            f"identity at t=0: row {self.names[i]!r} is not the point "
                            f"mass on its source at theta=1"
                        )
                if i not in at_one:
                    raise ModelError(
                        f"identity at t=0: row {self.names[i]!r} has no self entry"
                    )

    def targets(self, x: int) -> tuple[int, ...]:
        return tuple(t for t, poly in self.kernel[x] if not poly.is_zero())

    def coefficient_matrix(self, x: int, points: Sequence[int]) -> np.ndarray:
        """Coefficients of row ``x`` restricted to ``points``, shape (len(points), deg+1)."""
        width = 1 + max((p.degree for _, p in self.kernel[x]), default=0)
        out = np.zeros((len(points), width))
        where = {p: k for k, p in enumerate(points)}
        for t, poly in self.kernel[x]:
            if t in where:
                out[where[t], : poly.degree + 1] = poly.coefficients
        return out

    def kernel_matrix(self, theta: float) -> np.ndarray:
        """Row-stochastic matrix ``P[x, y]`` at a single theta."""
        _check_theta(theta)
        n = self.n_states
        out = np.zeros((n, n))
        for x, row in enumerate(self.kernel):
            for t, poly in row:
                out[x, t] = float(poly(theta))
        return np.clip(out, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "states": list(self.names),
            "obs": [float(v) for v in self.obs],
            "lambda": self.rate,
            "kernel": {
                self.names[x]: [[self.names[t], list(p.coefficients)] for t, p in row]
                for x, row in enumerate(self.kernel)
            },
            **({} if self.identity_at_zero else {"identity_at_zero": False}),
        }


def _check_theta(theta: float) -> None:
    if not (0.0 < theta <= 1.0):
        raise ValueError(f"theta must lie in (0, 1], got {theta}")


def model_from_dict(data: dict) -> Model:
    """Build a model from the JSON layout used by :func:`load_model`."""
    try:
        names = [str(s) for s in data["states"]]
        obs = [float(v) for v in data["obs"]]
        rate = float(data["lambda"])
        raw_kernel = data["kernel"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelParseError(f"malformed model: {exc}") from exc
    where = {s: i for i, s in enumerate(names)}
    if not isinstance(raw_kernel, dict):
        raise ModelParseError("'kernel' must map state names to rows")
    unknown = set(raw_kernel) - set(where)
    if unknown:
        raise ModelParseError(f"kernel rows for unknown states {sorted(unknown)}")
    kernel = []
    for s in names:
        if s not in raw_kernel:
            raise ModelParseError(f"no kernel row for state {s!r}")
        row = []
        for entry in raw_kernel[s]:
            try:
                target, coeffs = entry
                coeffs = [float(a) for a in coeffs]
            except (TypeError, ValueError) as exc:
                raise ModelParseError(f"bad kernel entry {entry!r} in row {s!r}") from exc
            if target not in where:
                raise ModelParseError(f"row {s!r} targets unknown state {target!r}")
            row.append((where[target], ThetaPolynomial(tuple(coeffs))))
        kernel.append(tuple(row))
    return Model(
        tuple(names),
        np.array(obs),
        rate,
        tuple(kernel),
        identity_at_zero=bool(data.get("identity_at_zero", True)),
    )


def load_model(path: str | Path) -> Model:
    """Read and validate a JSON model file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"{path}: {exc}") from exc
    return model_from_dict(data)


def kernel_at(model: Model, x: int, theta: float) -> DiscreteDistribution:
    """Distribution of the state after time ``t = -ln(theta)/rate`` from ``x``.

    Targets of (numerically) zero weight are dropped from the support."""
    _check_theta(theta)
    support, weights = [], []
    for t, poly in model.kernel[x]:
        w = float(poly(theta))
        if w > KERNEL_TOL:
            support.append(t)
            weights.append(min(w, 1.0))
    weights = np.array(weights)
    weights /= weights.sum()
    return DiscreteDistribution(tuple(support), weights)


def obs_metric(model: Model) -> PseudometricTable:
    """``|obs(i) - obs(j)|`` for all state pairs."""
    o = model.obs
    return PseudometricTable(np.abs(o[:, None] - o[None, :]))
