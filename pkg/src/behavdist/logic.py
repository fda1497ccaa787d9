"""Real-valued modal logic over a finite model and distance lower bounds.

Formulas are built from rational constants, ``obs``, ``min``, the complement
``1 - f``, truncated subtraction ``f - q`` (floored at 0) and the discounted
time shift ``<t> f = c^t * E[f(X_t)]``. Every formula induces a lower bound
``|f(x) - f(y)|`` on the behavioural distance.

Text syntax: ``obs``, ``0.5`` (or ``1/3``), ``min(F,G)``, ``not(F)``,
``sub(F,q)``, ``add(F,q)``, ``shift(t,F)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import DiscountSpec, Model


class LogicSyntaxError(ValueError):
    pass


class LogicExpr:
    """Base class of formula nodes."""

    __slots__ = ()

    @property
    def depth(self) -> int:
        raise NotImplementedError

    def __str__(self) -> str:
        return format_expr(self)


def _fraction(q) -> Fraction:
    q = Fraction(q).limit_denominator(10**12) if isinstance(q, float) else Fraction(q)
    if not 0 <= q <= 1:
        raise ValueError(f"constant {q} outside [0, 1]")
    return q


@dataclass(frozen=True)
class Const(LogicExpr):
    q: Fraction

    def __post_init__(self):
        object.__setattr__(self, "q", _fraction(self.q))

    @property
    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class Obs(LogicExpr):
    @property
    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class Min(LogicExpr):
    left: LogicExpr
    right: LogicExpr

    @property
    def depth(self) -> int:
        return 1 + max(self.left.depth, self.right.depth)


@dataclass(frozen=True)
class Neg(LogicExpr):
    inner: LogicExpr

    @property
    def depth(self) -> int:
        return 1 + self.inner.depth


@dataclass(frozen=True)
class SubQ(LogicExpr):
    inner: LogicExpr
    q: Fraction

    def __post_init__(self):
        object.__setattr__(self, "q", _fraction(self.q))

    @property
    def depth(self) -> int:
        return 1 + self.inner.depth


@dataclass(frozen=True)
class Shift(LogicExpr):
    # Time is real-valued: t -> <t>f is continuous, so restricting to
    # rational times gives the same suprema.
    t: float
    inner: LogicExpr

    def __post_init__(self):
        t = float(self.t)
        if not (t >= 0.0 and math.isfinite(t)):
            raise ValueError(f"shift time must be a nonnegative real, got {self.t}")
        object.__setattr__(self, "t", t)

    @property
    def depth(self) -> int:
        return 1 + self.inner.depth


def PlusQ(inner: LogicExpr, q) -> LogicExpr:
    """``min(1, f + q)``, expressed as ``1 - ((1 - f) - q)``."""
    return Neg(SubQ(Neg(inner), q))


# -- text form ---------------------------------------------------------------


def _format_q(q: Fraction) -> str:
    d = q.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        text = f"{float(q):.15g}"
        if Fraction(text) == q:
            return text
    return f"{q.numerator}/{q.denominator}"


def format_expr(e: LogicExpr) -> str:
    if isinstance(e, Const):
        return _format_q(e.q)
    if isinstance(e, Obs):
        return "obs"
    if isinstance(e, Min):
        return f"min({format_expr(e.left)},{format_expr(e.right)})"
    if isinstance(e, Neg):
        inner = e.inner
        if isinstance(inner, SubQ) and isinstance(inner.inner, Neg):
            return f"add({format_expr(inner.inner.inner)},{_format_q(inner.q)})"
        return f"not({format_expr(inner)})"
    if isinstance(e, SubQ):
        return f"sub({format_expr(e.inner)},{_format_q(e.q)})"
    if isinstance(e, Shift):
        return f"shift({e.t!r},{format_expr(e.inner)})"
    raise TypeError(f"not a formula: {e!r}")


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?(?:/\d+)?|\.\d+(?:[eE][-+]?\d+)?)|(?P<name>[a-z]+)|(?P<punct>[(),]))")


def _tokenize(text: str) -> list[str]:
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            raise LogicSyntaxError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        out.append(mt.group(mt.lastgroup))
        pos = mt.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, want=None):
        tok = self.peek()
        if tok is None:
            raise LogicSyntaxError("unexpected end of formula")
        if want is not None and tok != want:
            raise LogicSyntaxError(f"expected {want!r}, got {tok!r}")
        self.pos += 1
        return tok

    def number(self) -> str:
        tok = self.take()
        if not (tok[0].isdigit() or tok[0] == "."):
            raise LogicSyntaxError(f"expected a number, got {tok!r}")
        return tok

    def constant(self) -> Fraction:
        try:
            return _fraction(Fraction(self.number()))
        except ValueError as exc:
            raise LogicSyntaxError(str(exc)) from exc

    def expr(self) -> LogicExpr:
        tok = self.peek()
        if tok is None:
            raise LogicSyntaxError("empty formula")
        if tok[0].isdigit() or tok[0] == ".":
            return Const(self.constant())
        name = self.take()
        if name == "obs":
            return Obs()
        if name not in ("min", "not", "sub", "add", "shift"):
            raise LogicSyntaxError(f"unknown operator {name!r}")
        self.take("(")
        if name == "min":
            left = self.expr()
            self.take(",")
            out = Min(left, self.expr())
        elif name == "not":
            out = Neg(self.expr())
        elif name in ("sub", "add"):
            inner = self.expr()
            self.take(",")
            q = self.constant()
            out = SubQ(inner, q) if name == "sub" else PlusQ(inner, q)
        else:
            t = float(Fraction(self.number()))
            self.take(",")
            try:
                out = Shift(t, self.expr())
            except ValueError as exc:
                raise LogicSyntaxError(str(exc)) from exc
        self.take(")")
        return out


def parse_expr(text: str) -> LogicExpr:
    p = _Parser(text)
    e = p.expr()
    if p.peek() is not None:
        raise LogicSyntaxError(f"trailing input at token {p.peek()!r}")
    return e


# -- semantics ---------------------------------------------------------------


class Evaluator:
    """Evaluates formulas to value vectors over all states of a model."""

    def __init__(self, model: Model, disc: DiscountSpec):
        self.model, self.disc = model, disc
        self._shift_ops: dict[float, np.ndarray] = {}

    def shift_operator(self, t: float) -> np.ndarray:
        """Matrix of ``f -> c^t * P_t f``."""
        op = self._shift_ops.get(t)
        if op is None:
            theta = math.exp(-self.model.rate * t)
            op = self.disc.c**t * self.model.kernel_matrix(theta)
            self._shift_ops[t] = op
        return op

    def __call__(self, e: LogicExpr) -> np.ndarray:
        if isinstance(e, Const):
            v = np.full(self.model.n_states, float(e.q))
        elif isinstance(e, Obs):
            v = np.array(self.model.obs, dtype=float)
        elif isinstance(e, Min):
            v = np.minimum(self(e.left), self(e.right))
        elif isinstance(e, Neg):
            v = 1.0 - self(e.inner)
        elif isinstance(e, SubQ):
            v = np.maximum(0.0, self(e.inner) - float(e.q))
        elif isinstance(e, Shift):
            v = self.shift_operator(e.t) @ self(e.inner)
        else:
            raise TypeError(f"not a formula: {e!r}")
        return np.clip(v, 0.0, 1.0)


def evaluate(expr: LogicExpr, model: Model, disc: DiscountSpec, x: int) -> float:
    return float(Evaluator(model, disc)(expr)[x])


def pair_gap(expr: LogicExpr, model: Model, disc: DiscountSpec, x: int, y: int) -> float:
    v = Evaluator(model, disc)(expr)
    return float(abs(v[x] - v[y]))


# -- canonicalisation ----------------------------------------------------------


def canonicalize(e: LogicExpr) -> LogicExpr:
    """Semantics-preserving simplification, bottom-up.

    Rules: ``not(not(f)) = f``; ``min(f, f) = f``; ``min`` with the constant 1
    or 0; ``sub(f, 0) = f``; nested ``sub`` merge; ``shift(0, f) = f``;
    folding of ``min``/``not``/``sub`` over constants.
    """
    if isinstance(e, (Const, Obs)):
        return e
    if isinstance(e, Neg):
        inner = canonicalize(e.inner)
        if isinstance(inner, Neg):
            return inner.inner
        if isinstance(inner, Const):
            return Const(1 - inner.q)
        return Neg(inner)
    if isinstance(e, SubQ):
        inner = canonicalize(e.inner)
        if e.q == 0:
            return inner
        if isinstance(inner, Const):
            return Const(max(Fraction(0), inner.q - e.q))
        if isinstance(inner, SubQ):
            total = inner.q + e.q
            return Const(0) if total >= 1 else SubQ(inner.inner, total)
        return SubQ(inner, e.q)
    if isinstance(e, Min):
        a, b = canonicalize(e.left), canonicalize(e.right)
        if a == b:
            return a
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(min(a.q, b.q))
        for c, other in ((a, b), (b, a)):
            if isinstance(c, Const) and c.q == 1:
                return other
            if isinstance(c, Const) and c.q == 0:
                return Const(0)
        return Min(a, b)
    if isinstance(e, Shift):
        inner = canonicalize(e.inner)
        if e.t == 0.0:
            return inner
        return Shift(e.t, inner)
    raise TypeError(f"not a formula: {e!r}")


# -- search --------------------------------------------------------------------


def default_constants() -> tuple[Fraction, ...]:
    return tuple(Fraction(k, 8) for k in range(9))


def default_times(rate: float) -> tuple[float, ...]:
    return tuple(k * math.log(2.0) / rate for k in range(5))


@dataclass(frozen=True)
class LogicConfig:
    max_depth: int = 3
    constants: tuple[Fraction, ...] = field(default_factory=default_constants)
    times: tuple[float, ...] | None = None
    max_formulas: int = 250_000

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be nonnegative")
        if not self.constants:
            raise ValueError("constant pool is empty")
        object.__setattr__(self, "constants", tuple(_fraction(q) for q in self.constants))
        if self.times is not None:
            if not self.times:
                raise ValueError("time pool is empty")
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))

    def time_pool(self, model: Model) -> tuple[float, ...]:
        return self.times if self.times is not None else default_times(model.rate)


@dataclass(frozen=True)
class LogicBound:
    bound: float
    witness: LogicExpr
    truncated: bool = False


class FormulaPool:
    """Formulas up to a depth, deduplicated by their value vector.

    Two formulas with the same values on every state give the same gap for
    every pair and the same values under every constructor, so only the
    first (shallowest) representative of each vector is kept.
    """

    def __init__(self, model: Model, disc: DiscountSpec, config: LogicConfig, depth: int):
        self.model, self.disc, self.config = model, disc, config
        self.evaluator = Evaluator(model, disc)
        self.vectors: list[np.ndarray] = []
        self.exprs: list[LogicExpr] = []
        self.depth_of: list[int] = []
        self._keys: set[bytes] = set()
        self.truncated = False
        self._build(depth)

    def __len__(self):
        return len(self.exprs)

    def _add(self, e: LogicExpr, v: np.ndarray, depth: int) -> bool:
        key = np.round(v, 12).tobytes()
        if key in self._keys:
            return False
        if len(self.exprs) >= self.config.max_formulas:
            self.truncated = True
            return False
        self._keys.add(key)
        self.vectors.append(v)
        self.exprs.append(e)
        self.depth_of.append(depth)
        return True

    def _build(self, depth: int) -> None:
        ev = self.evaluator
        for q in self.config.constants:
            e = Const(q)
            self._add(e, ev(e), 0)
        self._add(Obs(), ev(Obs()), 0)
        times = [t for t in self.config.time_pool(self.model) if t > 0.0]
        shifts = [(t, ev.shift_operator(t)) for t in times]
        consts = [q for q in self.config.constants if q > 0]
        start = 0
        for d in range(1, depth + 1):
            stop = len(self.exprs)
            if self.truncated:
                break
            previous = np.array(self.vectors[:stop])
            for k in range(start, stop):
                f, v = self.exprs[k], self.vectors[k]
                self._add(canonicalize(Neg(f)), 1.0 - v, d)
                for q in consts:
                    self._add(canonicalize(SubQ(f, q)), np.maximum(0.0, v - float(q)), d)
                for t, op in shifts:
                    self._add(Shift(t, f), np.clip(op @ v, 0.0, 1.0), d)
                # min with every earlier formula that is not itself newer
                lows = np.minimum(previous[: k + 1], v)
                for j in range(k + 1):
                    if j == k:
                        continue
                    self._add(canonicalize(Min(self.exprs[j], f)), lows[j], d)
                if self.truncated:
                    break
            start = stop


def lambda_lower_bound(
    model: Model,
    disc: DiscountSpec,
    x: int,
    y: int,
    config: LogicConfig = LogicConfig(),
    pool: FormulaPool | None = None,
) -> LogicBound:
    """Best ``|f(x) - f(y)|`` over formulas of depth at most ``config.max_depth``.

    The last level only needs ``shift`` nodes: ``not``, ``sub`` and ``min``
    are 1-Lipschitz in their arguments, so a top-level application of them
    never has a larger gap than its best argument. The exhaustive pool is
    therefore built to depth ``max_depth - 1`` and extended by one shift.
    Pass a prebuilt ``pool`` (of depth ``max_depth - 1``) to reuse it across
    pairs.
    """
    depth = config.max_depth
    if pool is None:
        pool = FormulaPool(model, disc, config, max(depth - 1, 0))
    V = np.array(pool.vectors)
    gaps = np.abs(V[:, x] - V[:, y])
    k = int(np.argmax(gaps))
    best, witness = float(gaps[k]), pool.exprs[k]
    if depth >= 1:
        for t in config.time_pool(model):
            if t <= 0.0:
                continue
            op = pool.evaluator.shift_operator(t)
            row = op[x] - op[y]
            sg = np.abs(V @ row)
            j = int(np.argmax(sg))
            if sg[j] > best + 1e-15:
                best, witness = float(sg[j]), Shift(t, pool.exprs[j])
    # the reported bound is recomputed from the witness itself
    best = pair_gap(witness, model, disc, x, y)
    return LogicBound(best, witness, pool.truncated)


def enumerate_formulas(
    depth: int, constants: Sequence, times: Sequence[float]
) -> Iterable[LogicExpr]:
    """All syntactic formulas of depth exactly ``depth`` (unpruned; small pools only)."""
    if depth == 0:
        yield Obs()
        for q in constants:
            yield Const(q)
        return
    below = [f for d in range(depth - 1) for f in enumerate_formulas(d, constants, times)]
    top = list(enumerate_formulas(depth - 1, constants, times))
    for f in top:
        yield Neg(f)
        for q in constants:
            yield SubQ(f, q)
        for t in times:
            yield Shift(t, f)
    for f in top:
        for g in below + top:
            yield Min(f, g)
    for f in below:
        for g in top:
            yield Min(f, g)


def random_formula(
    rng: np.random.Generator, max_depth: int, constants: Sequence, times: Sequence[float]
) -> LogicExpr:
    if max_depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return Obs()
        return Const(constants[rng.integers(len(constants))])
    kind = rng.integers(4)
    sub = lambda: random_formula(rng, max_depth - 1, constants, times)  # noqa: E731
    if kind == 0:
        return Min(sub(), sub())
    if kind == 1:
        return Neg(sub())
    if kind == 2:
        return SubQ(sub(), constants[rng.integers(len(constants))])
    return Shift(times[rng.integers(len(times))], sub())
