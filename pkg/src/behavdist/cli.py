"""Command-line driver: ``behavdist {distance,trace,logic-bound,verify,bm}``.

Every output document starts with the effective run configuration (as
``#`` comment lines in CSV, as a ``config`` object in JSON), so identical
configurations produce byte-identical files. Exit codes: 0 success, 1 invalid
input, 2 numeric non-convergence under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .brownian import bm_delta1, gbm_lower_bound
from .core import DiscountSpec, Model, ModelError, PseudometricTable, load_model
from .fixpoint import FIXPOINT_TOL, iterate, trace_to_csv, verify_fixpoint
from .functional import SupStrategy
from .logic import LogicConfig, LogicSyntaxError, FormulaPool, format_expr, lambda_lower_bound
from .logic import pair_gap, parse_expr
from .models import toy_model

GRID_ENV = "BEHAVDIST_GRID_POINTS"
DEFAULT_GRID_POINTS = 8193
EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2


class ConfigError(ValueError):
    """Invalid command-line configuration."""


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _num(v: float) -> float:
    """A float rounded to 12 significant digits, for JSON output."""
    return float(_fmt(v))


@dataclass(frozen=True)
class RunConfig:
    command: str
    model_path: str | None = None
    toy_r: float | None = None
    rate: float = 1.0
    c: float | None = None
    mode: str = "theta_grid"
    fixed_theta: float | None = None
    tol_fix: float = 1e-9
    max_iter: int = 200
    grid_points: int = DEFAULT_GRID_POINTS
    refine_iters: int = 60
    accelerate: bool = True
    strict: bool = False
    output_path: str | None = None
    format: str = "csv"
    # logic-bound
    depth: int = 3
    constants: tuple[str, ...] | None = None
    times: tuple[float, ...] | None = None
    pairs: tuple[tuple[str, str], ...] | None = None
    formula: str | None = None
    # verify
    table_path: str | None = None
    # bm
    example: str = "absorbed"
    x: float = 0.5
    y: float = 0.0
    t_grid: tuple[float, ...] | None = None
    samples: int = 100_000
    seed: int = 0
    step: float | None = None

    def __post_init__(self):
        if self.c is not None and not 0.0 < self.c < 1.0:
            raise ConfigError(f"--c must lie in (0, 1), got {self.c}")
        if not self.tol_fix > 0:
            raise ConfigError("--tol-fix must be positive")
        if self.max_iter < 1:
            raise ConfigError("--max-iter must be at least 1")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        for path in (self.model_path, self.table_path):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"no such file: {path}")

    def provenance(self) -> dict:
        d = asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    # -- derived objects ------------------------------------------------------

    def model(self) -> Model:
        if self.model_path is not None:
            return load_model(self.model_path)
        if self.toy_r is not None:
            return toy_model(self.toy_r, self.rate)
        raise ConfigError("one of --model or --toy is required")

    def discount(self, model: Model) -> DiscountSpec:
        if self.c is None:
            return DiscountSpec.default_for(model)
        return DiscountSpec(self.c, model.rate)

    def strategy(self) -> SupStrategy:
        return SupStrategy(self.mode, self.grid_points, self.refine_iters, self.fixed_theta)

    def logic_config(self) -> LogicConfig:
        kwargs = {"max_depth": self.depth, "times": self.times}
        if self.constants is not None:
            kwargs["constants"] = self.constants
        return LogicConfig(**kwargs)


# -- output -------------------------------------------------------------------


def _csv_document(config: RunConfig, meta: dict, header, rows) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config.provenance(), sort_keys=True) + "\n")
    for k, v in meta.items():
        buf.write(f"# {k}: {json.dumps(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_document(config: RunConfig, meta: dict, body: dict) -> str:
    doc = {"config": config.provenance(), **meta, **body}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _sibling(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def _table_rows(model: Model, table: PseudometricTable):
    return [(model.names[i], model.names[j], table.entries[i, j]) for i, j in table.pairs()]


def _solve(config: RunConfig, model: Model):
    return iterate(
        model,
        config.discount(model),
        config.strategy(),
        tol_fix=config.tol_fix,
        max_iter=config.max_iter,
        accelerate=config.accelerate,
    )


def _status(config: RunConfig, trace) -> int:
    return EXIT_NONCONVERGED if config.strict and not trace.converged else EXIT_OK


# -- commands -----------------------------------------------------------------


def cmd_distance(config: RunConfig) -> int:
    model = config.model()
    trace = _solve(config, model)
    meta = {
        "effective_c": config.discount(model).c,
        "converged": trace.converged,
        "final_residual": _num(trace.final_residual),
        "iterations": trace.iterations,
    }
    rows = _table_rows(model, trace.result)
    if config.format == "csv":
        text = _csv_document(
            config, meta, ["state_a", "state_b", "value"], [(a, b, _fmt(v)) for a, b, v in rows]
        )
    else:
        body = {"rows": [{"state_a": a, "state_b": b, "value": _num(v)} for a, b, v in rows]}
        text = _json_document(config, meta, body)
    _write(config.output_path, text)
    return _status(config, trace)


def cmd_trace(config: RunConfig) -> int:
    model = config.model()
    trace = _solve(config, model)
    meta = {
        "effective_c": config.discount(model).c,
        "converged": trace.converged,
        "final_residual": _num(trace.final_residual),
        "iterations": trace.iterations,
        "steps": trace.steps,
    }
    if config.format == "csv":
        pairs_csv, residual_csv = trace_to_csv(trace, model.names)
        head = _csv_document(config, meta, None, [])
        if config.output_path is None:
            _write(None, head + pairs_csv + "\n" + residual_csv)
        else:
            _write(config.output_path, head + pairs_csv)
            _write(_sibling(config.output_path, ".residuals.csv"), head + residual_csv)
    else:
        body = {
            "rows": [
                {"iteration": n, "state_a": a, "state_b": b, "value": _num(v)}
                for n, a, b, v in trace.pair_rows(model.names)
            ],
            "residuals": [{"iteration": n, "residual": _num(r)} for n, r in trace.residual_rows()],
        }
        _write(config.output_path, _json_document(config, meta, body))
    return _status(config, trace)


def _selected_pairs(config: RunConfig, model: Model):
    if config.pairs is None:
        n = model.n_states
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    return [(model.index(a), model.index(b)) for a, b in config.pairs]


def cmd_logic_bound(config: RunConfig) -> int:
    model = config.model()
    disc = config.discount(model)
    lcfg = config.logic_config()
    pairs = _selected_pairs(config, model)
    trace = _solve(config, model)
    delta = trace.result.entries
    rows = []
    if config.formula is not None:
        expr = parse_expr(config.formula)
        for i, j in pairs:
            rows.append((i, j, pair_gap(expr, model, disc, i, j), format_expr(expr), False))
    else:
        pool = FormulaPool(model, disc, lcfg, max(lcfg.max_depth - 1, 0))
        for i, j in pairs:
            res = lambda_lower_bound(model, disc, i, j, lcfg, pool)
            rows.append((i, j, res.bound, format_expr(res.witness), res.truncated))
    meta = {
        "effective_c": disc.c,
        "converged": trace.converged,
        "final_residual": _num(trace.final_residual),
    }
    out = [
        (model.names[i], model.names[j], v, w, float(delta[i, j] - v), t)
        for i, j, v, w, t in rows
    ]
    if config.format == "csv":
        text = _csv_document(
            config,
            meta,
            ["state_a", "state_b", "value", "witness", "gap", "truncated"],
            [(a, b, _fmt(v), w, _fmt(g), str(t).lower()) for a, b, v, w, g, t in out],
        )
    else:
        body = {
            "rows": [
                {"state_a": a, "state_b": b, "value": _num(v), "witness": w,
                 "gap": _num(g), "truncated": t}
                for a, b, v, w, g, t in out
            ]
        }
        text = _json_document(config, meta, body)
    _write(config.output_path, text)
    return _status(config, trace)


def read_table_csv(path: str, model: Model) -> PseudometricTable:
    """Load a ``state_a,state_b,value`` CSV (``#`` lines ignored); all pairs required."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"state_a", "state_b", "value"} <= set(reader.fieldnames):
        raise ConfigError(f"{path}: expected header state_a,state_b,value")
    n = model.n_states
    a = np.zeros((n, n))
    seen = set()
    for row in reader:
        i, j = model.index(row["state_a"]), model.index(row["state_b"])
        try:
            v = float(row["value"])
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value {row['value']!r}") from exc
        a[i, j] = a[j, i] = v
        seen.add((min(i, j), max(i, j)))
    missing = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in seen]
    if missing:
        i, j = missing[0]
        raise ConfigError(f"{path}: no entry for pair ({model.names[i]}, {model.names[j]})")
    return PseudometricTable(a)


def cmd_verify(config: RunConfig) -> int:
    model = config.model()
    disc = config.discount(model)
    strat = config.strategy()
    converged = None
    if config.table_path is not None:
        table = read_table_csv(config.table_path, model)
    else:
        trace = _solve(config, model)
        table, converged = trace.result, trace.converged
    residual = verify_fixpoint(model, disc, strat, table)
    is_fix = residual <= FIXPOINT_TOL
    above = bool(np.all(table.entries >= np.abs(model.obs[:, None] - model.obs[None, :]) - 1e-12))
    checks = [
        ("fixpoint_residual", _num(residual)),
        ("is_fixpoint", is_fix),
        ("above_observable_metric", above),
    ]
    meta = {"effective_c": disc.c}
    if converged is not None:
        meta["converged"] = converged
    if config.format == "csv":
        text = _csv_document(
            config,
            meta,
            ["check", "value"],
            [(k, str(v).lower() if isinstance(v, bool) else _fmt(v)) for k, v in checks],
        )
    else:
        text = _json_document(config, meta, {"checks": dict(checks)})
    _write(config.output_path, text)
    if config.strict and not (is_fix and above):
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_bm(config: RunConfig) -> int:
    c = config.c if config.c is not None else (0.9 if config.example == "absorbed" else 0.99)
    if config.example == "absorbed":
        res = bm_delta1(
            config.x, config.y, c, config.t_grid, config.samples, config.seed, config.step
        ).to_dict()
    elif config.example == "gbm":
        bound, arg = gbm_lower_bound(config.x, c, config.t_grid)
        res = {"value": bound, "argmax_t": arg, "standard_error": 0.0, "seed": None}
    else:
        raise ConfigError(f"unknown example {config.example!r}")
    doc = {"config": config.provenance(), "effective_c": c, **res}
    _write(config.output_path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


COMMANDS = {
    "distance": cmd_distance,
    "trace": cmd_trace,
    "logic-bound": cmd_logic_bound,
    "verify": cmd_verify,
    "bm": cmd_bm,
}


# -- argument parsing ---------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _strings(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _pair(text: str) -> tuple[str, str]:
    parts = _strings(text)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected A,B, got {text!r}")
    return parts[0], parts[1]


def _default_grid_points() -> int:
    raw = os.environ.get(GRID_ENV)
    if raw is None:
        return DEFAULT_GRID_POINTS
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{GRID_ENV} must be an integer, got {raw!r}") from None


def _add_model_options(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", dest="model_path", help="JSON model file")
    src.add_argument("--toy", dest="toy_r", type=float, metavar="R", help="built-in toy model")
    p.add_argument("--lambda", dest="rate", type=float, default=1.0, help="toy model rate")
    p.add_argument("--c", type=float, help="discount in (0, 1); default exp(-lambda)")
    p.add_argument("--mode", choices=("theta_grid", "discrete_step"), default="theta_grid")
    p.add_argument("--fixed-theta", type=float, help="theta for discrete_step mode")
    p.add_argument("--tol-fix", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--grid-points", type=int, help=f"theta grid size (env {GRID_ENV})")
    p.add_argument("--refine-iters", type=int, default=60)
    p.add_argument("--no-accelerate", dest="accelerate", action="store_false")
    p.add_argument("--strict", action="store_true", help="exit 2 if not converged")
    _add_output_options(p)


def _add_output_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", dest="output_path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors: exit 1, keeping 2 for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="behavdist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("distance", "least-fixpoint distance table"),
        ("trace", "every iterate and residual of the fixpoint iteration"),
        ("verify", "fixpoint residual of a table (computed if --table is absent)"),
        ("logic-bound", "formula lower bounds and their gap to the distance"),
    ):
        p = sub.add_parser(name, help=text)
        _add_model_options(p)
        if name == "verify":
            p.add_argument("--table", dest="table_path", help="CSV table to check")
        if name == "logic-bound":
            p.add_argument("--depth", type=int, default=3)
            p.add_argument("--constants", type=_strings, help="e.g. 0,1/4,0.5,1")
            p.add_argument("--times", type=_floats, help="e.g. 0,0.5,1")
            p.add_argument("--pair", dest="pairs", type=_pair, action="append")
            p.add_argument("--formula", help="evaluate this formula instead of searching")
    p = sub.add_parser("bm", help="Brownian motion examples (JSON output)")
    p.add_argument("--example", choices=("absorbed", "gbm"), default="absorbed")
    p.add_argument("--x", type=float, default=0.5)
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--c", type=float)
    p.add_argument("--t-grid", type=_floats)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float)
    p.add_argument("--output", "-o", dest="output_path")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(ns).items() if v is not None}
    if values["command"] == "bm":
        values["format"] = "json"
    else:
        values.setdefault("grid_points", _default_grid_points())
    if "pairs" in values:
        values["pairs"] = tuple(values["pairs"])
    return RunConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = config_from_args(ns)
        return COMMANDS[config.command](config)
    except (ConfigError, ModelError, LogicSyntaxError, ValueError, OSError) as exc:
        print(f"behavdist: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
