"""Quadrature, sample grids and residual-norm bookkeeping.

The generator formulas need definite integrals along the anisotropy
coordinate v; everything here is plain adaptive Simpson with a Richardson
error estimate. Residual checks over grids are collected in ResidualReport
objects, the toolkit's universal notion of "this metric solves equation X
to tolerance tau".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex

__all__ = [
    "Quadrature", "Grid", "ResidualReport", "MaxDepthExceeded",
    "GridExclusionError", "adaptive_simpson", "integrate_v",
    "antiderivative_profile", "DEFAULT_QUADRATURE",
]


class MaxDepthExceeded(ex.EvalError):
    def __init__(self, a: float, b: float, depth: int):
        super().__init__(
            f"adaptive Simpson did not converge on [{a}, {b}] within depth {depth}")


class GridExclusionError(ValueError):
    pass


@dataclass(frozen=True)
class Quadrature:
    """Adaptive Simpson configuration. The returned value carries a Richardson
    error estimate <= abs_tol, or MaxDepthExceeded is raised."""

    abs_tol: float = 1e-12
    max_depth: int = 48

    method: str = field(default="adaptive-simpson", init=False)


DEFAULT_QUADRATURE = Quadrature()


def _simpson(f, a, fa, m, fm, b, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, fa, m, fm, b, fb, whole, tol, depth, max_depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(f, a, fa, lm, flm, m, fm)
    right = _simpson(f, m, fm, rm, frm, b, fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth >= max_depth:
        raise MaxDepthExceeded(a, b, max_depth)
    half = 0.5 * tol
    return (_adaptive(f, a, fa, lm, flm, m, fm, left, half, depth + 1, max_depth)
            + _adaptive(f, m, fm, rm, frm, b, fb, right, half, depth + 1, max_depth))


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Definite integral of f over [a, b] (b < a flips the sign)."""
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, q)
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    for v in (fa, fm, fb):
        if not math.isfinite(v):
            raise ex.DomainError(f"integrand is not finite on [{a}, {b}]")
    whole = _simpson(f, a, fa, m, fm, b, fb)
    return _adaptive(f, a, fa, m, fm, b, fb, whole, q.abs_tol, 0, q.max_depth)


def integrate_v(e: ex.Expr, fixed: Mapping[str, float], v0: float, v1: float,
                q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Integrate an expression in v over [v0, v1] with all other variables
    bound by ``fixed``."""
    env = dict(fixed)

    def f(t: float) -> float:
        env[ex.V_NAME] = t
        return float(ex.evaluate(e, env))

    return adaptive_simpson(f, v0, v1, q)


def antiderivative_profile(e: ex.Expr, fixed: Mapping[str, float], v0: float,
                           samples: Sequence[float],
                           q: Quadrature = DEFAULT_QUADRATURE) -> list:
    """Tabulate F(v) = int_{v0}^{v} e dv at the given sorted samples.

    Panel additivity keeps the cost linear in the number of samples.
    """
    ordered = sorted(samples)
    env = dict(fixed)

    def f(t: float) -> float:
        env[ex.V_NAME] = t
        return float(ex.evaluate(e, env))

    out = {}
    acc = 0.0
    prev = v0
    for s in ordered:
        acc += adaptive_simpson(f, prev, s, q)
        out[s] = acc
        prev = s
    return [(s, out[s]) for s in samples]


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Cartesian sample grid: per-variable (min, max, count), count >= 2."""

    axes: tuple  # tuple of (name, lo, hi, count)

    def __post_init__(self):
        seen = set()
        for name, lo, hi, count in self.axes:
            if count < 2:
                raise ValueError(f"axis {name!r} needs count >= 2, got {count}")
            if not (hi > lo):
                raise ValueError(f"axis {name!r} needs max > min")
            if name in seen:
                raise ValueError(f"duplicate axis {name!r}")
            seen.add(name)

    @classmethod
    def build(cls, spec: Mapping[str, tuple]) -> "Grid":
        return cls(tuple((name, float(lo), float(hi), int(count))
                         for name, (lo, hi, count) in spec.items()))

    @property
    def names(self) -> tuple:
        return tuple(a[0] for a in self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(a[3] for a in self.axes)

    @property
    def size(self) -> int:
        n = 1
        for c in self.shape:
            n *= c
        return n

    def axis_values(self, name: str) -> np.ndarray:
        for ax_name, lo, hi, count in self.axes:
            if ax_name == name:
                return np.linspace(lo, hi, count)
        raise KeyError(name)

    def arrays(self) -> dict:
        """Flattened meshgrid columns, deterministic C order."""
        grids = np.meshgrid(*(self.axis_values(n) for n in self.names), indexing="ij")
        return {n: g.reshape(-1) for n, g in zip(self.names, grids)}

    def points(self) -> list:
        cols = self.arrays()
        names = self.names
        return [{n: float(v) for n, v in zip(names, row)}
                for row in zip(*(cols[n] for n in names))]

    def check_exclusions(self, exprs: Iterable[ex.Expr], min_abs: float = 1e-9,
                         extra: Mapping[str, float] | None = None) -> None:
        """Raise if any grid point lies within min_abs of an excluded locus
        (an expression whose zero set must be avoided)."""
        cols = self.arrays()
        if extra:
            cols = {**cols, **{k: float(v) for k, v in extra.items()}}
        for e in exprs:
            vals = np.broadcast_to(np.asarray(ex.evaluate(e, cols), dtype=float),
                                   (self.size,))
            bad = np.abs(vals) < min_abs
            if np.any(bad):
                idx = int(np.argmax(bad))
                point = {n: float(cols[n][idx]) for n in self.names}
                raise GridExclusionError(
                    f"grid point {point} lies on excluded locus {ex.to_str(e)} = 0")


# ---------------------------------------------------------------------------
# residual reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    """Grid-sampled magnitude of an equation's left-minus-right side."""

    equation: str
    columns: tuple            # coordinate column names, in CSV order
    points: np.ndarray        # shape (k, len(columns))
    residuals: np.ndarray     # shape (k,)
    tolerance: float

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    @property
    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.residuals))) if self.residuals.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_abs <= self.tolerance

    @classmethod
    def from_grid(cls, equation: str, grid_cols: Mapping[str, np.ndarray],
                  residuals: np.ndarray, tolerance: float) -> "ResidualReport":
        names = tuple(grid_cols)
        res = np.atleast_1d(np.asarray(residuals, dtype=float))
        pts = np.column_stack([np.broadcast_to(np.asarray(grid_cols[n], dtype=float),
                                               res.shape).reshape(-1)
                               for n in names]) if names else np.zeros((res.size, 0))
        return cls(equation, names, pts, res.reshape(-1), float(tolerance))

    def summary_line(self) -> str:
        return f"EQ {self.equation} max={self.max_abs:.6e} pass={self.passed}"

    def summary_dict(self) -> dict:
        return {
            "equation": self.equation,
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "points": int(self.residuals.size),
        }

    def csv_rows(self, all_columns: Sequence[str]) -> list:
        """Rows under a fixed column layout; absent coordinates are blank."""
        rows = []
        col_index = {c: i for i, c in enumerate(self.columns)}
        for k in range(self.residuals.size):
            row = [self.equation]
            for c in all_columns:
                if c in col_index:
                    row.append(format_float(self.points[k, col_index[c]]))
                else:
                    row.append("")
            row.append(format_float(self.residuals[k]))
            rows.append(row)
        return rows


def format_float(v: float) -> str:
    return repr(float(v))


def reports_to_json(reports: Sequence[ResidualReport]) -> str:
    return json.dumps({"reports": [r.summary_dict() for r in reports],
                       "pass": all(r.passed for r in reports)}, indent=2)


def max_failures(reports: Sequence[ResidualReport]) -> list:
    return [r for r in reports if not r.passed]


def chunk_slices(total: int, jobs: int) -> list:
    """Static partition of range(total) into at most ``jobs`` contiguous slices."""
    jobs = max(1, min(jobs, total)) if total else 1
    step = -(-total // jobs)
    return [slice(i, min(i + step, total)) for i in range(0, total, step)]


def evaluate_on_grid(e: ex.Expr, cols: Mapping[str, np.ndarray], jobs: int = 1,
                     extra: Mapping[str, float] | None = None) -> np.ndarray:
    """Evaluate an expression over flattened grid columns, optionally in
    statically partitioned chunks (pure evaluation, safe to run concurrently)."""
    env = dict(cols)
    if extra:
        env.update({k: float(v) for k, v in extra.items()})
    sizes = [v.size for v in env.values() if isinstance(v, np.ndarray)]
    total = sizes[0] if sizes else 1
    if jobs <= 1 or total < 4:
        return np.broadcast_to(np.asarray(ex.evaluate(e, env)), (total,)).copy() \
            if total else np.asarray([])
    from concurrent.futures import ThreadPoolExecutor

    out = np.empty(total, dtype=float)
    slices = chunk_slices(total, jobs)

    def work(sl: slice):
        sub = {k: (v[sl] if isinstance(v, np.ndarray) else v) for k, v in env.items()}
        out[sl] = np.broadcast_to(np.asarray(ex.evaluate(e, sub)),
                                  (sl.stop - sl.start,))

    with ThreadPoolExecutor(max_workers=len(slices)) as pool:
        list(pool.map(work, slices))
    return out
