"""Parameter-dependent solution families and evolution-equation residuals.

A flow family is a metric whose coefficients carry the evolution parameter
chi symbolically; there is no time stepping anywhere. The residuals of the
normalized evolution system for diagonal d-metrics are

    eq-h:  d_chi g_ii + 2 [R_ii - lam g_ii] + sum_c h_cc d_chi (N_i^c)^2
    eq-v:  d_chi h_aa + 2 (R_aa - lam h_aa)
    eq-off: R_{alpha beta} = 0 for alpha != beta

with R the canonical-connection Ricci tensor in the adapted frame, and the
unnormalized (lam = 0, coordinate-frame, Levi-Civita) residual is kept as an
independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .generators import DegenerateRecipe, GeneratedMetric, aux_coeffs
from .geometry import (DMetric, NConnection, canonical_dconnection, chart_4d,
                       chart_5d, coordinate_lc_ricci, coordinate_metric,
                       curvature_ricci)
from .numerics import Grid, ResidualReport

__all__ = [
    "FlowFamily", "FlowRecipe", "LCFlowRecipe", "NonDiagonalFamily",
    "HorizontalCompatibilityError", "QuadratureCompatibilityError", "flow_residuals",
    "build_flow_solution", "build_lc_flow", "hamilton_residual",
    "flow_residual_components", "hamilton_residual_components",
]

CHI = "chi"


class NonDiagonalFamily(ValueError):
    """The evolution residuals are defined for diagonal d-metric families."""


class HorizontalCompatibilityError(DegenerateRecipe):
    """The conformal h-profile fails its compatibility equation."""

    def __init__(self, report: ResidualReport):
        self.report = report
        super().__init__(
            f"flow recipe violates the h-compatibility equation: "
            f"max residual {report.max_abs:.3e} > {report.tolerance:.1e}")


class QuadratureCompatibilityError(DegenerateRecipe):
    """The v-quadrature C(x2,x3) = h5 * integral is not v-independent."""

    def __init__(self, report: ResidualReport):
        self.report = report
        super().__init__(
            f"flow recipe violates the quadrature-compatibility condition: "
            f"max residual {report.max_abs:.3e} > {report.tolerance:.1e}")


@dataclass(frozen=True)
class FlowFamily:
    """A chi-parametrized metric family with its normalization constant."""

    metric: GeneratedMetric
    lam: float
    chi_samples: tuple

    def __post_init__(self):
        if not self.chi_samples:
            raise ValueError("need at least one chi sample")


def _dchi(e):
    return ex.diff(e, CHI)


def _dv(e):
    return ex.diff(e, "v")


def _d2(e):
    return ex.diff(e, "x2")


def _d3(e):
    return ex.diff(e, "x3")


def _stacked_cols(grid: Grid, chi_samples: Sequence[float], extra=None) -> dict:
    base = grid.arrays()
    reps = len(chi_samples)
    out = {k: np.tile(vals, reps) for k, vals in base.items()}
    out[CHI] = np.repeat(np.asarray(chi_samples, dtype=float), grid.size)
    if extra:
        out.update({k: float(v) for k, v in extra.items()})
    return out


def _stacked_max(exprs, cols, size) -> np.ndarray:
    vals = None
    for e in exprs:
        vv = np.abs(np.broadcast_to(np.asarray(ex.evaluate(e, cols)), (size,)))
        vals = vv.copy() if vals is None else np.maximum(vals, vv)
    return vals if vals is not None else np.zeros(size)


# ---------------------------------------------------------------------------
# evolution residuals
# ---------------------------------------------------------------------------

def flow_residual_components(fam: FlowFamily):
    """Symbolic residual tables (eq-h per i, eq-v per a, off-diagonal list)."""
    gm = fam.metric
    chart, g, N = gm.chart, gm.metric, gm.nconn
    if not g.is_block_diagonal():
        raise NonDiagonalFamily("metric blocks must be diagonal")
    conn = canonical_dconnection(g, N, chart)
    ric = curvature_ricci(conn, g, N, chart)
    lam = fam.lam
    n, m = chart.n, chart.m

    eq_h = []
    for i in range(n):
        res = ex.add(_dchi(g.g[i][i]),
                     ex.mul(2, ex.sub(ric.hh(i, i), ex.mul(lam, g.g[i][i]))))
        for c in range(m):
            res = ex.add(res, ex.mul(g.h[c][c],
                                     _dchi(ex.pow_(N.entry(i, c), 2))))
        eq_h.append(ex.simplify(res))

    eq_v = [ex.simplify(ex.add(_dchi(g.h[a][a]),
                               ex.mul(2, ex.sub(ric.vv(a, a),
                                                ex.mul(lam, g.h[a][a])))))
            for a in range(m)]

    off = []
    d = chart.dim
    for b in range(d):
        for t in range(d):
            if b != t:
                off.append(ric.ricci[b][t])
    return eq_h, eq_v, off


def flow_residuals(fam: FlowFamily, grid: Grid,
                   chi_samples: Sequence[float] | None = None,
                   tol: float = 1e-10, extra=None) -> list:
    """One report per evolution equation, evaluated on grid x chi samples.
    ``extra`` binds any declared parameter names beyond chi."""
    chis = tuple(chi_samples) if chi_samples is not None else fam.chi_samples
    eq_h, eq_v, off = flow_residual_components(fam)
    cols = _stacked_cols(grid, chis, extra)
    size = grid.size * len(chis)
    return [
        ResidualReport.from_grid("evol-h", cols, _stacked_max(eq_h, cols, size), tol),
        ResidualReport.from_grid("evol-v", cols, _stacked_max(eq_v, cols, size), tol),
        ResidualReport.from_grid("ricci-offdiag", cols,
                                 _stacked_max(off, cols, size), tol),
    ]


def hamilton_residual_components(fam: FlowFamily):
    """Coordinate-frame residual table of the unnormalized flow:
    d_chi g_{ab} + 2 Ric(LC)_{ab}."""
    gm = fam.metric
    chart, g, N = gm.chart, gm.metric, gm.nconn
    gcoord = coordinate_metric(g, N, chart)
    ric = coordinate_lc_ricci(g, N, chart)
    d = chart.dim
    return tuple(tuple(ex.simplify(ex.add(_dchi(gcoord[a][b]),
                                          ex.mul(2, ric[a][b])))
                       for b in range(d)) for a in range(d))


def hamilton_residual(fam: FlowFamily, grid: Grid,
                      chi_samples: Sequence[float] | None = None,
                      tol: float = 1e-10, extra=None) -> ResidualReport:
    chis = tuple(chi_samples) if chi_samples is not None else fam.chi_samples
    comps = hamilton_residual_components(fam)
    cols = _stacked_cols(grid, chis, extra)
    size = grid.size * len(chis)
    flat = [c for row in comps for c in row]
    return ResidualReport.from_grid("hamilton", cols,
                                    _stacked_max(flat, cols, size), tol)


# ---------------------------------------------------------------------------
# the integrable flow class
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowRecipe:
    """Generating data for the chi-parametrized integrable class.

    varpi(x2,x3,chi) > 0 drives the conformal h-part; h5(x2,x3,v) with
    h5* != 0 the v-part; h0fn is the constant-coupling profile (constant for
    vacuum families); n1fn/n2fn(x2,x3,chi) are the N-integration functions;
    lam the normalization constant.
    """

    signatures: tuple  # (e1..e5)
    varpi: ex.Expr
    h5: ex.Expr
    h0fn: ex.Expr
    varsigma40: ex.Expr
    n1fn: ex.Expr
    n2fn: ex.Expr
    lam: float = 0.0
    v0: float = 1.0
    params: tuple = ()

    def __post_init__(self):
        if len(self.signatures) != 5 or any(s not in (-1, 1) for s in self.signatures):
            raise ValueError("signatures must be five values of +-1")


@dataclass(frozen=True)
class LCFlowRecipe:
    """chi-family constrained to evolve through Levi-Civita metrics."""

    signatures: tuple  # (e2, e3, e4, e5)
    psi: ex.Expr
    h4: ex.Expr
    h5: ex.Expr
    w2: ex.Expr
    w3: ex.Expr
    n2: ex.Expr
    lam: float = 0.0
    params: tuple = ()

    def __post_init__(self):
        if len(self.signatures) != 4 or any(s not in (-1, 1) for s in self.signatures):
            raise ValueError("signatures must be four values of +-1")


def build_flow_solution(recipe: FlowRecipe, grid: Grid,
                        chi_samples: Sequence[float],
                        tol: float = 1e-8, extra=None) -> FlowFamily:
    """Assemble the integrable chi-family and check its two compatibility
    equations on the grid; raises HorizontalCompatibilityError / QuadratureCompatibilityError."""
    e1, e2, e3, e4, e5 = recipe.signatures
    h5 = recipe.h5
    h5s = ex.simplify(_dv(h5))
    root5 = ex.sqrt(ex.abs_(h5))
    rstar = ex.simplify(_dv(root5))

    h_prof = ex.simplify(ex.mul(e4, ex.pow_(recipe.h0fn, 2), ex.pow_(rstar, 2)))
    if recipe.lam == 0.0:
        varsigma4 = recipe.varsigma40
    else:
        varsigma4 = ex.simplify(ex.sub(
            recipe.varsigma40,
            ex.mul(recipe.lam / 4.0,
                   ex.intv(ex.simplify(ex.div(ex.mul(h_prof, h5), h5s)),
                           recipe.v0))))
    h4 = ex.simplify(ex.mul(h_prof, varsigma4))

    aux = aux_coeffs(h4, h5)
    phistar = ex.simplify(_dv(aux.phi))
    from .generators import vanishes_on_grid
    if vanishes_on_grid(phistar, grid,
                        {CHI: float(chi_samples[0]), **(extra or {})}):
        w2 = w3 = ex.ZERO
    else:
        w2 = ex.simplify(ex.div(_d2(aux.phi), phistar))
        w3 = ex.simplify(ex.div(_d3(aux.phi), phistar))

    n_integrand = ex.simplify(ex.div(h4, ex.pow_(root5, 3)))
    if ex.is_zero(recipe.n2fn):
        n2 = ex.simplify(recipe.n1fn)
    else:
        n2 = ex.simplify(ex.add(recipe.n1fn,
                                ex.mul(recipe.n2fn, ex.intv(n_integrand, recipe.v0))))

    chart = chart_5d((*recipe.params, CHI))
    g = DMetric.diagonal(
        [ex.const(e1), ex.simplify(ex.mul(e2, recipe.varpi)),
         ex.simplify(ex.mul(e3, recipe.varpi))], [h4, h5])
    N = NConnection.build([[ex.ZERO, ex.ZERO], [w2, n2], [w3, n2]])
    metric = GeneratedMetric(chart, g, N,
                             provenance={"family": "flow_integrable",
                                         "lam": recipe.lam},
                             excluded=(h5s, varsigma4, recipe.varpi))
    metric.check_grid(grid, extra={CHI: float(chi_samples[0]), **(extra or {})})

    cols = _stacked_cols(grid, chi_samples, extra)
    size = grid.size * len(chi_samples)

    if not ex.is_zero(recipe.n2fn):
        # C(x2,x3) = h5 * indefinite integral of h4/(sqrt|h5|)^3 must be
        # v-independent; with the free per-(x2,x3) integration constant this
        # is equivalent to d_v [ d_v(h5 I) / h5* ] = 0 for the definite I.
        prof = ex.mul(h5, ex.intv(n_integrand, recipe.v0))
        c_resid = _dv(ex.div(_dv(prof), h5s))
        crep = ResidualReport.from_grid(
            "quadrature-compat", cols, _stacked_max([c_resid], cols, size), tol)
        if not crep.passed:
            raise QuadratureCompatibilityError(crep)

    lnv = ex.ln(ex.abs_(recipe.varpi))
    rfea1 = ex.add(ex.mul(e2, _d2(_d2(lnv))), ex.mul(e3, _d3(_d3(lnv))),
                   ex.mul(-2.0, recipe.lam),
                   ex.mul(h5, _dchi(ex.pow_(n2, 2))))
    rep = ResidualReport.from_grid(
        "h-compat", cols, _stacked_max([rfea1], cols, size), tol)
    if not rep.passed:
        raise HorizontalCompatibilityError(rep)

    return FlowFamily(metric, recipe.lam, tuple(float(c) for c in chi_samples))


def build_lc_flow(recipe: LCFlowRecipe, grid: Grid, chi_samples: Sequence[float],
                  tol: float = 1e-10, v_reading: str = "consistent",
                  extra=None):
    """Assemble the Levi-Civita flow family and report its selection
    constraints (the four coupled equations plus the two transports)."""
    e2, e3, e4, e5 = recipe.signatures
    h4, h5 = recipe.h4, recipe.h5
    h5s = ex.simplify(_dv(h5))
    aux = aux_coeffs(h4, h5)
    phistar = ex.simplify(_dv(aux.phi))

    chart = chart_4d((*recipe.params, CHI))
    epsi = ex.exp(recipe.psi)
    g = DMetric.diagonal([ex.simplify(ex.mul(e2, epsi)),
                          ex.simplify(ex.mul(e3, epsi))], [h4, h5])
    N = NConnection.build([[recipe.w2, recipe.n2], [recipe.w3, recipe.n2]])
    metric = GeneratedMetric(chart, g, N,
                             provenance={"family": "flow_lc", "lam": recipe.lam},
                             excluded=(h4, h5, h5s))
    metric.check_grid(grid, extra={CHI: float(chi_samples[0]), **(extra or {})})

    cols = _stacked_cols(grid, chi_samples, extra)
    size = grid.size * len(chi_samples)

    psi_eq = ex.sub(ex.add(ex.mul(e2, _d2(_d2(recipe.psi))),
                           ex.mul(e3, _d3(_d3(recipe.psi)))), recipe.lam)
    if v_reading == "consistent":
        v_eq = ex.sub(ex.div(ex.mul(h5s, phistar), ex.mul(2, h4, h5)), recipe.lam)
    else:
        v_eq = ex.sub(ex.div(ex.mul(h5s, aux.phi), ex.mul(h4, h5)), recipe.lam)
    w_compat = ex.add(_d3(recipe.w2), ex.neg(_d2(recipe.w3)),
                      ex.mul(recipe.w3, _dv(recipe.w2)),
                      ex.neg(ex.mul(recipe.w2, _dv(recipe.w3))))
    n_eq = ex.sub(_d3(recipe.n2), _d2(recipe.n2))
    transports = []
    for name, wk in (("x2", recipe.w2), ("x3", recipe.w3)):
        transports.append(ex.add(ex.diff(h4, name), ex.neg(ex.mul(wk, _dv(h4))),
                                 ex.neg(ex.mul(2, _dv(wk), h4))))
    transports5 = [ex.sub(ex.diff(h5, name), ex.mul(wk, h5s))
                   for name, wk in (("x2", recipe.w2), ("x3", recipe.w3))]

    reports = [
        ResidualReport.from_grid("psi-equation", cols,
                                 _stacked_max([psi_eq], cols, size), tol),
        ResidualReport.from_grid("v-coupling", cols,
                                 _stacked_max([v_eq], cols, size), tol),
        ResidualReport.from_grid("w-compat", cols,
                                 _stacked_max([w_compat], cols, size), tol),
        ResidualReport.from_grid("n-evolution", cols,
                                 _stacked_max([n_eq], cols, size), tol),
        ResidualReport.from_grid("h4-transport", cols,
                                 _stacked_max(transports, cols, size), tol),
        ResidualReport.from_grid("h5-transport", cols,
                                 _stacked_max(transports5, cols, size), tol),
    ]
    fam = FlowFamily(metric, recipe.lam, tuple(float(c) for c in chi_samples))
    return fam, reports
