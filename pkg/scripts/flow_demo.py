#!/usr/bin/env python3
"""Evolution-equation residuals for two families: a product of round spheres
(a fixed point of the normalized flow) and the integrable vacuum class."""

from nhgeo import expr as ex
from nhgeo import generators as gen
from nhgeo import geometry as geo
from nhgeo import ricci_flow as rf
from nhgeo.numerics import Grid

x2, v = ex.var("x2"), ex.var("v")
chis = (0.0, 0.5, 1.0)

# --- fixed point: S^2 x S^2 with Ric = lam g ------------------------------
lam = 0.3
a2 = 1.0 / lam
chart = geo.chart_4d(("chi",))
g = geo.DMetric.diagonal([a2, ex.mul(a2, ex.sin(x2) ** 2)],
                         [a2, ex.mul(a2, ex.sin(v) ** 2)])
fam = rf.FlowFamily(gen.GeneratedMetric(chart, g, geo.NConnection.zero(chart)),
                    lam, chis)
grid4 = Grid.build({n: (0.5, 1.5, 3) for n in ("x2", "x3", "v", "y5")})
print(f"Einstein fixed point (lam = {lam}):")
for rep in rf.flow_residuals(fam, grid4, tol=1e-10):
    print(" ", rep.summary_line())
print(" ", rf.hamilton_residual(fam, grid4, tol=1.0).summary_line(),
      "(unnormalized: the residual is exactly 2*lam*g)")

# --- integrable class, lam = 0 -------------------------------------------
recipe = rf.FlowRecipe(signatures=(1, 1, 1, 1, 1), varpi=ex.exp(x2),
                       h5=v ** 2, h0fn=ex.ONE, varsigma40=ex.ONE,
                       n1fn=ex.mul(0.2, x2), n2fn=ex.ZERO, lam=0.0, v0=1.0)
grid5 = Grid.build({n: (0.5, 1.5, 3) for n in ("x1", "x2", "x3", "v", "y5")})
fam2 = rf.build_flow_solution(recipe, grid5, chis)
print("\nintegrable vacuum family:")
for rep in rf.flow_residuals(fam2, grid5, tol=1e-7):
    print(" ", rep.summary_line())
