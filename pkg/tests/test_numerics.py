"""Quadrature, grids, residual reports."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhgeo import expr as ex
from nhgeo import numerics as nm

V = ex.var("v")


def ln2_series(terms=60):
    """Independent oracle for ln 2: ln(1/(1-x)) = sum x^k / k at x = 1/2."""
    return sum(0.5 ** k / k for k in range(1, terms + 1))


class TestAdaptiveSimpson:
    def test_monomial(self):
        q = nm.Quadrature(abs_tol=1e-12)
        got = nm.integrate_v(V ** 2, {}, 0.0, 1.0, q)
        assert abs(got - 1.0 / 3.0) <= 1e-10

    def test_zero_integrand(self):
        assert nm.integrate_v(ex.ZERO, {}, 0.0, 1.0) == 0.0

    def test_log_two(self):
        got = nm.integrate_v(ex.div(1, V), {}, 1.0, 2.0)
        assert abs(got - ln2_series()) < 1e-10

    def test_reversed_interval_flips_sign(self):
        a = nm.integrate_v(V ** 2, {}, 0.0, 1.0)
        b = nm.integrate_v(V ** 2, {}, 1.0, 0.0)
        assert a == -b

    def test_fixed_variables_bound(self):
        e = ex.mul(ex.var("x2"), V)
        got = nm.integrate_v(e, {"x2": 3.0}, 0.0, 2.0)
        assert got == pytest.approx(6.0, abs=1e-10)

    def test_max_depth_exceeded(self):
        q = nm.Quadrature(abs_tol=1e-15, max_depth=2)
        with pytest.raises(nm.MaxDepthExceeded):
            nm.integrate_v(ex.sin(ex.mul(40, V)), {}, 0.0, 1.0, q)

    def test_nonfinite_integrand_rejected(self):
        with pytest.raises(ex.EvalError):
            nm.integrate_v(ex.div(1, V), {}, 0.0, 1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5),
           st.floats(0.0, 1.0), st.floats(1.0, 2.0))
    def test_additivity(self, c0, c1, c2, b, c):
        e = ex.add(c0, ex.mul(c1, V), ex.mul(c2, V ** 2), ex.sin(V))
        a = 0.0
        left = nm.integrate_v(e, {}, a, b)
        right = nm.integrate_v(e, {}, b, c)
        whole = nm.integrate_v(e, {}, a, c)
        assert abs(left + right - whole) <= 2.0 * nm.DEFAULT_QUADRATURE.abs_tol + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
    def test_linearity(self, ca, cb):
        f = ex.sin(V)
        g = V ** 2
        combo = ex.add(ex.mul(ca, f), ex.mul(cb, g))
        lhs = nm.integrate_v(combo, {}, 0.0, 1.5)
        rhs = (ca * nm.integrate_v(f, {}, 0.0, 1.5)
               + cb * nm.integrate_v(g, {}, 0.0, 1.5))
        assert abs(lhs - rhs) <= 2.0 * nm.DEFAULT_QUADRATURE.abs_tol + 1e-12


class TestAntiderivativeProfile:
    def test_constant_integrand(self):
        got = nm.antiderivative_profile(ex.ONE, {}, 0.0, [0.0, 1.0, 2.0])
        assert got == [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]

    def test_linear_integrand(self):
        got = nm.antiderivative_profile(ex.mul(2, V), {}, 0.0, [0.0, 1.0])
        assert got[0] == (0.0, 0.0)
        assert got[1][1] == pytest.approx(1.0, abs=1e-12)

    def test_quadratic_closed_form(self):
        got = nm.antiderivative_profile(V ** 2, {}, 0.0, [1.0, 2.0])
        assert got[0][1] == pytest.approx(1.0 / 3.0, abs=1e-10)
        assert got[1][1] == pytest.approx(8.0 / 3.0, abs=1e-10)

    def test_unsorted_samples_reported_in_input_order(self):
        got = nm.antiderivative_profile(ex.ONE, {}, 0.0, [2.0, 0.5])
        assert [s for s, _ in got] == [2.0, 0.5]
        assert got[0][1] == pytest.approx(2.0, abs=1e-12)
        assert got[1][1] == pytest.approx(0.5, abs=1e-12)


class TestGrid:
    def test_count_lower_bound(self):
        with pytest.raises(ValueError):
            nm.Grid.build({"v": (0.0, 1.0, 1)})

    def test_duplicate_axis_rejected(self):
        with pytest.raises(ValueError):
            nm.Grid((("v", 0.0, 1.0, 2), ("v", 0.0, 1.0, 2)))

    def test_arrays_shape_and_order(self):
        g = nm.Grid.build({"a": (0.0, 1.0, 2), "b": (0.0, 2.0, 3)})
        cols = g.arrays()
        assert g.size == 6
        assert list(cols["a"]) == [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
        assert list(cols["b"]) == [0.0, 1.0, 2.0, 0.0, 1.0, 2.0]

    def test_exclusions(self):
        g = nm.Grid.build({"v": (-1.0, 1.0, 3)})  # contains v = 0
        with pytest.raises(nm.GridExclusionError):
            g.check_exclusions([ex.var("v")])
        g2 = nm.Grid.build({"v": (0.5, 1.0, 3)})
        g2.check_exclusions([ex.var("v")])  # fine


class TestResidualReport:
    def test_pass_iff_max_below_tolerance(self):
        cols = {"v": np.array([0.0, 1.0, 2.0])}
        rep = nm.ResidualReport.from_grid("eq", cols,
                                          np.array([1e-12, -5e-11, 2e-13]), 1e-10)
        assert rep.passed and rep.max_abs == 5e-11
        rep2 = nm.ResidualReport.from_grid("eq", cols,
                                           np.array([1e-12, -5e-9, 0.0]), 1e-10)
        assert not rep2.passed

    def test_summary_and_csv(self):
        cols = {"v": np.array([0.25, 0.5])}
        rep = nm.ResidualReport.from_grid("test-eq", cols,
                                          np.array([0.0, 1e-3]), 1e-6)
        assert rep.summary_line().startswith("EQ test-eq max=")
        rows = rep.csv_rows(["x2", "v"])
        assert rows[0] == ["test-eq", "", "0.25", "0.0"]

    def test_chunked_evaluation_matches(self):
        g = nm.Grid.build({"v": (0.2, 1.4, 13), "x2": (0.5, 1.5, 3)})
        e = ex.parse("sin(v)*x2 + v^2", ["v", "x2"])
        cols = g.arrays()
        a = nm.evaluate_on_grid(e, cols, jobs=1)
        b = nm.evaluate_on_grid(e, cols, jobs=4)
        assert np.array_equal(a, b)


class TestReportSerialization:
    def test_json_summary(self):
        import json as _json
        cols = {"v": np.array([0.0, 1.0])}
        reps = [nm.ResidualReport.from_grid("a", cols, np.array([0.0, 1e-12]),
                                            1e-10),
                nm.ResidualReport.from_grid("b", cols, np.array([1.0, 2.0]),
                                            1e-10)]
        doc = _json.loads(nm.reports_to_json(reps))
        assert doc["pass"] is False
        assert [r["equation"] for r in doc["reports"]] == ["a", "b"]
        assert doc["reports"][0]["pass"] is True
