"""Command-line pipelines: recipes in, metrics/CSV out, exit-code contract."""

import json

from nhgeo import cli
from nhgeo import serialize as ser

GRID5 = {n: {"min": 0.5, "max": 1.5, "count": 3}
         for n in ("x1", "x2", "x3", "v")}
GRID5Y = {**GRID5, "y5": {"min": 0.5, "max": 1.5, "count": 2}}
GRID4 = {n: {"min": 0.5, "max": 1.5, "count": 3}
         for n in ("x2", "x3", "v", "y5")}


def write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def vacuum_recipe():
    return {
        "family": "gensol1_5d",
        "signatures": [1, 1, 1, 1, 1],
        "functions": {"g2": "exp(x2)", "g3": "exp(x2)", "f": "v", "f0": "0",
                      "h0": "1", "varsigma0": "1",
                      "n2_1": "1", "n2_2": "1", "n2_3": "1"},
        "source": {"upsilon2": "0", "upsilon4": "0"},
        "v0": 1.0,
        "grid": GRID5,
        "tolerance": 1e-8,
    }


def flat_seed_doc():
    return {
        "chart": {"x": ["x2", "x3"], "y": ["v", "y5"], "params": []},
        "g": [["1", "0"], ["0", "1"]],
        "h": [["1", "0"], ["0", "1"]],
        "N": [["0", "0"], ["0", "0"]],
        "provenance": {"family": "flat"},
    }


def flat_potentials_doc(omega="0"):
    xi = (0.7, 0.2, 0.0, 0.4)
    lam = sum(x * x for x in xi)
    c = (lam ** 2 - 1.0) / lam
    return {"omega": omega, "alpha": ["0"] * 4, "beta": ["0"] * 4,
            "mu": [repr(c * x) for x in xi]}


class TestGenerate:
    def test_vacuum_recipe_roundtrip(self, tmp_path):
        cfg = write(tmp_path, "recipe.json", vacuum_recipe())
        out = str(tmp_path / "metric.json")
        assert cli.main(["generate", "--config", cfg, "--out", out]) == 0
        doc = json.loads((tmp_path / "metric.json").read_text())
        assert doc["provenance"]["family"] == "gensol1_5d"
        gm = ser.metric_from_dict(doc)
        assert gm.chart.dim == 5

    def test_degenerate_recipe_exit_3(self, tmp_path):
        bad = vacuum_recipe()
        bad["functions"]["f0"] = "v"
        cfg = write(tmp_path, "bad.json", bad)
        assert cli.main(["generate", "--config", cfg,
                         "--out", str(tmp_path / "x.json")]) == 3

    def test_malformed_json_exit_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"family": "gensol1_5d"')
        assert cli.main(["generate", "--config", str(path)]) == 2

    def test_unknown_family_exit_2(self, tmp_path):
        bad = vacuum_recipe()
        bad["family"] = "who-knows"
        cfg = write(tmp_path, "bad.json", bad)
        assert cli.main(["generate", "--config", cfg]) == 2

    def test_vacuum_lc_family_with_reports(self, tmp_path):
        cfg = write(tmp_path, "lc.json", {
            "family": "vacuum_lc", "signatures": [1, 1, 1, 1],
            "functions": {"psi": "x2", "b": "v", "b0": "0",
                          "n2": "0", "n3": "0"},
            "h0": 1.0, "grid": GRID4, "tolerance": 1e-10})
        out = str(tmp_path / "lc_metric.json")
        assert cli.main(["generate", "--config", cfg, "--out", out]) == 0
        doc = json.loads((tmp_path / "lc_metric.json").read_text())
        assert all(r["pass"] for r in doc["family_reports"])


class TestVerify:
    def make_metric(self, tmp_path):
        cfg = write(tmp_path, "recipe.json", vacuum_recipe())
        out = str(tmp_path / "metric.json")
        assert cli.main(["generate", "--config", cfg, "--out", out]) == 0
        return out

    def test_generated_vacuum_passes(self, tmp_path, capsys):
        metric = self.make_metric(tmp_path)
        vcfg = write(tmp_path, "verify.json",
                     {"metric": metric, "grid": GRID5Y, "tolerance": 1e-8})
        out = str(tmp_path / "verify.csv")
        assert cli.main(["verify", "--config", vcfg, "--out", out]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert any(line.startswith("EQ R22+Y4 max=") for line in lines)

    def test_perturbed_metric_fails(self, tmp_path):
        metric = self.make_metric(tmp_path)
        doc = json.loads((tmp_path / "metric.json").read_text())
        doc["h"][0][0] = "1 + 0.01*v"
        pert = write(tmp_path, "metric_pert.json", doc)
        vcfg = write(tmp_path, "verify.json",
                     {"metric": pert, "grid": GRID5Y, "tolerance": 1e-8})
        assert cli.main(["verify", "--config", vcfg,
                         "--out", str(tmp_path / "v.csv")]) == 1

    def test_grid_on_excluded_locus_exit_4(self, tmp_path, capsys):
        metric = self.make_metric(tmp_path)
        grid = dict(GRID5Y)
        grid["v"] = {"min": -0.5, "max": 0.5, "count": 3}  # crosses f = f0
        vcfg = write(tmp_path, "verify.json",
                     {"metric": metric, "grid": grid, "tolerance": 1e-8})
        assert cli.main(["verify", "--config", vcfg]) == 4
        assert "grid point" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        metric = self.make_metric(tmp_path)
        vcfg = write(tmp_path, "verify.json",
                     {"metric": metric, "grid": GRID5Y, "tolerance": 1e-8,
                      "seed": 11})
        a = str(tmp_path / "a.csv")
        b = str(tmp_path / "b.csv")
        assert cli.main(["verify", "--config", vcfg, "--out", a]) == 0
        assert cli.main(["verify", "--config", vcfg, "--out", b]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_lc_checks_opt_in(self, tmp_path):
        metric = self.make_metric(tmp_path)
        vcfg = write(tmp_path, "verify.json",
                     {"metric": metric, "grid": GRID5Y, "tolerance": 1e-8,
                      "checks": ["ricci", "oracles", "lc"]})
        # the generated metric carries v-dependent rotation coefficients, so
        # it is a torsionful solution: the transport report fails by design
        assert cli.main(["verify", "--config", vcfg,
                         "--out", str(tmp_path / "v.csv")]) == 1

    def test_csv_header_contract(self, tmp_path):
        metric = self.make_metric(tmp_path)
        vcfg = write(tmp_path, "verify.json",
                     {"metric": metric, "grid": GRID5Y, "tolerance": 1e-8})
        out = tmp_path / "v.csv"
        cli.main(["verify", "--config", vcfg, "--out", str(out)])
        header = out.read_text().splitlines()[0]
        assert header == "equation,x1,x2,x3,v,y5,chi,residual"


class TestFlow:
    def flow_cfg(self):
        return {
            "family": "flow_solrf1", "lambda": 0.0,
            "signatures": [1, 1, 1, 1, 1],
            "chi": {"min": 0.0, "max": 1.0, "count": 3},
            "functions": {"varpi": "exp(x2)", "h5": "v^2", "h0": "1",
                          "varsigma40": "1", "n1": "0.2*x2", "n2": "0"},
            "v0": 1.0,
            "grid": {**GRID5, "y5": {"min": 0.5, "max": 1.5, "count": 2}},
            "tolerance": 1e-7,
        }

    def test_static_family_passes(self, tmp_path, capsys):
        cfg = write(tmp_path, "flow.json", self.flow_cfg())
        out = str(tmp_path / "flow.csv")
        assert cli.main(["flow", "--config", cfg, "--out", out]) == 0
        text = capsys.readouterr().out
        assert "chi=0.5" in text  # per-sample sections

    def test_incompatible_profile_exit_3(self, tmp_path):
        bad = self.flow_cfg()
        bad["functions"]["varpi"] = "exp(x2^2)"
        cfg = write(tmp_path, "flow.json", bad)
        assert cli.main(["flow", "--config", cfg]) == 3

    def test_lc_flow_family(self, tmp_path):
        cfg = write(tmp_path, "flow.json", {
            "family": "flow_lc", "lambda": 0.0, "signatures": [1, 1, 1, 1],
            "chi": [0.0, 1.0],
            "functions": {"psi": "x2", "h4": "1", "h5": "v^2",
                          "w2": "0", "w3": "0", "n2": "0.3"},
            "grid": GRID4, "tolerance": 1e-8})
        assert cli.main(["flow", "--config", cfg,
                         "--out", str(tmp_path / "f.csv")]) == 0


class TestGeroch:
    def test_zero_angle_identity(self, tmp_path):
        seed = write(tmp_path, "seed.json", flat_seed_doc())
        cfg = write(tmp_path, "ger.json", {
            "seed": seed, "xi": ["0.7", "0.2", "0", "0.4"], "theta": 0.0,
            "potentials": flat_potentials_doc(),
            "grid": GRID4, "tolerance": 1e-8})
        out = str(tmp_path / "t.json")
        assert cli.main(["geroch", "--config", cfg, "--out", out]) == 0
        doc = json.loads((tmp_path / "t.json").read_text())
        gm = ser.metric_from_dict(doc)
        seed_gm = ser.metric_from_dict(flat_seed_doc())
        from nhgeo import expr as ex
        p = {"x2": 1.0, "x3": 1.0, "v": 1.0, "y5": 1.0}
        for i in range(2):
            assert abs(ex.evaluate(gm.metric.g[i][i], p)
                       - ex.evaluate(seed_gm.metric.g[i][i], p)) < 1e-12

    def test_failing_potentials_exit_5(self, tmp_path):
        seed = write(tmp_path, "seed.json", flat_seed_doc())
        cfg = write(tmp_path, "ger.json", {
            "seed": seed, "xi": ["0.7", "0.2", "0", "0.4"], "theta": 0.3,
            "potentials": flat_potentials_doc(omega="x2"),
            "grid": GRID4, "tolerance": 1e-8})
        assert cli.main(["geroch", "--config", cfg]) == 5

    def test_chain_with_deform_step(self, tmp_path):
        seed = write(tmp_path, "seed.json", flat_seed_doc())
        cfg = write(tmp_path, "ger.json", {
            "seed": seed, "xi": ["0.7", "0.2", "0", "0.4"],
            "steps": [
                {"kind": "geroch", "theta": 0.0,
                 "potentials": flat_potentials_doc()},
                {"kind": "deform",
                 "polarizations": {"eta_h": ["2", "1"], "eta_v": ["1", "1"],
                                   "eta_n": [["1", "1"], ["1", "1"]]}},
            ],
            "grid": GRID4, "tolerance": 1e-8})
        out = str(tmp_path / "t.json")
        assert cli.main(["geroch", "--config", cfg, "--out", out]) == 0
        doc = json.loads((tmp_path / "t.json").read_text())
        assert doc["g"][0][0] == "2"


class TestExpr:
    def test_check_action(self, capsys):
        assert cli.main(["expr", "check", "sin(x2) + v^2",
                         "--vars", "x2,v"]) == 0
        out = capsys.readouterr().out
        assert "free variables: v, x2" in out

    def test_check_with_evaluation(self, capsys):
        assert cli.main(["expr", "check", "v^2", "--vars", "v",
                         "--at", "v=3"]) == 0
        assert "9.0" in capsys.readouterr().out

    def test_syntax_error_exit_2(self):
        assert cli.main(["expr", "check", "v +", "--vars", "v"]) == 2

    def test_unknown_variable_exit_2(self):
        assert cli.main(["expr", "check", "q + 1", "--vars", "v"]) == 2


class TestMoreFamilies:
    def test_generate_4d_family(self, tmp_path):
        cfg = write(tmp_path, "r4.json", {
            "family": "gensol1_4d", "signatures": [1, 1, 1, 1, 1],
            "functions": {"g2": "exp(x2)", "g3": "exp(x2)", "f": "v",
                          "n2_2": "1", "n2_3": "1"},
            "v0": 1.0,
            "grid": {n: {"min": 0.5, "max": 1.5, "count": 3}
                     for n in ("x2", "x3", "v")}})
        out = str(tmp_path / "m4.json")
        assert cli.main(["generate", "--config", cfg, "--out", out]) == 0
        doc = json.loads((tmp_path / "m4.json").read_text())
        assert doc["chart"]["x"] == ["x2", "x3"]
        vcfg = write(tmp_path, "v4.json", {"metric": out, "grid": GRID4,
                                           "tolerance": 1e-8})
        assert cli.main(["verify", "--config", vcfg,
                         "--out", str(tmp_path / "v4.csv")]) == 0

    def test_sourced_lc_family(self, tmp_path):
        lam = 0.25
        cfg = write(tmp_path, "rs.json", {
            "family": "sourced_lc", "signatures": [1, 1, 1, 1],
            "functions": {"psi": f"{lam / 2}*x2^2",
                          "h4": f"1/(1 + {lam}*v^2)", "h5": "v^2",
                          "n2": "0", "n3": "0"},
            "source": {"lambda": lam},
            "grid": GRID4, "tolerance": 1e-10})
        out = str(tmp_path / "ms.json")
        assert cli.main(["generate", "--config", cfg, "--out", out]) == 0
        doc = json.loads((tmp_path / "ms.json").read_text())
        assert all(r["pass"] for r in doc["family_reports"])

    def test_parametric_recipe_with_bindings(self, tmp_path):
        cfg = write(tmp_path, "rp.json", {
            "family": "gensol1_5d", "signatures": [1, 1, 1, 1, 1],
            "params": ["theta1"],
            "param_values": {"theta1": 0.4},
            "functions": {"g2": "exp(x2)", "g3": "exp(x2)",
                          "f": "v + theta1*x2*v^2",
                          "n1_1": "theta1*x3"},
            "v0": 1.0, "grid": GRID5})
        out = str(tmp_path / "mp.json")
        assert cli.main(["generate", "--config", cfg, "--out", out]) == 0
        vcfg = write(tmp_path, "vp.json", {
            "metric": out, "grid": GRID5Y, "tolerance": 1e-8,
            "params": {"theta1": 0.4}})
        assert cli.main(["verify", "--config", vcfg,
                         "--out", str(tmp_path / "vp.csv")]) == 0


class TestSummaryOutput:
    def test_verify_json_summary(self, tmp_path):
        cfg = write(tmp_path, "recipe.json", vacuum_recipe())
        metric = str(tmp_path / "metric.json")
        assert cli.main(["generate", "--config", cfg, "--out", metric]) == 0
        summary = str(tmp_path / "summary.json")
        vcfg = write(tmp_path, "verify.json",
                     {"metric": metric, "grid": GRID5Y, "tolerance": 1e-8,
                      "summary": summary})
        assert cli.main(["verify", "--config", vcfg,
                         "--out", str(tmp_path / "v.csv")]) == 0
        doc = json.loads((tmp_path / "summary.json").read_text())
        assert doc["pass"] is True
        assert any(r["equation"] == "S44+Y2" for r in doc["reports"])
