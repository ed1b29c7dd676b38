import io
import os
import csv
import json
import tempfile
import unittest
import contextlib

import polypade.util.cli as cli
import polypade.interp.k11 as k11


class CliTest(unittest.TestCase):
    tmp: tempfile.TemporaryDirectory

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def path(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    def run_cli(self, *argv: str) -> tuple[int, str]:
        err = io.StringIO()
        with contextlib.redirect_stderr(err):
            code = cli.main(list(argv))
        return code, err.getvalue()

    def run_json(self, *argv: str) -> tuple[int, dict]:
        out = self.path("report.json")
        code, _ = self.run_cli(*argv, "--out", out)
        with open(out, encoding="utf-8") as f:
            return code, json.load(f)

    def write_spec(self, name: str, spec: dict) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(spec, f)
        return path

    def test_takagi_half_sum(self):
        code, report = self.run_json("takagi", "--builtin", "half_sum", "--n", "1,1")
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(report["schema"], cli.REPORT_SCHEMA)
        self.assertEqual(report["command"], "takagi")
        (result,) = report["results"]
        self.assertAlmostEqual(result["sigma"], 0.7071067811865476, delta=1e-10)
        self.assertEqual(result["n"], [1, 1])
        self.assertEqual(result["taylor_match_depth"], [1, 1])
        self.assertFalse(result["sup_gap_bound_holds"])

    def test_report_reingestion(self):
        first = self.path("first.json")
        second = self.path("second.json")
        code, _ = self.run_cli("takagi", "--builtin", "half_sum", "--n", "1,1", "--n", "2,2", "--out", first)
        self.assertEqual(code, cli.EXIT_OK)
        code, _ = self.run_cli("takagi", "--spec", first, "--out", second)
        self.assertEqual(code, cli.EXIT_OK)
        with open(first, encoding="utf-8") as f:
            a = json.load(f)
        with open(second, encoding="utf-8") as f:
            b = json.load(f)
        self.assertEqual(a["spec"], b["spec"])
        self.assertEqual(a["results"], b["results"])

    def test_pade_sweep_csv(self):
        out = self.path("sweep.csv")
        args = ["pade-sweep", "--builtin", "half_sum", "--format", "csv", "--out", out, "--workers", "2"]
        for k in range(1, 5):
            args += ["--n", f"{k},{k}"]
        code, _ = self.run_cli(*args)
        self.assertEqual(code, cli.EXIT_OK)
        with open(out, encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([r["n"] for r in rows], ["1x1", "2x2", "3x3", "4x4"])
        self.assertEqual(list(rows[0]), list(cli.SWEEP_COLUMNS))
        sigmas = [float(r["sigma"]) for r in rows]
        self.assertTrue(all(b >= a - 1e-12 for a, b in zip(sigmas, sigmas[1:])))
        self.assertAlmostEqual(sigmas[0], 0.7071067811865476, delta=1e-10)

    def test_k11_trivial(self):
        code, report = self.run_json("k11", "--point", "1", "0", "0", "0")
        self.assertEqual(code, cli.EXIT_OK)
        (result,) = report["results"]
        self.assertTrue(result["member"])
        self.assertEqual(result["interpolant"]["sigma"], {"re": 0.0, "im": 0.0})
        taylor = {tuple(item["alpha"]): item for item in result["interpolant"]["taylor"]}
        self.assertEqual(set(taylor), {(0, 0)})

    def test_k11_non_member(self):
        code, report = self.run_json("k11", "--point", "1", "0", "0", "3")
        self.assertEqual(code, cli.EXIT_INFEASIBLE)
        self.assertFalse(report["results"][0]["member"])
        self.assertNotIn("interpolant", report["results"][0])

    def test_k11_unnormalized(self):
        code, report = self.run_json("k11", "--point", "2", "1", "1", "0.5")
        self.assertEqual(code, cli.EXIT_OK)
        (result,) = report["results"]
        self.assertTrue(result["cf2_general_member"])
        self.assertAlmostEqual(result["normalized"]["c01"]["re"], 0.5)
        self.assertTrue(result["member"])

    def test_k11_spec_file(self):
        spec = self.write_spec(
            "k11.json",
            {
                "schema": cli.SPEC_SCHEMA,
                "point": {"c01": {"re": 0.5, "im": 0.0}, "c10": "0.5", "c11": 0.25},
            },
        )
        code, report = self.run_json("k11", "--spec", spec)
        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue(report["results"][0]["member"])

    def test_cf_interp_data(self):
        table = k11.K11Point(0.5, 0.5, 0.25).to_table()
        spec = self.write_spec("cf.json", {"schema": cli.SPEC_SCHEMA, "data": table.to_json(), "bound": [1, 1]})
        code, report = self.run_json("cf-interp", "--spec", spec)
        self.assertEqual(code, cli.EXIT_OK)
        (result,) = report["results"]
        self.assertTrue(result["feasible"])
        self.assertTrue(result["coeff_ok"])
        self.assertLessEqual(result["u22"], 1e-8)
        self.assertEqual(len(result["coefficients"]), 4)

    def test_cf_interp_infeasible(self):
        data = [{"alpha": [0], "re": 1.0, "im": 0.0}, {"alpha": [1], "re": 2.5, "im": 0.0}]
        spec = self.write_spec("bad.json", {"schema": cli.SPEC_SCHEMA, "d": 1, "data": data, "bound": [1]})
        code, report = self.run_json("cf-interp", "--spec", spec, "--max-iters", "100")
        self.assertEqual(code, cli.EXIT_INFEASIBLE)
        self.assertFalse(report["results"][0]["feasible"])
        self.assertTrue(report["results"][0]["conclusive"])
        self.assertGreaterEqual(report["results"][0]["residual"], 0.0)

    def test_cf_interp_zero_valued_data(self):
        data = [
            {"alpha": [0, 0], "re": 1.0, "im": 0.0},
            {"alpha": [1, 0], "re": 0.5, "im": 0.0},
            {"alpha": [0, 1], "re": 0.0, "im": 0.0},
            {"alpha": [1, 1], "re": 0.0, "im": 0.0},
        ]
        spec = self.write_spec("zeros.json", {"schema": cli.SPEC_SCHEMA, "data": data, "bound": [1, 1]})
        code, report = self.run_json("cf-interp", "--spec", spec)
        self.assertEqual(code, cli.EXIT_OK)
        (result,) = report["results"]
        self.assertTrue(result["feasible"])
        self.assertTrue(result["coeff_ok"])
        alphas = [tuple(c["alpha"]) for c in result["coefficients"]]
        self.assertEqual(set(alphas), {(0, 0), (1, 0), (0, 1), (1, 1)})
        realized = {tuple(c["alpha"]): c["realized"] for c in result["coefficients"]}
        self.assertAlmostEqual(realized[(0, 1)]["re"], 0.0, delta=1e-6)
        self.assertAlmostEqual(realized[(1, 1)]["re"], 0.0, delta=1e-6)

        code, report = self.run_json("cf-interp", "--spec", self.write_spec("nobound.json", {"data": data}), "--bound", "1,1")
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(report["spec"]["bound"], [1, 1])
        self.assertEqual(len(report["results"][0]["coefficients"]), 4)

    def test_cf_interp_bound_errors(self):
        data = [{"alpha": [0, 0], "re": 1.0, "im": 0.0}, {"alpha": [1, 1], "re": 0.25, "im": 0.0}]
        code, err = self.run_cli("cf-interp", "--spec", self.write_spec("missing.json", {"data": data}))
        self.assertEqual(code, cli.EXIT_ERROR)
        self.assertIn("bound", err)

        outside = self.write_spec("outside.json", {"data": data, "bound": [1, 0]})
        self.assertEqual(self.run_cli("cf-interp", "--spec", outside)[0], cli.EXIT_ERROR)

        short = self.write_spec("short.json", {"data": data, "bound": [1]})
        code, err = self.run_cli("cf-interp", "--spec", short)
        self.assertEqual(code, cli.EXIT_ERROR)
        self.assertIn("d = 2", err)

    def test_pfister_check_radius(self):
        code, err = self.run_cli("pfister", "--builtin", "half_sum", "--rho", "0.9", "--kappa", "1", "--radius", "0.7")
        self.assertEqual(code, cli.EXIT_ERROR)
        self.assertIn(cli.PFISTER_RADIUS_KEY, err)

        code, report = self.run_json("pfister", "--builtin", "half_sum", "--rho", "0.9", "--kappa", "1", "--check-radius", "0.7")
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(report["spec"]["options"], {cli.PFISTER_RADIUS_KEY: 0.7})

        code, err = self.run_cli("takagi", "--builtin", "half_sum", "--n", "1,1", "--check-radius", "0.7")
        self.assertEqual(code, cli.EXIT_ERROR)

    def test_pfister_csv(self):
        out = self.path("pfister.csv")
        code, _ = self.run_cli(
            "pfister", "--builtin", "half_sum", "--rho", "0.9", "--kappa", "1", "--kappa", "2",
            "--format", "csv", "--out", out,
        )
        self.assertEqual(code, cli.EXIT_OK)
        with open(out, encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([r["kappa"] for r in rows], ["1", "2"])
        for row in rows:
            with self.subTest(kappa=row["kappa"]):
                self.assertLessEqual(float(row["unimodular_error"]), 1e-8)

    def test_errors(self):
        bogus = self.write_spec("bogus.json", {"schema": cli.SPEC_SCHEMA, "bogus": 1})
        code, err = self.run_cli("takagi", "--spec", bogus)
        self.assertEqual(code, cli.EXIT_ERROR)
        self.assertIn("bogus", err)

        old = self.write_spec("old.json", {"schema": "polypade.spec/0"})
        self.assertEqual(self.run_cli("takagi", "--spec", old)[0], cli.EXIT_ERROR)

        code, err = self.run_cli("takagi", "--builtin", "half_sum", "--n", "1,1", "--tol", "nonsense=1")
        self.assertEqual(code, cli.EXIT_ERROR)
        self.assertIn("nonsense", err)

        self.assertEqual(self.run_cli("takagi", "--builtin", "half_sum")[0], cli.EXIT_ERROR)
        self.assertEqual(self.run_cli("takagi", "--builtin", "nope", "--n", "1,1")[0], cli.EXIT_ERROR)
        self.assertEqual(self.run_cli("k11", "--point", "1", "0", "0", "0", "--format", "csv")[0], cli.EXIT_ERROR)
        self.assertEqual(self.run_cli("takagi", "--spec", self.path("missing.json"))[0], cli.EXIT_ERROR)

    def test_tolerance_overrides(self):
        code, report = self.run_json(
            "takagi", "--builtin", "half_sum", "--n", "1,1", "--tol", "ztol=1e-3", "--tol", "con_eig_rtol=1e-9"
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(report["spec"]["options"], {"ztol": "1e-3", "con_eig_rtol": "1e-9"})

    def test_spec_round_trip(self):
        spec = cli.ProblemSpec.from_json(
            {"schema": cli.SPEC_SCHEMA, "d": 1, "function": {"kind": "builtin", "name": "monomial", "params": {"alpha": [1]}}, "schedule": [[2]]}
        )
        self.assertEqual(spec.schedule, [(2,)])
        self.assertEqual(cli.ProblemSpec.from_json(spec.to_json()), spec)
        self.assertEqual(spec.symbol().d, 1)


if __name__ == "__main__":
    unittest.main()
