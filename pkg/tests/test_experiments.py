import json

import numpy as np
import pytest

from boundopt import experiments as ex
from boundopt.core import LearningCurve
from boundopt.exceptions import ConfigError, IncomparableRunsError


def _run(tmp_path, doc, name=None, diagnose=True):
    spec = ex.ExperimentSpec.from_dict(doc)
    return ex.run_experiment(spec, tmp_path / (name or spec.name), diagnose=diagnose)


class TestSpec:
    def test_defaults_and_name(self):
        spec = ex.ExperimentSpec.from_dict({"algorithm": "em-mog"})
        assert spec.data["n"] == 200 and spec.model["init"] == "quantile"
        assert spec.name == "em-mog-well-naive-seed0"

    def test_cccp_defaults_to_first_decomposition(self):
        assert ex.ExperimentSpec.from_dict({"algorithm": "cccp"}).preprocessing == ["decomposition:dec1"]

    def test_with_seed_renames(self):
        spec = ex.ExperimentSpec.from_dict({"algorithm": "nmf", "preprocessing": ["translate"]}).with_seed(4)
        assert spec.seed == 4 and spec.name.endswith("seed4")

    def test_round_trip(self):
        spec = ex.ExperimentSpec.from_dict({"algorithm": "gis-logistic", "data": {"oriented": True},
                                            "preprocessing": ["translate", "whiten"]})
        assert ex.ExperimentSpec.from_dict(spec.to_dict()).to_dict() == spec.to_dict()

    @pytest.mark.parametrize("doc,field", [
        ({"algorithm": "sgd"}, "algorithm"),
        ({}, "algorithm"),
        ({"algorithm": "em-mog", "data": {"colour": 1}}, "data"),
        ({"algorithm": "em-mog", "model": {"rank": 2}}, "model"),
        ({"algorithm": "em-mog", "preprocessing": ["whiten"]}, "preprocessing"),
        ({"algorithm": "cccp", "preprocessing": ["whiten"]}, "preprocessing"),
        ({"algorithm": "cccp", "preprocessing": ["decomposition:dec7"]}, "preprocessing"),
        ({"algorithm": "em-mog", "stop": {"rel_tol": 2.0}}, "stop"),
        ({"algorithm": "em-mog", "extra": 1}, "config"),
    ])
    def test_invalid_names_field(self, doc, field):
        with pytest.raises(ConfigError, match=field):
            ex.ExperimentSpec.from_dict(doc)

    def test_bad_json(self):
        with pytest.raises(ConfigError, match="JSON"):
            ex.ExperimentSpec.from_json("{not json")

    def test_custom_decomposition(self):
        spec = ex.ExperimentSpec.from_dict({
            "algorithm": "cccp", "preprocessing": ["decomposition:mine"],
            "model": {"decompositions": {"mine": {"vex": [0, 2, 1, 0, 1], "cave": [-2, 0, -4]}}}})
        assert spec.preprocessing == ["decomposition:mine"]


class TestRunExperiment:
    def test_well_separated_mog(self, tmp_path):
        out = _run(tmp_path, {"algorithm": "em-mog"})
        m = out.manifest
        assert m["status"] == "converged" and m["iterations"] <= 25
        report = json.loads((out.directory / "report.json").read_text())
        assert report["diagnostics"]["direction"]["cos_step_newton"] >= 0.99
        assert ex.verify_manifest(out.directory)
        for name in ("curve.csv", "report.json", "manifest.json", "data.csv"):
            assert (out.directory / name).exists()

    def test_curve_file_matches_result(self, tmp_path):
        out = _run(tmp_path, {"algorithm": "cccp", "preprocessing": ["decomposition:dec2"]})
        curve = LearningCurve.from_csv((out.directory / "curve.csv").read_text())
        assert curve.rows == out.curve.rows

    def test_cccp_counts_ordered(self, tmp_path):
        its = [_run(tmp_path, {"algorithm": "cccp", "preprocessing": [f"decomposition:dec{k}"]}).manifest["iterations"]
               for k in (1, 3)]
        assert its[0] < its[1]

    def test_nmf_writes_factors(self, tmp_path):
        out = _run(tmp_path, {"algorithm": "nmf", "data": {"n_vectors": 10}, "stop": {"max_iter": 200}},
                   diagnose=False)
        for name in ("V.csv", "W.csv", "H.csv"):
            assert (out.directory / name).exists()

    def test_logistic_parameters_on_original_features(self, tmp_path):
        out = _run(tmp_path, {"algorithm": "gis-logistic", "data": {"n": 200}, "preprocessing": ["translate"],
                              "stop": {"max_iter": 50_000}}, diagnose=False)
        report = json.loads((out.directory / "report.json").read_text())
        assert len(report["parameters"]["w"]) == 3

    def test_deterministic_bytes(self, tmp_path):
        doc = {"algorithm": "em-hmm", "data": {"num_seqs": 4, "length": 30, "seed": 3}}
        a = _run(tmp_path, doc, "a", diagnose=False)
        b = _run(tmp_path, doc, "b", diagnose=False)
        assert (a.directory / "curve.csv").read_bytes() == (b.directory / "curve.csv").read_bytes()

    def test_rerun_replaces_directory(self, tmp_path):
        doc = {"algorithm": "cccp"}
        _run(tmp_path, doc, "same")
        out = _run(tmp_path, doc, "same")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["same"]
        assert ex.verify_manifest(out.directory)

    def test_default_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BOUNDOPT_OUT", str(tmp_path / "root"))
        spec = ex.ExperimentSpec.from_dict({"algorithm": "cccp"})
        out = ex.run_experiment(spec, diagnose=False)
        assert out.directory == tmp_path / "root" / spec.name


class TestCompare:
    def test_self_comparison(self, tmp_path):
        m = ex.load_manifest(_run(tmp_path, {"algorithm": "cccp"}).directory)
        rows = ex.compare_runs([m, m])
        assert rows[1]["speedup"] == 1.0

    def test_speedup_and_csv(self, tmp_path):
        base = ex.load_manifest(_run(tmp_path, {"algorithm": "gis-maxent"}, diagnose=False).directory)
        fast = ex.load_manifest(_run(tmp_path, {"algorithm": "gis-maxent", "preprocessing": ["translate"]},
                                     diagnose=False).directory)
        rows = ex.compare_runs([base, fast])
        assert rows[1]["speedup"] == pytest.approx(base["iterations"] / fast["iterations"])
        text = ex.comparison_to_csv(rows)
        assert text.splitlines()[0].startswith("run,preprocessing,iterations,speedup")

    def test_incomparable(self, tmp_path):
        a = ex.load_manifest(_run(tmp_path, {"algorithm": "cccp"}, diagnose=False).directory)
        b = ex.load_manifest(_run(tmp_path, {"algorithm": "em-mog"}, diagnose=False).directory)
        with pytest.raises(IncomparableRunsError):
            ex.compare_runs([a, b])


class TestFigures:
    def test_aligned_curves_end_at_zero(self, tmp_path):
        ms = [ex.load_manifest(_run(tmp_path, {"algorithm": "cccp", "preprocessing": [f"decomposition:dec{k}"]},
                                    diagnose=False).directory) for k in (1, 2, 3)]
        (path,) = ex.emit_figure_data("fig4-curves", ms, tmp_path / "fig")
        rows = [line.split(",") for line in path.read_text().splitlines()]
        assert rows[0][0] == "iter" and len(rows[0]) == 4
        for col in range(1, 4):
            vals = [float(r[col]) for r in rows[1:] if r[col] != ""]
            assert vals[-1] == 0.0
            assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_quiver_near_optimum(self, tmp_path):
        m = ex.load_manifest(_run(tmp_path, {"algorithm": "em-mog"}, diagnose=False).directory)
        grid, arrows = ex.emit_figure_data("fig1-quiver", [m], tmp_path / "fig")
        lines = arrows.read_text().splitlines()
        header = lines[0].split(",")
        last = dict(zip(header, map(float, lines[-1].split(","))))
        assert last["cos_step_newton"] >= 0.99
        assert len(grid.read_text().splitlines()) == 101 * 101 + 1

    def test_wrong_algorithm(self, tmp_path):
        m = ex.load_manifest(_run(tmp_path, {"algorithm": "cccp"}, diagnose=False).directory)
        with pytest.raises(ConfigError):
            ex.emit_figure_data("fig2-curves", [m], tmp_path / "fig")


def test_means_only_mog_moves_only_means():
    data = np.r_[np.full(5, -3.0), np.full(5, 3.0)]
    imap = ex.means_only_mog(data)
    assert imap.dim == 2
    # each cluster leaks weight 1 / (1 + e^6) to the far component
    r = 1.0 / (1.0 + np.exp(-6.0))
    np.testing.assert_allclose(imap.step(np.array([-1.0, 1.0])), [3 - 6 * r, 6 * r - 3], rtol=1e-12)
