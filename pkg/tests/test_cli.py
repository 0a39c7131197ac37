import json

import pytest

from boundopt import cli
from boundopt.exceptions import NumericError


def _config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestRun:
    def test_success(self, tmp_path, capsys):
        code = cli.main(["run", "--config", str(_config(tmp_path, {"algorithm": "cccp"})), "--out", str(tmp_path / "r")])
        assert code == cli.EXIT_OK
        assert "converged" in capsys.readouterr().out
        assert (tmp_path / "r" / "manifest.json").exists()

    def test_seed_override(self, tmp_path):
        cfg = _config(tmp_path, {"algorithm": "em-mog"})
        assert cli.main(["run", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "r"), "--no-diagnostics"]) == 0
        manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
        assert manifest["spec"]["data"]["seed"] == 3

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = _config(tmp_path, {"algorithm": "cccp", "preprocessing": ["whiten"]})
        assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_CONFIG
        assert "preprocessing" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG

    def test_more_components_than_points(self, tmp_path, capsys):
        cfg = _config(tmp_path, {"algorithm": "em-mog", "data": {"n": 2}, "model": {"n_components": 3}})
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == cli.EXIT_CONFIG
        assert "n_components" in capsys.readouterr().err

    def test_numeric_error_exit_code(self, tmp_path, monkeypatch, capsys):
        from boundopt import experiments

        def explode(*args, **kwargs):
            raise NumericError("non-finite objective")

        monkeypatch.setattr(experiments, "run_experiment", explode)
        cfg = _config(tmp_path, {"algorithm": "cccp"})
        assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_NUMERIC
        assert "non-finite" in capsys.readouterr().err


class TestCompareAndFigure:
    def test_compare(self, tmp_path, capsys):
        dirs = []
        for k in (1, 3):
            cfg = _config(tmp_path, {"algorithm": "cccp", "preprocessing": [f"decomposition:dec{k}"]}, f"c{k}.json")
            out = tmp_path / f"dec{k}"
            assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--no-diagnostics"]) == 0
            dirs.append(str(out))
        capsys.readouterr()
        assert cli.main(["compare", *dirs]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("run,") and len(lines) == 3
        assert cli.main(["figure", "fig4-curves", *dirs, "--out", str(tmp_path / "fig")]) == 0
        assert (tmp_path / "fig" / "fig4_curves.csv").exists()

    def test_compare_incomparable(self, tmp_path):
        dirs = []
        for alg in ("cccp", "em-mog"):
            out = tmp_path / alg
            cli.main(["run", "--config", str(_config(tmp_path, {"algorithm": alg}, f"{alg}.json")), "--out", str(out),
                      "--no-diagnostics"])
            dirs.append(str(out))
        assert cli.main(["compare", *dirs]) == cli.EXIT_CONFIG

    def test_compare_missing_run(self, tmp_path):
        assert cli.main(["compare", str(tmp_path / "missing")]) == cli.EXIT_CONFIG


class TestSelftest:
    def test_subset(self, tmp_path, capsys):
        out = tmp_path / "res.json"
        assert cli.main(["selftest", "--only", "4,9", "--out", str(out)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2 and all("[PASS]" in line for line in lines)
        assert [r["number"] for r in json.loads(out.read_text())] == [4, 9]

    @pytest.mark.parametrize("only", ["4,x", "99"])
    def test_bad_selection(self, only):
        assert cli.main(["selftest", "--only", only]) == cli.EXIT_CONFIG
