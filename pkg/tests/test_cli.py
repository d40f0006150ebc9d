import json

import numpy as np
import pytest

from sproc import io as sio
from sproc.cli import main
from sproc.models import simulate_poisson
from sproc.roc import auc, roc_covariate_pp
from sproc.spatial import Grid, PointPattern, PresenceGrid, Raster, Window, discretise


@pytest.fixture
def workspace(tmp_path):
    g = Grid.covering(0, 1, 0, 1, 20)
    W = Window.unit_square()
    Z = Raster.from_function(g, lambda x, y: x)
    Y = Raster.from_function(g, lambda x, y: y)
    lam = Z.map(lambda v: 200 * np.exp(1.5 * v))
    pp = simulate_poisson(lam, W, seed=1)
    marks = (np.random.default_rng(2).random(pp.n) < 0.3 + 0.4 * pp.x).astype(int)
    sio.write_ascii_grid(tmp_path / "z.asc", Z)
    sio.write_ascii_grid(tmp_path / "y.asc", Y)
    sio.write_ascii_grid(tmp_path / "lam.asc", lam)
    sio.write_points_csv(tmp_path / "pts.csv", PointPattern(pp.x, pp.y, W, marks=marks))
    pg = discretise(pp, g)
    sio.write_ascii_grid(tmp_path / "pres.asc", Raster(g, pg.status.astype(float)))
    (tmp_path / "w.json").write_text(json.dumps({"xmin": 0, "xmax": 1, "ymin": 0, "ymax": 1}))
    return tmp_path, pp, Z


def run(tmp, *args):
    return main([str(a) for a in args])


class TestRocCommands:
    def test_covariate_points(self, workspace, capsys):
        tmp, pp, Z = workspace
        code = run(tmp, "roc", "covariate", "--points", tmp / "pts.csv", "--raster", tmp / "z.asc",
                   "--window", tmp / "w.json", "--out", tmp / "o", "--name", "c")
        assert code == 0
        d = json.loads((tmp / "o" / "c.json").read_text())
        assert d["summary"]["auc"] == pytest.approx(auc(roc_covariate_pp(pp, Z)), abs=1e-11)
        assert (tmp / "o" / "c.csv").exists() and (tmp / "o" / "c.svg").exists()
        assert "AUC=" in capsys.readouterr().out

    def test_covariate_grid(self, workspace):
        tmp, _, _ = workspace
        assert run(tmp, "roc", "covariate", "--grid", tmp / "pres.asc", "--raster", tmp / "z.asc",
                   "--out", tmp / "o") == 0

    def test_model_poisson_writes_model(self, workspace):
        tmp, _, _ = workspace
        assert run(tmp, "roc", "model", "--points", tmp / "pts.csv", "--covariates", tmp / "z.asc",
                   "--out", tmp / "o", "--name", "m", "--loo") == 0
        md = json.loads((tmp / "o" / "m_model.json").read_text())
        assert md["type"] == "poisson" and "z" in md["coefficients"]

    def test_model_logistic(self, workspace):
        tmp, _, _ = workspace
        assert run(tmp, "roc", "model", "--fit", "logistic", "--grid", tmp / "pres.asc",
                   "--covariates", tmp / "z.asc", "--out", tmp / "o") == 0

    def test_casecontrol_smooth(self, workspace):
        tmp, _, _ = workspace
        assert run(tmp, "roc", "casecontrol", "--points", tmp / "pts.csv", "--raster", tmp / "z.asc",
                   "--smooth", "--out", tmp / "o", "--name", "s") == 0
        assert json.loads((tmp / "o" / "s.json").read_text())["provenance"] == "smoothed"

    def test_theoretical(self, workspace):
        tmp, _, _ = workspace
        assert run(tmp, "roc", "theoretical", "--score", tmp / "lam.asc", "--intensity", tmp / "lam.asc",
                   "--out", tmp / "o", "--name", "t") == 0
        assert json.loads((tmp / "o" / "t.json").read_text())["provenance"] == "theoretical"


class TestOtherCommands:
    @pytest.mark.parametrize("which", ["berman", "ks", "cvm", "ad", "wilcoxon"])
    def test_tests(self, workspace, which):
        tmp, _, _ = workspace
        assert run(tmp, "test", which, "--points", tmp / "pts.csv", "--raster", tmp / "z.asc",
                   "--out", tmp / "o", "--name", which) == 0
        report = json.loads((tmp / "o" / f"{which}.json").read_text())
        for v in report.values():
            if isinstance(v, dict):
                assert 0 <= v["p_value"] <= 1

    @pytest.mark.parametrize("method", ["kernel", "isotonic"])
    def test_rho(self, workspace, method):
        tmp, _, _ = workspace
        assert run(tmp, "rho", "--method", method, "--points", tmp / "pts.csv", "--raster", tmp / "z.asc",
                   "--out", tmp / "o", "--name", "r") == 0
        assert json.loads((tmp / "o" / "r.json").read_text())["method"] == method

    def test_partial_from_model_json(self, workspace):
        tmp, _, _ = workspace
        run(tmp, "roc", "model", "--points", tmp / "pts.csv", "--covariates", tmp / "z.asc",
            "--out", tmp / "o", "--name", "m")
        assert run(tmp, "partial", "add", "--model", tmp / "o" / "m_model.json", "--candidate", tmp / "y.asc",
                   "--out", tmp / "p", "--name", "pa") == 0
        panel = json.loads((tmp / "p" / "pa.json").read_text())
        assert panel[0]["covariate"] == "y" and (tmp / "p" / panel[0]["curve_ref"]).exists()

    def test_band_thread_independent(self, workspace, monkeypatch):
        tmp, _, _ = workspace
        args = ["band", "--method", "montecarlo", "--points", tmp / "pts.csv", "--covariates", tmp / "z.asc",
                "--nsim", 8, "--seed", 3]
        monkeypatch.setenv("SPROC_THREADS", "1")
        assert run(tmp, *args, "--out", tmp / "b1") == 0
        monkeypatch.setenv("SPROC_THREADS", "3")
        assert run(tmp, *args, "--out", tmp / "b3") == 0
        assert (tmp / "b1" / "band.json").read_text() == (tmp / "b3" / "band.json").read_text()

    def test_envelope_and_simulate(self, workspace):
        tmp, _, _ = workspace
        assert run(tmp, "band", "--method", "envelope", "--points", tmp / "pts.csv", "--raster", tmp / "z.asc",
                   "--intensity", tmp / "lam.asc", "--nsim", 5, "--seed", 1, "--out", tmp / "e") == 0
        assert run(tmp, "simulate", "--intensity", tmp / "lam.asc", "--seed", 4, "--out", tmp / "s",
                   "--name", "sim") == 0
        sim = sio.read_points_csv(tmp / "s" / "sim.csv", Window.unit_square())
        assert sim.n > 0


class TestErrors:
    def test_missing_file_exit_2(self, workspace, capsys):
        tmp, _, _ = workspace
        assert run(tmp, "roc", "covariate", "--points", tmp / "nope.csv", "--raster", tmp / "z.asc",
                   "--out", tmp / "o") == 2
        assert "input" in capsys.readouterr().err

    def test_singular_design_exit_3(self, workspace):
        tmp, _, _ = workspace
        (tmp / "z2.asc").write_text((tmp / "z.asc").read_text())
        assert run(tmp, "roc", "model", "--fit", "logistic", "--grid", tmp / "pres.asc",
                   "--covariates", tmp / "z.asc", tmp / "z2.asc", "--out", tmp / "bad") == 3

    def test_no_partial_output_on_failure(self, workspace):
        tmp, _, _ = workspace
        run(tmp, "roc", "covariate", "--points", tmp / "pts.csv", "--out", tmp / "f")
        assert not (tmp / "f").exists() or not any((tmp / "f").iterdir())


class TestConfigAndSvg:
    def test_config_validation(self, tmp_path):
        from sproc.config import AnalysisConfig
        with pytest.raises(FileNotFoundError):
            AnalysisConfig(points=tmp_path / "missing.csv")
        with pytest.raises(ValueError):
            AnalysisConfig(level=1.5)
        with pytest.raises(ValueError):
            AnalysisConfig(threads=0)
        assert AnalysisConfig(nsim=10).nsim == 10

    def test_svg_has_curve_and_band(self, rng):
        from sproc.inference import band_binomial
        from sproc.roc import roc_binary
        from sproc.svg import roc_svg
        c = roc_binary(rng.normal(size=20), np.arange(20) % 2)
        svg = roc_svg([c], band_binomial(c, 10), labels=["c"], title="t")
        assert svg.startswith("<svg") and "<polygon" in svg and svg.count("<polyline") == 2
