import json
from xml.etree import ElementTree as ET

import pytest

from valtrack import cli
from valtrack.config import parse_config, serialize
from valtrack.errors import ConfigError
from valtrack.experiments import ExperimentConfig, ternary_sweep
from valtrack.metrics import CrashPredicate
from valtrack.params import MarketParams
from valtrack.svg import render_series_svg, render_ternary_svg
from valtrack.traders import PopulationSpec


class TestConfigParsing:
    def test_empty_text_gives_defaults(self):
        cfg = parse_config(text="")
        assert cfg.market.lam == 0.04
        assert cfg.market.eta == 0.1
        assert cfg.market.mu == 0.002
        assert cfg.market.rho == 4.0
        assert cfg.commitments.kv_buy == 0.1
        assert cfg.market.horizon == 250

    def test_file_values_and_comments(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("# comment\nmarket.lambda = 0.05\n"
                        "population.mo_frac = 0.3  # inline\n\n")
        cfg = parse_config(path=str(path))
        assert cfg.market.lam == 0.05
        assert cfg.population.mo_frac == 0.3
        assert sum(cfg.population.val_fracs) == pytest.approx(0.7)

    def test_flag_overrides_beat_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("market.lambda = 0.04\n")
        cfg = parse_config(path=str(path), overrides={"market.lambda": "0.05"})
        assert cfg.market.lam == 0.05

    def test_unknown_key_is_line_precise(self):
        with pytest.raises(ConfigError, match=r"<config>:2.*market\.lambada"):
            parse_config(text="market.lambda = 0.04\nmarket.lambada = 1\n")

    def test_out_of_range_value_rejected(self):
        with pytest.raises(ConfigError, match="mu"):
            parse_config(text="market.mu = 1.5\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError, match=":1"):
            parse_config(text="market.lambda 0.04\n")

    @pytest.mark.parametrize("n_vals", [1, 10])
    def test_round_trip(self, n_vals):
        cfg = parse_config(text=(
            "market.lambda = 0.05\nmarket.settlement = current\n"
            f"population.n_vals = {n_vals}\npopulation.mo_frac = 0.2\n"
            "population.rand_frac = 0.3\npopulation.valuation = gamma\n"
            "crash.kind = drop_below\ncrash.value = 0.01\nrun.seed = 77\n"))
        assert parse_config(text=serialize(cfg)) == cfg


class TestCliCommands:
    def test_analyze_prints_analytic_threshold(self, capsys):
        assert cli.main(["analyze"]) == 0
        out = capsys.readouterr().out
        assert "0.21648" in out

    def test_analyze_csv_schema(self, tmp_path):
        assert cli.main(["analyze", "--csv", "--kv-buy", "0.1",
                         "--km-sell", "0.12", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "analysis.csv").read_text().strip().splitlines()
        assert lines[0] == "kv_buy,km_sell,alpha_minus,exists,theta"
        assert lines[1].startswith("0.1,0.12,")

    def test_run_writes_csv_sidecar_and_svg(self, tmp_path, capsys):
        code = cli.main(["run", "--mo", "0.3", "--horizon", "20",
                         "--out", str(tmp_path), "--svg", "series.svg"])
        assert code == 0
        csv_path = tmp_path / "run.csv"
        meta_path = tmp_path / "run.csv.meta.json"
        assert csv_path.exists() and meta_path.exists()
        meta = json.loads(meta_path.read_text())
        assert meta["config"]["population.mo_frac"] == 0.3
        assert meta["rng"]["algorithm"] == "PCG64"
        assert "code_version" in meta
        svg_doc = (tmp_path / "series.svg").read_text()
        ET.fromstring(svg_doc)  # well-formed XML

    def test_run_output_is_reproducible_bytes(self, tmp_path):
        args = ["run", "--mo", "0.25", "--rand", "0.25", "--horizon", "30",
                "--seed", "5"]
        cli.main(args + ["--out", str(tmp_path / "a")])
        cli.main(args + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "run.csv").read_bytes() \
            == (tmp_path / "b" / "run.csv").read_bytes()

    def test_config_error_exit_code(self, tmp_path, capsys):
        assert cli.main(["run", "--mu", "1.5", "--out", str(tmp_path)]) == 2

    def test_unknown_set_key_exit_code(self, tmp_path):
        assert cli.main(["run", "--set", "market.nope=1",
                         "--out", str(tmp_path)]) == 2

    def test_estimate_reports_predicted_std(self, tmp_path, capsys):
        code = cli.main(["estimate", "--n", "100", "--reps", "2000",
                         "--p", "1.3", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "0.05101" in out
        report = json.loads((tmp_path / "estimator.json").read_text())
        assert report["n"] == 100

    def test_sweep_writes_points_and_sidecar(self, tmp_path, capsys):
        code = cli.main(["sweep", "--resolution", "2", "--sweep-replicates",
                         "2", "--m0", "0", "--out", str(tmp_path),
                         "--svg", "tern.svg"])
        assert code == 0
        lines = (tmp_path / "ternary.csv").read_text().strip().splitlines()
        assert len(lines) == 7  # header + 6 simplex points
        ET.fromstring((tmp_path / "tern.svg").read_text())

    def test_grid_command(self, tmp_path):
        code = cli.main(["grid", "--cells", "2", "--k-plus-min", "0.1",
                         "--k-plus-max", "0.2", "--k-minus-min", "0.1",
                         "--k-minus-max", "0.2", "--settlement", "current",
                         "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "grid.csv").read_text().strip().splitlines()
        assert len(lines) == 5

    def test_env_var_default_outdir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path))
        assert cli.main(["run", "--mo", "0.1", "--horizon", "5"]) == 0
        assert (tmp_path / "run.csv").exists()


class TestSvg:
    def test_single_point_series_renders_a_marker(self):
        doc = render_series_svg([1.0], valuation=1.0)
        root = ET.fromstring(doc)
        assert root.tag.endswith("svg")
        assert len(root.findall(".//{http://www.w3.org/2000/svg}circle")) == 1

    def test_full_run_renders_polyline_with_all_vertices(self):
        prices = [1.0 + 0.001 * i for i in range(251)]
        doc = render_series_svg(prices, valuation=1.0)
        root = ET.fromstring(doc)
        polyline = root.find(".//{http://www.w3.org/2000/svg}polyline")
        assert polyline is not None
        assert len(polyline.get("points").split()) == 251

    def test_ternary_resolution_one_has_three_cells(self):
        cfg = ExperimentConfig(market=MarketParams(horizon=5),
                               population=PopulationSpec(),
                               crash=CrashPredicate.relative_drop(0.3),
                               m0=0.0, seed=0)
        grid = ternary_sweep(cfg, resolution=1, replicates=1)
        doc = render_ternary_svg(grid)
        root = ET.fromstring(doc)
        circles = root.findall(".//{http://www.w3.org/2000/svg}circle")
        assert len(circles) == 3
