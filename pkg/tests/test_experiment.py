"""Tests for config loading, scenario execution, report emission and the CLI."""

import math

import pytest
import yaml
from click.testing import CliRunner

from wxleak.cli import main
from wxleak.errors import ConfigError
from wxleak.experiment import (
    CSV_HEADER,
    DEFAULT_LEAKAGE_SWEEP_DBW,
    LevelMetrics,
    ScenarioReport,
    config_from_dict,
    emit_csv,
    emit_summary,
    leakage_chain,
    load_config,
    noise_table,
    parse_report_csv,
    run_scenario,
)
from wxleak.leakage import AntennaModel, LinkBudget

SMALL_RUN = {
    "leakage_levels": [-30.0, -20.0],
    "model": {"grid_size": 12},
    "observations": {"count": 6},
    "spinup_steps": 100,
    "forecast_length": 0.5,
}


def small_config(**overrides):
    raw = dict(SMALL_RUN)
    raw.update(overrides)
    return config_from_dict(raw)


class TestConfigLoading:
    def test_minimal_config_fills_documented_defaults(self):
        config = config_from_dict({})
        assert config.leakage_levels == DEFAULT_LEAKAGE_SWEEP_DBW
        assert config.link.total_pathloss_db == 130.0
        assert config.antenna.radiation_efficiency == 0.95
        assert config.model_params.forcing == 8.0
        assert config.grid_size == 40
        assert config.obs_locations == tuple(range(0, 40, 2))
        assert config.ensemble_size == 1
        assert "link.total_pathloss_db" in config.defaulted_fields
        assert "seeds.nature" in config.defaulted_fields

    def test_unsorted_levels_rejected_naming_field(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"leakage_levels": [-20.0, -30.0]})
        assert "leakage_levels" in str(excinfo.value)

    def test_empty_levels_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"leakage_levels": []})

    def test_zero_ensemble_rejected(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"ensemble_size": 0})
        assert "ensemble_size" in str(excinfo.value)

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"leekage_levels": [-20.0]})

    def test_unknown_section_key_rejected(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"link": {"pathloss": 130.0}})
        assert "link" in str(excinfo.value)

    def test_non_integer_seed_rejected(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"seeds": {"nature": 1.5}})
        assert "seeds.nature" in str(excinfo.value)

    def test_invalid_section_value_names_section(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"antenna": {"radiation_efficiency": 1.5}})
        assert "antenna" in str(excinfo.value)

    def test_density_class_presets_fill_count(self):
        config = config_from_dict({"field": {"density_class": "metropolitan"}})
        assert config.field.count == 250
        config = config_from_dict({"field": {"density_class": "rural"}})
        assert config.field.count == 10

    def test_explicit_locations_override_count(self):
        config = config_from_dict(
            {"model": {"grid_size": 12}, "observations": {"locations": [0, 5, 9]}}
        )
        assert config.obs_locations == (0, 5, 9)

    def test_duplicate_locations_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict(
                {"model": {"grid_size": 12}, "observations": {"locations": [0, 0]}}
            )

    def test_hash_stable_and_sensitive(self):
        a = config_from_dict(dict(SMALL_RUN))
        b = config_from_dict(dict(SMALL_RUN))
        assert a.config_hash == b.config_hash
        assert len(a.config_hash) == 64
        changed = dict(SMALL_RUN)
        changed["forecast_length"] = 0.75
        assert config_from_dict(changed).config_hash != a.config_hash

    def test_seed_override(self):
        config = config_from_dict(dict(SMALL_RUN), seed_override=900)
        assert config.seeds.nature == 900
        assert config.seeds.obs_noise == 901
        assert config.seeds.init == 902
        assert config.config_hash != config_from_dict(dict(SMALL_RUN)).config_hash

    def test_load_config_from_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump(SMALL_RUN))
        config = load_config(str(path))
        assert config.leakage_levels == (-30.0, -20.0)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/run.yaml")

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("leakage_levels: [-20\nmodel:\n")
        with pytest.raises(ConfigError) as excinfo:
            load_config(str(path))
        assert excinfo.value.line is not None


class TestLeakageChain:
    def test_aggregate_interpretation_reproduces_reference(self):
        config = config_from_dict({})
        noise_k, delta_tb = leakage_chain(config, -20.0)
        assert abs(noise_k - 0.26826) / 0.26826 < 1e-5
        assert abs(delta_tb - 0.26826 / 0.95) / (0.26826 / 0.95) < 1e-5

    def test_per_device_applies_mask_and_field(self):
        """Per-device route equals aggregate route shifted by count and fraction."""
        from wxleak.leakage import (
            AGGRESSOR_CHANNEL,
            VICTIM_CHANNEL,
            aci_leakage_fraction,
        )

        config = config_from_dict(
            {"leakage_interpretation": "per_device", "field": {"count": 10}}
        )
        fraction = aci_leakage_fraction(config.mask, AGGRESSOR_CHANNEL, VICTIM_CHANNEL)
        noise_per_device, _ = leakage_chain(config, -20.0)
        aggregate_config = config_from_dict({})
        equivalent = -20.0 + 10.0 * math.log10(10 * fraction)
        noise_aggregate, _ = leakage_chain(aggregate_config, equivalent)
        assert abs(noise_per_device - noise_aggregate) / noise_aggregate < 1e-9


class TestRunScenario:
    def test_baseline_row_is_exactly_zero(self):
        report = run_scenario(small_config())
        b = report.baseline
        assert (
            b.precip_diff_max_mm == 0.0
            and b.precip_diff_rms_mm == 0.0
            and b.t2m_diff_max_c == 0.0
            and b.t2m_diff_rms_c == 0.0
        )
        assert b.delta_tb_k == 0.0 and b.noise_k == 0.0

    def test_negligible_leakage_diffs_exactly_zero(self):
        """-300 dBW shifts observations below float resolution: no impact at all."""
        report = run_scenario(small_config(leakage_levels=[-300.0]))
        row = report.levels[0]
        assert row.precip_diff_max_mm == 0.0
        assert row.precip_diff_rms_mm == 0.0
        assert row.t2m_diff_max_c == 0.0
        assert row.t2m_diff_rms_c == 0.0

    def test_default_chain_delta_tb(self):
        report = run_scenario(small_config(leakage_levels=[-20.0]))
        expected = 0.26826 / 0.95
        assert abs(report.levels[0].delta_tb_k - expected) / expected < 1e-5

    def test_rows_in_config_order_and_delta_increasing(self):
        report = run_scenario(small_config())
        assert [row.leakage_dbw for row in report.levels] == [-30.0, -20.0]
        deltas = [row.delta_tb_k for row in report.levels]
        assert deltas[0] < deltas[1]

    def test_nonzero_leakage_produces_divergence(self):
        report = run_scenario(small_config(leakage_levels=[-15.0]))
        assert report.levels[0].t2m_diff_rms_c > 0.0

    def test_rerun_byte_identical_csv(self, tmp_path):
        config = small_config()
        a_path = tmp_path / "a.csv"
        b_path = tmp_path / "b.csv"
        emit_csv(run_scenario(config), str(a_path))
        emit_csv(run_scenario(config), str(b_path))
        assert a_path.read_bytes() == b_path.read_bytes()

    def test_rerun_identical_at_full_precision(self):
        """Identical seeds reproduce every metric bit for bit, not just to print precision."""
        config = small_config()
        assert run_scenario(config).rows == run_scenario(config).rows

    def test_delta_tb_strictly_increasing_over_default_sweep(self):
        config = config_from_dict({})
        deltas = [leakage_chain(config, level)[1] for level in config.leakage_levels]
        assert all(b > a for a, b in zip(deltas, deltas[1:]))

    def test_ensemble_metrics_average_members(self):
        one = run_scenario(small_config(ensemble_size=1))
        many = run_scenario(small_config(ensemble_size=3))
        assert many.ensemble_size == 3
        assert many.levels[0].t2m_diff_rms_c > 0.0
        assert one.levels[0].t2m_diff_rms_c != many.levels[0].t2m_diff_rms_c


def make_report(n_levels):
    baseline = LevelMetrics("baseline", None, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.25, True)
    levels = tuple(
        LevelMetrics(
            f"{-30 + i}",
            float(-30 + i),
            0.1 * (i + 1),
            0.11 * (i + 1),
            1e-3 * (i + 1),
            1e-4 * (i + 1),
            2e-3 * (i + 1),
            2.5e-4 * (i + 1),
            3.25 + 0.01 * i,
            True,
        )
        for i in range(n_levels)
    )
    return ScenarioReport(
        baseline=baseline,
        levels=levels,
        config_hash="ab" * 32,
        defaulted_fields=("seeds.nature",),
        ensemble_size=2,
        forecast_length=1.0,
    )


class TestEmission:
    def test_header_exact(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_csv(make_report(2), str(path))
        lines = path.read_text().splitlines()
        data_lines = [l for l in lines if not l.startswith("#")]
        assert data_lines[0] == CSV_HEADER

    def test_baseline_only_report(self, tmp_path):
        """No sweep levels: header plus the single baseline row."""
        path = tmp_path / "r.csv"
        emit_csv(make_report(0), str(path))
        data_lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert len(data_lines) == 2
        assert data_lines[1].startswith("baseline,")

    def test_six_level_sweep_has_seven_rows(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_csv(make_report(6), str(path))
        data_lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert len(data_lines) == 1 + 7

    def test_round_trip_within_formatting_precision(self, tmp_path):
        """Parsed-back values match the report to nine significant digits."""
        report = run_scenario(small_config())
        path = tmp_path / "r.csv"
        emit_csv(report, str(path))
        rows = parse_report_csv(str(path))
        assert len(rows) == 3
        for row, source in zip(rows[1:], report.levels):
            for key, value in (
                ("noise_K", source.noise_k),
                ("delta_tb_K", source.delta_tb_k),
                ("precip_diff_rms_mm", source.precip_diff_rms_mm),
                ("t2m_diff_rms_C", source.t2m_diff_rms_c),
                ("analysis_cost", source.analysis_cost),
            ):
                assert abs(row[key] - value) <= 1e-8 * max(1.0, abs(value))

    def test_summary_contains_rows_and_hash(self, tmp_path):
        import io

        report = make_report(2)
        stream = io.StringIO()
        emit_summary(report, stream)
        text = stream.getvalue()
        assert report.config_hash in text
        assert "baseline" in text
        assert "seeds.nature" in text


class TestNoiseTable:
    def test_reference_values(self):
        rows = noise_table([-20.0, -15.0], LinkBudget(), AntennaModel())
        assert abs(rows[0]["noise_K"] - 0.26826) / 0.26826 < 1e-5
        assert abs(rows[1]["noise_K"] - 0.84831) / 0.84831 < 1e-5

    def test_received_power_column(self):
        rows = noise_table([-20.0], LinkBudget(), AntennaModel())
        assert math.isclose(rows[0]["received_power_W"], 1e-15, rel_tol=1e-12)


class TestCli:
    def write_config(self, tmp_path, raw=None):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump(raw or SMALL_RUN))
        return str(path)

    def test_run_writes_csv(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "out.csv"
        result = runner.invoke(main, ["run", self.write_config(tmp_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        rows = parse_report_csv(str(out))
        assert rows[0]["leakage_dBW"] == "baseline"
        assert len(rows) == 3

    def test_run_validation_error_exit_1(self, tmp_path):
        raw = dict(SMALL_RUN)
        raw["ensemble_size"] = 0
        runner = CliRunner()
        result = runner.invoke(main, ["run", self.write_config(tmp_path, raw)])
        assert result.exit_code == 1

    def test_run_missing_config_exit_1(self):
        runner = CliRunner()
        result = runner.invoke(main, ["run", "/nonexistent/x.yaml"])
        assert result.exit_code == 1

    def test_run_unwritable_out_exit_2(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["run", self.write_config(tmp_path), "--out", "/nonexistent-dir/out.csv"],
        )
        assert result.exit_code == 2

    def test_seed_override_changes_output(self, tmp_path):
        runner = CliRunner()
        config = self.write_config(tmp_path)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert runner.invoke(main, ["run", config, "--out", str(a)]).exit_code == 0
        assert (
            runner.invoke(
                main, ["run", config, "--out", str(b), "--seed-override", "777"]
            ).exit_code
            == 0
        )
        assert a.read_bytes() != b.read_bytes()

    def test_sweep_forces_default_levels(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "sweep.csv"
        raw = dict(SMALL_RUN)
        raw["ensemble_size"] = 1
        raw["forecast_length"] = 0.2
        result = runner.invoke(
            main, ["sweep", self.write_config(tmp_path, raw), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        rows = parse_report_csv(str(out))
        assert len(rows) == 1 + len(DEFAULT_LEAKAGE_SWEEP_DBW)

    def test_noise_table_command(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "noise.csv"
        result = runner.invoke(main, ["noise-table", "--out", str(out)])
        assert result.exit_code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "leakage_dBW,received_power_W,noise_K,delta_tb_K"
        assert len(lines) == 1 + 41

    def test_noise_table_bad_range_exit_1(self):
        runner = CliRunner()
        result = runner.invoke(main, ["noise-table", "--min", "-10", "--max", "-20"])
        assert result.exit_code == 1

    def test_check_passes(self):
        runner = CliRunner()
        result = runner.invoke(main, ["check"])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output
        assert "FAIL" not in result.output

    def test_verbose_prints_defaults(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, ["run", self.write_config(tmp_path), "--verbose"])
        assert result.exit_code == 0
        assert "defaults applied" in result.output
