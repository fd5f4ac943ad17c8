"""Unit tests for horoboundary.config."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from horoboundary.config import MIN_AUTO_RADIUS, RunConfig, load_run_config, read_config_file
from horoboundary.errors import InputFormatError
from horoboundary.pipeline import PipelineResult


@pytest.mark.unit
class TestRunConfigDefaults:
    def test_default_source_is_the_tiling(self):
        assert RunConfig().source == "tiling:4,5"

    def test_effective_radius_defaults_to_minimum(self):
        cfg = RunConfig(tree_depth=2, horizon=3)
        assert cfg.effective_radius == MIN_AUTO_RADIUS

    def test_effective_radius_grows_with_depth_and_horizon(self):
        cfg = RunConfig(tree_depth=6, horizon=5)
        assert cfg.effective_radius == 12

    def test_disabling_the_horizon_audit_drops_the_extra_sphere(self):
        cfg = RunConfig(tree_depth=6, horizon=5, horizon_audit=False)
        assert cfg.effective_radius == 11

    def test_radius_of_depth_plus_horizon_is_accepted(self):
        assert RunConfig(radius=8, tree_depth=4, horizon=4).effective_radius == 8

    def test_explicit_radius_wins(self):
        assert RunConfig(radius=12).effective_radius == 12

    def test_radius_below_depth_plus_horizon_is_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig(radius=5, tree_depth=4, horizon=4)

    def test_negative_delta_is_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig(delta=-1)

    def test_env_prefix_is_honoured(self, monkeypatch):
        monkeypatch.setenv("HOROBOUNDARY_STATE_BOUND", "42")
        assert RunConfig().state_bound == 42


@pytest.mark.unit
class TestReadConfigFile:
    def test_parses_keys_and_skips_comments(self, tmp_path: Path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nsource = free:2\n\ntree-depth = 5\n", encoding="utf-8")
        assert read_config_file(path) == {"source": "free:2", "tree_depth": "5"}

    def test_unknown_key_raises(self, tmp_path: Path):
        path = tmp_path / "run.cfg"
        path.write_text("colour = blue\n", encoding="utf-8")
        with pytest.raises(InputFormatError, match="unknown config key"):
            read_config_file(path)

    def test_line_without_equals_raises(self, tmp_path: Path):
        path = tmp_path / "run.cfg"
        path.write_text("source free:2\n", encoding="utf-8")
        with pytest.raises(InputFormatError, match="key = value"):
            read_config_file(path)


@pytest.mark.unit
class TestLoadRunConfig:
    def test_overrides_beat_file_values(self, tmp_path: Path):
        path = tmp_path / "run.cfg"
        path.write_text("source = free:2\ntree_depth = 5\n", encoding="utf-8")
        cfg = load_run_config(path, {"tree_depth": 3})
        assert cfg.source == "free:2"
        assert cfg.tree_depth == 3

    def test_none_overrides_are_ignored(self):
        cfg = load_run_config(None, {"horizon": None, "source": "line"})
        assert cfg.horizon == 4
        assert cfg.source == "line"

    def test_file_values_are_coerced(self, tmp_path: Path):
        path = tmp_path / "run.cfg"
        path.write_text("output_dir = out\nstate_bound = 9\n", encoding="utf-8")
        cfg = load_run_config(path)
        assert cfg.output_dir == Path("out")
        assert cfg.state_bound == 9


@pytest.mark.unit
class TestCommandLineFlags:
    def test_every_field_has_a_flag(self):
        import main
        assert set(main._CONFIG_FLAGS) == set(RunConfig.model_fields)

    def test_sampling_and_radius_flags_reach_the_config(self, mocker):
        run = mocker.patch("main.run_pipeline", return_value=PipelineResult("ball", "", [], []))
        import main
        main.run([
            "verify", "--delta-radius", "3", "--faithfulness-radius", "4",
            "--seed", "7", "--no-horizon-audit",
        ])
        cfg = run.call_args.args[1]
        assert (cfg.delta_radius, cfg.faithfulness_radius, cfg.seed) == (3, 4, 7)
        assert cfg.horizon_audit is False

    def test_horizon_audit_defaults_on(self, mocker):
        run = mocker.patch("main.run_pipeline", return_value=PipelineResult("ball", "", [], []))
        import main
        main.run(["ball"])
        assert run.call_args.args[1].horizon_audit is True
