"""Tests for configuration loading and validation."""

import json

import pytest

from crutchgait.shared.config import (
    ExperimentConfig,
    MassFractions,
    SubjectMeasurements,
    config_from_text,
    load_config,
    validate_measurements,
    with_overrides,
)
from crutchgait.shared.errors import ConfigError, InvalidMeasurementsError


class TestSubjectMeasurements:
    """Test suite for subject measurement validation."""

    def test_defaults_are_reference_subject(self):
        """Test the defaults describe the 62.2 kg reference subject."""
        m = SubjectMeasurements()
        assert m.mass == 62.2
        assert m.hip_height == 0.91
        assert m.knee_height == 0.485
        assert m.ankle_height == 0.08

    def test_rejects_unordered_heights(self):
        """Test a knee above the hip is rejected at construction."""
        with pytest.raises(ValueError, match="knee_height"):
            SubjectMeasurements(knee_height=0.95)

    def test_validate_measurements_raises_domain_error(self):
        """Test the standalone validator raises InvalidMeasurementsError."""
        bad = SubjectMeasurements.model_construct(**{**SubjectMeasurements().model_dump(), "mass": 0.0})
        with pytest.raises(InvalidMeasurementsError, match="mass"):
            validate_measurements(bad)

    def test_rejects_arm_span_below_shoulder_width(self):
        """Test arms must be longer than the shoulders are wide."""
        with pytest.raises(ValueError, match="arm_span"):
            SubjectMeasurements(arm_span=0.3)


class TestMassFractions:
    """Test suite for segment mass fractions."""

    def test_normalized_fractions_sum_to_one(self):
        """Test both sides plus the trunk sum to one after normalization."""
        fractions = MassFractions().normalized()
        paired = sum(fractions[k] for k in ("foot", "shank", "thigh", "upper_arm", "forearm"))
        assert 2.0 * paired + fractions["trunk"] == pytest.approx(1.0, abs=1e-12)

    def test_all_zero_fractions_rejected(self):
        """Test an all-zero distribution cannot be normalized."""
        zero = MassFractions(foot=0, shank=0, thigh=0, trunk=0, upper_arm=0, forearm=0)
        with pytest.raises(ConfigError):
            zero.normalized()


class TestExperimentConfig:
    """Test suite for the experiment configuration document."""

    def test_empty_document_gives_defaults(self):
        """Test omitted sections take their defaults."""
        config = config_from_text("{}")
        assert config == ExperimentConfig()
        assert config.ppo.clip_epsilon == 0.2
        assert config.ppo.epochs == 10
        assert config.ppo.minibatch_size == 64
        assert config.reward.c_walk == 5.0e5
        assert config.experiment.agents == [4.0e4, 3.0e4, 2.0e4, 1.0e4]
        assert config.experiment.eval_weight == 4.0e4

    def test_unknown_key_is_error(self):
        """Test a typo in a weight name is rejected."""
        with pytest.raises(ConfigError, match="invalid"):
            config_from_text(json.dumps({"reward": {"w_crutch_reaction_forces": 1.0}}))

    def test_invalid_json_is_error(self):
        """Test malformed JSON raises ConfigError."""
        with pytest.raises(ConfigError, match="not valid JSON"):
            config_from_text("{not json")

    def test_empty_agent_list_is_error(self):
        """Test a sweep needs at least one agent weight."""
        with pytest.raises(ConfigError):
            config_from_text(json.dumps({"experiment": {"agents": []}}))

    def test_height_band_must_be_ordered(self):
        """Test p_z_min must lie below p_z_max."""
        with pytest.raises(ConfigError):
            config_from_text(json.dumps({"reward": {"p_z_min": 3.0, "p_z_max": 0.65}}))

    def test_load_config_missing_file(self, tmp_path):
        """Test a missing file reports 'config not found'."""
        with pytest.raises(ConfigError, match="config not found"):
            load_config(tmp_path / "absent.json")

    def test_load_config_rejects_non_utf8(self, tmp_path):
        """Test undecodable bytes are a config error, not a decoding crash."""
        path = tmp_path / "latin1.json"
        path.write_bytes(b'{"experiment": {"environment": "point_mass\xe9"}}')
        with pytest.raises(ConfigError, match="not UTF-8"):
            load_config(path)

    def test_load_config_reads_file(self, tmp_path):
        """Test a config file on disk is parsed."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"experiment": {"environment": "point_mass", "iterations": 7}}))
        config = load_config(path)
        assert config.experiment.environment == "point_mass"
        assert config.experiment.iterations == 7

    def test_with_overrides_ignores_none(self):
        """Test None overrides leave the value untouched."""
        config = ExperimentConfig()
        assert with_overrides(config, experiment={"iterations": None}) == config

    def test_with_overrides_revalidates(self):
        """Test overrides are validated like file values."""
        config = with_overrides(ExperimentConfig(), experiment={"iterations": 10})
        assert config.experiment.iterations == 10
        with pytest.raises(ConfigError):
            with_overrides(config, experiment={"iterations": 0})
        with pytest.raises(ConfigError, match="unknown config section"):
            with_overrides(config, training={"iterations": 3})

    def test_round_trip_through_json(self):
        """Test a dumped config re-parses to an identical config."""
        config = with_overrides(ExperimentConfig(), reward={"w_crutch_reaction_force": 2.0e4})
        assert config_from_text(config.model_dump_json()) == config
