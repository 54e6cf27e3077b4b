import pytest

from echolock.config import parse_config, serialize_config
from echolock.errors import ConfigError
from echolock.scenarios import SCENARIO_IDS, scenario_config, scenario_text


def test_parse_fig2_preset_text():
    cfg = parse_config(scenario_text("fig2"))
    assert len(cfg.sequence.pulses) == 5
    assert cfg.rates.gamma31_khz == 0.0 and cfg.rates.Gamma31_khz == 0.0
    assert cfg.ensemble_spec.n_groups == 161
    assert cfg.sequence.require_role("D").t_center_us == 10.0
    assert cfg.sequence.require_role("R2").t_center_us == 90.0
    assert cfg.notices == []


def test_empty_config_gives_defaults_with_notice():
    cfg = parse_config("")
    assert cfg.sequence.pulses == ()
    assert cfg.ensemble_spec.n_groups == 161
    assert cfg.params.dt_pulse_ns == 1.0
    assert [v.message for v in cfg.notices] == ["no pulses"]


def test_comments_and_blank_lines_ignored():
    cfg = parse_config("# a comment\n\nn_groups = 41  # trailing comment\n")
    assert cfg.ensemble_spec.n_groups == 41


def test_negative_rate_rejected():
    with pytest.raises(ConfigError, match="negative rate"):
        parse_config("gamma31_khz = -1\n")


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("n_groups = 41\nnot_a_key = 1\n")


def test_unknown_pulse_key_rejected():
    text = "[pulse]\nchannel = P\nt_start_us = 0\nduration_us = 1\narea_pi = 1\nbogus = 2\n"
    with pytest.raises(ConfigError, match="bogus"):
        parse_config(text)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[laser]\n")


def test_missing_pulse_field_rejected():
    with pytest.raises(ConfigError, match="missing key"):
        parse_config("[pulse]\nchannel = P\nt_start_us = 0\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("n_groups = 41\nn_groups = 43\n")


def test_non_integer_group_count_rejected():
    with pytest.raises(ConfigError, match="integer"):
        parse_config("n_groups = 41.5\n")


def test_even_group_count_rejected():
    with pytest.raises(ConfigError, match="odd"):
        parse_config("n_groups = 40\n")


def test_threshold_bounds_checked():
    with pytest.raises(ConfigError, match="threshold_fraction"):
        parse_config("threshold_fraction = 1.5\n")


def test_step_ordering_enforced():
    with pytest.raises(ConfigError, match="dt_pulse_ns"):
        parse_config("dt_pulse_ns = 50\ndt_free_ns = 10\n")


def test_same_channel_overlap_is_parse_error():
    text = (
        "[pulse]\nchannel = P\nt_start_us = 0\nduration_us = 2\narea_pi = 1\n"
        "[pulse]\nchannel = P\nt_start_us = 1\nduration_us = 2\narea_pi = 1\n"
    )
    with pytest.raises(ConfigError, match="overlap"):
        parse_config(text)


@pytest.mark.parametrize("sid", SCENARIO_IDS)
def test_scenario_round_trip(sid):
    direct = scenario_config(sid)
    reparsed = parse_config(scenario_text(sid))
    assert reparsed.sequence == direct.sequence
    assert reparsed.rates == direct.rates
    assert reparsed.ensemble_spec == direct.ensemble_spec
    assert reparsed.params == direct.params
    assert reparsed.threshold_fraction == direct.threshold_fraction


def test_round_trip_preserves_awkward_floats():
    text = (
        "horizon_us = 33.333333333333336\nthreshold_fraction = 0.123456789012345\n"
        "[pulse]\nchannel = C\nrole = B1\nt_start_us = 1.0000000001\n"
        "duration_us = 0.1\narea_pi = 0.3333333333333333\nphase_rad = -2.5\n"
    )
    once = parse_config(text)
    twice = parse_config(serialize_config(once))
    assert once.sequence == twice.sequence
    assert once.threshold_fraction == twice.threshold_fraction
