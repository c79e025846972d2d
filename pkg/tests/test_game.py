import dataclasses

import numpy as np
import pytest

from mpse.game import (ParseError, SpecValidationError, dump_spec, example_security_game,
                       load_spec, parse_spec, save_spec, validate_spec)
from mpse.cli import builtin_spec_path


def test_security_spec_is_valid(security):
    assert validate_spec(security) == []


def test_security_reward_entries(security):
    # (x_f, a_l, a_f) -> (leader, follower)
    assert security.r_l[0, 0, 0, 0] == 2 and security.r_f[0, 0, 0, 0] == 1
    assert security.r_l[0, 1, 1, 0] == 0 and security.r_f[0, 1, 1, 0] == 1
    assert security.r_l[0, 1, 1, 1] == 1 and security.r_f[0, 1, 1, 1] == 1


def test_security_follower_type_is_static(security):
    assert np.all(security.q_f[0, :, :, 0] == 1.0)
    assert np.all(security.q_f[1, :, :, 1] == 1.0)


def test_kernel_row_violation_names_row(security):
    q_f = security.q_f.copy()
    q_f[0, 1, 0] = [0.9, 0.0]
    errs = validate_spec(dataclasses.replace(security, q_f=q_f))
    assert len(errs) == 1
    assert "q_f[0, 1, 0]" in errs[0]


def test_infinite_horizon_needs_discount_below_one(security):
    errs = validate_spec(dataclasses.replace(security, delta=1.0))
    assert "discount must be < 1 for infinite horizon" in errs


def test_one_is_fine_for_finite_horizon(security):
    assert validate_spec(dataclasses.replace(security, delta=1.0, horizon=3)) == []


def test_bad_prior_and_discount(security):
    errs = validate_spec(dataclasses.replace(security, prior_f=np.array([0.7, 0.7]), delta=0.0))
    assert any("prior_f" in e for e in errs)
    assert any("delta" in e for e in errs)


def test_roundtrip_file(tmp_path, security):
    path = tmp_path / "g.yaml"
    save_spec(security, path)
    assert load_spec(path) == security


def test_bundled_spec_matches_builder():
    assert load_spec(builtin_spec_path("security")) == example_security_game()


def test_per_step_rewards_roundtrip(security):
    spec = security.with_horizon(2)
    spec = dataclasses.replace(spec, r_l_steps=(spec.r_l, 2 * spec.r_l))
    back = parse_spec(dump_spec(spec))
    assert back == spec
    assert np.array_equal(back.rewards(2)[0], 2 * spec.r_l)
    assert np.array_equal(back.rewards(2)[1], spec.r_f)


def test_missing_kernel_entry_is_parse_error(security):
    text = dump_spec(security).replace("- [1.0, 0.0]", "- [1.0]", 1)
    with pytest.raises(ParseError) as info:
        parse_spec(text)
    assert info.value.field == "kernels.follower[0][0][0]"


def test_missing_section_is_parse_error(security):
    text = dump_spec(security).replace("discount:", "discounting:")
    with pytest.raises(ParseError) as info:
        parse_spec(text)
    assert info.value.field == "discount"


def test_negative_probability_is_validation_error(security):
    text = dump_spec(security).replace("- [1.0, 0.0]", "- [1.5, -0.5]", 1)
    with pytest.raises(SpecValidationError) as info:
        parse_spec(text)
    assert any("negative" in v for v in info.value.violations)


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ParseError) as info:
        parse_spec("states: [a\nactions: {")
    assert info.value.line is not None


def test_bad_horizon_token(security):
    with pytest.raises(ParseError):
        parse_spec(dump_spec(security).replace("horizon: infinite", "horizon: forever"))


def test_swapped_payoffs_exchanges_tensors(security):
    s = security.swapped_payoffs()
    assert np.array_equal(s.r_l, security.r_f) and np.array_equal(s.r_f, security.r_l)


def test_max_abs_reward(security):
    assert security.max_abs_reward() == (4.0, 2.0)
