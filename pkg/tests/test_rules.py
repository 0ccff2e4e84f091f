import numpy as np
import pytest

from beastal.rules import Rule, RuleParams, apply_rule, initial_resistances

R = np.array([1.0, 2.0])
DP = np.array([0.1, -0.2])


@pytest.mark.parametrize("rule,expected", [
    ("linear", [1.1, 1.8]),
    ("cubic", [1.001, 2.0 - 0.008]),
    ("flow", [1.1, 1.9]),
    ("power", [1.01, 2.02]),
    ("instantaneous", [0.1, 1e-6]),
])
def test_rule_values(rule, expected):
    out, _ = apply_rule(R, DP, rule)
    np.testing.assert_allclose(out, expected)


def test_gamma_scales_increment():
    out, _ = apply_rule(R, DP, Rule.LINEAR, RuleParams(gamma=2.0))
    np.testing.assert_allclose(out, [1.2, 1.6])


def test_clamp_counted():
    out, n = apply_rule(np.array([0.1, 1.0]), np.array([-1.0, 0.0]), "linear", RuleParams(r_min=0.05))
    assert n == 1
    np.testing.assert_array_equal(out, [0.05, 1.0])


def test_zero_drop_is_fixed_point_for_additive_rules():
    for rule in Rule:
        if rule.additive:
            out, n = apply_rule(R, np.zeros(2), rule)
            np.testing.assert_array_equal(out, R)
            assert n == 0


def test_rejects_nonfinite_and_bad_params():
    with pytest.raises(FloatingPointError):
        apply_rule(R, np.array([np.nan, 0.0]), "linear")
    with pytest.raises(ValueError):
        apply_rule(R, np.zeros(3), "linear")
    with pytest.raises(ValueError):
        RuleParams(r_min=0.0)
    with pytest.raises(ValueError, match="unknown rule"):
        Rule.parse("quadratic")


def test_initial_resistances():
    np.testing.assert_array_equal(initial_resistances(3), np.ones(3))
    a = initial_resistances(5, "uniform", np.random.default_rng(0))
    b = initial_resistances(5, "uniform", np.random.default_rng(0))
    np.testing.assert_array_equal(a, b)
    assert np.all((a >= 0.5) & (a <= 1.5))
    with pytest.raises(ValueError):
        initial_resistances(3, "uniform")
