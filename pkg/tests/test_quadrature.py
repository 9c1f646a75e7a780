"""Tests for the triangle and edge quadrature rules."""

from math import factorial

import numpy as np
import pytest

from convexlab.core.quadrature import EDGE_NODES, EDGE_WEIGHTS, EDGE_MIDPOINT_RULE, SIX_POINT_RULE, rule_for_degree

REFERENCE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _monomial_integral(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("rule", [EDGE_MIDPOINT_RULE, SIX_POINT_RULE])
def test_rules_are_exact_up_to_their_degree(rule):
    assert rule.weights.sum() == pytest.approx(1.0)
    pts = rule.points(REFERENCE)
    for a in range(rule.degree + 1):
        for b in range(rule.degree + 1 - a):
            value = rule.integrate(pts[:, 0] ** a * pts[:, 1] ** b, 0.5)
            assert value == pytest.approx(_monomial_integral(a, b), rel=1e-12)


def test_rule_for_degree():
    assert rule_for_degree(1) is EDGE_MIDPOINT_RULE
    assert rule_for_degree(4) is SIX_POINT_RULE
    with pytest.raises(ValueError):
        rule_for_degree(5)


def test_edge_rule_is_exact_for_quintics():
    assert float(EDGE_WEIGHTS @ EDGE_NODES ** 5) == pytest.approx(1.0 / 6.0)
    assert EDGE_WEIGHTS.sum() == pytest.approx(1.0)
