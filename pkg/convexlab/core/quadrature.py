#!/usr/bin/env python3

"""
Triangle quadrature rules in barycentric form.

Part of the ConvexLab project.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriangleRule:
    """Barycentric points (k x 3) and weights summing to one."""
    name: str
    degree: int
    barycentric: np.ndarray
    weights: np.ndarray

    def points(self, corners: np.ndarray) -> np.ndarray:
        """Map the rule onto a triangle given as a 3 x 2 corner array."""
        return self.barycentric @ corners

    def integrate(self, values: np.ndarray, area: float) -> float:
        return float(area * np.dot(self.weights, values))


# Exact for degree 2
EDGE_MIDPOINT_RULE = TriangleRule(
    name="edge-midpoint",
    degree=2,
    barycentric=np.array([
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]),
    weights=np.full(3, 1.0 / 3.0),
)

_A = 0.44594849091596488632
_WA = 0.22338158967801146570
_B = 0.09157621350977074346
_WB = 0.10995174365532186764

# Symmetric 6-point rule, exact for degree 4
SIX_POINT_RULE = TriangleRule(
    name="six-point",
    degree=4,
    barycentric=np.array([
        [_A, _A, 1.0 - 2.0 * _A],
        [_A, 1.0 - 2.0 * _A, _A],
        [1.0 - 2.0 * _A, _A, _A],
        [_B, _B, 1.0 - 2.0 * _B],
        [_B, 1.0 - 2.0 * _B, _B],
        [1.0 - 2.0 * _B, _B, _B],
    ]),
    weights=np.array([_WA, _WA, _WA, _WB, _WB, _WB]),
)

# 1D Gauss-Legendre on [0, 1], exact for degree 5 (edge integrals)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)
EDGE_NODES = 0.5 * (_GL_NODES + 1.0)
EDGE_WEIGHTS = 0.5 * _GL_WEIGHTS


def rule_for_degree(degree: int) -> TriangleRule:
    """Cheapest rule exact for polynomials of the given total degree."""
    if degree <= 2:
        return EDGE_MIDPOINT_RULE
    if degree <= 4:
        return SIX_POINT_RULE
    raise ValueError(f"No triangle rule of degree {degree}")
