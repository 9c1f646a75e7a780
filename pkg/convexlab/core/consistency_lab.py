#!/usr/bin/env python3

"""
Consistency lab: measures the leading-order behaviour of each discretized
constraint on smooth functions and compares it with the tabulated Taylor
predictions.

Every quantity is computed on a small structured patch (4 x 4 cells of
width h around the center point) with the fem_core primitives. The patch
vertex on grid position (i, j) has index j*5 + i, so the center is vertex
(2, 2).

Part of the ConvexLab project.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from convexlab.core import fem_core
from convexlab.core.errors import DegenerateDataError, InvalidArgumentError, PatchOutOfDomainError
from convexlab.core.fem_core import BasisFunction, BasisKind
from convexlab.core.mesh import Mesh, MeshKind, Rectangle, build_structured_mesh

# Configure logging
logger = logging.getLogger('consistency_lab')

PATCH_CELLS = 4
ZERO_TOL = 1e-14
ORDER_TOL = 0.1
COEFFICIENT_RTOL = 0.02
PROBE_ORDER_TOL = 0.25
PROBE_RTOL = 0.02
DEFAULT_HS = (1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0)
GUARD_CENTER = (1.0, 0.5)
# All fourth derivatives of sin(x)cos(y) vanish here
ORIGIN_GUARD = (0.0, 0.0)

SQRT2 = math.sqrt(2.0)


# ----------------------------------------------------------------------
# Smooth test functions
# ----------------------------------------------------------------------

class SmoothFunction:
    """Vectorized f(x, y) with exact partial derivatives."""
    name = "f"

    def __call__(self, x, y):
        return self.derivative(0, 0, x, y)

    def derivative(self, i: int, j: int, x, y):
        """d^(i+j) f / dx^i dy^j."""
        raise NotImplementedError

    def d(self, i: int, j: int, point: Sequence[float]) -> float:
        return float(self.derivative(i, j, float(point[0]), float(point[1])))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"


class Polynomial2D(SmoothFunction):
    """sum c[i, j] x^i y^j."""

    def __init__(self, coeffs: np.ndarray, name: str):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self.name = name

    @classmethod
    def from_terms(cls, terms: Dict[Tuple[int, int], float], name: str) -> "Polynomial2D":
        size = max(max(i, j) for i, j in terms) + 1
        coeffs = np.zeros((size, size))
        for (i, j), c in terms.items():
            coeffs[i, j] = c
        return cls(coeffs, name)

    def derivative(self, i: int, j: int, x, y):
        c = self.coeffs
        if i:
            c = npoly.polyder(c, i, axis=0) if c.shape[0] > i else np.zeros((1, c.shape[1]))
        if j:
            c = npoly.polyder(c, j, axis=1) if c.shape[1] > j else np.zeros((c.shape[0], 1))
        return npoly.polyval2d(x, y, c)


class SinCos(SmoothFunction):
    """sin(x) cos(y)."""
    name = "sin(x)cos(y)"

    def derivative(self, i: int, j: int, x, y):
        return np.sin(x + 0.5 * i * math.pi) * np.cos(y + 0.5 * j * math.pi)


def poly(name: str, **terms: float) -> Polynomial2D:
    """Polynomial from keyword terms such as x2y1=1.0."""
    parsed = {}
    for key, value in terms.items():
        px, py = key[1:].split("y")
        parsed[(int(px), int(py))] = value
    return Polynomial2D.from_terms(parsed, name)


QUADRATIC_BALANCED = poly("x^2+xy+y^2", x2y0=1.0, x1y1=1.0, x0y2=1.0)
QUADRATIC_SKEW = poly("x^2+xy+2y^2", x2y0=1.0, x1y1=1.0, x0y2=2.0)
CUBIC_MIXED = poly("x^2y+2xy^2", x2y1=1.0, x1y2=2.0)
QUARTIC_AXIS = poly("x^4+y^4", x4y0=1.0, x0y4=1.0)
SIN_COS = SinCos()

PROBES = (
    poly("x^2+y^2", x2y0=1.0, x0y2=1.0),
    poly("xy", x1y1=1.0),
    poly("x^2", x2y0=1.0),
)


# ----------------------------------------------------------------------
# Predicted functionals and continuous counterparts
# ----------------------------------------------------------------------

Functional = Callable[[SmoothFunction, Sequence[float]], float]


def _laplacian(u: SmoothFunction, p) -> float:
    return u.d(2, 0, p) + u.d(0, 2, p)


def _hessian_det(u: SmoothFunction, p) -> float:
    return u.d(2, 0, p) * u.d(0, 2, p) - u.d(1, 1, p) ** 2


def _third_mixed(u: SmoothFunction, p) -> float:
    return u.d(2, 1, p) + u.d(1, 2, p)


def _normal_second(normal: Tuple[float, float]) -> Functional:
    nx, ny = normal

    def u_nn(u: SmoothFunction, p) -> float:
        return nx * nx * u.d(2, 0, p) + 2.0 * nx * ny * u.d(1, 1, p) + ny * ny * u.d(0, 2, p)

    return u_nn


_VERTICAL_NORMAL = (1.0, 0.0)
_HORIZONTAL_NORMAL = (0.0, 1.0)
_MESH1_DIAGONAL_NORMAL = (-1.0 / SQRT2, 1.0 / SQRT2)
_MESH2_DIAGONAL_NORMAL = (1.0 / SQRT2, 1.0 / SQRT2)

QUANTITIES = (
    "jump-axis-edge", "jump-diagonal-edge", "weak-trace-vertex", "weak-det-vertex",
    "p2-jump", "p2-weak-trace-vertex",
    "p2-weak-trace-midpoint-h", "p2-weak-trace-midpoint-v", "p2-weak-trace-midpoint-d",
    "p2-weak-det-midpoint",
)


@dataclass(frozen=True)
class ConsistencyCase:
    """
    One tabulated discretized quantity.

    ``edge`` lists the patch grid positions of the edge endpoints for jump
    and midpoint quantities; vertex quantities use the patch center.
    Polynomials are measured around the origin, sin(x)cos(y) around
    ``guard_center``.
    """
    id: str
    group: str
    kind: MeshKind
    degree: int
    quantity: str
    order: int
    functional: Functional
    counterpart: Functional
    counterpart_order: int
    expected_consistent: bool
    primary: SmoothFunction
    edge: Optional[Tuple[Tuple[int, int], Tuple[int, int]]] = None
    guard_center: Tuple[float, float] = GUARD_CENTER

    @property
    def functions(self) -> Tuple[SmoothFunction, ...]:
        """Evaluation functions: the primary polynomial and the sin(x)cos(y) guard."""
        return (self.primary, SIN_COS)

    def center_for(self, u: SmoothFunction) -> Tuple[float, float]:
        return self.guard_center if isinstance(u, SinCos) else (0.0, 0.0)

    def predicted(self, u: SmoothFunction, center: Sequence[float]) -> float:
        return float(self.functional(u, center))


def _case(id, group, kind, degree, quantity, order, functional, counterpart, counterpart_order,
          consistent, primary, edge=None, guard_center=GUARD_CENTER) -> ConsistencyCase:
    return ConsistencyCase(id, group, MeshKind(kind), degree, quantity, order, functional, counterpart,
                           counterpart_order, consistent, primary, edge, guard_center)


_V_EDGE = ((2, 1), (2, 2))
_H_EDGE = ((2, 2), (3, 2))
_UP_EDGE = ((2, 2), (2, 3))
_D1_EDGE = ((2, 2), (3, 3))
_D2_EDGE = ((3, 2), (2, 3))

CASES: Tuple[ConsistencyCase, ...] = (
    _case("eq13-vertical", "eq13", "mesh1", 1, "jump-axis-edge", 1,
          lambda u, p: u.d(2, 0, p) + u.d(1, 1, p), _normal_second(_VERTICAL_NORMAL), 1,
          False, QUADRATIC_BALANCED, _V_EDGE),
    _case("eq13-horizontal", "eq13", "mesh1", 1, "jump-axis-edge", 1,
          lambda u, p: u.d(1, 1, p) + u.d(0, 2, p), _normal_second(_HORIZONTAL_NORMAL), 1,
          False, QUADRATIC_BALANCED, _H_EDGE),
    _case("eq13-diagonal", "eq13", "mesh1", 1, "jump-diagonal-edge", 1,
          lambda u, p: -SQRT2 * u.d(1, 1, p), _normal_second(_MESH1_DIAGONAL_NORMAL), 1,
          False, QUADRATIC_BALANCED, _D1_EDGE),
    _case("eq13.5-vertical", "eq13.5", "mesh2", 1, "jump-axis-edge", 1,
          lambda u, p: u.d(2, 0, p) - u.d(1, 1, p), _normal_second(_VERTICAL_NORMAL), 1,
          False, QUADRATIC_BALANCED, _V_EDGE),
    _case("eq13.5-horizontal", "eq13.5", "mesh2", 1, "jump-axis-edge", 1,
          lambda u, p: u.d(0, 2, p) - u.d(1, 1, p), _normal_second(_HORIZONTAL_NORMAL), 1,
          False, QUADRATIC_BALANCED, _H_EDGE),
    _case("eq13.5-diagonal", "eq13.5", "mesh2", 1, "jump-diagonal-edge", 1,
          lambda u, p: SQRT2 * u.d(1, 1, p), _normal_second(_MESH2_DIAGONAL_NORMAL), 1,
          False, QUADRATIC_BALANCED, _D2_EDGE),
    _case("eq15", "eq15", "mesh1", 1, "weak-trace-vertex", 2,
          _laplacian, _laplacian, 2, True, QUADRATIC_SKEW),
    _case("eq17", "eq17", "mesh1", 1, "weak-det-vertex", 4,
          _hessian_det, _hessian_det, 4, True, QUADRATIC_SKEW),
    _case("eq18-vertical", "eq18", "mesh1", 2, "p2-jump", 2,
          lambda u, p: 0.25 * _third_mixed(u, p), _normal_second(_VERTICAL_NORMAL), 1,
          False, CUBIC_MIXED, _V_EDGE, ORIGIN_GUARD),
    _case("eq18-horizontal", "eq18", "mesh1", 2, "p2-jump", 2,
          lambda u, p: 0.25 * _third_mixed(u, p), _normal_second(_HORIZONTAL_NORMAL), 1,
          False, CUBIC_MIXED, _H_EDGE, ORIGIN_GUARD),
    _case("eq18-diagonal", "eq18", "mesh1", 2, "p2-jump", 2,
          lambda u, p: -0.25 * SQRT2 * _third_mixed(u, p), _normal_second(_MESH1_DIAGONAL_NORMAL), 1,
          False, CUBIC_MIXED, _D1_EDGE, ORIGIN_GUARD),
    _case("eq20", "eq20", "mesh1", 2, "p2-weak-trace-vertex", 4,
          lambda u, p: -(u.d(4, 0, p) + u.d(0, 4, p)) / 48.0, _laplacian, 2,
          False, QUARTIC_AXIS),
    _case("eq21-h", "eq21", "mesh1", 2, "p2-weak-trace-midpoint-h", 2,
          lambda u, p: _laplacian(u, p) / 3.0, _laplacian, 2, True, QUADRATIC_SKEW, _H_EDGE),
    _case("eq21-v", "eq21", "mesh1", 2, "p2-weak-trace-midpoint-v", 2,
          lambda u, p: _laplacian(u, p) / 3.0, _laplacian, 2, True, QUADRATIC_SKEW, _UP_EDGE),
    _case("eq21-d", "eq21", "mesh1", 2, "p2-weak-trace-midpoint-d", 2,
          lambda u, p: _laplacian(u, p) / 3.0, _laplacian, 2, True, QUADRATIC_SKEW, _D1_EDGE),
    _case("eq22", "eq22", "mesh1", 2, "p2-weak-det-midpoint", 4,
          lambda u, p: _hessian_det(u, p) / 9.0, _hessian_det, 4, True, QUADRATIC_SKEW, _H_EDGE),
)

CASE_IDS: Tuple[str, ...] = tuple(dict.fromkeys(case.group for case in CASES))
SUBCASE_IDS: Tuple[str, ...] = tuple(case.id for case in CASES)


def resolve_cases(case_id: Optional[str] = None) -> List[ConsistencyCase]:
    """Cases of a group id or a single sub-case id; all cases when None."""
    if case_id is None:
        return list(CASES)
    selected = [c for c in CASES if c.group == case_id or c.id == case_id]
    if not selected:
        raise InvalidArgumentError(f"Unknown case {case_id!r}; known groups: {', '.join(CASE_IDS)}")
    return selected


def get_case(case_id: str) -> ConsistencyCase:
    for case in CASES:
        if case.id == case_id:
            return case
    raise InvalidArgumentError(f"Unknown sub-case {case_id!r}")


# ----------------------------------------------------------------------
# Evaluation on a patch
# ----------------------------------------------------------------------

def _grid_vertex(i: int, j: int) -> int:
    return j * (PATCH_CELLS + 1) + i


def patch_mesh(kind: Union[str, MeshKind], h: float, center: Sequence[float] = (0.0, 0.0),
               domain: Optional[Rectangle] = None) -> Mesh:
    """4 x 4 structured patch of width h centered at ``center``."""
    if not h > 0.0:
        raise InvalidArgumentError(f"h must be positive, got {h!r}")
    half = 0.5 * PATCH_CELLS * h
    cx, cy = float(center[0]), float(center[1])
    patch = Rectangle(cx - half, cy - half, cx + half, cy + half)
    if domain is not None and not domain.contains_rectangle(patch):
        raise PatchOutOfDomainError(f"Patch {patch} leaves the domain {domain}")
    return build_structured_mesh(kind, PATCH_CELLS, patch)


def evaluate_case(case: ConsistencyCase, u: SmoothFunction, h: float,
                  center: Sequence[float] = (0.0, 0.0), domain: Optional[Rectangle] = None) -> float:
    """
    Discrete quantity Q_h of ``case`` for the interpolant of ``u``.

    P2 jumps are read at the edge end with the larger vertex index.
    """
    mesh = patch_mesh(case.kind, h, center, domain)
    uh = fem_core.interpolate(mesh, case.degree, u)

    if case.quantity in ("jump-axis-edge", "jump-diagonal-edge", "p2-jump"):
        (i0, j0), (i1, j1) = case.edge
        edge_id = mesh.edge_index(_grid_vertex(i0, j0), _grid_vertex(i1, j1))
        edge = next(e for e in mesh.interior_edges() if e.index == edge_id)
        profile = fem_core.gradient_jump(uh, edge)
        return profile.value if case.degree == 1 else profile.end

    if case.quantity in ("weak-trace-vertex", "weak-det-vertex", "p2-weak-trace-vertex"):
        kind = BasisKind.P1_VERTEX if case.degree == 1 else BasisKind.P2_VERTEX
        test = BasisFunction(kind, _grid_vertex(2, 2))
    else:
        (i0, j0), (i1, j1) = case.edge
        test = BasisFunction(BasisKind.P2_MIDPOINT, mesh.edge_index(_grid_vertex(i0, j0), _grid_vertex(i1, j1)))

    hessian = fem_core.weak_hessian(uh, test)
    return hessian.det if "det" in case.quantity else hessian.trace


def mesh1_p1_det_stencil(u: SmoothFunction, h: float, center: Sequence[float] = (0.0, 0.0)) -> float:
    """
    Factorized determinant of the P1 weak Hessian at a Mesh1 vertex from
    nodal values alone:
    (uE - 2u0 + uW)(uN - 2u0 + uS) - ((uNE + uSW + 2u0 - uN - uS - uE - uW)/2)^2
    """
    cx, cy = float(center[0]), float(center[1])

    def at(di, dj):
        return float(u(cx + di * h, cy + dj * h))

    u0 = at(0, 0)
    hxx = at(1, 0) - 2.0 * u0 + at(-1, 0)
    hyy = at(0, 1) - 2.0 * u0 + at(0, -1)
    hxy = 0.5 * (at(1, 1) + at(-1, -1) + 2.0 * u0 - at(0, 1) - at(0, -1) - at(1, 0) - at(-1, 0))
    return hxx * hyy - hxy * hxy


# ----------------------------------------------------------------------
# Order estimation
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class OrderEstimate:
    """
    Least-squares slope of log|Q_h| against log h.

    ``coefficient`` is the Richardson-extrapolated Q_h / h^p, ``finest_ratio``
    the raw ratio at the finest level. An identically vanishing sequence
    gives order = inf and coefficient 0.
    """
    order: float
    coefficient: float
    r_squared: float
    finest_ratio: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.order)

    def __iter__(self) -> Iterator[float]:
        return iter((self.order, self.coefficient, self.r_squared))


def fit_order(hs: Sequence[float], values: Sequence[float]) -> OrderEstimate:
    hs = np.asarray(hs, dtype=float)
    values = np.asarray(values, dtype=float)
    if hs.size < 4:
        raise InvalidArgumentError(f"At least 4 h-levels are needed, got {hs.size}")
    if hs.shape != values.shape:
        raise InvalidArgumentError("h and Q sequences differ in length")
    if np.any(hs <= 0.0):
        raise InvalidArgumentError("h-levels must be positive")

    zero = np.abs(values) <= ZERO_TOL
    if zero.all():
        return OrderEstimate(math.inf, 0.0, 1.0, 0.0)
    if zero.any():
        raise DegenerateDataError(f"Q_h vanishes at some levels only: {values.tolist()}")

    log_h = np.log(hs)
    log_q = np.log(np.abs(values))
    slope, intercept = np.polyfit(log_h, log_q, 1)
    fitted = slope * log_h + intercept
    ss_res = float(np.sum((log_q - fitted) ** 2))
    ss_tot = float(np.sum((log_q - log_q.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0

    rounded = round(slope)
    p = float(rounded) if abs(slope - rounded) <= PROBE_ORDER_TOL else float(slope)
    order_idx = np.argsort(hs)
    fine, coarse = order_idx[0], order_idx[1]
    c_fine = values[fine] / hs[fine] ** p
    c_coarse = values[coarse] / hs[coarse] ** p
    r = hs[coarse] / hs[fine]
    coefficient = (r * c_fine - c_coarse) / (r - 1.0)
    return OrderEstimate(float(slope), float(coefficient), r_squared, float(c_fine))


def estimate_order(evaluator: Callable[[float], float], hs: Sequence[float] = DEFAULT_HS) -> OrderEstimate:
    """Evaluate Q_h on every level and fit the order."""
    values = [float(evaluator(h)) for h in hs]
    return fit_order(hs, values)


# ----------------------------------------------------------------------
# Verdicts and reports
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeVerdict:
    """
    Consistent iff the measured leading term is a common positive multiple
    kappa of the continuous counterpart on every probe.
    """
    consistent: bool
    kappa: float
    details: Tuple[Tuple[str, float, float, float], ...]
    reason: str = ""


def probe_verdict(case: ConsistencyCase, hs: Sequence[float] = DEFAULT_HS) -> ProbeVerdict:
    """Classify ``case`` on the probe family x^2+y^2, xy, x^2 around the origin."""
    center = (0.0, 0.0)
    details = []
    ratios = []
    reason = ""
    for probe in PROBES:
        target = float(case.counterpart(probe, center))
        est = estimate_order(lambda h: evaluate_case(case, probe, h, center), hs)
        details.append((probe.name, target, est.order, est.coefficient))
        if abs(target) <= 1e-12:
            if not (est.infinite or est.order > case.counterpart_order + 0.5):
                reason = reason or f"{probe.name}: counterpart vanishes but Q_h ~ h^{est.order:.2f}"
            continue
        if est.infinite or abs(est.order - case.counterpart_order) > PROBE_ORDER_TOL:
            reason = reason or f"{probe.name}: no term at order {case.counterpart_order}"
            continue
        ratios.append(est.coefficient / target)

    kappa = ratios[0] if ratios else 0.0
    if not reason:
        if not ratios or kappa <= 0.0:
            reason = "no positive multiple of the counterpart"
        elif any(abs(r - kappa) > PROBE_RTOL * abs(kappa) for r in ratios):
            reason = f"ratios {ratios} are not a common multiple"
    return ProbeVerdict(not reason, kappa, tuple(details), reason)


def verdict_label(consistent: bool) -> str:
    return "consistent" if consistent else "inconsistent"


@dataclass
class ConsistencyReport:
    """Measured against predicted leading term of one case on one function."""
    case_id: str
    group: str
    kind: str
    degree: int
    quantity: str
    function: str
    center: Tuple[float, float]
    hs: List[float]
    values: List[float]
    measured_order: float
    measured_coefficient: float
    r_squared: float
    finest_ratio: float
    predicted_order: int
    predicted_coefficient: float
    relative_error: float
    expected_consistent: bool
    measured_consistent: bool
    probe_reason: str = ""

    @property
    def order_ok(self) -> bool:
        return abs(self.measured_order - self.predicted_order) <= ORDER_TOL

    @property
    def coefficient_ok(self) -> bool:
        return self.relative_error <= COEFFICIENT_RTOL

    @property
    def verdict(self) -> str:
        return verdict_label(self.measured_consistent)

    @property
    def expected_verdict(self) -> str:
        return verdict_label(self.expected_consistent)

    @property
    def passed(self) -> bool:
        return self.order_ok and self.coefficient_ok and self.measured_consistent == self.expected_consistent


def _relative_error(measured: float, predicted: float) -> float:
    if predicted == 0.0:
        return abs(measured)
    return abs(measured - predicted) / abs(predicted)


def run_case(case: ConsistencyCase, u: SmoothFunction, hs: Sequence[float] = DEFAULT_HS,
             center: Optional[Sequence[float]] = None, verdict: Optional[ProbeVerdict] = None,
             domain: Optional[Rectangle] = None) -> ConsistencyReport:
    """Measure one case on one function."""
    if center is None:
        center = case.center_for(u)
    center = (float(center[0]), float(center[1]))
    verdict = verdict or probe_verdict(case, hs)
    values = [evaluate_case(case, u, h, center, domain) for h in hs]
    est = fit_order(hs, values)
    predicted = case.predicted(u, center)
    report = ConsistencyReport(
        case_id=case.id,
        group=case.group,
        kind=case.kind.value,
        degree=case.degree,
        quantity=case.quantity,
        function=u.name,
        center=center,
        hs=[float(h) for h in hs],
        values=values,
        measured_order=est.order,
        measured_coefficient=est.coefficient,
        r_squared=est.r_squared,
        finest_ratio=est.finest_ratio,
        predicted_order=case.order,
        predicted_coefficient=predicted,
        relative_error=_relative_error(est.coefficient, predicted),
        expected_consistent=case.expected_consistent,
        measured_consistent=verdict.consistent,
        probe_reason=verdict.reason,
    )
    logger.debug(f"{case.id} on {u.name}: order {est.order:.4f} (p={case.order}), "
                 f"coefficient {est.coefficient:.10g} vs {predicted:.10g}, {report.verdict}")
    return report


def _run_case_functions(case: ConsistencyCase, hs: Sequence[float]) -> List[ConsistencyReport]:
    verdict = probe_verdict(case, hs)
    return [run_case(case, u, hs, verdict=verdict) for u in case.functions]


def run_suite(case_id: Optional[str] = None, hs: Sequence[float] = DEFAULT_HS,
              threads: int = 1) -> List[ConsistencyReport]:
    """
    Run every tabulated case (or one group / sub-case).

    Args:
        case_id: Group id such as "eq15", a sub-case id, or None for all
        hs: Step sizes, at least four
        threads: Cases evaluated concurrently

    Returns:
        Reports in table order
    """
    if len(hs) < 4:
        raise InvalidArgumentError("A consistency report needs at least 4 h-levels")
    cases = resolve_cases(case_id)
    workers = max(1, int(threads))
    logger.info(f"Running {len(cases)} consistency cases on {len(hs)} levels with {workers} worker(s)")
    if workers == 1:
        batches = [_run_case_functions(case, hs) for case in cases]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda c: _run_case_functions(c, hs), cases))
    return [report for batch in batches for report in batch]


@dataclass
class GroupSummary:
    group: str
    expected: str
    measured: str
    passed: bool
    cases: List[str] = field(default_factory=list)


def summarize(reports: Sequence[ConsistencyReport]) -> List[GroupSummary]:
    """One row per group: a group is consistent when all its sub-cases are."""
    groups: Dict[str, List[ConsistencyReport]] = {}
    for report in reports:
        groups.setdefault(report.group, []).append(report)
    summary = []
    for group, rows in groups.items():
        measured = all(r.measured_consistent for r in rows)
        expected = all(r.expected_consistent for r in rows)
        summary.append(GroupSummary(
            group=group,
            expected=verdict_label(expected),
            measured=verdict_label(measured),
            passed=all(r.passed for r in rows),
            cases=list(dict.fromkeys(r.case_id for r in rows)),
        ))
    return summary
