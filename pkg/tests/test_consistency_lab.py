"""Tests for the consistency lab: stencils on patches, order fits and verdicts."""

import math

import numpy as np
import pytest

from convexlab.core.consistency_lab import (
    CASE_IDS,
    CASES,
    DEFAULT_HS,
    QUADRATIC_BALANCED,
    QUADRATIC_SKEW,
    SIN_COS,
    SUBCASE_IDS,
    evaluate_case,
    fit_order,
    get_case,
    mesh1_p1_det_stencil,
    patch_mesh,
    poly,
    probe_verdict,
    resolve_cases,
    run_case,
    summarize,
)
from convexlab.core.errors import DegenerateDataError, InvalidArgumentError, PatchOutOfDomainError
from convexlab.core.mesh import Rectangle


@pytest.mark.parametrize("h", [0.5, 0.125, 1.0 / 64.0])
def test_weak_trace_is_laplacian_times_h2(h):
    assert evaluate_case(get_case("eq15"), QUADRATIC_SKEW, h) == pytest.approx(6.0 * h * h, rel=1e-9)


@pytest.mark.parametrize("h", [0.5, 0.125, 1.0 / 64.0])
def test_weak_det_is_hessian_det_times_h4(h):
    assert evaluate_case(get_case("eq17"), QUADRATIC_SKEW, h) == pytest.approx(7.0 * h ** 4, rel=1e-8)


@pytest.mark.parametrize("case_id, expected", [
    ("eq13-vertical", 3.0),
    ("eq13-horizontal", 3.0),
    ("eq13-diagonal", -math.sqrt(2.0)),
])
def test_mesh1_jumps_of_balanced_quadratic(case_id, expected):
    h = 0.25
    case = get_case(case_id)
    assert case.predicted(QUADRATIC_BALANCED, (0.0, 0.0)) == pytest.approx(expected)
    assert evaluate_case(case, QUADRATIC_BALANCED, h) == pytest.approx(expected * h, rel=1e-10)


def test_mesh2_diagonal_jump_changes_sign():
    h = 0.25
    assert evaluate_case(get_case("eq13.5-diagonal"), QUADRATIC_BALANCED, h) == pytest.approx(math.sqrt(2.0) * h)


@pytest.mark.parametrize("u", [QUADRATIC_SKEW, SIN_COS, poly("x^3y", x3y1=1.0)])
def test_det_stencil_matches_weak_hessian(u):
    h = 0.1
    center = (0.3, 0.2)
    stencil = mesh1_p1_det_stencil(u, h, center)
    weak = evaluate_case(get_case("eq17"), u, h, center)
    assert stencil == pytest.approx(weak, rel=1e-9, abs=1e-15)


def test_midpoint_trace_of_quadratic():
    h = 0.125
    for case_id in ("eq21-h", "eq21-v", "eq21-d"):
        assert evaluate_case(get_case(case_id), QUADRATIC_SKEW, h) == pytest.approx(6.0 * h * h / 3.0, rel=1e-9)


def test_fit_order_of_pure_power():
    hs = list(DEFAULT_HS)
    order, coefficient, r_squared = fit_order(hs, [3.0 * h * h for h in hs])
    assert order == pytest.approx(2.0)
    assert coefficient == pytest.approx(3.0)
    assert r_squared == pytest.approx(1.0)


def test_fit_order_extrapolates_leading_coefficient():
    hs = list(DEFAULT_HS)
    est = fit_order(hs, [3.0 * h * h + h ** 3 for h in hs])
    assert abs(est.order - 2.0) < 0.1
    assert est.coefficient == pytest.approx(3.0, rel=1e-10)
    assert est.finest_ratio == pytest.approx(3.0 + hs[-1])


def test_fit_order_degenerate_inputs():
    hs = list(DEFAULT_HS)
    zero = fit_order(hs, [0.0] * 4)
    assert zero.infinite and zero.coefficient == 0.0
    with pytest.raises(DegenerateDataError):
        fit_order(hs, [0.0, 1e-3, 1e-4, 1e-5])
    with pytest.raises(InvalidArgumentError):
        fit_order(hs[:3], [1.0, 0.5, 0.25])
    with pytest.raises(InvalidArgumentError):
        fit_order(hs, [1.0, 0.5])


def test_resolve_cases():
    assert len(resolve_cases()) == len(CASES)
    assert [c.id for c in resolve_cases("eq13")] == ["eq13-vertical", "eq13-horizontal", "eq13-diagonal"]
    assert [c.id for c in resolve_cases("eq21-d")] == ["eq21-d"]
    assert "eq22" in CASE_IDS
    with pytest.raises(InvalidArgumentError):
        resolve_cases("eq99")
    with pytest.raises(InvalidArgumentError):
        get_case("eq13")


def test_patch_must_fit_domain():
    unit = Rectangle(0.0, 0.0, 1.0, 1.0)
    assert patch_mesh("mesh1", 0.1, (0.5, 0.5), unit).num_triangles == 32
    with pytest.raises(PatchOutOfDomainError):
        patch_mesh("mesh1", 0.5, (0.0, 0.0), unit)
    with pytest.raises(PatchOutOfDomainError):
        evaluate_case(get_case("eq15"), QUADRATIC_SKEW, 0.125, (0.1, 0.5), unit)
    with pytest.raises(InvalidArgumentError):
        patch_mesh("mesh1", 0.0)


@pytest.mark.parametrize("case_id, consistent", [
    ("eq15", True),
    ("eq21-h", True),
    ("eq13-diagonal", False),
    ("eq13.5-vertical", False),
])
def test_probe_verdicts(case_id, consistent):
    verdict = probe_verdict(get_case(case_id))
    assert verdict.consistent is consistent
    if consistent:
        assert verdict.kappa > 0.0
    else:
        assert verdict.reason


def test_run_case_report():
    report = run_case(get_case("eq15"), QUADRATIC_SKEW)
    assert report.order_ok and report.coefficient_ok
    assert report.predicted_coefficient == pytest.approx(6.0)
    assert report.passed
    assert report.verdict == "consistent"


def test_run_case_on_sin_cos_uses_offset_center():
    report = run_case(get_case("eq15"), SIN_COS)
    assert report.center == (1.0, 0.5)
    assert report.order_ok
    assert report.coefficient_ok


def test_every_case_runs_the_sin_cos_guard():
    assert all(SIN_COS in case.functions for case in CASES)
    assert get_case("eq18-vertical").center_for(SIN_COS) == (0.0, 0.0)
    assert get_case("eq18-vertical").center_for(get_case("eq18-vertical").primary) == (0.0, 0.0)
    assert get_case("eq13-vertical").center_for(SIN_COS) == (1.0, 0.5)


@pytest.mark.parametrize("case_id", SUBCASE_IDS)
def test_sin_cos_matches_predicted_leading_term(case_id):
    report = run_case(get_case(case_id), SIN_COS)
    assert report.order_ok, (report.measured_order, report.predicted_order)
    assert report.coefficient_ok, (report.measured_coefficient, report.predicted_coefficient)


@pytest.mark.parametrize("case_id", SUBCASE_IDS)
def test_translated_patch_keeps_order_and_coefficient(case_id):
    case = get_case(case_id)
    verdict = probe_verdict(case)
    origin = run_case(case, case.primary, verdict=verdict)
    moved = run_case(case, case.primary, center=(0.37, -0.21), verdict=verdict)
    assert moved.center == (0.37, -0.21)
    assert moved.measured_order == pytest.approx(origin.measured_order, rel=0.02)
    assert moved.measured_coefficient == pytest.approx(origin.measured_coefficient, rel=0.02)


def test_summarize_groups():
    case = get_case("eq13-diagonal")
    reports = [run_case(case, QUADRATIC_BALANCED)]
    summary = summarize(reports)
    assert len(summary) == 1
    assert summary[0].group == "eq13"
    assert summary[0].measured == "inconsistent"
    assert summary[0].passed
