"""End-to-end checks of the full studies. Deselect with -m 'not slow'."""

import math

import numpy as np
import pytest

from convexlab.core import fem_core
from convexlab.core.consistency_lab import CASE_IDS, run_suite, summarize
from convexlab.core.constraints import monopolist_constraints
from convexlab.core.mesh import build_structured_mesh
from convexlab.core.qp_solver import monopolist_exact
from convexlab.experiments.studies import MONOPOLIST_DOMAIN, STUDIES, ExperimentConfig

pytestmark = pytest.mark.slow

CONSISTENT_GROUPS = {"eq15", "eq17", "eq21", "eq22"}


def _run(tmp_path, experiment, **kwargs):
    cfg = ExperimentConfig(experiment=experiment, out_dir=tmp_path / experiment, write_svg=False, **kwargs)
    cfg.validate()
    return STUDIES[experiment](cfg)


def test_five_point_stencil_on_every_interior_vertex(mesh1_eighth):
    rng = np.random.default_rng(1)
    u = fem_core.FEFunction(mesh1_eighth, 1, rng.normal(size=mesh1_eighth.num_vertices))
    n = 8
    for v in fem_core.admissible_tests(mesh1_eighth, "p1-vertex"):
        stencil = u.dofs[v + 1] + u.dofs[v - 1] + u.dofs[v + n + 1] + u.dofs[v - n - 1] - 4.0 * u.dofs[v]
        hessian = fem_core.weak_hessian(u, fem_core.BasisFunction(fem_core.BasisKind.P1_VERTEX, int(v)))
        assert hessian.trace == pytest.approx(stencil, abs=1e-12)


def test_consistency_table():
    reports = run_suite()
    failures = [(r.case_id, r.function, r.measured_order, r.relative_error) for r in reports if not r.passed]
    assert not failures
    verdicts = {s.group: s.measured for s in summarize(reports)}
    assert set(verdicts) == set(CASE_IDS)
    for group, measured in verdicts.items():
        assert measured == ("consistent" if group in CONSISTENT_GROUPS else "inconsistent")


def test_subharmonic_projection_converges(tmp_path):
    result = _run(tmp_path, "subharmonic", n_levels=[4, 8, 16, 32])
    assert result.accepted
    errors = result.summary["errors"]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert result.summary["orders"][-1] >= 1.5


def test_subharmonic_projection_of_affine_is_exact(tmp_path):
    result = _run(tmp_path, "subharmonic", n_levels=[2, 4, 8], target="affine")
    assert result.accepted
    assert max(result.summary["errors"]) <= 1e-10


def test_nonconvergence_plateau_and_control(tmp_path):
    plateau = _run(tmp_path, "nonconvergence", n_levels=[4, 8, 16, 32])
    distances = plateau.summary["distances"]
    assert plateau.accepted
    assert all(d >= 0.5 * distances[0] for d in distances)
    assert plateau.summary["min_mixed_pairing"] >= -1e-8
    assert (tmp_path / "nonconvergence" / "nonconvergence_density_n32.csv").exists()

    control = _run(tmp_path / "control", "nonconvergence", n_levels=[4, 8, 16, 32], target="convex")
    distances = control.summary["distances"]
    assert control.accepted
    assert distances[0] >= 4.0 * distances[-1]


def test_monopolist_exact_solution_is_feasible():
    mesh = build_structured_mesh("mesh1", 8, MONOPOLIST_DOMAIN)
    exact = fem_core.interpolate(mesh, 1, monopolist_exact(None, MONOPOLIST_DOMAIN.lower_left))
    assert monopolist_constraints(mesh).is_satisfied(exact)


def test_monopolist_converges(tmp_path):
    result = _run(tmp_path, "monopolist", n_levels=[4, 8, 16])
    assert result.accepted
    assert result.summary["orders"][-1] >= 1.5
    for row in result.rows:
        # objective never exceeds the interpolant's
        assert row[4] <= row[5] + 1e-10 * max(1.0, abs(row[5]))
        assert row[7] == "optimal"


def test_monopolist_with_adversarial_quadratic_plateaus(tmp_path):
    result = _run(tmp_path, "monopolist", n_levels=[4, 8, 16, 32], target="lemma2")
    assert result.accepted
    errors = result.summary["errors"]
    assert min(errors) >= 0.5 * errors[0]
    assert any("plateau floor" in m for m in result.messages)

    control = _run(tmp_path, "monopolist", n_levels=[4, 8, 16, 32], target="lemma2", constraints="none")
    assert control.summary["errors"][-1] < 0.5 * control.summary["errors"][0]


def test_monopolist_partial_participation(tmp_path):
    result = _run(tmp_path, "monopolist", n_levels=[4, 8], alpha=0.5)
    assert result.accepted
    assert all(math.isnan(e) for e in result.summary["errors"])
