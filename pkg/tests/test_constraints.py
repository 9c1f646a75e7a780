"""Tests for constraint sets, direction-pair certificates and the adversarial quadratic."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from convexlab.core import fem_core
from convexlab.core.constraints import (
    DifferenceQuotient,
    LinearConstraintSet,
    audit_mesh,
    conformal_convexity_constraints,
    constraints_for_mode,
    difference_quotient,
    edge_jump_pairing,
    lemma2_matrix,
    mixed_derivative_sign_audit,
    monopolist_constraints,
    pm_find_vectors,
    pm_verify,
    weak_convexity_constraints,
    weak_convexity_residuals,
    weak_subharmonicity_constraints,
)
from convexlab.core.errors import DegenerateDirectionsError, InvalidArgumentError, OutOfDomainError
from convexlab.core.fem_core import BasisKind, FEFunction
from convexlab.core.mesh import Rectangle, build_structured_mesh

S = 1.0 / math.sqrt(2.0)
A_CANON = (-1.0, 0.0)
B_CANON = (0.0, 1.0)


def _is_axis(normal):
    return abs(abs(normal[0]) - 1.0) < 1e-12 or abs(abs(normal[1]) - 1.0) < 1e-12


def test_conformal_rows_of_affine_vanish():
    mesh = build_structured_mesh("mesh4", 4)
    for degree in (1, 2):
        cs = conformal_convexity_constraints(mesh, degree)
        u = fem_core.interpolate(mesh, degree, lambda x, y: 2.0 + x - 3.0 * y)
        assert np.max(np.abs(cs.residuals(u))) < 1e-12


def test_conformal_rows_of_convex_quadratic(mesh1_small):
    cs = conformal_convexity_constraints(mesh1_small)
    u = fem_core.interpolate(mesh1_small, 1, lambda x, y: 0.5 * (x * x + y * y))
    residuals = cs.residuals(u)
    assert cs.is_satisfied(u)
    edges = {e.index: e for e in mesh1_small.interior_edges()}
    for label, value in zip(cs.labels, residuals):
        edge = edges[int(label.split(":")[1])]
        expected = mesh1_small.h if _is_axis(edge.normal) else 0.0
        assert value == pytest.approx(expected, abs=1e-12)


def test_conformal_rows_detect_mixed_term(mesh1_small):
    cs = conformal_convexity_constraints(mesh1_small)
    u = fem_core.interpolate(mesh1_small, 1, lambda x, y: x * x + x * y + y * y)
    residuals = cs.residuals(u)
    edges = {e.index: e for e in mesh1_small.interior_edges()}
    diagonal = [r for label, r in zip(cs.labels, residuals) if not _is_axis(edges[int(label.split(":")[1])].normal)]
    assert diagonal
    assert np.allclose(diagonal, -math.sqrt(2.0) * mesh1_small.h, rtol=1e-10)
    assert not cs.is_satisfied(u)
    assert set(cs.violations(u)) == {i for i, label in enumerate(cs.labels)
                                     if not _is_axis(edges[int(label.split(":")[1])].normal)}


def test_conformal_p1_shape(mesh1_small):
    cs = conformal_convexity_constraints(mesh1_small)
    assert cs.num_rows == len(mesh1_small.interior_edges())
    assert cs.num_dofs == mesh1_small.num_vertices
    assert np.all(cs.row_nnz() <= 4)
    assert cs.metadata["mode"] == "conformal"


def test_conformal_p2_modes(mesh1_small):
    pointwise = conformal_convexity_constraints(mesh1_small, 2, "pointwise")
    integral = conformal_convexity_constraints(mesh1_small, 2, "integral")
    n_edges = len(mesh1_small.interior_edges())
    assert pointwise.num_rows == 2 * n_edges
    assert integral.num_rows == n_edges
    assert np.all(pointwise.row_nnz() <= 12)
    u = fem_core.interpolate(mesh1_small, 2, lambda x, y: 3.0 * x * x - x * y + y * y)
    assert np.max(np.abs(pointwise.residuals(u))) < 1e-10
    assert np.max(np.abs(integral.residuals(u))) < 1e-10
    with pytest.raises(InvalidArgumentError):
        conformal_convexity_constraints(mesh1_small, 2, "midpoint")


def test_p2_integral_row_matches_profile(mesh1_small):
    rng = np.random.default_rng(5)
    u = FEFunction(mesh1_small, 2, rng.normal(size=fem_core.dof_count(mesh1_small, 2)))
    cs = conformal_convexity_constraints(mesh1_small, 2, "integral")
    residuals = cs.residuals(u)
    for row, edge in enumerate(mesh1_small.interior_edges()):
        assert residuals[row] == pytest.approx(fem_core.gradient_jump(u, edge).integral(), abs=1e-10)


def test_weak_subharmonic_p1_rows_are_stencils():
    n = 4
    mesh = build_structured_mesh("mesh1", n)
    cs = weak_subharmonicity_constraints(mesh, 1, BasisKind.P1_VERTEX)
    assert cs.num_rows == (n - 1) ** 2
    c = 2 * (n + 1) + 2
    row = cs.A[cs.labels.index(f"node:{c}:trace")].toarray().ravel()
    assert row[c] == pytest.approx(-4.0)
    for nb in (c + 1, c - 1, c + n + 1, c - n - 1):
        assert row[nb] == pytest.approx(1.0)
    assert np.count_nonzero(row) == 5


def test_weak_subharmonic_p2_midpoint_rows(mesh1_small):
    h = mesh1_small.h
    cs = weak_subharmonicity_constraints(mesh1_small, 2, "p2-midpoint")
    u = fem_core.interpolate(mesh1_small, 2, lambda x, y: x * x + y * y)
    assert np.allclose(cs.residuals(u), 4.0 * h * h / 3.0, rtol=1e-10)
    affine = fem_core.interpolate(mesh1_small, 2, lambda x, y: x - y)
    assert np.max(np.abs(cs.residuals(affine))) < 1e-12


def test_test_kind_must_match_degree(mesh1_small):
    with pytest.raises(InvalidArgumentError):
        weak_subharmonicity_constraints(mesh1_small, 1, BasisKind.P2_MIDPOINT)
    with pytest.raises(InvalidArgumentError):
        weak_convexity_constraints(mesh1_small, 2, "p1-vertex")
    with pytest.raises(InvalidArgumentError):
        weak_subharmonicity_constraints(mesh1_small, 1, "p3-vertex")


def test_weak_convexity_rows_sum_to_trace(mesh1_small):
    diag = weak_convexity_constraints(mesh1_small, 1, BasisKind.P1_VERTEX)
    trace = weak_subharmonicity_constraints(mesh1_small, 1, BasisKind.P1_VERTEX)
    k = trace.num_rows
    assert diag.num_rows == 2 * k
    assert abs(diag.A[:k] + diag.A[k:] - trace.A).max() < 1e-12


def test_weak_convexity_residuals(unit_patch):
    u = fem_core.interpolate(unit_patch, 1, lambda x, y: x * x + y * y)
    residuals = weak_convexity_residuals(u, BasisKind.P1_VERTEX)
    center = int(np.flatnonzero(residuals.tests == 12)[0])
    assert residuals.pairs()[center] == pytest.approx((4.0, 4.0))
    assert residuals.is_convex()

    affine = fem_core.interpolate(unit_patch, 1, lambda x, y: x + 2.0 * y)
    flat = weak_convexity_residuals(affine, "p1-vertex")
    assert np.allclose(flat.trace, 0.0, atol=1e-12) and np.allclose(flat.det, 0.0, atol=1e-12)


def test_saddle_detected_by_midpoint_determinants(mesh1_small):
    u = fem_core.interpolate(mesh1_small, 2, lambda x, y: x * x - y * y)
    residuals = weak_convexity_residuals(u, BasisKind.P2_MIDPOINT)
    assert np.all(residuals.det < 0.0)
    assert residuals.negative_determinants().size == residuals.tests.size
    assert not residuals.is_convex()


def test_monopolist_rows():
    n = 4
    mesh = build_structured_mesh("mesh1", n, Rectangle(1.0, 1.0, 2.0, 2.0))
    cs = monopolist_constraints(mesh)
    assert cs.num_rows == (n + 1) ** 2 + 2 * 2 * n * n + len(mesh.interior_edges())
    assert cs.is_satisfied(fem_core.interpolate(mesh, 1, lambda x, y: x + y))

    residuals = cs.residuals(fem_core.interpolate(mesh, 1, lambda x, y: -x))
    grad_x = [r for label, r in zip(cs.labels, residuals) if label.endswith("grad-x")]
    assert np.allclose(grad_x, -1.0)


def test_constraints_for_mode(mesh1_small):
    assert constraints_for_mode(mesh1_small, 1, "none").num_rows == 0
    assert constraints_for_mode(mesh1_small, 2, "conformal", "integral").num_rows == len(mesh1_small.interior_edges())
    assert constraints_for_mode(mesh1_small, 2, "weak-subharmonic").metadata["test_kind"] == "p2-midpoint"
    assert constraints_for_mode(mesh1_small, 1, "weak-convex").metadata["mode"] == "weak-convex"
    assert constraints_for_mode(mesh1_small, 1, "monopolist").metadata["mode"] == "monopolist"
    with pytest.raises(InvalidArgumentError):
        constraints_for_mode(mesh1_small, 2, "monopolist")
    with pytest.raises(InvalidArgumentError):
        constraints_for_mode(mesh1_small, 1, "concave")


def test_constraint_set_helpers(mesh1_small):
    cs = conformal_convexity_constraints(mesh1_small)
    sub = cs.select(np.array([0, 2]))
    assert sub.labels == [cs.labels[0], cs.labels[2]]
    stacked = LinearConstraintSet.stack([cs, sub], mode="mixed")
    assert stacked.num_rows == cs.num_rows + 2
    with pytest.raises(InvalidArgumentError):
        LinearConstraintSet.stack([cs, LinearConstraintSet.empty(3)], mode="bad")
    with pytest.raises(InvalidArgumentError):
        LinearConstraintSet(sp.csr_matrix((2, 3)), ["only-one"])


# ----------------------------------------------------------------------
# Direction-pair certificates
# ----------------------------------------------------------------------

def test_pm_verify_examples():
    n1 = build_structured_mesh("mesh1", 4).normal_direction_set()
    n2 = build_structured_mesh("mesh2", 4).normal_direction_set()
    n3 = build_structured_mesh("mesh3", 4).normal_direction_set()

    ok, worst = pm_verify(n1, A_CANON, B_CANON)
    assert ok and worst == pytest.approx(0.0, abs=1e-15)
    assert sorted(np.round((n1 @ A_CANON) * (n1 @ B_CANON), 12)) == [0.0, 0.0, 0.5]

    assert pm_verify(n2, (1.0, 0.0), (0.0, 1.0))[0]
    ok, worst = pm_verify(n1, (1.0, 0.0), (0.0, 1.0))
    assert not ok and worst == pytest.approx(-0.5)
    assert pm_verify(n3, (1.0, 0.0), (S, -S))[0]


def test_pm_verify_rejects_bad_vectors():
    normals = [(1.0, 0.0)]
    with pytest.raises(InvalidArgumentError):
        pm_verify(normals, (2.0, 0.0), (0.0, 1.0))
    with pytest.raises(DegenerateDirectionsError):
        pm_verify(normals, (1.0, 0.0), (-1.0, 0.0))


@pytest.mark.parametrize("kind", ["mesh1", "mesh2", "mesh3", "mesh4"])
def test_pm_find_vectors_on_every_family(kind):
    normals = build_structured_mesh(kind, 8).normal_direction_set()
    cert = pm_find_vectors(normals)
    assert cert is not None
    assert cert.worst >= -1e-12
    ok, worst = pm_verify(normals, cert.a, cert.b)
    assert ok and worst == pytest.approx(cert.worst)
    assert cert.cone[1] > cert.cone[0]


def test_pm_find_vectors_single_normal():
    cert = pm_find_vectors([(0.0, 1.0)])
    assert cert is not None
    assert abs(cert.a[0] * cert.b[1] - cert.a[1] * cert.b[0]) > 1e-6
    assert pm_verify([(0.0, 1.0)], cert.a, cert.b)[0]


def test_audit_mesh_on_subregion():
    audit = audit_mesh(build_structured_mesh("mesh4", 8), Rectangle(0.0, 0.0, 0.5, 0.5))
    assert audit.found
    assert len(audit.normals) > 0


def test_lemma2_matrix_on_random_pairs():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        ta, tb = rng.uniform(0.0, 2.0 * math.pi, size=2)
        a = np.array([math.cos(ta), math.sin(ta)])
        b = np.array([math.cos(tb), math.sin(tb)])
        if abs(a[0] * b[1] - a[1] * b[0]) < 0.05:
            continue
        q = lemma2_matrix(a, b, 1.0)
        assert np.linalg.eigvalsh(q.C).min() > 0.0
        assert q.mixed_derivative <= -1.0 + 1e-12
        assert np.allclose(q.C @ q.C_inv, np.eye(2), atol=1e-8)
        checked += 1


def test_lemma2_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        lemma2_matrix(A_CANON, B_CANON, 0.0)
    with pytest.raises(DegenerateDirectionsError):
        lemma2_matrix((1.0, 0.0), (2.0, 0.0), 1.0)


def test_difference_quotient_of_adversarial_quadratic_is_constant():
    q = lemma2_matrix(A_CANON, B_CANON, 1.0, Rectangle(0.0, 0.0, 1.0, 1.0))
    rng = np.random.default_rng(7)
    values = []
    for _ in range(100):
        a0, b0 = rng.uniform(0.05, 0.3, size=2)
        base = (rng.uniform(0.35, 1.0), rng.uniform(0.0, 0.65))
        dq = DifferenceQuotient(base, a0, b0, A_CANON, B_CANON)
        values.append(difference_quotient(q.u_exact, dq, Rectangle(0.0, 0.0, 1.0, 1.0)))
    assert max(values) - min(values) < 1e-10
    assert values[0] == pytest.approx(q.mixed_derivative, abs=1e-10)
    assert q.u_exact(0.0, 0.0) == pytest.approx(0.0)


def test_difference_quotient_simple_cases():
    dq = DifferenceQuotient((0.2, 0.3), 0.1, 0.2, (1.0, 0.0), (0.0, 1.0))
    assert difference_quotient(lambda x, y: x * y, dq) == pytest.approx(1.0)
    assert difference_quotient(lambda x, y: 1.0 + x - y, dq) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(OutOfDomainError):
        difference_quotient(lambda x, y: x * y, DifferenceQuotient((0.95, 0.5), 0.1, 0.1, (1.0, 0.0), (0.0, 1.0)),
                            Rectangle(0.0, 0.0, 1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        DifferenceQuotient((0.2, 0.3), 0.0, 0.2, (1.0, 0.0), (0.0, 1.0))


def test_edge_pairing_matches_volume_pairing():
    mesh = build_structured_mesh("mesh4", 4)
    rng = np.random.default_rng(11)
    u = FEFunction(mesh, 1, rng.normal(size=mesh.num_vertices))
    phi = fem_core.interpolate(mesh, 1, lambda x, y: x * (1.0 - x) * y * (1.0 - y))
    a, b = (S, S), (1.0, 0.0)
    volume = fem_core.directional_pairing(u, a, b, phi)
    edges = edge_jump_pairing(u, a, b, phi)
    assert edges == pytest.approx(volume, rel=1e-10, abs=1e-12)


def test_mixed_derivative_sign_audit(mesh1_small):
    convex = fem_core.interpolate(mesh1_small, 1, lambda x, y: 0.5 * (x * x + y * y))
    assert conformal_convexity_constraints(mesh1_small).is_satisfied(convex)
    assert mixed_derivative_sign_audit(convex, A_CANON, B_CANON).all_nonnegative()

    q = lemma2_matrix(A_CANON, B_CANON, 1.0, mesh1_small.domain)
    witness = fem_core.interpolate(mesh1_small, 1, q.u_exact)
    audit = mixed_derivative_sign_audit(witness, A_CANON, B_CANON)
    assert audit.min_value < 0.0
    assert not audit.all_nonnegative()

    with pytest.raises(InvalidArgumentError):
        mixed_derivative_sign_audit(convex, A_CANON, B_CANON, bumps=np.array([0]))
