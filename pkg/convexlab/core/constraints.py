#!/usr/bin/env python3

"""
Linear constraint sets for convexity-type conditions.
Conformal convexity (gradient jumps), weak subharmonicity and weak
convexity (weak Hessian rows), the monopolist admissible set, the
direction-pair certificate search on edge normals, the adversarial
quadratic built against such a pair and the mixed difference quotient.

Part of the ConvexLab project.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from convexlab.core import fem_core
from convexlab.core.errors import (
    DegenerateDirectionsError,
    InvalidArgumentError,
    OutOfDomainError,
)
from convexlab.core.fem_core import BasisKind, FEFunction
from convexlab.core.mesh import Mesh, Rectangle, normal_direction_set
from convexlab.core.quadrature import EDGE_NODES, EDGE_WEIGHTS

# Configure logging
logger = logging.getLogger('constraints')

SATISFACTION_TOL = 1e-9
PRUNE_REL_TOL = 1e-13
MAX_ROW_NNZ = 12
PM_TOL = 1e-12
DIRECTION_DET_TOL = 1e-10

JUMP_MODES = ("pointwise", "integral")


@dataclass
class LinearConstraintSet:
    """Rows of A . u >= 0 over the dofs of one FE space."""
    A: sp.csr_matrix
    labels: List[str]
    degree: int = 1
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        if self.A.shape[0] != len(self.labels):
            raise InvalidArgumentError(f"{self.A.shape[0]} rows but {len(self.labels)} labels")

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_dofs(self) -> int:
        return self.A.shape[1]

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.A.indptr)

    def residuals(self, u: Union[FEFunction, np.ndarray]) -> np.ndarray:
        dofs = u.dofs if isinstance(u, FEFunction) else np.asarray(u, dtype=float)
        return self.A @ dofs

    def violations(self, u: Union[FEFunction, np.ndarray], tol: float = SATISFACTION_TOL) -> np.ndarray:
        """Indices of rows with A . u < -tol."""
        return np.flatnonzero(self.residuals(u) < -tol)

    def is_satisfied(self, u: Union[FEFunction, np.ndarray], tol: float = SATISFACTION_TOL) -> bool:
        return self.violations(u, tol).size == 0

    def select(self, rows: np.ndarray) -> "LinearConstraintSet":
        rows = np.asarray(rows, dtype=np.int64)
        return LinearConstraintSet(self.A[rows], [self.labels[r] for r in rows], self.degree, dict(self.metadata))

    @classmethod
    def empty(cls, num_dofs: int, degree: int = 1) -> "LinearConstraintSet":
        return cls(sp.csr_matrix((0, num_dofs)), [], degree, {"mode": "none"})

    @classmethod
    def stack(cls, sets: Sequence["LinearConstraintSet"], mode: str) -> "LinearConstraintSet":
        if not sets:
            raise InvalidArgumentError("Nothing to stack")
        if len({s.num_dofs for s in sets}) != 1:
            raise InvalidArgumentError("Constraint sets act on different spaces")
        labels = [label for s in sets for label in s.labels]
        return cls(sp.vstack([s.A for s in sets]).tocsr(), labels, sets[0].degree, {"mode": mode})


def _finish(rows: List[Dict[int, float]], labels: List[str], num_dofs: int, degree: int,
            metadata: Dict[str, Any]) -> LinearConstraintSet:
    """Prune round-off entries, drop empty rows and build the sparse set."""
    indptr, indices, data, kept_labels = [0], [], [], []
    dropped = 0
    for row, label in zip(rows, labels):
        if not row:
            dropped += 1
            continue
        scale = max(abs(v) for v in row.values())
        entries = sorted((c, v) for c, v in row.items() if abs(v) > PRUNE_REL_TOL * scale)
        if scale == 0.0 or not entries:
            dropped += 1
            continue
        indices.extend(c for c, _ in entries)
        data.extend(v for _, v in entries)
        indptr.append(len(indices))
        kept_labels.append(label)
    if dropped:
        logger.warning(f"Dropped {dropped} empty constraint rows")
    A = sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)),
                      shape=(len(kept_labels), num_dofs))
    result = LinearConstraintSet(A, kept_labels, degree, metadata)
    widest = int(result.row_nnz().max()) if result.num_rows else 0
    if widest > MAX_ROW_NNZ:
        logger.warning(f"Constraint rows reach {widest} nonzeros (local stencils usually stay within {MAX_ROW_NNZ})")
    return result


def _csr_rows(matrix: sp.csr_matrix) -> List[Dict[int, float]]:
    matrix = matrix.tocsr()
    return [dict(zip(matrix.indices[matrix.indptr[r]:matrix.indptr[r + 1]].tolist(),
                     matrix.data[matrix.indptr[r]:matrix.indptr[r + 1]].tolist()))
            for r in range(matrix.shape[0])]


def conformal_convexity_constraints(mesh: Mesh, degree: int = 1, mode: str = "pointwise") -> LinearConstraintSet:
    """
    One gradient-jump row per interior edge (P1), or per edge end / edge
    integral (P2).

    Args:
        mesh: Source mesh
        degree: 1 or 2
        mode: P2 only, "pointwise" (both edge ends) or "integral"
    """
    if mode not in JUMP_MODES:
        raise InvalidArgumentError(f"Unknown jump mode {mode!r}")
    rows: List[Dict[int, float]] = []
    labels: List[str] = []
    for edge in mesh.interior_edges():
        if degree == 1:
            rows.append(fem_core.jump_row(mesh, 1, edge))
            labels.append(f"edge:{edge.index}:jump")
            continue
        ends = [fem_core.jump_row(mesh, 2, edge, mesh.vertices[v]) for v in edge.endpoints]
        if mode == "pointwise":
            rows.extend(ends)
            labels.extend([f"edge:{edge.index}:jump@start", f"edge:{edge.index}:jump@end"])
        else:
            merged: Dict[int, float] = {}
            for end in ends:
                for c, v in end.items():
                    merged[c] = merged.get(c, 0.0) + 0.5 * edge.length * v
            rows.append(merged)
            labels.append(f"edge:{edge.index}:jump-integral")
    num_dofs = fem_core.dof_count(mesh, degree)
    return _finish(rows, labels, num_dofs, degree, {"mode": "conformal", "jump_mode": mode})


def _check_test_kind(degree: int, test_kind: Union[str, BasisKind]) -> BasisKind:
    kind = BasisKind.parse(test_kind)
    if kind.degree != degree:
        raise InvalidArgumentError(f"Test kind {kind.value} does not pair with P{degree}")
    return kind


def weak_subharmonicity_constraints(mesh: Mesh, degree: int, test_kind: Union[str, BasisKind]) -> LinearConstraintSet:
    """Rows trace<D^2 u_h, phi> >= 0 for every admissible test function."""
    kind = _check_test_kind(degree, test_kind)
    tests, ops = fem_core.weak_hessian_operators(mesh, degree, kind)
    trace = ops[(0, 0)] + ops[(1, 1)]
    prefix = "edge" if kind is BasisKind.P2_MIDPOINT else "node"
    labels = [f"{prefix}:{t}:trace" for t in tests]
    metadata = {"mode": "weak-subharmonic", "test_kind": kind.value, "consistent": kind is not BasisKind.P2_VERTEX}
    if kind is BasisKind.P2_VERTEX:
        logger.warning("P2 vertex trace rows do not approximate the Laplacian; emitted for consistency checks only")
    return _finish(_csr_rows(trace), labels, fem_core.dof_count(mesh, degree), degree, metadata)


def weak_convexity_constraints(mesh: Mesh, degree: int, test_kind: Union[str, BasisKind]) -> LinearConstraintSet:
    """Linear part of weak convexity: both diagonal entries of every weak Hessian are nonnegative."""
    kind = _check_test_kind(degree, test_kind)
    tests, ops = fem_core.weak_hessian_operators(mesh, degree, kind)
    prefix = "edge" if kind is BasisKind.P2_MIDPOINT else "node"
    rows = _csr_rows(ops[(0, 0)]) + _csr_rows(ops[(1, 1)])
    labels = [f"{prefix}:{t}:hxx" for t in tests] + [f"{prefix}:{t}:hyy" for t in tests]
    metadata = {"mode": "weak-convex", "test_kind": kind.value}
    return _finish(rows, labels, fem_core.dof_count(mesh, degree), degree, metadata)


@dataclass(frozen=True)
class WeakConvexityResiduals:
    """Per-test trace and determinant of the weak Hessian."""
    tests: np.ndarray
    trace: np.ndarray
    det: np.ndarray

    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.trace.tolist(), self.det.tolist()))

    def is_convex(self, tol: float = SATISFACTION_TOL) -> bool:
        return bool(np.all(self.trace >= -tol) and np.all(self.det >= -tol))

    def negative_determinants(self, tol: float = SATISFACTION_TOL) -> np.ndarray:
        return self.tests[self.det < -tol]


def weak_convexity_residuals(u: FEFunction, test_kind: Union[str, BasisKind]) -> WeakConvexityResiduals:
    """Trace and determinant of the weak Hessian of ``u`` for every admissible test."""
    kind = _check_test_kind(u.degree, test_kind)
    tests, ops = fem_core.weak_hessian_operators(u.mesh, u.degree, kind)
    hxx = ops[(0, 0)] @ u.dofs
    hxy = ops[(0, 1)] @ u.dofs
    hyx = ops[(1, 0)] @ u.dofs
    hyy = ops[(1, 1)] @ u.dofs
    return WeakConvexityResiduals(tests, hxx + hyy, hxx * hyy - hxy * hyx)


def monopolist_constraints(mesh: Mesh) -> LinearConstraintSet:
    """u >= 0 at nodes, u_x >= 0 and u_y >= 0 per triangle, and all P1 jumps >= 0."""
    rows: List[Dict[int, float]] = []
    labels: List[str] = []
    for v in range(mesh.num_vertices):
        rows.append({v: 1.0})
        labels.append(f"node:{v}:value")
    grads = fem_core.barycentric_gradients(mesh)
    for axis, name in ((0, "grad-x"), (1, "grad-y")):
        for t, tri in enumerate(mesh.triangles):
            rows.append({int(v): float(g) for v, g in zip(tri, grads[t, :, axis])})
            labels.append(f"tri:{t}:{name}")
    nodal_and_gradient = _finish(rows, labels, mesh.num_vertices, 1, {"mode": "monopolist"})
    jumps = conformal_convexity_constraints(mesh, 1)
    return LinearConstraintSet.stack([nodal_and_gradient, jumps], mode="monopolist")


def constraints_for_mode(mesh: Mesh, degree: int, mode: str, jump_mode: str = "pointwise") -> LinearConstraintSet:
    """Constraint set selected by a mode name."""
    if mode == "none":
        return LinearConstraintSet.empty(fem_core.dof_count(mesh, degree), degree)
    if mode == "conformal":
        return conformal_convexity_constraints(mesh, degree, jump_mode)
    kind = BasisKind.P1_VERTEX if degree == 1 else BasisKind.P2_MIDPOINT
    if mode == "weak-subharmonic":
        return weak_subharmonicity_constraints(mesh, degree, kind)
    if mode == "weak-convex":
        return weak_convexity_constraints(mesh, degree, kind)
    if mode == "monopolist":
        if degree != 1:
            raise InvalidArgumentError("The monopolist set is defined for P1 only")
        return monopolist_constraints(mesh)
    raise InvalidArgumentError(f"Unknown constraint mode {mode!r}")


# ----------------------------------------------------------------------
# Direction-pair certificates
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PMCertificate:
    """Independent unit vectors a, b with (n.a)(n.b) >= 0 for every normal n."""
    a: np.ndarray
    b: np.ndarray
    worst: float
    cone: Tuple[float, float]


def _unit(v: Sequence[float], name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = float(np.hypot(v[0], v[1]))
    if norm == 0.0:
        raise InvalidArgumentError(f"{name} must be nonzero")
    return v / norm


def _check_independent(a: np.ndarray, b: np.ndarray) -> None:
    if abs(a[0] * b[1] - a[1] * b[0]) < DIRECTION_DET_TOL:
        raise DegenerateDirectionsError(f"Directions {a.tolist()} and {b.tolist()} are dependent")


def pm_verify(normals: Sequence[Sequence[float]], a: Sequence[float], b: Sequence[float]) -> Tuple[bool, float]:
    """
    Check the certificate on every normal.

    Returns:
        (min product >= -1e-12, min product)
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.norm(a) - 1.0) > 1e-9 or abs(np.linalg.norm(b) - 1.0) > 1e-9:
        raise InvalidArgumentError("Certificate vectors must be unit vectors")
    _check_independent(a, b)
    n = np.atleast_2d(np.asarray(normals, dtype=float))
    if n.size == 0:
        raise InvalidArgumentError("No normals to verify against")
    products = (n @ a) * (n @ b)
    worst = float(products.min())
    return worst >= -PM_TOL, worst


def pm_find_vectors(normals: Sequence[Sequence[float]]) -> Optional[PMCertificate]:
    """
    Place a and b at one and two thirds of the widest angular gap between
    the lines {x : n.x = 0}.

    Returns None only when no cone has positive width, which cannot happen
    for finitely many normals.
    """
    n = np.atleast_2d(np.asarray(normals, dtype=float))
    if n.size == 0:
        raise InvalidArgumentError("Empty normal set")
    line_angles = np.sort(np.mod(np.arctan2(n[:, 1], n[:, 0]) + 0.5 * math.pi, math.pi))
    unique = [line_angles[0]]
    for angle in line_angles[1:]:
        if angle - unique[-1] > 1e-10:
            unique.append(angle)
    if len(unique) > 1 and unique[0] + math.pi - unique[-1] <= 1e-10:
        unique.pop()
    unique = np.array(unique)

    gaps = np.append(np.diff(unique), unique[0] + math.pi - unique[-1])
    widest = int(np.argmax(gaps))
    width = float(gaps[widest])
    if width <= 1e-10:
        return None
    start = float(unique[widest])
    theta_a = start + width / 3.0
    theta_b = start + 2.0 * width / 3.0
    a = np.array([math.cos(theta_a), math.sin(theta_a)])
    b = np.array([math.cos(theta_b), math.sin(theta_b)])
    _, worst = pm_verify(n, a, b)
    logger.debug(f"Cone [{start:.6f}, {start + width:.6f}] gives a={a.tolist()}, b={b.tolist()}, worst={worst:.3e}")
    return PMCertificate(a, b, worst, (start, start + width))


@dataclass(frozen=True)
class PMAudit:
    normals: np.ndarray
    certificate: Optional[PMCertificate]

    @property
    def found(self) -> bool:
        return self.certificate is not None and self.certificate.worst >= -PM_TOL


def audit_mesh(mesh: Mesh, region: Optional[Rectangle] = None) -> PMAudit:
    """Normal-direction set of a region and its certificate."""
    normals = normal_direction_set(mesh, region)
    certificate = pm_find_vectors(normals)
    return PMAudit(normals, certificate)


# ----------------------------------------------------------------------
# Adversarial quadratic and difference quotients
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class AdversarialQuadratic:
    """
    u(x) = x'C^-1 x / 2 - x0'C^-1 x0 / 2, vanishing at the anchor x0,
    whose mixed (a, b) derivative a'C^-1 b is at most -eta.
    """
    C: np.ndarray
    C_inv: np.ndarray
    a: np.ndarray
    b: np.ndarray
    eta: float
    anchor: np.ndarray

    @property
    def mixed_derivative(self) -> float:
        return float(self.a @ self.C_inv @ self.b)

    def u_exact(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        m = self.C_inv
        x0, y0 = self.anchor
        quad = 0.5 * (m[0, 0] * x * x + 2.0 * m[0, 1] * x * y + m[1, 1] * y * y)
        offset = 0.5 * (m[0, 0] * x0 * x0 + 2.0 * m[0, 1] * x0 * y0 + m[1, 1] * y0 * y0)
        return quad - offset

    def gradient(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        m = self.C_inv
        return m[0, 0] * x + m[0, 1] * y, m[1, 0] * x + m[1, 1] * y


def lemma2_matrix(a: Sequence[float], b: Sequence[float], eta: float,
                  domain: Optional[Rectangle] = None) -> AdversarialQuadratic:
    """
    SPD matrix C whose inverse has mixed (a, b) entry -2*eta.

    C^-1 has eigenvectors e1 = (a + b)/|a + b| and e2 = rot90(e1), with
    eigenvalues eta and (eta*a1*b1 + 2*eta)/|a2*b2| in that basis.
    """
    if not eta > 0.0:
        raise InvalidArgumentError(f"eta must be positive, got {eta!r}")
    a = _unit(a, "a")
    b = _unit(b, "b")
    _check_independent(a, b)

    e1 = _unit(a + b, "a + b")
    e2 = np.array([-e1[1], e1[0]])
    a1, a2 = float(a @ e1), float(a @ e2)
    b1, b2 = float(b @ e1), float(b @ e2)
    lam1 = float(eta)
    lam2 = (lam1 * a1 * b1 + 2.0 * eta) / abs(a2 * b2)

    basis = np.column_stack([e1, e2])
    C_inv = basis @ np.diag([lam1, lam2]) @ basis.T
    C = basis @ np.diag([1.0 / lam1, 1.0 / lam2]) @ basis.T
    C_inv = 0.5 * (C_inv + C_inv.T)
    C = 0.5 * (C + C.T)

    anchor = domain.lower_left if domain is not None else np.array([1.0, 1.0])
    result = AdversarialQuadratic(C, C_inv, a, b, float(eta), anchor)
    logger.debug(f"Adversarial quadratic: C^-1={C_inv.tolist()}, a'C^-1 b={result.mixed_derivative:.6g}")
    return result


@dataclass(frozen=True)
class DifferenceQuotient:
    """Mixed second difference at ``base`` with steps alpha0 along a and beta0 along b."""
    base: Tuple[float, float]
    alpha0: float
    beta0: float
    a: Tuple[float, float]
    b: Tuple[float, float]

    def __post_init__(self):
        if not (self.alpha0 > 0.0 and self.beta0 > 0.0):
            raise InvalidArgumentError("Steps must be positive")
        a = _unit(self.a, "a")
        b = _unit(self.b, "b")
        _check_independent(a, b)

    def sample_points(self) -> np.ndarray:
        x = np.asarray(self.base, dtype=float)
        a = _unit(self.a, "a")
        b = _unit(self.b, "b")
        return np.array([
            x + self.alpha0 * a + self.beta0 * b,
            x + self.alpha0 * a,
            x + self.beta0 * b,
            x,
        ])


def difference_quotient(u: Callable[[np.ndarray, np.ndarray], Any], q: DifferenceQuotient,
                        domain: Optional[Rectangle] = None) -> float:
    """(u(x+a0 a+b0 b) - u(x+a0 a) - u(x+b0 b) + u(x)) / (a0 b0)."""
    points = q.sample_points()
    if domain is not None:
        for p in points:
            if not domain.contains(p, tol=1e-12):
                raise OutOfDomainError(f"Sample point {p.tolist()} lies outside {domain}")
    values = fem_core.evaluate_field(u, points)
    return float((values[0] - values[1] - values[2] + values[3]) / (q.alpha0 * q.beta0))


# ----------------------------------------------------------------------
# Edge pairings
# ----------------------------------------------------------------------

def edge_jump_pairing(u: FEFunction, a: Sequence[float], b: Sequence[float], phi: FEFunction) -> float:
    """Sum over interior edges of jump (n.a)(n.b) times the edge integral of phi."""
    if u.degree != 1:
        raise InvalidArgumentError("Edge pairing is defined for P1 functions")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mesh = u.mesh
    total = 0.0
    for edge in mesh.interior_edges():
        jump = fem_core.gradient_jump(u, edge).value
        weight = float(edge.normal @ a) * float(edge.normal @ b)
        if jump == 0.0 or weight == 0.0:
            continue
        p0, p1 = mesh.vertices[edge.endpoints[0]], mesh.vertices[edge.endpoints[1]]
        points = p0[None, :] + EDGE_NODES[:, None] * (p1 - p0)[None, :]
        phi_values = fem_core.evaluate_in_triangle(phi, edge.tri1, points)
        total += jump * weight * edge.length * float(EDGE_WEIGHTS @ phi_values)
    return total


@dataclass(frozen=True)
class MixedDerivativeAudit:
    """Pairings of the mixed (a, b) derivative of u_h with nonnegative bumps."""
    bumps: np.ndarray
    values: np.ndarray

    @property
    def min_value(self) -> float:
        return float(self.values.min()) if self.values.size else 0.0

    def all_nonnegative(self, tol: float = SATISFACTION_TOL) -> bool:
        return bool(np.all(self.values >= -tol))


def mixed_derivative_sign_audit(u: FEFunction, a: Sequence[float], b: Sequence[float],
                                bumps: Optional[np.ndarray] = None) -> MixedDerivativeAudit:
    """
    Pair the mixed derivative of a P1 function with interior P1 hat
    functions (all of them unless ``bumps`` lists vertex ids).
    """
    if u.degree != 1:
        raise InvalidArgumentError("The sign audit is defined for P1 functions")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mesh = u.mesh
    if bumps is None:
        bumps = fem_core.admissible_tests(mesh, BasisKind.P1_VERTEX)
    bumps = np.asarray(bumps, dtype=np.int64)
    if np.any(mesh.boundary_vertex_mask[bumps]):
        raise InvalidArgumentError("Bumps must vanish on the boundary")
    products = fem_core.assemble_gradient_products(mesh, 1, 1)
    operator = sum(a[i] * b[j] * products[(i, j)] for i in range(2) for j in range(2))
    values = -(operator @ u.dofs)[bumps]
    return MixedDerivativeAudit(bumps, values)
