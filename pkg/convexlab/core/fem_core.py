#!/usr/bin/env python3

"""
P1/P2 Lagrange elements on triangles.
Interpolation, per-triangle gradients, gradient jumps across interior
edges, weak discrete Hessians and the stiffness/mass/load assembly.

P2 local dof order is v0, v1, v2, then the midpoints of the local edges
(0,1), (1,2), (2,0). Global P2 dofs are all vertices followed by all
edges in the mesh's (min vertex, max vertex) edge order.

Part of the ConvexLab project.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from convexlab.core.errors import BoundaryTestFunctionError, InvalidArgumentError, OutOfTriangleError
from convexlab.core.mesh import InteriorEdge, Mesh
from convexlab.core.quadrature import EDGE_MIDPOINT_RULE, SIX_POINT_RULE, TriangleRule, rule_for_degree

# Configure logging
logger = logging.getLogger('fem_core')

BARYCENTRIC_TOL = 1e-10

ScalarField = Callable[[np.ndarray, np.ndarray], Union[np.ndarray, float]]


class BasisKind(str, Enum):
    """Test-function families for weak Hessians."""
    P1_VERTEX = "p1-vertex"
    P2_VERTEX = "p2-vertex"
    P2_MIDPOINT = "p2-midpoint"

    @property
    def degree(self) -> int:
        return 1 if self is BasisKind.P1_VERTEX else 2

    @classmethod
    def parse(cls, value: Union[str, "BasisKind"]) -> "BasisKind":
        if isinstance(value, BasisKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidArgumentError(f"Unknown test kind: {value!r}") from None


@dataclass(frozen=True)
class BasisFunction:
    """Test basis function: a vertex id, or an edge id for midpoint kinds."""
    kind: BasisKind
    index: int


def _check_degree(degree: int) -> int:
    if degree not in (1, 2):
        raise InvalidArgumentError(f"degree must be 1 or 2, got {degree!r}")
    return int(degree)


def dof_count(mesh: Mesh, degree: int) -> int:
    degree = _check_degree(degree)
    return mesh.num_vertices if degree == 1 else mesh.num_vertices + mesh.num_edges


def element_dofs(mesh: Mesh, degree: int) -> np.ndarray:
    """Global dof indices per triangle, (nt, 3) for P1 and (nt, 6) for P2."""
    if _check_degree(degree) == 1:
        return np.asarray(mesh.triangles)
    return np.hstack([mesh.triangles, mesh.triangle_edges + mesh.num_vertices])


def dof_coordinates(mesh: Mesh, degree: int) -> np.ndarray:
    if _check_degree(degree) == 1:
        return np.asarray(mesh.vertices)
    return np.vstack([mesh.vertices, mesh.edge_midpoints()])


def boundary_dof_mask(mesh: Mesh, degree: int) -> np.ndarray:
    if _check_degree(degree) == 1:
        return mesh.boundary_vertex_mask.copy()
    return np.concatenate([mesh.boundary_vertex_mask, mesh.boundary_edge_mask])


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """(nt, 3, 2) constant gradients of the barycentric coordinates."""
    p = mesh.vertices[mesh.triangles]
    x0, y0 = p[:, 0, 0], p[:, 0, 1]
    x1, y1 = p[:, 1, 0], p[:, 1, 1]
    x2, y2 = p[:, 2, 0], p[:, 2, 1]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    grads = np.empty((mesh.num_triangles, 3, 2))
    grads[:, 0, 0] = y1 - y2
    grads[:, 0, 1] = x2 - x1
    grads[:, 1, 0] = y2 - y0
    grads[:, 1, 1] = x0 - x2
    grads[:, 2, 0] = y0 - y1
    grads[:, 2, 1] = x1 - x0
    return grads / det[:, None, None]


def shape_values(degree: int, lam: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points, (k, 3) -> (k, nloc)."""
    lam = np.atleast_2d(lam)
    if degree == 1:
        return lam.copy()
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


def shape_gradients(degree: int, lam: np.ndarray, grad_lam: np.ndarray) -> np.ndarray:
    """
    Basis gradients at barycentric points.

    Args:
        degree: 1 or 2
        lam: (k, 3) barycentric points
        grad_lam: (nt, 3, 2) barycentric gradients

    Returns:
        (nt, k, nloc, 2) array
    """
    lam = np.atleast_2d(lam)
    nt, k = grad_lam.shape[0], lam.shape[0]
    if degree == 1:
        return np.broadcast_to(grad_lam[:, None, :, :], (nt, k, 3, 2)).copy()
    g0, g1, g2 = grad_lam[:, None, 0, :], grad_lam[:, None, 1, :], grad_lam[:, None, 2, :]
    l0, l1, l2 = (lam[None, :, i, None] for i in range(3))
    return np.stack([
        (4 * l0 - 1) * g0,
        (4 * l1 - 1) * g1,
        (4 * l2 - 1) * g2,
        4 * (l0 * g1 + l1 * g0),
        4 * (l1 * g2 + l2 * g1),
        4 * (l2 * g0 + l0 * g2),
    ], axis=2)


def evaluate_field(f: ScalarField, points: np.ndarray) -> np.ndarray:
    """Evaluate a vectorized f(x, y) on (k, 2) points."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(f(points[:, 0], points[:, 1]), dtype=float)
    return np.broadcast_to(values, (len(points),)).copy()


class FEFunction:
    """Lagrange finite element function of degree 1 or 2 on a mesh."""

    def __init__(self, mesh: Mesh, degree: int, dofs: np.ndarray):
        degree = _check_degree(degree)
        dofs = np.asarray(dofs, dtype=float)
        expected = dof_count(mesh, degree)
        if dofs.shape != (expected,):
            raise InvalidArgumentError(f"Expected {expected} dofs for P{degree}, got shape {dofs.shape}")
        self.mesh = mesh
        self.degree = degree
        self.dofs = dofs

    def __repr__(self) -> str:
        return f"FEFunction(P{self.degree}, ndofs={len(self.dofs)})"

    def _combine(self, other: "FEFunction", sign: float) -> "FEFunction":
        if other.mesh is not self.mesh or other.degree != self.degree:
            raise InvalidArgumentError("FE functions live in different spaces")
        return FEFunction(self.mesh, self.degree, self.dofs + sign * other.dofs)

    def __add__(self, other: "FEFunction") -> "FEFunction":
        return self._combine(other, 1.0)

    def __sub__(self, other: "FEFunction") -> "FEFunction":
        return self._combine(other, -1.0)

    def __mul__(self, scalar: float) -> "FEFunction":
        return FEFunction(self.mesh, self.degree, float(scalar) * self.dofs)

    __rmul__ = __mul__

    def values_on_rule(self, rule: TriangleRule) -> np.ndarray:
        """(nt, k) values at the rule's points of every triangle."""
        local = self.dofs[element_dofs(self.mesh, self.degree)]
        return local @ shape_values(self.degree, rule.barycentric).T

    def gradients_on_rule(self, rule: TriangleRule) -> np.ndarray:
        """(nt, k, 2) gradients at the rule's points of every triangle."""
        local = self.dofs[element_dofs(self.mesh, self.degree)]
        grads = shape_gradients(self.degree, rule.barycentric, barycentric_gradients(self.mesh))
        return np.einsum('tb,tkbd->tkd', local, grads)


def interpolate(mesh: Mesh, degree: int, f: ScalarField) -> FEFunction:
    """Nodal interpolant: f at vertices (and at edge midpoints for P2)."""
    return FEFunction(mesh, degree, evaluate_field(f, dof_coordinates(mesh, degree)))


def barycentric_coordinates(mesh: Mesh, tri: int, point: Sequence[float]) -> np.ndarray:
    grads = barycentric_gradients_of(mesh, tri)
    centroid = mesh.centroids[tri]
    return 1.0 / 3.0 + grads @ (np.asarray(point, dtype=float) - centroid)


def barycentric_gradients_of(mesh: Mesh, tri: int) -> np.ndarray:
    p = mesh.vertices[mesh.triangles[tri]]
    (x0, y0), (x1, y1), (x2, y2) = p
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    return np.array([[y1 - y2, x2 - x1], [y2 - y0, x0 - x2], [y0 - y1, x1 - x0]]) / det


def local_gradients(mesh: Mesh, degree: int, tri: int, point: Optional[Sequence[float]] = None) -> np.ndarray:
    """(nloc, 2) gradients of the local basis of ``tri`` at ``point``."""
    grads = barycentric_gradients_of(mesh, tri)
    if degree == 1:
        return grads
    if point is None:
        raise InvalidArgumentError("P2 gradients need an evaluation point")
    lam = barycentric_coordinates(mesh, tri, point)
    if np.any(lam < -BARYCENTRIC_TOL):
        raise OutOfTriangleError(f"Point {tuple(point)} lies outside triangle {tri}")
    return shape_gradients(2, lam[None, :], grads[None])[0, 0]


def triangle_gradient(u: FEFunction, tri: int, point: Optional[Sequence[float]] = None) -> np.ndarray:
    """Exact gradient of the local polynomial; ``point`` is ignored for P1."""
    local = u.dofs[element_dofs(u.mesh, u.degree)[tri]]
    return local @ local_gradients(u.mesh, u.degree, tri, point)


def evaluate_in_triangle(u: FEFunction, tri: int, points: np.ndarray) -> np.ndarray:
    """Values of the local polynomial of ``tri`` at (k, 2) points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lam = np.array([barycentric_coordinates(u.mesh, tri, p) for p in points])
    if np.any(lam < -BARYCENTRIC_TOL):
        raise OutOfTriangleError(f"Point outside triangle {tri}")
    local = u.dofs[element_dofs(u.mesh, u.degree)[tri]]
    return shape_values(u.degree, lam) @ local


def triangle_gradients(u: FEFunction) -> np.ndarray:
    """(nt, 2) constant gradients of a P1 function."""
    if u.degree != 1:
        raise InvalidArgumentError("Constant per-triangle gradients need a P1 function")
    return np.einsum('tb,tbd->td', u.dofs[u.mesh.triangles], barycentric_gradients(u.mesh))


@dataclass(frozen=True)
class JumpProfile:
    """
    Normal gradient jump (q2 - q1).n along an interior edge.
    Arclength runs from the lower-index endpoint (s = 0) to the other (s = length).
    """
    edge: int
    degree: int
    start: float
    end: float
    length: float

    @property
    def value(self) -> float:
        """Constant P1 jump."""
        if self.degree != 1:
            raise InvalidArgumentError("A P2 jump is affine; use at(s)")
        return self.start

    def at(self, s: float) -> float:
        t = s / self.length
        return (1.0 - t) * self.start + t * self.end

    def integral(self) -> float:
        return 0.5 * self.length * (self.start + self.end)


def jump_row(mesh: Mesh, degree: int, edge: InteriorEdge, point: Optional[np.ndarray] = None) -> Dict[int, float]:
    """Coefficients of the jump at ``point`` (P1: anywhere) as a linear functional of dofs."""
    dofs = element_dofs(mesh, degree)
    row: Dict[int, float] = {}
    for tri, sign in ((edge.tri1, -1.0), (edge.tri2, 1.0)):
        coeffs = local_gradients(mesh, degree, tri, point) @ edge.normal
        for dof, c in zip(dofs[tri], coeffs):
            row[int(dof)] = row.get(int(dof), 0.0) + sign * float(c)
    return row


def gradient_jump(u: FEFunction, edge: InteriorEdge) -> JumpProfile:
    """Jump (q2 - q1).n of ``u`` across ``edge``."""
    mesh = u.mesh
    if u.degree == 1:
        value = float(np.dot(triangle_gradient(u, edge.tri2) - triangle_gradient(u, edge.tri1), edge.normal))
        return JumpProfile(edge.index, 1, value, value, edge.length)

    ends = []
    for v in edge.endpoints:
        p = mesh.vertices[v]
        q = triangle_gradient(u, edge.tri2, p) - triangle_gradient(u, edge.tri1, p)
        ends.append(float(np.dot(q, edge.normal)))
    return JumpProfile(edge.index, 2, ends[0], ends[1], edge.length)


def basis_dof(mesh: Mesh, test: BasisFunction) -> int:
    """Global dof index of a test basis function in its own space."""
    if test.kind is BasisKind.P2_MIDPOINT:
        return mesh.num_vertices + test.index
    return test.index


def admissible_tests(mesh: Mesh, kind: Union[str, BasisKind]) -> np.ndarray:
    """Ids of the test functions of ``kind`` vanishing on the boundary."""
    kind = BasisKind.parse(kind)
    if kind is BasisKind.P2_MIDPOINT:
        return np.flatnonzero(~mesh.boundary_edge_mask)
    return np.flatnonzero(~mesh.boundary_vertex_mask)


def _check_interior(mesh: Mesh, test: BasisFunction) -> None:
    if test.kind is BasisKind.P2_MIDPOINT:
        if not 0 <= test.index < mesh.num_edges:
            raise InvalidArgumentError(f"No edge {test.index}")
        if mesh.boundary_edge_mask[test.index]:
            raise BoundaryTestFunctionError(f"Midpoint test of boundary edge {test.index} does not vanish on the boundary")
    else:
        if not 0 <= test.index < mesh.num_vertices:
            raise InvalidArgumentError(f"No vertex {test.index}")
        if mesh.boundary_vertex_mask[test.index]:
            raise BoundaryTestFunctionError(f"Test function of boundary vertex {test.index} does not vanish on the boundary")


@dataclass(frozen=True)
class WeakHessian:
    """Entry (i, j) = -integral of d_i u_h * d_j phi."""
    matrix: np.ndarray
    test: BasisFunction

    @property
    def trace(self) -> float:
        return float(self.matrix[0, 0] + self.matrix[1, 1])

    @property
    def det(self) -> float:
        m = self.matrix
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    def asymmetry(self) -> float:
        return float(abs(self.matrix[0, 1] - self.matrix[1, 0]))


def weak_hessian(u: FEFunction, test: BasisFunction) -> WeakHessian:
    """
    Weak Hessian of ``u`` against one interior test basis function.

    Integrands are polynomials of degree at most 2, so the edge-midpoint
    rule is exact.
    """
    mesh = u.mesh
    _check_interior(mesh, test)
    test_degree = test.kind.degree
    target = basis_dof(mesh, test)
    test_dofs = element_dofs(mesh, test_degree)
    support = np.flatnonzero(np.any(test_dofs == target, axis=1))

    grad_lam = barycentric_gradients(mesh)[support]
    rule = EDGE_MIDPOINT_RULE
    trial = shape_gradients(u.degree, rule.barycentric, grad_lam)
    tests = shape_gradients(test_degree, rule.barycentric, grad_lam)

    matrix = np.zeros((2, 2))
    for k, t in enumerate(support):
        local_u = u.dofs[element_dofs(mesh, u.degree)[t]]
        grad_u = np.einsum('b,qbd->qd', local_u, trial[k])
        a = int(np.flatnonzero(test_dofs[t] == target)[0])
        grad_phi = tests[k, :, a, :]
        matrix -= mesh.areas[t] * np.einsum('q,qi,qj->ij', rule.weights, grad_u, grad_phi)
    return WeakHessian(matrix, test)


def assemble_gradient_products(mesh: Mesh, trial_degree: int, test_degree: int) -> Dict[Tuple[int, int], sp.csr_matrix]:
    """
    Matrices D[(i, j)] with D[(i, j)][a, b] = integral of d_i(trial_b) * d_j(test_a).

    Rows index test dofs, columns trial dofs.
    """
    _check_degree(trial_degree)
    _check_degree(test_degree)
    rule = EDGE_MIDPOINT_RULE
    grad_lam = barycentric_gradients(mesh)
    trial = shape_gradients(trial_degree, rule.barycentric, grad_lam)
    tests = shape_gradients(test_degree, rule.barycentric, grad_lam)
    trial_dofs = element_dofs(mesh, trial_degree)
    test_dofs = element_dofs(mesh, test_degree)
    nb, na = trial_dofs.shape[1], test_dofs.shape[1]

    rows = np.repeat(test_dofs, nb, axis=1).ravel()
    cols = np.tile(trial_dofs, (1, na)).ravel()
    shape = (dof_count(mesh, test_degree), dof_count(mesh, trial_degree))

    products = {}
    for i in range(2):
        for j in range(2):
            local = np.einsum('q,t,tqb,tqa->tab', rule.weights, mesh.areas, trial[..., i], tests[..., j])
            products[(i, j)] = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    return products


def weak_hessian_operators(mesh: Mesh, degree: int, kind: Union[str, BasisKind]) -> Tuple[np.ndarray, Dict[Tuple[int, int], sp.csr_matrix]]:
    """
    Linear maps from dofs of ``u`` to weak Hessian entries, one row per
    admissible test function of ``kind``.

    Returns:
        (test ids, {(i, j): csr matrix})
    """
    kind = BasisKind.parse(kind)
    tests = admissible_tests(mesh, kind)
    offset = mesh.num_vertices if kind is BasisKind.P2_MIDPOINT else 0
    products = assemble_gradient_products(mesh, degree, kind.degree)
    operators = {key: (-mat[tests + offset]).tocsr() for key, mat in products.items()}
    return tests, operators


def assemble_stiffness(mesh: Mesh, degree: int, coefficient: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """
    Stiffness matrix of integral grad(phi_a)' C grad(phi_b); C = I by default.
    """
    products = assemble_gradient_products(mesh, degree, degree)
    if coefficient is None:
        return (products[(0, 0)] + products[(1, 1)]).tocsr()
    c = np.asarray(coefficient, dtype=float)
    if c.shape != (2, 2):
        raise InvalidArgumentError("Coefficient must be a 2x2 matrix")
    # products[(i, j)][a, b] pairs d_i phi_b with d_j phi_a
    total = sum(c[j, i] * products[(i, j)] for i in range(2) for j in range(2))
    return total.tocsr()


def assemble_mass(mesh: Mesh, degree: int) -> sp.csr_matrix:
    """Mass matrix; P1 products use the edge-midpoint rule, P2 the six-point rule."""
    degree = _check_degree(degree)
    rule = rule_for_degree(2 * degree)
    phi = shape_values(degree, rule.barycentric)
    local_ref = np.einsum('q,qa,qb->ab', rule.weights, phi, phi)
    local = mesh.areas[:, None, None] * local_ref[None]
    dofs = element_dofs(mesh, degree)
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    size = dof_count(mesh, degree)
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def assemble_load(mesh: Mesh, degree: int, f: ScalarField) -> np.ndarray:
    """Load vector integral f * phi_a with the six-point rule."""
    degree = _check_degree(degree)
    rule = SIX_POINT_RULE
    points = np.einsum('qk,tkd->tqd', rule.barycentric, mesh.vertices[mesh.triangles])
    fvals = evaluate_field(f, points.reshape(-1, 2)).reshape(mesh.num_triangles, -1)
    phi = shape_values(degree, rule.barycentric)
    local = mesh.areas[:, None] * np.einsum('q,tq,qa->ta', rule.weights, fvals, phi)
    return np.bincount(element_dofs(mesh, degree).ravel(), weights=local.ravel(),
                       minlength=dof_count(mesh, degree))


def assemble_vector_load(mesh: Mesh, degree: int, field: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Vector integral F . grad(phi_a) for a vector field F(x, y) = (Fx, Fy)."""
    degree = _check_degree(degree)
    rule = SIX_POINT_RULE
    points = np.einsum('qk,tkd->tqd', rule.barycentric, mesh.vertices[mesh.triangles]).reshape(-1, 2)
    fx, fy = field(points[:, 0], points[:, 1])
    fvec = np.stack([np.broadcast_to(fx, (len(points),)), np.broadcast_to(fy, (len(points),))], axis=-1)
    fvec = fvec.reshape(mesh.num_triangles, len(rule.weights), 2)
    grads = shape_gradients(degree, rule.barycentric, barycentric_gradients(mesh))
    local = mesh.areas[:, None] * np.einsum('q,tqd,tqad->ta', rule.weights, fvec, grads)
    return np.bincount(element_dofs(mesh, degree).ravel(), weights=local.ravel(),
                       minlength=dof_count(mesh, degree))


def directional_pairing(u: FEFunction, a: Sequence[float], b: Sequence[float], phi: FEFunction) -> float:
    """-integral of (a . grad u)(b . grad phi) over the mesh."""
    if phi.mesh is not u.mesh:
        raise InvalidArgumentError("u and phi must share a mesh")
    rule = SIX_POINT_RULE
    gu = u.gradients_on_rule(rule) @ np.asarray(a, dtype=float)
    gphi = phi.gradients_on_rule(rule) @ np.asarray(b, dtype=float)
    return float(-np.einsum('q,t,tq,tq->', rule.weights, u.mesh.areas, gu, gphi))


def l2_distance(u: FEFunction, f: ScalarField) -> float:
    """L2 norm of u_h - f by six-point quadrature."""
    rule = SIX_POINT_RULE
    mesh = u.mesh
    points = np.einsum('qk,tkd->tqd', rule.barycentric, mesh.vertices[mesh.triangles])
    fvals = evaluate_field(f, points.reshape(-1, 2)).reshape(mesh.num_triangles, -1)
    diff = u.values_on_rule(rule) - fvals
    return float(np.sqrt(np.einsum('q,t,tq->', rule.weights, mesh.areas, diff ** 2)))


def integral(u: FEFunction) -> float:
    rule = SIX_POINT_RULE
    return float(np.einsum('q,t,tq->', rule.weights, u.mesh.areas, u.values_on_rule(rule)))
