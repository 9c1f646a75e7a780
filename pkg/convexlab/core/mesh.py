#!/usr/bin/env python3

"""
Structured triangulations and edge geometry.
Builds the four mesh families (uniform diagonals in either direction,
alternating diagonals, randomly perturbed interior vertices), refines
them homothetically and exposes interior edges with oriented normals.

Part of the ConvexLab project.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from convexlab.core.errors import EmptyRegionError, InvalidArgumentError

# Configure logging
logger = logging.getLogger('mesh')

DEFAULT_SEED = 20240601
NORMAL_DEDUP_TOL = 1e-10
AREA_REL_TOL = 1e-12
DISPLACEMENT_FRACTION = 0.25


class MeshKind(str, Enum):
    """Mesh families."""
    MESH1 = "mesh1"   # diagonals along (1, 1)
    MESH2 = "mesh2"   # diagonals along (1, -1)
    MESH3 = "mesh3"   # alternating diagonals
    MESH4 = "mesh4"   # Mesh1 connectivity, perturbed interior vertices

    @classmethod
    def parse(cls, value: Union[str, "MeshKind"]) -> "MeshKind":
        if isinstance(value, MeshKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidArgumentError(f"Unknown mesh kind: {value!r}") from None


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def lower_left(self) -> np.ndarray:
        return np.array([self.x0, self.y0])

    def is_degenerate(self) -> bool:
        return not (self.width > 0.0 and self.height > 0.0)

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        x, y = point[0], point[1]
        return (self.x0 - tol <= x <= self.x1 + tol) and (self.y0 - tol <= y <= self.y1 + tol)

    def contains_rectangle(self, other: "Rectangle", tol: float = 1e-12) -> bool:
        return (other.x0 >= self.x0 - tol and other.y0 >= self.y0 - tol
                and other.x1 <= self.x1 + tol and other.y1 <= self.y1 + tol)

    def intersects_segment(self, p: np.ndarray, q: np.ndarray, tol: float = 1e-12) -> bool:
        """Liang-Barsky clip of the closed segment [p, q]."""
        t0, t1 = 0.0, 1.0
        d = q - p
        for delta, lo, hi, start in ((d[0], self.x0, self.x1, p[0]), (d[1], self.y0, self.y1, p[1])):
            if abs(delta) < 1e-300:
                if start < lo - tol or start > hi + tol:
                    return False
                continue
            ta = (lo - tol - start) / delta
            tb = (hi + tol - start) / delta
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
        return True

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "Rectangle":
        if len(values) != 4:
            raise InvalidArgumentError(f"Rectangle needs 4 numbers, got {len(values)}")
        return cls(*(float(v) for v in values))

    @classmethod
    def parse(cls, text: str) -> "Rectangle":
        """Parse ``x0,y0,x1,y1``."""
        try:
            return cls.from_sequence([float(v) for v in text.split(",")])
        except ValueError:
            raise InvalidArgumentError(f"Invalid rectangle: {text!r}") from None


UNIT_SQUARE = Rectangle(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class InteriorEdge:
    """Edge shared by two triangles; the normal points from tri1 into tri2."""
    index: int
    endpoints: Tuple[int, int]
    tri1: int
    tri2: int
    normal: np.ndarray
    length: float
    midpoint: np.ndarray


def canonical_normal(normal: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    """Representative of +/- normal with positive y, or positive x when y = 0."""
    n = np.asarray(normal, dtype=float)
    if n[1] > tol:
        return n.copy()
    if n[1] < -tol:
        return -n
    return n.copy() if n[0] > 0.0 else -n


def dedup_directions(normals: Sequence[np.ndarray], tol: float = NORMAL_DEDUP_TOL) -> np.ndarray:
    """Canonicalize, deduplicate and sort unit normals by angle in [0, pi)."""
    if len(normals) == 0:
        return np.zeros((0, 2))
    canon = np.array([canonical_normal(n) for n in normals])
    angles = np.mod(np.arctan2(canon[:, 1], canon[:, 0]), math.pi)
    canon = canon[np.argsort(angles, kind="stable")]
    kept: List[np.ndarray] = []
    for n in canon:
        if not any(np.linalg.norm(n - k) <= tol for k in kept):
            kept.append(n)
    return np.array(kept)


class Mesh:
    """
    Conforming triangulation of an axis-aligned rectangle.
    Arrays are read-only after construction; derived data is cached.
    """

    def __init__(self,
                 vertices: np.ndarray,
                 triangles: np.ndarray,
                 h: float,
                 domain: Rectangle,
                 kind: Optional[MeshKind] = None,
                 seed: Optional[int] = None):
        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise InvalidArgumentError("vertices must be an (nv, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise InvalidArgumentError("triangles must be an (nt, 3) array")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise InvalidArgumentError("triangle references a missing vertex")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        self.vertices = vertices
        self.triangles = triangles
        self.h = float(h)
        self.domain = domain
        self.kind = kind
        self.seed = seed

    def __repr__(self) -> str:
        label = self.kind.value if self.kind else "mesh"
        return f"Mesh({label}, nv={self.num_vertices}, nt={self.num_triangles}, h={self.h:.6g})"

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def _edge_data(self) -> Tuple[np.ndarray, np.ndarray]:
        # Local edges: (0,1), (1,2), (2,0)
        local = self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as (min vertex, max vertex), sorted lexicographically."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Edge ids of each triangle's local edges (0,1), (1,2), (2,0)."""
        return self._edge_data[1]

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """(ne, 2) adjacent triangles, smaller index first; -1 on the boundary."""
        result = np.full((self.num_edges, 2), -1, dtype=np.int64)
        count = np.zeros(self.num_edges, dtype=np.int64)
        for t, tri_edges in enumerate(self.triangle_edges):
            for e in tri_edges:
                if count[e] >= 2:
                    raise InvalidArgumentError(f"Edge {tuple(self.edges[e])} is shared by more than two triangles")
                result[e, count[e]] = t
                count[e] += 1
        return result

    @cached_property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_triangles[:, 1] < 0

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.edges[self.boundary_edge_mask].ravel()] = True
        return mask

    @cached_property
    def _edge_lookup(self) -> Dict[Tuple[int, int], int]:
        return {(int(a), int(b)): e for e, (a, b) in enumerate(self.edges)}

    def edge_index(self, v0: int, v1: int) -> int:
        """Edge id joining two vertices."""
        key = (min(v0, v1), max(v0, v1))
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise InvalidArgumentError(f"No edge between vertices {v0} and {v1}") from None

    def find_vertex(self, point: Sequence[float], tol: float = 1e-9) -> int:
        """Index of the vertex at ``point``."""
        dist = np.linalg.norm(self.vertices - np.asarray(point, dtype=float), axis=1)
        k = int(np.argmin(dist))
        if dist[k] > tol * max(1.0, self.h):
            raise InvalidArgumentError(f"No vertex at {tuple(point)}")
        return k

    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)

    @cached_property
    def _interior_edges(self) -> Tuple[InteriorEdge, ...]:
        result = []
        for e in np.flatnonzero(~self.boundary_edge_mask):
            v0, v1 = (int(v) for v in self.edges[e])
            t1, t2 = (int(t) for t in self.edge_triangles[e])
            p0, p1 = self.vertices[v0], self.vertices[v1]
            d = p1 - p0
            length = float(np.hypot(d[0], d[1]))
            normal = np.array([-d[1], d[0]]) / length
            if np.dot(normal, self.centroids[t2] - self.centroids[t1]) < 0.0:
                normal = -normal
            normal.setflags(write=False)
            midpoint = 0.5 * (p0 + p1)
            midpoint.setflags(write=False)
            result.append(InteriorEdge(int(e), (v0, v1), t1, t2, normal, length, midpoint))
        return tuple(result)

    def interior_edges(self) -> List[InteriorEdge]:
        """Every edge shared by two triangles, once, in edge-id order."""
        return list(self._interior_edges)

    def validate(self) -> None:
        """Check orientation, tiling and edge-sharing invariants."""
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.flatnonzero(self.signed_areas <= 0.0)[0])
            raise InvalidArgumentError(f"Triangle {bad} has non-positive signed area")
        total = float(self.areas.sum())
        if abs(total - self.domain.area) > AREA_REL_TOL * self.domain.area:
            raise InvalidArgumentError(f"Triangles cover area {total!r}, domain area is {self.domain.area!r}")
        # Raises on edges shared by more than two triangles
        _ = self.edge_triangles

    def normal_direction_set(self, region: Optional[Rectangle] = None) -> np.ndarray:
        """Canonical normals of interior edges meeting ``region`` (whole domain by default)."""
        return normal_direction_set(self, region)


def _structured_grid(n: int, domain: Rectangle) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    xs = np.linspace(domain.x0, domain.x1, n + 1)
    ys = np.linspace(domain.y0, domain.y1, n + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])
    j, i = np.divmod(np.arange(n * n), n)
    v00 = j * (n + 1) + i
    return vertices, v00, v00 + 1, v00 + n + 1, v00 + n + 2


def _split_cells(v00, v10, v01, v11, along_main: np.ndarray) -> np.ndarray:
    main = np.stack([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])], axis=1)
    anti = np.stack([np.column_stack([v00, v10, v01]), np.column_stack([v10, v11, v01])], axis=1)
    cells = np.where(along_main[:, None, None], main, anti)
    return cells.reshape(-1, 3)


def build_structured_mesh(kind: Union[str, MeshKind],
                          n: int,
                          domain: Rectangle = UNIT_SQUARE,
                          seed: int = DEFAULT_SEED) -> Mesh:
    """
    Build one of the four structured mesh families.

    Args:
        kind: Mesh family
        n: Subdivisions per side
        domain: Rectangle to triangulate
        seed: Perturbation seed (Mesh4 only)

    Returns:
        Mesh with h = max(width, height) / n
    """
    kind = MeshKind.parse(kind)
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    if domain.is_degenerate():
        raise InvalidArgumentError(f"Empty domain {domain}")
    n = int(n)

    vertices, v00, v10, v01, v11 = _structured_grid(n, domain)
    j, i = np.divmod(np.arange(n * n), n)

    if kind in (MeshKind.MESH1, MeshKind.MESH4):
        along_main = np.ones(n * n, dtype=bool)
    elif kind is MeshKind.MESH2:
        along_main = np.zeros(n * n, dtype=bool)
    else:
        along_main = (i + j) % 2 == 0
    triangles = _split_cells(v00, v10, v01, v11, along_main)

    h = max(domain.width, domain.height) / n

    if kind is MeshKind.MESH4:
        rng = np.random.default_rng(seed)
        draws = rng.random((len(vertices), 2))
        radius = DISPLACEMENT_FRACTION * min(domain.width, domain.height) / n * np.sqrt(draws[:, 0])
        theta = 2.0 * math.pi * draws[:, 1]
        shift = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
        jj, ii = np.divmod(np.arange(len(vertices)), n + 1)
        interior = (ii > 0) & (ii < n) & (jj > 0) & (jj < n)
        vertices = vertices + shift * interior[:, None]
        logger.debug(f"Perturbed {int(interior.sum())} interior vertices with seed {seed}")

    mesh = Mesh(vertices, triangles, h, domain, kind=kind, seed=seed if kind is MeshKind.MESH4 else None)
    logger.debug(f"Built {mesh!r}")
    return mesh


def refine_homothetic(mesh: Mesh) -> Mesh:
    """Split every triangle into four similar children; h is halved."""
    nv = mesh.num_vertices
    new_vertices = np.vstack([mesh.vertices, mesh.edge_midpoints()])

    tri = mesh.triangles
    mid = mesh.triangle_edges + nv
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    mab, mbc, mca = mid[:, 0], mid[:, 1], mid[:, 2]
    children = np.stack([
        np.column_stack([a, mab, mca]),
        np.column_stack([mab, b, mbc]),
        np.column_stack([mca, mbc, c]),
        np.column_stack([mab, mbc, mca]),
    ], axis=1).reshape(-1, 3)

    refined = Mesh(new_vertices, children, mesh.h / 2.0, mesh.domain, kind=mesh.kind, seed=mesh.seed)
    logger.debug(f"Refined {mesh!r} into {refined!r}")
    return refined


def interior_edges(mesh: Mesh) -> List[InteriorEdge]:
    """Interior edges of ``mesh`` in edge-id order."""
    return mesh.interior_edges()


def normal_direction_set(mesh: Mesh, region: Optional[Rectangle] = None) -> np.ndarray:
    """
    Deduplicated canonical normals of the interior edges meeting a region.

    Args:
        mesh: Source mesh
        region: Sub-rectangle of the domain (whole domain when None)

    Returns:
        (k, 2) array sorted by angle in [0, pi)
    """
    if region is None:
        region = mesh.domain
    elif region.is_degenerate() or not mesh.domain.contains_rectangle(region):
        raise InvalidArgumentError(f"Region {region} is not a sub-rectangle of {mesh.domain}")

    selected = [
        e.normal for e in mesh.interior_edges()
        if region.intersects_segment(mesh.vertices[e.endpoints[0]], mesh.vertices[e.endpoints[1]])
    ]
    if not selected:
        raise EmptyRegionError(f"No interior edge meets region {region}")
    return dedup_directions(selected)
