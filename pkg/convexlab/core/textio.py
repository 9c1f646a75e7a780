#!/usr/bin/env python3

"""
Plain-text codecs for ConvexLab.
Meshes (`nv nt`, `x y` rows, `i j k` rows), sparse matrices in coordinate
form (`i j value` rows), constraint sets with a label sidecar, QP exports
and the CSV tables written by the studies.

Part of the ConvexLab project.
"""

import csv
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from convexlab.core.errors import MeshFormatError
from convexlab.core.mesh import Mesh, Rectangle

# Configure logging
logger = logging.getLogger('textio')

CSV_DIGITS = 17

PathLike = Union[str, Path]

_NUMBER = re.compile(r'^[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$')
_INTEGER = re.compile(r'^\d+$')


def format_number(value: Any, digits: int = CSV_DIGITS) -> str:
    """Shortest-safe text for a cell: floats at ``digits`` significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{digits}g}"
    return str(value)


def parse_number(text: str) -> Any:
    """Inverse of format_number for numeric cells; other text is returned as-is."""
    text = text.strip()
    if text in ("inf", "-inf", "nan"):
        return float(text)
    if text in ("true", "false"):
        return text == "true"
    if _INTEGER.match(text.lstrip("-")) and "." not in text:
        return int(text)
    if _NUMBER.match(text):
        return float(text)
    return text


# ----------------------------------------------------------------------
# Meshes
# ----------------------------------------------------------------------

def format_mesh(mesh: Mesh) -> str:
    lines = [f"{mesh.num_vertices} {mesh.num_triangles}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_mesh(mesh))
    logger.info(f"Wrote mesh with {mesh.num_vertices} vertices and {mesh.num_triangles} triangles to {path}")
    return path


def _tokens(line: str, count: int, lineno: int, what: str) -> List[str]:
    parts = line.split()
    if len(parts) != count:
        raise MeshFormatError(f"Line {lineno}: expected {count} fields for {what}, got {len(parts)}")
    return parts


def parse_mesh(text: str, domain: Optional[Rectangle] = None) -> Mesh:
    """
    Parse the plain-text mesh format.

    Clockwise triangles are reordered to counter-clockwise with a warning.
    The domain defaults to the bounding box of the vertices and h to the
    longest edge.
    """
    lines = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise MeshFormatError("Empty mesh file")
    header = _tokens(lines[0], 2, 1, "the header")
    if not all(_INTEGER.match(t) for t in header):
        raise MeshFormatError(f"Header must be two non-negative integers, got {lines[0]!r}")
    nv, nt = int(header[0]), int(header[1])
    if len(lines) != 1 + nv + nt:
        raise MeshFormatError(f"Expected {1 + nv + nt} lines for {nv} vertices and {nt} triangles, got {len(lines)}")

    vertices = np.empty((nv, 2))
    for k in range(nv):
        parts = _tokens(lines[1 + k], 2, 2 + k, "a vertex")
        if not all(_NUMBER.match(p) for p in parts):
            raise MeshFormatError(f"Line {2 + k}: bad coordinates {lines[1 + k]!r}")
        vertices[k] = [float(p) for p in parts]

    triangles = np.empty((nt, 3), dtype=np.int64)
    for k in range(nt):
        lineno = 2 + nv + k
        parts = _tokens(lines[1 + nv + k], 3, lineno, "a triangle")
        if not all(_INTEGER.match(p) for p in parts):
            raise MeshFormatError(f"Line {lineno}: bad vertex indices {lines[1 + nv + k]!r}")
        tri = [int(p) for p in parts]
        if max(tri) >= nv:
            raise MeshFormatError(f"Line {lineno}: vertex index out of range")
        if len(set(tri)) != 3:
            raise MeshFormatError(f"Line {lineno}: repeated vertex in triangle")
        triangles[k] = tri

    p = vertices[triangles]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    if np.any(signed == 0.0):
        raise MeshFormatError(f"Degenerate triangle {int(np.flatnonzero(signed == 0.0)[0])}")
    clockwise = signed < 0.0
    if clockwise.any():
        logger.warning(f"Reordered {int(clockwise.sum())} clockwise triangles")
        triangles[clockwise] = triangles[clockwise][:, [0, 2, 1]]

    if domain is None:
        lo = vertices.min(axis=0)
        hi = vertices.max(axis=0)
        domain = Rectangle(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    h = float(np.max(np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)))
    return Mesh(vertices, triangles, h, domain)


def read_mesh(path: PathLike, domain: Optional[Rectangle] = None) -> Mesh:
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as e:
        raise MeshFormatError(f"Cannot read mesh file {path}: {e}") from e
    mesh = parse_mesh(text, domain)
    logger.info(f"Read {mesh!r} from {path}")
    return mesh


# ----------------------------------------------------------------------
# Coordinate-format matrices
# ----------------------------------------------------------------------

def format_coo(matrix: sp.spmatrix) -> str:
    """`# rows cols nnz` header, then one `i j value` line per stored entry."""
    coo = sp.coo_matrix(matrix)
    lines = [f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
    order = np.lexsort((coo.col, coo.row))
    lines.extend(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}" for k in order)
    return "\n".join(lines) + "\n"


def parse_coo(text: str, shape: Optional[Tuple[int, int]] = None) -> sp.csr_matrix:
    rows, cols, data = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            header = line[1:].split()
            if shape is None and len(header) >= 2 and all(_INTEGER.match(t) for t in header[:2]):
                shape = (int(header[0]), int(header[1]))
            continue
        parts = line.split()
        if len(parts) != 3 or not (_INTEGER.match(parts[0]) and _INTEGER.match(parts[1]) and _NUMBER.match(parts[2])):
            raise MeshFormatError(f"Line {lineno}: expected 'i j value', got {line!r}")
        rows.append(int(parts[0]))
        cols.append(int(parts[1]))
        data.append(float(parts[2]))
    if shape is None:
        shape = (max(rows, default=-1) + 1, max(cols, default=-1) + 1)
    return sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()


def write_coo(matrix: sp.spmatrix, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_coo(matrix))
    return path


def read_coo(path: PathLike, shape: Optional[Tuple[int, int]] = None) -> sp.csr_matrix:
    path = Path(path)
    try:
        return parse_coo(path.read_text(), shape)
    except OSError as e:
        raise MeshFormatError(f"Cannot read matrix file {path}: {e}") from e


def write_constraint_set(constraint_set, path: PathLike) -> Tuple[Path, Path]:
    """Rows in coordinate form plus a `.labels` sidecar with one label per line."""
    path = Path(path)
    matrix_path = write_coo(constraint_set.A, path)
    labels_path = path.with_suffix(path.suffix + ".labels")
    labels_path.write_text("".join(f"{label}\n" for label in constraint_set.labels))
    logger.info(f"Wrote {constraint_set.num_rows} constraint rows to {matrix_path}")
    return matrix_path, labels_path


def read_constraint_labels(path: PathLike) -> List[str]:
    return Path(path).read_text().splitlines()


def write_qp(problem, directory: PathLike) -> Dict[str, Path]:
    """Export P, q, A and the pinned dofs for cross-validation with external solvers."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"P": write_coo(problem.P, directory / "P.coo")}
    paths["q"] = directory / "q.txt"
    paths["q"].write_text("".join(f"{v:.17g}\n" for v in problem.q))
    paths["A"], paths["A.labels"] = write_constraint_set(problem.constraints, directory / "A.coo")
    paths["pinned"] = directory / "pinned.txt"
    paths["pinned"].write_text("".join(f"{k} {v:.17g}\n" for k, v in sorted(problem.pinned.items())))
    logger.info(f"Exported QP with {problem.n} dofs to {directory}")
    return paths


# ----------------------------------------------------------------------
# CSV tables
# ----------------------------------------------------------------------

def write_csv(path: PathLike, header: Sequence[str], rows: Sequence[Sequence[Any]],
              digits: int = CSV_DIGITS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"Row has {len(row)} cells, header has {len(header)}")
            writer.writerow([format_number(v, digits) for v in row])
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def read_csv(path: PathLike) -> Tuple[List[str], List[List[Any]]]:
    with Path(path).open(newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MeshFormatError(f"{path} is empty") from None
        rows = [[parse_number(cell) for cell in row] for row in reader if row]
    return header, rows


def read_csv_columns(path: PathLike) -> Dict[str, List[Any]]:
    header, rows = read_csv(path)
    return {name: [row[k] for row in rows] for k, name in enumerate(header)}
