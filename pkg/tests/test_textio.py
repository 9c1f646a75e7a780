"""Tests for the plain-text mesh, matrix and CSV codecs."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from convexlab.core import textio
from convexlab.core.constraints import conformal_convexity_constraints
from convexlab.core.errors import MeshFormatError
from convexlab.core.mesh import build_structured_mesh
from convexlab.core.qp_solver import QPProblem


def test_mesh_file_reproduces_structure(tmp_path):
    mesh = build_structured_mesh("mesh4", 4)
    path = textio.write_mesh(mesh, tmp_path / "mesh.txt")
    loaded = textio.read_mesh(path, mesh.domain)
    assert np.array_equal(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.triangles, mesh.triangles)
    assert len(loaded.interior_edges()) == len(mesh.interior_edges())


def test_parse_mesh_reorients_clockwise_triangles():
    text = "4 2\n0 0\n1 0\n1 1\n0 1\n0 2 1\n0 2 3\n"
    mesh = textio.parse_mesh(text)
    assert mesh.num_triangles == 2
    assert np.all(mesh.signed_areas > 0.0)
    assert mesh.domain.x1 == 1.0 and mesh.domain.y1 == 1.0


@pytest.mark.parametrize("text", [
    "",
    "3\n0 0\n1 0\n0 1\n0 1 2\n",
    "3 1\n0 0\n1 0\n0 1\n",
    "3 1\n0 0\n1 x\n0 1\n0 1 2\n",
    "3 1\n0 0\n1 0\n0 1\n0 1 5\n",
    "3 1\n0 0\n1 0\n0 1\n0 1 1\n",
    "3 1\n0 0\n1 0\n2 0\n0 1 2\n",
])
def test_parse_mesh_rejects_malformed_input(text):
    with pytest.raises(MeshFormatError):
        textio.parse_mesh(text)


def test_read_missing_mesh_file(tmp_path):
    with pytest.raises(MeshFormatError):
        textio.read_mesh(tmp_path / "missing.txt")


def test_coo_text_keeps_shape_and_values():
    matrix = sp.csr_matrix(np.array([[0.0, 1.5, 0.0], [-2.0, 0.0, 1.0 / 3.0]]))
    text = textio.format_coo(matrix)
    assert text.splitlines()[0] == "# 2 3 3"
    parsed = textio.parse_coo(text)
    assert parsed.shape == (2, 3)
    assert abs(parsed - matrix).max() == 0.0
    with pytest.raises(MeshFormatError):
        textio.parse_coo("0 1\n")


def test_constraint_set_and_qp_export(tmp_path, mesh1_small):
    cs = conformal_convexity_constraints(mesh1_small)
    matrix_path, labels_path = textio.write_constraint_set(cs, tmp_path / "rows.coo")
    assert textio.read_constraint_labels(labels_path) == cs.labels
    assert textio.read_coo(matrix_path).shape == cs.A.shape

    problem = QPProblem(sp.eye(cs.num_dofs), np.ones(cs.num_dofs), cs, pinned={0: 2.0})
    paths = textio.write_qp(problem, tmp_path / "qp")
    assert set(paths) == {"P", "q", "A", "A.labels", "pinned"}
    assert paths["pinned"].read_text() == "0 2\n"


def test_number_cells():
    assert textio.format_number(True) == "true"
    assert textio.format_number(np.int64(7)) == "7"
    assert textio.format_number(math.inf) == "inf"
    assert textio.format_number(0.1) == "0.10000000000000001"
    assert textio.format_number(0.1, digits=6) == "0.1"
    assert textio.parse_number("0.10000000000000001") == 0.1
    assert textio.parse_number("-3") == -3
    assert textio.parse_number("false") is False
    assert math.isinf(textio.parse_number("-inf"))
    assert textio.parse_number("mesh1") == "mesh1"


def test_csv_tables(tmp_path):
    path = textio.write_csv(tmp_path / "t.csv", ["n", "h", "kind"], [[4, 0.25, "mesh1"], [8, 0.125, "mesh1"]])
    header, rows = textio.read_csv(path)
    assert header == ["n", "h", "kind"]
    assert rows == [[4, 0.25, "mesh1"], [8, 0.125, "mesh1"]]
    assert textio.read_csv_columns(path)["h"] == [0.25, 0.125]
    with pytest.raises(ValueError):
        textio.write_csv(tmp_path / "bad.csv", ["a", "b"], [[1]])
