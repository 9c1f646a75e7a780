#!/usr/bin/env python3

"""
Package initialization for convexlab.core
Meshes, finite elements, constraint sets, the QP solver and the consistency lab.
"""

from .settings import LabSettings
from .mesh import Mesh, MeshKind, Rectangle, build_structured_mesh
from .fem_core import FEFunction
from .constraints import LinearConstraintSet
from .qp_solver import QPProblem, QPSolution, SolverConfig, solve_qp

__all__ = ['LabSettings', 'Mesh', 'MeshKind', 'Rectangle', 'build_structured_mesh', 'FEFunction',
           'LinearConstraintSet', 'QPProblem', 'QPSolution', 'SolverConfig', 'solve_qp']
