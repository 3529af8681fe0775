import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blochband.mesh import (CELL_AREA, PeriodicMesh, build_structured_mesh,
                            refined_quadrature, shape_functions,
                            shape_functions_many, triangle_quadrature)


def ref_points():
    return st.tuples(
        st.floats(0.0, 1.0), st.floats(0.0, 1.0),
    ).map(lambda p: (p[0] * (1 - p[1]), p[1]))  # inside the reference triangle


@given(ref_points())
def test_partition_of_unity(p):
    vals, grads = shape_functions(p)
    assert abs(vals.sum() - 1.0) < 1e-13
    assert np.abs(grads.sum(axis=0)).max() < 1e-12


def test_nodal_interpolation():
    nodes = [(0, 0), (1, 0), (0, 1), (0.5, 0), (0.5, 0.5), (0, 0.5)]
    for i, p in enumerate(nodes):
        vals, _ = shape_functions(p)
        expect = np.zeros(6)
        expect[i] = 1.0
        assert np.abs(vals - expect).max() < 1e-13


def test_quadrature_weights_and_exactness():
    quad = triangle_quadrature()
    assert abs(quad.weights.sum() - 0.5) < 1e-14
    # Exact for monomials x^a y^b with a + b <= 4 over the reference triangle.
    import math
    for a in range(5):
        for b in range(5 - a):
            exact = (math.factorial(a) * math.factorial(b)
                     / math.factorial(a + b + 2))
            got = np.sum(quad.weights * quad.points[:, 0] ** a
                         * quad.points[:, 1] ** b)
            assert abs(got - exact) < 1e-14, (a, b)


def test_refined_quadrature_consistency():
    fine = refined_quadrature(depth=2)
    assert len(fine.points) == 6 * 16
    assert abs(fine.weights.sum() - 0.5) < 1e-13
    got = np.sum(fine.weights * fine.points[:, 0] ** 2 * fine.points[:, 1])
    assert abs(got - 1.0 / 60.0) < 1e-13


def test_shape_functions_many_matches_scalar():
    quad = triangle_quadrature()
    vals, grads = shape_functions_many(quad.points)
    v0, g0 = shape_functions(quad.points[3])
    assert np.array_equal(vals[3], v0)
    assert np.array_equal(grads[3], g0)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_structured_mesh_counts(n):
    mesh = build_structured_mesh(n)
    assert mesh.n_cells == 2 * n * n
    assert mesh.n_dofs == 4 * n * n
    assert mesh.dof_map.shape == (2 * n * n, 6)
    assert mesh.dof_map.max() == mesh.n_dofs - 1
    assert mesh.dof_map.min() == 0
    assert abs(mesh.h - 2 * np.pi / n) < 1e-15


def test_mesh_rejects_tiny():
    with pytest.raises(ValueError):
        build_structured_mesh(1)


@pytest.mark.parametrize("n", [2, 4])
def test_jacobians_positive_and_cover_cell(n):
    mesh = build_structured_mesh(n)
    total = 0.0
    for e in range(mesh.n_cells):
        det = np.linalg.det(mesh.jacobian(e))
        assert det > 0
        total += det / 2.0
    assert abs(total - CELL_AREA) < 1e-12


def test_periodic_identification():
    mesh = build_structured_mesh(3)
    # Nodes whose coordinates differ by a lattice vector share a DOF.
    coords = mesh.nodes
    dofs = mesh.node_dof
    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            diff = (coords[i] - coords[j]) / (2 * np.pi)
            if np.allclose(diff, np.round(diff), atol=1e-12):
                assert dofs[i] == dofs[j], (i, j)


def test_dof_coords_are_canonical():
    mesh = build_structured_mesh(4)
    coords = mesh.dof_coords()
    assert coords.shape == (mesh.n_dofs, 2)
    assert np.all(coords > -np.pi - 1e-12)
    assert np.all(coords <= np.pi + 1e-12)
    # Each DOF's canonical coordinate matches one of its mesh nodes mod 2*pi.
    for nid, dof in enumerate(mesh.node_dof):
        diff = (mesh.nodes[nid] - coords[dof]) / (2 * np.pi)
        assert np.allclose(diff, np.round(diff), atol=1e-12)


def test_dump_text_roundtrip():
    mesh = build_structured_mesh(2)
    buf = io.StringIO()
    mesh.dump_text(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == f"# nodes {len(mesh.nodes)}"
    node_line = lines[1].split()
    assert len(node_line) == 3
    assert float(node_line[1]) == mesh.nodes[0, 0]
    elem_header = lines.index(f"# elements {mesh.n_cells}")
    first_elem = lines[elem_header + 1].split()
    assert [int(t) for t in first_elem[1:]] == list(mesh.cells[0])
