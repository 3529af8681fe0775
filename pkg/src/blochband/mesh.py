"""Periodic quadratic-Lagrange triangle mesh of the fundamental cell (-pi, pi]^2.

The mesh is structured: n x n squares, each split along the (1,1) diagonal into
two triangles.  All P2 nodes live on the refined (2n+1) x (2n+1) grid with
spacing h/2 = pi/n; periodicity is handled purely through the dof map, so
element geometry stays local and affine.
"""

from dataclasses import dataclass, field

import numpy as np

CELL_AREA = 4.0 * np.pi ** 2

# 6-point symmetric triangle rule, exact for polynomials up to degree 4.
_QA = 0.445948490915965
_QB = 0.091576213509771
_WA = 0.223381589678011
_WB = 0.109951743655322


@dataclass(frozen=True)
class Quadrature:
    """Reference-triangle quadrature rule (vertices (0,0), (1,0), (0,1))."""

    points: np.ndarray   # (nq, 2)
    weights: np.ndarray  # (nq,), sums to the reference area 1/2
    degree: int


def triangle_quadrature() -> Quadrature:
    """Degree-4 rule; sufficient for products of quadratic basis functions."""
    pts = np.array([
        [_QA, _QA], [1.0 - 2.0 * _QA, _QA], [_QA, 1.0 - 2.0 * _QA],
        [_QB, _QB], [1.0 - 2.0 * _QB, _QB], [_QB, 1.0 - 2.0 * _QB],
    ])
    wts = 0.5 * np.array([_WA, _WA, _WA, _WB, _WB, _WB])
    return Quadrature(points=pts, weights=wts, degree=4)


def refined_quadrature(depth: int = 2) -> Quadrature:
    """Base rule replicated on 4**depth uniform subtriangles.

    Used for permittivity-weighted terms on elements cut by the material
    interface; the extra points control the geometry error of the
    discontinuous coefficient without boundary-fitted meshing.
    """
    base = triangle_quadrature()
    tris = [(np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))]
    for _ in range(depth):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        tris = nxt
    pts, wts = [], []
    scale = 0.25 ** depth
    for a, b, c in tris:
        # Affine map of the base rule onto the subtriangle.
        pts.append(a + np.outer(base.points[:, 0], b - a)
                   + np.outer(base.points[:, 1], c - a))
        wts.append(base.weights * scale)
    return Quadrature(points=np.vstack(pts), weights=np.hstack(wts),
                      degree=base.degree)


def shape_functions(ref_point):
    """Quadratic Lagrange basis on the reference triangle.

    Node order: vertices (0,0), (1,0), (0,1), then edge midpoints on edges
    0-1, 1-2, 2-0.  Returns (values, gradients) with shapes (6,), (6, 2).
    """
    xi, eta = float(ref_point[0]), float(ref_point[1])
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    vals = np.array([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])
    d0, d1, d2 = np.array([-1.0, -1.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])
    grads = np.array([
        (4 * l0 - 1) * d0, (4 * l1 - 1) * d1, (4 * l2 - 1) * d2,
        4 * (l0 * d1 + l1 * d0), 4 * (l1 * d2 + l2 * d1), 4 * (l2 * d0 + l0 * d2),
    ])
    return vals, grads


def shape_functions_many(points: np.ndarray):
    """Vectorized basis evaluation: (nq, 6) values and (nq, 6, 2) gradients."""
    vals = np.empty((len(points), 6))
    grads = np.empty((len(points), 6, 2))
    for q, p in enumerate(points):
        vals[q], grads[q] = shape_functions(p)
    return vals, grads


@dataclass
class PeriodicMesh:
    """Quadratic-element mesh of the torus with periodic DOF identification."""

    cells: np.ndarray      # (n_cells, 6) node indices into `nodes`
    nodes: np.ndarray      # (n_nodes, 2) coordinates, boundary duplicated
    dof_map: np.ndarray    # (n_cells, 6) global periodic DOF indices
    n_dofs: int
    h: float
    n_per_side: int
    node_dof: np.ndarray = field(repr=False, default=None)  # node -> DOF
    element_order: int = 2

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_vertices(self, e: int) -> np.ndarray:
        return self.nodes[self.cells[e, :3]]

    def jacobian(self, e: int) -> np.ndarray:
        """Affine map Jacobian of element e (constant on the element)."""
        v = self.cell_vertices(e)
        return np.column_stack((v[1] - v[0], v[2] - v[0]))

    def dof_coords(self) -> np.ndarray:
        """Canonical coordinates in (-pi, pi] of each periodic DOF."""
        coords = np.empty((self.n_dofs, 2))
        two_n = 2 * self.n_per_side
        step = np.pi / self.n_per_side
        for dof in range(self.n_dofs):
            i, j = dof % two_n, dof // two_n
            coords[dof] = (-np.pi + (i if i > 0 else two_n) * step,
                           -np.pi + (j if j > 0 else two_n) * step)
        return coords

    def dump_text(self, stream) -> None:
        """Plain-text listing: node id, x1, x2; then element id, 6 node ids."""
        stream.write(f"# nodes {len(self.nodes)}\n")
        for nid, (x, y) in enumerate(self.nodes):
            stream.write(f"{nid} {x:.17g} {y:.17g}\n")
        stream.write(f"# elements {self.n_cells}\n")
        for eid, cell in enumerate(self.cells):
            stream.write(f"{eid} " + " ".join(str(n) for n in cell) + "\n")


def build_structured_mesh(n_per_side: int) -> PeriodicMesh:
    """Structured periodic mesh with 2*n^2 quadratic triangles and 4*n^2 DOFs."""
    if n_per_side < 2:
        raise ValueError(f"n_per_side must be >= 2, got {n_per_side}")
    n = int(n_per_side)
    fine = 2 * n           # fine-grid points per side (periodic count)
    step = np.pi / n       # fine-grid spacing h/2

    n_side = fine + 1
    ii, jj = np.meshgrid(np.arange(n_side), np.arange(n_side), indexing="ij")
    nodes = np.column_stack((
        -np.pi + ii.ravel(order="F") * step,
        -np.pi + jj.ravel(order="F") * step,
    ))

    def nid(i, j):
        return i + n_side * j

    cells = np.empty((2 * n * n, 6), dtype=np.int64)
    e = 0
    for j in range(n):
        for i in range(n):
            a, b = 2 * i, 2 * j
            # Lower triangle: (a,b) -> (a+2,b) -> (a+2,b+2).
            cells[e] = (nid(a, b), nid(a + 2, b), nid(a + 2, b + 2),
                        nid(a + 1, b), nid(a + 2, b + 1), nid(a + 1, b + 1))
            # Upper triangle: (a,b) -> (a+2,b+2) -> (a,b+2).
            cells[e + 1] = (nid(a, b), nid(a + 2, b + 2), nid(a, b + 2),
                           nid(a + 1, b + 1), nid(a + 1, b + 2), nid(a, b + 1))
            e += 2

    # Periodic identification: fold the duplicated boundary onto index 0.
    node_i = np.arange(n_side * n_side) % n_side
    node_j = np.arange(n_side * n_side) // n_side
    node_dof = (node_i % fine) + fine * (node_j % fine)

    return PeriodicMesh(
        cells=cells,
        nodes=nodes,
        dof_map=node_dof[cells],
        n_dofs=fine * fine,
        h=2.0 * np.pi / n,
        n_per_side=n,
        node_dof=node_dof,
    )
