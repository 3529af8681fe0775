"""Assembly of the real gyroscopic triple (M, G, K) for the Bloch pencil.

The complex quadratic problem in the quasimomentum amplitude is transformed to
real matrices: M is the mass matrix, G the real representation of the (purely
imaginary) first-order coupling, and K = omega^2 * (eps-weighted mass) -
stiffness.  Exact entrywise symmetry / skew-symmetry is obtained by assembling
symmetric and antisymmetric element kernels, never by post-hoc symmetrization.
"""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import (PeriodicMesh, refined_quadrature, shape_functions_many,
                   triangle_quadrature)
from .material import MaterialModel


class AssemblyError(RuntimeError):
    pass


@dataclass
class PencilMatrices:
    """Sparse real triple of the gyroscopic problem mu^2 M + mu G + K."""

    M: sp.csr_matrix   # symmetric positive definite
    G: sp.csr_matrix   # skew-symmetric
    K: sp.csr_matrix   # symmetric
    omega: float
    k_hat: np.ndarray
    n_dofs: int

    def quad_matrix(self, sigma: complex) -> sp.csc_matrix:
        """Q(sigma) = sigma^2 M + sigma G + K as a complex CSC matrix."""
        return (sigma ** 2 * self.M + sigma * self.G + self.K).tocsc()

    def dump(self, prefix: str) -> None:
        """Matrix Market dump (<prefix>_M.mtx etc.) for cross-validation."""
        for name, mat in (("M", self.M), ("G", self.G), ("K", self.K)):
            scipy.io.mmwrite(f"{prefix}_{name}.mtx", mat.tocoo())


def apply_pencil(pencil: PencilMatrices, mu: complex, u: np.ndarray) -> np.ndarray:
    """Residual vector mu^2 M u + mu G u + K u."""
    u = np.asarray(u)
    if u.shape[0] != pencil.n_dofs:
        raise ValueError(f"vector length {u.shape[0]} != n_dofs {pencil.n_dofs}")
    return mu ** 2 * (pencil.M @ u) + mu * (pencil.G @ u) + pencil.K @ u


class _ReferenceData:
    """Per-orientation constant element matrices on the structured mesh."""

    def __init__(self, mesh: PeriodicMesh, interface_depth: int):
        self.quad = triangle_quadrature()
        self.fine_quad = refined_quadrature(interface_depth)
        self.vals, self.grads = shape_functions_many(self.quad.points)
        self.fvals, _ = shape_functions_many(self.fine_quad.points)

        # Two congruent orientations: all elements are translates of these.
        self.jac = {}
        self.mass = {}
        self.stiff = {}
        self.gskew = {}  # per coordinate direction, antisymmetric kernel
        h = mesh.h
        for orient, jac in ((0, np.array([[h, h], [0.0, h]])),
                            (1, np.array([[h, 0.0], [h, h]]))):
            detj = float(np.linalg.det(jac))
            if detj <= 0:
                raise AssemblyError("non-positive element Jacobian")
            jinv_t = np.linalg.inv(jac).T
            gphys = self.grads @ jinv_t.T            # (nq, 6, 2)
            w = self.quad.weights
            self.jac[orient] = (jac, detj)
            # sqrt-weight folding keeps the kernels exactly symmetric in
            # floating point (products commute; summation order matches).
            sw = np.sqrt(w)
            wvals = sw[:, None] * self.vals
            wgrads = sw[:, None, None] * gphys
            self.mass[orient] = detj * np.einsum("qm,qn->mn", wvals, wvals)
            self.stiff[orient] = detj * np.einsum("qmd,qnd->mn", wgrads, wgrads)
            gdir = []
            for d in range(2):
                dmat = gphys[:, :, d]                # (nq, 6)
                # Antisymmetric kernel: exact skew-symmetry under roundoff.
                ker = -detj * np.einsum("q,qn,qm->mn", w, self.vals, dmat)
                gdir.append(ker - ker.T.copy())
            self.gskew[orient] = gdir


class PencilFactory:
    """Precomputed frequency/direction-independent matrices for one mesh+model.

    The permittivity is piecewise (indicator of the inclusion disk), so the
    eps-weighted mass splits as eps_bg(w) * A_out + eps_inc(w) * A_in with
    fixed matrices; pencils at any (omega, k_hat) are then cheap combinations.
    """

    def __init__(self, mesh: PeriodicMesh, model: MaterialModel,
                 interface_depth: int = 2):
        self.mesh = mesh
        self.model = model
        ref = _ReferenceData(mesh, interface_depth)
        n_cells = mesh.n_cells
        orients = np.tile([0, 1], n_cells // 2)

        # Interface classification from nodal distances to the disk boundary,
        # with an h-sized safety band for arcs passing between nodes.
        center = np.asarray(model.inclusion_center)
        d = mesh.nodes[mesh.cells] - center          # (n_cells, 6, 2)
        d -= 2.0 * np.pi * np.round(d / (2.0 * np.pi))
        signed = np.hypot(d[..., 0], d[..., 1]) - model.inclusion_radius
        cut = (signed.min(axis=1) < mesh.h) & (signed.max(axis=1) > -mesh.h)
        inside = (~cut) & (signed.max(axis=1) <= 0)

        mass_el = np.empty((n_cells, 6, 6))
        stiff_el = np.empty((n_cells, 6, 6))
        gx_el = np.empty((n_cells, 6, 6))
        gy_el = np.empty((n_cells, 6, 6))
        in_el = np.zeros((n_cells, 6, 6))   # indicator-weighted mass, disk
        out_el = np.zeros((n_cells, 6, 6))  # indicator-weighted mass, rest

        for orient in (0, 1):
            sel = orients == orient
            mass_el[sel] = ref.mass[orient]
            stiff_el[sel] = ref.stiff[orient]
            gx_el[sel] = ref.gskew[orient][0]
            gy_el[sel] = ref.gskew[orient][1]
            in_el[sel & inside] = ref.mass[orient]
            out_el[sel & ~inside & ~cut] = ref.mass[orient]

            # Cut elements: refined quadrature with pointwise indicators.
            csel = np.flatnonzero(sel & cut)
            if len(csel):
                jac, detj = ref.jac[orient]
                v0 = mesh.nodes[mesh.cells[csel, 0]]
                pts = v0[:, None, :] + ref.fine_quad.points @ jac.T
                dd = pts - center
                dd -= 2.0 * np.pi * np.round(dd / (2.0 * np.pi))
                is_in = (np.hypot(dd[..., 0], dd[..., 1])
                         < model.inclusion_radius)              # (ne, nq)
                w = ref.fine_quad.weights
                for el_buf, mask in ((in_el, is_in), (out_el, ~is_in)):
                    wv = (np.sqrt(w[None, :] * mask)[:, :, None]
                          * ref.fvals[None, :, :])              # (ne, nq, 6)
                    el_buf[csel] = detj * np.einsum("eqm,eqn->emn", wv, wv)

        rows = np.broadcast_to(mesh.dof_map[:, :, None],
                               (n_cells, 6, 6)).ravel()
        cols = np.broadcast_to(mesh.dof_map[:, None, :],
                               (n_cells, 6, 6)).ravel()
        n = mesh.n_dofs

        def scatter(el):
            mat = sp.coo_matrix((el.ravel(), (rows, cols)), shape=(n, n))
            mat.sum_duplicates()
            return mat.tocsr()

        self.n_dofs = n
        self.mass = scatter(mass_el)
        self.stiffness = scatter(stiff_el)
        self.gx = scatter(gx_el)
        self.gy = scatter(gy_el)
        self.mass_in = scatter(in_el)
        self.mass_out = scatter(out_el)

    def pencil(self, omega: float, k_hat) -> PencilMatrices:
        k_hat = np.asarray(k_hat, dtype=float)
        if abs(np.hypot(k_hat[0], k_hat[1]) - 1.0) > 1e-12:
            raise ValueError(f"k_hat must be a unit vector, got {k_hat}")
        self.model._check_omega(omega)
        eps_in = float(self.model.inclusion(omega))
        eps_out = float(self.model.background(omega))
        emass = eps_out * self.mass_out + eps_in * self.mass_in
        gmat = k_hat[0] * self.gx + k_hat[1] * self.gy
        return PencilMatrices(M=self.mass, G=gmat,
                              K=omega ** 2 * emass - self.stiffness,
                              omega=float(omega), k_hat=k_hat,
                              n_dofs=self.n_dofs)


def assemble_pencil(mesh: PeriodicMesh, model: MaterialModel, omega: float,
                    k_hat, interface_depth: int = 2) -> PencilMatrices:
    """One-shot assembly of M, G(k_hat), K(omega) on a structured mesh."""
    return PencilFactory(mesh, model, interface_depth).pencil(omega, k_hat)
