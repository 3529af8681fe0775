"""Eigensolvers for the gyroscopic quadratic problem mu^2 M u + mu G u + K u = 0.

Main path: structure-preserving shift-invert Arnoldi (skew-Hamiltonian
isotropic, Krylov-Schur restarted) on the Hamiltonian linearization.
Fallback: ARPACK shift-invert on the standard linearization.  Oracle: dense
full-spectrum solve of the standard linearization (small problems only).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import PencilMatrices, apply_pencil

log = logging.getLogger(__name__)

DENSE_GUARD = 2000          # largest 2N admitted by the dense oracle
_BREAKDOWN = 1e-13
_DEDUP_TOL = 1e-8


class FactorizationError(RuntimeError):
    """Shift hit the spectrum (or the matrix is otherwise singular)."""


class SizeGuardError(ValueError):
    pass


@dataclass
class EigEntry:
    mu: complex
    lam: complex
    residual: float
    vector: np.ndarray = None
    mirrored: bool = False


@dataclass
class Spectrum:
    entries: list
    shift: complex
    converged: bool = True
    stats: dict = field(default_factory=dict)

    def lams(self, include_mirrored: bool = True) -> np.ndarray:
        vals = [e.lam for e in self.entries if include_mirrored or not e.mirrored]
        return np.array(sorted(vals, key=lambda z: (z.real, z.imag)))

    def mus(self, include_mirrored: bool = True) -> np.ndarray:
        vals = [e.mu for e in self.entries if include_mirrored or not e.mirrored]
        return np.array(sorted(vals, key=lambda z: (z.real, z.imag)))


def _lu(mat) -> spla.SuperLU:
    """Sparse LU behind a narrow interface; raises FactorizationError."""
    try:
        return spla.splu(sp.csc_matrix(mat))
    except RuntimeError as exc:
        raise FactorizationError(str(exc)) from exc


def _solve_real_factor(lu, b):
    """Solve with a real factorization for a possibly complex right-hand side."""
    if np.iscomplexobj(b):
        return lu.solve(b.real) + 1j * lu.solve(b.imag)
    return lu.solve(b)


def rayleigh_refine(pencil: PencilMatrices, u: np.ndarray, mu_guess: complex):
    """Project the pencil on span{u} and return the root nearest the guess."""
    alpha = np.vdot(u, pencil.M @ u)
    beta = np.vdot(u, pencil.G @ u)
    gamma = np.vdot(u, pencil.K @ u)
    roots = np.roots([alpha, beta, gamma])
    if len(roots) == 0:
        return mu_guess
    return roots[np.argmin(np.abs(roots - mu_guess))]


def pencil_residual(pencil: PencilMatrices, mu: complex, u: np.ndarray) -> float:
    nrm = np.linalg.norm(u)
    if nrm == 0:
        return np.inf
    return float(np.linalg.norm(apply_pencil(pencil, mu, u)) / nrm)


class HamiltonianLinearization:
    """Matrix-free blocks H, S, W of the Hamiltonian linearization.

    H = [[0, -K], [M, 0]],  S = [[M, G], [0, M]] = F1 F2 with
    F1 = [[I, G/2], [0, M]],  F2 = [[M, G/2], [0, I]],  W = F1^-1 H F2^-1.
    Vectors are stacked as (z1, z2) with blocks of length N; an eigenvector z
    of W carries the quadratic eigenvector in its second block.
    """

    def __init__(self, pencil: PencilMatrices):
        self.pencil = pencil
        self.n = pencil.n_dofs
        self._m_lu = _lu(pencil.M)

    def apply_J(self, z):
        n = self.n
        return np.concatenate((z[n:], -z[:n]))

    def apply_S(self, z):
        n = self.n
        p = self.pencil
        return np.concatenate((p.M @ z[:n] + p.G @ z[n:], p.M @ z[n:]))

    def apply_H(self, z):
        n = self.n
        p = self.pencil
        return np.concatenate((-(p.K @ z[n:]), p.M @ z[:n]))

    def apply_W(self, z):
        n = self.n
        p = self.pencil
        w2 = _solve_real_factor(self._m_lu, z[:n] - 0.5 * (p.G @ z[n:]))
        w1 = -(p.K @ z[n:]) - 0.5 * (p.G @ w2)
        return np.concatenate((w1, w2))

    def solve_shifted(self, sigma: complex, lu_q, conjugate: bool, b):
        """Apply (W - sigma)^-1 given a factorization of Q(sigma).

        With t = F2^-1 z the system reduces to one solve with the N x N
        complex matrix Q(sigma) = sigma^2 M + sigma G + K; conjugate=True
        reuses the factorization of Q(conj(sigma)).
        """
        n = self.n
        p = self.pencil
        b1, b2 = b[:n], b[n:]
        rhs = -(b1 + 0.5 * (p.G @ b2) + sigma * (p.M @ b2))
        if conjugate:
            t2 = np.conj(lu_q.solve(np.conj(rhs)))
        else:
            t2 = lu_q.solve(np.asarray(rhs, dtype=complex))
        t1 = b2 + sigma * t2
        z1 = p.M @ t1 + 0.5 * (p.G @ t2)
        return np.concatenate((z1, t2))

    def dense_W(self) -> np.ndarray:
        """Dense W for cross-checks; small problems only."""
        if 2 * self.n > DENSE_GUARD:
            raise SizeGuardError(f"dense W blocked for 2N={2 * self.n}")
        p = self.pencil
        m = p.M.toarray()
        g = p.G.toarray()
        k = p.K.toarray()
        n = self.n
        i = np.eye(n)
        z = np.zeros((n, n))
        f1 = np.block([[i, g / 2], [z, m]])
        f2 = np.block([[m, g / 2], [z, i]])
        h = np.block([[z, -k], [m, z]])
        return np.linalg.solve(f1, h) @ np.linalg.inv(f2)


class ShiftedOperator:
    """Rational operator R = prod over the shift quadruple of (W - s)^-1.

    Uses two complex factorizations (Q at mu0 and at -mu0); the conjugate
    shifts reuse them.  Maps real vectors to real vectors.
    """

    def __init__(self, lin: HamiltonianLinearization, mu0: complex):
        self.lin = lin
        self.mu0 = complex(mu0)
        self._lu_plus = _lu(lin.pencil.quad_matrix(self.mu0))
        self._lu_minus = _lu(lin.pencil.quad_matrix(-self.mu0))
        self.n_applies = 0

    def apply(self, v):
        m0 = self.mu0
        z = np.asarray(v, dtype=complex)
        z = self.lin.solve_shifted(m0, self._lu_plus, False, z)
        z = self.lin.solve_shifted(-m0, self._lu_minus, False, z)
        z = self.lin.solve_shifted(np.conj(m0), self._lu_plus, True, z)
        z = self.lin.solve_shifted(-np.conj(m0), self._lu_minus, True, z)
        self.n_applies += 1
        return z.real if not np.iscomplexobj(v) else z


def _orthogonalize(w, basis_cols, jbasis_cols):
    """Two-pass MGS against the basis and its J-image (isotropy)."""
    h = np.zeros(len(basis_cols))
    for _ in range(2):
        for i, v in enumerate(basis_cols):
            c = v @ w
            h[i] += c
            w = w - c * v
        for jv in jbasis_cols:
            w = w - (jv @ w) * jv
    return w, h


def _extract_candidates(lin, pencil, ritz_vecs, mu_shift, tol, depth=4):
    """Eigenvalue candidates of W from Ritz vectors of R.

    R is even in W and real, so a Ritz vector of R can mix up to four
    eigendirections of W (the members of one eigenvalue quadruple, or a
    nearly defective cluster of them).  W is therefore projected onto the
    local Krylov space span{x, Wx, ..., W^(d-1) x}, whose small eigenproblem
    separates the cluster.  Each candidate is Rayleigh-refined against the
    quadratic pencil and kept if its residual meets tol.
    """
    found = []
    for x in ritz_vecs:
        # Orthonormal local Krylov basis (two-pass MGS, rank-truncated).
        cols = [x / np.linalg.norm(x)]
        wcols = []
        for j in range(depth):
            w = lin.apply_W(cols[j])
            wcols.append(w.copy())
            if j == depth - 1:
                break
            for _ in range(2):
                for q in cols:
                    w = w - np.vdot(q, w) * q
            nrm = np.linalg.norm(w)
            if nrm < 1e-12:
                break
            cols.append(w / nrm)
        basis = np.column_stack(cols)
        wbasis = np.column_stack(wcols[:len(cols)])
        cmat = basis.conj().T @ wbasis
        mus, vecs = np.linalg.eig(cmat)
        for i, mu in enumerate(mus):
            z = basis @ vecs[:, i]
            u = z[lin.n:]
            if np.linalg.norm(u) < 1e-14 * np.linalg.norm(z):
                continue
            mu_ref, u, res = _polish(pencil, mu, u, tol)
            if res <= tol:
                found.append((mu_ref, u / np.linalg.norm(u), res))
    return found


def _polish(pencil, mu, u, tol):
    """Rayleigh refinement, plus one inverse-iteration step on a near miss.

    Near misses are typically ill-conditioned eigenvectors from nearly
    defective clusters; a single shifted solve recovers them.
    """
    mu_ref = rayleigh_refine(pencil, u, mu)
    res = pencil_residual(pencil, mu_ref, u)
    if tol < res <= max(1e-6, 1e4 * tol):
        try:
            lu = _lu(pencil.quad_matrix(mu_ref))
        except FactorizationError:
            return mu_ref, u, res
        u2 = _solve_real_factor(lu, np.asarray(u, dtype=complex))
        u2 = u2 / np.linalg.norm(u2)
        mu2 = rayleigh_refine(pencil, u2, mu_ref)
        res2 = pencil_residual(pencil, mu2, u2)
        if res2 < res:
            return mu2, u2, res2
    return mu_ref, u, res


def _canonical_rep(mu: complex) -> complex:
    return complex(abs(mu.real), abs(mu.imag))


def _dedup(cands):
    """Keep the best-residual candidate per quadruple representative."""
    kept = {}
    for mu, u, res in cands:
        rep = _canonical_rep(mu)
        match = None
        for key in kept:
            if abs(key - rep) <= max(_DEDUP_TOL, 1e-6 * abs(rep)):
                match = key
                break
        if match is None:
            kept[rep] = (mu, u, res)
        elif res < kept[match][2]:
            kept[match] = (mu, u, res)
    return list(kept.values())


def _build_spectrum(pencil, reps, shift, converged, stats, tol):
    """Expand representatives to {mu, conj(mu)} pairs plus flagged mirrors."""
    entries = []
    seen = []

    def push(mu, u, res, mirrored):
        for s in seen:
            if abs(mu - s) <= max(_DEDUP_TOL, 1e-6 * abs(mu)):
                return
        seen.append(mu)
        entries.append(EigEntry(mu=mu, lam=-1j * mu, residual=res,
                                vector=u, mirrored=mirrored))

    for mu, u, res in sorted(reps, key=lambda t: abs(t[0] - shift)):
        push(mu, u, res, False)
        push(np.conj(mu), np.conj(u), res, False)
        push(-mu, u, res, True)
        push(-np.conj(mu), np.conj(u), res, True)
    return Spectrum(entries=entries, shift=shift, converged=converged,
                    stats=stats)


def shira_eigs(lin: HamiltonianLinearization, mu0: complex, n_wanted: int,
               tol: float = 1e-9, max_restarts: int = 50,
               subspace_dim: int = None, seed: int = 7) -> Spectrum:
    """Skew-Hamiltonian isotropic implicitly restarted Arnoldi.

    Builds a Krylov space for the rational operator R with an extra
    re-orthogonalization against J times the basis, which keeps the space
    isotropic and forces convergence to conjugate eigenvalue pairs; restarts
    use a Krylov-Schur truncation keeping the Ritz values of R largest in
    modulus (those closest to the shift quadruple).
    """
    if n_wanted < 1:
        raise ValueError("n_wanted must be >= 1")
    pencil = lin.pencil
    two_n = 2 * lin.n
    m_max = subspace_dim or max(2 * n_wanted + 8, 20)
    # Isotropic subspaces of R^(2N) have dimension at most N.
    m_max = min(m_max, lin.n - 1)

    shift = complex(mu0)
    stats = {"restarts": 0, "shift_retries": 0, "isotropy_max": 0.0,
             "n_ops": 0}
    op = None
    for attempt in range(3):
        try:
            op = ShiftedOperator(lin, shift)
            break
        except FactorizationError:
            stats["shift_retries"] += 1
            shift = shift * (1 + 1e-3) + 1e-3j
    if op is None:
        raise FactorizationError(
            f"could not factorize near shift {mu0} after retries")

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(two_n)
    v0 /= np.linalg.norm(v0)
    vbasis = [v0]
    jbasis = [lin.apply_J(v0)]
    tmat = np.zeros((m_max + 1, m_max))
    j_cur = 0  # columns of tmat filled so far

    def expand(j_from):
        nonlocal j_cur
        for j in range(j_from, m_max):
            w = op.apply(vbasis[j])
            w, h = _orthogonalize(w, vbasis, jbasis)
            tmat[:j + 1, j] = h[:j + 1]
            beta = np.linalg.norm(w)
            tmat[j + 1, j] = beta
            if beta < _BREAKDOWN * max(1.0, np.abs(h).max()):
                # Invariant subspace found; continue with a fresh direction.
                w = rng.standard_normal(two_n)
                w, _ = _orthogonalize(w, vbasis, jbasis)
                wnorm = np.linalg.norm(w)
                if wnorm < 1e-8:
                    # Isotropic space exhausted; truncate the factorization.
                    j_cur = j + 1
                    return
                w = w / wnorm
                tmat[j + 1, j] = 0.0
            else:
                w = w / beta
            vbasis.append(w)
            jbasis.append(lin.apply_J(w))
        j_cur = m_max

    while True:
        expand(j_cur)
        m_eff = j_cur
        exhausted = m_eff < m_max
        varr = np.column_stack(vbasis)
        iso = np.abs(varr.T @ np.column_stack(jbasis))
        stats["isotropy_max"] = max(stats["isotropy_max"], float(iso.max()))
        stats["n_ops"] = op.n_applies

        a_small = tmat[:m_eff, :m_eff]
        theta, zvec = np.linalg.eig(a_small)
        order = np.argsort(-np.abs(theta))
        n_check = m_eff if exhausted else min(m_eff, 2 * n_wanted + 4)
        ritz = [varr[:, :m_eff] @ zvec[:, i] for i in order[:n_check]]
        reps = _dedup(_extract_candidates(lin, pencil, ritz, shift, tol))
        done = len(reps) >= n_wanted or exhausted
        if done or stats["restarts"] >= max_restarts:
            if not done:
                log.warning("SHIRA: no convergence after %d restarts "
                            "(%d/%d converged)", max_restarts, len(reps),
                            n_wanted)
            reps = sorted(reps, key=lambda t: abs(t[0] - shift))
            return _build_spectrum(pencil, reps, shift,
                                   done or len(reps) >= n_wanted, stats, tol)

        # Krylov-Schur restart keeping the largest-|theta| Ritz values.
        stats["restarts"] += 1
        k_keep = max(n_wanted + 2, m_eff // 2)
        cutoff = np.sort(np.abs(theta))[-min(k_keep, m_eff)]
        s_mat, q_mat, sdim = scipy.linalg.schur(
            a_small, output="real",
            sort=lambda ar, ai: np.hypot(ar, ai) >= cutoff * (1 - 1e-12))
        sdim = max(1, min(sdim, m_eff - 1))
        vkeep = varr[:, :m_eff] @ q_mat[:, :sdim]
        vlast = vbasis[m_eff]
        spike = tmat[m_eff, :m_eff] @ q_mat[:, :sdim]
        tmat[:, :] = 0.0
        tmat[:sdim, :sdim] = s_mat[:sdim, :sdim]
        tmat[sdim, :sdim] = spike
        vbasis = [vkeep[:, i] for i in range(sdim)] + [vlast]
        jbasis = [lin.apply_J(v) for v in vbasis]
        j_cur = sdim


def linearize_standard(pencil: PencilMatrices):
    """Sparse blocks of the standard linearization A x = mu B x."""
    n = pencil.n_dofs
    eye = sp.identity(n, format="csr")
    a_mat = sp.bmat([[None, eye], [-pencil.K, -pencil.G]], format="csr")
    b_mat = sp.block_diag((eye, pencil.M), format="csr")
    return a_mat, b_mat


def arnoldi_eigs(pencil: PencilMatrices, mu0: complex, n_wanted: int,
                 tol: float = 1e-9, max_restarts: int = 50,
                 seed: int = 7) -> Spectrum:
    """Shift-invert ARPACK on the standard linearization (fallback path).

    A single complex shift does not target the full quadruple, so twice
    n_wanted Ritz pairs are requested and results are symmetrized by mirror
    synthesis (mirror residuals are exact by the structure of M, G, K).
    """
    a_mat, b_mat = linearize_standard(pencil)
    n = pencil.n_dofs
    k = min(2 * n_wanted + 2, 2 * n - 2)
    shift = complex(mu0)
    stats = {"shift_retries": 0}
    converged = True
    v0 = np.random.default_rng(seed).standard_normal(2 * n)
    try:
        theta, xvec = spla.eigs(a_mat, k=k, M=b_mat, sigma=shift,
                                which="LM", tol=min(tol, 1e-10),
                                maxiter=max_restarts * 10 * k, v0=v0)
    except spla.ArpackNoConvergence as exc:
        theta, xvec = exc.eigenvalues, exc.eigenvectors
        converged = False
    cands = []
    for i, mu in enumerate(theta):
        u = xvec[:n, i]
        if np.linalg.norm(u) < 1e-12 * np.linalg.norm(xvec[:, i]):
            u = xvec[n:, i] / mu
        mu_ref, u, res = _polish(pencil, mu, u, tol)
        if res <= tol:
            cands.append((mu_ref, u / np.linalg.norm(u), res))
    reps = sorted(_dedup(cands), key=lambda t: abs(t[0] - shift))
    if len(reps) < n_wanted:
        converged = False
    return _build_spectrum(pencil, reps, shift, converged, stats, tol)


def dense_eigs(pencil: PencilMatrices) -> Spectrum:
    """Full spectrum of the standard linearization by a dense QZ solve."""
    n = pencil.n_dofs
    if 2 * n > DENSE_GUARD:
        raise SizeGuardError(f"dense solve blocked for 2N={2 * n}")
    a_mat, b_mat = linearize_standard(pencil)
    theta, xvec = scipy.linalg.eig(a_mat.toarray(), b_mat.toarray())
    entries = []
    for i, mu in enumerate(theta):
        u = xvec[:n, i]
        if np.linalg.norm(u) < 1e-12 * np.linalg.norm(xvec[:, i]) and mu != 0:
            u = xvec[n:, i] / mu
        nrm = np.linalg.norm(u)
        u = u / nrm if nrm > 0 else u
        entries.append(EigEntry(mu=complex(mu), lam=complex(-1j * mu),
                                residual=pencil_residual(pencil, mu, u),
                                vector=u))
    entries.sort(key=lambda e: (e.mu.real, e.mu.imag))
    return Spectrum(entries=entries, shift=0.0, converged=True,
                    stats={"method": "dense"})
