"""Band-structure sweep: frequency x angle grid, Brillouin-zone filtering,
gap classification with bisected endpoints, and analytic oracles."""

import hashlib
import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .assembly import PencilFactory
from .material import MaterialModel
from .mesh import PeriodicMesh
from .qep import (FactorizationError, HamiltonianLinearization, Spectrum,
                  arnoldi_eigs, dense_eigs, shira_eigs)

log = logging.getLogger(__name__)


@dataclass
class SolverSettings:
    algorithm: str = "shira"          # shira | ira | dense
    shift: complex = 0.05 + 0.25j
    tolerance: float = 1e-9
    max_restarts: int = 50
    fallback: bool = True             # IRA fallback on SHIRA non-convergence
    subspace_dim: int = 40

    def __post_init__(self):
        if self.algorithm not in ("shira", "ira", "dense"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class SweepConfig:
    omega_range: tuple = (0.0, 0.7)
    omega_step: float = 2e-3
    theta_count: int = 17             # grid over [0, pi/4]
    n_eigs: int = 24                  # eigenvalues per point (4 per quadruple)
    bz_filter_constant: float = 1.0   # |lambda| <= c / cos(theta)
    gap_threshold: float = 1e-6
    endpoint_tolerance: float = 1e-5
    full_grid: bool = True            # False: skip remaining angles once a
                                      # frequency is classified as not a gap
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if not self.omega_range[0] < self.omega_range[1]:
            raise ValueError(f"empty omega range {self.omega_range}")
        if self.omega_step <= 0:
            raise ValueError("omega_step must be positive")
        if self.theta_count < 1:
            raise ValueError("theta_count must be >= 1")
        if self.gap_threshold <= self.solver.tolerance:
            raise ValueError("gap_threshold must exceed the solver tolerance")

    def thetas(self) -> np.ndarray:
        if self.theta_count == 1:
            return np.array([0.0])
        return np.linspace(0.0, np.pi / 4, self.theta_count)

    def omegas(self) -> np.ndarray:
        lo, hi = self.omega_range
        n = int(np.floor((hi - lo) / self.omega_step + 1e-9)) + 1
        grid = lo + self.omega_step * np.arange(n)
        return np.minimum(grid, hi)  # guard against float overshoot at hi

    def n_quadruples(self) -> int:
        return max(2, self.n_eigs // 4)


@dataclass
class PointResult:
    omega: float
    theta: float
    spectrum: Spectrum
    filtered: np.ndarray      # lambda values inside the Brillouin-zone window
    margin: float             # min |Im lambda| over filtered (inf if empty)
    determinate: bool


@dataclass
class GapInterval:
    lo: float
    hi: float
    margin: float             # min gap margin over interior samples
    indeterminate: bool = False


@dataclass
class GapReport:
    points: list              # PointResult records, omega-major order
    omega_grid: np.ndarray
    margins: dict             # omega -> gap margin (min over theta)
    verdicts: dict            # omega -> True | False | None (indeterminate)
    gaps: list                # GapInterval records
    provenance: dict


def filter_bz(spectrum: Spectrum, theta: float, c: float = 1.0) -> np.ndarray:
    """Eigenvalues whose quasimomentum lies in the first Brillouin zone.

    Keeps lambda with |lambda| <= c / cos(theta); c = 1 reproduces the
    published filter, c = 0.5 the strict zone (-1/2, 1/2].
    """
    if not 0.0 <= theta <= np.pi / 4 + 1e-12:
        raise ValueError(f"theta {theta} outside [0, pi/4]")
    lams = spectrum.lams()
    if len(lams) == 0:
        return lams
    return lams[np.abs(lams) <= c / np.cos(theta)]


def _zero_filter(lams: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Drop the ever-present lambda = 0 eigenvalue; it carries no gap data."""
    if len(lams) == 0:
        return lams
    return lams[np.abs(lams) > tol]


class PointSolver:
    """Solves single (omega, theta) points with retry and fallback policy."""

    # Converged representatives must reach at least this far from the shift
    # quadruple so no in-zone eigenvalue can hide beyond the converged set.
    cover_radius = 1.55

    def __init__(self, factory: PencilFactory, config: SweepConfig):
        self.factory = factory
        self.config = config
        self.n_fallbacks = 0
        self.n_retries = 0
        self.isotropy_max = 0.0

    def _coverage(self, spectrum: Spectrum) -> float:
        mus = spectrum.mus(include_mirrored=False)
        if len(mus) == 0:
            return 0.0
        s = spectrum.shift
        quad = (s, -s, np.conj(s), -np.conj(s))
        return max(min(abs(mu - q) for q in quad) for mu in mus)

    def solve(self, omega: float, theta: float) -> Spectrum:
        cfg = self.config
        slv = cfg.solver
        pencil = self.factory.pencil(omega, (np.cos(theta), np.sin(theta)))
        n_quad = cfg.n_quadruples()
        if slv.algorithm == "dense":
            return dense_eigs(pencil)
        if slv.algorithm == "ira":
            return arnoldi_eigs(pencil, slv.shift, n_quad * 2,
                                tol=slv.tolerance,
                                max_restarts=slv.max_restarts)

        lin = HamiltonianLinearization(pencil)
        spec = shira_eigs(lin, slv.shift, n_quad, tol=slv.tolerance,
                          max_restarts=slv.max_restarts,
                          subspace_dim=slv.subspace_dim)
        self.isotropy_max = max(self.isotropy_max,
                                spec.stats.get("isotropy_max", 0.0))
        ok = spec.converged and self._coverage(spec) >= self.cover_radius
        if not ok:
            # Shift collisions are the common failure; retry once perturbed.
            self.n_retries += 1
            try:
                spec2 = shira_eigs(lin, slv.shift * 1.07 + 0.013j,
                                   n_quad, tol=slv.tolerance,
                                   max_restarts=slv.max_restarts,
                                   subspace_dim=slv.subspace_dim)
                self.isotropy_max = max(self.isotropy_max,
                                        spec2.stats.get("isotropy_max", 0.0))
                if spec2.converged and (self._coverage(spec2)
                                        >= self.cover_radius):
                    return spec2
                if len(spec2.entries) > len(spec.entries):
                    spec = spec2
            except FactorizationError:
                pass
            if slv.fallback:
                self.n_fallbacks += 1
                spec3 = arnoldi_eigs(pencil, slv.shift, n_quad * 2,
                                     tol=slv.tolerance,
                                     max_restarts=slv.max_restarts)
                if spec3.converged:
                    return spec3
            spec.converged = spec.converged and (self._coverage(spec)
                                                 >= self.cover_radius)
        return spec

    def point(self, omega: float, theta: float) -> PointResult:
        spec = self.solve(omega, theta)
        lams = _zero_filter(filter_bz(spec, theta,
                                      self.config.bz_filter_constant))
        margin = float(np.min(np.abs(lams.imag))) if len(lams) else np.inf
        return PointResult(omega=omega, theta=theta, spectrum=spec,
                           filtered=lams, margin=margin,
                           determinate=spec.converged)


def is_gap_frequency(omega: float, thetas, solver: PointSolver,
                     tau_gap: float = None):
    """Gap verdict at one frequency: no real in-zone eigenvalue at any angle.

    Returns (verdict, margin); verdict is None when any angle is
    indeterminate and no real eigenvalue was found (never silently a gap).
    omega = 0 is never a gap: the pencil has the zero eigenvalue with
    constant eigenfunction there.
    """
    tau = solver.config.gap_threshold if tau_gap is None else tau_gap
    if omega == 0.0:
        return False, 0.0
    margin = np.inf
    indeterminate = False
    for theta in thetas:
        rec = solver.point(omega, theta)
        if not rec.determinate:
            indeterminate = True
            continue
        margin = min(margin, rec.margin)
        if rec.margin <= tau:
            return False, float(margin)
    if indeterminate:
        return None, float(margin)
    return margin > tau, float(margin)


def _bisect_endpoint(solver, thetas, omega_gap, omega_nogap, tol):
    """Locate the gap boundary between a gap sample and a non-gap sample."""
    indeterminate = False
    while abs(omega_gap - omega_nogap) > tol:
        mid = 0.5 * (omega_gap + omega_nogap)
        verdict, _ = is_gap_frequency(mid, thetas, solver)
        if verdict is None:
            indeterminate = True
            verdict = False  # conservative: shrink the gap
        if verdict:
            omega_gap = mid
        else:
            omega_nogap = mid
    return 0.5 * (omega_gap + omega_nogap), indeterminate


def config_digest(config: SweepConfig, extra: dict = None) -> str:
    payload = asdict(config)
    payload["solver"]["shift"] = repr(payload["solver"]["shift"])
    if extra:
        payload.update(extra)
    blob = json.dumps(payload, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def sweep_band_structure(config: SweepConfig, mesh: PeriodicMesh,
                         model: MaterialModel) -> GapReport:
    """Scan the frequency grid, classify gaps, and refine gap endpoints."""
    factory = PencilFactory(mesh, model)
    solver = PointSolver(factory, config)
    thetas = config.thetas()
    omegas = config.omegas()

    points = []
    margins = {}
    verdicts = {}
    for omega in omegas:
        if omega == 0.0:
            # Classified directly; the zero eigenvalue is exact there.
            margins[omega] = 0.0
            verdicts[omega] = False
            continue
        margin = np.inf
        indet = False
        for theta in thetas:
            rec = solver.point(omega, theta)
            for e in rec.spectrum.entries:
                e.vector = None  # full sweeps would otherwise hold GBs
            points.append(rec)
            if rec.determinate:
                margin = min(margin, rec.margin)
            else:
                indet = True
            if (not config.full_grid and rec.determinate
                    and rec.margin <= config.gap_threshold):
                break
        margins[omega] = float(margin)
        if indet and margin > config.gap_threshold:
            verdicts[omega] = None
        else:
            verdicts[omega] = bool(margin > config.gap_threshold)
        log.debug("omega=%.4f margin=%.3e verdict=%s", omega,
                  margins[omega], verdicts[omega])

    gaps = []
    i = 0
    n_om = len(omegas)
    while i < n_om:
        if verdicts[omegas[i]] is not True:
            i += 1
            continue
        j = i
        has_indet = False
        while j + 1 < n_om and verdicts[omegas[j + 1]] is not False:
            j += 1
            has_indet |= verdicts[omegas[j]] is None
        lo, hi = omegas[i], omegas[j]
        if i > 0:
            lo, ind = _bisect_endpoint(solver, thetas, omegas[i],
                                       omegas[i - 1],
                                       config.endpoint_tolerance)
            has_indet |= ind
        if j + 1 < n_om:
            hi, ind = _bisect_endpoint(solver, thetas, omegas[j],
                                       omegas[j + 1],
                                       config.endpoint_tolerance)
            has_indet |= ind
        interior = [margins[w] for w in omegas[i:j + 1]]
        gaps.append(GapInterval(lo=float(lo), hi=float(hi),
                                margin=float(min(interior)),
                                indeterminate=has_indet))
        i = j + 1

    provenance = {
        "n_per_side": mesh.n_per_side,
        "h_over_2pi": 1.0 / mesh.n_per_side,
        "n_dofs": mesh.n_dofs,
        "background": model.background.describe(),
        "inclusion": model.inclusion.describe(),
        "inclusion_radius": model.inclusion_radius,
        "config_hash": config_digest(config),
        "solver_retries": solver.n_retries,
        "solver_fallbacks": solver.n_fallbacks,
        "isotropy_max": solver.isotropy_max,
    }
    return GapReport(points=points, omega_grid=omegas, margins=margins,
                     verdicts=verdicts, gaps=gaps, provenance=provenance)


def real_branch_surfaces(report: GapReport, tau: float = None):
    """(theta, lambda, omega) samples of the real spectral branches.

    Collects eigenvalues with negligible imaginary part and sorts them, which
    is how the spectral surfaces over (theta, lambda) are produced.
    """
    rows = []
    for rec in report.points:
        cut = tau if tau is not None else 1e-6
        for lam in rec.filtered:
            if abs(lam.imag) <= cut:
                rows.append((rec.theta, lam.real, rec.omega))
    rows.sort()
    return rows


def analytic_homogeneous_spectrum(omega: float, k_hat, eps: float = 1.0,
                                  m_range: int = 3) -> np.ndarray:
    """Exact quasimomentum amplitudes for a spatially constant permittivity.

    For each reciprocal-lattice index m the plane-wave branch contributes the
    two roots of |m + lambda k_hat|^2 = omega^2 eps.  At omega = 0 this
    reduces to the Gaussian-integer lattice for k_hat = (1, 0).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    k_hat = np.asarray(k_hat, dtype=float)
    rng = np.arange(-m_range, m_range + 1)
    m1, m2 = np.meshgrid(rng, rng, indexing="ij")
    mk = m1 * k_hat[0] + m2 * k_hat[1]
    disc = np.lib.scimath.sqrt(mk ** 2 - (m1 ** 2 + m2 ** 2)
                               + omega ** 2 * eps)
    lams = np.concatenate(((-mk + disc).ravel(), (-mk - disc).ravel()))
    return np.array(sorted(lams, key=lambda z: (z.real, z.imag)))
