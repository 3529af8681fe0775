import numpy as np
import pytest

from blochband.assembly import PencilFactory
from blochband.material import dobson_model, homogeneous_model
from blochband.mesh import build_structured_mesh
from blochband.qep import EigEntry, Spectrum
from blochband.sweep import (GapInterval, PointSolver, SolverSettings,
                             SweepConfig, analytic_homogeneous_spectrum,
                             config_digest, filter_bz, is_gap_frequency,
                             real_branch_surfaces, sweep_band_structure)


def spectrum_of(lams):
    entries = [EigEntry(mu=1j * lam, lam=lam, residual=0.0) for lam in lams]
    return Spectrum(entries=entries, shift=0.0)


def test_filter_bz_window():
    spec = spectrum_of([0.3, 0.99, 1.01, -1.5, 0.5 + 2.0j])
    kept = filter_bz(spec, 0.0, 1.0)
    assert set(np.round(kept.real, 6)) == {0.3, 0.99}
    # Wider window at theta = pi/4: radius sqrt(2).
    kept45 = filter_bz(spec, np.pi / 4, 1.0)
    assert 1.01 in np.round(kept45.real, 6)
    # Strict zone constant: radius 1/2 at theta = 0.
    assert list(filter_bz(spec, 0.0, 0.5).real) == [0.3]


def test_filter_bz_rejects_bad_theta():
    with pytest.raises(ValueError):
        filter_bz(spectrum_of([0.1]), 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(omega_range=(0.5, 0.1))
    with pytest.raises(ValueError):
        SweepConfig(omega_step=0.0)
    with pytest.raises(ValueError):
        SweepConfig(gap_threshold=1e-12)
    with pytest.raises(ValueError):
        SweepConfig(solver=SolverSettings(algorithm="magic"))


def test_grids():
    cfg = SweepConfig(omega_range=(0.1, 0.2), omega_step=0.05, theta_count=3)
    assert np.allclose(cfg.omegas(), [0.1, 0.15, 0.2])
    assert np.allclose(cfg.thetas(), [0.0, np.pi / 8, np.pi / 4])
    assert SweepConfig(theta_count=1).thetas().tolist() == [0.0]


def test_config_digest_stable():
    a = SweepConfig()
    b = SweepConfig()
    assert config_digest(a) == config_digest(b)
    c = SweepConfig(omega_step=1e-3)
    assert config_digest(a) != config_digest(c)


def test_analytic_spectrum_zero_frequency():
    lams = analytic_homogeneous_spectrum(0.0, (1.0, 0.0), m_range=2)
    for lam in lams:
        err = min(abs(lam - (a + 1j * b))
                  for a in range(-3, 4) for b in range(-3, 4))
        assert err < 1e-14


def test_analytic_spectrum_free_branch():
    # The m = (0, 0) branch gives lambda = +-omega for any direction.
    for theta in (0.0, np.pi / 6):
        k_hat = (np.cos(theta), np.sin(theta))
        lams = analytic_homogeneous_spectrum(0.37, k_hat, m_range=1)
        assert np.min(np.abs(lams - 0.37)) < 1e-14
        assert np.min(np.abs(lams + 0.37)) < 1e-14


def test_analytic_spectrum_scaling():
    lams = analytic_homogeneous_spectrum(0.2, (1.0, 0.0), eps=4.0, m_range=0)
    assert np.allclose(sorted(lams.real), [-0.4, 0.4])
    with pytest.raises(ValueError):
        analytic_homogeneous_spectrum(0.1, (1.0, 0.0), eps=0.0)


@pytest.fixture(scope="module")
def dobson_solver():
    cfg = SweepConfig(omega_step=4e-3, theta_count=5)
    factory = PencilFactory(build_structured_mesh(10), dobson_model())
    return PointSolver(factory, cfg)


def test_gap_verdicts(dobson_solver):
    thetas = dobson_solver.config.thetas()
    assert is_gap_frequency(0.26, thetas, dobson_solver)[0] is True
    assert is_gap_frequency(0.20, thetas, dobson_solver)[0] is False
    assert is_gap_frequency(0.0, thetas, dobson_solver)[0] is False


def test_point_records(dobson_solver):
    rec = dobson_solver.point(0.26, 0.0)
    assert rec.determinate
    assert rec.margin > 1e-2
    assert np.all(np.abs(rec.filtered) <= 1.0 + 1e-12)
    # 0.20 is only a directional gap: the real branch shows up near pi/4.
    rec2 = dobson_solver.point(0.20, np.pi / 4)
    assert rec2.margin < 1e-10


def test_sweep_finds_first_gap():
    cfg = SweepConfig(omega_range=(0.22, 0.29), omega_step=5e-3,
                      theta_count=5, endpoint_tolerance=1e-4,
                      full_grid=False)
    report = sweep_band_structure(cfg, build_structured_mesh(10),
                                  dobson_model())
    assert len(report.gaps) == 1
    gap = report.gaps[0]
    assert isinstance(gap, GapInterval)
    assert not gap.indeterminate
    # n = 10 endpoints land within a few mesh-error units of the converged
    # values near 0.247 and 0.270.
    assert abs(gap.lo - 0.247) < 5e-3
    assert abs(gap.hi - 0.270) < 5e-3
    assert report.provenance["isotropy_max"] <= 1e-10
    assert report.provenance["n_dofs"] == 400
    # Stored points must not retain eigenvectors (memory contract).
    assert all(e.vector is None
               for rec in report.points for e in rec.spectrum.entries)


def test_sweep_homogeneous_control_sample():
    cfg = SweepConfig(omega_range=(0.1, 0.5), omega_step=0.1, theta_count=3,
                      full_grid=False)
    report = sweep_band_structure(cfg, build_structured_mesh(8),
                                  homogeneous_model())
    assert report.gaps == []
    assert all(v is False for v in report.verdicts.values())


def test_real_branch_surfaces_sorted():
    cfg = SweepConfig(omega_range=(0.3, 0.32), omega_step=0.01,
                      theta_count=3)
    report = sweep_band_structure(cfg, build_structured_mesh(8),
                                  homogeneous_model())
    rows = real_branch_surfaces(report)
    assert rows == sorted(rows)
    assert len(rows) > 0
    for theta, lam, omega in rows:
        assert abs(lam) <= 1.0 / np.cos(theta) + 1e-9
