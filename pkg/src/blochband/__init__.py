"""Bloch band structures of 2D periodic dielectric media (TM polarization).

Assembles the gyroscopic quadratic eigenvalue problem in the quasimomentum
amplitude on a periodic quadratic finite element mesh and solves it with a
structure-preserving shift-invert Krylov method; sweeps the frequency axis to
detect photonic band gaps.
"""

from .mesh import PeriodicMesh, build_structured_mesh
from .material import (Constant, Rational, MaterialModel, dobson_model,
                       resonant_model, homogeneous_model)
from .assembly import PencilMatrices, PencilFactory, assemble_pencil
from .qep import (Spectrum, EigEntry, HamiltonianLinearization, shira_eigs,
                  arnoldi_eigs, dense_eigs)
from .sweep import (SweepConfig, SolverSettings, GapReport, GapInterval,
                    sweep_band_structure, filter_bz, is_gap_frequency,
                    analytic_homogeneous_spectrum)

__version__ = "0.1.0"

__all__ = [
    "PeriodicMesh", "build_structured_mesh",
    "Constant", "Rational", "MaterialModel",
    "dobson_model", "resonant_model", "homogeneous_model",
    "PencilMatrices", "PencilFactory", "assemble_pencil",
    "Spectrum", "EigEntry", "HamiltonianLinearization",
    "shira_eigs", "arnoldi_eigs", "dense_eigs",
    "SweepConfig", "SolverSettings", "GapReport", "GapInterval",
    "sweep_band_structure", "filter_bz", "is_gap_frequency",
    "analytic_homogeneous_spectrum",
]
