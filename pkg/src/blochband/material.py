"""Piecewise permittivity models: background + disk inclusion on the torus."""

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

# Resolution of the scan used to bound a law's range over the valid interval.
_SCAN_STEP = 1e-3


class FrequencyRangeError(ValueError):
    """Frequency outside the model's declared validity interval."""


class MaterialConfigError(ValueError):
    """Invalid material configuration (pole in range, non-positive values...)."""


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, omega):
        return self.value * np.ones_like(np.asarray(omega, dtype=float))

    def describe(self) -> str:
        return f"constant eps = {self.value}"


@dataclass(frozen=True)
class Rational:
    """Single-resonance law eps(w) = a + b / (c - w^2)."""

    a: float
    b: float
    c: float

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.a + self.b / (self.c - omega ** 2)

    def poles(self):
        if self.c <= 0:
            return ()
        return (-np.sqrt(self.c), np.sqrt(self.c))

    def describe(self) -> str:
        return f"eps(w) = {self.a} + {self.b}/({self.c} - w^2)"


def _law_violations(law, omega_range, label):
    lo, hi = omega_range
    out = []
    if isinstance(law, Rational):
        for p in law.poles():
            if lo <= p <= hi:
                out.append(f"{label}: pole of {law.describe()} at omega={p:.6g} "
                           f"inside valid range [{lo}, {hi}]")
    if not out:
        c0, c1 = _law_bounds(law, omega_range)
        if c0 <= 0:
            out.append(f"{label}: {law.describe()} is not positive on "
                       f"[{lo}, {hi}] (min {c0:.6g})")
    return out


def _law_bounds(law, omega_range):
    """Min/max of the law over the range; scan plus endpoints.

    Rational laws with pole outside the range are monotone in omega^2 on the
    range, so the scan is a safety net rather than a necessity.
    """
    lo, hi = omega_range
    n = max(2, int(np.ceil((hi - lo) / _SCAN_STEP)) + 1)
    vals = law(np.linspace(lo, hi, n))
    return float(np.min(vals)), float(np.max(vals))


@dataclass
class MaterialModel:
    """Background law plus a disk inclusion centered in the fundamental cell.

    The benchmark geometry (relative cylinder diameter 0.75, lattice constant
    2*pi) corresponds to inclusion_radius = 0.75 * pi.
    """

    background: object
    inclusion: object
    inclusion_radius: float = 0.75 * np.pi
    inclusion_center: tuple = (0.0, 0.0)
    valid_range: tuple = (0.0, 0.7)
    bounds: tuple = field(init=False, default=None)

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise MaterialConfigError("; ".join(problems))
        mins, maxs = zip(_law_bounds(self.background, self.valid_range),
                         _law_bounds(self.inclusion, self.valid_range))
        self.bounds = (min(mins), max(maxs))

    def violations(self):
        out = []
        if self.inclusion_radius <= 0:
            out.append(f"inclusion radius must be positive, "
                       f"got {self.inclusion_radius}")
        elif self.inclusion_radius >= np.pi:
            out.append(f"inclusion disk (radius {self.inclusion_radius:.6g}) "
                       f"does not fit inside the fundamental cell")
        if not (self.valid_range[0] < self.valid_range[1]):
            out.append(f"empty frequency range {self.valid_range}")
            return out
        out += _law_violations(self.background, self.valid_range, "background")
        out += _law_violations(self.inclusion, self.valid_range, "inclusion")
        return out

    def _check_omega(self, omega):
        lo, hi = self.valid_range
        if not (lo <= omega <= hi):
            raise FrequencyRangeError(
                f"omega={omega} outside valid range [{lo}, {hi}]")

    def eval(self, x, omega: float):
        """Permittivity at point(s) x; x is reduced modulo the lattice first.

        Points exactly on the disk boundary take the background value.
        """
        self._check_omega(omega)
        x = np.asarray(x, dtype=float)
        d = x.reshape(-1, 2) - np.asarray(self.inclusion_center)
        # Reduce to the symmetric cell around the inclusion center.
        d -= TWO_PI * np.round(d / TWO_PI)
        inside = np.hypot(d[:, 0], d[:, 1]) < self.inclusion_radius
        vals = np.where(inside,
                        float(self.inclusion(omega)),
                        float(self.background(omega)))
        return vals[0] if x.ndim == 1 else vals.reshape(x.shape[:-1])


def validate_model(background, inclusion, inclusion_radius=0.75 * np.pi,
                   inclusion_center=(0.0, 0.0), valid_range=(0.0, 0.7)):
    """Violation list for a prospective model without constructing it."""
    probe = object.__new__(MaterialModel)
    probe.background = background
    probe.inclusion = inclusion
    probe.inclusion_radius = inclusion_radius
    probe.inclusion_center = inclusion_center
    probe.valid_range = valid_range
    return MaterialModel.violations(probe)


def dobson_model(valid_range=(0.0, 0.7)) -> MaterialModel:
    """Frequency-independent benchmark: air background, eps = 8.9 cylinders."""
    return MaterialModel(background=Constant(1.0), inclusion=Constant(8.9),
                         valid_range=valid_range)


def resonant_model(valid_range=(0.0, 0.7)) -> MaterialModel:
    """Frequency-dependent benchmark: eps2(w) = 1 + 5.34/(1 - w^2) cylinders."""
    return MaterialModel(background=Constant(1.0),
                         inclusion=Rational(1.0, 5.34, 1.0),
                         valid_range=valid_range)


def homogeneous_model(eps: float = 1.0, valid_range=(0.0, 0.7)) -> MaterialModel:
    """Constant permittivity everywhere; used by the analytic oracles."""
    return MaterialModel(background=Constant(eps), inclusion=Constant(eps),
                         valid_range=valid_range)
