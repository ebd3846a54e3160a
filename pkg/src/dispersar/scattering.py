"""Scalar scattering by a dielectric sphere and its backscatter spectrum.

A unit-amplitude plane wave hits a sphere of radius `radius` whose
interior wavenumber is k1 = k0 * n_rel. Matching the total field and
its radial derivative at the surface decouples into independent 2x2
systems per multipole order (Legendre orthogonality), solved in closed
form. The backscatter amplitude evaluated over a frequency grid is the
frequency-dependent reflectivity used by the scene synthesizer, and
the radar cross-section follows as 4*pi*|amplitude|^2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError
from .specfun import (
    spherical_h1_deriv_seq,
    spherical_h1_seq,
    spherical_jn_deriv_seq,
    spherical_jn_seq,
)

# i^n and (-1)^n * i^(-n-1) repeat with period 4
_INC_PHASE = np.array([1.0 + 0j, 1j, -1.0 + 0j, -1j])
_BACKSCATTER_PHASE = np.array([-1j, 1.0 + 0j, 1j, -1.0 + 0j])


@dataclass(frozen=True)
class SphereSpec:
    """Dielectric sphere: radius (m), relative refractive index, series order."""

    radius: float
    n_rel: float
    n_max: int = 32

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.n_rel > 0:
            raise ValueError(f"n_rel must be positive, got {self.n_rel}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def geometric_cross_section(self) -> float:
        """sigma_g = pi * radius^2, the RCS normalization scale (m^2)."""
        return float(np.pi * self.radius**2)


@dataclass
class ReflectivitySpectrum:
    """Complex backscatter amplitude (m) sampled on increasing frequencies (rad/s)."""

    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.omegas.ndim != 1 or self.omegas.shape != self.values.shape:
            raise ValueError("omegas and values must be 1-d arrays of equal length")
        if len(self.omegas) and np.any(np.diff(self.omegas) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    @classmethod
    def flat(cls, omegas, rho: complex) -> "ReflectivitySpectrum":
        """Frequency-independent spectrum: the classical point-target stub."""
        omegas = np.asarray(omegas, dtype=float)
        return cls(omegas, np.full(omegas.shape, rho, dtype=complex))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["omega_rad_s", "re_rho", "im_rho"])
            for om, v in zip(self.omegas, self.values):
                w.writerow([f"{om:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "ReflectivitySpectrum":
        rows = list(csv.reader(open(path, newline="")))
        if not rows or rows[0] != ["omega_rad_s", "re_rho", "im_rho"]:
            raise ValueError(f"{path}: not a reflectivity spectrum CSV")
        data = np.array([[float(c) for c in r] for r in rows[1:]])
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2])


def expansion_coefficients(sphere: SphereSpec, k0: float):
    """Multipole coefficients (scattered a_n, interior b_n) for exterior wavenumber k0.

    Solves, for each order n up to sphere.n_max, the 2x2 continuity
    system at the surface with incident-wave coefficients (2n+1) i^n
    and interior wavenumber k1 = k0 * n_rel.
    """
    if not k0 > 0:
        raise ValueError(f"wavenumber must be positive, got {k0}")
    k1 = k0 * sphere.n_rel
    x0 = k0 * sphere.radius
    x1 = k1 * sphere.radius
    n_max = sphere.n_max

    j0 = spherical_jn_seq(n_max, x0)
    j0p = spherical_jn_deriv_seq(n_max, x0)
    h0 = spherical_h1_seq(n_max, x0)
    h0p = spherical_h1_deriv_seq(n_max, x0)
    j1 = spherical_jn_seq(n_max, x1)
    j1p = spherical_jn_deriv_seq(n_max, x1)

    orders = np.arange(n_max + 1)
    c = (2 * orders + 1) * _INC_PHASE[orders % 4]

    det = k1 * h0 * j1p - k0 * j1 * h0p
    bad = ~np.isfinite(det) | (np.abs(det) == 0.0)
    if np.any(bad):
        n_bad = int(orders[bad][0])
        raise SingularSystemError(
            f"mode-matching system singular at n={n_bad} "
            f"(k0*radius={x0:.6g}, n_rel={sphere.n_rel:.6g})"
        )
    a = -c * (k1 * j0 * j1p - k0 * j1 * j0p) / det

    # b from whichever continuity equation has the better-conditioned divisor
    num_field = c * j0 + a * h0
    num_deriv = k0 * (c * j0p + a * h0p)
    use_field = np.abs(j1) >= np.abs(k1 * j1p / k0)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(use_field, num_field / j1, num_deriv / (k1 * j1p))
    return a, b


def boundary_residual(sphere: SphereSpec, k0: float, a, b) -> float:
    """Max relative residual of both continuity equations; tests' anchor."""
    k1 = k0 * sphere.n_rel
    x0 = k0 * sphere.radius
    x1 = k1 * sphere.radius
    n_max = sphere.n_max
    orders = np.arange(n_max + 1)
    c = (2 * orders + 1) * _INC_PHASE[orders % 4]
    j0 = spherical_jn_seq(n_max, x0)
    j0p = spherical_jn_deriv_seq(n_max, x0)
    h0 = spherical_h1_seq(n_max, x0)
    h0p = spherical_h1_deriv_seq(n_max, x0)
    j1 = spherical_jn_seq(n_max, x1)
    j1p = spherical_jn_deriv_seq(n_max, x1)

    r1 = c * j0 + a * h0 - b * j1
    r2 = k0 * (c * j0p + a * h0p) - k1 * b * j1p
    s1 = np.abs(c * j0) + np.abs(a * h0) + np.abs(b * j1)
    s2 = np.abs(k0 * c * j0p) + np.abs(k0 * a * h0p) + np.abs(k1 * b * j1p)
    rel1 = np.abs(r1) / np.where(s1 > 0, s1, 1.0)
    rel2 = np.abs(r2) / np.where(s2 > 0, s2, 1.0)
    return float(max(rel1.max(), rel2.max()))


def backscatter_amplitude(a_coeffs, k0: float) -> complex:
    """Far-field backscatter amplitude (m) from the scattered-field coefficients."""
    a_coeffs = np.asarray(a_coeffs)
    if a_coeffs.size == 0:
        raise ValueError("coefficient list must be nonempty")
    orders = np.arange(a_coeffs.size)
    return complex((_BACKSCATTER_PHASE[orders % 4] * a_coeffs).sum() / k0)


def reflectivity_spectrum(sphere: SphereSpec, omegas, wave_speed: float) -> ReflectivitySpectrum:
    """Backscatter amplitude of `sphere` sampled on the supplied frequency grid."""
    omegas = np.asarray(omegas, dtype=float)
    if np.any(omegas <= 0) or np.any(np.diff(omegas) <= 0):
        raise ValueError("frequencies must be positive and strictly increasing")
    values = np.empty(omegas.shape, dtype=complex)
    for i, om in enumerate(omegas):
        k0 = om / wave_speed
        a, _ = expansion_coefficients(sphere, k0)
        values[i] = backscatter_amplitude(a, k0)
    return ReflectivitySpectrum(omegas, values)


def rcs(amplitude, radius: float | None = None):
    """Radar cross-section 4*pi*|amplitude|^2 (m^2), elementwise on arrays.

    With `radius`, the result is normalized by the geometric
    cross-section pi*radius^2.
    """
    sigma = 4.0 * np.pi * np.abs(np.asarray(amplitude)) ** 2
    if radius is not None:
        if not radius > 0:
            raise ValueError(f"normalization radius must be positive, got {radius}")
        sigma = sigma / (np.pi * radius**2)
    if sigma.ndim == 0:
        return float(sigma)
    return sigma
