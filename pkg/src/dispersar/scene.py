"""Acquisition geometry, target sets, forward data synthesis and noise.

The platform flies a linear aperture at constant offset and height;
the imaging plane is z = 0 with the origin at the center of the
imaging region. Measurements are the round-trip phase-delayed,
amplitude-attenuated reflectivities summed over targets, sampled on an
equispaced frequency grid spanning the system bandwidth.

All positions and lengths are SI meters internally; dimensionless
k0-scaled coordinates are an IO convention handled by callers.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .scattering import ReflectivitySpectrum

SPEED_OF_LIGHT = 3.0e8


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Linear-aperture collection geometry and its derived sampling grids.

    range_offset: ground-range offset R to the platform track (m)
    height: platform altitude H (m)
    aperture: synthetic aperture length (m)
    n_positions: spatial samples N along the aperture
    n_frequencies: frequency samples M across the band
    omega0: central angular frequency (rad/s)
    bandwidth: bandwidth B (Hz); the angular band spans 2*pi*B
    wave_speed: propagation speed (m/s)
    """

    range_offset: float
    height: float
    aperture: float
    n_positions: int
    n_frequencies: int
    omega0: float
    bandwidth: float
    wave_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("range_offset", "height", "aperture", "omega0", "bandwidth", "wave_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_positions < 2 or self.n_frequencies < 2:
            raise ValueError("need at least 2 positions and 2 frequencies")

    @cached_property
    def slant_range(self) -> float:
        """Distance L from the central platform position to the scene center."""
        return float(np.hypot(self.range_offset, self.height))

    @property
    def sin_theta(self) -> float:
        return self.range_offset / self.slant_range

    @property
    def cos_theta(self) -> float:
        return self.height / self.slant_range

    @property
    def k0(self) -> float:
        """Central wavenumber (rad/m)."""
        return self.omega0 / self.wave_speed

    @property
    def wavelength0(self) -> float:
        return 2 * np.pi / self.k0

    @cached_property
    def aperture_offsets(self) -> np.ndarray:
        """Along-track coordinates xi_n, from -aperture/2 to +aperture/2."""
        n = np.arange(self.n_positions)
        return -self.aperture / 2 + self.aperture * n / (self.n_positions - 1)

    @cached_property
    def positions(self) -> np.ndarray:
        """Platform positions (N, 3): (xi_n, R, H)."""
        xi = self.aperture_offsets
        out = np.column_stack(
            [xi, np.full_like(xi, self.range_offset), np.full_like(xi, self.height)]
        )
        out.setflags(write=False)
        return out

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Equispaced k_m spanning 2*pi*B/c around the central wavenumber."""
        m = np.arange(self.n_frequencies)
        step = 2 * np.pi * self.bandwidth / self.wave_speed
        return self.k0 + step * (-0.5 + m / (self.n_frequencies - 1))

    @cached_property
    def omegas(self) -> np.ndarray:
        return self.wave_speed * self.wavenumbers

    def param_hash(self) -> str:
        payload = json.dumps(
            [
                self.range_offset, self.height, self.aperture,
                self.n_positions, self.n_frequencies,
                self.omega0, self.bandwidth, self.wave_speed,
            ],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def make_gotcha_geometry() -> AcquisitionGeometry:
    """Reference configuration: 9.6 GHz center, 622 MHz band, 25 x 32 samples."""
    return AcquisitionGeometry(
        range_offset=3550.0,
        height=7300.0,
        aperture=130.0,
        n_positions=32,
        n_frequencies=25,
        omega0=2 * np.pi * 9.6e9,
        bandwidth=6.22e8,
    )


@dataclass(frozen=True)
class Target:
    """Point target: position in the imaging plane plus its reflectivity spectrum."""

    position: np.ndarray
    spectrum: ReflectivitySpectrum

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,):
            raise ValueError(f"position must be a 3-vector, got shape {pos.shape}")
        if pos[2] != 0.0:
            raise ValueError(f"targets live in the z=0 imaging plane, got z={pos[2]}")
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class TargetSet:
    targets: tuple

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.targets) < 1:
            raise ValueError("need at least one target")

    def __len__(self):
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    def validate_grid(self, geometry: AcquisitionGeometry) -> None:
        for q, t in enumerate(self.targets):
            if t.spectrum.omegas.shape != geometry.omegas.shape or not np.allclose(
                t.spectrum.omegas, geometry.omegas, rtol=1e-12, atol=0.0
            ):
                raise ValueError(f"target {q}: spectrum grid differs from geometry grid")


@dataclass
class DataMatrix:
    """Complex measurements, frequencies along rows, positions along columns."""

    values: np.ndarray
    snr_db: float | None = None
    seed: int | None = None
    geometry_hash: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2:
            raise ValueError("data matrix must be 2-d (frequencies x positions)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("data matrix must be finite")

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            f.write(f"# geometry={self.geometry_hash or ''}\n")
            f.write(f"# snr_db={'' if self.snr_db is None else format(self.snr_db, '.17g')}\n")
            f.write(f"# seed={'' if self.seed is None else self.seed}\n")
            w = csv.writer(f)
            w.writerow(["m", "n", "re", "im"])
            for mi in range(self.values.shape[0]):
                for ni in range(self.values.shape[1]):
                    v = self.values[mi, ni]
                    w.writerow([mi + 1, ni + 1, f"{v.real:.17g}", f"{v.imag:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "DataMatrix":
        meta = {}
        rows = []
        with open(path, newline="") as f:
            for line in f:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = val
                elif line and not line.startswith("m,"):
                    rows.append(line.split(","))
        if not rows:
            raise ValueError(f"{path}: empty data matrix CSV")
        arr = np.array([[float(c) for c in r] for r in rows])
        m_count = int(arr[:, 0].max())
        n_count = int(arr[:, 1].max())
        values = np.zeros((m_count, n_count), dtype=complex)
        values[arr[:, 0].astype(int) - 1, arr[:, 1].astype(int) - 1] = arr[:, 2] + 1j * arr[:, 3]
        snr = float(meta["snr_db"]) if meta.get("snr_db") else None
        seed = int(meta["seed"]) if meta.get("seed") else None
        return cls(values, snr_db=snr, seed=seed, geometry_hash=meta.get("geometry") or None)


def synthesize_data(geometry: AcquisitionGeometry, targets: TargetSet) -> DataMatrix:
    """Noiseless forward data: superposed round-trip responses of all targets."""
    targets.validate_grid(geometry)
    omegas = geometry.omegas
    pos = geometry.positions
    values = np.zeros((geometry.n_frequencies, geometry.n_positions), dtype=complex)
    for q, t in enumerate(targets):
        dist = np.linalg.norm(pos - t.position, axis=1)
        if np.any(dist == 0):
            raise ValueError(f"target {q} coincides with a platform position")
        phase = np.exp(2j * omegas[:, None] * dist[None, :] / geometry.wave_speed)
        values += t.spectrum.values[:, None] * phase / (4 * np.pi * dist[None, :]) ** 2
    return DataMatrix(values, geometry_hash=geometry.param_hash())


def add_noise(data: DataMatrix, snr_db: float, seed: int) -> DataMatrix:
    """Add circular complex Gaussian noise hitting `snr_db` exactly.

    The drawn noise matrix is rescaled so that
    10*log10(||D||_F^2 / ||W||_F^2) equals the request for this
    realization, not merely in expectation. PCG64 generator, so a seed
    pins the realization.
    """
    signal_norm = np.linalg.norm(data.values)
    if signal_norm == 0:
        raise ValueError("cannot scale noise against an identically zero data matrix")
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal(data.values.shape) + 1j * rng.standard_normal(data.values.shape)
    noise *= signal_norm / (np.linalg.norm(noise) * 10 ** (snr_db / 20))
    return DataMatrix(
        data.values + noise, snr_db=snr_db, seed=seed, geometry_hash=data.geometry_hash
    )
