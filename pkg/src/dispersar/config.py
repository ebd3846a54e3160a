"""Experiment configuration: JSON schema, validation, and scene building.

A config document has four blocks:

    geometry   R, H, a, N, M, f0_hz, B_hz, c        (SI units)
    targets    [{x_k0, y_k0 | x_m, y_m,
                 sphere: {k0_alpha | radius_m, n_rel, n_max?}
                 | rho: [re, im]}, ...]
    noise      {snr_db, seed} or absent for noiseless data
    imaging    {center_k0, side_k0, pixels, epsilon,
                zoom: {side_k0, pixels, epsilon, centers}}
    analysis   {rangeshift: {...}, rcs: {...}}      (optional)

Target coordinates and region sizes may be given in dimensionless
k0-scaled units (the reporting convention) or meters; everything is
converted to SI on build. Validation failures raise ConfigError with
the offending field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .scattering import ReflectivitySpectrum, SphereSpec, reflectivity_spectrum
from .scene import AcquisitionGeometry, Target, TargetSet


def _require(mapping, key, path, types, predicate=None, describe=""):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required field")
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, types):
        raise ConfigError(f"{path}.{key}: expected {describe or types}, got {value!r}")
    if predicate is not None and not predicate(value):
        raise ConfigError(f"{path}.{key}: invalid value {value!r} ({describe})")
    return value


def _reject_unknown(mapping, allowed, path):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")


def _positive(mapping, key, path):
    return float(_require(mapping, key, path, (int, float), lambda v: v > 0, "positive number"))


@dataclass(frozen=True)
class GeometryConfig:
    r: float
    h: float
    a: float
    n: int
    m: int
    f0_hz: float
    b_hz: float
    c: float

    @classmethod
    def from_dict(cls, d, path="geometry") -> "GeometryConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(d, ("R", "H", "a", "N", "M", "f0_hz", "B_hz", "c"), path)
        return cls(
            r=_positive(d, "R", path),
            h=_positive(d, "H", path),
            a=_positive(d, "a", path),
            n=int(_require(d, "N", path, int, lambda v: v >= 2, "integer >= 2")),
            m=int(_require(d, "M", path, int, lambda v: v >= 2, "integer >= 2")),
            f0_hz=_positive(d, "f0_hz", path),
            b_hz=_positive(d, "B_hz", path),
            c=_positive(d, "c", path),
        )

    def to_dict(self):
        return {
            "R": self.r, "H": self.h, "a": self.a, "N": self.n, "M": self.m,
            "f0_hz": self.f0_hz, "B_hz": self.b_hz, "c": self.c,
        }

    def build(self) -> AcquisitionGeometry:
        return AcquisitionGeometry(
            range_offset=self.r,
            height=self.h,
            aperture=self.a,
            n_positions=self.n,
            n_frequencies=self.m,
            omega0=2 * np.pi * self.f0_hz,
            bandwidth=self.b_hz,
            wave_speed=self.c,
        )


@dataclass(frozen=True)
class TargetConfig:
    x: float                      # meters
    y: float                      # meters
    in_k0_units: bool
    sphere_k0_alpha: float | None = None
    sphere_radius_m: float | None = None
    sphere_n_rel: float | None = None
    sphere_n_max: int = 32
    rho: complex | None = None

    @classmethod
    def from_dict(cls, d, k0: float, path: str) -> "TargetConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(d, ("x_k0", "y_k0", "x_m", "y_m", "sphere", "rho"), path)
        has_k0 = "x_k0" in d or "y_k0" in d
        has_m = "x_m" in d or "y_m" in d
        if has_k0 == has_m:
            raise ConfigError(f"{path}: give exactly one of (x_k0, y_k0) or (x_m, y_m)")
        if has_k0:
            x = float(_require(d, "x_k0", path, (int, float))) / k0
            y = float(_require(d, "y_k0", path, (int, float))) / k0
        else:
            x = float(_require(d, "x_m", path, (int, float)))
            y = float(_require(d, "y_m", path, (int, float)))

        has_sphere = "sphere" in d
        has_rho = "rho" in d
        if has_sphere == has_rho:
            raise ConfigError(f"{path}: give exactly one of sphere or rho")
        if has_sphere:
            s = d["sphere"]
            if not isinstance(s, dict):
                raise ConfigError(f"{path}.sphere: expected an object")
            _reject_unknown(s, ("k0_alpha", "radius_m", "n_rel", "n_max"), f"{path}.sphere")
            has_ka = "k0_alpha" in s
            has_rm = "radius_m" in s
            if has_ka == has_rm:
                raise ConfigError(f"{path}.sphere: give exactly one of k0_alpha or radius_m")
            ka = _positive(s, "k0_alpha", f"{path}.sphere") if has_ka else None
            rm = _positive(s, "radius_m", f"{path}.sphere") if has_rm else None
            n_rel = _positive(s, "n_rel", f"{path}.sphere")
            n_max = int(s.get("n_max", 32))
            if n_max < 1:
                raise ConfigError(f"{path}.sphere.n_max: must be >= 1, got {n_max}")
            return cls(
                x=x, y=y, in_k0_units=has_k0,
                sphere_k0_alpha=ka, sphere_radius_m=rm,
                sphere_n_rel=n_rel, sphere_n_max=n_max,
            )
        r = d["rho"]
        if (
            not isinstance(r, (list, tuple))
            or len(r) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in r)
        ):
            raise ConfigError(f"{path}.rho: expected [re, im]")
        return cls(x=x, y=y, in_k0_units=has_k0, rho=complex(r[0], r[1]))

    def to_dict(self, k0: float):
        out = (
            {"x_k0": self.x * k0, "y_k0": self.y * k0}
            if self.in_k0_units
            else {"x_m": self.x, "y_m": self.y}
        )
        if self.rho is not None:
            out["rho"] = [self.rho.real, self.rho.imag]
        else:
            sphere = {"n_rel": self.sphere_n_rel, "n_max": self.sphere_n_max}
            if self.sphere_k0_alpha is not None:
                sphere["k0_alpha"] = self.sphere_k0_alpha
            else:
                sphere["radius_m"] = self.sphere_radius_m
            out["sphere"] = sphere
        return out

    def radius_m(self, k0: float) -> float | None:
        if self.sphere_radius_m is not None:
            return self.sphere_radius_m
        if self.sphere_k0_alpha is not None:
            return self.sphere_k0_alpha / k0
        return None

    def build(self, geometry: AcquisitionGeometry) -> Target:
        if self.rho is not None:
            spectrum = ReflectivitySpectrum.flat(geometry.omegas, self.rho)
        else:
            sphere = SphereSpec(
                radius=self.radius_m(geometry.k0),
                n_rel=self.sphere_n_rel,
                n_max=self.sphere_n_max,
            )
            spectrum = reflectivity_spectrum(sphere, geometry.omegas, geometry.wave_speed)
        return Target(position=np.array([self.x, self.y, 0.0]), spectrum=spectrum)


@dataclass(frozen=True)
class NoiseConfig:
    snr_db: float
    seed: int

    @classmethod
    def from_dict(cls, d, path="noise") -> "NoiseConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(d, ("snr_db", "seed"), path)
        snr = float(_require(d, "snr_db", path, (int, float)))
        seed = int(_require(d, "seed", path, int, describe="integer seed"))
        return cls(snr_db=snr, seed=seed)

    def to_dict(self):
        return {"snr_db": self.snr_db, "seed": self.seed}


@dataclass(frozen=True)
class ZoomConfig:
    side_k0: float = 20.0
    pixels: int = 101
    epsilon: float = 1e-4
    centers: str | tuple = "peaks"     # "peaks", "targets", or explicit k0 pairs

    @classmethod
    def from_dict(cls, d, path="imaging.zoom") -> "ZoomConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(d, ("side_k0", "pixels", "epsilon", "centers"), path)
        side = _positive(d, "side_k0", path) if "side_k0" in d else 20.0
        pixels = int(d.get("pixels", 101))
        if pixels < 2:
            raise ConfigError(f"{path}.pixels: must be >= 2, got {pixels}")
        eps = float(d.get("epsilon", 1e-4))
        if not 0 < eps <= 1:
            raise ConfigError(f"{path}.epsilon: must lie in (0, 1], got {eps}")
        centers = d.get("centers", "peaks")
        if isinstance(centers, str):
            if centers not in ("peaks", "targets"):
                raise ConfigError(f"{path}.centers: expected 'peaks', 'targets' or pairs")
        elif isinstance(centers, list):
            try:
                centers = tuple((float(c[0]), float(c[1])) for c in centers)
            except (TypeError, IndexError, ValueError):
                raise ConfigError(f"{path}.centers: expected [x_k0, y_k0] pairs") from None
        else:
            raise ConfigError(f"{path}.centers: expected 'peaks', 'targets' or pairs")
        return cls(side_k0=side, pixels=pixels, epsilon=eps, centers=centers)

    def to_dict(self):
        centers = self.centers if isinstance(self.centers, str) else [list(c) for c in self.centers]
        return {
            "side_k0": self.side_k0, "pixels": self.pixels,
            "epsilon": self.epsilon, "centers": centers,
        }


@dataclass(frozen=True)
class ImagingConfig:
    center_k0: tuple = (0.0, 0.0)
    side_k0: float = 500.0
    pixels: int = 201
    epsilon: float = 1e-4
    zoom: ZoomConfig = field(default_factory=ZoomConfig)

    @classmethod
    def from_dict(cls, d, path="imaging") -> "ImagingConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(d, ("center_k0", "side_k0", "pixels", "epsilon", "zoom"), path)
        center = d.get("center_k0", [0.0, 0.0])
        if not (isinstance(center, (list, tuple)) and len(center) == 2):
            raise ConfigError(f"{path}.center_k0: expected [x, y]")
        side = _positive(d, "side_k0", path) if "side_k0" in d else 500.0
        pixels = int(d.get("pixels", 201))
        if pixels < 2:
            raise ConfigError(f"{path}.pixels: must be >= 2, got {pixels}")
        eps = float(d.get("epsilon", 1e-4))
        if not 0 < eps <= 1:
            raise ConfigError(f"{path}.epsilon: must lie in (0, 1], got {eps}")
        zoom = ZoomConfig.from_dict(d.get("zoom", {}), f"{path}.zoom")
        return cls(
            center_k0=(float(center[0]), float(center[1])),
            side_k0=side, pixels=pixels, epsilon=eps, zoom=zoom,
        )

    def to_dict(self):
        return {
            "center_k0": list(self.center_k0), "side_k0": self.side_k0,
            "pixels": self.pixels, "epsilon": self.epsilon, "zoom": self.zoom.to_dict(),
        }


@dataclass(frozen=True)
class RangeShiftConfig:
    n_rel: float = 1.4
    k0_alpha_start: float = 0.1
    k0_alpha_stop: float = 3.0
    k0_alpha_step: float = 0.1
    window: tuple = (-3.0, 3.0)
    samples: int = 2001

    @classmethod
    def from_dict(cls, d, path="analysis.rangeshift") -> "RangeShiftConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(
            d,
            ("n_rel", "k0_alpha_start", "k0_alpha_stop", "k0_alpha_step",
             "window", "samples"),
            path,
        )
        window = d.get("window", [-3.0, 3.0])
        if not (isinstance(window, (list, tuple)) and len(window) == 2 and window[0] < window[1]):
            raise ConfigError(f"{path}.window: expected [lo, hi] with lo < hi")
        samples = int(d.get("samples", 2001))
        if samples < 100:
            raise ConfigError(f"{path}.samples: must be >= 100, got {samples}")
        out = cls(
            n_rel=float(d.get("n_rel", 1.4)),
            k0_alpha_start=float(d.get("k0_alpha_start", 0.1)),
            k0_alpha_stop=float(d.get("k0_alpha_stop", 3.0)),
            k0_alpha_step=float(d.get("k0_alpha_step", 0.1)),
            window=(float(window[0]), float(window[1])),
            samples=samples,
        )
        if not 0 < out.k0_alpha_start <= out.k0_alpha_stop:
            raise ConfigError(f"{path}: need 0 < k0_alpha_start <= k0_alpha_stop")
        if out.k0_alpha_step <= 0:
            raise ConfigError(f"{path}.k0_alpha_step: must be positive")
        return out

    def to_dict(self):
        return {
            "n_rel": self.n_rel,
            "k0_alpha_start": self.k0_alpha_start,
            "k0_alpha_stop": self.k0_alpha_stop,
            "k0_alpha_step": self.k0_alpha_step,
            "window": list(self.window),
            "samples": self.samples,
        }

    def k0_alphas(self) -> np.ndarray:
        count = int(round((self.k0_alpha_stop - self.k0_alpha_start) / self.k0_alpha_step)) + 1
        return self.k0_alpha_start + self.k0_alpha_step * np.arange(count)


@dataclass(frozen=True)
class RcsConfig:
    smooth: bool = True
    n_targets: int | None = None
    threshold: float = 0.5
    recover_from_clean: bool = False

    @classmethod
    def from_dict(cls, d, path="analysis.rcs") -> "RcsConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(
            d, ("smooth", "n_targets", "threshold", "recover_from_clean"), path
        )
        n_targets = d.get("n_targets")
        if n_targets is not None:
            if not isinstance(n_targets, int) or isinstance(n_targets, bool) or n_targets < 1:
                raise ConfigError(f"{path}.n_targets: expected a positive integer")
        threshold = float(d.get("threshold", 0.5))
        if not 0 < threshold <= 1:
            raise ConfigError(f"{path}.threshold: must lie in (0, 1], got {threshold}")
        return cls(
            smooth=bool(d.get("smooth", True)),
            n_targets=n_targets,
            threshold=threshold,
            recover_from_clean=bool(d.get("recover_from_clean", False)),
        )

    def to_dict(self):
        return {
            "smooth": self.smooth, "n_targets": self.n_targets,
            "threshold": self.threshold, "recover_from_clean": self.recover_from_clean,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: GeometryConfig
    targets: tuple
    noise: NoiseConfig | None = None
    imaging: ImagingConfig = field(default_factory=ImagingConfig)
    rangeshift: RangeShiftConfig = field(default_factory=RangeShiftConfig)
    rcs: RcsConfig = field(default_factory=RcsConfig)
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config root: expected an object")
        unknown = set(d) - {"geometry", "targets", "noise", "imaging", "analysis", "output_dir"}
        if unknown:
            raise ConfigError(f"config root: unknown fields {sorted(unknown)}")
        geometry = GeometryConfig.from_dict(d.get("geometry", {}))
        k0 = 2 * np.pi * geometry.f0_hz / geometry.c

        raw_targets = d.get("targets", [])
        if not isinstance(raw_targets, list):
            raise ConfigError("targets: expected an array")
        targets = tuple(
            TargetConfig.from_dict(t, k0, f"targets[{i}]") for i, t in enumerate(raw_targets)
        )

        noise = None
        if d.get("noise") is not None:
            noise = NoiseConfig.from_dict(d["noise"])

        imaging = ImagingConfig.from_dict(d.get("imaging", {}))
        analysis = d.get("analysis", {})
        if not isinstance(analysis, dict):
            raise ConfigError("analysis: expected an object")
        _reject_unknown(analysis, ("rangeshift", "rcs"), "analysis")
        rangeshift = RangeShiftConfig.from_dict(analysis.get("rangeshift", {}))
        rcs = RcsConfig.from_dict(analysis.get("rcs", {}))

        output_dir = d.get("output_dir")
        if output_dir is not None and not isinstance(output_dir, str):
            raise ConfigError("output_dir: expected a string path")
        return cls(
            geometry=geometry, targets=targets, noise=noise,
            imaging=imaging, rangeshift=rangeshift, rcs=rcs, output_dir=output_dir,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as f:
                raw = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self):
        k0 = 2 * np.pi * self.geometry.f0_hz / self.geometry.c
        out = {
            "geometry": self.geometry.to_dict(),
            "targets": [t.to_dict(k0) for t in self.targets],
            "imaging": self.imaging.to_dict(),
            "analysis": {"rangeshift": self.rangeshift.to_dict(), "rcs": self.rcs.to_dict()},
        }
        if self.noise is not None:
            out["noise"] = self.noise.to_dict()
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    def build_geometry(self) -> AcquisitionGeometry:
        return self.geometry.build()

    def build_targets(self, geometry: AcquisitionGeometry) -> TargetSet:
        if not self.targets:
            raise ConfigError("targets: this command needs at least one target")
        return TargetSet(tuple(t.build(geometry) for t in self.targets))
