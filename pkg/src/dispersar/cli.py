"""Config-driven command-line front end.

Subcommands wire the pipeline end to end: synthesize data, form
overview and sharpened sub-region images, run the range-shift sweep,
and recover per-target cross-section spectra. Every output CSV is
byte-deterministic for a fixed config; wall-clock metadata lives only
in the run_meta.json sidecar.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import imaging, rangeshift, recovery, scattering, scene
from .config import ExperimentConfig
from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    NoTargetsFoundError,
    SingularSystemError,
    ZeroImageError,
)

_NUMERICAL_ERRORS = (
    ZeroImageError,
    SingularSystemError,
    DegenerateSpectrumError,
    NoTargetsFoundError,
)


def _write_meta(out_dir: Path, command: str, cfg: ExperimentConfig, extra=None) -> None:
    payload = {
        "command": command,
        "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": cfg.to_dict(),
    }
    if extra:
        payload.update(extra)
    with open(out_dir / "run_meta.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_data(path, geometry) -> scene.DataMatrix:
    data = scene.DataMatrix.from_csv(path)
    expected = (geometry.n_frequencies, geometry.n_positions)
    if data.shape != expected:
        raise ConfigError(f"data {path}: shape {data.shape} does not match geometry {expected}")
    if data.geometry_hash and data.geometry_hash != geometry.param_hash():
        raise ConfigError(f"data {path}: synthesized for a different geometry")
    return data


def _echo_location(label: str, x: float, y: float, k0: float) -> None:
    print(
        f"{label}: (k0 x, k0 y) = ({x * k0:.3f}, {y * k0:.3f})   "
        f"(x, y) = ({x:.6g}, {y:.6g}) m"
    )


def _overview(cfg: ExperimentConfig, geometry, data, workers: int):
    k0 = geometry.k0
    center = (cfg.imaging.center_k0[0] / k0, cfg.imaging.center_k0[1] / k0)
    side = cfg.imaging.side_k0 / k0
    grid = imaging.ImageGrid.regular(center, side, side, cfg.imaging.pixels, cfg.imaging.pixels)
    raw = imaging.km_image(data, geometry, grid, workers=workers)
    return imaging.normalize_image(raw)


def cmd_synthesize(cfg: ExperimentConfig, args, out_dir: Path) -> int:
    geometry = cfg.build_geometry()
    targets = cfg.build_targets(geometry)
    data = scene.synthesize_data(geometry, targets)
    seed_note = None
    if cfg.noise is not None:
        seed = cfg.noise.seed if args.seed is None else args.seed
        data = scene.add_noise(data, cfg.noise.snr_db, seed)
        seed_note = seed
    elif args.seed is not None:
        print("note: --seed ignored because the config requests noiseless data")
    data.to_csv(out_dir / "data.csv")
    _write_meta(out_dir, "synthesize", cfg, {"seed": seed_note})
    print(f"wrote {out_dir / 'data.csv'} ({data.shape[0]} x {data.shape[1]})")
    return 0


def cmd_image(cfg: ExperimentConfig, args, out_dir: Path) -> int:
    geometry = cfg.build_geometry()
    data = _load_data(args.data, geometry)
    normalized = _overview(cfg, geometry, data, args.threads)
    k0 = geometry.k0
    imaging.image_to_csv(normalized, out_dir / "overview.csv", scale=k0)
    imaging.image_to_png(normalized, out_dir / "overview.png")
    peaks = imaging.find_peaks(
        normalized, threshold=cfg.rcs.threshold, max_count=cfg.rcs.n_targets
    )
    with open(out_dir / "peaks.csv", "w") as f:
        f.write("value,x_k0,y_k0,x_m,y_m\n")
        for value, x, y in peaks:
            f.write(f"{value:.17g},{x * k0:.17g},{y * k0:.17g},{x:.17g},{y:.17g}\n")
    for i, (value, x, y) in enumerate(peaks, 1):
        _echo_location(f"peak {i} (value {value:.3f})", x, y, k0)
    _write_meta(out_dir, "image", cfg)
    print(f"wrote {out_dir / 'overview.csv'}, overview.png, peaks.csv")
    return 0


def _zoom_centers(cfg: ExperimentConfig, geometry, data, workers: int):
    zoom = cfg.imaging.zoom
    k0 = geometry.k0
    if isinstance(zoom.centers, tuple):
        return [(cx / k0, cy / k0) for cx, cy in zoom.centers]
    if zoom.centers == "targets":
        if not cfg.targets:
            raise ConfigError("imaging.zoom.centers: 'targets' needs a targets array")
        return [(t.x, t.y) for t in cfg.targets]
    normalized = _overview(cfg, geometry, data, workers)
    peaks = imaging.find_peaks(
        normalized, threshold=cfg.rcs.threshold, max_count=cfg.rcs.n_targets
    )
    return [(x, y) for _, x, y in peaks]


def cmd_zoom(cfg: ExperimentConfig, args, out_dir: Path) -> int:
    geometry = cfg.build_geometry()
    data = _load_data(args.data, geometry)
    k0 = geometry.k0
    zoom = cfg.imaging.zoom
    centers = _zoom_centers(cfg, geometry, data, args.threads)
    rows = []
    for i, center in enumerate(centers, 1):
        img = imaging.subregion_zoom(
            data, geometry, center, zoom.side_k0 / k0, zoom.epsilon,
            pixels=zoom.pixels, workers=args.threads,
        )
        imaging.image_to_csv(img, out_dir / f"zoom_{i}.csv", scale=k0)
        imaging.image_to_png(img, out_dir / f"zoom_{i}.png")
        x, y = imaging.locate_peak(img)
        rows.append((x, y))
        _echo_location(f"zoom {i} peak", x, y, k0)
    with open(out_dir / "zoom_peaks.csv", "w") as f:
        f.write("zoom,x_k0,y_k0,x_m,y_m\n")
        for i, (x, y) in enumerate(rows, 1):
            f.write(f"{i},{x * k0:.17g},{y * k0:.17g},{x:.17g},{y:.17g}\n")
    _write_meta(out_dir, "zoom", cfg)
    print(f"wrote {len(centers)} zoom images and {out_dir / 'zoom_peaks.csv'}")
    return 0


def cmd_rangeshift(cfg: ExperimentConfig, args, out_dir: Path) -> int:
    geometry = cfg.build_geometry()
    rs = cfg.rangeshift
    k0_alphas = rs.k0_alphas()
    points = rangeshift.range_shift_sweep(
        geometry, rs.n_rel, k0_alphas, window=rs.window, samples=rs.samples
    )
    rangeshift.sweep_to_csv(points, out_dir / "range_shift_sweep.csv", geometry.k0)

    with open(out_dir / "rcs_size_sweep.csv", "w") as f:
        f.write("k0_alpha,sigma_m2,sigma_normalized\n")
        for ka in k0_alphas:
            sphere = scattering.SphereSpec(radius=float(ka) / geometry.k0, n_rel=rs.n_rel)
            k_center = geometry.omega0 / geometry.wave_speed
            a, _ = scattering.expansion_coefficients(sphere, k_center)
            amp = scattering.backscatter_amplitude(a, k_center)
            sigma = scattering.rcs(amp)
            f.write(
                f"{ka:.17g},{sigma:.17g},{scattering.rcs(amp, radius=sphere.radius):.17g}\n"
            )
    _write_meta(out_dir, "rangeshift", cfg)
    print(f"wrote {out_dir / 'range_shift_sweep.csv'} and rcs_size_sweep.csv")
    return 0


def _clean_data(cfg: ExperimentConfig, geometry) -> scene.DataMatrix:
    return scene.synthesize_data(geometry, cfg.build_targets(geometry))


def cmd_rcs(cfg: ExperimentConfig, args, out_dir: Path) -> int:
    if len(cfg.targets) != 1:
        raise ConfigError("rcs expects a single-target config; use multircs for several")
    geometry = cfg.build_geometry()
    data = _load_data(args.data, geometry)
    k0 = geometry.k0

    normalized = _overview(cfg, geometry, data, args.threads)
    px, py = imaging.locate_peak(normalized)
    zoom = cfg.imaging.zoom
    zoom_img = imaging.subregion_zoom(
        data, geometry, (px, py), zoom.side_k0 / k0, zoom.epsilon,
        pixels=zoom.pixels, workers=args.threads,
    )
    x, y = imaging.locate_peak(zoom_img)
    _echo_location("located target", x, y, k0)

    source = _clean_data(cfg, geometry) if cfg.rcs.recover_from_clean else data
    phi = recovery.backprojected_spectrum(source, geometry, (x, y, 0.0))
    estimate = recovery.rcs_from_spectrum(phi, geometry.omegas)

    target_cfg = cfg.targets[0]
    radius = target_cfg.radius_m(k0)
    reference = None
    if target_cfg.rho is not None or radius is not None:
        truth = target_cfg.build(geometry).spectrum
        reference = recovery.rcs_from_spectrum(truth.values, geometry.omegas)
    smoothed = recovery.quadratic_smooth(estimate, geometry.omega0) if cfg.rcs.smooth else None
    recovery.rcs_to_csv(
        estimate, out_dir / "rcs_target.csv",
        radius=radius, smoothed=smoothed, reference=reference,
    )
    if reference is not None:
        safe = np.where(reference.values > 0, reference.values, 1.0)
        rel = np.abs(estimate.values - reference.values) / safe
        print(f"max relative error vs configured truth: {rel.max():.3e}")
    _write_meta(out_dir, "rcs", cfg)
    print(f"wrote {out_dir / 'rcs_target.csv'}")
    return 0


def cmd_multircs(cfg: ExperimentConfig, args, out_dir: Path) -> int:
    geometry = cfg.build_geometry()
    data = _load_data(args.data, geometry)
    k0 = geometry.k0
    center = (cfg.imaging.center_k0[0] / k0, cfg.imaging.center_k0[1] / k0)
    n_targets = cfg.rcs.n_targets if cfg.rcs.n_targets is not None else len(cfg.targets)
    if n_targets < 1:
        raise ConfigError("analysis.rcs.n_targets: need a target count (or a targets array)")
    report = recovery.recover_targets(
        data,
        geometry,
        center=center,
        side=cfg.imaging.side_k0 / k0,
        n_targets=n_targets,
        epsilon=cfg.imaging.zoom.epsilon,
        threshold=cfg.rcs.threshold,
        overview_pixels=cfg.imaging.pixels,
        zoom_side=cfg.imaging.zoom.side_k0 / k0,
        zoom_pixels=cfg.imaging.zoom.pixels,
        smooth=cfg.rcs.smooth,
        workers=args.threads,
        recovery_data=_clean_data(cfg, geometry) if cfg.rcs.recover_from_clean else None,
    )
    for q in range(len(report.locations)):
        x, y, _ = report.locations[q]
        _echo_location(f"target {q + 1}", x, y, k0)
        spectrum = recovery.RcsSpectrum(report.omegas, report.rcs[q])
        smoothed = (
            recovery.RcsSpectrum(report.omegas, report.rcs_smoothed[q])
            if report.rcs_smoothed is not None
            else None
        )
        # normalization follows the nearest configured target, if it has a radius
        radius = None
        if cfg.targets:
            positions = np.array([[t.x, t.y] for t in cfg.targets])
            nearest = int(np.argmin(np.linalg.norm(positions - [x, y], axis=1)))
            radius = cfg.targets[nearest].radius_m(k0)
        recovery.rcs_to_csv(
            spectrum, out_dir / f"rcs_target_{q + 1}.csv",
            radius=radius, smoothed=smoothed,
        )
    report.to_json(out_dir / "report.json", geometry)
    print(f"max condition number: {report.condition_numbers.max():.3f}")
    _write_meta(out_dir, "multircs", cfg)
    print(f"wrote {len(report.locations)} spectra and {out_dir / 'report.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispersar",
        description="Synthetic aperture imaging of dispersive point targets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, needs_data):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="imaging worker threads")
        if needs_data:
            p.add_argument("--data", required=True, help="data matrix CSV")
        if name == "synthesize":
            p.add_argument("--seed", type=int, default=None, help="override the noise seed")
        p.set_defaults(fn=fn)
        return p

    add("synthesize", cmd_synthesize, "generate (optionally noisy) measurement data", False)
    add("image", cmd_image, "form the normalized overview image", True)
    add("zoom", cmd_zoom, "sharpened sub-region images and refined peaks", True)
    add("rangeshift", cmd_rangeshift, "range-shift and cross-section size sweeps", False)
    add("rcs", cmd_rcs, "single-target cross-section recovery", True)
    add("multircs", cmd_multircs, "multi-target cross-section recovery", True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        out_dir = Path(args.out or cfg.output_dir or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        return args.fn(cfg, args, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
