"""Spectrum recovery: exact cancellation, the multi-target system, smoothing."""

import json

import numpy as np
import pytest

from dispersar.errors import NoTargetsFoundError, SingularSystemError
from dispersar.recovery import (
    MultiTargetSystem,
    RcsSpectrum,
    backprojected_spectrum,
    build_multi_target_system,
    quadratic_smooth,
    rcs_from_spectrum,
    rcs_to_csv,
    recover_targets,
    solve_reflectivities,
)
from dispersar.scene import DataMatrix, Target, TargetSet, add_noise, synthesize_data


class TestBackprojectedSpectrum:
    def test_exact_recovery_at_truth(self, gotcha, single_target_scene):
        position, spectrum, data = single_target_scene
        phi = backprojected_spectrum(data, gotcha, position)
        rel = np.abs(phi - spectrum.values) / np.abs(spectrum.values)
        assert rel.max() < 1e-12

    def test_zero_data(self, gotcha):
        data = DataMatrix(np.zeros((25, 32), dtype=complex))
        phi = backprojected_spectrum(data, gotcha, np.zeros(3))
        assert np.all(phi == 0)

    def test_magnitude_blind_to_range_shift(self, gotcha, single_target_scene):
        # shifting the evaluation point changes the phase but |phi| stays
        # within O(1/L) of |rho|, up to five wavelengths away
        position, spectrum, data = single_target_scene
        exact = np.abs(backprojected_spectrum(data, gotcha, position))
        lam = gotcha.wavelength0
        for shift in (lam, -2 * lam, 5 * lam):
            moved = position + np.array([0.0, shift, 0.0])
            shifted = np.abs(backprojected_spectrum(data, gotcha, moved))
            assert (np.abs(shifted - exact) / exact).max() < 1e-2, shift

    def test_rcs_invariant_under_global_data_phase(self, gotcha, single_target_scene):
        position, _, data = single_target_scene
        spun = DataMatrix(data.values * np.exp(1j * 0.83))
        base = rcs_from_spectrum(
            backprojected_spectrum(data, gotcha, position), gotcha.omegas
        )
        rotated = rcs_from_spectrum(
            backprojected_spectrum(spun, gotcha, position), gotcha.omegas
        )
        np.testing.assert_allclose(rotated.values, base.values, rtol=1e-12)

    def test_phase_changes_under_shift(self, gotcha, single_target_scene):
        position, spectrum, data = single_target_scene
        moved = position + np.array([0.0, gotcha.wavelength0, 0.0])
        shifted = backprojected_spectrum(data, gotcha, moved)
        # complex values differ even though magnitudes agree
        assert np.abs(shifted - spectrum.values).max() > 0.1 * np.abs(spectrum.values).max()


class TestRcsSpectrum:
    def test_definition(self, gotcha):
        phi = np.array([1.0 + 0j, 0.5j, -2.0])
        sigma = rcs_from_spectrum(phi, gotcha.omegas[:3])
        np.testing.assert_allclose(sigma.values, 4 * np.pi * np.abs(phi) ** 2, rtol=1e-15)

    def test_zero(self, gotcha):
        sigma = rcs_from_spectrum(np.zeros(25), gotcha.omegas)
        assert np.all(sigma.values == 0)

    def test_global_phase_invariance(self, gotcha):
        rng = np.random.default_rng(0)
        phi = rng.normal(size=25) + 1j * rng.normal(size=25)
        a = rcs_from_spectrum(phi, gotcha.omegas)
        b = rcs_from_spectrum(phi * np.exp(1j * 2.1), gotcha.omegas)
        np.testing.assert_allclose(b.values, a.values, rtol=1e-12)

    def test_negative_rejected(self, gotcha):
        with pytest.raises(ValueError):
            RcsSpectrum(gotcha.omegas[:2], np.array([1.0, -0.1]))


class TestQuadraticSmooth:
    def test_quadratic_input_reproduced(self, gotcha):
        w = gotcha.omegas
        truth = 3.0 + 2.0 * (w - gotcha.omega0) / 1e9 + 0.5 * ((w - gotcha.omega0) / 1e9) ** 2
        spec = RcsSpectrum(w, truth)
        out = quadratic_smooth(spec, gotcha.omega0)
        np.testing.assert_allclose(out.values, truth, rtol=1e-10)

    def test_constant_input(self, gotcha):
        spec = RcsSpectrum(gotcha.omegas, np.full(25, 7.7))
        out = quadratic_smooth(spec, gotcha.omega0)
        np.testing.assert_allclose(out.values, 7.7, rtol=1e-10)

    def test_clamped_at_zero(self, gotcha):
        rng = np.random.default_rng(4)
        values = np.clip(rng.normal(0.1, 0.5, size=25), 0, None)
        out = quadratic_smooth(RcsSpectrum(gotcha.omegas, values), gotcha.omega0)
        assert np.all(out.values >= 0)

    def test_needs_three_samples(self, gotcha):
        with pytest.raises(ValueError):
            quadratic_smooth(RcsSpectrum(gotcha.omegas[:2], np.ones(2)), gotcha.omega0)


class TestMultiTargetSystem:
    def test_single_location_reduces_to_identity(self, gotcha, single_target_scene):
        position, spectrum, data = single_target_scene
        system = build_multi_target_system(data, gotcha, [position])
        np.testing.assert_allclose(system.matrices[:, 0, 0], 1.0, rtol=1e-14)
        solved = solve_reflectivities(system)
        np.testing.assert_allclose(solved[0], spectrum.values, rtol=1e-12)

    def test_unit_diagonal(self, gotcha, three_target_scene):
        positions, _, data = three_target_scene
        system = build_multi_target_system(data, gotcha, positions)
        for q in range(3):
            np.testing.assert_allclose(system.matrices[:, q, q], 1.0, rtol=1e-14)

    def test_exact_locations_exact_recovery(self, gotcha, sphere_spectrum_cache):
        # two far-separated targets, noiseless: solving at the true
        # locations returns the true spectra
        s1 = sphere_spectrum_cache(1.4, 1.4)
        s2 = sphere_spectrum_cache(0.8, 1.8)
        p1 = np.array([0.7, -0.7, 0.0])
        p2 = np.array([-0.6, 0.8, 0.0])
        data = synthesize_data(gotcha, TargetSet((Target(p1, s1), Target(p2, s2))))
        system = build_multi_target_system(data, gotcha, [p1, p2])
        solved = solve_reflectivities(system)
        assert (np.abs(solved[0] - s1.values) / np.abs(s1.values)).max() < 1e-2
        assert (np.abs(solved[1] - s2.values) / np.abs(s2.values)).max() < 1e-2

    def test_three_target_conditioning(self, gotcha, three_target_scene):
        positions, _, data = three_target_scene
        system = build_multi_target_system(data, gotcha, positions)
        assert system.condition_numbers.max() < 100
        assert np.abs(system.matrices[:, 0, 1]).max() < 1.0

    def test_separation_decouples(self, gotcha, sphere_spectrum_cache):
        # growing separation drives off-diagonals down and the solve
        # toward the single-target answer
        spec = sphere_spectrum_cache(1.2, 1.4)
        offdiag = []
        for scale in (1.0, 2.0, 4.0):
            p1 = np.array([scale * 0.7, scale * 0.2, 0.0])
            p2 = np.array([-scale * 0.2, -scale * 0.7, 0.0])
            data = synthesize_data(
                gotcha, TargetSet((Target(p1, spec), Target(p2, spec)))
            )
            system = build_multi_target_system(data, gotcha, [p1, p2])
            offdiag.append(np.abs(system.matrices[:, 0, 1]).mean())
            single = backprojected_spectrum(
                synthesize_data(gotcha, TargetSet((Target(p1, spec),))), gotcha, p1
            )
            solved = solve_reflectivities(system)
            np.testing.assert_allclose(np.abs(solved[0]), np.abs(single), rtol=2e-2)
        assert offdiag[2] < offdiag[0]

    def test_duplicate_locations_rejected(self, gotcha, single_target_scene):
        position, _, data = single_target_scene
        with pytest.raises(ValueError, match="distinct"):
            build_multi_target_system(data, gotcha, [position, position])

    def test_singular_solve_raises(self):
        mats = np.zeros((2, 2, 2), dtype=complex)
        system = MultiTargetSystem(mats, np.ones((2, 2), dtype=complex), np.full(2, np.inf))
        with pytest.raises(SingularSystemError):
            solve_reflectivities(system)


class TestRecoverProcedure:
    def test_single_target_reduces_to_direct_path(self, gotcha, single_target_scene):
        position, spectrum, data = single_target_scene
        report = recover_targets(
            data, gotcha, center=position[:2], side=500 / gotcha.k0, n_targets=1,
            zoom_side=20 / gotcha.k0,
        )
        assert report.locations.shape == (1, 3)
        x, y, _ = report.locations[0]
        phi = backprojected_spectrum(data, gotcha, (x, y, 0.0))
        np.testing.assert_allclose(
            report.rcs[0], 4 * np.pi * np.abs(phi) ** 2, rtol=1e-12
        )
        np.testing.assert_allclose(report.condition_numbers, 1.0, rtol=1e-12)

    def test_three_targets_located_and_ordered(self, gotcha, three_target_scene):
        positions, spectra, data = three_target_scene
        noisy = add_noise(data, 22.84, seed=13)
        report = recover_targets(
            noisy, gotcha, center=(0.0, 0.0), side=500 / gotcha.k0, n_targets=3
        )
        assert report.locations.shape == (3, 3)
        # each predicted location within 3 wavelengths of its nearest truth
        for truth in positions:
            gaps = np.linalg.norm(report.locations[:, :2] - truth[:2], axis=1)
            assert gaps.min() < 3 * gotcha.wavelength0
        assert report.condition_numbers.max() < 100
        assert report.rcs_smoothed is not None
        assert report.smoothing_coefficients.shape == (3, 3)

    def test_missing_targets_error(self, gotcha, single_target_scene):
        position, _, data = single_target_scene
        with pytest.raises(NoTargetsFoundError):
            recover_targets(
                data, gotcha, center=position[:2], side=500 / gotcha.k0, n_targets=4
            )

    def test_recovery_data_split(self, gotcha, single_target_scene):
        # locations from the noisy matrix, spectrum from the clean one
        position, spectrum, data = single_target_scene
        noisy = add_noise(data, 3.73, seed=13)
        report = recover_targets(
            noisy, gotcha, center=position[:2], side=500 / gotcha.k0, n_targets=1,
            zoom_side=20 / gotcha.k0, recovery_data=data,
        )
        truth = 4 * np.pi * np.abs(spectrum.values) ** 2
        rel = np.abs(report.rcs[0] - truth) / truth
        assert rel.max() < 1e-2

    def test_noisy_recovery_error_band(self, gotcha, single_target_scene):
        # recovering from the noisy matrix itself carries the aperture-average
        # noise floor ~10^(-SNR/20)/sqrt(N): large but bounded
        position, spectrum, data = single_target_scene
        noisy = add_noise(data, 3.73, seed=13)
        report = recover_targets(
            noisy, gotcha, center=position[:2], side=500 / gotcha.k0, n_targets=1,
            zoom_side=20 / gotcha.k0,
        )
        truth = 4 * np.pi * np.abs(spectrum.values) ** 2
        rel = np.abs(report.rcs[0] - truth) / truth
        assert 1e-2 < rel.max() < 1.5

    def test_report_json(self, gotcha, single_target_scene, tmp_path):
        position, _, data = single_target_scene
        report = recover_targets(
            data, gotcha, center=position[:2], side=500 / gotcha.k0, n_targets=1,
            zoom_side=20 / gotcha.k0,
        )
        path = tmp_path / "report.json"
        report.to_json(path, gotcha)
        payload = json.loads(path.read_text())
        assert len(payload["locations_k0"]) == 1
        assert payload["condition_numbers"]["max"] == pytest.approx(1.0, rel=1e-9)
        x_k0 = payload["locations_k0"][0][0]
        assert x_k0 == pytest.approx(report.locations[0][0] * gotcha.k0, rel=1e-12)


class TestCsvExport:
    def test_columns(self, gotcha, tmp_path):
        spec = RcsSpectrum(gotcha.omegas, np.linspace(1.0, 2.0, 25))
        smoothed = quadratic_smooth(spec, gotcha.omega0)
        ref = RcsSpectrum(gotcha.omegas, np.linspace(1.1, 2.1, 25))
        path = tmp_path / "rcs.csv"
        rcs_to_csv(spec, path, radius=0.01, smoothed=smoothed, reference=ref)
        lines = path.read_text().splitlines()
        assert lines[0] == "omega_rad_s,sigma_m2,sigma_normalized,sigma_smoothed,rel_error_vs_truth"
        assert len(lines) == 26
