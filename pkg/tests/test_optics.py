import math

import numpy as np
import pytest
from scipy.integrate import quad

from xtalk.errors import NumericalFailureError, OutOfRangeError
from xtalk.optics import (
    BeamProfile,
    _focal_field_fixed,
    clipped_focus_profile,
    focal_field,
    gaussian_intensity,
    load_device_map_csv,
    total_crosstalk_ratio,
)

W0 = 1.6  # um
LAM = 729.0  # nm
NA = 0.35


def pupil_half_angle():
    return (LAM * 1e-3) / (math.pi * W0)


class TestClippedFocusProfile:
    def test_unclipped_limit_is_gaussian(self):
        # aperture at >= 5 pupil waists passes the mode essentially intact
        na = 5.5 * pupil_half_angle()
        grid = np.linspace(-2.0 * W0, 2.0 * W0, 161)
        profile = clipped_focus_profile(W0, LAM, na, grid)
        ideal = gaussian_intensity(grid, W0)
        assert np.max(np.abs(profile - ideal) / ideal) < 1e-3

    def test_clipping_lifts_the_tail(self):
        grid = np.array([5.0])
        profile = clipped_focus_profile(W0, LAM, NA, grid)
        tail = gaussian_intensity(grid, W0)[0]
        assert profile[0] > tail
        assert profile[0] < 1e-3

    def test_peak_normalized(self):
        grid = np.linspace(-6.0, 6.0, 301)
        profile = clipped_focus_profile(W0, LAM, NA, grid)
        assert np.max(profile) <= 1.0 + 1e-12
        mid = clipped_focus_profile(W0, LAM, NA, np.array([0.0]))
        assert mid[0] == pytest.approx(1.0, abs=1e-12)

    def test_energy_conservation(self):
        # Parseval: integral of focal intensity equals lambda times the
        # transmitted pupil energy, checked with independent quadrature
        grid = np.linspace(-60.0, 60.0, 24001)
        e = focal_field(W0, LAM, NA, grid)
        focal_energy = np.trapezoid(np.abs(e) ** 2, grid)
        sw = pupil_half_angle()
        pupil_energy, _ = quad(lambda s: math.exp(-2.0 * (s / sw) ** 2), -NA, NA)
        lam_um = LAM * 1e-3
        assert focal_energy == pytest.approx(lam_um * pupil_energy, rel=1e-4)

    def test_monotone_convergence(self):
        grid = np.linspace(-8.0, 8.0, 101)
        levels = [257, 513, 1025, 2049, 4097]
        profiles = [np.abs(_focal_field_fixed(W0, LAM, NA, grid, n)) ** 2 for n in levels]
        peak = profiles[-1].max()
        changes = [
            np.max(np.abs(a - b)) / peak for a, b in zip(profiles[:-1], profiles[1:])
        ]
        assert all(b <= a for a, b in zip(changes[:-1], changes[1:]))
        assert changes[-1] <= 1e-6

    def test_non_convergence_raises(self):
        with pytest.raises(NumericalFailureError):
            focal_field(W0, LAM, NA, np.array([0.0, 5.0]), max_refinements=0)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            clipped_focus_profile(-1.0, LAM, NA, np.array([0.0]))
        with pytest.raises(ValueError):
            clipped_focus_profile(W0, LAM, NA, np.array([]))


class TestBeamProfile:
    def test_default_map_normalized_at_core(self):
        profile = BeamProfile.default()
        core = len(profile.core_positions_um) // 2
        x0 = profile.core_positions_um[core]
        assert profile.device_field(core, x0) == pytest.approx(1.0, abs=1e-9)

    def test_default_neighbor_intensity(self):
        profile = BeamProfile.default()
        core = len(profile.core_positions_um) // 2
        x0 = profile.core_positions_um[core]
        amp = profile.device_field(core, x0 + 5.0)
        assert amp**2 == pytest.approx(1e-2, rel=0.05)

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            BeamProfile((0.0,), np.array([0.0, -1.0]), np.ones((1, 2)))

    def test_out_of_range(self):
        profile = BeamProfile.default()
        with pytest.raises(OutOfRangeError):
            profile.device_field(0, 1e4)


class TestTotalCrosstalkRatio:
    @staticmethod
    def _gaussian_only_profile():
        grid = np.linspace(-12.0, 12.0, 2401)
        return BeamProfile((0.0,), grid, np.zeros((1, grid.size)))

    def test_pure_gaussian_limit(self):
        profile = self._gaussian_only_profile()
        diffraction = gaussian_intensity(profile.grid_um, W0)
        est = total_crosstalk_ratio(profile, diffraction, 5.0)
        expected = math.exp(-2.0 * (5.0 / W0) ** 2)
        assert est.intensity_ratio == pytest.approx(expected, rel=1e-9)
        assert est.rabi_ratio == pytest.approx(math.sqrt(expected), rel=1e-9)

    def test_default_device_dominates(self):
        profile = BeamProfile.default()
        diffraction = clipped_focus_profile(W0, LAM, NA, profile.grid_um)
        est = total_crosstalk_ratio(profile, diffraction, 5.0)
        assert est.intensity_ratio == pytest.approx(1e-2, rel=0.1)
        assert est.rabi_ratio == pytest.approx(0.1, rel=0.05)
        assert est.device_amplitude > est.diffraction_amplitude

    def test_coherent_bounds_bracket_incoherent(self):
        profile = BeamProfile.default()
        diffraction = clipped_focus_profile(W0, LAM, NA, profile.grid_um)
        worst = total_crosstalk_ratio(profile, diffraction, 5.0, relative_phase=0.0)
        best = total_crosstalk_ratio(profile, diffraction, 5.0, relative_phase=math.pi)
        assert worst.intensity_ratio >= worst.incoherent_intensity_ratio >= best.intensity_ratio
        a, b = worst.device_amplitude, worst.diffraction_amplitude
        assert worst.intensity_ratio == pytest.approx((a + b) ** 2, rel=1e-12)
        assert best.intensity_ratio == pytest.approx((a - b) ** 2, rel=1e-9)
        assert worst.incoherent_intensity_ratio == pytest.approx(a * a + b * b, rel=1e-12)

    def test_polarization_scales_rabi(self):
        profile = self._gaussian_only_profile()
        diffraction = gaussian_intensity(profile.grid_um, W0)
        est = total_crosstalk_ratio(profile, diffraction, 5.0, pol_overlap=0.9)
        assert est.rabi_ratio == pytest.approx(0.9 * math.sqrt(est.intensity_ratio), rel=1e-12)

    def test_separation_out_of_range(self):
        profile = self._gaussian_only_profile()
        diffraction = gaussian_intensity(profile.grid_um, W0)
        with pytest.raises(OutOfRangeError):
            total_crosstalk_ratio(profile, diffraction, 100.0)


class TestDeviceMapCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "map.csv"
        xs = np.linspace(-8.0, 8.0, 401)
        rel = np.exp(-((xs / W0) ** 2)) + 0.1 * np.exp(-(((xs - 5.0) / W0) ** 2))
        lines = ["position_um,relative_field"]
        lines += [f"{x},{r}" for x, r in zip(xs, rel)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        pos, field = load_device_map_csv(path)
        assert pos.shape == field.shape == (401,)
        profile = BeamProfile.from_csv(path)
        core = len(profile.core_positions_um) // 2
        x0 = profile.core_positions_um[core]
        assert profile.device_field(core, x0) == pytest.approx(1.0, abs=1e-9)
        assert profile.device_field(core, x0 + 5.0) == pytest.approx(0.1, rel=0.01)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n0,1\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_device_map_csv(path)
