import math
from fractions import Fraction

import numpy as np
import pytest

from spdcherald.errors import (
    DomainError,
    EmptyMarginalError,
    NoPhaseMatchingError,
    ResolutionWarning,
    ValidationError,
)
from spdcherald.phase_matching import (
    CrystalSpec,
    SellmeierCoefficients,
    WavelengthTriple,
    collinear_mismatch,
    collinear_pm_angle,
    heralded_marginal_bandwidth,
    idler_wavelength,
    index_extraordinary_at_angle,
    index_extraordinary_principal,
    index_ordinary,
    joint_spectral_intensity,
    tuning_curve,
)

BBO = CrystalSpec()
TRIPLE = WavelengthTriple.from_pump_signal(390.0, 521.0)
DEFAULT_SIGNAL_AXIS = np.linspace(481.0, 561.0, 321)
DEFAULT_IDLER_AXIS = np.linspace(1471.0, 1671.0, 161)


def solved_angle():
    return collinear_pm_angle(BBO, TRIPLE)


class TestIndices:
    def test_ordinary_pinned_values(self):
        # direct evaluation of the shipped dispersion set
        assert index_ordinary(BBO, 521.0) == pytest.approx(1.6752280901, rel=1e-9)
        assert index_ordinary(BBO, 1550.0) == pytest.approx(1.6465863906, rel=1e-9)

    def test_ordinary_close_to_published_round_values(self):
        assert index_ordinary(BBO, 521.0) == pytest.approx(1.676, abs=2e-3)
        assert index_ordinary(BBO, 1550.0) == pytest.approx(1.647, abs=2e-3)

    def test_indices_above_one_over_window(self):
        grid = np.linspace(200.1, 2999.0, 400)
        assert np.all(index_ordinary(BBO, grid) > 1.0)
        assert np.all(index_extraordinary_principal(BBO, grid) > 1.0)

    def test_normal_dispersion_region_monotone(self):
        grid = np.linspace(400.0, 1600.0, 500)
        n = index_ordinary(BBO, grid)
        assert np.all(np.diff(n) < 0.0)

    def test_window_enforced(self):
        with pytest.raises(DomainError):
            index_ordinary(BBO, 150.0)
        with pytest.raises(DomainError):
            index_ordinary(BBO, 3500.0)

    def test_angle_interpolation_endpoints_exact(self):
        lam = 390.0
        assert index_extraordinary_at_angle(BBO, 0.0, lam) == index_ordinary(BBO, lam)
        assert index_extraordinary_at_angle(BBO, 90.0, lam) == index_extraordinary_principal(BBO, lam)

    def test_angle_tuned_index_between_principals(self):
        n = index_extraordinary_at_angle(BBO, 26.42, 390.0)
        assert index_extraordinary_principal(BBO, 390.0) < n < index_ordinary(BBO, 390.0)
        assert n == pytest.approx(1.6680138326, rel=1e-9)

    def test_angle_monotone_and_continuous(self):
        thetas = np.linspace(0.0, 90.0, 181)
        n = index_extraordinary_at_angle(BBO, thetas, 390.0)
        assert np.all(np.diff(n) < 0.0)  # negative uniaxial
        assert np.max(np.abs(np.diff(n))) < 5e-3

    def test_angle_domain(self):
        with pytest.raises(DomainError):
            index_extraordinary_at_angle(BBO, -1.0, 390.0)
        with pytest.raises(DomainError):
            index_extraordinary_at_angle(BBO, 91.0, 390.0)


class TestEnergyConservation:
    def test_idler_wavelength_exact_arithmetic(self):
        # oracle: exact rational arithmetic for 1/(1/390 - 1/521)
        exact = Fraction(390 * 521, 521 - 390)
        assert idler_wavelength(390.0, 521.0) == pytest.approx(float(exact), rel=1e-12)
        assert idler_wavelength(390.0, 521.0) == pytest.approx(1551.0687023, abs=1e-6)

    def test_degenerate_points(self):
        assert idler_wavelength(390.0, 780.0) == pytest.approx(780.0, rel=1e-12)
        assert idler_wavelength(400.0, 800.0) == pytest.approx(800.0, rel=1e-12)

    def test_no_physical_idler(self):
        with pytest.raises(DomainError):
            idler_wavelength(390.0, 390.0)
        with pytest.raises(DomainError):
            idler_wavelength(390.0, 380.0)

    def test_residual_below_tolerance(self):
        t = WavelengthTriple.from_pump_signal(390.0, 521.0)
        residual = abs(1.0 / t.pump_nm - 1.0 / t.signal_nm - 1.0 / t.idler_nm)
        assert residual < 1e-9 / t.pump_nm

    def test_triple_validation(self):
        with pytest.raises(ValidationError):
            WavelengthTriple(390.0, 521.0, 1550.0)  # violates energy conservation
        with pytest.raises(ValidationError):
            WavelengthTriple(390.0, 380.0, idler_wavelength(390.0, 521.0))


class TestPhaseMatchingAngle:
    def test_reference_angle(self):
        theta = solved_angle()
        assert theta == pytest.approx(26.4155, abs=2e-3)
        assert abs(theta - 26.42) <= 0.5

    def test_residual_postcondition(self):
        theta = solved_angle()
        k_pump = (
            2.0 * math.pi * index_extraordinary_at_angle(BBO, theta, 390.0) / 390.0
        )
        assert abs(collinear_mismatch(BBO, theta, TRIPLE)) < 1e-6 * k_pump

    def test_degenerate_angle_larger_than_nondegenerate(self):
        # bisection oracle: the degenerate pair needs a lower pump index,
        # hence a larger angle in a negative uniaxial crystal
        deg = collinear_pm_angle(BBO, WavelengthTriple.from_pump_signal(390.0, 780.0))
        assert deg == pytest.approx(29.9429, abs=5e-3)
        assert deg > solved_angle()

    def test_deterministic(self):
        assert solved_angle() == solved_angle()

    def test_no_root_reports_residuals(self):
        isotropic = CrystalSpec(
            sellmeier_ordinary=BBO.sellmeier_ordinary,
            sellmeier_extraordinary=BBO.sellmeier_ordinary,
            name="isotropic fake",
        )
        with pytest.raises(NoPhaseMatchingError) as err:
            collinear_pm_angle(isotropic, TRIPLE)
        assert err.value.residual_low is not None
        assert err.value.residual_high is not None


class TestTuningCurve:
    def test_zero_crossing_near_reference_signal(self):
        theta = solved_angle()
        curve = tuning_curve(BBO, theta, 390.0, (480.0, 560.0), 401)
        mism = curve[:, 2]
        signs = np.sign(mism)
        crossings = np.flatnonzero(np.diff(signs) != 0)
        assert crossings.size >= 1
        j = crossings[0]
        s0, s1 = curve[j, 0], curve[j + 1, 0]
        m0, m1 = mism[j], mism[j + 1]
        s_cross = s0 - m0 * (s1 - s0) / (m1 - m0)
        assert s_cross == pytest.approx(521.0, abs=0.5)

    def test_solved_triple_has_zero_mismatch(self):
        theta = solved_angle()
        k_pump_per_mm = (
            2.0 * math.pi * index_extraordinary_at_angle(BBO, theta, 390.0) / 390.0 * 1e6
        )
        curve = tuning_curve(BBO, theta, 390.0, (TRIPLE.signal_nm - 1e-9, TRIPLE.signal_nm + 1e-9), 3)
        assert abs(curve[1, 2]) < 1e-6 * k_pump_per_mm

    def test_sorted_and_energy_conserving(self):
        curve = tuning_curve(BBO, 26.42, 390.0, (480.0, 560.0), 101)
        assert np.all(np.diff(curve[:, 0]) > 0.0)
        residual = np.abs(1.0 / curve[:, 0] + 1.0 / curve[:, 1] - 1.0 / 390.0)
        assert np.max(residual) < 1e-9

    def test_smoothness(self):
        curve = tuning_curve(BBO, 26.42, 390.0, (480.0, 560.0), 101)
        mism = curve[:, 2]
        diffs = np.abs(np.diff(mism))
        bound = 10.0 * (mism.max() - mism.min()) / (mism.size - 1)
        assert np.max(diffs) < bound

    def test_validation(self):
        with pytest.raises(ValidationError):
            tuning_curve(BBO, 26.42, 390.0, (480.0, 560.0), 1)
        with pytest.raises(ValidationError):
            tuning_curve(BBO, 26.42, 390.0, (380.0, 560.0), 10)


class TestJointSpectrum:
    def make(self, **kwargs):
        defaults = dict(
            crystal=BBO,
            theta_deg=solved_angle(),
            pump_center_nm=390.0,
            pump_fwhm_nm=2.4,
            signal_axis_nm=DEFAULT_SIGNAL_AXIS,
            idler_axis_nm=DEFAULT_IDLER_AXIS,
        )
        defaults.update(kwargs)
        return joint_spectral_intensity(**defaults)

    def test_peak_on_energy_ridge(self):
        spectrum = self.make()
        peak_s, peak_i = spectrum.peak()
        assert peak_s == pytest.approx(521.0, abs=0.3)
        # one idler grid cell is 1.25 nm
        ridge_idler = idler_wavelength(390.0, peak_s)
        assert abs(peak_i - ridge_idler) <= 1.25

    def test_normalized_and_nonnegative(self):
        spectrum = self.make()
        assert spectrum.intensity.max() == pytest.approx(1.0, rel=1e-12)
        assert np.all(spectrum.intensity >= 0.0)
        assert spectrum.signal_marginal().sum() > 0.0
        assert np.isfinite(spectrum.idler_marginal()).all()

    def test_deterministic(self):
        a = self.make()
        b = self.make()
        assert np.array_equal(a.intensity, b.intensity)

    def test_zero_bandwidth_limit_confined_to_ridge(self):
        # pump bandwidth far below one grid cell: the delta-function limit
        with pytest.warns(ResolutionWarning):
            spectrum = self.make(pump_fwhm_nm=0.01)
        cell = DEFAULT_IDLER_AXIS[1] - DEFAULT_IDLER_AXIS[0]
        live = np.argwhere(spectrum.intensity > 1e-8)
        assert live.size > 0
        for i, j in live:
            ridge = idler_wavelength(390.0, float(spectrum.signal_axis[i]))
            assert abs(spectrum.idler_axis[j] - ridge) <= cell

    def test_doubling_length_halves_phase_matching_width(self):
        # flat pump envelope isolates the sinc^2 factor
        idler_fine = np.linspace(1471.0, 1671.0, 2001)
        widths = {}
        for length in (5.0, 10.0):
            crystal = CrystalSpec(length_mm=length)
            spectrum = joint_spectral_intensity(
                crystal, solved_angle(), 390.0, 1e9, np.array([520.9, 521.0, 521.1]), idler_fine
            )
            col = spectrum.intensity[1]
            above = col >= 0.5 * col.max()
            widths[length] = above.sum() * (idler_fine[1] - idler_fine[0])
        assert widths[10.0] == pytest.approx(0.5 * widths[5.0], rel=0.05)

    def test_grid_validation(self):
        with pytest.raises(ValidationError):
            self.make(signal_axis_nm=np.array([521.0]))
        with pytest.raises(ValidationError):
            self.make(pump_fwhm_nm=-1.0)


class TestHeraldedMarginal:
    def test_reference_acceptance_band(self):
        spectrum = joint_spectral_intensity(
            BBO, solved_angle(), 390.0, 2.4, DEFAULT_SIGNAL_AXIS, DEFAULT_IDLER_AXIS
        )
        fwhm = heralded_marginal_bandwidth(spectrum, 521.0, 6.0)
        assert fwhm == pytest.approx(16.30, abs=0.5)
        assert 12.0 <= fwhm <= 27.0

    def test_wide_filter_equals_unfiltered(self):
        spectrum = joint_spectral_intensity(
            BBO, solved_angle(), 390.0, 2.4, DEFAULT_SIGNAL_AXIS, DEFAULT_IDLER_AXIS
        )
        from spdcherald.phase_matching import _fwhm

        unfiltered = _fwhm(spectrum.idler_axis, spectrum.idler_marginal())
        wide = heralded_marginal_bandwidth(spectrum, 521.0, 1e6)
        assert wide == pytest.approx(unfiltered, rel=1e-6)

    def test_narrowing_never_widens(self):
        spectrum = joint_spectral_intensity(
            BBO, solved_angle(), 390.0, 2.4, DEFAULT_SIGNAL_AXIS, DEFAULT_IDLER_AXIS
        )
        wide = heralded_marginal_bandwidth(spectrum, 521.0, 1e6)
        for width in (16.0, 8.0, 6.0, 4.0, 2.0, 1.0):
            assert heralded_marginal_bandwidth(spectrum, 521.0, width) <= wide + 1e-9

    def test_disjoint_filter_rejected(self):
        spectrum = joint_spectral_intensity(
            BBO, solved_angle(), 390.0, 2.4, DEFAULT_SIGNAL_AXIS, DEFAULT_IDLER_AXIS
        )
        with pytest.raises(EmptyMarginalError):
            heralded_marginal_bandwidth(spectrum, 495.0, 0.5)

    def test_filter_validation(self):
        spectrum = joint_spectral_intensity(
            BBO, solved_angle(), 390.0, 2.4, DEFAULT_SIGNAL_AXIS, DEFAULT_IDLER_AXIS
        )
        with pytest.raises(ValidationError):
            heralded_marginal_bandwidth(spectrum, 521.0, 0.0)


class TestCrystalValidation:
    def test_bad_length(self):
        with pytest.raises(ValidationError):
            CrystalSpec(length_mm=0.0)

    def test_bad_cut(self):
        with pytest.raises(ValidationError):
            CrystalSpec(cut_angle_deg=120.0)

    def test_custom_sellmeier_set(self):
        custom = SellmeierCoefficients(2.7359, 0.01878, 0.01822, 0.01354)
        crystal = CrystalSpec(sellmeier_ordinary=custom)
        assert index_ordinary(crystal, 521.0) == index_ordinary(BBO, 521.0)
