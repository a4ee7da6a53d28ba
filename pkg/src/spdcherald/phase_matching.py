"""Refractive indices, collinear type-I phase matching, and biphoton spectra.

Type-I interaction in a negative uniaxial crystal: extraordinary pump,
ordinary signal and idler, all collinear.  The collinear mismatch is

    dk = 2 pi [ n_e(theta; l_p)/l_p - n_o(l_s)/l_s - n_o(l_i)/l_i ]

with wavelengths in nm, so dk carries rad/nm (scaled to rad/mm on output
where noted).  The joint spectral intensity combines the pump envelope with
the sinc^2 phase-matching factor of a crystal of finite length.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    EmptyMarginalError,
    NoPhaseMatchingError,
    ResolutionWarning,
    ValidationError,
)


@dataclass(frozen=True)
class SellmeierCoefficients:
    """One-resonance Sellmeier set with infrared correction.

    ``n^2 = a + b / (lambda^2 - c) - d * lambda^2`` with lambda in micrometres.
    """

    a: float
    b: float
    c: float
    d: float

    def index(self, wavelength_um):
        lam2 = np.asarray(wavelength_um, dtype=float) ** 2
        n2 = self.a + self.b / (lam2 - self.c) - self.d * lam2
        return np.sqrt(n2)


# beta-barium borate dispersion, Kato, IEEE J. Quantum Electron. 22, 1013 (1986)
BBO_KATO_1986_ORDINARY = SellmeierCoefficients(2.7359, 0.01878, 0.01822, 0.01354)
BBO_KATO_1986_EXTRAORDINARY = SellmeierCoefficients(2.3753, 0.01224, 0.01667, 0.01516)


@dataclass(frozen=True)
class CrystalSpec:
    """Uniaxial crystal: dispersion data, length, and cut angle."""

    sellmeier_ordinary: SellmeierCoefficients = BBO_KATO_1986_ORDINARY
    sellmeier_extraordinary: SellmeierCoefficients = BBO_KATO_1986_EXTRAORDINARY
    length_mm: float = 5.0
    cut_angle_deg: float = 26.42
    validity_window_um: tuple[float, float] = (0.2, 3.0)
    name: str = "BBO (Kato 1986)"

    def __post_init__(self):
        if self.length_mm <= 0.0:
            raise ValidationError(f"crystal length must be > 0, got {self.length_mm} mm")
        if not (0.0 <= self.cut_angle_deg <= 90.0):
            raise ValidationError(f"cut angle must lie in [0, 90] degrees, got {self.cut_angle_deg}")
        lo, hi = self.validity_window_um
        if not (0.0 < lo < hi):
            raise ValidationError(f"invalid Sellmeier validity window {self.validity_window_um}")

    def _check_window(self, wavelength_nm) -> None:
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        lo, hi = self.validity_window_um
        if np.any(lam < lo) or np.any(lam > hi):
            raise DomainError(
                f"wavelength outside the Sellmeier validity window "
                f"[{lo * 1e3:.0f}, {hi * 1e3:.0f}] nm"
            )


def index_ordinary(crystal: CrystalSpec, wavelength_nm):
    """Ordinary refractive index n_o at a vacuum wavelength in nm."""
    crystal._check_window(wavelength_nm)
    return crystal.sellmeier_ordinary.index(np.asarray(wavelength_nm, dtype=float) * 1e-3)


def index_extraordinary_principal(crystal: CrystalSpec, wavelength_nm):
    """Principal extraordinary index n_e (propagation at 90 deg to the axis)."""
    crystal._check_window(wavelength_nm)
    return crystal.sellmeier_extraordinary.index(np.asarray(wavelength_nm, dtype=float) * 1e-3)


def index_extraordinary_at_angle(crystal: CrystalSpec, theta_deg, wavelength_nm):
    """Extraordinary-wave index at angle theta from the optic axis.

    Index ellipsoid: ``1/n(theta)^2 = cos^2(theta)/n_o^2 + sin^2(theta)/n_e^2``;
    interpolates exactly between n_o at 0 deg and n_e at 90 deg.
    """
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > 90.0):
        raise DomainError(f"theta must lie in [0, 90] degrees, got {theta_deg}")
    n_o = index_ordinary(crystal, wavelength_nm)
    n_e = index_extraordinary_principal(crystal, wavelength_nm)
    t = np.radians(theta)
    inv_n2 = np.cos(t) ** 2 / n_o**2 + np.sin(t) ** 2 / n_e**2
    n = 1.0 / np.sqrt(inv_n2)
    # endpoints reduce to the principal indices without round-off
    n = np.where(theta == 0.0, n_o, np.where(theta == 90.0, n_e, n))
    return float(n) if n.ndim == 0 else n


def idler_wavelength(pump_nm: float, signal_nm: float) -> float:
    """Idler wavelength fixed by energy conservation: 1/l_i = 1/l_p - 1/l_s."""
    if signal_nm <= pump_nm:
        raise DomainError(
            f"signal ({signal_nm} nm) must be longer than the pump ({pump_nm} nm); no physical idler"
        )
    return 1.0 / (1.0 / pump_nm - 1.0 / signal_nm)


@dataclass(frozen=True)
class WavelengthTriple:
    """Energy-conserving pump/signal/idler triple, wavelengths in nm."""

    pump_nm: float
    signal_nm: float
    idler_nm: float

    def __post_init__(self):
        if not (self.pump_nm < self.signal_nm <= self.idler_nm):
            raise ValidationError(
                f"expected pump < signal <= idler, got "
                f"({self.pump_nm}, {self.signal_nm}, {self.idler_nm}) nm"
            )
        lhs = 1.0 / self.pump_nm
        rhs = 1.0 / self.signal_nm + 1.0 / self.idler_nm
        if abs(lhs - rhs) > 1e-9 * lhs:
            raise ValidationError(
                f"energy conservation violated: 1/pump differs from 1/signal + 1/idler "
                f"by {abs(lhs - rhs) / lhs:.3e} (relative)"
            )

    @classmethod
    def from_pump_signal(cls, pump_nm: float, signal_nm: float) -> "WavelengthTriple":
        return cls(pump_nm, signal_nm, idler_wavelength(pump_nm, signal_nm))


def collinear_mismatch(crystal: CrystalSpec, theta_deg: float, triple: WavelengthTriple) -> float:
    """Collinear type-I phase mismatch dk in rad/nm at a fixed crystal angle."""
    k_p = 2.0 * np.pi * index_extraordinary_at_angle(crystal, theta_deg, triple.pump_nm) / triple.pump_nm
    k_s = 2.0 * np.pi * index_ordinary(crystal, triple.signal_nm) / triple.signal_nm
    k_i = 2.0 * np.pi * index_ordinary(crystal, triple.idler_nm) / triple.idler_nm
    return float(k_p - k_s - k_i)


# |dk| below this fraction of k_pump counts as phase matched.
PM_RESIDUAL_TOLERANCE = 1e-6
# bisection resolution in degrees
PM_ANGLE_RESOLUTION_DEG = 1e-4


def collinear_pm_angle(crystal: CrystalSpec, triple: WavelengthTriple) -> float:
    """Crystal angle that zeroes the collinear type-I mismatch, in degrees.

    Deterministic bisection on (0, 90) deg; the returned angle leaves a
    residual below ``PM_RESIDUAL_TOLERANCE * k_pump``.
    """
    lo, hi = 1e-9, 90.0 - 1e-9
    f_lo = collinear_mismatch(crystal, lo, triple)
    f_hi = collinear_mismatch(crystal, hi, triple)
    if f_lo * f_hi > 0.0:
        raise NoPhaseMatchingError(
            f"no collinear phase-matching angle in (0, 90) deg: "
            f"dk({lo:.1e} deg) = {f_lo:.6e} rad/nm, dk(90 deg) = {f_hi:.6e} rad/nm",
            residual_low=f_lo,
            residual_high=f_hi,
        )
    while hi - lo > PM_ANGLE_RESOLUTION_DEG * 1e-3:
        mid = 0.5 * (lo + hi)
        f_mid = collinear_mismatch(crystal, mid, triple)
        if f_lo * f_mid <= 0.0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    theta = 0.5 * (lo + hi)
    k_pump = 2.0 * np.pi * index_extraordinary_at_angle(crystal, theta, triple.pump_nm) / triple.pump_nm
    residual = collinear_mismatch(crystal, theta, triple)
    if abs(residual) > PM_RESIDUAL_TOLERANCE * k_pump:
        raise NoPhaseMatchingError(
            f"bisection converged to theta = {theta:.4f} deg but the residual "
            f"{residual:.3e} rad/nm exceeds {PM_RESIDUAL_TOLERANCE:.0e} of k_pump"
        )
    return float(theta)


def tuning_curve(
    crystal: CrystalSpec,
    theta_deg: float,
    pump_nm: float,
    signal_range_nm: tuple[float, float],
    n_points: int,
) -> np.ndarray:
    """Mismatch along the energy-conservation curve at a fixed angle.

    Returns an array of rows ``(signal_nm, idler_nm, mismatch_rad_per_mm)``
    sorted by signal wavelength; the idler follows from energy conservation
    at every point, so the mismatch alone tells how far each pair is from
    phase matching.
    """
    if n_points < 2:
        raise ValidationError(f"n_points must be >= 2, got {n_points}")
    lo, hi = signal_range_nm
    if not (pump_nm < lo < hi):
        raise ValidationError(f"signal range {signal_range_nm} must lie above the pump ({pump_nm} nm)")
    signals = np.linspace(lo, hi, int(n_points))
    rows = np.empty((signals.size, 3))
    for j, s in enumerate(signals):
        i = idler_wavelength(pump_nm, s)
        triple = WavelengthTriple(pump_nm, s, i) if s <= i else WavelengthTriple(pump_nm, i, s)
        dk = collinear_mismatch(crystal, theta_deg, triple)
        rows[j] = (s, i, dk * 1e6)  # rad/nm -> rad/mm
    return rows


@dataclass(frozen=True)
class JointSpectrum:
    """Joint spectral intensity of the biphoton on a wavelength grid."""

    signal_axis: np.ndarray
    idler_axis: np.ndarray
    intensity: np.ndarray  # shape (signal, idler), max normalized to 1
    pump_center_nm: float
    pump_fwhm_nm: float

    def peak(self) -> tuple[float, float]:
        """(signal, idler) wavelengths of the intensity maximum."""
        i, j = np.unravel_index(int(np.argmax(self.intensity)), self.intensity.shape)
        return float(self.signal_axis[i]), float(self.idler_axis[j])

    def idler_marginal(self, signal_weights: np.ndarray | None = None) -> np.ndarray:
        w = np.ones_like(self.signal_axis) if signal_weights is None else signal_weights
        return (self.intensity * w[:, None]).sum(axis=0)

    def signal_marginal(self) -> np.ndarray:
        return self.intensity.sum(axis=1)


def joint_spectral_intensity(
    crystal: CrystalSpec,
    theta_deg: float,
    pump_center_nm: float,
    pump_fwhm_nm: float,
    signal_axis_nm: np.ndarray,
    idler_axis_nm: np.ndarray,
) -> JointSpectrum:
    """Joint spectral intensity: pump envelope times sinc^2 phase matching.

    For each grid pair the implied pump follows from energy conservation,
    ``1/l_p = 1/l_s + 1/l_i``; a Gaussian pump intensity profile of the given
    FWHM weights that detuning, and the crystal-length sinc^2 factor weighs
    the residual mismatch.  The result is normalized to a unit maximum.
    """
    if pump_fwhm_nm < 0.0:
        raise ValidationError(f"pump FWHM must be >= 0, got {pump_fwhm_nm}")
    sig = np.asarray(signal_axis_nm, dtype=float)
    idl = np.asarray(idler_axis_nm, dtype=float)
    if sig.size < 2 or idl.size < 2:
        raise ValidationError("spectral axes need at least two points")
    S, I = np.meshgrid(sig, idl, indexing="ij")
    nu_sum = 1.0 / S + 1.0 / I  # implied 1/lambda_pump, nm^-1
    nu_0 = 1.0 / pump_center_nm
    # FWHM of the pump *intensity* spectrum mapped to 1/lambda units
    d_nu = max(pump_fwhm_nm, 1e-30) / pump_center_nm**2
    envelope = np.exp(-4.0 * np.log(2.0) * ((nu_sum - nu_0) / d_nu) ** 2)

    lam_pump = 1.0 / nu_sum
    n_p = index_extraordinary_at_angle(crystal, theta_deg, lam_pump)
    n_s = index_ordinary(crystal, S)
    n_i = index_ordinary(crystal, I)
    dk = 2.0 * np.pi * (n_p * nu_sum - n_s / S - n_i / I)
    x = dk * (crystal.length_mm * 1e6) / 2.0
    pm = np.sinc(x / np.pi) ** 2

    intensity = envelope * pm
    peak_val = intensity.max()
    if peak_val <= 0.0:
        raise ValidationError("grid does not overlap the phase-matched region")
    intensity = intensity / peak_val

    # resolution check: the ridge must span >= 3 idler cells at half maximum
    col = intensity[int(np.argmax(intensity.max(axis=1)))]
    if int((col >= 0.5).sum()) < 3:
        warnings.warn(
            "idler grid is too coarse: the spectral peak spans fewer than 3 cells at half maximum",
            ResolutionWarning,
            stacklevel=2,
        )
    return JointSpectrum(sig, idl, intensity, pump_center_nm, pump_fwhm_nm)


def _fwhm(axis: np.ndarray, values: np.ndarray) -> float:
    """Full width at half maximum with linear interpolation at the crossings."""
    peak = values.max()
    if peak <= 0.0:
        raise EmptyMarginalError("cannot take the FWHM of an all-zero curve")
    y = values / peak
    above = y >= 0.5
    i0 = int(np.argmax(above))
    i1 = len(y) - 1 - int(np.argmax(above[::-1]))

    def cross(i, j):
        return axis[i] + (0.5 - y[i]) * (axis[j] - axis[i]) / (y[j] - y[i])

    lo = cross(i0 - 1, i0) if i0 > 0 else float(axis[0])
    hi = cross(i1 + 1, i1) if i1 < len(y) - 1 else float(axis[-1])
    return float(hi - lo)


def heralded_marginal_bandwidth(
    spectrum: JointSpectrum,
    filter_center_nm: float,
    filter_fwhm_nm: float,
) -> float:
    """Idler FWHM after a Gaussian bandpass on the signal axis, in nm.

    Models the effective spectral acceptance of the heralding arm (filter
    stack plus fiber mode selection) as a single Gaussian bandpass.
    """
    if filter_fwhm_nm <= 0.0:
        raise ValidationError(f"filter FWHM must be > 0, got {filter_fwhm_nm}")
    weights = np.exp(
        -4.0 * np.log(2.0) * ((spectrum.signal_axis - filter_center_nm) / filter_fwhm_nm) ** 2
    )
    marginal = spectrum.idler_marginal(weights)
    if marginal.max() <= 1e-12 * spectrum.intensity.max():
        raise EmptyMarginalError(
            f"signal filter at {filter_center_nm} nm (FWHM {filter_fwhm_nm} nm) "
            "does not overlap the spectrum support"
        )
    return _fwhm(spectrum.idler_axis, marginal)
