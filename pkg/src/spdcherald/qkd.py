"""Multiphoton security tradeoff for quantum key distribution.

Multiphoton emissions expose a key exchange to photon-number-splitting
attacks in a lossy channel: security requires the legitimate detection
probability to stay above the multiphoton fraction of the source.  Only that
necessary condition is evaluated here; error correction and privacy
amplification are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .experiment import HeraldedStats, SetupConfig, heralded_photon_statistics, simulate_counts
from .pair_source import REFERENCE_CALIBRATION_PER_MW

DEFAULT_DISTANCE_CAP_KM = 500.0
DEFAULT_DISTANCE_RESOLUTION_KM = 0.1


@dataclass(frozen=True)
class ChannelSpec:
    """Fiber channel and receiver seen by the delivered photons."""

    loss_db_per_km: float = 0.2
    receiver_efficiency: float = 0.10
    receiver_dark_per_pulse: float = 2.5e-4

    def __post_init__(self):
        if self.loss_db_per_km < 0.0:
            raise ValidationError(f"loss coefficient must be >= 0, got {self.loss_db_per_km}")
        if not (0.0 <= self.receiver_efficiency <= 1.0):
            raise ValidationError(f"receiver efficiency must lie in [0, 1], got {self.receiver_efficiency}")
        if not (0.0 <= self.receiver_dark_per_pulse <= 1.0):
            raise ValidationError(
                f"receiver dark probability must lie in [0, 1], got {self.receiver_dark_per_pulse}"
            )

    def transmission(self, distance_km: float) -> float:
        return float(10.0 ** (-self.loss_db_per_km * distance_km / 10.0))


@dataclass(frozen=True)
class SecureDistance:
    """Largest secure channel length under the multiphoton bound."""

    km: float
    capped: bool = False
    insecure_at_zero: bool = False

    def to_dict(self) -> dict:
        return {"km": self.km, "capped": self.capped, "insecure_at_zero": self.insecure_at_zero}


@dataclass(frozen=True)
class TradeoffRow:
    """One operating point of the pump-power tradeoff."""

    mu: float
    pump_power_mw: float
    trigger_rate: float
    p1: float
    p2: float
    max_secure_km: float
    capped: bool = False
    insecure_at_zero: bool = False
    error: str | None = None


def multiphoton_fraction(stats: HeraldedStats) -> float:
    """Probability of delivering more than one photon per heralded pulse."""
    return float(stats.p[2:].sum()) if stats.p.size > 2 else 0.0


def expected_detection_probability(stats: HeraldedStats, channel: ChannelSpec, distance_km: float) -> float:
    """Receiver click probability per heralded pulse at a given distance."""
    eta = channel.transmission(distance_km) * channel.receiver_efficiency
    n = np.arange(stats.p.size)
    return float((stats.p * (1.0 - (1.0 - eta) ** n)).sum()) + channel.receiver_dark_per_pulse


def max_secure_distance(
    stats: HeraldedStats,
    channel: ChannelSpec,
    cap_km: float = DEFAULT_DISTANCE_CAP_KM,
    resolution_km: float = DEFAULT_DISTANCE_RESOLUTION_KM,
) -> SecureDistance:
    """Largest distance where the detection probability beats the
    multiphoton fraction, bisected to ``resolution_km`` and capped.

    Receiver dark counts appear on both sides of the bound -- an
    eavesdropper can neither suppress nor exploit them -- so the condition
    reduces to photon-borne detections >= multiphoton fraction, and the
    distance is nonincreasing in the dark probability.

    Returns 0 km with a flag when the condition already fails at zero
    distance, and the cap with a flag when it never fails below it.
    """

    def secure(distance_km: float) -> bool:
        p_exp = expected_detection_probability(stats, channel, distance_km)
        return p_exp >= multiphoton_fraction(stats) + channel.receiver_dark_per_pulse

    if not secure(0.0):
        return SecureDistance(0.0, insecure_at_zero=True)
    if secure(cap_km):
        return SecureDistance(cap_km, capped=True)
    lo, hi = 0.0, cap_km
    while hi - lo > resolution_km:
        mid = 0.5 * (lo + hi)
        if secure(mid):
            lo = mid
        else:
            hi = mid
    return SecureDistance(lo)


def pump_sweep(
    base_config: SetupConfig,
    mu_values,
    channel: ChannelSpec,
    pairs_per_pulse_per_mw: float = REFERENCE_CALIBRATION_PER_MW,
) -> list[TradeoffRow]:
    """Source rate versus multiphoton contamination across pump powers.

    Each row re-runs the analytic forward model (dead time included) at one
    mean pair number; pump power follows from the linear calibration.  A
    failing row is reported with its error message instead of being dropped.
    """
    mu_list = [float(m) for m in mu_values]
    if any(m <= 0.0 for m in mu_list):
        raise ValidationError("mu values must be positive")
    if sorted(mu_list) != mu_list:
        raise ValidationError("mu values must be sorted ascending")
    rows: list[TradeoffRow] = []
    for mu in mu_list:
        pump_mw = mu / pairs_per_pulse_per_mw if pairs_per_pulse_per_mw > 0 else float("nan")
        try:
            config = replace(base_config, mu=mu)
            counts = simulate_counts(config, mode="analytic")
            stats = heralded_photon_statistics(config, mode="analytic")
            distance = max_secure_distance(stats, channel)
            rows.append(
                TradeoffRow(
                    mu=mu,
                    pump_power_mw=pump_mw,
                    trigger_rate=counts.trigger_rate,
                    p1=stats.probability(1),
                    p2=stats.probability(2),
                    max_secure_km=distance.km,
                    capped=distance.capped,
                    insecure_at_zero=distance.insecure_at_zero,
                )
            )
        except Exception as exc:  # noqa: BLE001 - per-row errors are data
            rows.append(
                TradeoffRow(
                    mu=mu,
                    pump_power_mw=pump_mw,
                    trigger_rate=float("nan"),
                    p1=float("nan"),
                    p2=float("nan"),
                    max_secure_km=float("nan"),
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return rows
