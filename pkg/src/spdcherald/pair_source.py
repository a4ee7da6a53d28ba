"""Per-pulse photon-pair number statistics and their transformation under loss.

The source emits pairs with a per-pulse number distribution parameterized by
the mean pair number ``mu``.  Three laws are supported:

* ``poissonian`` -- many-mode pulsed parametric fluorescence (the default),
* ``thermal`` -- a single Schmidt mode,
* ``multimode_thermal`` -- ``modes`` identical thermal modes; converges to
  the poissonian law as the mode count grows.

Loss (coupling, bulk optics, detector efficiency) acts by binomial thinning:
every photon survives independently with the channel transmission.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

LAWS = ("poissonian", "thermal", "multimode_thermal")

# Adaptive truncation: extend the pmf until the remaining tail mass is below
# TAIL_MASS, never beyond MAX_PAIRS pairs (mu <= 0.25 in all intended use).
TAIL_MASS = 1e-15
MAX_PAIRS = 64


@dataclass(frozen=True)
class PairNumberDistribution:
    """Pair-number law of the source, per pump pulse."""

    law: str = "poissonian"
    mean: float = 0.0
    modes: int | None = None

    def __post_init__(self):
        from .errors import ValidationError

        if self.law not in LAWS:
            raise ValidationError(f"unknown pair-number law {self.law!r}; expected one of {LAWS}")
        if not (self.mean >= 0.0):
            raise ValidationError(f"mean pair number must be >= 0, got {self.mean}")
        if self.law == "multimode_thermal":
            if self.modes is None or self.modes < 1:
                raise ValidationError("multimode_thermal requires modes >= 1")
        elif self.modes is not None:
            raise ValidationError(f"modes is only meaningful for multimode_thermal, got law {self.law!r}")

    def pmf(self, n: int) -> float:
        """Probability of exactly ``n`` pairs in one pulse."""
        from .errors import DomainError

        if n < 0:
            raise DomainError(f"pair count must be >= 0, got {n}")
        mu = self.mean
        if mu == 0.0:
            return 1.0 if n == 0 else 0.0
        if self.law == "poissonian":
            return float(np.exp(n * np.log(mu) - mu - gammaln(n + 1)))
        if self.law == "thermal":
            return float(mu**n / (1.0 + mu) ** (n + 1))
        m = self.modes
        # negative binomial: M identical thermal modes of mean mu/M each
        log_c = gammaln(n + m) - gammaln(n + 1) - gammaln(m)
        log_p = n * np.log(mu / m) - (n + m) * np.log1p(mu / m)
        return float(np.exp(log_c + log_p))

    def pmf_vector(self, n_max: int | None = None) -> np.ndarray:
        """Truncated pmf ``p[0..N]`` with tail mass below :data:`TAIL_MASS`.

        ``n_max`` forces a fixed truncation instead of the adaptive one.
        """
        if n_max is not None:
            return np.array([self.pmf(n) for n in range(n_max + 1)])
        probs = [self.pmf(0)]
        total = probs[0]
        n = 0
        while total < 1.0 - TAIL_MASS and n < MAX_PAIRS:
            n += 1
            probs.append(self.pmf(n))
            total += probs[-1]
        return np.array(probs)

    def mean_pairs(self) -> float:
        return self.mean

    def second_order_coherence(self) -> float:
        """Unconditioned g2(0) of the law: <n(n-1)>/<n>^2, loss-invariant."""
        if self.law == "poissonian":
            return 1.0
        if self.law == "thermal":
            return 2.0
        return 1.0 + 1.0 / self.modes

    def to_dict(self) -> dict:
        out = {"law": self.law, "mean": self.mean}
        if self.modes is not None:
            out["modes"] = self.modes
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PairNumberDistribution":
        return cls(law=data["law"], mean=data["mean"], modes=data.get("modes"))


@dataclass(frozen=True)
class LossChannel:
    """A transmission element; photons survive it independently."""

    transmission: float
    label: str = ""

    def __post_init__(self):
        from .errors import ValidationError

        if not (0.0 <= self.transmission <= 1.0):
            raise ValidationError(
                f"transmission must lie in [0, 1], got {self.transmission} ({self.label or 'unnamed'})"
            )


def thin(pmf: np.ndarray, survival: float | LossChannel) -> np.ndarray:
    """Binomial thinning of a photon-number pmf.

    ``out[k] = sum_n pmf[n] C(n,k) s^k (1-s)^(n-k)`` -- each photon survives
    independently with probability ``s``.  Normalization is preserved.
    """
    from .errors import ValidationError

    s = survival.transmission if isinstance(survival, LossChannel) else float(survival)
    if not (0.0 <= s <= 1.0):
        raise ValidationError(f"survival probability must lie in [0, 1], got {s}")
    p = np.asarray(pmf, dtype=float)
    if s == 1.0:
        return p.copy()
    n_max = p.size - 1
    k = np.arange(n_max + 1)
    out = np.zeros_like(p)
    for n in range(n_max + 1):
        if p[n] == 0.0:
            continue
        kk = k[: n + 1]
        log_c = gammaln(n + 1) - gammaln(kk + 1) - gammaln(n - kk + 1)
        if s == 0.0:
            out[0] += p[n]
            continue
        terms = np.exp(log_c + kk * np.log(s) + (n - kk) * np.log1p(-s))
        out[: n + 1] += p[n] * terms
    return out


def mean_pairs_from_pump(pump_power_mw: float, calibration: float) -> float:
    """Mean pairs per pulse from pump power; pair creation is linear in power.

    ``calibration`` is pairs per pulse per mW of average pump power.
    """
    from .errors import DomainError

    if pump_power_mw < 0.0:
        raise DomainError(f"pump power must be >= 0, got {pump_power_mw} mW")
    if calibration < 0.0:
        raise DomainError(f"calibration must be >= 0, got {calibration}")
    return calibration * pump_power_mw


# Calibration reproducing the reference source: mu = 0.0829 at 240 mW.
REFERENCE_CALIBRATION_PER_MW = 0.0829 / 240.0
