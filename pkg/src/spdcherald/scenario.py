"""Scenario files: one structured document drives every subcommand.

A scenario is a YAML document with sections ``crystal``, ``source``,
``losses``, ``detectors``, ``dead_time``, ``channel``, ``counts`` (optional,
for estimation runs), and ``run``.  Unknown keys are rejected with their full
dotted path.  The bundled ``paper.scenario`` carries the reference setup.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .detectors import ClickDetectorSpec, DeadTimeSpec
from .errors import ValidationError
from .estimator import KnownLosses
from .experiment import CountRates, SetupConfig
from .phase_matching import CrystalSpec, SellmeierCoefficients
from .qkd import ChannelSpec

# Allowed keys and their leaf types.  Strings such as "8.2e7" that YAML 1.1
# leaves unparsed are coerced to the declared numeric type.
SCHEMA = {
    "crystal": {
        "name": "str",
        "length_mm": "float",
        "cut_angle_deg": "float",
        "sellmeier_ordinary": "number_list",
        "sellmeier_extraordinary": "number_list",
        "pump_center_nm": "float",
        "pump_fwhm_nm": "float",
        "signal_center_nm": "float",
        "signal_fwhm_nm": "float",
        "grid": {
            "signal_min_nm": "float",
            "signal_max_nm": "float",
            "signal_points": "int",
            "idler_min_nm": "float",
            "idler_max_nm": "float",
            "idler_points": "int",
        },
    },
    "source": {
        "law": "str",
        "mu": "float",
        "modes": "opt_int",
        "rep_rate_hz": "float",
        "pump_power_mw": "float",
        "pairs_per_pulse_per_mw": "float",
    },
    "losses": {
        "alpha_signal": "float",
        "alpha_idler": "float",
        "t_signal_optics": "float",
        "t_idler_optics": "float",
        "t_delay_fiber": "float",
    },
    "detectors": {
        "herald": {
            "mode": "str",
            "efficiency": "float",
            "dark_rate_cps": "float",
            "afterpulse_prob": "float",
        },
        "idler": {
            "mode": "str",
            "efficiency": "float",
            "dark_prob_per_gate": "float",
            "afterpulse_prob": "float",
            "gate_width_ns": "float",
            "gate_rate_hz": "float",
        },
        "coincidence_window_gates": "int",
    },
    "dead_time": {"tau_us": "float", "model": "str"},
    "channel": {
        "loss_db_per_km": "float",
        "receiver_efficiency": "float",
        "receiver_dark_per_pulse": "float",
    },
    "counts": {
        "signal_singles_cps": "float",
        "idler_singles_cps": "float",
        "coincidences_cps": "float",
        "trigger_rate_cps": "float",
        "gate_rate_hz": "float",
    },
    "run": {
        "mode": "str",
        "n_pulses": "int",
        "seed": "int",
        "outputs": "str",
        "sweep_mu": "number_list",
        "g2_arm": "str",
        "splitter_ratio": "float",
    },
}


def _coerce(value, kind: str, dotted: str):
    if kind == "float":
        if isinstance(value, bool) or value is None:
            raise ValidationError(f"scenario key {dotted!r} must be a number")
        if isinstance(value, (int, float)):
            return float(value)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"scenario key {dotted!r} must be a number, got {value!r}") from None
    if kind == "int":
        if isinstance(value, bool):
            raise ValidationError(f"scenario key {dotted!r} must be an integer")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        try:
            return int(str(value), 10)
        except (TypeError, ValueError):
            raise ValidationError(f"scenario key {dotted!r} must be an integer, got {value!r}") from None
    if kind == "opt_int":
        return None if value is None else _coerce(value, "int", dotted)
    if kind == "number_list":
        if not isinstance(value, (list, tuple)):
            raise ValidationError(f"scenario key {dotted!r} must be a list of numbers")
        return [_coerce(v, "float", f"{dotted}[{i}]") for i, v in enumerate(value)]
    if kind == "str":
        if not isinstance(value, str):
            raise ValidationError(f"scenario key {dotted!r} must be a string, got {value!r}")
        return value
    raise AssertionError(f"unhandled schema kind {kind}")


def _validate_keys(data: dict, schema: dict, path: str = "") -> None:
    for key, value in list(data.items()):
        dotted = f"{path}{key}"
        if key not in schema:
            raise ValidationError(f"unknown scenario key {dotted!r}")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ValidationError(f"scenario key {dotted!r} must be a mapping")
            _validate_keys(value, sub, dotted + ".")
        else:
            data[key] = _coerce(value, sub, dotted)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` overrides; values are parsed as YAML."""
    out = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not of the form path=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        if not all(keys):
            raise ValidationError(f"override path {path!r} is malformed")
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValidationError(f"override path {path!r} crosses a scalar")
        node[keys[-1]] = yaml.safe_load(raw)
    return out


@dataclass(frozen=True)
class Scenario:
    """Parsed, validated scenario document."""

    data: dict

    @property
    def run(self) -> dict:
        return self.data.get("run", {})

    def section(self, name: str, required: bool = True) -> dict:
        if name not in self.data:
            if required:
                raise ValidationError(f"scenario is missing the {name!r} section")
            return {}
        return self.data[name]

    def sha256(self) -> str:
        return hashlib.sha256(
            json.dumps(self.data, sort_keys=True, default=float).encode()
        ).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)

    # ---- builders -------------------------------------------------------
    def to_setup_config(self) -> SetupConfig:
        src = self.section("source")
        loss = self.section("losses")
        det = self.section("detectors")
        dt = self.section("dead_time")
        herald = det.get("herald", {})
        idler = det.get("idler", {})
        return SetupConfig(
            rep_rate_hz=src["rep_rate_hz"],
            mu=src["mu"],
            law=src.get("law", "poissonian"),
            modes=src.get("modes"),
            alpha_signal=loss["alpha_signal"],
            alpha_idler=loss["alpha_idler"],
            t_signal_optics=loss["t_signal_optics"],
            t_idler_optics=loss["t_idler_optics"],
            t_delay_fiber=loss["t_delay_fiber"],
            herald=ClickDetectorSpec(
                efficiency=herald["efficiency"],
                mode=herald.get("mode", "free_running"),
                dark_rate_cps=herald.get("dark_rate_cps"),
                afterpulse_prob=herald.get("afterpulse_prob", 0.0),
            ),
            idler_detector=ClickDetectorSpec(
                efficiency=idler["efficiency"],
                mode=idler.get("mode", "gated"),
                dark_prob_per_gate=idler.get("dark_prob_per_gate"),
                afterpulse_prob=idler.get("afterpulse_prob", 0.0),
                gate_width_ns=idler.get("gate_width_ns"),
            ),
            trigger_dead_time=DeadTimeSpec(tau_us=dt["tau_us"], model=dt.get("model", "paralyzable")),
            gate_rate_hz=idler.get("gate_rate_hz", 205000.0),
            coincidence_window=det.get("coincidence_window_gates", 1),
        )

    def to_crystal(self) -> CrystalSpec:
        cry = self.section("crystal")
        kwargs = {}
        if "sellmeier_ordinary" in cry:
            kwargs["sellmeier_ordinary"] = SellmeierCoefficients(*cry["sellmeier_ordinary"])
        if "sellmeier_extraordinary" in cry:
            kwargs["sellmeier_extraordinary"] = SellmeierCoefficients(*cry["sellmeier_extraordinary"])
        if "name" in cry:
            kwargs["name"] = cry["name"]
        return CrystalSpec(
            length_mm=cry.get("length_mm", 5.0),
            cut_angle_deg=cry.get("cut_angle_deg", 26.42),
            **kwargs,
        )

    def spectral_grid(self) -> tuple[np.ndarray, np.ndarray]:
        grid = self.section("crystal").get("grid", {})
        sig = np.linspace(
            grid.get("signal_min_nm", 481.0),
            grid.get("signal_max_nm", 561.0),
            int(grid.get("signal_points", 321)),
        )
        idl = np.linspace(
            grid.get("idler_min_nm", 1471.0),
            grid.get("idler_max_nm", 1671.0),
            int(grid.get("idler_points", 161)),
        )
        return sig, idl

    def to_channel(self) -> ChannelSpec:
        ch = self.section("channel")
        return ChannelSpec(
            loss_db_per_km=ch.get("loss_db_per_km", 0.2),
            receiver_efficiency=ch["receiver_efficiency"],
            receiver_dark_per_pulse=ch["receiver_dark_per_pulse"],
        )

    def to_known_losses(self) -> KnownLosses:
        return KnownLosses.from_setup(self.to_setup_config())

    def to_counts(self) -> CountRates:
        cnt = self.section("counts")
        trigger = cnt["trigger_rate_cps"]
        coinc = cnt["coincidences_cps"]
        return CountRates(
            signal_singles=cnt["signal_singles_cps"],
            idler_singles=cnt["idler_singles_cps"],
            coincidences=coinc,
            trigger_rate=trigger,
            gate_rate=cnt["gate_rate_hz"],
            per_trigger_coincidence_prob=coinc / trigger if trigger > 0 else 0.0,
        )


def parse_scenario(text: str, overrides: list[str] | None = None) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"scenario is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a mapping of sections")
    if overrides:
        data = apply_overrides(data, overrides)
    _validate_keys(data, SCHEMA)
    return Scenario(data=data)


def load_scenario(path: str | Path, overrides: list[str] | None = None) -> Scenario:
    """Load a scenario from disk, or from the bundled set by bare name."""
    p = Path(path)
    if p.is_file():
        return parse_scenario(p.read_text(), overrides)
    name = p.name if p.name.endswith(".scenario") else p.name + ".scenario"
    bundled = resources.files("spdcherald.data").joinpath(name)
    if bundled.is_file():
        return parse_scenario(bundled.read_text(), overrides)
    raise ValidationError(f"scenario file {str(path)!r} not found (and no bundled scenario matches)")
