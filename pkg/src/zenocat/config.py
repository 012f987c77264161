"""Configuration files, presets, and strict schema validation.

Config files are YAML (JSON is a subset) with unit-suffixed keys: ordinary
frequencies carry ``_MHz``, durations ``_us``.  Internally everything is
converted to angular rad/us once, here.  Unknown keys are rejected with a
closest-match suggestion; a known key written without its unit suffix gets
a dedicated error naming the expected spelling.

The shipped ``paper-device`` preset matches the superconducting cat-qubit
device the simulator models: kappa2/2pi = 0.176 MHz, kappa1/2pi = 1.7 kHz,
storage self-Kerr 3 kHz, reservoir Kerr 86 MHz, cross-Kerr 0.471 MHz,
reservoir lifetime 317 ns with 1.5% thermal occupation, and the calibrated
rotation-drive unit eps0/2pi = 7 kHz.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import replace
from typing import Any

import yaml

from .engine import SolverConfig
from .errors import ConfigError, UnitMissingError, UnknownKeyError
from .experiments import ExperimentConfig, InitialState
from .model import Protocol
from .units import mhz_to_angular

__all__ = ["PRESETS", "parse_config", "resolve_config", "config_from_dict", "config_to_dict"]

_RESERVOIR_KAPPA_MHZ = 1.0 / (2.0 * math.pi * 0.317)
_G_MHZ = math.sqrt(0.176 * _RESERVOIR_KAPPA_MHZ) / 2.0  # reproduces kappa2 = 4 g^2 / kappa_R

PRESETS: dict[str, dict[str, Any]] = {
    "paper-device": {
        "kappa2_MHz": 0.176,
        "kappa1_MHz": 0.0017,
        "chi_SS_MHz": 0.003,
        "chi_RR_MHz": 86.0,
        "chi_RS_MHz": 0.471,
        "T1R_us": 0.317,
        "n_th": 0.015,
        "g_MHz": _G_MHZ,
        "eps0_MHz": 0.007,
        "alpha_phase_deg": 0.0,
        "zeno_phase_deg": 0.0,
        "model": "reduced",
        "initial": "cat",
        "initial_phase_deg": 0.0,
        "initial_sign": 1,
        "initial_theta_deg": 0.0,
        "initial_phi_deg": 0.0,
        "nbar_list": [2.0, 3.0, 5.0],
        "drive_multipliers": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        "nth_list": [0.0, 0.015],
        "amp_scales": [0.0, 0.25, 0.5, 0.75, 1.0],
        "detuning_MHz_list": [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0],
        "horizon_us": 50.0,
        "sample_count": 201,
        "dim_storage": 30,
        "dim_reservoir": 3,
        "ramp_on_us": 0.024,
        "tail_us": 0.5,
        "ramp_off_us": 0.024,
        "rtol": 1e-8,
        "atol": 1e-11,
        "max_step_us": math.inf,
        "store_states": False,
        "wigner_extent": None,
        "wigner_points": 61,
    }
}

_FLOAT = ("float", None)
_SCHEMA: dict[str, tuple[str, Any]] = {
    "kappa2_MHz": _FLOAT,
    "kappa1_MHz": _FLOAT,
    "chi_SS_MHz": _FLOAT,
    "chi_RR_MHz": _FLOAT,
    "chi_RS_MHz": _FLOAT,
    "T1R_us": _FLOAT,
    "n_th": _FLOAT,
    "g_MHz": _FLOAT,
    "eps0_MHz": _FLOAT,
    "alpha_phase_deg": _FLOAT,
    "zeno_phase_deg": _FLOAT,
    "model": ("enum", ("reduced", "full")),
    "initial": ("enum", ("cat", "coherent", "cardinal")),
    "initial_phase_deg": _FLOAT,
    "initial_sign": ("enum", (1, -1)),
    "initial_theta_deg": _FLOAT,
    "initial_phi_deg": _FLOAT,
    "nbar_list": ("float_list", None),
    "drive_multipliers": ("float_list", None),
    "nth_list": ("float_list", None),
    "amp_scales": ("float_list", None),
    "detuning_MHz_list": ("float_list", None),
    "horizon_us": _FLOAT,
    "sample_count": ("int", None),
    "dim_storage": ("int", None),
    "dim_reservoir": ("int", None),
    "ramp_on_us": _FLOAT,
    "tail_us": _FLOAT,
    "ramp_off_us": _FLOAT,
    "rtol": _FLOAT,
    "atol": _FLOAT,
    "max_step_us": _FLOAT,
    "store_states": ("bool", None),
    "wigner_extent": ("optional_float", None),
    "wigner_points": ("int", None),
}

_SUFFIXED = {k.rsplit("_", 1)[0]: k for k in _SCHEMA if k.endswith(("_MHz", "_us", "_deg"))}


def _coerce(key: str, value):
    kind, arg = _SCHEMA[key]
    try:
        if kind == "float":
            out = float(value)
        elif kind == "optional_float":
            out = None if value is None else float(value)
        elif kind == "int":
            out = int(value)
            if out != float(value):
                raise ValueError("not an integer")
        elif kind == "bool":
            if not isinstance(value, bool):
                raise ValueError("expected true/false")
            out = value
        elif kind == "enum":
            if value not in arg:
                raise ValueError(f"must be one of {arg}")
            out = value
        elif kind == "float_list":
            out = [float(v) for v in value]
        else:  # pragma: no cover
            raise AssertionError(kind)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r}: invalid value {value!r} ({exc})") from None
    return out


def _check_key(key: str):
    if key in _SCHEMA:
        return
    if key in _SUFFIXED:
        raise UnitMissingError(key, _SUFFIXED[key])
    close = difflib.get_close_matches(key, _SCHEMA.keys(), n=1, cutoff=0.6)
    raise UnknownKeyError(key, close[0] if close else None)


def resolve_config(
    data: dict | None = None,
    overrides: dict | None = None,
    preset: str = "paper-device",
) -> dict:
    """Merge preset <- file <- overrides into a fully resolved, typed dict."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
    resolved = dict(PRESETS[preset])
    for source in (data or {}), (overrides or {}):
        for key, value in source.items():
            _check_key(key)
            resolved[key] = _coerce(key, value)
    return resolved


def _parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        raise ConfigError(f"override {text!r}: unparseable value") from None
    return key.strip(), value


def parse_config(
    path: str | None,
    overrides: tuple[str, ...] = (),
    preset: str = "paper-device",
) -> tuple[ExperimentConfig, dict]:
    """Load, validate and resolve a config file plus key=value overrides.

    ``path`` may be a config file or a manifest emitted by a previous run
    (its embedded resolved config is then reused verbatim).  Returns the
    typed ExperimentConfig together with the resolved user-level dict that
    manifests record.
    """
    data: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(
                f"config parse error: {exc}",
                line=None if mark is None else mark.line + 1,
                column=None if mark is None else mark.column + 1,
            ) from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a mapping")
        if "config" in loaded and isinstance(loaded["config"], dict):
            loaded = loaded["config"]  # manifest round-trip
        data = loaded
    ov = dict(_parse_override(o) for o in overrides)
    resolved = resolve_config(data, ov, preset=preset)
    return config_from_dict(resolved), resolved


def config_from_dict(d: dict) -> ExperimentConfig:
    """Typed ExperimentConfig (angular units) from a resolved user dict."""
    deg = math.pi / 180.0
    return ExperimentConfig(
        kappa2=mhz_to_angular(d["kappa2_MHz"]),
        kappa1=mhz_to_angular(d["kappa1_MHz"]),
        chi_ss=mhz_to_angular(d["chi_SS_MHz"]),
        chi_rr=mhz_to_angular(d["chi_RR_MHz"]),
        chi_rs=mhz_to_angular(d["chi_RS_MHz"]),
        kappa_r=1.0 / d["T1R_us"],
        g_mag=mhz_to_angular(d["g_MHz"]),
        n_th=d["n_th"],
        eps0=mhz_to_angular(d["eps0_MHz"]),
        alpha_phase=d["alpha_phase_deg"] * deg,
        zeno_phase=d["zeno_phase_deg"] * deg,
        model_kind=d["model"],
        initial=InitialState(
            kind=d["initial"],
            phase=d["initial_phase_deg"] * deg,
            sign=int(d["initial_sign"]),
            theta=d["initial_theta_deg"] * deg,
            phi=d["initial_phi_deg"] * deg,
        ),
        protocol=Protocol(
            ramp_on=d["ramp_on_us"], hold=0.0, tail=d["tail_us"], ramp_off=d["ramp_off_us"]
        ),
        nbar_list=tuple(d["nbar_list"]),
        drive_multipliers=tuple(d["drive_multipliers"]),
        nth_list=tuple(d["nth_list"]),
        amp_scales=tuple(d["amp_scales"]),
        detunings=tuple(mhz_to_angular(f) for f in d["detuning_MHz_list"]),
        horizon=d["horizon_us"],
        sample_count=d["sample_count"],
        dim_s=d["dim_storage"],
        dim_r=d["dim_reservoir"],
        numerics=SolverConfig(
            rtol=d["rtol"], atol=d["atol"], max_step=d["max_step_us"],
            store_states=d["store_states"],
        ),
        wigner_extent=d["wigner_extent"],
        wigner_points=d["wigner_points"],
    )


def config_to_dict(resolved: dict) -> dict:
    """Deterministically ordered copy for manifest emission."""
    return {k: resolved[k] for k in sorted(resolved)}
