"""Run configuration: TOML file, ``--set section.key=value`` overrides, hashing."""

from __future__ import annotations

import copy
import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .curvature import CurvatureConfig, ThresholdPolicy
from .errors import ConfigError
from .pipeline import FitConfig
from .synth import BASELINES, SynthConfig

DEFAULTS = {
    "ingest": {
        "input": "",
        "delimiter": "",
        "censoring": "half_limit",
        "censoring_fraction": 0.5,
        "max_missing_fraction": 0.1,
        "sites": [],
        "materials": [],
    },
    "fit": {
        "input": "",
        "n_basis": 0,
        "degree": 3,
        "tweedie_power": 1.5,
        "power_overrides": {},
        "profile_power": False,
        "lambda": "gcv",
        "lambda_overrides": {},
        "lambda_grid_size": 30,
        "lambda_min": 1e-4,
        "lambda_max": 1e6,
        "min_samples": 8,
        "n_jobs": 1,
    },
    "rank": {
        "input": "",
        "grid_size": 512,
        "threshold": "quantile:0.9",
        "threshold_scope": "pair",
        "top_k": 70,
        "pair_plots": "top",
        "n_jobs": 1,
    },
    "synth": {
        "seed": 0,
        "n_samples": 50,
        "n_elements": 20,
        "planted_elements": [],
        "n_planted": 2,
        "anomaly_centers": [6000.0],
        "anomaly_width": 300.0,
        "anomaly_amplitude": 3.0,
        "baseline": "constant",
        "baseline_strength": 0.3,
        "tweedie_power": 1.5,
        "dispersion": 0.5,
        "level_min": 10.0,
        "level_max": 1000.0,
        "transect_length": 12000.0,
        "site": "S1",
        "material": "soil",
        "null_materials": [],
    },
}


def _merge(base, update, where=""):
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and where == "":
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be a table")
            _merge(base[key], value, f"{key}.")
        else:
            base[key] = _coerce(base[key], value, f"{where}{key}")


def _coerce(default, value, name):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(default, int) and not isinstance(value, int):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if isinstance(default, float) and not isinstance(value, float):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{name}: expected a list, got {value!r}")
    if isinstance(default, dict) and not isinstance(value, dict):
        raise ConfigError(f"{name}: expected a table, got {value!r}")
    return value


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def parse_override(item):
    """``"fit.lambda=10"`` -> ``("fit", "lambda", 10.0)``; values use TOML syntax."""
    key, sep, raw = item.partition("=")
    section, dot, name = key.strip().partition(".")
    if not sep or not dot:
        raise ConfigError(f"--set expects section.key=value, got {item!r}")
    return section, name, _parse_value(raw.strip())


class RunConfig:
    """Resolved configuration for every subcommand."""

    def __init__(self, data=None):
        self.data = copy.deepcopy(DEFAULTS)
        if data:
            _merge(self.data, data)
        self.validate()

    @classmethod
    def load(cls, path=None, overrides=()):
        doc = {}
        if path:
            with open(path, "rb") as fh:
                try:
                    doc = tomllib.load(fh)
                except tomllib.TOMLDecodeError as exc:
                    raise ConfigError(f"{path}: {exc}") from None
        for item in overrides:
            section, name, value = parse_override(item)
            doc.setdefault(section, {})[name] = value
        return cls(doc)

    def __getitem__(self, section):
        return self.data[section]

    def to_dict(self):
        return copy.deepcopy(self.data)

    def to_json(self):
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def sha256(self):
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def validate(self):
        try:
            self.fit_config()
            self.curvature_config()
            self.synth_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self["ingest"]["censoring"] not in ("half_limit", "fixed_fraction", "drop"):
            raise ConfigError(f"ingest.censoring: unknown policy {self['ingest']['censoring']!r}")
        if self["rank"]["top_k"] < 1:
            raise ConfigError("rank.top_k must be at least 1")
        if self["rank"]["pair_plots"] not in ("top", "all", "none"):
            raise ConfigError("rank.pair_plots must be 'top', 'all' or 'none'")

    def fit_config(self):
        f = self["fit"]
        lam = f["lambda"]
        if lam != "gcv":
            if isinstance(lam, str) or lam < 0:
                raise ValueError(f"fit.lambda must be 'gcv' or a nonnegative number, got {lam!r}")
        for name, v in f["lambda_overrides"].items():
            if v != "gcv" and (isinstance(v, str) or v < 0):
                raise ValueError(f"fit.lambda_overrides.{name}: invalid value {v!r}")
        if not 0 < f["lambda_min"] <= f["lambda_max"] or f["lambda_grid_size"] < 1:
            raise ValueError("need 0 < fit.lambda_min <= fit.lambda_max and fit.lambda_grid_size >= 1")
        if not 1.0 <= f["tweedie_power"] <= 2.0:
            raise ValueError("fit.tweedie_power must lie in [1, 2]")
        return FitConfig(
            n_basis=f["n_basis"] or None,
            degree=f["degree"],
            power=f["tweedie_power"],
            power_overrides=dict(f["power_overrides"]),
            profile_power=f["profile_power"],
            lam=lam,
            lambda_overrides=dict(f["lambda_overrides"]),
            lambda_grid_size=f["lambda_grid_size"],
            lambda_min=f["lambda_min"],
            lambda_max=f["lambda_max"],
            min_samples=f["min_samples"],
            n_jobs=f["n_jobs"],
        )

    def curvature_config(self):
        r = self["rank"]
        return CurvatureConfig(
            grid_size=r["grid_size"],
            threshold=ThresholdPolicy.parse(r["threshold"]),
            scope=r["threshold_scope"],
        )

    def synth_config(self, material=None, seed_offset=0, planted=True):
        s = self["synth"]
        if s["baseline"] not in BASELINES:
            raise ValueError(f"synth.baseline must be one of {BASELINES}")
        return SynthConfig(
            seed=s["seed"] + seed_offset,
            n_samples=s["n_samples"],
            n_elements=s["n_elements"],
            planted_elements=tuple(s["planted_elements"]) if s["planted_elements"] and planted else None,
            n_planted=s["n_planted"] if planted else 0,
            anomaly_centers=tuple(float(c) for c in s["anomaly_centers"]),
            anomaly_width=s["anomaly_width"],
            anomaly_amplitude=s["anomaly_amplitude"],
            baseline=s["baseline"],
            baseline_strength=s["baseline_strength"],
            power=s["tweedie_power"],
            dispersion=s["dispersion"],
            level_range=(s["level_min"], s["level_max"]),
            transect_length=s["transect_length"],
            site_id=s["site"],
            material=material or s["material"],
        )
