"""Seeded synthetic transects with planted anomalies and their ground truth.

Every element has a smooth positive mean surface (a random level times a
baseline trend).  Planted elements are additionally multiplied by a Gaussian
bump ``1 + (amplitude - 1) * exp(-0.5 * ((x - c) / width) ** 2)`` at each
anomaly centre.  Observations are gamma draws whose mean and variance match
a Tweedie law, ``E y = mu`` and ``Var y = dispersion * mu ** power``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .ingest import SampleRow, SampleTable

BASELINES = ("constant", "linear", "sinusoid")
TRUTH_FORMAT = "transect-miner/ground-truth"
HALF_MAX = math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_samples: int = 50
    n_elements: int = 20
    # explicit planted element names; None draws `n_planted` of them from the seed
    planted_elements: tuple | None = None
    n_planted: int = 2
    anomaly_centers: tuple = (6000.0,)
    anomaly_width: float = 300.0
    anomaly_amplitude: float = 3.0
    baseline: str = "constant"
    baseline_strength: float = 0.3
    power: float = 1.5
    dispersion: float = 0.5
    level_range: tuple = (10.0, 1000.0)
    transect_length: float = 12000.0
    site_id: str = "S1"
    material: str = "soil"

    def __post_init__(self):
        if self.n_samples < 1 or self.n_elements < 1:
            raise ValueError("n_samples and n_elements must be at least 1")
        if not self.anomaly_amplitude >= 1.0:
            raise ValueError(f"anomaly_amplitude must be >= 1, got {self.anomaly_amplitude}")
        if not self.anomaly_width > 0:
            raise ValueError(f"anomaly_width must be positive, got {self.anomaly_width}")
        if not self.transect_length > 0:
            raise ValueError("transect_length must be positive")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}, got {self.baseline!r}")
        if not 1.0 <= self.power <= 2.0 or not self.dispersion > 0:
            raise ValueError("need 1 <= power <= 2 and dispersion > 0")
        if self.planted_elements is not None:
            unknown = set(self.planted_elements) - set(self.element_names)
            if unknown:
                raise ValueError(f"planted elements not among generated elements: {sorted(unknown)}")
        elif not 0 <= self.n_planted <= self.n_elements:
            raise ValueError(f"n_planted must be within [0, n_elements], got {self.n_planted}")
        for c in self.anomaly_centers:
            if not 0 <= c <= self.transect_length:
                raise ValueError(f"anomaly centre {c} outside [0, {self.transect_length}]")

    @property
    def element_names(self):
        width = len(str(self.n_elements))
        return tuple(f"E{i:0{width}d}" for i in range(1, self.n_elements + 1))


@dataclass(frozen=True)
class GroundTruth:
    planted_elements: tuple
    intervals: tuple  # ((start, end), ...) in transect coordinates
    transect_length: float

    def to_dict(self):
        return {
            "format": TRUTH_FORMAT,
            "version": 1,
            "planted_elements": list(self.planted_elements),
            "intervals": [list(iv) for iv in self.intervals],
            "transect_length": self.transect_length,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            tuple(doc["planted_elements"]),
            tuple(tuple(iv) for iv in doc["intervals"]),
            float(doc["transect_length"]),
        )


def bump(x, centers, width, amplitude):
    """Multiplicative anomaly factor at positions `x`."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    for c in centers:
        out *= 1.0 + (amplitude - 1.0) * np.exp(-0.5 * ((x - c) / width) ** 2)
    return out


def mean_surfaces(config, positions, rng):
    """Per-element mean concentrations, shape ``(n_samples, n_elements)``.

    Consumes `rng` for levels and baseline parameters only.
    """
    L = config.transect_length
    D = config.n_elements
    lo, hi = np.log(config.level_range)
    levels = np.exp(rng.uniform(lo, hi, D))
    s = config.baseline_strength
    if config.baseline == "constant":
        trend = np.zeros((len(positions), D))
    elif config.baseline == "linear":
        slopes = rng.uniform(-s, s, D)
        trend = np.outer(positions / L - 0.5, slopes) * 2.0
    else:
        phases = rng.uniform(0.0, 2.0 * np.pi, D)
        trend = s * np.sin(2.0 * np.pi * positions[:, None] / L + phases[None, :])
    return levels[None, :] * np.exp(trend)


def _planted(config, rng):
    if config.planted_elements is not None:
        return tuple(config.planted_elements)
    names = config.element_names
    picks = np.sort(rng.choice(len(names), size=config.n_planted, replace=False))
    return tuple(names[i] for i in picks)


def generate(config):
    """Draw one synthetic transect; returns ``(SampleTable, GroundTruth)``.

    The first and last samples sit at the transect ends so transect
    coordinates after projection coincide with generator coordinates.
    Identical configs give identical output.
    """
    rng = np.random.default_rng(config.seed)
    L = config.transect_length
    n = config.n_samples
    inner = np.sort(rng.uniform(0.0, L, max(n - 2, 0)))
    positions = np.r_[0.0, inner, L][:n] if n >= 2 else np.zeros(n)
    planted = _planted(config, rng)
    mu = mean_surfaces(config, positions, rng)
    factor = bump(positions, config.anomaly_centers, config.anomaly_width, config.anomaly_amplitude)
    for j, name in enumerate(config.element_names):
        if name in planted:
            mu[:, j] *= factor

    p, phi = config.power, config.dispersion
    shape = mu ** (2.0 - p) / phi
    scale = phi * mu ** (p - 1.0)
    y = rng.gamma(shape, scale)
    y = np.maximum(y, np.finfo(float).tiny)

    rows = tuple(
        SampleRow(
            site_id=config.site_id,
            traverse_id="T1",
            easting=float(positions[i]),
            northing=0.0,
            material=config.material,
            weight=1.0,
            concentrations=tuple(float(v) for v in y[i]),
        )
        for i in range(n)
    )
    table = SampleTable(rows, config.element_names, (config.material,))

    half = HALF_MAX * config.anomaly_width
    intervals = tuple(
        (max(0.0, c - half), min(L, c + half)) for c in sorted(config.anomaly_centers)
    ) if planted else ()
    return table, GroundTruth(planted, intervals, L)


@dataclass(frozen=True)
class RecoveryMetrics:
    fraction: float
    jaccard: float | None


def _union(intervals):
    merged = []
    for lo, hi in sorted((float(a), float(b)) for a, b in intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return merged


def _length(intervals):
    return sum(hi - lo for lo, hi in intervals)


def jaccard(a, b):
    """Jaccard index of two unions of intervals; None when both are empty."""
    ua, ub = _union(a), _union(b)
    union = _length(_union(ua + ub))
    if union <= 0:
        return None
    inter = 0.0
    for lo1, hi1 in ua:
        for lo2, hi2 in ub:
            inter += max(0.0, min(hi1, hi2) - max(lo1, lo2))
    return inter / union


def score_recovery(ranked, truth, k, top_intervals=None):
    """Share of the top-`k` pairs containing a planted element, and overlap.

    `top_intervals` are the exceedance intervals (transect coordinates) of
    the rank-1 pair; the overlap is absent without them or without truth.
    """
    if not truth.planted_elements:
        return RecoveryMetrics(0.0, None)
    top = list(ranked)[:k]
    planted = set(truth.planted_elements)
    hits = sum(1 for a, b, _ in top if a in planted or b in planted)
    fraction = hits / len(top) if top else 0.0
    overlap = None
    if top_intervals is not None and truth.intervals:
        overlap = jaccard(list(top_intervals), list(truth.intervals))
    return RecoveryMetrics(fraction, overlap)


def config_to_dict(config):
    doc = asdict(config)
    for key in ("planted_elements", "anomaly_centers", "level_range"):
        if doc[key] is not None:
            doc[key] = list(doc[key])
    return doc


def write_truth(truth, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_truth(path):
    with open(path, encoding="utf-8") as fh:
        return GroundTruth.from_dict(json.load(fh))
