"""Log-ratio curves of fitted pairs, their curvature, and the c-value.

For a pair of fits the log-ratio ``g = eta_1 - eta_2`` is evaluated on an
even grid and differentiated in the normalized coordinate ``u`` in [0, 1].
With ``k = 1 / (max g - min g)`` the curve is drawn in the unit square and
its curvature is::

    kappa(u) = |k g''(u)| / (1 + (k g'(u))**2) ** 1.5

Grid stretches where ``kappa >= T`` form the exceedance intervals; the
c-value is the mean over intervals of ``max (kappa - T)_+ ** 2``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DomainError

DEGENERATE_RANGE = 1e-12


@dataclass(frozen=True)
class ThresholdPolicy:
    """``quantile`` of kappa over the grid, or a fixed ``absolute`` value."""

    kind: str = "quantile"
    value: float = 0.9

    def __post_init__(self):
        if self.kind == "quantile":
            if not 0 < self.value < 1:
                raise ValueError(f"quantile threshold needs 0 < q < 1, got {self.value}")
        elif self.kind == "absolute":
            if not self.value >= 0:
                raise ValueError(f"absolute threshold must be nonnegative, got {self.value}")
        else:
            raise ValueError(f"unknown threshold policy {self.kind!r}")

    @classmethod
    def parse(cls, text):
        """Parse ``"quantile:0.9"`` or ``"absolute:0.3"``."""
        kind, _, value = str(text).partition(":")
        return cls(kind.strip(), float(value))

    def __str__(self):
        return f"{self.kind}:{self.value!r}"


@dataclass(frozen=True)
class CurvatureConfig:
    grid_size: int = 512
    threshold: ThresholdPolicy = field(default_factory=ThresholdPolicy)
    # "pair": one threshold per pair; "global": one threshold for all pairs of a material
    scope: str = "pair"

    def __post_init__(self):
        if self.grid_size < 16:
            raise ValueError(f"grid_size must be at least 16, got {self.grid_size}")
        if self.scope not in ("pair", "global"):
            raise ValueError(f"threshold scope must be 'pair' or 'global', got {self.scope!r}")


@dataclass(frozen=True, eq=False)
class LogRatioCurve:
    x: np.ndarray
    u: np.ndarray
    g: np.ndarray
    d1: np.ndarray  # dg/du
    d2: np.ndarray  # d2g/du2
    k: float
    degenerate: bool


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    pair: tuple
    curve: LogRatioCurve
    kappa: np.ndarray
    threshold: float
    intervals: np.ndarray  # (n_intervals, 2) in u
    interval_maxima: np.ndarray
    c_value: float
    flagged: tuple = ()  # sample indices inside an exceedance interval

    @property
    def x(self):
        return self.curve.x

    @property
    def u(self):
        return self.curve.u

    @property
    def intervals_x(self):
        lo = self.curve.x[0]
        return lo + self.intervals * (self.curve.x[-1] - lo)

    @property
    def n_crossings(self):
        return 2 * len(self.intervals)

    def exceeds(self):
        """Grid mask of points lying inside an exceedance interval."""
        mask = np.zeros(len(self.kappa), dtype=bool)
        for start, end in self.intervals:
            mask |= (self.u >= start) & (self.u <= end)
        return mask


def logratio_curve(fit1, fit2, m=512):
    """Evaluate ``g = eta_1 - eta_2`` and its u-derivatives on `m` points."""
    if m < 16:
        raise ValueError(f"grid size must be at least 16, got {m}")
    lo, hi = fit1.domain
    lo2, hi2 = fit2.domain
    if not (np.isclose(lo, lo2, rtol=1e-12, atol=0) and np.isclose(hi, hi2, rtol=1e-12, atol=0)):
        raise DomainError(f"fits cover different domains: [{lo}, {hi}] vs [{lo2}, {hi2}]")
    length = hi - lo
    u = np.linspace(0.0, 1.0, m)
    x = lo + u * length
    x[-1] = hi
    g = fit1.eta(x, 0) - fit2.eta(x, 0)
    d1 = length * (fit1.eta(x, 1) - fit2.eta(x, 1))
    d2 = length**2 * (fit1.eta(x, 2) - fit2.eta(x, 2))
    spread = g.max() - g.min()
    degenerate = not spread >= DEGENERATE_RANGE
    k = 0.0 if degenerate else 1.0 / spread
    return LogRatioCurve(x, u, g, d1, d2, k, degenerate)


def curvature_of(curve):
    """Pointwise curvature of the scaled log-ratio; zero for degenerate curves."""
    if curve.degenerate:
        return np.zeros_like(curve.g)
    return np.abs(curve.k * curve.d2) / (1.0 + (curve.k * curve.d1) ** 2) ** 1.5


def pick_threshold(kappa, policy=None):
    policy = policy or ThresholdPolicy()
    kappa = np.asarray(kappa, dtype=float)
    if kappa.size == 0:
        raise ValueError("cannot pick a threshold from an empty curvature array")
    if policy.kind == "absolute":
        return float(policy.value)
    return float(np.quantile(kappa, policy.value))


def _runs(above):
    """Inclusive (start, end) index pairs of the True runs in `above`."""
    edges = np.diff(np.r_[0, above.astype(np.int8), 0])
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts, ends))


def _crossing(u, kappa, i, j, threshold):
    # linear interpolation of kappa == threshold between grid points i and j
    ki, kj = kappa[i], kappa[j]
    if kj == ki:
        return u[j]
    return u[i] + (threshold - ki) / (kj - ki) * (u[j] - u[i])


def exceedance_intervals(kappa, threshold, u=None):
    """Maximal stretches where ``kappa >= threshold``, as ``[u_start, u_end]`` rows.

    Interior endpoints are interpolated between neighbouring grid points; an
    exceedance running into a domain edge ends at the edge itself.  Runs that
    only touch the threshold carry no exceedance and are skipped: those with
    peak exactly ``T``, or with a squared excess that underflows to zero.
    """
    kappa = np.asarray(kappa, dtype=float)
    u = np.linspace(0.0, 1.0, len(kappa)) if u is None else np.asarray(u, dtype=float)
    if len(u) != len(kappa):
        raise ValueError("kappa and grid must have the same length")
    out = []
    last = len(kappa) - 1
    for a, b in _runs(kappa >= threshold):
        if not (kappa[a : b + 1].max() - threshold) ** 2 > 0:
            continue
        start = u[0] if a == 0 else _crossing(u, kappa, a - 1, a, threshold)
        end = u[last] if b == last else _crossing(u, kappa, b, b + 1, threshold)
        out.append((start, end))
    return np.array(out, dtype=float).reshape(-1, 2)


def interval_maxima(kappa, threshold, intervals, u=None):
    """``max (kappa - T)_+ ** 2`` over the grid points of each interval.

    Interpolated endpoints sit at ``kappa == T`` and contribute zero.
    """
    kappa = np.asarray(kappa, dtype=float)
    u = np.linspace(0.0, 1.0, len(kappa)) if u is None else np.asarray(u, dtype=float)
    peaks = []
    for start, end in np.asarray(intervals, dtype=float).reshape(-1, 2):
        inside = kappa[(u >= start) & (u <= end)]
        top = inside.max() - threshold if inside.size else 0.0
        peaks.append(max(top, 0.0) ** 2)
    return np.array(peaks, dtype=float)


def c_value(kappa, threshold, intervals, u=None):
    """Mean squared peak exceedance over the exceedance intervals.

    With ``L = 2 * len(intervals)`` crossings this is
    ``(2 / L) * sum(interval_maxima)``; zero when nothing exceeds.
    """
    peaks = interval_maxima(kappa, threshold, intervals, u)
    if peaks.size == 0:
        return 0.0
    crossings = 2 * peaks.size
    return float(2.0 / crossings * peaks.sum())


def _flag_samples(positions, intervals_x):
    if positions is None:
        return ()
    positions = np.asarray(positions, dtype=float)
    hit = np.zeros(len(positions), dtype=bool)
    for lo, hi in intervals_x:
        hit |= (positions >= lo) & (positions <= hi)
    return tuple(int(i) for i in np.flatnonzero(hit))


def _assemble(pair, curve, kappa, threshold, positions):
    intervals = exceedance_intervals(kappa, threshold, curve.u)
    peaks = interval_maxima(kappa, threshold, intervals, curve.u)
    c = c_value(kappa, threshold, intervals, curve.u)
    lo, hi = curve.x[0], curve.x[-1]
    flagged = _flag_samples(positions, lo + intervals * (hi - lo))
    return CurvatureProfile(tuple(pair), curve, kappa, float(threshold), intervals, peaks, c, flagged)


def profile_pair(fit1, fit2, config=None, positions=None, pair=("el1", "el2"), threshold=None):
    """Curvature profile of one pair of fits.

    Parameters
    ----------
    positions : array_like, optional
        Sample positions; those inside an exceedance interval are reported
        in ``flagged`` as predicted mineralization.
    threshold : float, optional
        Use this threshold instead of applying ``config.threshold``.
    """
    config = config or CurvatureConfig()
    curve = logratio_curve(fit1, fit2, config.grid_size)
    kappa = curvature_of(curve)
    if threshold is None:
        threshold = pick_threshold(kappa, config.threshold)
    return _assemble(pair, curve, kappa, threshold, positions)


def element_pairs(names):
    """Unordered pairs in canonical order: ``(names[i], names[j])`` for ``i < j``."""
    return list(combinations(names, 2))


def profile_all_pairs(fits, config=None, positions=None, n_jobs=1):
    """Profiles for every unordered pair of `fits` (a name -> curve mapping).

    Output order follows :func:`element_pairs` regardless of `n_jobs`.  With
    ``config.scope == "global"`` one threshold is picked from the curvature
    of all pairs pooled together.
    """
    config = config or CurvatureConfig()
    pairs = element_pairs(list(fits))

    def curve_and_kappa(pair):
        curve = logratio_curve(fits[pair[0]], fits[pair[1]], config.grid_size)
        return curve, curvature_of(curve)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(curve_and_kappa, pairs))
    else:
        parts = [curve_and_kappa(p) for p in pairs]

    if config.scope == "global" and parts:
        pooled = pick_threshold(np.concatenate([k for _, k in parts]), config.threshold)
        thresholds = [pooled] * len(parts)
    else:
        thresholds = [pick_threshold(k, config.threshold) for _, k in parts]
    return [
        _assemble(pair, curve, kappa, t, positions)
        for pair, (curve, kappa), t in zip(pairs, parts, thresholds)
    ]
