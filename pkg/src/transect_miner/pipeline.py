"""End-to-end helpers: fit every element of a transect, then rank its pairs."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gam
from .curvature import CurvatureConfig, profile_all_pairs
from .errors import InsufficientDataError, TransectMinerError
from .ingest import project_to_transect, resolve_censoring
from .ranking import c_matrix, pathfinder_scores, rank_pairs

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8


@dataclass(frozen=True)
class FitConfig:
    n_basis: int | None = None  # None: min(10, n // 2)
    degree: int = 3
    power: float = gam.DEFAULT_POWER
    power_overrides: dict = field(default_factory=dict)
    profile_power: bool = False
    # "gcv" or a fixed nonnegative number
    lam: object = "gcv"
    lambda_overrides: dict = field(default_factory=dict)
    lambda_grid_size: int = 30
    lambda_min: float = 1e-4
    lambda_max: float = 1e6
    min_samples: int = MIN_SAMPLES
    n_jobs: int = 1

    def lambda_grid(self):
        return gam.default_lambda_grid(self.lambda_grid_size, self.lambda_min, self.lambda_max)


@dataclass(frozen=True, eq=False)
class FitBundle:
    site_id: str
    material: str
    positions: np.ndarray
    fits: dict  # element -> FittedCurve, converged only, transect order
    failed: dict  # element -> reason


def fit_element(y, positions, weights, basis, element, config):
    power = config.power_overrides.get(element, config.power)
    lam = config.lambda_overrides.get(element, config.lam)
    if lam == "gcv":
        if config.profile_power and element not in config.power_overrides:
            _, sel = gam.profile_power(y, positions, weights, basis, lam_grid=config.lambda_grid())
        else:
            sel = gam.select_lambda(
                y, positions, weights, basis, gam.FamilyConfig(power), config.lambda_grid()
            )
        return sel.fit
    return gam.fit_gam(y, positions, weights, basis, gam.FamilyConfig(power), float(lam))


def fit_transect(transect, config=None):
    """Fit every element of `transect` on one shared basis.

    Elements whose fit raises or does not converge land in ``failed``.
    Raises :class:`InsufficientDataError` below ``config.min_samples``.
    """
    config = config or FitConfig()
    n = transect.n
    if n < config.min_samples:
        raise InsufficientDataError(
            f"site {transect.site_id!r}, material {transect.material!r}: "
            f"{n} samples, at least {config.min_samples} required for fitting"
        )
    n_basis = config.n_basis or gam.default_n_basis(n, config.degree)
    basis = gam.build_basis(transect.positions, n_basis, config.degree)

    def one(j):
        name = transect.element_names[j]
        try:
            return name, fit_element(
                transect.Y[:, j], transect.positions, transect.weights, basis, name, config
            )
        except TransectMinerError as exc:
            return name, exc

    idx = range(len(transect.element_names))
    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(one, idx))
    else:
        results = [one(j) for j in idx]

    fits, failed = {}, {}
    for name, res in results:
        if isinstance(res, Exception):
            failed[name] = str(res)
        elif not res.converged:
            failed[name] = f"no convergence after {res.iterations} iterations"
        else:
            fits[name] = res
    for name, why in failed.items():
        logger.warning("element %s excluded: %s", name, why)
    return FitBundle(transect.site_id, transect.material, transect.positions, fits, failed)


@dataclass(frozen=True, eq=False)
class MaterialResult:
    site_id: str
    material: str
    profiles: list
    matrix: object
    ranked: object
    pathfinders: list

    def profile(self, a, b):
        for prof in self.profiles:
            if prof.pair in ((a, b), (b, a)):
                return prof
        raise KeyError((a, b))


def rank_bundle(bundle, config=None, n_jobs=1):
    """Profiles, c-value matrix, ranking and pathfinder scores for one bundle."""
    config = config or CurvatureConfig()
    profiles = profile_all_pairs(bundle.fits, config, bundle.positions, n_jobs=n_jobs)
    names = tuple(bundle.fits)
    matrix = c_matrix(profiles, names, bundle.material)
    return MaterialResult(
        bundle.site_id,
        bundle.material,
        profiles,
        matrix,
        rank_pairs(matrix),
        pathfinder_scores(matrix),
    )


def run_table(table, site_id, material, fit_config=None, curvature_config=None,
              censoring="half_limit", max_missing_fraction=0.1):
    """Convenience: censoring, projection, fitting and ranking for one group."""
    resolved = resolve_censoring(table, censoring)
    transect = project_to_transect(resolved, site_id, material, max_missing_fraction)
    bundle = fit_transect(transect, fit_config)
    return rank_bundle(bundle, curvature_config)
