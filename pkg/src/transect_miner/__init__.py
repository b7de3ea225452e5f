"""Rank element pairs along a geochemical transect by log-ratio curvature.

Per-element penalized Tweedie GAMs are fitted on a B-spline basis, log-ratio
curves of every pair are scaled to the unit square, and each pair is scored
by the mean squared peak of its curvature above a threshold (the c-value).
"""

from .curvature import (
    CurvatureConfig,
    CurvatureProfile,
    LogRatioCurve,
    ThresholdPolicy,
    c_value,
    curvature_of,
    exceedance_intervals,
    logratio_curve,
    pick_threshold,
    profile_all_pairs,
    profile_pair,
)
from .gam import (
    FamilyConfig,
    FittedCurve,
    SplineBasis,
    build_basis,
    evaluate,
    fit_gam,
    penalty_matrix,
    select_lambda,
    tweedie_deviance,
)
from .ingest import (
    Censored,
    SampleRow,
    SampleTable,
    Transect,
    parse_samples,
    project_to_transect,
    resolve_censoring,
)
from .pipeline import FitConfig, fit_transect, rank_bundle
from .ranking import CValueMatrix, RankedPairs, c_matrix, material_comparison, pathfinder_scores, top_k
from .synth import GroundTruth, SynthConfig, generate, score_recovery

__version__ = "0.1.0"
