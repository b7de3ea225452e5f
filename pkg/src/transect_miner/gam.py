"""Penalized Tweedie GAM with log link on a cubic B-spline basis.

Each element's concentrations ``y`` are modelled as ``mu(x) = exp(eta(x))``
with ``eta(x) = sum_j beta_j B_j(x)``.  Coefficients minimize the penalized
weighted deviance::

    F(beta) = sum_i w_i d(y_i, mu_i; p) + 2 * lam * beta' S beta

where ``d`` is the Tweedie unit deviance and ``beta' S beta`` is the
integrated squared second derivative of ``eta``.  The penalty is measured in
the normalized coordinate ``u = (x - x_min) / (x_max - x_min)`` so that one
smoothing grid fits transects of any length.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg
from scipy.interpolate import BSpline

from .errors import DomainError, FitError, GeometryError, SelectionError

logger = logging.getLogger(__name__)

CURVE_FORMAT = "transect-miner/fitted-curve"
CURVE_VERSION = 1

DEFAULT_POWER = 1.5
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
POWER_GRID = tuple(np.round(np.arange(1.1, 1.95, 0.1), 10))


def default_lambda_grid(n=30, low=1e-4, high=1e6):
    return np.logspace(np.log10(low), np.log10(high), n)


def default_n_basis(n_samples, degree=3, cap=10):
    return max(min(cap, n_samples // 2), degree + 2)


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Clamped B-spline basis; boundary knots repeated ``degree + 1`` times."""

    knots: np.ndarray
    degree: int = 3
    _spline: BSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        eye = np.eye(len(knots) - self.degree - 1)
        object.__setattr__(self, "_spline", BSpline(knots, eye, self.degree, extrapolate=False))

    @property
    def n_basis(self):
        return len(self.knots) - self.degree - 1

    @property
    def n_interior(self):
        return self.n_basis - self.degree - 1

    @property
    def domain(self):
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    @property
    def length(self):
        lo, hi = self.domain
        return hi - lo

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        slack = 1e-12 * (hi - lo)
        if np.any(x < lo - slack) or np.any(x > hi + slack) or np.any(~np.isfinite(x)):
            raise DomainError(f"extrapolation: x outside fitted domain [{lo}, {hi}]")
        return np.clip(x, lo, hi)

    def design(self, x, order=0):
        """Matrix of basis values (or derivatives) with shape ``(len(x), n_basis)``."""
        x = self._check(np.atleast_1d(x))
        return self._spline(x, nu=order)


def build_basis(positions, n_basis, degree=3):
    """Basis over the span of `positions` with interior knots at quantiles.

    Falls back to evenly spaced interior knots when repeated positions would
    make quantile knots coincide.
    """
    x = np.asarray(positions, dtype=float)
    if n_basis < degree + 2:
        raise ValueError(f"n_basis must be at least degree + 2 = {degree + 2}, got {n_basis}")
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise GeometryError("positions span a degenerate interval")
    n_int = n_basis - degree - 1
    levels = np.arange(1, n_int + 1) / (n_int + 1)
    interior = np.quantile(np.unique(x), levels)
    spacing = np.diff(np.r_[lo, interior, hi])
    if np.any(spacing <= 1e-6 * (hi - lo)):
        interior = lo + levels * (hi - lo)
    knots = np.r_[[lo] * (degree + 1), interior, [hi] * (degree + 1)]
    return SplineBasis(knots, degree)


def penalty_root(basis):
    """Matrix ``R`` with ``R.T @ R`` equal to :func:`penalty_matrix`.

    Rows are weighted second derivatives at Gauss-Legendre nodes, exact for
    the piecewise polynomial integrand.  ``||R beta||**2`` keeps the penalty
    of an affine curve at rounding level squared, far below what the
    quadratic form ``beta' S beta`` achieves.
    """
    if basis.degree < 2:
        raise DomainError(f"penalty needs degree >= 2, got {basis.degree}")
    nodes, wts = np.polynomial.legendre.leggauss(2 * basis.degree)
    t = basis.knots
    blocks = []
    for a, b in zip(t[:-1], t[1:]):
        if b <= a:
            continue
        half = 0.5 * (b - a)
        x = a + half * (nodes + 1.0)
        blocks.append(basis.design(x, order=2) * np.sqrt(half * wts)[:, None])
    return np.vstack(blocks)


def penalty_matrix(basis):
    """Gram matrix ``S_jk = integral B_j'' B_k'' dx`` over the basis domain.

    Computed exactly with Gauss-Legendre quadrature on every knot span.
    """
    R = penalty_root(basis)
    S = R.T @ R
    return 0.5 * (S + S.T)


def unit_penalty_matrix(basis):
    """Penalty with second derivatives taken in the normalized coordinate."""
    return penalty_matrix(basis) * basis.length**3


def tweedie_deviance(y, mu, p):
    """Tweedie unit deviance ``d(y, mu)``.

    Uses the Poisson form at ``p == 1`` and the gamma form at ``p == 2``.
    Accepts scalars or arrays and broadcasts.  Fitting is restricted to
    ``1 <= p <= 2``, but the formula is evaluated for any finite `p` (it is a
    Bregman divergence of a convex function, hence nonnegative), so limits
    can be approached from both sides.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not np.isfinite(p):
        raise DomainError(f"Tweedie power must be finite, got {p}")
    if np.any(~(y > 0)) or np.any(~(mu > 0)):
        raise DomainError("Tweedie deviance needs y > 0 and mu > 0")
    if p == 1.0:
        d = 2.0 * (y * np.log(y / mu) - (y - mu))
    elif p == 2.0:
        d = 2.0 * (np.log(mu / y) + y / mu - 1.0)
    else:
        # d/2 = y (y^a - mu^a)/a - (y^b - mu^b)/b with a = 1-p, b = 2-p,
        # written with expm1 so p near 1 or 2 does not cancel catastrophically
        r = np.log(y / mu)
        a, b = 1.0 - p, 2.0 - p
        d = 2.0 * (y * mu**a * np.expm1(a * r) / a - mu**b * np.expm1(b * r) / b)
    d = np.maximum(d, 0.0)
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class FamilyConfig:
    """Tweedie family with log link."""

    power: float = DEFAULT_POWER
    dispersion: float = 1.0
    link: str = "log"

    def __post_init__(self):
        if not 1.0 <= self.power <= 2.0:
            raise DomainError(f"Tweedie power must lie in [1, 2], got {self.power}")
        if not self.dispersion > 0:
            raise DomainError(f"dispersion must be positive, got {self.dispersion}")
        if self.link != "log":
            raise DomainError("only the log link is supported")


@dataclass(frozen=True, eq=False)
class FittedCurve:
    basis: SplineBasis
    coefficients: np.ndarray
    family: FamilyConfig
    lam: float
    gcv_score: float
    converged: bool
    iterations: int
    edf: float = float("nan")
    deviance: float = float("nan")
    objective: float = float("nan")
    n_obs: int = 0

    @property
    def domain(self):
        return self.basis.domain

    def eta(self, x, order=0):
        return self.basis.design(x, order) @ self.coefficients

    def mu(self, x):
        return np.exp(self.eta(x))

    def to_dict(self):
        return {
            "format": CURVE_FORMAT,
            "version": CURVE_VERSION,
            "degree": self.basis.degree,
            "knots": self.basis.knots.tolist(),
            "coefficients": self.coefficients.tolist(),
            "tweedie_power": self.family.power,
            "dispersion": self.family.dispersion,
            "link": self.family.link,
            "lambda": self.lam,
            "gcv": _json_float(self.gcv_score),
            "edf": _json_float(self.edf),
            "deviance": _json_float(self.deviance),
            "objective": _json_float(self.objective),
            "n_obs": self.n_obs,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != CURVE_FORMAT:
            raise ValueError(f"not a fitted-curve document: format={doc.get('format')!r}")
        if doc.get("version") != CURVE_VERSION:
            raise ValueError(f"unsupported fitted-curve version {doc.get('version')!r}")
        return cls(
            basis=SplineBasis(np.array(doc["knots"], dtype=float), int(doc["degree"])),
            coefficients=np.array(doc["coefficients"], dtype=float),
            family=FamilyConfig(doc["tweedie_power"], doc["dispersion"], doc.get("link", "log")),
            lam=doc["lambda"],
            gcv_score=_from_json_float(doc["gcv"]),
            converged=bool(doc["converged"]),
            iterations=int(doc["iterations"]),
            edf=_from_json_float(doc["edf"]),
            deviance=_from_json_float(doc["deviance"]),
            objective=_from_json_float(doc["objective"]),
            n_obs=int(doc["n_obs"]),
        )


def _json_float(v):
    return v if np.isfinite(v) else None


def _from_json_float(v):
    return float("nan") if v is None else float(v)


def evaluate(curve, x, order=0):
    """Linear predictor ``eta`` or its first/second derivative at `x`.

    Derivatives come from the analytic B-spline derivative recurrence.
    Raises :class:`DomainError` for `x` outside the fitted domain.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    values = curve.eta(x, order)
    return float(values[0]) if np.ndim(x) == 0 else values


def penalized_objective(beta, B, y, weights, S, lam, p, root=None):
    """Weighted total deviance plus ``2 * lam * beta' S beta``.

    With `root` given (``S = root.T @ root``) the penalty is evaluated as
    ``||root @ beta||**2`` instead, which is more accurate near the null space.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        mu = np.exp(B @ beta)
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        return np.inf
    if root is None:
        pen = beta @ S @ beta
    else:
        r = root @ beta
        pen = r @ r
    return float(weights @ tweedie_deviance(y, mu, p) + 2.0 * lam * pen)


def _newton_weights(y, mu, p, weights):
    # observed information of d/2 in eta; positive for 1 <= p <= 2
    return weights * ((p - 1.0) * y * mu ** (1.0 - p) + (2.0 - p) * mu ** (2.0 - p))


def _solve_spd(A, rhs):
    """Cholesky solve with deterministic ridge escalation on failure."""
    try:
        return linalg.cho_solve(linalg.cho_factor(A), rhs)
    except linalg.LinAlgError:
        pass
    scale = max(float(np.mean(np.diag(A))), np.finfo(float).tiny)
    ridge = 1e-10
    while ridge <= 1e-2:
        logger.warning("singular penalized system; adding ridge %.0e", ridge)
        try:
            return linalg.cho_solve(linalg.cho_factor(A + ridge * scale * np.eye(len(A))), rhs)
        except linalg.LinAlgError:
            ridge *= 10
    raise FitError("penalized normal equations singular after ridge escalation")


def _design(basis, positions):
    return basis.design(positions, 0)


def fit_gam(
    y,
    positions,
    weights=None,
    basis=None,
    family=None,
    lam=1.0,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    beta0=None,
):
    """Fit one element by penalized iteratively reweighted least squares.

    Parameters
    ----------
    y : array_like, shape (n,)
        Strictly positive concentrations.
    positions : array_like, shape (n,)
        Transect coordinates inside the basis domain.
    weights : array_like, optional
        Nonnegative observation weights; defaults to ones.
    basis : SplineBasis, optional
        Defaults to :func:`build_basis` with :func:`default_n_basis` functions.
    family : FamilyConfig, optional
        Only ``power`` is used; the returned curve carries the estimated
        dispersion.
    lam : float
        Smoothing parameter (normalized coordinate).
    tol : float
        Stop once the relative change of the objective drops below `tol`.
    beta0 : array_like, optional
        Starting coefficients (warm start).

    Returns
    -------
    FittedCurve
        ``converged`` is False when `max_iter` was reached first.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(positions, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if not (y.shape == x.shape == w.shape) or y.ndim != 1:
        raise ValueError("y, positions and weights must be 1-D arrays of equal length")
    if np.any(~(y > 0)):
        raise DomainError("concentrations must be strictly positive")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if basis is None:
        basis = build_basis(x, default_n_basis(len(y)))
    family = family or FamilyConfig()
    p = family.power
    B = _design(basis, x)
    R = penalty_root(basis) * basis.length**1.5
    S = R.T @ R
    P = 2.0 * lam * S

    if beta0 is None:
        beta = np.full(basis.n_basis, np.log(np.average(y, weights=w if w.sum() > 0 else None)))
    else:
        beta = np.array(beta0, dtype=float)
    obj = penalized_objective(beta, B, y, w, S, lam, p, R)
    if not np.isfinite(obj):
        beta = np.full(basis.n_basis, np.log(np.mean(y)))
        obj = penalized_objective(beta, B, y, w, S, lam, p, R)

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = B @ beta
        mu = np.exp(eta)
        W = _newton_weights(y, mu, p, w)
        r = w * (y - mu) * mu ** (1.0 - p)
        A = B.T @ (B * W[:, None]) + P
        proposal = _solve_spd(A, B.T @ (W * eta + r))
        step = proposal - beta
        new_obj = penalized_objective(proposal, B, y, w, S, lam, p, R)
        halvings = 0
        while not new_obj < obj and halvings < 40:
            step *= 0.5
            proposal = beta + step
            new_obj = penalized_objective(proposal, B, y, w, S, lam, p, R)
            halvings += 1
        if not new_obj < obj:
            # no descent direction left at working precision
            converged = True
            break
        change = obj - new_obj
        beta, obj = proposal, new_obj
        if change <= tol * (abs(obj) + tol):
            converged = True
            break
    if not converged:
        logger.warning("PIRLS did not converge in %d iterations (lambda=%g)", max_iter, lam)

    mu = np.exp(B @ beta)
    fisher = w * mu ** (2.0 - p)
    G = B.T @ (B * fisher[:, None])
    edf = float(np.trace(_solve_spd(G + P, G)))
    n = len(y)
    dev = float(w @ tweedie_deviance(y, mu, p))
    resid_dof = n - edf
    # tr(H) within 1e-6 n of n counts as saturated: the fit interpolates
    gcv = n * dev / resid_dof**2 if resid_dof > 1e-6 * n else np.inf
    pearson = float(np.sum(w * (y - mu) ** 2 / mu**p))
    phi = pearson / max(resid_dof, 1.0)
    if not phi > 0:
        phi = np.finfo(float).tiny
    return FittedCurve(
        basis=basis,
        coefficients=beta,
        family=replace(family, dispersion=phi),
        lam=float(lam),
        gcv_score=float(gcv),
        converged=converged,
        iterations=it,
        edf=edf,
        deviance=dev,
        objective=obj,
        n_obs=n,
    )


def objective_gradient(curve, y, positions, weights=None):
    """Gradient of the penalized objective at the curve's coefficients."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    B = _design(curve.basis, positions)
    mu = np.exp(B @ curve.coefficients)
    p = curve.family.power
    S = unit_penalty_matrix(curve.basis)
    return -2.0 * B.T @ (w * (y - mu) * mu ** (1.0 - p)) + 4.0 * curve.lam * S @ curve.coefficients


@dataclass(frozen=True, eq=False)
class LambdaSelection:
    lam: float
    grid: np.ndarray
    scores: np.ndarray
    fit: FittedCurve


def select_lambda(y, positions, weights=None, basis=None, family=None, lam_grid=None):
    """Choose the smoothing parameter minimizing GCV over `lam_grid`.

    The score is ``n * D / (n - tr(H))**2`` with ``D`` the weighted deviance
    and ``H`` the influence matrix at convergence.  Ties go to the larger
    (smoother) value.
    """
    grid = default_lambda_grid() if lam_grid is None else np.asarray(lam_grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0):
        raise ValueError("lambda grid must be nonempty and nonnegative")
    x = np.asarray(positions, dtype=float)
    if basis is None:
        basis = build_basis(x, default_n_basis(len(x)))
    order = np.argsort(grid, kind="stable")[::-1]
    fits = [None] * len(grid)
    beta = None
    for i in order:
        fits[i] = fit_gam(y, x, weights, basis, family, grid[i], beta0=beta)
        beta = fits[i].coefficients
    scores = np.array([f.gcv_score for f in fits])
    finite = np.isfinite(scores)
    if not finite.any():
        raise SelectionError("influence trace reaches n at every lambda; basis too rich for the data")
    best = scores[finite].min()
    tied = np.flatnonzero(finite & (scores <= best * (1 + 1e-10) + 1e-300))
    pick = tied[np.argmax(grid[tied])]
    return LambdaSelection(float(grid[pick]), grid, scores, fits[pick])


def profile_power(y, positions, weights=None, basis=None, powers=POWER_GRID, lam_grid=None):
    """GCV-best (power, LambdaSelection) over a grid of Tweedie powers."""
    best = None
    for p in powers:
        sel = select_lambda(y, positions, weights, basis, FamilyConfig(float(p)), lam_grid)
        if best is None or sel.fit.gcv_score < best[1].fit.gcv_score:
            best = (float(p), sel)
    return best


def residuals(curve, y, positions, kind="pearson"):
    """Response, Pearson or deviance residuals of a fitted curve."""
    y = np.asarray(y, dtype=float)
    mu = curve.mu(positions)
    p = curve.family.power
    if kind == "response":
        return y - mu
    if kind == "pearson":
        return (y - mu) / np.sqrt(mu**p)
    if kind == "deviance":
        return np.sign(y - mu) * np.sqrt(tweedie_deviance(y, mu, p))
    raise ValueError(f"unknown residual kind {kind!r}")
