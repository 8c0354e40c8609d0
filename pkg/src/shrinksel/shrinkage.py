"""Bivariate shrinkage analysis for correlated predictors.

Considers two standardized predictors whose Gram matrix has unit diagonal
and off-diagonal ``rho``, with MLE pair ``(x1, x2)`` and ratio
``A = |x1/x2| >= 1``. For a zero-mean normal prior with common variance
scale ``tau**2`` the posterior-mean shrinkage factors have closed forms,
and the shrunk ratio always falls strictly below A: a global-only prior
never widens the separation between a signal and its confounder. For the
horseshoe prior the posterior mean is a ratio of 2-D integrals over the
per-coordinate shrinkage weights; this module evaluates it by tensor
Gauss-Legendre quadrature (after a sin^2 substitution that removes the
endpoint singularity) and classifies each parameter combination as
reverse-shrinkage (shrunk ratio >= MLE ratio) or not. A plain Monte Carlo
integrator over half-Cauchy scale draws provides an independent
cross-check of the quadrature path.

Everything here is a pure function; grid evaluation parallelizes over
points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.random import Generator, Philox, SeedSequence

from .core import InvariantError, atomic_write_text

#: Default classification grids (two MLE levels mirror the two panels).
DEFAULT_RHO_GRID = tuple(np.round(np.arange(0.94, 0.9951, 0.01), 2))
DEFAULT_TAU_GRID = tuple(np.round(np.arange(0.05, 0.9501, 0.05), 2))
DEFAULT_A_GRID = (1.1, 1.5, 2.0, 3.0, 5.0, 10.0)
DEFAULT_X2_VALUES = (1.0, 1.5)

_QUAD_ORDERS = (16, 32, 64, 128, 256, 512)


class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested relative error."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class TwoVarProblem:
    """One two-predictor shrinkage problem.

    ``rho`` is the Gram-matrix off-diagonal in [0, 1); ``tau`` the prior
    scale (standard-deviation scale, so the shrinkage weight under the
    normal prior is 1/(1+tau^2)); ``mle`` the MLE pair with
    ``|mle[0]| >= |mle[1]| > 0``. The error variance is fixed at 1 for the
    ratio analysis (ratios are free of a common scale) but kept as a field
    for the integrand.
    """

    rho: float
    tau: float
    mle: tuple[float, float]
    sigma2: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.rho) and 0.0 <= self.rho < 1.0):
            raise InvariantError("rho must lie in [0, 1)")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise InvariantError("tau must be strictly positive")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvariantError("sigma2 must be strictly positive")
        x1, x2 = float(self.mle[0]), float(self.mle[1])
        if not (np.isfinite(x1) and np.isfinite(x2)):
            raise InvariantError("mle entries must be finite")
        if abs(x2) == 0 or abs(x1) < abs(x2):
            raise InvariantError("need |mle[0]| >= |mle[1]| > 0")
        object.__setattr__(self, "mle", (x1, x2))

    @property
    def a(self) -> float:
        """MLE magnitude ratio |mle1/mle2| >= 1."""
        return abs(self.mle[0] / self.mle[1])


@dataclass(frozen=True)
class ShrinkFactors:
    """Closed-form normal-prior shrinkage quantities for one problem.

    ``kappa = 1/(1+tau^2)`` is the scalar shrinkage weight; f1 = f2 and f3
    are the quadratic-form coefficients of the marginal data density;
    r1/r2 and s1/s2 are the intermediate and final per-coordinate
    shrinkage factors, with the estimator being (1 - s_j) * mle_j.
    """

    f1: float
    f2: float
    f3: float
    r1: float
    r2: float
    s1: float
    s2: float
    kappa: float


@dataclass(frozen=True)
class HsEstimate:
    """Horseshoe estimator at one problem, with quadrature metadata."""

    estimate: tuple[float, float]
    r1: float
    r2: float
    s1: float
    s2: float
    quad_error: float
    order: int


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo cross-check of the horseshoe estimator."""

    estimate: tuple[float, float]
    se: tuple[float, float]
    r1: float
    r2: float
    n_samples: int


@dataclass(frozen=True)
class ShrinkGridPoint:
    """One classified grid point: reverse iff shrunk ratio >= MLE ratio."""

    problem: TwoVarProblem
    ratio_mle: float
    ratio_shrunk: float
    reverse: bool
    quad_error: float
    error: Optional[str] = None


def _f_coeffs(k1, k2, rho):
    """Quadratic-form coefficients for shrinkage weights (k1, k2).

    Accepts scalars or broadcastable arrays.
    """
    d = 1.0 - (1.0 - k1) * (1.0 - k2) * rho * rho
    f1 = (rho * rho - 1.0 - rho * rho * k2) * k1 / d
    f2 = (rho * rho - 1.0 - rho * rho * k1) * k2 / d
    f3 = -rho * k1 * k2 / d
    return f1, f2, f3


def _compose_estimate(problem: TwoVarProblem, r1: float, r2: float):
    """Map the intermediate factors (r1, r2) to (s1, s2) and the estimate."""
    a = problem.a
    rho = problem.rho
    denom = 1.0 - rho * rho
    s1 = (r1 - rho * r2 / a) / denom
    s2 = (r2 - rho * r1 * a) / denom
    x1, x2 = problem.mle
    return s1, s2, ((1.0 - s1) * x1, (1.0 - s2) * x2)


def normal_shrink_factors(problem: TwoVarProblem) -> ShrinkFactors:
    """Closed-form shrinkage factors under the global-only normal prior."""
    if problem.a < 1.0:
        raise InvariantError("ratio analysis needs |mle1/mle2| >= 1")
    kappa = 1.0 / (1.0 + problem.tau ** 2)
    f1, f2, f3 = _f_coeffs(kappa, kappa, problem.rho)
    a = problem.a
    r1 = -(a * f1 + f3) / a
    r2 = -(f2 + a * f3)
    s1, s2, _ = _compose_estimate(problem, r1, r2)
    return ShrinkFactors(f1=float(f1), f2=float(f2), f3=float(f3),
                         r1=r1, r2=r2, s1=s1, s2=s2, kappa=kappa)


def normal_estimator(problem: TwoVarProblem) -> tuple[float, float]:
    """Posterior mean under the global-only normal prior."""
    fac = normal_shrink_factors(problem)
    x1, x2 = problem.mle
    return ((1.0 - fac.s1) * x1, (1.0 - fac.s2) * x2)


def normal_ratio_contracts(problem: TwoVarProblem) -> bool:
    """True iff the normal-prior estimator strictly contracts the MLE ratio.

    For 0 < rho < 1 and A > 1 this holds for every tau, i.e. the
    global-only prior never achieves reverse-shrinkage; the function
    exists so that sweeps can verify the claim numerically.
    """
    if problem.a <= 1.0:
        raise InvariantError("ratio contraction is defined for A > 1")
    if not 0.0 < problem.rho < 1.0:
        raise InvariantError("ratio contraction is defined for rho in (0, 1)")
    b1, b2 = normal_estimator(problem)
    return abs(b1 / b2) < problem.a


def hs_integrand(k1: float, k2: float, problem: TwoVarProblem,
                 which: str = "F_only") -> float:
    """Raw horseshoe integrand at shrinkage weights (k1, k2) in (0, 1)^2.

    ``F_only`` evaluates the density factor F times the exponential data
    factor E; ``numerator_1``/``numerator_2`` additionally multiply by the
    coordinate-specific linear form that appears in the estimator's
    numerator. The endpoints are singular and rejected.
    """
    if not (0.0 < k1 < 1.0 and 0.0 < k2 < 1.0):
        raise InvariantError("k1, k2 must lie strictly inside (0, 1)")
    rho = problem.rho
    tau2 = problem.tau ** 2
    x1, x2 = problem.mle
    f1, f2, f3 = _f_coeffs(k1, k2, rho)
    d = 1.0 - (1.0 - k1) * (1.0 - k2) * rho * rho
    f_factor = (d ** -0.5
                / (1.0 - (1.0 - tau2) * k1)
                / (1.0 - (1.0 - tau2) * k2)
                * (1.0 - k1) ** -0.5 * (1.0 - k2) ** -0.5)
    e_factor = math.exp(
        (f1 * x1 * x1 + f2 * x2 * x2 + 2.0 * f3 * x1 * x2)
        / (2.0 * problem.sigma2))
    base = f_factor * e_factor
    if which == "F_only":
        return base
    if which == "numerator_1":
        return (f1 * x1 + f3 * x2) * base
    if which == "numerator_2":
        return (f2 * x2 + f3 * x1) * base
    raise InvariantError(f"unknown integrand variant {which!r}")


def _quad_r_values(problem: TwoVarProblem, order: int) -> tuple[float, float]:
    """(r1, r2) by tensor Gauss-Legendre at a fixed order.

    Substituting k = sin^2(theta) turns the (1-k)^{-1/2} endpoint factor
    into 2*sin(theta), so the integrand is smooth on [0, pi/2]^2. The
    exponential factor is evaluated in log space and normalized by its
    maximum over the node grid; the shift cancels between numerator and
    denominator.
    """
    nodes, weights = leggauss(order)
    theta = (nodes + 1.0) * (math.pi / 4.0)
    w = weights * (math.pi / 4.0)
    sin_t = np.sin(theta)
    k = sin_t * sin_t
    axis_w = w * 2.0 * sin_t

    rho = problem.rho
    tau2 = problem.tau ** 2
    x1, x2 = problem.mle
    k1 = k[:, None]
    k2 = k[None, :]
    f1, f2, f3 = _f_coeffs(k1, k2, rho)
    d = 1.0 - (1.0 - k1) * (1.0 - k2) * rho * rho
    rest = (d ** -0.5
            / (1.0 - (1.0 - tau2) * k1)
            / (1.0 - (1.0 - tau2) * k2))
    log_e = (f1 * x1 * x1 + f2 * x2 * x2 + 2.0 * f3 * x1 * x2) / (2.0 * problem.sigma2)
    base = (axis_w[:, None] * axis_w[None, :]) * rest * np.exp(log_e - log_e.max())
    den = float(base.sum())
    num1 = float(((f1 * x1 + f3 * x2) * base).sum())
    num2 = float(((f2 * x2 + f3 * x1) * base).sum())
    return -num1 / (x1 * den), -num2 / (x2 * den)


def hs_shrinkage(problem: TwoVarProblem, tol: float = 1e-6) -> HsEstimate:
    """Horseshoe posterior mean with adaptive quadrature-order refinement.

    The order doubles until the intermediate factors change by less than
    ``tol`` relative; on failure a :class:`QuadratureError` carries the
    achieved estimate.
    """
    prev = None
    err = math.inf
    for order in _QUAD_ORDERS:
        r1, r2 = _quad_r_values(problem, order)
        if prev is not None:
            scale = max(abs(r1), abs(r2), 1e-300)
            err = max(abs(r1 - prev[0]), abs(r2 - prev[1])) / scale
            if err < tol:
                s1, s2, est = _compose_estimate(problem, r1, r2)
                return HsEstimate(estimate=est, r1=r1, r2=r2, s1=s1, s2=s2,
                                  quad_error=err, order=order)
        prev = (r1, r2)
    raise QuadratureError(
        f"quadrature did not converge to relative {tol:g} by order "
        f"{_QUAD_ORDERS[-1]} (achieved {err:g})", achieved=err)


def hs_estimator(problem: TwoVarProblem, tol: float = 1e-6) -> tuple[float, float]:
    """Horseshoe posterior mean of the coefficient pair."""
    return hs_shrinkage(problem, tol=tol).estimate


def hs_estimator_mc(problem: TwoVarProblem, n_samples: int = 10_000_000,
                    seed: int = 0, chunk: int = 1_000_000) -> McEstimate:
    """Monte Carlo evaluation of the horseshoe estimator.

    Independent of the quadrature path: samples the two local scales from
    the standard half-Cauchy, averages the integrands, and propagates the
    sampling covariance of the three means through the estimator by the
    delta method. The returned standard errors are for the two estimate
    components.
    """
    rho = problem.rho
    tau = problem.tau
    x1, x2 = problem.mle
    rng = Generator(Philox(SeedSequence(seed)))

    sums = np.zeros(3)
    prods = np.zeros((3, 3))
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        lam1 = np.tan(rng.random(m) * (math.pi / 2.0))
        lam2 = np.tan(rng.random(m) * (math.pi / 2.0))
        k1 = 1.0 / (1.0 + (tau * lam1) ** 2)
        k2 = 1.0 / (1.0 + (tau * lam2) ** 2)
        f1, f2, f3 = _f_coeffs(k1, k2, rho)
        d = 1.0 - (1.0 - k1) * (1.0 - k2) * rho * rho
        log_e = (f1 * x1 * x1 + f2 * x2 * x2 + 2.0 * f3 * x1 * x2) / (2.0 * problem.sigma2)
        # The quadratic form is negative definite, so exp(log_e) <= 1.
        phi = np.sqrt(k1 * k2 / d) * np.exp(log_e)
        a1 = (f1 * x1 + f3 * x2) * phi
        a2 = (f2 * x2 + f3 * x1) * phi
        block = np.stack([a1, a2, phi])
        sums += block.sum(axis=1)
        prods += block @ block.T
        done += m

    means = sums / n_samples
    cov_samples = prods / n_samples - np.outer(means, means)
    cov_means = cov_samples / n_samples
    m1, m2, mb = means
    r1 = -m1 / (x1 * mb)
    r2 = -m2 / (x2 * mb)
    jac = np.array([
        [-1.0 / (x1 * mb), 0.0, m1 / (x1 * mb * mb)],
        [0.0, -1.0 / (x2 * mb), m2 / (x2 * mb * mb)],
    ])
    cov_r = jac @ cov_means @ jac.T
    a = problem.a
    denom = 1.0 - rho * rho
    lin = np.array([
        [-x1 / denom, x1 * rho / (a * denom)],
        [x2 * rho * a / denom, -x2 / denom],
    ])
    cov_b = lin @ cov_r @ lin.T
    _, _, est = _compose_estimate(problem, r1, r2)
    se = tuple(float(v) for v in np.sqrt(np.maximum(np.diag(cov_b), 0.0)))
    return McEstimate(estimate=est, se=se, r1=r1, r2=r2, n_samples=n_samples)


def _grid_point(args) -> ShrinkGridPoint:
    rho, tau, a, x2, tol = args
    problem = TwoVarProblem(rho=rho, tau=tau, mle=(a * x2, x2))
    try:
        res = hs_shrinkage(problem, tol=tol)
    except QuadratureError as exc:
        return ShrinkGridPoint(problem=problem, ratio_mle=problem.a,
                               ratio_shrunk=math.nan, reverse=False,
                               quad_error=exc.achieved, error=str(exc))
    b1, b2 = res.estimate
    ratio = math.inf if b2 == 0 else abs(b1 / b2)
    return ShrinkGridPoint(problem=problem, ratio_mle=problem.a,
                           ratio_shrunk=ratio,
                           reverse=ratio >= problem.a,
                           quad_error=res.quad_error)


def reverse_shrinkage_grid(rho_grid: Sequence[float] = DEFAULT_RHO_GRID,
                           tau_grid: Sequence[float] = DEFAULT_TAU_GRID,
                           a_grid: Sequence[float] = DEFAULT_A_GRID,
                           x2: float = 1.0,
                           tol: float = 1e-6,
                           jobs: int = 1) -> list[ShrinkGridPoint]:
    """Classify every (rho, tau, A) combination at a fixed smaller MLE.

    Points are evaluated independently (optionally in parallel) and
    returned in grid order (rho outermost, then tau, then A). Quadrature
    failures are recorded on the point rather than raised.
    """
    tasks = [(float(r), float(t), float(a), float(x2), tol)
             for r in rho_grid for t in tau_grid for a in a_grid]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_grid_point, tasks, chunksize=8))
    return [_grid_point(t) for t in tasks]


def write_grid_csv(points: Sequence[ShrinkGridPoint], path: str) -> None:
    """Grid CSV: rho, tau, a, x2, ratio_mle, ratio_shrunk, reverse, error."""
    lines = ["rho,tau,a,x2,ratio_mle,ratio_shrunk,reverse,quad_error_estimate"]
    for pt in points:
        pr = pt.problem
        lines.append(
            f"{pr.rho:.17g},{pr.tau:.17g},{pt.ratio_mle:.17g},"
            f"{pr.mle[1]:.17g},{pt.ratio_mle:.17g},{pt.ratio_shrunk:.17g},"
            f"{int(pt.reverse)},{pt.quad_error:.6g}")
    atomic_write_text(path, "\n".join(lines) + "\n")
