"""Generic free-boundary solver for (diffusion, profit) pairs.

The boundary b solves, for every x in the state interval,

    psi(x) * int_x^xbar [ int_xlow^z pi_c(y, b(z)) psi(y) m'(y) dy ] s'(z) / psi(z)^2 dz = 1.

Differentiating in x turns this into a scalar equation per state,

    int_xlow^x pi_c(y, b) psi(y) m'(y) dy = W(x),   W := psi' / s',

whose left side is strictly decreasing in b. ``pointwise_solve`` solves that
equation; ``residual`` evaluates the undifferentiated form as an a-posteriori
check.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diffusions import Diffusion
from .errors import (AssumptionViolation, DomainViolation, MonotonicityViolation,
                     NumericalFailure, QuadratureError)
from .numerics import bisect_monotone, quad, quad_to_infinity
from .profits import ProfitModel

INNER_REL_TOL = 1e-12
SOLVE_REL_TOL = 1e-12
OUTER_TOL = 1e-9
MONOTONE_SLACK = 1e-9
SMALL_Y = 1e-8


def check_assumptions(diffusion: Diffusion, profit: ProfitModel) -> None:
    if not diffusion.r > profit.kappa:
        raise AssumptionViolation(
            f"discount rate r={diffusion.r} must exceed the saturation level "
            f"kappa={profit.kappa}")


def integrate_from_zero(f: Callable, hi: float, rel_tol: float = INNER_REL_TOL,
                        tol: float = 0.0):
    """Integrate f over (0, hi] where f may have an integrable power-law
    singularity at 0.

    Below ``SMALL_Y`` the integrand is treated as A*y^p with p read off two
    samples; above it the integral is taken in the variable t = log y.
    """
    eps = SMALL_Y * min(1.0, hi)
    f1 = float(f(np.array([eps]))[0])
    f2 = float(f(np.array([0.5 * eps]))[0])
    if f1 == 0.0:
        head = 0.0
    else:
        if f2 <= 0.0 or f1 < 0.0:
            raise QuadratureError("power-law panel needs a positive integrand near 0")
        p = math.log(f1 / f2) / math.log(2.0)
        if p <= -1.0:
            raise QuadratureError(f"integrand ~ y^{p:.3f} is not integrable at 0")
        head = f1 * eps / (p + 1.0)

    def g(t):
        y = np.exp(t)
        return f(y) * y

    body = quad(g, math.log(eps), math.log(hi), tol=tol, rel_tol=rel_tol)
    return head + body.value, body.abs_error_estimate + 1e-3 * abs(head)


def weighted_integral(diffusion: Diffusion, g: Callable, z: float,
                      rel_tol: float = INNER_REL_TOL):
    """Return (J, err) with J = int_xlow^z g(y) psi(y) m'(y) dy / W(z).

    ``g`` must be nondecreasing in y (true for pi_c(., c) by assumption);
    that gives the bound used to stop adding panels below z:
    int_xlow^lo g psi m' dy <= g(lo) (W(lo) - W(xlow)) / r.
    The weight is evaluated in log form relative to W(z), so exponentially
    growing psi or m' never overflow.
    """
    lower = diffusion.lower
    r = diffusion.r
    log_wz = float(diffusion.log_w(np.array([z]))[0])

    def integrand(y):
        logk = diffusion.log_psi(y) + diffusion.log_speed(y) - log_wz
        return g(y) * np.exp(logk)

    zz = np.array([z])
    log_kz = float(diffusion.log_psi(zz)[0] + diffusion.log_speed(zz)[0])
    log_local = log_wz - math.log(r) - log_kz
    # exponents of size L carry absolute rounding ~ L * eps, so far out in the
    # state space the integrand itself is only known to that relative accuracy
    rel_tol = max(rel_tol, 64.0 * np.finfo(float).eps * (abs(log_wz) + abs(log_kz)))
    h = math.exp(log_local)
    total, err = 0.0, 0.0
    hi = z
    width = h
    w_low = diffusion.w_lower()
    for _ in range(200):
        lo = z - width
        atol = rel_tol * abs(total) * 1e-2
        if lower == 0.0 and lo <= 0.5 * hi:
            v, e = integrate_from_zero(integrand, hi, rel_tol=rel_tol, tol=atol)
            return total + v, err + e
        if math.isfinite(lower) and lo <= lower:
            res = quad(integrand, lower, hi, tol=atol, rel_tol=rel_tol)
            return total + res.value, err + res.abs_error_estimate
        res = quad(integrand, lo, hi, tol=atol, rel_tol=rel_tol)
        total += res.value
        err += res.abs_error_estimate
        g_lo = float(np.asarray(g(np.array([lo])))[0])
        w_ratio = math.exp(float(diffusion.log_w(np.array([lo]))[0]) - log_wz)
        tail = g_lo * max(w_ratio - w_low * math.exp(-log_wz), 0.0) / r
        if tail <= 0.1 * rel_tol * abs(total):
            return total, err + tail
        hi = lo
        width *= 4.0
    raise QuadratureError(f"inner integral below z={z} did not terminate", total)


def kernel_moments(diffusion: Diffusion, profit: ProfitModel, x: float,
                   rel_tol: float = INNER_REL_TOL):
    """For profits with ``separable_terms``, the weighted integrals of each
    x-power once, so that J(x; b) = sum_k a_k b^q_k M_k is cheap in b.
    Returns (terms, moments, errors) or None."""
    terms = profit.separable_terms()
    if terms is None:
        return None
    moments, errs = [], []
    for _, p, _ in terms:
        if p == 0.0:
            g = np.ones_like
        else:
            g = (lambda y, p=p: np.asarray(y, dtype=float) ** p)
        m, e = weighted_integral(diffusion, g, x, rel_tol)
        moments.append(m)
        errs.append(e)
    return terms, moments, errs


def _separable_value(terms, moments, b):
    return sum(a * b ** q * m for (a, _, q), m in zip(terms, moments))


def pointwise_equation(diffusion: Diffusion, profit: ProfitModel, x: float, b: float,
                       rel_tol: float = INNER_REL_TOL) -> float:
    """J(x; b) - 1; zero exactly at the free boundary, decreasing in b."""
    j, _ = weighted_integral(diffusion, lambda y: profit.marginal(y, b), x, rel_tol)
    return j - 1.0


def pointwise_solve(diffusion: Diffusion, profit: ProfitModel, x: float,
                    seed: float = 1.0, tol: float = SOLVE_REL_TOL) -> float:
    """Free-boundary value b(x) from the differentiated integral equation.

    When the profit splits into powers of b the inner integrals are computed
    once per x and the bisection runs on the cached combination.
    """
    check_assumptions(diffusion, profit)
    diffusion.check_domain(x)
    x = float(x)
    cached = kernel_moments(diffusion, profit, x)
    if cached is not None:
        terms, moments, _ = cached
        eq = lambda c: _separable_value(terms, moments, c) - 1.0
    else:
        eq = lambda c: pointwise_equation(diffusion, profit, x, c)
    try:
        b = bisect_monotone(eq, seed, tol=tol)
    except Exception as exc:
        raise NumericalFailure(
            f"pointwise equation has no root at x={x}; the inner integral may "
            f"not be finite ({exc})") from exc
    if abs(eq(b)) > 1e-9:
        raise NumericalFailure(f"pointwise equation not resolved at x={x}")
    return b


@dataclass
class BoundaryCurve:
    """A nondecreasing, strictly positive boundary sampled on a grid.

    Evaluation interpolates linearly in (log x, log b) when the grid is
    positive and in (x, log b) otherwise; outside the grid the end slopes
    are continued.
    """
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise DomainViolation("grid and values must be 1-d arrays of equal length")
        if self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise DomainViolation("grid must be strictly increasing with >= 2 points")
        if np.any(~(self.values > 0)):
            raise DomainViolation("boundary values must be strictly positive")
        drops = np.nonzero(self.values[1:] < self.values[:-1] * (1.0 - MONOTONE_SLACK))[0]
        if drops.size:
            pairs = ", ".join(f"({i}, {i + 1})" for i in drops[:10])
            raise MonotonicityViolation(
                f"boundary decreases beyond {MONOTONE_SLACK} relative slack at index "
                f"pairs {pairs}", indices=drops)
        self._logx = self.grid[0] > 0

    def _coord(self, x):
        return np.log(x) if self._logx else x

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        u = self._coord(xa)
        ug = self._coord(self.grid)
        lv = np.log(self.values)
        out = np.interp(u, ug, lv)
        lo_slope = (lv[1] - lv[0]) / (ug[1] - ug[0])
        hi_slope = (lv[-1] - lv[-2]) / (ug[-1] - ug[-2])
        out = np.where(u < ug[0], lv[0] + lo_slope * (u - ug[0]), out)
        out = np.where(u > ug[-1], lv[-1] + hi_slope * (u - ug[-1]), out)
        res = np.exp(out)
        return float(res) if np.ndim(x) == 0 else res

    def scaled(self, factor: float) -> "BoundaryCurve":
        return BoundaryCurve(self.grid.copy(), self.values * factor,
                             dict(self.meta, scaled_by=factor))

    def log_slope(self) -> float:
        """Least-squares slope of log b against log x."""
        return float(np.polyfit(np.log(self.grid), np.log(self.values), 1)[0])


class PointwiseBoundary:
    """The generic solution as a callable: every evaluation solves the
    pointwise equation at that state (memoized).

    Unlike a ``BoundaryCurve`` there is no interpolation or extrapolation
    error, which is what the integral-equation residual needs when it
    integrates the boundary out to infinity.
    """

    def __init__(self, diffusion: Diffusion, profit: ProfitModel, tol: float = SOLVE_REL_TOL):
        check_assumptions(diffusion, profit)
        self.diffusion = diffusion
        self.profit = profit
        self.tol = tol
        self._cache = {}

    def _one(self, x: float) -> float:
        val = self._cache.get(x)
        if val is None:
            val = pointwise_solve(self.diffusion, self.profit, x, tol=self.tol)
            if len(self._cache) < 100_000:
                self._cache[x] = val
        return val

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.array([self._one(float(v)) for v in arr.ravel()]).reshape(arr.shape)
        return float(out) if np.ndim(x) == 0 else out


def _workers(workers):
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get("FB_THREADS", "1")))


def solve_on_grid(diffusion: Diffusion, profit: ProfitModel, grid: Sequence[float],
                  tol: float = SOLVE_REL_TOL, workers=None) -> BoundaryCurve:
    """Solve the pointwise equation at every grid point.

    Sequential runs seed each bisection with the previous grid value, which
    brackets the root in one or two doublings since b is nondecreasing.
    """
    check_assumptions(diffusion, profit)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise DomainViolation("grid must be strictly increasing")
    diffusion.check_domain(grid)
    nworkers = _workers(workers)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            values = list(pool.map(
                lambda x: pointwise_solve(diffusion, profit, x, tol=tol), grid))
    else:
        values = []
        seed = 1.0
        for x in grid:
            seed = pointwise_solve(diffusion, profit, x, seed=seed, tol=tol)
            values.append(seed)
    return BoundaryCurve(grid, np.array(values),
                         meta={"method": "generic", "tol": tol})


def residual_with_error(diffusion: Diffusion, profit: ProfitModel, boundary: Callable,
                        x: float, tol: float = OUTER_TOL,
                        inner_rel_tol: float = 1e-11):
    """(residual, error estimate) of the integral equation at state x."""
    check_assumptions(diffusion, profit)
    diffusion.check_domain(x)
    x = float(x)
    log_psi_x = float(diffusion.log_psi(np.array([x]))[0])
    inner_err = [0.0]

    def outer(zs):
        zs = np.asarray(zs, dtype=float)
        bz = np.asarray(boundary(zs), dtype=float)
        if np.any(~(bz > 0)):
            raise DomainViolation("boundary must be strictly positive")
        js = np.empty_like(zs)
        for i, (z, b) in enumerate(zip(zs, bz)):
            cached = kernel_moments(diffusion, profit, z, inner_rel_tol)
            if cached is not None:
                terms, moments, errs = cached
                js[i] = _separable_value(terms, moments, b)
                e = max(errs)
            else:
                js[i], e = weighted_integral(
                    diffusion, lambda y, b=b: profit.marginal(y, b), z, inner_rel_tol)
            inner_err[0] = max(inner_err[0], e)
        logw = log_psi_x + diffusion.log_psi_prime(zs) - 2.0 * diffusion.log_psi(zs)
        return js * np.exp(logw)

    try:
        res = quad_to_infinity(outer, x, tol=tol, decay_hint=diffusion.outer_decay,
                               scale=diffusion.decay_scale)
    except QuadratureError as exc:
        raise QuadratureError(
            f"outer integral failed at x={x}; the boundary may grow too slowly "
            f"for integrability ({exc})", exc.value, exc.abs_error) from exc
    return res.value - 1.0, res.abs_error_estimate + inner_err[0]


def residual(diffusion: Diffusion, profit: ProfitModel, boundary: Callable, x: float,
             tol: float = OUTER_TOL) -> float:
    """Left side of the integral equation minus 1 at state x.

    ``boundary`` is any vectorized positive callable, e.g. a
    ``BoundaryCurve`` or a closed-form boundary object.
    """
    return residual_with_error(diffusion, profit, boundary, x, tol)[0]


@dataclass
class ResidualReport:
    xs: np.ndarray
    residuals: np.ndarray
    quad_errors: np.ndarray

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def to_dict(self) -> dict:
        return {"x": self.xs.tolist(), "residual": self.residuals.tolist(),
                "quad_error": self.quad_errors.tolist(),
                "max_abs_residual": self.max_abs_residual}


def residual_report(diffusion: Diffusion, profit: ProfitModel, boundary: Callable,
                    xs: Sequence[float], tol: float = OUTER_TOL) -> ResidualReport:
    xs = np.asarray(xs, dtype=float)
    pairs = [residual_with_error(diffusion, profit, boundary, x, tol) for x in xs]
    return ResidualReport(xs, np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))
