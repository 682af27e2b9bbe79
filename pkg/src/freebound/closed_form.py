"""Explicit free boundaries for the six (diffusion, profit) pairs that admit
one: GBM, Bessel-3 and CEV, each with Cobb-Douglas or CES profits.

Every integral here is taken in a form that is independent of the generic
solver so the two can serve as oracles for each other. Exponentially large
integrals are always evaluated after dividing by their leading growth:

* Bessel: e^(-a x) int_0^x y^p sinh(a y) dy, a = sqrt(2r)
* CEV:    e^(-c x^(2g)) int_0^x y^(q-1) e^(c y^(2g)) dy, c = r/(g sigma^2)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .diffusions import CEV, GBM, Bessel3, Diffusion, _ucosh_minus_sinh_log, gamma1
from .errors import AssumptionViolation, DomainViolation, UnsupportedConfiguration
from .numerics import (SignedPolynomial, hypergeom_2f1_terminating, positive_root,
                       quad)
from .profits import CES, CobbDouglas, ProfitModel

REL_TOL = 1e-13
# e^-50 is below double precision relative to the O(1) part of the integral
_CEV_CUTOFF = 50.0


def _require(cond, msg):
    if not cond:
        raise AssumptionViolation(msg)


def _positive_states(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainViolation("closed-form boundaries are defined for x > 0")
    return arr


def _vectorize(fn, x):
    arr = _positive_states(x)
    out = np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# scaled integrals

def bessel_moment_scaled(x: float, p: float, r: float) -> float:
    """e^(-a x) int_0^x y^p sinh(a y) dy with a = sqrt(2r)."""
    a = math.sqrt(2.0 * r)

    def f(y):
        return 0.5 * y ** p * np.exp(a * (y - x)) * -np.expm1(-2.0 * a * y)

    # mass sits within a few multiples of 1/a below x
    pts = [x - k / a for k in (2.0, 8.0, 32.0) if x - k / a > 0]
    return quad(f, 0.0, x, tol=0.0, rel_tol=REL_TOL, points=pts).value


def cev_moment_scaled(x: float, q: float, r: float, sigma: float, gam: float) -> float:
    """e^(-C) int_0^x y^(q-1) e^(c y^(2g)) dy with C = c x^(2g), for q >= 2g.

    Substituting v = c (x^(2g) - y^(2g)) gives
    x^(q-2g) / (2 g c) * int_0^C e^(-v) (1 - v/C)^(q/(2g) - 1) dv,
    whose integrand is bounded and needs no overflow protection.
    """
    c = r / (gam * sigma ** 2)
    big_c = c * x ** (2.0 * gam)
    m = q / (2.0 * gam) - 1.0
    if m < 0:
        raise DomainViolation("exponent q must be at least 2*gamma")
    pref = x ** (q - 2.0 * gam) / (2.0 * gam * c)
    if m == 0.0:
        return pref * -math.expm1(-big_c)

    def f(v):
        return np.exp(-v) * np.maximum(1.0 - v / big_c, 0.0) ** m

    upper = min(big_c, _CEV_CUTOFF)
    return pref * quad(f, 0.0, upper, tol=0.0, rel_tol=REL_TOL).value


# ---------------------------------------------------------------------------
# the six boundaries as plain functions

def gbm_cd_constant(mu: float, sigma: float, r: float, alpha: float, beta: float) -> float:
    """K_delta in b(x) = K_delta x^(alpha/(1-beta))."""
    _require(r > 0, f"discount rate must exceed 0, got r={r}")
    g1 = gamma1(mu, sigma, r)
    delta = mu / sigma ** 2 - 0.5
    base = sigma ** 2 * g1 * (alpha + g1 + 2.0 * delta) * (alpha + beta) / (2.0 * beta)
    _require(base > 0, f"alpha + gamma1 + 2 delta must be positive (got {alpha + g1 + 2 * delta})")
    return base ** (-1.0 / (1.0 - beta))


def gbm_cobb_douglas(x, mu: float, sigma: float, r: float, alpha: float, beta: float):
    k = gbm_cd_constant(mu, sigma, r, alpha, beta)
    return k * _positive_states(x) ** (alpha / (1.0 - beta))


def gbm_ces_polynomial(mu: float, sigma: float, r: float, n: int) -> SignedPolynomial:
    """sum_{i=1}^{n-1} C(n-1, i) n theta/(n theta + i) t^i - (r - 1).

    This is F(-(n-1), n theta; n theta + 1; -t) - r written out term by term.
    """
    g1 = gamma1(mu, sigma, r)
    theta = g1 + 2.0 * (mu / sigma ** 2 - 0.5)
    _require(theta > 0, f"theta = gamma1 + 2 delta must be positive, got {theta}")
    nt = n * theta
    coeffs = [-(r - 1.0)] + [comb(n - 1, i) * nt / (nt + i) for i in range(1, n)]
    return SignedPolynomial(coeffs)


def gbm_ces_constant(mu: float, sigma: float, r: float, n: int) -> float:
    """C_n, the positive root of F(-(n-1), n theta; n theta + 1; -C) = r."""
    _require(r > 1, f"CES profits need r > 1 (saturation level 1), got r={r}")
    _require(n >= 2, f"n must be >= 2, got {n}")
    root = positive_root(gbm_ces_polynomial(mu, sigma, r, n))
    g1 = gamma1(mu, sigma, r)
    nt = n * (g1 + 2.0 * (mu / sigma ** 2 - 0.5))
    check = hypergeom_2f1_terminating(n - 1, nt, nt + 1.0, -root)
    if abs(check - r) > 1e-9 * r:
        raise AssumptionViolation(f"hypergeometric cross-check failed: {check} != {r}")
    return root


def gbm_ces(x, mu: float, sigma: float, r: float, n: int):
    cn = gbm_ces_constant(mu, sigma, r, n)
    return cn ** (-n) * _positive_states(x)


def _bessel_cd_scalar(x, r, alpha, beta):
    a = math.sqrt(2.0 * r)
    log_num = float(_ucosh_minus_sinh_log(np.array([a * x]))[0]) - a * x
    g = bessel_moment_scaled(x, alpha + 1.0, r)
    ratio = (alpha + beta) / (2.0 * beta) * math.exp(log_num) / g
    return ratio ** (-1.0 / (1.0 - beta))


def bessel_cobb_douglas(x, r: float, alpha: float, beta: float):
    """[((alpha+beta)/(2 beta)) x^2 psi'(x) / g(x)]^(-1/(1-beta)),
    g(x) = int_0^x y^(alpha+1) sinh(sqrt(2r) y) dy."""
    _require(r > 0, f"discount rate must exceed 0, got r={r}")
    return _vectorize(lambda v: _bessel_cd_scalar(v, r, alpha, beta), x)


def _cev_cd_scalar(x, r, sigma, gam, alpha, beta):
    g = cev_moment_scaled(x, 2.0 * gam + alpha, r, sigma, gam)
    return (2.0 * beta / (sigma ** 2 * (alpha + beta)) * g) ** (1.0 / (1.0 - beta))


def cev_cobb_douglas(x, r: float, sigma: float, gamma: float, alpha: float, beta: float):
    """[(2 beta/(sigma^2 (alpha+beta))) g(x) e^(-c x^(2 gamma))]^(1/(1-beta))."""
    _require(r > 0, f"discount rate must exceed 0, got r={r}")
    return _vectorize(lambda v: _cev_cd_scalar(v, r, sigma, gamma, alpha, beta), x)


def _ces_root(alphas, rhs, n):
    coeffs = [-rhs] + [comb(n - 1, k) * alphas[k] for k in range(1, n)]
    return positive_root(SignedPolynomial(coeffs))


def bessel_ces_coefficients(x: float, r: float, n: int) -> np.ndarray:
    """e^(-a x) alpha_{k,n}(x) for k = 0..n-1."""
    return np.array([bessel_moment_scaled(x, 1.0 + k / n, r) for k in range(n)])


def bessel_ces_f(x: float, r: float, n: int) -> float:
    al = bessel_ces_coefficients(x, r, n)
    return _ces_root(al, (r - 1.0) * al[0], n)


def bessel_ces(x, r: float, n: int):
    _require(r > 1, f"CES profits need r > 1 (saturation level 1), got r={r}")
    return _vectorize(lambda v: bessel_ces_f(v, r, n) ** (-n), x)


def cev_ces_coefficients(x: float, r: float, sigma: float, gam: float, n: int) -> np.ndarray:
    """e^(-c x^(2 gamma)) alpha_{k,n}(x) for k = 0..n-1."""
    return np.array([cev_moment_scaled(x, 2.0 * gam + k / n, r, sigma, gam)
                     for k in range(n)])


def cev_alpha0_exact(x: float, r: float, sigma: float, gam: float) -> float:
    """(sigma^2/(2r)) (e^(c x^(2 gamma)) - 1), the k = 0 coefficient in closed form."""
    c = r / (gam * sigma ** 2)
    return sigma ** 2 / (2.0 * r) * math.expm1(c * x ** (2.0 * gam))


def cev_ces_f(x: float, r: float, sigma: float, gam: float, n: int) -> float:
    al = cev_ces_coefficients(x, r, sigma, gam, n)
    c = r / (gam * sigma ** 2)
    rhs = 0.5 * sigma ** 2 * math.exp(-c * x ** (2.0 * gam)) + (r - 1.0) * al[0]
    return _ces_root(al, rhs, n)


def cev_ces(x, r: float, sigma: float, gamma: float, n: int):
    _require(r > 1, f"CES profits need r > 1 (saturation level 1), got r={r}")
    return _vectorize(lambda v: cev_ces_f(v, r, sigma, gamma, n) ** (-n), x)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedFormBoundary:
    """Callable explicit boundary for one of the six supported pairs.

    Grid evaluations are memoized per state, since the Bessel and CEV forms
    cost a handful of quadratures each.
    """
    diffusion: Diffusion
    profit: ProfitModel
    constants: dict = field(default_factory=dict, compare=False)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        d, p = self.diffusion, self.profit
        if not isinstance(d, (GBM, Bessel3, CEV)) or not isinstance(p, (CobbDouglas, CES)):
            raise UnsupportedConfiguration(
                f"no closed form for {type(d).__name__} with {type(p).__name__}; "
                "use the generic solver")
        _require(d.r > p.kappa,
                 f"discount rate r={d.r} must exceed the saturation level {p.kappa}")
        if isinstance(d, GBM):
            self.constants.update(gamma1=d.gamma1, delta=d.delta, theta=d.theta)
            if isinstance(p, CobbDouglas):
                self.constants["K"] = gbm_cd_constant(d.mu, d.sigma, d.r, p.alpha, p.beta)
            else:
                self.constants["C"] = gbm_ces_constant(d.mu, d.sigma, d.r, p.n)

    @property
    def name(self) -> str:
        d = {GBM: "gbm", Bessel3: "bessel3", CEV: "cev"}[type(self.diffusion)]
        p = "cobb_douglas" if isinstance(self.profit, CobbDouglas) else "ces"
        return f"{d}+{p}"

    def _scalar(self, x: float) -> float:
        d, p = self.diffusion, self.profit
        if isinstance(d, GBM):
            if isinstance(p, CobbDouglas):
                return self.constants["K"] * x ** (p.alpha / (1.0 - p.beta))
            return self.constants["C"] ** (-p.n) * x
        if isinstance(d, Bessel3):
            if isinstance(p, CobbDouglas):
                return _bessel_cd_scalar(x, d.r, p.alpha, p.beta)
            return bessel_ces_f(x, d.r, p.n) ** (-p.n)
        if isinstance(p, CobbDouglas):
            return _cev_cd_scalar(x, d.r, d.sigma, d.gamma, p.alpha, p.beta)
        return cev_ces_f(x, d.r, d.sigma, d.gamma, p.n) ** (-p.n)

    def _cached(self, x: float) -> float:
        val = self._cache.get(x)
        if val is None:
            val = self._scalar(x)
            if len(self._cache) < 100_000:
                self._cache[x] = val
        return val

    def __call__(self, x):
        return _vectorize(self._cached, x)


def closed_form_boundary(diffusion: Diffusion, profit: ProfitModel) -> ClosedFormBoundary:
    return ClosedFormBoundary(diffusion, profit)


def has_closed_form(diffusion: Diffusion, profit: ProfitModel) -> bool:
    return isinstance(diffusion, (GBM, Bessel3, CEV)) and isinstance(profit, (CobbDouglas, CES))
