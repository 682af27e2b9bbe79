"""Numerical kernels: adaptive Gauss-Kronrod quadrature, monotone bracketing,
terminating hypergeometric series and the positive root of a polynomial with a
single coefficient sign change.

All quadrature routines expect *vectorized* integrands: ``f`` receives a 1-d
``ndarray`` of abscissae and must return an array of the same shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainViolation, QuadratureError, RootNotBracketed

DEFAULT_QUAD_TOL = 1e-10
DEFAULT_ROOT_TOL = 1e-12

# 21-point Kronrod rule and its embedded 10-point Gauss rule (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525452184,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# Full symmetric node set on [-1, 1] and matching weight vectors.
NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
GAUSS_WEIGHTS = np.zeros(21)
# Gauss nodes are xgk[1], xgk[3], ..., xgk[9] on each side.
for _j, _w in enumerate(_WG):
    _i = 2 * _j + 1
    GAUSS_WEIGHTS[_i] = _w
    GAUSS_WEIGHTS[20 - _i] = _w

_EPMACH = np.finfo(float).eps
_UFLOW = np.finfo(float).tiny


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __float__(self):
        return float(self.value)


def _gk21(f, lo, hi):
    """Apply the 21-point rule to every interval [lo_i, hi_i] at once."""
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = centre[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    resk = fx @ KRONROD_WEIGHTS
    resg = fx @ GAUSS_WEIGHTS
    reskh = 0.5 * resk
    resasc = np.abs(fx - reskh[:, None]) @ KRONROD_WEIGHTS
    resabs = np.abs(fx) @ KRONROD_WEIGHTS
    err = np.abs((resk - resg) * half)
    resasc = resasc * np.abs(half)
    resabs = resabs * np.abs(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0.0) & (err != 0.0), scaled, err)
    floor = 50.0 * _EPMACH * resabs
    err = np.where(resabs > _UFLOW / (50.0 * _EPMACH), np.maximum(floor, err), err)
    if not np.all(np.isfinite(resk)):
        raise QuadratureError("integrand returned non-finite values", float("nan"))
    return resk * half, err


def quad(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
         tol: float = DEFAULT_QUAD_TOL, rel_tol: float = 0.0,
         max_intervals: int = 4000, points: Sequence[float] = ()) -> QuadResult:
    """Adaptive Gauss-Kronrod (G10/K21) quadrature of ``f`` over [a, b].

    Intervals are refined in batches: every pass evaluates all freshly split
    intervals with one call to ``f``. Convergence is declared when the summed
    error estimate is at most ``max(tol, rel_tol*|I|)``.

    Raises
    ------
    QuadratureError
        If the interval budget is exhausted; the partial estimate is attached.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        if a == b:
            return QuadResult(0.0, 0.0, 0)
        raise DomainViolation(f"quad requires a < b, got a={a}, b={b}")
    edges = np.unique(np.concatenate([[a], [p for p in points if a < p < b], [b]]))
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    val, err = _gk21(f, lo, hi)
    nevals = 21 * lo.size
    while True:
        total = float(np.sum(val))
        total_err = float(np.sum(err))
        target = max(tol, rel_tol * abs(total))
        if total_err <= target:
            return QuadResult(total, total_err, nevals)
        if lo.size >= max_intervals:
            raise QuadratureError(
                f"quadrature budget of {max_intervals} intervals exhausted on "
                f"[{a}, {b}]: estimate {total:.6g} +/- {total_err:.3g}",
                total, total_err)
        splittable = (hi - lo) > 64.0 * _EPMACH * np.maximum(np.abs(lo), np.abs(hi))
        order = np.argsort(-np.where(splittable, err, -1.0))
        cum = np.cumsum(err[order])
        # split the largest-error intervals until what is left is under target/2
        need = total_err - 0.5 * target
        k = int(np.searchsorted(cum, need) + 1)
        chosen = order[:k]
        chosen = chosen[splittable[chosen]]
        if chosen.size == 0:
            raise QuadratureError(
                f"round-off limits quadrature on [{a}, {b}]: estimate {total:.6g} "
                f"+/- {total_err:.3g}", total, total_err)
        keep = np.ones(lo.size, dtype=bool)
        keep[chosen] = False
        mid = 0.5 * (lo[chosen] + hi[chosen])
        new_lo = np.concatenate([lo[chosen], mid])
        new_hi = np.concatenate([mid, hi[chosen]])
        new_val, new_err = _gk21(f, new_lo, new_hi)
        nevals += 21 * new_lo.size
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], new_val])
        err = np.concatenate([err[keep], new_err])


def quad_to_infinity(f: Callable[[np.ndarray], np.ndarray], a: float,
                     tol: float = DEFAULT_QUAD_TOL, decay_hint: str = "polynomial",
                     scale: float = 1.0, rel_tol: float = 0.0,
                     max_panels: int = 200) -> QuadResult:
    """Integrate ``f`` over [a, +inf).

    ``decay_hint="polynomial"`` maps the tail to a finite interval with
    z = 1/u. ``decay_hint="exponential"`` integrates consecutive panels of
    doubling width (starting at ``scale``) and stops once the geometric tail
    bound extrapolated from the last two panel sums drops below tol/2.
    """
    a = float(a)
    if decay_hint == "polynomial":
        if a > 0.0:
            def g(u):
                z = 1.0 / u
                return f(z) * z * z
            return quad(g, 0.0, 1.0 / a, tol=tol, rel_tol=rel_tol)
        head = quad(f, a, 1.0, tol=0.5 * tol, rel_tol=rel_tol)
        tail = quad_to_infinity(f, 1.0, tol=0.5 * tol, rel_tol=rel_tol)
        return QuadResult(head.value + tail.value,
                          head.abs_error_estimate + tail.abs_error_estimate,
                          head.evaluations + tail.evaluations)
    if decay_hint != "exponential":
        raise ValueError(f"unknown decay_hint {decay_hint!r}")

    total, total_err, nevals = 0.0, 0.0, 0
    prev = None
    growth = 0
    width = float(scale)
    left = a
    for _ in range(max_panels):
        panel = quad(f, left, left + width, tol=0.25 * tol, rel_tol=rel_tol)
        total += panel.value
        total_err += panel.abs_error_estimate
        nevals += panel.evaluations
        cur = abs(panel.value)
        if prev is not None:
            if cur == 0.0:
                return QuadResult(total, total_err, nevals)
            ratio = cur / prev if prev > 0 else math.inf
            if ratio < 1.0:
                growth = 0
                tail_bound = cur * ratio / (1.0 - ratio)
                if tail_bound < 0.5 * max(tol, rel_tol * abs(total)):
                    return QuadResult(total, total_err + tail_bound, nevals)
            else:
                growth += 1
                if growth >= 8:
                    raise QuadratureError(
                        f"integrand does not decay on [{a}, inf): last panel "
                        f"{cur:.3g} after {nevals} evaluations", total, math.inf)
        prev = cur
        left += width
        width *= 2.0
    raise QuadratureError(f"tail on [{a}, inf) not resolved in {max_panels} panels",
                          total, math.inf)


def bisect_monotone(f: Callable[[float], float], seed: float,
                    tol: float = DEFAULT_ROOT_TOL, max_doublings: int = 60) -> float:
    """Root of a strictly monotone ``f`` on (0, inf).

    Expands a geometric bracket from ``seed`` by factors of 2 in both
    directions (at most ``2**max_doublings``) and then bisects in log space
    until the bracket's relative width is below ``tol``.
    """
    seed = float(seed)
    if not seed > 0.0:
        raise DomainViolation(f"seed must be positive, got {seed}")
    f0 = f(seed)
    if f0 == 0.0:
        return seed
    s0 = math.copysign(1.0, f0)
    lo = hi = seed
    bracket = None
    for k in range(1, max_doublings + 1):
        hi = seed * 2.0 ** k
        fh = f(hi)
        if fh == 0.0:
            return hi
        if math.copysign(1.0, fh) != s0:
            bracket = (hi / 2.0, hi)
            break
        lo = seed * 2.0 ** -k
        fl = f(lo)
        if fl == 0.0:
            return lo
        if math.copysign(1.0, fl) != s0:
            bracket = (lo, lo * 2.0)
            break
    if bracket is None:
        raise RootNotBracketed(
            f"no sign change in [{seed * 2.0 ** -max_doublings:.3g}, "
            f"{seed * 2.0 ** max_doublings:.3g}] (seed {seed})")
    lo, hi = bracket
    flo = f(lo)
    slo = math.copysign(1.0, flo)
    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if math.copysign(1.0, fm) == slo:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def hypergeom_2f1_terminating(m: int, b: float, c: float, z: float) -> float:
    """F(-m, b; c; z) as the finite sum of its m+1 Pochhammer terms."""
    if int(m) != m or m < 0:
        raise DomainViolation(f"m must be a nonnegative integer, got {m}")
    m = int(m)
    total = 1.0
    term = 1.0
    for i in range(m):
        if c + i == 0.0:
            raise DomainViolation(f"(c)_i vanishes at i={i} for c={c}")
        term *= (-m + i) * (b + i) / ((c + i) * (i + 1)) * z
        total += term
    return total


@dataclass(frozen=True)
class SignedPolynomial:
    """Real polynomial, coefficients in ascending degree."""
    coefficients: tuple

    def __init__(self, coefficients):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in coefficients))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return acc

    def sign_changes(self) -> int:
        signs = [math.copysign(1.0, c) for c in self.coefficients if c != 0.0]
        return sum(1 for s, t in zip(signs, signs[1:]) if s != t)

    def magnitude(self, t: float) -> float:
        return float(sum(abs(c) * t ** k for k, c in enumerate(self.coefficients)))


def positive_root(poly: SignedPolynomial, tol: float = DEFAULT_ROOT_TOL) -> float:
    """The unique positive root of a polynomial with one coefficient sign change.

    By Descartes' rule there is exactly one positive root; the sign of p near
    0+ is that of the lowest nonzero coefficient and near +inf that of the
    leading one, so a geometric bracket search followed by bisection finds it.
    """
    if not isinstance(poly, SignedPolynomial):
        poly = SignedPolynomial(poly)
    if poly.sign_changes() != 1:
        raise DomainViolation(
            f"expected exactly one coefficient sign change, found "
            f"{poly.sign_changes()} in {poly.coefficients}")
    nz = [c for c in poly.coefficients if c != 0.0]
    s_low, s_high = math.copysign(1.0, nz[0]), math.copysign(1.0, nz[-1])

    def p(t):
        return float(poly(t))

    hi = 1.0
    for _ in range(2100):
        if math.copysign(1.0, p(hi)) == s_high and p(hi) != 0.0:
            break
        hi *= 2.0
    lo = min(1.0, hi / 2.0)
    for _ in range(2100):
        v = p(lo)
        if v != 0.0 and math.copysign(1.0, v) == s_low:
            break
        lo /= 2.0
    if p(hi) == 0.0:
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        v = p(mid)
        if v == 0.0:
            return mid
        if math.copysign(1.0, v) == s_low:
            lo = mid
        else:
            hi = mid
    root = lo if abs(p(lo)) <= abs(p(hi)) else hi
    if abs(p(root)) > max(tol, 64 * _EPMACH) * max(poly.magnitude(root), 1e-300):
        raise RootNotBracketed(f"positive root not resolved: p({root}) = {p(root)}")
    return root
