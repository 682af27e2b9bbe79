"""Monte Carlo checks of the boundary's probabilistic characterization.

Every infinite-horizon discounted quantity is estimated with an independent
Exponential(r) clock tau:

    E[int_0^inf e^(-rt) h(X(t)) dt] = E[h(X(tau))] / r.

Because the optimal capacity is C(t) = y v b(M(t)) with M the running
maximum, all estimators only need the pair (X(tau), M(tau)) per path, which
``simulate_terminal`` produces without storing whole trajectories.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diffusions import Diffusion, simulate_terminal
from .errors import DomainViolation, NumericalFailure
from .numerics import bisect_monotone, quad, quad_to_infinity
from .profits import ProfitModel
from .solver import check_assumptions, integrate_from_zero

# Expected overshoot of a continuous max over a grid max, in units of
# sigma*sqrt(step): -zeta(1/2)/sqrt(2*pi).
GRID_MAX_CONSTANT = 0.5826


@dataclass(frozen=True)
class MCConfig:
    paths: int = 100_000
    step: float = 1e-3
    base_seed: int = 0
    antithetic: bool = False
    batch_size: int = 25_000
    bias_allowance: float | None = None

    def __post_init__(self):
        if self.paths < 100:
            raise DomainViolation(f"need at least 100 paths, got {self.paths}")
        if not self.step > 0:
            raise DomainViolation(f"step must be positive, got {self.step}")
        if self.antithetic and self.paths % 2:
            raise DomainViolation("antithetic sampling needs an even path count")
        if self.batch_size < 1:
            raise DomainViolation("batch_size must be positive")

    def to_dict(self):
        return {"paths": self.paths, "step": self.step, "base_seed": self.base_seed,
                "antithetic": self.antithetic, "batch_size": self.batch_size,
                "bias_allowance": self.bias_allowance}


def bias_allowance(diffusion: Diffusion, cfg: MCConfig, scale: float = 1.0) -> float:
    """Allowance for discretization bias added to the 3-sigma band.

    Zero when the running maximum is sampled exactly (GBM's Brownian-bridge
    maximum with exact steps). Otherwise GRID_MAX_CONSTANT * sqrt(step),
    scaled by the magnitude of the target, as a heuristic for the overshoot
    of the bridge-corrected Euler maximum.
    """
    if cfg.bias_allowance is not None:
        return float(cfg.bias_allowance)
    if diffusion.exact_max:
        return 0.0
    return GRID_MAX_CONSTANT * math.sqrt(cfg.step) * max(abs(scale), 1.0)


@dataclass
class VerificationReport:
    name: str
    target: float
    estimate: float
    stderr: float
    bias_allowance: float = 0.0
    relation: str = "eq"  # "eq": |est - target| in band; "le": est <= target + band
    meta: dict = field(default_factory=dict)

    @property
    def z_score(self) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.estimate == self.target else math.copysign(math.inf, self.estimate - self.target)
        return (self.estimate - self.target) / self.stderr

    @property
    def passed(self) -> bool:
        band = 3.0 * self.stderr + self.bias_allowance
        if self.relation == "le":
            return self.estimate - self.target <= band
        return abs(self.estimate - self.target) <= band

    def to_dict(self) -> dict:
        return {"name": self.name, "target": self.target, "estimate": self.estimate,
                "stderr": self.stderr, "z_score": self.z_score,
                "bias_allowance": self.bias_allowance, "relation": self.relation,
                "passed": self.passed, **({"meta": self.meta} if self.meta else {})}


@dataclass
class PolicyOutcome:
    estimate: float
    stderr: float
    profit_part: float
    cost_part: float
    paths: int
    investment: np.ndarray = field(repr=False)
    final_capacity: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"J": self.estimate, "stderr": self.stderr,
                "discounted_profit": self.profit_part, "investment_cost": self.cost_part,
                "paths": self.paths,
                "mean_investment": float(np.mean(self.investment)),
                "mean_final_capacity": float(np.mean(self.final_capacity))}


# ---------------------------------------------------------------------------
# sampling

def _threads():
    return max(1, int(os.environ.get("FB_THREADS", "1")))


def sample_clock(diffusion: Diffusion, x: float, cfg: MCConfig, offset: float = 0.0,
                 salt: int = 0):
    """(X(T), M(T)) at T = offset + tau, tau ~ Exp(r), as arrays of shape
    (sides, N) with sides = 2 for antithetic pairs.

    Batches draw from independent Philox streams spawned from base_seed, so
    results do not depend on FB_THREADS.
    """
    diffusion.check_domain(x)
    sides = 2 if cfg.antithetic else 1
    n_draws = cfg.paths // sides
    sizes = [cfg.batch_size] * (n_draws // cfg.batch_size)
    if n_draws % cfg.batch_size:
        sizes.append(n_draws % cfg.batch_size)
    seeds = np.random.SeedSequence([cfg.base_seed, salt]).spawn(len(sizes))

    def run(args):
        size, ss = args
        rng = np.random.Generator(np.random.Philox(ss))
        horizons = offset + rng.exponential(1.0 / diffusion.r, size=size)
        xt, mt = simulate_terminal(diffusion, x, horizons, cfg.step, rng,
                                   bridge=True, antithetic=cfg.antithetic)
        return xt.reshape(sides, size), mt.reshape(sides, size)

    jobs = list(zip(sizes, seeds))
    nthreads = min(_threads(), len(jobs))
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    xs = np.concatenate([p[0] for p in parts], axis=1)
    ms = np.concatenate([p[1] for p in parts], axis=1)
    return xs, ms


def _mean_se(values: np.ndarray):
    """Mean and standard error; antithetic sides are averaged first."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 2:
        v = v.mean(axis=0)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _eval_boundary(boundary: Callable, m: np.ndarray, allow_zero: bool = False):
    b = np.asarray(boundary(m.ravel()), dtype=float).reshape(m.shape)
    if not np.all(np.isfinite(b)):
        raise DomainViolation("boundary must be finite")
    if allow_zero:
        if np.any(b < 0):
            raise DomainViolation("boundary must be nonnegative")
    elif np.any(~(b > 0)):
        raise DomainViolation("boundary must be strictly positive")
    return b


# ---------------------------------------------------------------------------
# checks

def discounted_functional(diffusion: Diffusion, h: Callable, x: float, cfg: MCConfig,
                          target: float | None = None) -> VerificationReport:
    """Exponential-clock estimate of E[int_0^inf e^(-rt) h(X(t)) dt]."""
    xs, _ = sample_clock(diffusion, x, cfg, salt=1)
    est, se = _mean_se(np.asarray(h(xs)) / diffusion.r)
    return VerificationReport("discounted_functional",
                              float("nan") if target is None else target, est, se,
                              bias_allowance(diffusion, cfg, est))


def verify_backward_equation(diffusion: Diffusion, profit: ProfitModel, boundary: Callable,
                             x: float, cfg: MCConfig) -> VerificationReport:
    """Check E_x[pi_c(X(tau), b(M(tau)))] = r."""
    check_assumptions(diffusion, profit)
    xs, ms = sample_clock(diffusion, x, cfg, salt=2)
    vals = profit.marginal(xs, _eval_boundary(boundary, ms))
    est, se = _mean_se(vals)
    return VerificationReport("backward_equation", diffusion.r, est, se,
                              bias_allowance(diffusion, cfg, diffusion.r),
                              meta={"x": float(x), "paths": cfg.paths})


def reflect_capacity(boundary: Callable, states: np.ndarray, y: float):
    """Minimal nondecreasing capacity above b(X) on a sampled path.

    Returns (capacity, increments) along the last axis, with capacity
    C(t_i) = y v max_{j <= i} b(X(t_j)) and increments[0] = C(t_0) - y.
    """
    b = np.asarray(boundary(np.asarray(states, dtype=float)), dtype=float)
    cap = np.maximum(np.maximum.accumulate(b, axis=-1), y)
    inc = np.diff(cap, axis=-1, prepend=y)
    return cap, inc


def _policy_from_sample(profit, boundary, xs, ms, y, r, allow_zero=True):
    b = _eval_boundary(boundary, ms, allow_zero=allow_zero)
    cap = np.maximum(b, y)
    if np.any(~(cap > 0)):
        raise DomainViolation("capacity must be positive")
    invest = cap - y
    vals = profit.profit(xs, cap) / r - invest
    est, se = _mean_se(vals)
    return vals, PolicyOutcome(
        estimate=est, stderr=se,
        profit_part=_mean_se(profit.profit(xs, cap) / r)[0],
        cost_part=_mean_se(invest)[0], paths=int(xs.size),
        investment=invest.ravel(), final_capacity=cap.ravel())


def policy_payoff(diffusion: Diffusion, profit: ProfitModel, boundary: Callable,
                  x: float, y: float, cfg: MCConfig) -> PolicyOutcome:
    """Expected discounted profit net of investment cost under the reflection
    policy C(t) = y v sup_{s<t} b(X(s)).

    Both parts use the exponential clock: the profit part as
    E[pi(X(tau), C(tau))]/r and the cost part through
    int_0^inf e^(-rt) dnu(t) = E[nu(tau)], nu(tau) = (b(M(tau)) - y)^+.
    """
    if y < 0:
        raise DomainViolation("initial capacity must be nonnegative")
    check_assumptions(diffusion, profit)
    xs, ms = sample_clock(diffusion, x, cfg, salt=3)
    return _policy_from_sample(profit, boundary, xs, ms, y, diffusion.r)[1]


def policy_comparison(diffusion: Diffusion, profit: ProfitModel, boundary: Callable,
                      x: float, y: float, cfg: MCConfig,
                      scales: Sequence[float] = (0.5, 2.0)):
    """J under b and under scaled copies of b, on common random numbers.

    Returns (outcomes, reports): ``outcomes`` maps each scale (1.0 included)
    to a PolicyOutcome, ``reports`` holds one check J(b) >= J(s*b) per scale
    whose standard error is that of the paired difference.
    """
    check_assumptions(diffusion, profit)
    xs, ms = sample_clock(diffusion, x, cfg, salt=3)
    base_vals, base = _policy_from_sample(profit, boundary, xs, ms, y, diffusion.r)
    outcomes = {1.0: base}
    reports = []
    for s in scales:
        vals, out = _policy_from_sample(profit, lambda m, s=s: s * np.asarray(boundary(m)),
                                        xs, ms, y, diffusion.r)
        outcomes[float(s)] = out
        diff, se = _mean_se(vals - base_vals)
        combined = math.sqrt(base.stderr ** 2 + out.stderr ** 2)
        reports.append(VerificationReport(
            f"optimality_vs_scale_{s:g}", 0.0, diff, se, bias_allowance(diffusion, cfg),
            relation="le", meta={"J_optimal": base.estimate, "J_scaled": out.estimate,
                                 "independent_stderr": combined}))
    return outcomes, reports


def _boundary_inverse(boundary: Callable, level: float) -> float:
    return bisect_monotone(lambda h: float(boundary(np.array([h]))[0]) - level, 1.0)


def foc_spot_check(diffusion: Diffusion, profit: ProfitModel, boundary: Callable,
                   x: float, y: float, cfg: MCConfig,
                   probe_times: Sequence[float] = (0.0, 0.5, 1.0)):
    """Supergradient checks at deterministic times under the optimal policy.

    At probe time t the supergradient is e^(-rt) (E[pi_c(X(t+tau), C(t+tau))]/r - 1),
    which must be <= 0. The complementary-slackness check restarts the process
    at the first investment state: (x, b(x)) if y < b(x), otherwise (h, y)
    with b(h) = y. There the supergradient must vanish.
    """
    check_assumptions(diffusion, profit)
    bx = float(_eval_boundary(boundary, np.array([float(x)]))[0])
    r = diffusion.r
    reports = []
    for k, t in enumerate(probe_times):
        if t < 0:
            raise DomainViolation("probe times must be nonnegative")
        xs, ms = sample_clock(diffusion, x, cfg, offset=float(t), salt=100 + k)
        cap = np.maximum(_eval_boundary(boundary, ms), y)
        vals = math.exp(-r * t) * (profit.marginal(xs, cap) / r - 1.0)
        est, se = _mean_se(vals)
        reports.append(VerificationReport(
            f"supergradient_t={t:g}", 0.0, est, se, bias_allowance(diffusion, cfg),
            relation="le", meta={"t": float(t), "x": float(x), "y": float(y)}))
    if y < bx:
        h, level = float(x), bx
    else:
        h = _boundary_inverse(boundary, y)
        level = float(y)
    xs, ms = sample_clock(diffusion, h, cfg, salt=99)
    cap = np.maximum(_eval_boundary(boundary, ms), level)
    est, se = _mean_se(profit.marginal(xs, cap) / r - 1.0)
    reports.append(VerificationReport(
        "complementary_slackness", 0.0, est, se, bias_allowance(diffusion, cfg),
        meta={"state": h, "capacity": level}))
    return reports


# ---------------------------------------------------------------------------
# joint law of (X(tau), M(tau))

def joint_density(diffusion: Diffusion, x: float, y, z):
    """r psi(x) psi(y) m'(y) s'(z) / psi(z)^2 on {y <= z, z >= x}, else 0."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    y, z = np.broadcast_arrays(y, z)
    out = np.zeros(y.shape)
    ok = (y <= z) & (z >= x) & (y > diffusion.lower)
    if np.any(ok):
        lx = float(diffusion.log_psi(np.array([float(x)]))[0])
        yy, zz = y[ok], z[ok]
        out[ok] = diffusion.r * np.exp(
            lx + diffusion.log_psi(yy) + diffusion.log_speed(yy)
            + diffusion.log_scale(zz) - 2.0 * diffusion.log_psi(zz))
    return out


def _z_weight(diffusion, x, z):
    lx = float(diffusion.log_psi(np.array([float(x)]))[0])
    return diffusion.r * np.exp(lx + diffusion.log_scale(z) - 2.0 * diffusion.log_psi(z))


def _y_weight(diffusion, y):
    return np.exp(diffusion.log_psi(y) + diffusion.log_speed(y))


def joint_normalization(diffusion: Diffusion, x: float, tol: float = 1e-11) -> float:
    """Total mass of the joint density by nested quadrature (should be 1)."""
    def outer(zs):
        inner = np.array([integrate_from_zero(lambda y: _y_weight(diffusion, y), z,
                                              rel_tol=1e-13)[0] for z in zs])
        return _z_weight(diffusion, x, zs) * inner
    if diffusion.lower != 0.0:
        raise NumericalFailure("normalization helper assumes the state space starts at 0")
    return quad_to_infinity(outer, float(x), tol=tol, decay_hint=diffusion.outer_decay,
                            scale=diffusion.decay_scale).value


def cell_mass(diffusion: Diffusion, x: float, y0: float, y1: float, z0: float, z1: float,
              tol: float = 1e-13) -> float:
    """Mass of the joint law in [y0, y1] x [z0, z1]."""
    z0 = max(z0, float(x))
    if z1 <= z0 or y0 >= z1:
        return 0.0

    def outer(zs):
        vals = np.empty_like(zs)
        for i, z in enumerate(zs):
            top = min(y1, z)
            vals[i] = 0.0 if top <= y0 else quad(
                lambda y: _y_weight(diffusion, y), y0, top, tol=0.0, rel_tol=1e-12).value
        return _z_weight(diffusion, x, zs) * vals

    pts = [y0] if z0 < y0 < z1 else []
    return quad(outer, z0, z1, tol=tol, rel_tol=1e-10, points=pts).value


def default_bins(diffusion: Diffusion, x: float, n_bins: int = 20, tail: float = 1e-4):
    """Log-spaced edges: z in [x, z_hi] with P(M(tau) > z_hi) = psi(x)/psi(z_hi) = tail,
    y in [y_lo, z_hi] with P(X(tau) < y_lo) close to tail."""
    lx = float(diffusion.log_psi(np.array([float(x)]))[0])
    z_hi = bisect_monotone(
        lambda z: lx - float(diffusion.log_psi(np.array([z]))[0]) - math.log(tail), 2.0 * x,
        tol=1e-10)
    z_hi = max(z_hi, x * (1 + 1e-6))

    def lower_mass(ylo):
        def outer(zs):
            inner = np.array([integrate_from_zero(lambda y: _y_weight(diffusion, y),
                                                  min(ylo, z), rel_tol=1e-10)[0] for z in zs])
            return _z_weight(diffusion, x, zs) * inner
        return quad_to_infinity(outer, float(x), tol=1e-12, decay_hint=diffusion.outer_decay,
                                scale=diffusion.decay_scale).value

    y_lo = bisect_monotone(lambda ylo: lower_mass(ylo) - tail, 0.1 * x, tol=1e-6)
    y_edges = np.geomspace(y_lo, z_hi, n_bins + 1)
    z_edges = np.geomspace(x, z_hi, n_bins + 1)
    return y_edges, z_edges


def verify_joint_law(diffusion: Diffusion, x: float, cfg: MCConfig, bins=None,
                     n_bins: int = 20, max_z: float = 4.0, min_expected: float = 20.0):
    """Compare binned (X(tau), M(tau)) frequencies with the joint law.

    Cells with expected count below ``min_expected`` are pooled into one
    cell so each standardized deviation is close to normal. Returns
    (report, details); report.estimate is the largest |z| over cells and
    passes when it is at most ``max_z`` (after the bias allowance, expressed
    in standard deviations).
    """
    if diffusion.lower != 0.0:
        raise NumericalFailure("joint-law check assumes the state space starts at 0")
    y_edges, z_edges = bins if bins is not None else default_bins(diffusion, x, n_bins)
    y_edges = np.asarray(y_edges, dtype=float)
    z_edges = np.asarray(z_edges, dtype=float)
    norm = joint_normalization(diffusion, x)
    ny, nz = y_edges.size - 1, z_edges.size - 1
    probs = np.zeros((ny, nz))
    for i in range(ny):
        for j in range(nz):
            probs[i, j] = cell_mass(diffusion, x, y_edges[i], y_edges[i + 1],
                                    z_edges[j], z_edges[j + 1])
    xs, ms = sample_clock(diffusion, x, cfg, salt=4)
    xs, ms = xs.ravel(), ms.ravel()
    n = xs.size
    support_violations = int(np.sum(xs > ms * (1 + 1e-12)) + np.sum(ms < x * (1 - 1e-12)))
    counts, _, _ = np.histogram2d(xs, ms, bins=[y_edges, z_edges])
    coverage = float(counts.sum() / n)
    expected = n * probs
    dense = expected >= min_expected
    obs_cells = list(counts[dense])
    exp_cells = list(expected[dense])
    sparse_exp = float(expected[~dense].sum())
    if sparse_exp > 0:
        obs_cells.append(float(counts[~dense].sum()))
        exp_cells.append(sparse_exp)
    obs_cells = np.array(obs_cells)
    exp_cells = np.array(exp_cells)
    p = exp_cells / n
    zs = (obs_cells - exp_cells) / np.sqrt(exp_cells * (1 - p))
    chi2 = float(np.sum((obs_cells - exp_cells) ** 2 / exp_cells))
    worst = float(np.max(np.abs(zs)))
    # a probability-level bias delta shifts a cell's z by at most sqrt(n) * delta / sqrt(p)
    allowance = bias_allowance(diffusion, cfg) * math.sqrt(n)
    details = {"normalization": norm, "coverage_empirical": coverage,
               "coverage_expected": float(probs.sum()), "chi_square": chi2,
               "cells": int(exp_cells.size), "support_violations": support_violations,
               "max_abs_z": worst, "bias_allowance_z": allowance,
               "passed": bool(worst <= max_z + allowance and support_violations == 0
                              and abs(norm - 1.0) <= 1e-8 and coverage >= 0.999),
               "y_edges": y_edges.tolist(), "z_edges": z_edges.tolist()}
    report = VerificationReport("joint_law_max_abs_z", max_z, worst, 0.0, allowance,
                                relation="le", meta=details)
    return report, details
