"""One-dimensional regular diffusions dX = mu(X) dt + sigma(X) dW.

Each model exposes its scale density s'(x), speed density m'(x), the
increasing r-eigenfunction psi_r of the generator and its derivatives, plus
log-domain versions of the same quantities which the boundary solver uses to
stay finite where psi_r or m' grow exponentially. The combination

    W(x) := psi_r'(x) / s'(x)

appears everywhere below; it satisfies W' = r * psi_r * m' (the generator
identity written in divergence form).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation

DEFAULT_STEP = 1e-3


def gamma1(mu: float, sigma: float, r: float) -> float:
    """Positive root of sigma^2/2 * g(g-1) + mu*g = r."""
    if not sigma > 0 or not r > 0:
        raise DomainViolation(f"need sigma > 0 and r > 0, got sigma={sigma}, r={r}")
    b = mu - 0.5 * sigma * sigma
    disc = math.sqrt(b * b + 2.0 * sigma * sigma * r)
    if b > 0:
        return 2.0 * r / (b + disc)
    return (disc - b) / (sigma * sigma)


def _scalar_out(x_in, value):
    if np.ndim(x_in) == 0:
        return float(value)
    return value


class Diffusion:
    """Shared behaviour of the built-in models.

    Subclasses provide the ``log_*`` primitives; the plain densities are
    derived from them.
    """

    lower = 0.0
    upper = math.inf
    r: float
    #: how the outer integrand psi_r(x) psi_r'(z)/psi_r(z)^2 decays in z
    outer_decay = "polynomial"
    exact_max = False
    noise_dim = 1

    def check_domain(self, x):
        arr = np.asarray(x, dtype=float)
        if not np.all((arr > self.lower) & (arr < self.upper)):
            bad = arr[~((arr > self.lower) & (arr < self.upper))]
            raise DomainViolation(
                f"state {bad.ravel()[0]!r} outside ({self.lower}, {self.upper})")
        return arr

    # plain densities -------------------------------------------------------
    def scale_density(self, x):
        arr = self.check_domain(x)
        return _scalar_out(x, np.exp(self.log_scale(arr)))

    def speed_density(self, x):
        arr = self.check_domain(x)
        return _scalar_out(x, np.exp(self.log_speed(arr)))

    def psi(self, x):
        arr = self.check_domain(x)
        return _scalar_out(x, np.exp(self.log_psi(arr)))

    def psi_prime(self, x):
        arr = self.check_domain(x)
        return _scalar_out(x, np.exp(self.log_psi_prime(arr)))

    def w(self, x):
        arr = self.check_domain(x)
        return _scalar_out(x, np.exp(self.log_w(arr)))

    def log_w(self, x):
        return self.log_psi_prime(x) - self.log_scale(x)

    def w_lower(self) -> float:
        """lim W(x) as x decreases to the lower endpoint."""
        return 0.0

    @property
    def decay_scale(self) -> float:
        return 1.0

    def to_dict(self) -> dict:
        raise NotImplementedError

    # simulation hooks ------------------------------------------------------
    def _init_state(self, x0, shape):
        return np.full(shape, float(x0))

    def _observe(self, state):
        return state

    def _bridge_max(self, x_prev, x_new, dt, u):
        """Approximate max over one step from a Brownian bridge with frozen
        local volatility; subclasses with exact bridges override this."""
        vol = self.volatility(x_prev)
        spread = np.sqrt(np.maximum((x_new - x_prev) ** 2 - 2.0 * vol * vol * dt * np.log(u), 0.0))
        return 0.5 * (x_prev + x_new + spread)


@dataclass(frozen=True)
class GBM(Diffusion):
    """Geometric Brownian motion dX = mu X dt + sigma X dW on (0, inf)."""
    mu: float
    sigma: float
    r: float
    exact_max = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainViolation(f"sigma must be positive, got {self.sigma}")
        if not self.r > 0:
            raise DomainViolation(f"discount rate must be positive, got {self.r}")

    @property
    def delta(self) -> float:
        return self.mu / self.sigma ** 2 - 0.5

    @cached_property
    def gamma1(self) -> float:
        return gamma1(self.mu, self.sigma, self.r)

    @property
    def theta(self) -> float:
        return self.gamma1 + 2.0 * self.delta

    def drift(self, x):
        return self.mu * np.asarray(x, dtype=float)

    def volatility(self, x):
        return self.sigma * np.asarray(x, dtype=float)

    def log_scale(self, x):
        d = self.delta
        if d == 0.0:
            return -np.log(x)
        return (-2.0 * d - 1.0) * np.log(x)

    def log_speed(self, x):
        return math.log(2.0 / self.sigma ** 2) + (2.0 * self.delta - 1.0) * np.log(x)

    def log_psi(self, x):
        return self.gamma1 * np.log(x)

    def log_psi_prime(self, x):
        g = self.gamma1
        return math.log(g) + (g - 1.0) * np.log(x)

    def psi_second(self, x):
        arr = self.check_domain(x)
        g = self.gamma1
        return _scalar_out(x, g * (g - 1.0) * arr ** (g - 2.0))

    def to_dict(self):
        return {"kind": "gbm", "mu": self.mu, "sigma": self.sigma, "r": self.r}

    # log X is a Brownian motion with drift, so both the step and the
    # maximum over the step are sampled exactly.
    def _init_state(self, x0, shape):
        return np.full(shape, math.log(x0))

    def _advance(self, state, dt, z):
        nu = self.mu - 0.5 * self.sigma ** 2
        return state + nu * dt + self.sigma * np.sqrt(dt) * z[..., 0]

    def _observe(self, state):
        return np.exp(state)

    def _log_bridge_max(self, a, b, dt, u):
        spread = np.sqrt((b - a) ** 2 - 2.0 * self.sigma ** 2 * dt * np.log(u))
        return 0.5 * (a + b + spread)


def _ucosh_minus_sinh_log(u):
    """log(u cosh u - sinh u) for u > 0 without cancellation or overflow."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = u < 0.5
    if np.any(small):
        us = u[small]
        # sum_{k>=1} 2k u^(2k+1) / (2k+1)!
        term_sum = np.zeros_like(us)
        for k in range(1, 14):
            term_sum += 2 * k * us ** (2 * k + 1) / math.factorial(2 * k + 1)
        out[small] = np.log(term_sum)
    big = ~small
    if np.any(big):
        ub = u[big]
        out[big] = ub + np.log(ub * (1.0 + np.exp(-2.0 * ub)) + np.expm1(-2.0 * ub)) - math.log(2.0)
    return out


@dataclass(frozen=True)
class Bessel3(Diffusion):
    """Three-dimensional Bessel process dX = dt/X + dW on (0, inf)."""
    r: float
    outer_decay = "exponential"
    noise_dim = 3

    def __post_init__(self):
        if not self.r > 0:
            raise DomainViolation(f"discount rate must be positive, got {self.r}")

    @property
    def rate(self) -> float:
        return math.sqrt(2.0 * self.r)

    @property
    def decay_scale(self) -> float:
        return 1.0 / self.rate

    def drift(self, x):
        return 1.0 / np.asarray(x, dtype=float)

    def volatility(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def log_scale(self, x):
        return -2.0 * np.log(x)

    def log_speed(self, x):
        return math.log(2.0) + 2.0 * np.log(x)

    def log_psi(self, x):
        u = self.rate * np.asarray(x, dtype=float)
        return u + np.log(-np.expm1(-2.0 * u)) - math.log(2.0) - np.log(x)

    def log_psi_prime(self, x):
        u = self.rate * np.asarray(x, dtype=float)
        return _ucosh_minus_sinh_log(u) - 2.0 * np.log(x)

    def log_w(self, x):
        return _ucosh_minus_sinh_log(self.rate * np.asarray(x, dtype=float))

    def psi_second(self, x):
        arr = self.check_domain(x)
        a = self.rate
        u = a * arr
        out = np.empty_like(u)
        small = u < 0.5
        if np.any(small):
            us = u[small]
            s2 = np.zeros_like(us)
            for k in range(1, 14):
                s2 += 2 * k * (2 * k - 1) * us ** (2 * k - 2) / math.factorial(2 * k + 1)
            out[small] = a ** 3 * s2
        big = ~small
        if np.any(big):
            ub, xb = u[big], arr[big]
            out[big] = ((ub * ub + 2.0) * np.sinh(ub) - 2.0 * ub * np.cosh(ub)) / xb ** 3
        return _scalar_out(x, out)

    def to_dict(self):
        return {"kind": "bessel3", "r": self.r}

    # Euclidean norm of a 3-d Brownian motion started at (x0, 0, 0).
    def _init_state(self, x0, shape):
        state = np.zeros(tuple(shape) + (3,))
        state[..., 0] = x0
        return state

    def _advance(self, state, dt, z):
        return state + np.sqrt(dt)[..., None] * z

    def _observe(self, state):
        return np.sqrt(np.einsum("...i,...i->...", state, state))


@dataclass(frozen=True)
class CEV(Diffusion):
    """CEV process dX = r X dt + sigma X^(1-gamma) dW, gamma in (0, 1/2].

    The drift rate is tied to the discount rate r. The origin is attainable
    and absorbing, so W(0+) = 1 rather than 0.
    """
    r: float
    sigma: float
    gamma: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainViolation(f"discount rate must be positive, got {self.r}")
        if not self.sigma > 0:
            raise DomainViolation(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.gamma <= 0.5:
            raise DomainViolation(f"gamma must lie in (0, 1/2], got {self.gamma}")

    @property
    def c(self) -> float:
        return self.r / (self.gamma * self.sigma ** 2)

    def drift(self, x):
        return self.r * np.asarray(x, dtype=float)

    def volatility(self, x):
        return self.sigma * np.maximum(np.asarray(x, dtype=float), 0.0) ** (1.0 - self.gamma)

    def log_scale(self, x):
        return -self.c * np.asarray(x, dtype=float) ** (2.0 * self.gamma)

    def log_speed(self, x):
        x = np.asarray(x, dtype=float)
        return (math.log(2.0 / self.sigma ** 2) - 2.0 * (1.0 - self.gamma) * np.log(x)
                + self.c * x ** (2.0 * self.gamma))

    def log_psi(self, x):
        return np.log(x)

    def log_psi_prime(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def log_w(self, x):
        return self.c * np.asarray(x, dtype=float) ** (2.0 * self.gamma)

    def w_lower(self):
        return 1.0

    def psi_second(self, x):
        arr = self.check_domain(x)
        return _scalar_out(x, np.zeros_like(arr))

    def to_dict(self):
        return {"kind": "cev", "r": self.r, "sigma": self.sigma, "gamma": self.gamma}

    # full-truncation Euler: coefficients see max(state, 0); once the
    # auxiliary state is nonpositive the observed process sits at 0.
    def _advance(self, state, dt, z):
        pos = np.maximum(state, 0.0)
        return (state + self.r * pos * dt
                + self.sigma * pos ** (1.0 - self.gamma) * np.sqrt(dt) * z[..., 0])

    def _observe(self, state):
        return np.maximum(state, 0.0)


@dataclass(frozen=True)
class CustomDiffusion(Diffusion):
    """User-supplied diffusion with closed-form s', m', psi_r and psi_r'.

    Simulation uses plain Euler steps clamped to the open state interval.
    """
    r: float
    drift_fn: Callable
    volatility_fn: Callable
    scale_fn: Callable
    speed_fn: Callable
    psi_fn: Callable
    psi_prime_fn: Callable
    lower: float = 0.0
    upper: float = math.inf
    outer_decay: str = "polynomial"
    w_at_lower: float = 0.0
    psi_second_fn: Optional[Callable] = None

    def drift(self, x):
        return self.drift_fn(np.asarray(x, dtype=float))

    def volatility(self, x):
        return self.volatility_fn(np.asarray(x, dtype=float))

    def log_scale(self, x):
        return np.log(self.scale_fn(np.asarray(x, dtype=float)))

    def log_speed(self, x):
        return np.log(self.speed_fn(np.asarray(x, dtype=float)))

    def log_psi(self, x):
        return np.log(self.psi_fn(np.asarray(x, dtype=float)))

    def log_psi_prime(self, x):
        return np.log(self.psi_prime_fn(np.asarray(x, dtype=float)))

    def w_lower(self):
        return self.w_at_lower

    def psi_second(self, x):
        if self.psi_second_fn is None:
            raise NotImplementedError("no analytic second derivative supplied")
        return self.psi_second_fn(np.asarray(x, dtype=float))

    def to_dict(self):
        raise TypeError("custom diffusions are not JSON-serializable")

    def _advance(self, state, dt, z):
        new = state + self.drift(state) * dt + self.volatility(state) * np.sqrt(dt) * z[..., 0]
        eps = 1e-12 * max(1.0, abs(self.lower)) if math.isfinite(self.lower) else 0.0
        return np.clip(new, self.lower + eps, self.upper)


def diffusion_from_dict(data: dict) -> Diffusion:
    kind = data.get("kind", "").lower()
    if kind == "gbm":
        return GBM(mu=float(data["mu"]), sigma=float(data["sigma"]), r=float(data["r"]))
    if kind in ("bessel3", "bessel"):
        return Bessel3(r=float(data["r"]))
    if kind == "cev":
        return CEV(r=float(data["r"]), sigma=float(data["sigma"]), gamma=float(data["gamma"]))
    raise DomainViolation(f"unknown diffusion kind {data.get('kind')!r}")


# module-level spellings of the model primitives ------------------------------

def scale_density(spec: Diffusion, x):
    return spec.scale_density(x)


def speed_density(spec: Diffusion, x):
    return spec.speed_density(x)


def psi_r(spec: Diffusion, x):
    return spec.psi(x)


def psi_r_prime(spec: Diffusion, x):
    return spec.psi_prime(x)


# path simulation ---------------------------------------------------------------

@dataclass
class PathSample:
    """Trajectories on a uniform time grid with their running maxima.

    ``states`` and ``running_max`` have shape (paths, len(times)); ``clock``
    holds one independent Exponential(r) time per path.
    """
    times: np.ndarray
    states: np.ndarray
    running_max: np.ndarray
    clock: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)


def _step_max(spec, state_prev, state_new, x_prev, x_new, dt, u):
    if u is None:
        return x_new
    if isinstance(spec, GBM):
        return np.exp(spec._log_bridge_max(state_prev, state_new, dt, u))
    return spec._bridge_max(x_prev, x_new, dt, u)


def simulate_path(spec: Diffusion, x0: float, step: float = DEFAULT_STEP,
                  horizon: float = 1.0, seed: int = 0, paths: int = 1,
                  bridge: bool = False) -> PathSample:
    """Simulate ``paths`` trajectories of ``spec`` from ``x0`` up to ``horizon``.

    GBM steps are exact (lognormal), Bessel3 paths are norms of 3-d Brownian
    motions, CEV uses full-truncation Euler. With ``bridge=True`` the running
    maximum also accounts for excursions between grid points (exact for GBM).
    """
    spec.check_domain(x0)
    if not step > 0:
        raise DomainViolation(f"step must be positive, got {step}")
    if not horizon > 0:
        raise DomainViolation(f"horizon must be positive, got {horizon}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    nsteps = int(math.ceil(horizon / step - 1e-9))
    times = np.minimum(np.arange(nsteps + 1) * step, horizon)
    clock = rng.exponential(1.0 / spec.r, size=paths)
    states = np.empty((paths, nsteps + 1))
    running = np.empty((paths, nsteps + 1))
    state = spec._init_state(x0, (paths,))
    x = spec._observe(state)
    states[:, 0] = x
    running[:, 0] = x
    for i in range(nsteps):
        dt = np.full(paths, times[i + 1] - times[i])
        z = rng.standard_normal((paths, spec.noise_dim))
        new_state = spec._advance(state, dt, z)
        x_new = spec._observe(new_state)
        u = 1.0 - rng.random(paths) if bridge else None
        m = _step_max(spec, state, new_state, x, x_new, dt, u)
        running[:, i + 1] = np.maximum(running[:, i], np.maximum(m, x_new))
        states[:, i + 1] = x_new
        state, x = new_state, x_new
    return PathSample(times=times, states=states, running_max=running, clock=clock,
                      seed=seed, meta={"diffusion": type(spec).__name__, "step": step,
                                       "bridge": bridge})


def simulate_terminal(spec: Diffusion, x0: float, horizons: np.ndarray, step: float,
                      rng: np.random.Generator, bridge: bool = True,
                      antithetic: bool = False):
    """State and running maximum of independent paths at per-path horizons.

    Paths are advanced on a common grid of width ``step``; each path takes a
    final partial step onto its own horizon. With ``antithetic=True`` the
    returned arrays have length ``2 * len(horizons)``: path ``i`` and
    ``i + len(horizons)`` share horizon and uniforms but use opposite normals.

    Returns
    -------
    (x_T, m_T) : tuple of ndarray
    """
    spec.check_domain(x0)
    horizons = np.asarray(horizons, dtype=float)
    n = horizons.size
    order = np.argsort(-horizons, kind="stable")
    hs = horizons[order]
    neg_hs = -hs
    sides = 2 if antithetic else 1
    sign = np.array([1.0, -1.0])[:sides].reshape(sides, 1, 1)
    state = spec._init_state(x0, (sides, n))
    x = spec._observe(state)
    m = x.copy()
    out_x = np.empty((sides, n))
    out_m = np.empty((sides, n))
    alive = n
    t = 0.0
    while alive > 0:
        # paths [0, full) still extend beyond t + step
        full = int(np.searchsorted(neg_hs[:alive], -(t + step), side="right"))
        dt = np.full(alive, step)
        dt[full:] = hs[full:alive] - t
        np.maximum(dt, 0.0, out=dt)
        z = rng.standard_normal((alive, spec.noise_dim)) * sign
        st = state[:, :alive]
        new_state = spec._advance(st, dt, z)
        x_new = spec._observe(new_state)
        u = 1.0 - rng.random(alive) if bridge else None
        with np.errstate(divide="ignore"):
            step_max = _step_max(spec, st, new_state, x[:, :alive], x_new, dt, u)
        m_new = np.maximum(m[:, :alive], np.maximum(step_max, x_new))
        out_x[:, full:alive] = x_new[:, full:]
        out_m[:, full:alive] = m_new[:, full:]
        state = new_state[:, :full]
        x = x_new[:, :full]
        m = m_new[:, :full]
        alive = full
        t += step
    res_x = np.empty((sides, n))
    res_m = np.empty((sides, n))
    res_x[:, order] = out_x
    res_m[:, order] = out_m
    return res_x.ravel(), res_m.ravel()
