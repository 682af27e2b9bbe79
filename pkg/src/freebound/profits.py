"""Operating profit functions pi(x, c) and their capacity derivatives.

Any object with ``kappa``, ``profit``, ``marginal`` and ``inverse_marginal``
can stand in for a profit model; ``ProfitModel`` documents that contract.
``marginal`` must be strictly decreasing in c, nondecreasing in x, blow up as
c -> 0 and tend to ``kappa`` as c -> inf.
"""
from __future__ import annotations

import math
from math import comb
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation
from .numerics import bisect_monotone


class ProfitModel:
    kappa: float = 0.0

    def profit(self, x, c):
        raise NotImplementedError

    def marginal(self, x, c):
        raise NotImplementedError

    def inverse_marginal(self, x, v):
        """Capacity c with marginal(x, c) == v, for v > kappa."""
        x = float(x)
        v = float(v)
        if not v > self.kappa:
            raise DomainViolation(f"marginal value {v} must exceed kappa={self.kappa}")
        # the root can sit far out (CES near saturation), so let the bracket
        # grow across most of the float range
        return bisect_monotone(lambda c: float(self.marginal(x, c)) - v,
                               x if x > 0 else 1.0, max_doublings=1000)

    def separable_terms(self):
        """Optional decomposition pi_c(x, c) = sum_k a_k x^p_k c^q_k as a list
        of (a_k, p_k, q_k) with p_k >= 0, or None when pi_c does not split."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_capacity(c):
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise DomainViolation("capacity must be positive")
    return c


@dataclass(frozen=True)
class CobbDouglas(ProfitModel):
    """pi(x, c) = x^alpha c^beta / (alpha + beta), kappa = 0."""
    alpha: float
    beta: float
    kappa = 0.0

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise DomainViolation(
                f"alpha and beta must lie in (0, 1), got {self.alpha}, {self.beta}")

    def profit(self, x, c):
        x = np.asarray(x, dtype=float)
        c = np.asarray(c, dtype=float)
        return x ** self.alpha * c ** self.beta / (self.alpha + self.beta)

    def marginal(self, x, c):
        c = _check_capacity(c)
        x = np.asarray(x, dtype=float)
        a, b = self.alpha, self.beta
        return b / (a + b) * x ** a * c ** (b - 1.0)

    def inverse_marginal(self, x, v):
        if not v > self.kappa:
            raise DomainViolation(f"marginal value {v} must exceed kappa=0")
        if not x > 0:
            raise DomainViolation("Cobb-Douglas marginal profit vanishes at x = 0")
        a, b = self.alpha, self.beta
        return (v * (a + b) / (b * x ** a)) ** (1.0 / (b - 1.0))

    def separable_terms(self):
        a, b = self.alpha, self.beta
        return [(b / (a + b), a, b - 1.0)]

    def to_dict(self):
        return {"kind": "cobb_douglas", "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class CES(ProfitModel):
    """pi(x, c) = (x^(1/n) + c^(1/n))^n with integer n >= 2, kappa = 1."""
    n: int
    kappa = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainViolation(f"n must be an integer >= 2, got {self.n}")

    def profit(self, x, c):
        n = self.n
        return (np.asarray(x, dtype=float) ** (1.0 / n) + np.asarray(c, dtype=float) ** (1.0 / n)) ** n

    def marginal(self, x, c):
        c = _check_capacity(c)
        x = np.asarray(x, dtype=float)
        n = self.n
        return (1.0 + (x / c) ** (1.0 / n)) ** (n - 1)

    def inverse_marginal(self, x, v):
        if not v > 1.0:
            raise DomainViolation(f"marginal value {v} must exceed kappa=1")
        if not x > 0:
            raise DomainViolation("CES marginal profit is identically 1 at x = 0")
        n = self.n
        return x * math.expm1(math.log(v) / (n - 1)) ** (-n)

    def separable_terms(self):
        n = self.n
        return [(float(comb(n - 1, k)), k / n, -k / n) for k in range(n)]

    def to_dict(self):
        return {"kind": "ces", "n": int(self.n)}


def profit_from_dict(data: dict) -> ProfitModel:
    kind = data.get("kind", "").lower().replace("-", "_")
    if kind in ("cobb_douglas", "cd"):
        return CobbDouglas(alpha=float(data["alpha"]), beta=float(data["beta"]))
    if kind == "ces":
        return CES(n=int(data["n"]))
    raise DomainViolation(f"unknown profit kind {data.get('kind')!r}")


def marginal_profit(profit: ProfitModel, x, c):
    return profit.marginal(x, c)


def inverse_marginal(profit: ProfitModel, x, v):
    return profit.inverse_marginal(x, v)


def saturation(profit: ProfitModel) -> float:
    return profit.kappa
