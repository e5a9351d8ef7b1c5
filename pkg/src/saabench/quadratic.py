"""Scalar quadratic test problems ``c(x, y) = x^2 + a x^2 y + b x y^2 + g x y``.

For this family the expected cost under any distribution of ``y`` depends
only on its first two raw moments::

    E[c(x, y)] = x^2 (1 + a m1) + x (g m1 + b m2)

so every decision method reduces to producing a :class:`MomentPair` (or an
ensemble of them, for bagging) and calling :func:`saa_minimize`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import MomentPair
from .exceptions import EmptySampleError


@dataclass(frozen=True)
class QuadraticCost:
    alpha: float
    beta: float
    gamma: float

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return x * x + self.alpha * x * x * y + self.beta * x * y * y + self.gamma * x * y


@dataclass(frozen=True)
class DecisionBox:
    lo: float = -10.0
    hi: float = 10.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"decision box needs lo < hi, got [{self.lo}, {self.hi}]")


DEFAULT_BOX = DecisionBox()

BUILTIN_COSTS = (
    QuadraticCost(-0.67, 2.56, 2.51),
    QuadraticCost(0.02, -2.57, 1.31),
    QuadraticCost(-0.51, -2.1, 1.97),
    QuadraticCost(0.71, -1.45, 1.62),
    QuadraticCost(0.19, 2.17, 1.04),
    QuadraticCost(-0.26, 1.23, 3.89),
    QuadraticCost(-0.22, 3.71, 0.19),
    QuadraticCost(0.65, 2.02, 3.68),
    QuadraticCost(0.6, 0.86, 0.33),
    QuadraticCost(0.49, -3.25, 0.65),
)


def builtin_costs() -> dict:
    """The ten benchmark cost functions keyed by id 1..10."""
    return {i + 1: c for i, c in enumerate(BUILTIN_COSTS)}


def _objective(cost: QuadraticCost, x, m1, m2):
    return x * x * (1.0 + cost.alpha * m1) + x * (cost.gamma * m1 + cost.beta * m2)


def minimize_moments(cost: QuadraticCost, m1, m2, box: DecisionBox = DEFAULT_BOX):
    """Vectorised :func:`saa_minimize` over arrays of moments."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    curv = 1.0 + cost.alpha * m1
    lin = cost.gamma * m1 + cost.beta * m2
    convex = curv > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        stationary = np.clip(-lin / (2.0 * np.where(convex, curv, 1.0)), box.lo, box.hi)
    f_lo = _objective(cost, box.lo, m1, m2)
    f_hi = _objective(cost, box.hi, m1, m2)
    endpoint = np.where(f_hi < f_lo, box.hi, box.lo)
    x = np.where(convex, stationary, endpoint)
    return x if x.ndim else float(x)


def saa_minimize(cost: QuadraticCost, moments: MomentPair, box: DecisionBox = DEFAULT_BOX) -> float:
    """Exact minimiser of the moment-form objective over ``box``.

    Positive curvature gives the clipped stationary point. Otherwise the
    objective is concave or linear and the better endpoint wins, ties going
    to ``box.lo``.
    """
    return float(minimize_moments(cost, moments.m1, moments.m2, box))


def expected_cost(cost: QuadraticCost, x, moments: MomentPair):
    out = _objective(cost, np.asarray(x, dtype=float), moments.m1, moments.m2)
    return out if np.ndim(out) else float(out)


def sample_moments(s) -> MomentPair:
    y = np.asarray(s, dtype=float).reshape(-1)
    if y.size == 0:
        raise EmptySampleError("cannot take moments of an empty sample")
    return MomentPair(float(np.mean(y)), float(np.mean(y * y)))


def average_decisions(xs) -> float:
    """Mean of an ensemble of decisions, exact when they are all equal."""
    xs = np.asarray(xs, dtype=float).reshape(-1)
    return float(xs[0] + np.mean(xs - xs[0]))
