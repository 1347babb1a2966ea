"""Production-cost primitives: evaluation, marginal cost and its inverse.

Costs are strictly increasing, strictly convex, continuously differentiable
with c(0) = 0, so the inverse marginal cost is well defined and the
first-best quality for a buyer of posterior mean w solves c'(q) = w.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

DEFAULT_QUALITY_CAP = 10.0  # never binds in the scenarios of interest


class CostFunction(ABC):
    """Strictly convex cost with a hard quality ceiling ``q_bar``."""

    def __init__(self, q_bar: float = DEFAULT_QUALITY_CAP):
        if not q_bar > 0:
            raise ValueError("quality cap must be positive")
        self.q_bar = float(q_bar)
        self._validate()

    @abstractmethod
    def value(self, q):
        """c(q)."""

    @abstractmethod
    def marginal(self, q):
        """c'(q)."""

    @abstractmethod
    def inverse_marginal(self, w):
        """(c')^{-1}(w), clamped into [0, q_bar]: returns 0 when w <= c'(0)
        and q_bar when w >= c'(q_bar)."""

    @property
    @abstractmethod
    def convex_marginal(self) -> bool:
        """True when the marginal cost is itself convex (c''' >= 0)."""

    def first_best_quality(self, w: float):
        return self.inverse_marginal(w)

    def _validate(self):
        grid = np.linspace(0.0, self.q_bar, 512)
        mc = np.asarray(self.marginal(grid), dtype=float)
        if np.any(np.diff(mc) <= 0):
            raise ValueError("marginal cost must be strictly increasing")
        if abs(float(self.value(0.0))) > 1e-12:
            raise ValueError("cost must satisfy c(0) = 0")
        ws = np.linspace(float(mc[0]), float(mc[-1]), 257)
        round_trip = np.asarray(self.marginal(self.inverse_marginal(ws)), dtype=float)
        if np.max(np.abs(round_trip - ws)) > 1e-10:
            raise ValueError("marginal and inverse marginal are not mutual inverses")


class PowerCost(CostFunction):
    """c(q) = q**k / k with k >= 2, so c'(q) = q**(k-1) and c'(0) = 0."""

    def __init__(self, k: float, q_bar: float = DEFAULT_QUALITY_CAP):
        if not k >= 2.0:
            raise ValueError("power cost exponent must be at least 2")
        self.k = float(k)
        super().__init__(q_bar)

    def value(self, q):
        return np.asarray(q, dtype=float) ** self.k / self.k if np.ndim(q) else q**self.k / self.k

    def marginal(self, q):
        return np.asarray(q, dtype=float) ** (self.k - 1.0) if np.ndim(q) else q ** (self.k - 1.0)

    def inverse_marginal(self, w):
        w = np.clip(w, 0.0, None)
        q = w ** (1.0 / (self.k - 1.0))
        q = np.clip(q, 0.0, self.q_bar)
        return float(q) if np.ndim(q) == 0 else q

    @property
    def convex_marginal(self) -> bool:
        return True  # (k-1)(k-2) q**(k-3) >= 0 for every k >= 2

    def __repr__(self):
        return f"PowerCost(k={self.k})"


class TabulatedConvexCost(CostFunction):
    """Cost defined by monotone piecewise-linear marginal-cost samples.

    c is recovered by exact piecewise-quadratic integration of the sampled
    marginal, so value/marginal/inverse are mutually consistent to float
    precision.
    """

    def __init__(self, q_knots, mc_values, q_bar: float | None = None):
        q = np.asarray(q_knots, dtype=float)
        mc = np.asarray(mc_values, dtype=float)
        if q.ndim != 1 or q.size < 2 or q.shape != mc.shape:
            raise ValueError("need matching 1-d quality and marginal samples")
        if abs(q[0]) > 1e-12:
            raise ValueError("marginal-cost samples must start at q = 0")
        if np.any(np.diff(q) <= 0) or np.any(np.diff(mc) <= 0):
            raise ValueError("marginal cost samples must be strictly increasing")
        if np.any(mc < 0):
            raise ValueError("marginal cost must be nonnegative")
        self._q = q
        self._mc = mc
        self._slope = np.diff(mc) / np.diff(q)
        c = np.zeros_like(q)
        for i in range(q.size - 1):
            u = q[i + 1] - q[i]
            c[i + 1] = c[i] + mc[i] * u + 0.5 * self._slope[i] * u * u
        self._c = c
        super().__init__(q_bar if q_bar is not None else float(q[-1]))

    def _piece(self, q):
        return np.clip(np.searchsorted(self._q, q, side="right") - 1,
                       0, self._q.size - 2)

    def value(self, q):
        q = np.clip(q, 0.0, self._q[-1])
        i = self._piece(q)
        u = q - self._q[i]
        out = self._c[i] + self._mc[i] * u + 0.5 * self._slope[i] * u * u
        return float(out) if np.ndim(out) == 0 else out

    def marginal(self, q):
        q = np.clip(q, 0.0, self._q[-1])
        i = self._piece(q)
        out = self._mc[i] + self._slope[i] * (q - self._q[i])
        return float(out) if np.ndim(out) == 0 else out

    def inverse_marginal(self, w):
        w = np.clip(w, self._mc[0], self._mc[-1])
        i = np.clip(np.searchsorted(self._mc, w, side="right") - 1,
                    0, self._mc.size - 2)
        q = self._q[i] + (w - self._mc[i]) / self._slope[i]
        q = np.clip(q, 0.0, self.q_bar)
        return float(q) if np.ndim(q) == 0 else q

    @property
    def convex_marginal(self) -> bool:
        return bool(np.all(np.diff(self._slope) >= -1e-12))

    def __repr__(self):
        return f"TabulatedConvexCost({self._q.size} knots)"


def first_best_quality(cost: CostFunction, w: float):
    """Efficient quality for posterior mean w: the q solving c'(q) = w."""
    return cost.inverse_marginal(w)
