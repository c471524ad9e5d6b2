"""Kernel functions on [0, 1] and semi-metrics between sampled curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NegativeArgument
from .funcdata import Curve, _derivative

__all__ = [
    "QuadraticKernel",
    "kernel_from_name",
    "kernel_eval",
    "SemiMetric",
    "semimetric_from_name",
    "semimetric_eval",
]


@dataclass(frozen=True)
class QuadraticKernel:
    """K(u) = (3/4)(1 - u^2) on [0, 1], zero beyond; hard support boundary."""

    name: str = "quadratic"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise NegativeArgument("kernel argument must be nonnegative")
        out = np.where(u <= 1.0, 0.75 * (1.0 - u * u), 0.0)
        return out if out.ndim else float(out)

    def at_one(self, j: int = 1) -> float:
        """K(1)^j; zero for the quadratic kernel."""
        return 0.0

    def pow_deriv(self, j: int, u):
        """Analytic derivative of K^j on [0, 1], used by the moment integrals.

        (K)'(u) = -(3/2) u and (K^2)'(u) = 2 K(u) K'(u).
        """
        u = np.asarray(u, dtype=float)
        inside = u <= 1.0
        if j == 1:
            return np.where(inside, -1.5 * u, 0.0)
        if j == 2:
            return np.where(inside, 2.0 * (0.75 * (1.0 - u * u)) * (-1.5 * u), 0.0)
        raise ValueError("only j in {1, 2} is supported")


_KERNELS = {"quadratic": QuadraticKernel()}


def kernel_from_name(name: str) -> QuadraticKernel:
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; available: {sorted(_KERNELS)}")


def kernel_eval(kernel, u) -> float:
    """Evaluate a kernel at u >= 0."""
    return kernel(u)


@dataclass(frozen=True)
class SemiMetric:
    """L2 distance between curves or between their derivatives of order q.

    For q >= 1 this is a genuine semi-metric: curves differing by a polynomial
    of degree < q are at distance zero.
    """

    order: int = 0

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError("semi-metric derivative order must be 0, 1 or 2")

    @property
    def name(self) -> str:
        return "l2" if self.order == 0 else f"l2deriv{self.order}"

    def transform(self, values: np.ndarray, spacing: float) -> np.ndarray:
        """Map raw curve values to the feature space the L2 norm acts on."""
        if self.order == 0:
            return np.asarray(values, dtype=float)
        return _derivative(np.asarray(values, dtype=float), spacing, self.order)

    def profile(self, features: np.ndarray, x_features: np.ndarray, spacing: float) -> np.ndarray:
        """Distances from one transformed curve to each row of a feature matrix."""
        diff = features - x_features
        return np.sqrt(np.trapezoid(diff * diff, dx=spacing, axis=-1))


def semimetric_from_name(name: str) -> SemiMetric:
    table = {"l2": 0, "l2deriv1": 1, "l2deriv2": 2}
    try:
        return SemiMetric(table[name])
    except KeyError:
        raise ValueError(f"unknown semimetric {name!r}; available: {sorted(table)}")


def semimetric_eval(metric: SemiMetric, x1: Curve, x2: Curve) -> float:
    """Semi-metric distance between two curves on the same grid."""
    if x1.grid != x2.grid:
        raise GridMismatch("curves live on different grids")
    spacing = x1.grid.spacing
    f1 = metric.transform(x1.values, spacing)
    f2 = metric.transform(x2.values, spacing)
    return float(metric.profile(f1[None, :], f2, spacing)[0])
