"""MAR-weighted kernel regression operator and its empirical variance components.

The central object is the ratio estimator

    m_hat(x) = sum_k zeta_k psi(Y_k) K(d(x, X_k)/h) / sum_k zeta_k K(d(x, X_k)/h)

specialized by the psi family to the regression function (identity) or the
conditional CDF (indicator), plus the small-ball, missingness and kernel-moment
estimates feeding the confidence-interval machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _nw
from .bandwidth import BandwidthRule, KnnCv, resolve_bandwidth
from .errors import DegenerateBall, EmptyNeighborhood
from .funcdata import Curve, FunctionalDataset
from .kernels import (
    QuadraticKernel,
    SemiMetric,
    kernel_from_name,
    semimetric_from_name,
)

__all__ = [
    "Identity",
    "IndicatorLeq",
    "EstimatorConfig",
    "VarianceComponents",
    "regress",
    "estimate_cdf",
    "estimate_quantile",
    "estimate_p",
    "estimate_Fx",
    "estimate_tau0",
    "estimate_moments",
    "estimate_W2bar",
    "estimate_cond_density",
    "variance_components",
]

DENSITY_FLOOR = 1e-8


@dataclass(frozen=True)
class Identity:
    """psi_y(v) = v: the plain regression function."""

    def apply(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class IndicatorLeq:
    """psi_y(v) = 1{v <= y}: the conditional CDF at level y."""

    y: float

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) <= self.y).astype(float)


PsiFamily = Identity | IndicatorLeq


@dataclass(frozen=True)
class EstimatorConfig:
    """Kernel, semi-metric and bandwidth rule for one estimation problem."""

    kernel: QuadraticKernel = field(default_factory=QuadraticKernel)
    semimetric: SemiMetric = field(default_factory=SemiMetric)
    bandwidth: BandwidthRule = field(default_factory=KnnCv)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        """Build from config keys, e.g.

        {"kernel": "quadratic", "semimetric": "l2deriv2", "bandwidth": {"fixed": 0.3}}
        """
        kernel = kernel_from_name(d.get("kernel", "quadratic"))
        metric = semimetric_from_name(d.get("semimetric", "l2"))
        bw = BandwidthRule.from_dict(d.get("bandwidth", {"knn": list(KnnCv().kappa_grid)}))
        return cls(kernel=kernel, semimetric=metric, bandwidth=bw)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.name,
            "semimetric": self.semimetric.name,
            "bandwidth": self.bandwidth.to_dict(),
        }


@dataclass(frozen=True)
class VarianceComponents:
    """Empirical pieces of the asymptotic variance at one query point."""

    m1_hat: float
    m2_hat: float
    fx_hat: float
    p_hat: float
    w2bar_hat: float
    tau0_u: np.ndarray
    tau0_values: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.fx_hat <= 1.0:
            raise ValueError("Fx_hat must lie in [0, 1]")
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("p_hat must lie in [0, 1]")
        if self.w2bar_hat < 0.0:
            raise ValueError("W2bar_hat must be nonnegative")


def _resolve_h(ds: FunctionalDataset, x: Curve, cfg: EstimatorConfig, h: float | None) -> float:
    if h is not None:
        return float(h)
    return resolve_bandwidth(ds, x, cfg.bandwidth, cfg.semimetric, cfg.kernel)


def _psi_values(ds: FunctionalDataset, psi: PsiFamily) -> np.ndarray:
    # Missing responses are masked by zero weights; fill them so no NaN
    # propagates through the weighted sums.
    y = np.where(ds.zetas == 1.0, ds.responses, 0.0)
    return psi.apply(y)


def regress(
    ds: FunctionalDataset,
    x: Curve,
    psi: PsiFamily,
    cfg: EstimatorConfig,
    h: float | None = None,
) -> float:
    """MAR-weighted kernel estimate of E[psi(Y) | X = x].

    Raises EmptyNeighborhood when no observed response lies within the
    bandwidth; the caller owns any fallback policy.
    """
    h = _resolve_h(ds, x, cfg, h)
    d = _nw.distance_profile(ds, x, cfg.semimetric)
    w = _nw.mar_weights(ds, d, h, cfg.kernel)
    return _nw.weighted_ratio(w, _psi_values(ds, psi))


def estimate_cdf(
    ds: FunctionalDataset,
    x: Curve,
    y: float,
    cfg: EstimatorConfig,
    h: float | None = None,
) -> float:
    """Conditional CDF estimate F(y | x); analytically in [0, 1], clamped for fp."""
    value = regress(ds, x, IndicatorLeq(y), cfg, h=h)
    return min(max(value, 0.0), 1.0)


def estimate_quantile(
    ds: FunctionalDataset,
    x: Curve,
    alpha: float,
    cfg: EstimatorConfig,
    h: float | None = None,
) -> float:
    """Left-continuous generalized inverse of the step-function CDF estimate.

    Returns the smallest observed neighborhood response y with F(y | x) >= alpha;
    the comparison uses estimate_cdf's own arithmetic so the inverse property
    holds exactly in floating point.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("quantile order must lie in (0, 1)")
    h = _resolve_h(ds, x, cfg, h)
    d = _nw.distance_profile(ds, x, cfg.semimetric)
    w = _nw.mar_weights(ds, d, h, cfg.kernel)
    total = float(np.sum(w))
    if total <= 0.0:
        raise EmptyNeighborhood("no observed response inside the bandwidth")
    ys = np.unique(ds.responses[w > 0])
    resp = np.where(ds.zetas == 1.0, ds.responses, np.nan)

    def cdf_at(v: float) -> float:
        val = float(np.sum(w * (resp <= v)) / total)
        return min(max(val, 0.0), 1.0)

    # Candidate from the cumulative weights, then align with cdf_at exactly.
    cum = np.cumsum([float(np.sum(w[resp == v])) for v in ys]) / total
    i = int(np.searchsorted(cum, alpha))
    i = min(i, len(ys) - 1)
    while i > 0 and cdf_at(ys[i - 1]) >= alpha:
        i -= 1
    while cdf_at(ys[i]) < alpha and i < len(ys) - 1:
        i += 1
    return float(ys[i])


def estimate_p(
    ds: FunctionalDataset,
    x: Curve,
    cfg: EstimatorConfig,
    h: float | None = None,
) -> float:
    """Kernel estimate of the observation probability p(x).

    The denominator ignores zeta: every curve inside the bandwidth counts.
    """
    h = _resolve_h(ds, x, cfg, h)
    d = _nw.distance_profile(ds, x, cfg.semimetric)
    k = cfg.kernel(d / h)
    try:
        return _nw.weighted_ratio(k, ds.zetas)
    except EmptyNeighborhood:
        raise EmptyNeighborhood("no curve inside the bandwidth at all")


def estimate_Fx(ds: FunctionalDataset, x: Curve, u: float, cfg: EstimatorConfig) -> float:
    """Empirical small-ball mass: fraction of curves with d(x, X_k) <= u."""
    if u < 0:
        raise ValueError("radius must be nonnegative")
    d = _nw.distance_profile(ds, x, cfg.semimetric)
    return float(np.count_nonzero(d <= u)) / ds.n


def estimate_tau0(
    ds: FunctionalDataset,
    x: Curve,
    h: float,
    cfg: EstimatorConfig,
    u_grid: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Small-ball ratio tau0(u) = F_x(u h) / F_x(h) on a u-grid in [0, 1].

    Returns (u_grid, tau_values); tau is nondecreasing with tau(1) = 1 exactly.
    """
    if u_grid is None:
        u_grid = np.linspace(0.0, 1.0, 101)
    u_grid = np.asarray(u_grid, dtype=float)
    d = np.sort(_nw.distance_profile(ds, x, cfg.semimetric))
    denom = float(np.searchsorted(d, h, side="right"))
    if denom == 0.0:
        raise DegenerateBall(f"F_x({h}) = 0: no curve within the bandwidth")
    counts = np.searchsorted(d, u_grid * h, side="right").astype(float)
    return u_grid, counts / denom


def estimate_moments(kernel, tau0: tuple[np.ndarray, np.ndarray]) -> tuple[float, float]:
    """Kernel moments M_j = K(1)^j - integral of (K^j)'(u) tau0(u) du, j = 1, 2.

    (K^j)' is analytic for the quadratic kernel; the integral uses the
    trapezoid rule on the tau0 grid.
    """
    u, tau = tau0
    m = []
    for j in (1, 2):
        integral = float(np.trapezoid(kernel.pow_deriv(j, u) * tau, x=u))
        m.append(kernel.at_one(j) - integral)
    return m[0], m[1]


def estimate_W2bar(
    ds: FunctionalDataset,
    x: Curve,
    psi: PsiFamily,
    cfg: EstimatorConfig,
    h: float | None = None,
    bessel: bool = False,
) -> float:
    """Kernel-weighted second moment of psi(Y) - m_hat around the query point.

    For the indicator family this equals F_hat (1 - F_hat) algebraically; see
    w2bar_indicator for the closed-form shortcut.  With bessel=True the
    reliability-weights correction 1 / (1 - sum w^2 / (sum w)^2) undoes the
    shrinkage from centering at the local fit, which matters in the small
    neighborhoods the confidence intervals live on.
    """
    h = _resolve_h(ds, x, cfg, h)
    d = _nw.distance_profile(ds, x, cfg.semimetric)
    w = _nw.mar_weights(ds, d, h, cfg.kernel)
    vals = _psi_values(ds, psi)
    m_hat = _nw.weighted_ratio(w, vals)
    resid = vals - m_hat
    raw = _nw.weighted_ratio(w, resid * resid)
    if not bessel:
        return raw
    total = float(np.sum(w))
    leverage = float(np.sum(w * w)) / (total * total)
    return raw / (1.0 - leverage) if leverage < 1.0 else raw


def w2bar_indicator(f_hat: float) -> float:
    """Variance shortcut F(1 - F) for the indicator psi family."""
    return f_hat * (1.0 - f_hat)


def estimate_cond_density(
    ds: FunctionalDataset,
    x: Curve,
    y: float,
    cfg: EstimatorConfig,
    h_y: float,
    h: float | None = None,
) -> float:
    """Symmetric difference quotient of the CDF estimate, floored at 1e-8.

    The floor keeps the value usable as a divisor in the quantile interval.
    """
    if h_y <= 0:
        raise ValueError("density bandwidth h_y must be positive")
    h = _resolve_h(ds, x, cfg, h)
    upper = estimate_cdf(ds, x, y + h_y, cfg, h=h)
    lower = estimate_cdf(ds, x, y - h_y, cfg, h=h)
    return max((upper - lower) / (2.0 * h_y), DENSITY_FLOOR)


def variance_components(
    ds: FunctionalDataset,
    x: Curve,
    psi: PsiFamily,
    cfg: EstimatorConfig,
    h: float | None = None,
    bessel: bool = False,
) -> VarianceComponents:
    """All empirical variance pieces at the query point, sharing one bandwidth."""
    h = _resolve_h(ds, x, cfg, h)
    fx = estimate_Fx(ds, x, h, cfg)
    if fx == 0.0:
        raise DegenerateBall(f"F_x({h}) = 0: no curve within the bandwidth")
    p_hat = estimate_p(ds, x, cfg, h=h)
    tau_u, tau_v = estimate_tau0(ds, x, h, cfg)
    m1, m2 = estimate_moments(cfg.kernel, (tau_u, tau_v))
    w2bar = estimate_W2bar(ds, x, psi, cfg, h=h, bessel=bessel)
    return VarianceComponents(
        m1_hat=m1,
        m2_hat=m2,
        fx_hat=fx,
        p_hat=p_hat,
        w2bar_hat=w2bar,
        tau0_u=tau_u,
        tau0_values=tau_v,
    )
