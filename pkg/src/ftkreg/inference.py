"""Asymptotic and exchangeable-bootstrap confidence intervals.

The asymptotic interval plugs empirical variance components into the Gaussian
limit of the regression estimator.  The bootstrap interval resamples the
centered kernel summands with exchangeable random weights and reads the
interval half-width off the quantile of the resampled statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _nw
from .errors import DegenerateBall, DensityFloorHit, ZeroMissingness
from .estimator import (
    DENSITY_FLOOR,
    EstimatorConfig,
    Identity,
    IndicatorLeq,
    PsiFamily,
    VarianceComponents,
    _resolve_h,
    estimate_cond_density,
    estimate_quantile,
    regress,
    variance_components,
)
from .funcdata import Curve, FunctionalDataset

__all__ = [
    "normal_quantile",
    "Asymptotic",
    "Bootstrap",
    "CIRequest",
    "BootstrapWeights",
    "CIResult",
    "ci_asymptotic",
    "ci_quantile",
    "bootstrap_statistic",
    "ci_bootstrap",
]


# Acklam's rational approximation to the standard normal inverse CDF
# (|relative error| < 1.15e-9), tightened by one Halley step through erfc.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Standard normal inverse CDF for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie strictly between 0 and 1")
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # One Halley refinement on e = Phi(x) - p; the tail form avoids the
    # cancellation of two near-one quantities.
    if p >= 0.5:
        e = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
    else:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@dataclass(frozen=True)
class Asymptotic:
    """Gaussian-limit interval."""


@dataclass(frozen=True)
class Bootstrap:
    """Exchangeable-bootstrap interval with B weight replicates."""

    B: int = 1000
    weight_law: str = "unit_exponential"

    def __post_init__(self):
        if self.B < 100:
            raise ValueError("bootstrap needs at least B = 100 replicates")
        if self.weight_law not in ("unit_exponential", "multinomial"):
            raise ValueError("weight law must be 'unit_exponential' or 'multinomial'")


@dataclass(frozen=True)
class CIRequest:
    """A confidence-interval query for the regression operator at x."""

    x: Curve
    psi: PsiFamily
    alpha_level: float = 0.05
    method: Asymptotic | Bootstrap = field(default_factory=Asymptotic)

    def __post_init__(self):
        if not 0.0 < self.alpha_level < 1.0:
            raise ValueError("alpha_level must lie in (0, 1)")


@dataclass(frozen=True)
class BootstrapWeights:
    """One exchangeable weight vector of length n."""

    w: np.ndarray
    law: str = "unit_exponential"


def draw_weights(law: str, n: int, rng: np.random.Generator) -> BootstrapWeights:
    """Draw one weight vector: i.i.d. unit exponentials or multinomial counts."""
    if law == "unit_exponential":
        return BootstrapWeights(rng.exponential(1.0, n), law)
    if law == "multinomial":
        return BootstrapWeights(rng.multinomial(n, np.full(n, 1.0 / n)).astype(float), law)
    raise ValueError(f"unknown weight law {law!r}")


@dataclass(frozen=True)
class CIResult:
    """Point estimate with interval bounds and the components behind them."""

    point: float
    lower: float
    upper: float
    components: VarianceComponents
    method: str
    quantile_used: float
    h: float

    def __post_init__(self):
        if not self.lower <= self.point <= self.upper:
            raise ValueError("interval must contain the point estimate")


def _scale_factor(comps: VarianceComponents, n: int) -> float:
    """sqrt(M2)/M1 * 1/sqrt(n F_x(h) p(x)), the shared half-width scale."""
    if comps.fx_hat == 0.0:
        raise DegenerateBall("F_x(h) = 0")
    if comps.p_hat == 0.0:
        raise ZeroMissingness("estimated observation probability is zero")
    return math.sqrt(comps.m2_hat) / comps.m1_hat / math.sqrt(n * comps.fx_hat * comps.p_hat)


def ci_asymptotic(ds: FunctionalDataset, req: CIRequest, cfg: EstimatorConfig) -> CIResult:
    """Gaussian-limit confidence interval for m_psi(x, y)."""
    h = _resolve_h(ds, req.x, cfg, None)
    point = regress(ds, req.x, req.psi, cfg, h=h)
    comps = variance_components(ds, req.x, req.psi, cfg, h=h, bessel=True)
    z = normal_quantile(1.0 - req.alpha_level / 2.0)
    half = z * math.sqrt(comps.w2bar_hat) * _scale_factor(comps, ds.n)
    return CIResult(
        point=point,
        lower=point - half,
        upper=point + half,
        components=comps,
        method="asymptotic",
        quantile_used=z,
        h=h,
    )


def _silverman_h_y(ds: FunctionalDataset, weights: np.ndarray) -> float:
    responses = ds.responses[weights > 0.0]
    m = responses.size
    sd = float(np.std(responses, ddof=1)) if m > 1 else 0.0
    iqr = float(np.quantile(responses, 0.75) - np.quantile(responses, 0.25))
    scale = min(sd, iqr / 1.34) if iqr > 0 else sd
    if scale <= 0.0:
        raise DensityFloorHit("neighborhood responses are degenerate")
    return 0.9 * scale * m ** (-0.2)


def ci_quantile(
    ds: FunctionalDataset,
    x: Curve,
    alpha_q: float,
    alpha_level: float,
    cfg: EstimatorConfig,
    h_y: float | None = None,
) -> CIResult:
    """Confidence interval for the conditional alpha_q-quantile at x.

    Uses the alpha(1 - alpha) variance plug-in of the indicator family and
    divides by the estimated conditional density at the quantile, following the
    delta method.  h_y defaults to a Silverman-type rule on the neighborhood
    responses.
    """
    h = _resolve_h(ds, x, cfg, None)
    q_hat = estimate_quantile(ds, x, alpha_q, cfg, h=h)
    comps_raw = variance_components(ds, x, IndicatorLeq(q_hat), cfg, h=h)
    comps = VarianceComponents(
        m1_hat=comps_raw.m1_hat,
        m2_hat=comps_raw.m2_hat,
        fx_hat=comps_raw.fx_hat,
        p_hat=comps_raw.p_hat,
        w2bar_hat=alpha_q * (1.0 - alpha_q),
        tau0_u=comps_raw.tau0_u,
        tau0_values=comps_raw.tau0_values,
    )
    if h_y is None:
        d = _nw.distance_profile(ds, x, cfg.semimetric)
        w = _nw.mar_weights(ds, d, h, cfg.kernel)
        h_y = _silverman_h_y(ds, w)
    g_hat = estimate_cond_density(ds, x, q_hat, cfg, h_y, h=h)
    if g_hat <= DENSITY_FLOOR:
        raise DensityFloorHit("conditional density estimate hit its floor")
    z = normal_quantile(1.0 - alpha_level / 2.0)
    half = z * math.sqrt(comps.w2bar_hat) * _scale_factor(comps, ds.n) / g_hat
    return CIResult(
        point=q_hat,
        lower=q_hat - half,
        upper=q_hat + half,
        components=comps,
        method="asymptotic",
        quantile_used=z,
        h=h,
    )


def _xi_vector(
    ds: FunctionalDataset,
    x: Curve,
    psi: PsiFamily,
    cfg: EstimatorConfig,
    h: float,
    m_hat: float,
) -> np.ndarray:
    """Centered bootstrap summands xi_k at the query point.

    xi_k = sqrt(F_x(h)/n) zeta_k (psi(Y_k) - m_hat) Delta_k / mean(Delta)
    minus the empirical mean over k, so the vector sums to zero exactly.
    """
    d = _nw.distance_profile(ds, x, cfg.semimetric)
    delta = cfg.kernel(d / h)
    mean_delta = float(np.sum(delta)) / ds.n
    if mean_delta == 0.0:
        return np.zeros(ds.n)
    fx = float(np.count_nonzero(d <= h)) / ds.n
    y_filled = np.where(ds.zetas == 1.0, ds.responses, 0.0)
    eta = math.sqrt(fx / ds.n) * ds.zetas * (psi.apply(y_filled) - m_hat) * delta / mean_delta
    return eta - np.mean(eta)


def bootstrap_statistic(
    ds: FunctionalDataset,
    x: Curve,
    psi: PsiFamily,
    cfg: EstimatorConfig,
    weights: BootstrapWeights,
    h: float | None = None,
    m_hat: float | None = None,
) -> float:
    """Resampled statistic sqrt(n) sum_k (W_k - Wbar) xi_k(x)."""
    h = _resolve_h(ds, x, cfg, h)
    if m_hat is None:
        m_hat = regress(ds, x, psi, cfg, h=h)
    xi = _xi_vector(ds, x, psi, cfg, h, m_hat)
    w = np.asarray(weights.w, dtype=float)
    if w.shape != (ds.n,):
        raise ValueError(f"weight vector must have length {ds.n}")
    if np.all(w == w[0]):
        return 0.0  # centering kills constant weights exactly
    return float(math.sqrt(ds.n) * np.sum((w - np.mean(w)) * xi))


def ci_bootstrap(
    ds: FunctionalDataset,
    req: CIRequest,
    cfg: EstimatorConfig,
    seed: int,
) -> CIResult:
    """Exchangeable-bootstrap confidence interval for m_psi(x, y).

    Draws B independent weight vectors from counter-based Philox streams (one
    per replicate, so results do not depend on evaluation order), takes the
    smallest z with empirical coverage of |S*| at least 1 - alpha, and maps it
    to the estimate scale through the n p(x) sqrt(F_x(h)) normalization of the
    resampled statistic.
    """
    if not isinstance(req.method, Bootstrap):
        raise ValueError("ci_bootstrap needs a Bootstrap method in the request")
    h = _resolve_h(ds, req.x, cfg, None)
    point = regress(ds, req.x, req.psi, cfg, h=h)
    comps = variance_components(ds, req.x, req.psi, cfg, h=h)
    xi = _xi_vector(ds, req.x, req.psi, cfg, h, point)

    B = req.method.B
    streams = np.random.SeedSequence(seed).spawn(B)
    sqrt_n = math.sqrt(ds.n)
    stats = np.empty(B)
    for ell in range(B):
        rng = np.random.Generator(np.random.Philox(streams[ell]))
        w = draw_weights(req.method.weight_law, ds.n, rng).w
        stats[ell] = abs(sqrt_n * float(np.sum((w - np.mean(w)) * xi)))
    stats.sort()
    rank = math.ceil((1.0 - req.alpha_level) * B)
    z_star = float(stats[min(rank, B) - 1])

    if comps.fx_hat == 0.0:
        raise DegenerateBall("F_x(h) = 0")
    if comps.p_hat == 0.0:
        raise ZeroMissingness("estimated observation probability is zero")
    half = z_star / (ds.n * comps.p_hat * math.sqrt(comps.fx_hat))
    return CIResult(
        point=point,
        lower=point - half,
        upper=point + half,
        components=comps,
        method="bootstrap",
        quantile_used=z_star,
        h=h,
    )
