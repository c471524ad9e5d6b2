"""Internal Nadaraya-Watson plumbing shared by the estimator and bandwidth modules.

Distance profiles against a whole dataset expand the squared trapezoid norm
||a - b||^2 = ||a||^2 - 2 <a, b> + ||b||^2 in the metric's feature space, so
one query costs a single matrix-vector product against cached per-dataset
state.  The public pairwise semimetric_eval keeps the direct formula; the
expanded form agrees with it to machine precision relative to the feature
magnitudes.  All reductions run in dataset order k = 1..n.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyNeighborhood, GridMismatch
from .funcdata import Curve, FunctionalDataset
from .kernels import SemiMetric


def feature_matrix(ds: FunctionalDataset, metric: SemiMetric) -> np.ndarray:
    key = ("features", metric.order)
    if key not in ds._cache:
        feats = metric.transform(ds.values_matrix, ds.grid.spacing)
        feats.flags.writeable = False
        ds._cache[key] = feats
    return ds._cache[key]


def _metric_state(ds: FunctionalDataset, metric: SemiMetric):
    """(features, trapezoid weights, squared norms) for the expanded distance."""
    key = ("gram", metric.order)
    if key not in ds._cache:
        feats = feature_matrix(ds, metric)
        dx = ds.grid.spacing
        w = np.full(ds.grid.n_points, dx)
        w[0] = w[-1] = 0.5 * dx
        norms = np.einsum("ij,j,ij->i", feats, w, feats)
        ds._cache[key] = (feats, w, norms)
    return ds._cache[key]


def _profile_from(feats, w, norms, xf: np.ndarray) -> np.ndarray:
    wx = w * xf
    d2 = norms - 2.0 * (feats @ wx) + float(xf @ wx)
    return np.sqrt(np.maximum(d2, 0.0))


def distance_profile(ds: FunctionalDataset, x: Curve, metric: SemiMetric) -> np.ndarray:
    """Distances d(x, X_k) for all k, in dataset order."""
    if x.grid != ds.grid:
        raise GridMismatch("query curve does not match the dataset grid")
    feats, w, norms = _metric_state(ds, metric)
    xf = metric.transform(x.values, ds.grid.spacing)
    return _profile_from(feats, w, norms, xf)


def distance_profile_at(ds: FunctionalDataset, index: int, metric: SemiMetric) -> np.ndarray:
    """Distance profile from observation `index`, memoized on the dataset."""
    key = ("profile", metric.order, index)
    if key not in ds._cache:
        feats, w, norms = _metric_state(ds, metric)
        prof = _profile_from(feats, w, norms, feats[index])
        prof[index] = 0.0
        prof.flags.writeable = False
        ds._cache[key] = prof
    return ds._cache[key]


def mar_weights(ds: FunctionalDataset, distances: np.ndarray, h: float, kernel) -> np.ndarray:
    """w_k = zeta_k * K(d_k / h); zero outside the bandwidth or when unobserved."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    return ds.zetas * kernel(distances / h)


def weighted_ratio(weights: np.ndarray, values: np.ndarray) -> float:
    """sum_k w_k values_k / sum_k w_k with the exact constant fast path.

    When every value carrying positive weight is identical the analytic ratio
    is that constant; returning it directly keeps the identity exact in
    floating point.
    """
    total = float(np.sum(weights))
    if total <= 0.0:
        raise EmptyNeighborhood("no observed response inside the bandwidth")
    active = values[weights > 0]
    if active.size and np.all(active == active[0]):
        return float(active[0])
    return float(np.sum(weights * values) / total)
