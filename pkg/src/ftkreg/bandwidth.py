"""Bandwidth selection: fixed values or local cross-validation on k-nearest neighbours.

The kNN rule turns a neighbour count kappa into a radius (the distance to the
kappa-th nearest observed-response curve, nudged so that point sits inside the
closed ball) and scores each kappa by leave-one-out prediction error over the
observed-response curves inside that ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _nw
from .errors import EmptyNeighborhood, InsufficientData
from .funcdata import Curve, FunctionalDataset
from .kernels import QuadraticKernel, SemiMetric

__all__ = ["BandwidthRule", "Fixed", "KnnCv", "resolve_bandwidth", "DEFAULT_KAPPA_GRID"]

DEFAULT_KAPPA_GRID = (5, 10, 15, 20, 30, 50)

_NUDGE = 1e-12  # relative, keeps the kappa-th neighbour inside the closed ball


class BandwidthRule:
    """Marker base for bandwidth rules; see Fixed and KnnCv."""

    @staticmethod
    def from_dict(d: dict) -> "BandwidthRule":
        if "fixed" in d:
            return Fixed(float(d["fixed"]))
        if "knn" in d:
            knn = d["knn"]
            if isinstance(knn, dict):
                return KnnCv(
                    kappa_grid=tuple(int(k) for k in knn.get("grid", DEFAULT_KAPPA_GRID)),
                    loo_cap=knn.get("loo_cap"),
                    score=knn.get("score", "sum"),
                )
            return KnnCv(kappa_grid=tuple(int(k) for k in knn))
        raise ValueError("bandwidth config needs a 'fixed' or 'knn' key")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Fixed(BandwidthRule):
    """A constant bandwidth h > 0."""

    h: float

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("fixed bandwidth must be positive")

    def to_dict(self) -> dict:
        return {"fixed": self.h}


@dataclass(frozen=True)
class KnnCv(BandwidthRule):
    """Local leave-one-out cross-validation over a grid of neighbour counts.

    kappa_grid is capped at one less than the number of observed-response
    observations.  loo_cap, when set, bounds the number of leave-one-out
    evaluations per kappa (points picked at evenly spread distance ranks),
    trading exactness of the score for runtime on large datasets.  score is
    "sum" (total squared error over the neighbourhood) or "mean".
    """

    kappa_grid: tuple[int, ...] = DEFAULT_KAPPA_GRID
    loo_cap: int | None = None
    score: str = "sum"

    def __post_init__(self):
        if not self.kappa_grid:
            raise ValueError("kappa grid must be nonempty")
        if any(k < 1 for k in self.kappa_grid):
            raise ValueError("kappa values must be positive")
        if self.score not in ("sum", "mean"):
            raise ValueError("score must be 'sum' or 'mean'")

    def to_dict(self) -> dict:
        d: dict = {"knn": {"grid": list(self.kappa_grid), "score": self.score}}
        if self.loo_cap is not None:
            d["knn"]["loo_cap"] = self.loo_cap
        return d


def _nudged_radius(sorted_d: np.ndarray, kappa: int) -> float:
    """Distance to the kappa-th neighbour, pushed just past it; never zero."""
    v = float(sorted_d[kappa - 1])
    if v == 0.0:
        positive = sorted_d[sorted_d > 0.0]
        if positive.size == 0:
            raise InsufficientData("all candidate curves coincide with the query")
        v = float(positive[0])
    return v * (1.0 + _NUDGE)


def resolve_bandwidth(
    ds: FunctionalDataset,
    x: Curve,
    rule: BandwidthRule,
    metric: SemiMetric,
    kernel: QuadraticKernel | None = None,
) -> float:
    """Turn a bandwidth rule into a radius h > 0 at the query point.

    For KnnCv the returned radius is at least the distance to the nearest
    observed-response curve, so the regression neighbourhood is never empty.
    """
    if isinstance(rule, Fixed):
        return rule.h
    if not isinstance(rule, KnnCv):
        raise TypeError(f"unknown bandwidth rule {rule!r}")
    kernel = kernel or QuadraticKernel()

    obs_idx = np.flatnonzero(ds.zetas == 1.0)
    n_obs = obs_idx.size
    kappas = sorted({k for k in rule.kappa_grid if k <= n_obs - 1})
    if not kappas:
        raise InsufficientData(
            f"need more than min(kappa_grid) observed responses, have {n_obs}"
        )

    d_x = _nw.distance_profile(ds, x, metric)[obs_idx]
    order = np.argsort(d_x, kind="stable")
    sorted_dx = d_x[order]
    y_filled = np.where(ds.zetas == 1.0, ds.responses, 0.0)

    # Per-candidate leave-one-out state, shared across kappa values.
    sorted_profiles: dict[int, np.ndarray] = {}

    def loo_error(j: int, kappa: int) -> float:
        idx = int(obs_idx[j])
        prof = _nw.distance_profile_at(ds, idx, metric)
        if j not in sorted_profiles:
            d_others = prof[obs_idx[obs_idx != idx]]
            sorted_profiles[j] = np.sort(d_others)
        h_j = _nudged_radius(sorted_profiles[j], kappa)
        w = _nw.mar_weights(ds, prof, h_j, kernel)
        w = w.copy()
        w[idx] = 0.0
        pred = _nw.weighted_ratio(w, y_filled)
        resid = float(ds.responses[idx]) - pred
        return resid * resid

    best_kappa = None
    best_score = np.inf
    for kappa in kappas:
        h_k = _nudged_radius(sorted_dx, kappa)
        in_ball = int(np.searchsorted(sorted_dx, h_k, side="right"))
        ranks = np.arange(in_ball)
        if rule.loo_cap is not None and in_ball > rule.loo_cap:
            ranks = np.unique(np.linspace(0, in_ball - 1, rule.loo_cap).round().astype(int))
        try:
            errors = [loo_error(int(order[r]), kappa) for r in ranks]
        except EmptyNeighborhood:
            continue
        if not errors:
            continue
        score = float(np.sum(errors))
        if rule.score == "mean":
            score /= len(errors)
        if score < best_score:
            best_score = score
            best_kappa = kappa
    if best_kappa is None:
        raise InsufficientData("cross-validation could not score any kappa")
    return _nudged_radius(sorted_dx, best_kappa)
