"""Data model for sampled curves and incomplete functional time series.

A curve is a real function sampled on a fixed uniform grid.  A dataset is a
regularly spaced sequence of observations (t_k, X_k, Y_k, zeta_k) where the
response Y_k is present exactly when the indicator zeta_k is 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import GridTooCoarse, SpecInvalid

__all__ = [
    "Grid",
    "Curve",
    "Observation",
    "FunctionalDataset",
    "integrate_curve",
    "differentiate_curve",
    "write_dataset_csv",
    "read_dataset_csv",
    "write_curve_csv",
    "read_curve_csv",
]

_FMT = "%.17g"  # decimal serialization, round-trips binary64 exactly


@dataclass(frozen=True)
class Grid:
    """Uniform abscissa grid on [start, end] with n_points samples."""

    start: float
    end: float
    n_points: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"grid needs start < end, got [{self.start}, {self.end}]")
        if self.n_points < 2:
            raise ValueError("grid needs at least 2 points")

    @property
    def spacing(self) -> float:
        return (self.end - self.start) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.linspace(self.start, self.end, self.n_points)
        pts.flags.writeable = False
        return pts


@dataclass(frozen=True, eq=False)
class Curve:
    """A real function sampled on a shared Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(
                f"curve has {vals.shape} values for a {self.grid.n_points}-point grid"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("curve values must be finite")
        # copy only when the caller still holds a mutable reference
        if vals is self.values and vals.flags.writeable:
            vals = vals.copy()
        if vals.flags.writeable:
            vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class Observation:
    """One time point: covariate curve, optional response, missingness bit."""

    t: float
    x: Curve
    y: float | None
    zeta: int

    def __post_init__(self):
        if self.zeta not in (0, 1):
            raise ValueError("zeta must be 0 or 1")
        if (self.zeta == 1) != (self.y is not None):
            raise ValueError("y must be present iff zeta == 1")
        if self.y is not None and not np.isfinite(self.y):
            raise ValueError("observed response must be finite")


class FunctionalDataset:
    """Ordered observations at t_k = k * delta sharing one curve grid.

    Immutable after construction; derived arrays and per-semimetric feature
    matrices are memoized on first use, so repeated queries are cheap.
    """

    def __init__(self, observations: Sequence[Observation], delta: float):
        obs = tuple(observations)
        if len(obs) < 1:
            raise SpecInvalid("dataset needs at least one observation")
        if delta <= 0:
            raise SpecInvalid("sampling mesh delta must be positive")
        grid = obs[0].x.grid
        for k, o in enumerate(obs, start=1):
            if o.x.grid != grid:
                raise SpecInvalid("all curves must share one grid")
            if abs(o.t - k * delta) > 1e-9 * max(1.0, abs(k * delta)):
                raise SpecInvalid(
                    f"observation {k} at t={o.t}, expected t_k = k*delta = {k * delta}"
                )
        self._observations = obs
        self._delta = float(delta)
        self._cache: dict = {}

    @property
    def observations(self) -> tuple[Observation, ...]:
        return self._observations

    @property
    def delta(self) -> float:
        return self._delta

    @property
    def n(self) -> int:
        return len(self._observations)

    @property
    def T(self) -> float:
        return self.n * self._delta

    @property
    def grid(self) -> Grid:
        return self._observations[0].x.grid

    def __len__(self) -> int:
        return self.n

    @property
    def values_matrix(self) -> np.ndarray:
        """n x p matrix of curve values in dataset order."""
        key = "values"
        if key not in self._cache:
            m = np.vstack([o.x.values for o in self._observations])
            m.flags.writeable = False
            self._cache[key] = m
        return self._cache[key]

    @property
    def zetas(self) -> np.ndarray:
        key = "zetas"
        if key not in self._cache:
            z = np.array([o.zeta for o in self._observations], dtype=float)
            z.flags.writeable = False
            self._cache[key] = z
        return self._cache[key]

    @property
    def responses(self) -> np.ndarray:
        """Responses in dataset order, NaN where missing."""
        key = "responses"
        if key not in self._cache:
            y = np.array(
                [o.y if o.y is not None else np.nan for o in self._observations],
                dtype=float,
            )
            y.flags.writeable = False
            self._cache[key] = y
        return self._cache[key]

    @property
    def times(self) -> np.ndarray:
        key = "times"
        if key not in self._cache:
            t = np.array([o.t for o in self._observations], dtype=float)
            t.flags.writeable = False
            self._cache[key] = t
        return self._cache[key]

    def n_observed(self) -> int:
        return int(np.sum(self.zetas))


def integrate_curve(c: Curve) -> float:
    """Trapezoidal approximation of the integral of c over its grid interval."""
    return float(np.trapezoid(c.values, dx=c.grid.spacing))


def _derivative(values: np.ndarray, spacing: float, order: int) -> np.ndarray:
    """Finite-difference derivative along the last axis.

    Order 1 uses central differences with second-order one-sided stencils at
    the endpoints; order 2 uses the direct 3-point stencil in the interior and
    second-order one-sided 4-point stencils at the endpoints.
    """
    n = values.shape[-1]
    if n < order + 2:
        raise GridTooCoarse(f"need at least {order + 2} grid points, got {n}")
    if order == 1:
        return np.gradient(values, spacing, axis=-1, edge_order=2)
    if order == 2:
        h2 = spacing * spacing
        out = np.empty_like(values, dtype=float)
        out[..., 1:-1] = (values[..., :-2] - 2.0 * values[..., 1:-1] + values[..., 2:]) / h2
        out[..., 0] = (
            2.0 * values[..., 0] - 5.0 * values[..., 1] + 4.0 * values[..., 2] - values[..., 3]
        ) / h2
        out[..., -1] = (
            2.0 * values[..., -1] - 5.0 * values[..., -2] + 4.0 * values[..., -3] - values[..., -4]
        ) / h2
        return out
    raise ValueError("derivative order must be 1 or 2")


def differentiate_curve(c: Curve, order: int) -> Curve:
    """Finite-difference derivative of a curve on its own grid."""
    return Curve(c.grid, _derivative(c.values, c.grid.spacing, order))


# ---------------------------------------------------------------------------
# CSV serialization.  Layout:
#   # grid,<start>,<end>,<n_points>,<delta>
#   t,zeta,y,v_0,...,v_{p-1}
#   <rows>
# The y field is empty when zeta = 0.  All reals use 17 significant digits,
# which round-trips IEEE doubles exactly.
# ---------------------------------------------------------------------------


def _f(x: float) -> str:
    return _FMT % x


def write_dataset_csv(ds: FunctionalDataset, path_or_buf) -> None:
    grid = ds.grid
    lines = [
        "# grid,%s,%s,%d,%s" % (_f(grid.start), _f(grid.end), grid.n_points, _f(ds.delta)),
        "t,zeta,y," + ",".join(f"v_{i}" for i in range(grid.n_points)),
    ]
    for o in ds.observations:
        y = _f(o.y) if o.zeta == 1 else ""
        lines.append(
            ",".join([_f(o.t), str(o.zeta), y] + [_f(v) for v in o.x.values])
        )
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


def dataset_to_csv(ds: FunctionalDataset) -> str:
    buf = io.StringIO()
    write_dataset_csv(ds, buf)
    return buf.getvalue()


def read_dataset_csv(path_or_buf) -> FunctionalDataset:
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf) as fh:
            text = fh.read()
    return dataset_from_csv(text)


def dataset_from_csv(text: str) -> FunctionalDataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3 or not lines[0].startswith("# grid,"):
        raise ValueError("dataset CSV must start with a '# grid,...' comment row")
    start, end, n_points, delta = lines[0][len("# grid,"):].split(",")
    grid = Grid(float(start), float(end), int(n_points))
    observations = []
    for ln in lines[2:]:
        parts = ln.split(",")
        t, zeta, y = float(parts[0]), int(parts[1]), parts[2]
        vals = np.array([float(v) for v in parts[3:]], dtype=float)
        observations.append(
            Observation(t=t, x=Curve(grid, vals), y=float(y) if zeta == 1 else None, zeta=zeta)
        )
    return FunctionalDataset(observations, float(delta))


def write_curve_csv(c: Curve, path_or_buf) -> None:
    grid = c.grid
    text = (
        "# grid,%s,%s,%d\n" % (_f(grid.start), _f(grid.end), grid.n_points)
        + ",".join(f"v_{i}" for i in range(grid.n_points))
        + "\n"
        + ",".join(_f(v) for v in c.values)
        + "\n"
    )
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


def read_curve_csv(path_or_buf) -> Curve:
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3 or not lines[0].startswith("# grid,"):
        raise ValueError("curve CSV must start with a '# grid,...' comment row")
    start, end, n_points = lines[0][len("# grid,"):].split(",")
    vals = np.array([float(v) for v in lines[2].split(",")], dtype=float)
    return Curve(Grid(float(start), float(end), int(n_points)), vals)
