"""Generative engine for the two continuous-time functional-data models.

Model "legendre": an Ornstein-Uhlenbeck state lifted to curves on [-1, 1]
through a piecewise-linear blend of Legendre polynomials.  Model "sine": the
state scales a fixed sine shape on [0, pi/3].  Responses follow a nonlinear
functional regression with additive noise; the response may be masked missing
at random with probability driven by the curve's energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecInvalid
from .funcdata import Curve, FunctionalDataset, Grid, Observation, _derivative

__all__ = [
    "OUParams",
    "simulate_ou",
    "num_index",
    "legendre_poly",
    "gamma_lift",
    "sine_shape",
    "response_value",
    "mar_probability",
    "calibrate_mar",
    "WienerDiff",
    "GaussianIid",
    "MarNone",
    "MarExpit",
    "SimSpec",
    "generate",
    "LEGENDRE_GRID",
    "SINE_GRID",
]

LEGENDRE_GRID = Grid(-1.0, 1.0, 400)
SINE_GRID = Grid(0.0, math.pi / 3.0, 100)


@dataclass(frozen=True)
class OUParams:
    """Mean-reverting diffusion dZ = theta (mu - Z) dt + sigma dW."""

    theta: float = 2.0
    mu: float = 5.0
    sigma: float = 7.0
    dt: float = 0.005
    z0: float = 5.0

    def __post_init__(self):
        if self.theta <= 0 or self.sigma <= 0 or self.dt <= 0:
            raise ValueError("theta, sigma and dt must be positive")

    @property
    def stationary_sd(self) -> float:
        return self.sigma / math.sqrt(2.0 * self.theta)


def _linear_recursion(z0: float, a: float, b: float, s: float, eps: np.ndarray) -> np.ndarray:
    """z_k = a z_{k-1} + b + s eps_k, vectorized in chunks when 0 < a < 1."""
    n = eps.size
    out = np.empty(n)
    if 0.0 < a < 1.0:
        # chunk length keeps a^{-j} below e^20 so the cumsum stays accurate
        m = max(1, int(20.0 / -math.log(a)))
        z = z0
        start = 0
        while start < n:
            stop = min(n, start + m)
            k = np.arange(1, stop - start + 1, dtype=float)
            ak = a**k
            conv = ak * np.cumsum(eps[start:stop] / ak)
            out[start:stop] = ak * z + b * (1.0 - ak) / (1.0 - a) + s * conv
            z = float(out[stop - 1])
            start = stop
    else:
        z = z0
        for i in range(n):
            z = a * z + b + s * float(eps[i])
            out[i] = z
    return out


def simulate_ou(
    params: OUParams,
    n_steps: int,
    rng: np.random.Generator,
    scheme: str = "exact",
    dt: float | None = None,
) -> np.ndarray:
    """Path Z_1..Z_n of the OU process at steps of size dt (default params.dt).

    "exact" draws from the Gaussian transition kernel, which is exact at any
    step size; "euler" is the first-order Euler-Maruyama approximation, kept
    for fidelity comparisons.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    dt = params.dt if dt is None else dt
    eps = rng.standard_normal(n_steps)
    if scheme == "exact":
        a = math.exp(-params.theta * dt)
        s = params.sigma * math.sqrt((1.0 - a * a) / (2.0 * params.theta))
        return _linear_recursion(params.z0, a, params.mu * (1.0 - a), s, eps)
    if scheme == "euler":
        a = 1.0 - params.theta * dt
        return _linear_recursion(
            params.z0, a, params.theta * params.mu * dt, params.sigma * math.sqrt(dt), eps
        )
    raise ValueError("scheme must be 'exact' or 'euler'")


def num_index(z) -> int:
    """Map 0, 1, -1, 2, -2, ... to 1, 2, 3, 4, 5, ... with sign(0) = 0."""
    s = (z > 0) - (z < 0)
    return int(round(1 + 2 * z * s - s * (1 + s) / 2))


def _num_index_arr(z: np.ndarray) -> np.ndarray:
    s = np.sign(z)
    return np.rint(1.0 + 2.0 * z * s - s * (1.0 + s) / 2.0).astype(int)


def _legendre_table(max_degree: int, s: np.ndarray) -> np.ndarray:
    """Rows P_0(s) .. P_max(s) by the Bonnet recurrence."""
    table = np.empty((max_degree + 1, s.size))
    table[0] = 1.0
    if max_degree >= 1:
        table[1] = s
    for j in range(1, max_degree):
        table[j + 1] = ((2 * j + 1) * s * table[j] - j * table[j - 1]) / (j + 1)
    return table


def legendre_poly(j: int, s):
    """Legendre polynomial of degree j at s (scalar or array)."""
    if j < 0:
        raise ValueError("degree must be nonnegative")
    scalar = np.isscalar(s)
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    vals = _legendre_table(j, arr)[j]
    return float(vals[0]) if scalar else vals


def _gamma_lift_batch(zs: np.ndarray, grid: Grid) -> np.ndarray:
    floors = np.floor(zs)
    frac = zs - floors
    deg_lo = _num_index_arr(floors)
    deg_hi = _num_index_arr(floors + 1.0)
    table = _legendre_table(int(max(deg_lo.max(), deg_hi.max())), grid.points)
    out = np.empty((zs.size, grid.n_points))
    # group rows sharing the same polynomial pair; states repeat heavily
    keys = deg_lo * (table.shape[0] + 1) + deg_hi
    for key in np.unique(keys):
        rows = keys == key
        lo, hi = int(key) // (table.shape[0] + 1), int(key) % (table.shape[0] + 1)
        out[rows] = np.outer(1.0 - frac[rows], table[lo]) + np.outer(frac[rows], table[hi])
    return out


def gamma_lift(z: float, grid: Grid = LEGENDRE_GRID) -> Curve:
    """Lift a real state to a curve: blend of two Legendre polynomials."""
    return Curve(grid, _gamma_lift_batch(np.array([float(z)]), grid)[0])


def _sine_shape_batch(zs: np.ndarray, grid: Grid) -> np.ndarray:
    shape = 1.0 - np.sin(grid.points - math.pi / 3.0)
    return np.outer(zs, shape)


def sine_shape(z: float, grid: Grid = SINE_GRID) -> Curve:
    """Curve z * (1 - sin(s - pi/3)) on the grid."""
    return Curve(grid, _sine_shape_batch(np.array([float(z)]), grid)[0])


def _trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.n_points, grid.spacing)
    w[0] = w[-1] = 0.5 * grid.spacing
    return w


def _response_batch(values: np.ndarray, grid: Grid, response: str) -> np.ndarray:
    w = _trapezoid_weights(grid)
    if response == "integral_square":
        return np.einsum("ij,j,ij->i", values, w, values)
    if response == "deriv_integral_square":
        integral = _derivative(values, grid.spacing, 1) @ w
        return integral * integral
    raise ValueError(f"unknown response operator {response!r}")


def response_value(x: Curve, response: str) -> float:
    """True regression operator value at a curve."""
    return float(_response_batch(x.values[None, :], x.grid, response)[0])


def _expit(u):
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 0, 1.0 / (1.0 + np.exp(-np.abs(u))), np.exp(-np.abs(u)) / (1.0 + np.exp(-np.abs(u))))
    return out if out.ndim else float(out)


def _energy_batch(values: np.ndarray, grid: Grid) -> np.ndarray:
    w = _trapezoid_weights(grid)
    return np.einsum("ij,j,ij->i", values, w, values)


def mar_probability(x: Curve, offset: float = 0.0) -> float:
    """Observation probability expit(integral of x^2 - offset)."""
    return float(_expit(_energy_batch(x.values[None, :], x.grid)[0] - offset))


@dataclass(frozen=True)
class WienerDiff:
    """Noise read literally as Wiener increments at (roughly) unit lag.

    A Wiener path is simulated on the observation clock and differenced at
    ceil(1/delta) observations, so at delta = 1 the increments are i.i.d.
    standard normal while at finer meshes they overlap and are dependent.
    """

    kind: str = "wiener_diff"


@dataclass(frozen=True)
class GaussianIid:
    """Independent N(0, sd^2) noise; sd = 0.075 reads N(0, 0.075) as an sd."""

    sd: float = 0.075
    kind: str = "gaussian_iid"


@dataclass(frozen=True)
class MarNone:
    """Complete data: every response observed."""

    kind: str = "none"


@dataclass(frozen=True)
class MarExpit:
    """zeta ~ Bernoulli(expit((integral of x^2 - offset) / scale)).

    scale = 1 and offset = 0 give the raw energy law; calibrated offsets hit a
    target missing rate, and scaling by the pilot energy spread keeps the
    missingness gradual instead of a hard threshold in curve energy.
    """

    offset: float = 0.0
    scale: float = 1.0
    kind: str = "expit"


def _noise_from_dict(d: dict):
    if d["kind"] == "wiener_diff":
        return WienerDiff()
    if d["kind"] == "gaussian_iid":
        return GaussianIid(sd=float(d.get("sd", 0.075)))
    raise ValueError(f"unknown noise kind {d['kind']!r}")


def _mar_from_dict(d: dict):
    if d["kind"] == "none":
        return MarNone()
    if d["kind"] == "expit":
        return MarExpit(offset=float(d.get("offset", 0.0)), scale=float(d.get("scale", 1.0)))
    raise ValueError(f"unknown MAR kind {d['kind']!r}")


_MODEL_GRIDS = {"legendre": LEGENDRE_GRID, "sine": SINE_GRID}
_MODEL_RESPONSES = {"legendre": "integral_square", "sine": "deriv_integral_square"}
_MODEL_NOISE = {"legendre": WienerDiff(), "sine": GaussianIid()}


@dataclass(frozen=True)
class SimSpec:
    """Complete description of one synthetic dataset draw."""

    model: str
    T: float
    delta: float
    seed: int
    ou: OUParams = field(default_factory=OUParams)
    response: str | None = None
    noise: WienerDiff | GaussianIid | None = None
    mar: MarNone | MarExpit = field(default_factory=MarNone)
    grid: Grid | None = None
    ou_scheme: str = "exact"

    def __post_init__(self):
        if self.model not in _MODEL_GRIDS:
            raise SpecInvalid(f"unknown model {self.model!r}")
        default_grid = _MODEL_GRIDS[self.model]
        if self.grid is None:
            object.__setattr__(self, "grid", default_grid)
        elif self.grid != default_grid:
            raise SpecInvalid(
                f"model {self.model!r} requires grid "
                f"[{default_grid.start}, {default_grid.end}] x {default_grid.n_points}"
            )
        if self.response is None:
            object.__setattr__(self, "response", _MODEL_RESPONSES[self.model])
        if self.noise is None:
            object.__setattr__(self, "noise", _MODEL_NOISE[self.model])
        if self.delta <= 0:
            raise SpecInvalid("sampling mesh delta must be positive")
        n = self.T / self.delta
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise SpecInvalid(f"T = {self.T} is not an integer multiple of delta = {self.delta}")

    @property
    def n(self) -> int:
        return int(round(self.T / self.delta))

    def to_dict(self) -> dict:
        noise = {"kind": self.noise.kind}
        if isinstance(self.noise, GaussianIid):
            noise["sd"] = self.noise.sd
        mar = {"kind": self.mar.kind}
        if isinstance(self.mar, MarExpit):
            mar["offset"] = self.mar.offset
            mar["scale"] = self.mar.scale
        return {
            "model": self.model,
            "T": self.T,
            "delta": self.delta,
            "seed": self.seed,
            "ou": {
                "theta": self.ou.theta,
                "mu": self.ou.mu,
                "sigma": self.ou.sigma,
                "dt": self.ou.dt,
                "z0": self.ou.z0,
            },
            "response": self.response,
            "noise": noise,
            "mar": mar,
            "ou_scheme": self.ou_scheme,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimSpec":
        ou = OUParams(**d["ou"]) if "ou" in d else OUParams()
        return cls(
            model=d["model"],
            T=float(d["T"]),
            delta=float(d["delta"]),
            seed=int(d["seed"]),
            ou=ou,
            response=d.get("response"),
            noise=_noise_from_dict(d["noise"]) if "noise" in d else None,
            mar=_mar_from_dict(d["mar"]) if "mar" in d else MarNone(),
            ou_scheme=d.get("ou_scheme", "exact"),
        )


def calibrate_mar(
    model: str,
    target_rate: float,
    seed: int,
    ou: OUParams | None = None,
    n_pilot: int = 100_000,
    standardize: bool = True,
) -> MarExpit:
    """MAR law whose mean missing rate E[1 - p(X)] equals target_rate.

    The offset is solved by bisection against a pilot of i.i.d. draws from the
    OU stationary law, so the achieved pilot rate matches the target to
    bisection precision.  With standardize=True the expit argument is divided
    by the pilot standard deviation of the curve energy first; otherwise a
    rate of 50% degenerates into a hard threshold in energy that removes whole
    regions of the design.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target rate must lie strictly between 0 and 1")
    ou = ou or OUParams()
    grid = _MODEL_GRIDS[model]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    zs = rng.normal(ou.mu, ou.stationary_sd, n_pilot)
    energies = np.empty(n_pilot)
    chunk = 10_000
    for start in range(0, n_pilot, chunk):
        zc = zs[start : start + chunk]
        if model == "legendre":
            vals = _gamma_lift_batch(zc, grid)
        else:
            vals = _sine_shape_batch(zc, grid)
        energies[start : start + chunk] = _energy_batch(vals, grid)
    scale = float(np.std(energies)) if standardize else 1.0
    scale = max(scale, 1e-12)

    def missing_rate(c: float) -> float:
        return float(np.mean(1.0 - _expit((energies - c) / scale)))

    lo, hi = -20.0 * scale, 20.0 * scale
    while missing_rate(lo) > target_rate:
        lo *= 2.0
    while missing_rate(hi) < target_rate:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if missing_rate(mid) < target_rate:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(hi)):
            break
    return MarExpit(offset=0.5 * (lo + hi), scale=scale)


def generate(spec: SimSpec) -> FunctionalDataset:
    """Draw one dataset from the spec; bit-reproducible from the seed.

    The OU shocks, the response noise and the MAR coin flips use independent
    substreams, so toggling the MAR mechanism leaves the covariate path and
    responses untouched.
    """
    n = spec.n
    grid = spec.grid
    ou_ss, noise_ss, mar_ss = np.random.SeedSequence(spec.seed).spawn(3)
    rng_ou = np.random.Generator(np.random.Philox(ou_ss))
    rng_noise = np.random.Generator(np.random.Philox(noise_ss))
    rng_mar = np.random.Generator(np.random.Philox(mar_ss))

    if spec.ou_scheme == "euler" and spec.ou.dt < spec.delta:
        # refine Euler steps to the OU clock, then keep every observation instant
        per = max(1, int(round(spec.delta / spec.ou.dt)))
        z_fine = simulate_ou(spec.ou, n * per, rng_ou, "euler", dt=spec.delta / per)
        z = z_fine[per - 1 :: per]
    else:
        z = simulate_ou(spec.ou, n, rng_ou, spec.ou_scheme, dt=spec.delta)

    if spec.model == "legendre":
        values = _gamma_lift_batch(z, grid)
    else:
        values = _sine_shape_batch(z, grid)

    m_vals = _response_batch(values, grid, spec.response)
    if isinstance(spec.noise, WienerDiff):
        lag = int(math.ceil(1.0 / spec.delta - 1e-9))
        incs = rng_noise.standard_normal(n + lag) * math.sqrt(spec.delta)
        u = np.concatenate(([0.0], np.cumsum(incs)))
        eps = u[lag + 1 : lag + n + 1] - u[1 : n + 1]
    else:
        eps = rng_noise.normal(0.0, spec.noise.sd, n)
    y = m_vals + eps

    if isinstance(spec.mar, MarExpit):
        probs = _expit((_energy_batch(values, grid) - spec.mar.offset) / spec.mar.scale)
        zeta = (rng_mar.random(n) < probs).astype(int)
    else:
        zeta = np.ones(n, dtype=int)

    values.flags.writeable = False  # rows become read-only views shared by the curves
    observations = [
        Observation(
            t=(k + 1) * spec.delta,
            x=Curve(grid, values[k]),
            y=float(y[k]) if zeta[k] == 1 else None,
            zeta=int(zeta[k]),
        )
        for k in range(n)
    ]
    ds = FunctionalDataset(observations, spec.delta)
    ds._cache["values"] = values
    return ds
