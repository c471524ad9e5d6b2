"""Pydantic request/response models for the service endpoints.

Datasets travel as the canonical CSV text (see funcdata), so file-based and
HTTP clients share one serialization with exact float round-trips.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, field_validator

from ..estimator import EstimatorConfig
from ..funcdata import Curve, Grid
from ..simulate import SimSpec


class HealthResponse(BaseModel):
    status: str
    version: str


class GridModel(BaseModel):
    start: float
    end: float
    n_points: int

    def to_grid(self) -> Grid:
        return Grid(self.start, self.end, self.n_points)


class CurveModel(BaseModel):
    grid: GridModel
    values: list[float]

    def to_curve(self) -> Curve:
        return Curve(self.grid.to_grid(), self.values)

    @classmethod
    def from_curve(cls, c: Curve) -> "CurveModel":
        return cls(
            grid=GridModel(start=c.grid.start, end=c.grid.end, n_points=c.grid.n_points),
            values=[float(v) for v in c.values],
        )


class ConfigModel(BaseModel):
    """Estimator configuration: kernel, semi-metric and bandwidth rule."""

    kernel: str = "quadratic"
    semimetric: str = "l2"
    bandwidth: dict = Field(default_factory=lambda: {"knn": [5, 10, 15, 20, 30, 50]})

    def to_config(self) -> EstimatorConfig:
        return EstimatorConfig.from_dict(self.model_dump())


class OUModel(BaseModel):
    theta: float = 2.0
    mu: float = 5.0
    sigma: float = 7.0
    dt: float = 0.005
    z0: float = 5.0


class NoiseModel(BaseModel):
    kind: str = "wiener_diff"
    sd: float = 0.075


class MarModel(BaseModel):
    kind: str = "none"
    offset: float = 0.0
    scale: float = 1.0


class SimSpecModel(BaseModel):
    """JSON form of a simulation spec; see SimSpec for field semantics."""

    model: str
    T: float
    delta: float
    seed: int
    ou: OUModel = Field(default_factory=OUModel)
    response: str | None = None
    noise: NoiseModel | None = None
    mar: MarModel = Field(default_factory=MarModel)
    ou_scheme: str = "exact"

    @field_validator("model")
    @classmethod
    def _known_model(cls, v):
        if v not in ("legendre", "sine"):
            raise ValueError("model must be 'legendre' or 'sine'")
        return v

    def to_simspec(self) -> SimSpec:
        d = self.model_dump()
        if self.noise is None:
            d.pop("noise")
        return SimSpec.from_dict(d)


class SimulateRequest(BaseModel):
    spec: SimSpecModel


class SimulateResponse(BaseModel):
    csv: str
    n: int
    observed: int


class EstimateRequest(BaseModel):
    """Point estimate of the regression operator at one query curve.

    psi selects the target: "identity" for the regression function,
    "cdf:<y>" for the conditional CDF at y, "quantile:<alpha>" for the
    conditional quantile.
    """

    dataset_csv: str
    x: CurveModel
    psi: str = "identity"
    config: ConfigModel = Field(default_factory=ConfigModel)


class EstimateResponse(BaseModel):
    value: float
    h: float


class CIRequestModel(BaseModel):
    dataset_csv: str
    x: CurveModel
    psi: str = "identity"
    level: float = 0.95
    method: str = "asymptotic"
    B: int = 1000
    weight_law: str = "unit_exponential"
    seed: int = 0
    config: ConfigModel = Field(default_factory=ConfigModel)

    @field_validator("method")
    @classmethod
    def _known_method(cls, v):
        if v not in ("asymptotic", "bootstrap"):
            raise ValueError("method must be 'asymptotic' or 'bootstrap'")
        return v


class CIResponse(BaseModel):
    point: float
    lower: float
    upper: float
    method: str
    h: float
    p_hat: float
    fx_hat: float
    m1: float
    m2: float
    w2bar: float
    quantile_used: float


class Sim1ConfigModel(BaseModel):
    t_values: list[float] = [50.0, 200.0, 1000.0]
    mar_rates: list[float] = [0.2, 0.4]
    delta: float = 0.005
    replications: int = 100
    seed: int = 0
    workers: int = 1


class Sim1Request(BaseModel):
    config: Sim1ConfigModel


class Sim1Row(BaseModel):
    T: float
    mar: float
    stat: str
    continuous: float
    discrete: float
    failrate: float


class Sim1Rep(BaseModel):
    T: float
    mar: float
    rep: int
    continuous: float
    discrete: float
    failed: int


class Sim1Response(BaseModel):
    rows: list[Sim1Row]
    replicates: list[Sim1Rep]


class Sim2ConfigModel(BaseModel):
    n_fixed: int = 200
    delta_grid: list[float] = [round(0.10 + 0.05 * i, 2) for i in range(11)]
    eval_curves: int = 50
    replications: int = 100
    mar_rates: list[float] = [0.0, 0.1, 0.5]
    seed: int = 0
    workers: int = 1


class Sim2Request(BaseModel):
    config: Sim2ConfigModel


class Sim2Row(BaseModel):
    mar: float
    delta: float
    mise: float
    se_of_mise: float


class Sim2Rep(BaseModel):
    mar: float
    delta: float
    rep: int
    mise: float
    failures: int


class Sim2Response(BaseModel):
    rows: list[Sim2Row]
    delta_star: dict[str, float]
    replicates: list[Sim2Rep]
