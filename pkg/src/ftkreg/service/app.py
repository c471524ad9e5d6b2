"""Service handlers and FastAPI wiring.

The handlers are plain functions on the pydantic models; the CLI calls them
in-process and the HTTP endpoints delegate to them, so both clients see the
same behavior.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import FtkregError
from ..estimator import Identity, IndicatorLeq, estimate_quantile, regress, _resolve_h
from ..funcdata import dataset_from_csv, dataset_to_csv
from ..harness import Sim1Config, Sim2Config, run_sim1, run_sim2
from ..inference import Bootstrap, CIRequest, ci_asymptotic, ci_bootstrap, ci_quantile
from ..simulate import generate
from .schemas import (
    CIRequestModel,
    CIResponse,
    EstimateRequest,
    EstimateResponse,
    HealthResponse,
    Sim1Request,
    Sim1Response,
    Sim1Rep,
    Sim1Row,
    Sim2Request,
    Sim2Response,
    Sim2Rep,
    Sim2Row,
    SimulateRequest,
    SimulateResponse,
)


def parse_psi(spec: str):
    """Parse "identity", "cdf:<y>" or "quantile:<alpha>"."""
    if spec == "identity":
        return Identity()
    kind, _, arg = spec.partition(":")
    if kind == "cdf" and arg:
        return IndicatorLeq(float(arg))
    if kind == "quantile" and arg:
        alpha = float(arg)
        if not 0.0 < alpha < 1.0:
            raise ValueError("quantile order must lie in (0, 1)")
        return ("quantile", alpha)
    raise ValueError(f"cannot parse psi {spec!r}; use identity, cdf:<y> or quantile:<a>")


def handle_simulate(req: SimulateRequest) -> SimulateResponse:
    ds = generate(req.spec.to_simspec())
    return SimulateResponse(csv=dataset_to_csv(ds), n=ds.n, observed=ds.n_observed())


def handle_estimate(req: EstimateRequest) -> EstimateResponse:
    ds = dataset_from_csv(req.dataset_csv)
    x = req.x.to_curve()
    cfg = req.config.to_config()
    psi = parse_psi(req.psi)
    h = _resolve_h(ds, x, cfg, None)
    if isinstance(psi, tuple):
        value = estimate_quantile(ds, x, psi[1], cfg, h=h)
    else:
        value = regress(ds, x, psi, cfg, h=h)
    return EstimateResponse(value=value, h=h)


def handle_ci(req: CIRequestModel) -> CIResponse:
    ds = dataset_from_csv(req.dataset_csv)
    x = req.x.to_curve()
    cfg = req.config.to_config()
    psi = parse_psi(req.psi)
    alpha_level = 1.0 - req.level
    if isinstance(psi, tuple):
        if req.method == "bootstrap":
            raise ValueError("bootstrap intervals are not defined for quantiles")
        result = ci_quantile(ds, x, psi[1], alpha_level, cfg)
    elif req.method == "asymptotic":
        result = ci_asymptotic(ds, CIRequest(x=x, psi=psi, alpha_level=alpha_level), cfg)
    else:
        request = CIRequest(
            x=x,
            psi=psi,
            alpha_level=alpha_level,
            method=Bootstrap(B=req.B, weight_law=req.weight_law),
        )
        result = ci_bootstrap(ds, request, cfg, seed=req.seed)
    comps = result.components
    return CIResponse(
        point=result.point,
        lower=result.lower,
        upper=result.upper,
        method=result.method,
        h=result.h,
        p_hat=comps.p_hat,
        fx_hat=comps.fx_hat,
        m1=comps.m1_hat,
        m2=comps.m2_hat,
        w2bar=comps.w2bar_hat,
        quantile_used=result.quantile_used,
    )


def handle_sim1(req: Sim1Request) -> Sim1Response:
    cfg = Sim1Config.from_dict(req.config.model_dump())
    res = run_sim1(cfg)
    return Sim1Response(
        rows=[Sim1Row(**r) for r in res["rows"]],
        replicates=[Sim1Rep(**r) for r in res["replicates"]],
    )


def handle_sim2(req: Sim2Request) -> Sim2Response:
    cfg = Sim2Config.from_dict(req.config.model_dump())
    res = run_sim2(cfg)
    return Sim2Response(
        rows=[Sim2Row(**r) for r in res["rows"]],
        delta_star={"%g" % rate: d for rate, d in res["delta_star"].items()},
        replicates=[Sim2Rep(**r) for r in res["replicates"]],
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="ftkreg",
        version=__version__,
        description=(
            "Kernel regression for sampled continuous-time functional data "
            "with missing-at-random responses"
        ),
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        return _run(handle_simulate, req)

    @app.post("/estimate", response_model=EstimateResponse)
    def estimate(req: EstimateRequest) -> EstimateResponse:
        return _run(handle_estimate, req)

    @app.post("/ci", response_model=CIResponse)
    def ci(req: CIRequestModel) -> CIResponse:
        return _run(handle_ci, req)

    @app.post("/sim1", response_model=Sim1Response)
    def sim1(req: Sim1Request) -> Sim1Response:
        return _run(handle_sim1, req)

    @app.post("/sim2", response_model=Sim2Response)
    def sim2(req: Sim2Request) -> Sim2Response:
        return _run(handle_sim2, req)

    return app


def _run(handler, req):
    try:
        return handler(req)
    except FtkregError as exc:
        raise HTTPException(status_code=422, detail=f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
