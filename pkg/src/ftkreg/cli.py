"""Command-line client for the ftkreg service.

Each data command builds the same pydantic request the HTTP API accepts and
either calls the service layer in-process (default) or posts it to a running
server given with --server.  Outputs are byte-identical either way.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__
from .errors import FtkregError
from .funcdata import read_curve_csv
from .harness import write_sim1_outputs, write_sim2_outputs
from .service import schemas
from .service.app import (
    handle_ci,
    handle_estimate,
    handle_sim1,
    handle_sim2,
    handle_simulate,
)

_FMT = "%.17g"


def _call(server: str | None, path: str, handler, request, response_model):
    if server is None:
        return handler(request)
    import httpx

    resp = httpx.post(
        server.rstrip("/") + path, json=request.model_dump(), timeout=None
    )
    if resp.status_code != 200:
        raise click.ClickException(f"server error {resp.status_code}: {resp.text}")
    return response_model.model_validate(resp.json())


def _config_model(kernel: str, semimetric: str, bandwidth: str) -> schemas.ConfigModel:
    """Parse --bandwidth fixed:<h> or knn:<k1,k2,...> into a config model."""
    kind, _, arg = bandwidth.partition(":")
    if kind == "fixed" and arg:
        bw = {"fixed": float(arg)}
    elif kind == "knn" and arg:
        bw = {"knn": [int(k) for k in arg.split(",")]}
    else:
        raise click.ClickException(
            f"cannot parse bandwidth {bandwidth!r}; use fixed:<h> or knn:<k1,k2,...>"
        )
    return schemas.ConfigModel(kernel=kernel, semimetric=semimetric, bandwidth=bw)


@click.group()
@click.version_option(version=__version__, prog_name="ftkreg")
def main():
    """Kernel regression for functional data with missing-at-random responses."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON file with the simulation spec.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Destination CSV for the generated dataset.")
@click.option("--server", default=None, help="Base URL of a running ftkreg service.")
def simulate(spec_path, out_path, server):
    """Draw a synthetic dataset and write it as CSV."""
    with open(spec_path) as fh:
        spec = json.load(fh)
    req = schemas.SimulateRequest(spec=schemas.SimSpecModel(**spec))
    resp = _call(server, "/simulate", handle_simulate, req, schemas.SimulateResponse)
    with open(out_path, "w") as fh:
        fh.write(resp.csv)
    click.echo(f"wrote {resp.n} observations ({resp.observed} with responses) to {out_path}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--x", "x_path", required=True, type=click.Path(exists=True),
              help="Query curve CSV (one '# grid,...' row, a header and one value row).")
@click.option("--psi", default="identity", show_default=True,
              help="identity, cdf:<y> or quantile:<alpha>.")
@click.option("--level", default=0.95, show_default=True, help="Confidence level.")
@click.option("--method", default="asymptotic", show_default=True,
              type=click.Choice(["asymptotic", "bootstrap"]))
@click.option("--B", "n_boot", default=1000, show_default=True,
              help="Bootstrap replicates.")
@click.option("--seed", default=42, show_default=True, help="Bootstrap weight seed.")
@click.option("--kernel", default="quadratic", show_default=True)
@click.option("--semimetric", default="l2", show_default=True,
              type=click.Choice(["l2", "l2deriv1", "l2deriv2"]))
@click.option("--bandwidth", default="knn:5,10,15,20,30,50", show_default=True,
              help="fixed:<h> or knn:<k1,k2,...>.")
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Also write the result row to this file.")
@click.option("--server", default=None, help="Base URL of a running ftkreg service.")
def ci(data_path, x_path, psi, level, method, n_boot, seed, kernel, semimetric,
       bandwidth, out_path, server):
    """Confidence interval for the regression operator at a query curve."""
    with open(data_path) as fh:
        dataset_csv = fh.read()
    x = read_curve_csv(x_path)
    req = schemas.CIRequestModel(
        dataset_csv=dataset_csv,
        x=schemas.CurveModel.from_curve(x),
        psi=psi,
        level=level,
        method=method,
        B=n_boot,
        seed=seed,
        config=_config_model(kernel, semimetric, bandwidth),
    )
    resp = _call(server, "/ci", handle_ci, req, schemas.CIResponse)
    header = "point,lower,upper,method,h,p_hat,Fx_hat,M1,M2,W2bar"
    row = ",".join(
        [_FMT % resp.point, _FMT % resp.lower, _FMT % resp.upper, resp.method,
         _FMT % resp.h, _FMT % resp.p_hat, _FMT % resp.fx_hat, _FMT % resp.m1,
         _FMT % resp.m2, _FMT % resp.w2bar]
    )
    text = header + "\n" + row + "\n"
    click.echo(text, nl=False)
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(text)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
@click.option("--server", default=None, help="Base URL of a running ftkreg service.")
def sim1(config_path, out_dir, server):
    """Reproduce the continuous-versus-discrete accuracy experiment."""
    with open(config_path) as fh:
        config = json.load(fh)
    req = schemas.Sim1Request(config=schemas.Sim1ConfigModel(**config))
    resp = _call(server, "/sim1", handle_sim1, req, schemas.Sim1Response)
    write_sim1_outputs([r.model_dump() for r in resp.rows],
                       req.config.model_dump(), out_dir,
                       [r.model_dump() for r in resp.replicates])
    click.echo(f"wrote table1.csv and meta.json to {out_dir}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
@click.option("--server", default=None, help="Base URL of a running ftkreg service.")
def sim2(config_path, out_dir, server):
    """Reproduce the sampling-mesh scan and its MISE curves."""
    with open(config_path) as fh:
        config = json.load(fh)
    req = schemas.Sim2Request(config=schemas.Sim2ConfigModel(**config))
    resp = _call(server, "/sim2", handle_sim2, req, schemas.Sim2Response)
    delta_star = {float(k): v for k, v in resp.delta_star.items()}
    write_sim2_outputs([r.model_dump() for r in resp.rows], delta_star,
                       req.config.model_dump(), out_dir,
                       [r.model_dump() for r in resp.replicates])
    click.echo(f"wrote mise.csv, mise.svg and meta.json to {out_dir}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def entrypoint():
    try:
        main()
    except FtkregError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entrypoint()
