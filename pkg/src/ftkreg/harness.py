"""Monte Carlo harnesses for the two simulation experiments.

Experiment 1 compares the continuous-time estimator (all delta-spaced
observations) with the discrete-time one (integer instants only) by squared
error at a fresh held-out query curve per replicate.  Experiment 2 scans the
sampling mesh delta at fixed n and reports MISE over a frozen set of
evaluation curves.  Both emit deterministic CSV/SVG/JSON artifacts.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bandwidth import KnnCv
from .errors import EmptyInput, FtkregError
from .inference import normal_quantile
from .estimator import EstimatorConfig, Identity, regress
from .funcdata import FunctionalDataset
from .kernels import semimetric_from_name
from .simulate import (
    MarNone,
    OUParams,
    SimSpec,
    calibrate_mar,
    gamma_lift,
    generate,
    response_value,
    sine_shape,
)

__all__ = [
    "Sim1Config",
    "Sim2Config",
    "SummaryRow",
    "summarize_se",
    "run_sim1",
    "run_sim2",
]

# substream tags under the root seed
_DATA, _QUERY, _CALIBRATION = 0, 1, 2

_LOO_CAP = 15  # leave-one-out evaluations per kappa inside the harness


def derive_seed(root: int, *key: int) -> int:
    """Deterministic child seed from a root seed and an integer key path."""
    return int(np.random.SeedSequence([root, *key]).generate_state(1, np.uint64)[0])


def _kappa_grid(n_observed: int) -> tuple[int, ...]:
    """Neighbour-count grid scaled to the sample: geometric up to ~n^0.7.

    The shrinking ball-mass fraction n^-0.3 keeps the neighbourhood bias
    falling as the record grows, which a fixed grid cannot deliver.
    """
    top = max(6.0, float(n_observed) ** 0.7)
    grid = np.unique(np.geomspace(5.0, top, 6).round().astype(int))
    grid = grid[(grid >= 1) & (grid <= n_observed - 1)]
    return tuple(int(k) for k in grid) or (1,)


def _harness_config(ds: FunctionalDataset, semimetric: str) -> EstimatorConfig:
    return EstimatorConfig(
        semimetric=semimetric_from_name(semimetric),
        bandwidth=KnnCv(_kappa_grid(ds.n_observed()), loo_cap=_LOO_CAP, score="mean"),
    )


@dataclass(frozen=True)
class SummaryRow:
    """Quartile/mean summary of one cell's squared errors."""

    q25: float
    median: float
    mean: float
    q75: float


def summarize_se(values) -> SummaryRow:
    """Type-7 (linear interpolation) quartiles and ordered-summation mean."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyInput("cannot summarize an empty sample")
    q25, med, q75 = (float(np.quantile(arr, q, method="linear")) for q in (0.25, 0.5, 0.75))
    return SummaryRow(q25=q25, median=med, mean=float(np.sum(arr)) / arr.size, q75=q75)


def _summary_or_nan(values) -> SummaryRow:
    """summarize_se, but an all-failed cell reports NaN stats instead of raising."""
    try:
        return summarize_se(values)
    except EmptyInput:
        nan = float("nan")
        return SummaryRow(nan, nan, nan, nan)


# ---------------------------------------------------------------------------
# Simulation 1: continuous-time versus discrete-time estimation accuracy.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sim1Config:
    """Replication plan for the continuous/discrete comparison."""

    t_values: tuple[float, ...] = (50.0, 200.0, 1000.0)
    mar_rates: tuple[float, ...] = (0.2, 0.4)
    delta: float = 0.005
    replications: int = 100
    seed: int = 0
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "Sim1Config":
        return cls(
            t_values=tuple(float(t) for t in d.get("t_values", (50.0, 200.0, 1000.0))),
            mar_rates=tuple(float(r) for r in d.get("mar_rates", (0.2, 0.4))),
            delta=float(d.get("delta", 0.005)),
            replications=int(d.get("replications", 100)),
            seed=int(d.get("seed", 0)),
            workers=int(d.get("workers", 1)),
        )

    def to_dict(self) -> dict:
        return {
            "t_values": list(self.t_values),
            "mar_rates": list(self.mar_rates),
            "delta": self.delta,
            "replications": self.replications,
            "seed": self.seed,
            "workers": self.workers,
        }


def _sim1_replicate(task: tuple) -> tuple[float, float, int]:
    """One replicate: (SE continuous, SE discrete, failure flag); SEs NaN on failure.

    Replicate substreams are keyed by replicate index only, so cells share
    shocks and queries (common random numbers) and the MAR masks nest across
    rates, pairing the cell comparisons.
    """
    root, rep, T, delta, mar_law = task
    mar = mar_law if mar_law is not None else MarNone()
    spec = SimSpec(
        model="legendre", T=T, delta=delta, seed=derive_seed(root, _DATA, rep), mar=mar
    )
    ds = generate(spec)
    rng_q = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([root, _QUERY, rep]))
    )
    ou = spec.ou
    x = gamma_lift(rng_q.normal(ou.mu, ou.stationary_sd))
    m_true = response_value(x, spec.response)

    stride = int(round(1.0 / delta))
    discrete = FunctionalDataset(ds.observations[stride - 1 :: stride], 1.0)

    failed = 0
    out = []
    for data in (ds, discrete):
        try:
            m_hat = regress(data, x, Identity(), _harness_config(data, "l2deriv2"))
            out.append((m_hat - m_true) ** 2)
        except FtkregError:
            failed = 1
            out.append(float("nan"))
    return out[0], out[1], failed


def _run_tasks(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run_sim1(cfg: Sim1Config, out_dir: str | None = None) -> dict:
    """Run the continuous/discrete comparison; returns table rows and replicates.

    Rows carry (T, mar, stat, continuous, discrete, failrate) with stats
    q25/median/mean/q75 of the per-replicate squared errors, skipping failed
    replicates; failrate is the fraction of replicates where either estimator
    failed.  With out_dir set, writes table1.csv, table1_replicates.csv and
    meta.json.
    """
    mar_laws = {
        rate: (
            calibrate_mar("legendre", rate, seed=derive_seed(cfg.seed, _CALIBRATION, idx))
            if rate > 0.0
            else None
        )
        for idx, rate in enumerate(cfg.mar_rates)
    }
    cells = [(T, rate) for T in cfg.t_values for rate in cfg.mar_rates]
    rows: list[dict] = []
    replicates: list[dict] = []
    for T, rate in cells:
        tasks = [
            (cfg.seed, rep, T, cfg.delta, mar_laws[rate])
            for rep in range(cfg.replications)
        ]
        results = _run_tasks(_sim1_replicate, tasks, cfg.workers)
        se_c = np.array([r[0] for r in results])
        se_d = np.array([r[1] for r in results])
        failrate = float(np.mean([r[2] for r in results]))
        for rep, r in enumerate(results):
            replicates.append(
                {"T": T, "mar": rate, "rep": rep, "continuous": r[0],
                 "discrete": r[1], "failed": r[2]}
            )
        sum_c = _summary_or_nan(se_c[~np.isnan(se_c)])
        sum_d = _summary_or_nan(se_d[~np.isnan(se_d)])
        for stat in ("q25", "median", "mean", "q75"):
            rows.append(
                {
                    "T": T,
                    "mar": rate,
                    "stat": stat,
                    "continuous": getattr(sum_c, stat),
                    "discrete": getattr(sum_d, stat),
                    "failrate": failrate,
                }
            )
    result = {"rows": rows, "replicates": replicates}
    if out_dir is not None:
        write_sim1_outputs(rows, cfg.to_dict(), out_dir, replicates)
    return result


def write_sim1_outputs(
    rows: list[dict], config_echo: dict, out_dir: str, replicates: list[dict] | None = None
) -> None:
    """Write table1.csv, per-replicate errors and meta.json."""
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "table1.csv"),
        ["T", "mar", "stat", "continuous", "discrete", "failrate"],
        rows,
    )
    if replicates is not None:
        _write_csv(
            os.path.join(out_dir, "table1_replicates.csv"),
            ["T", "mar", "rep", "continuous", "discrete", "failed"],
            replicates,
        )
    _write_meta(out_dir, {"experiment": "sim1", "config": config_echo})


# ---------------------------------------------------------------------------
# Simulation 2: optimal sampling mesh under missingness.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sim2Config:
    """Replication plan for the mesh scan."""

    n_fixed: int = 200
    delta_grid: tuple[float, ...] = tuple(round(0.10 + 0.05 * i, 2) for i in range(11))
    eval_curves: int = 50
    replications: int = 100
    mar_rates: tuple[float, ...] = (0.0, 0.1, 0.5)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.delta_grid or any(d <= 0 for d in self.delta_grid):
            raise ValueError("delta grid must be nonempty and positive")

    @classmethod
    def from_dict(cls, d: dict) -> "Sim2Config":
        base = cls()
        return cls(
            n_fixed=int(d.get("n_fixed", base.n_fixed)),
            delta_grid=tuple(float(x) for x in d.get("delta_grid", base.delta_grid)),
            eval_curves=int(d.get("eval_curves", base.eval_curves)),
            replications=int(d.get("replications", base.replications)),
            mar_rates=tuple(float(r) for r in d.get("mar_rates", base.mar_rates)),
            seed=int(d.get("seed", base.seed)),
            workers=int(d.get("workers", base.workers)),
        )

    def to_dict(self) -> dict:
        return {
            "n_fixed": self.n_fixed,
            "delta_grid": list(self.delta_grid),
            "eval_curves": self.eval_curves,
            "replications": self.replications,
            "mar_rates": list(self.mar_rates),
            "seed": self.seed,
            "workers": self.workers,
        }


def _mesh_base(delta_grid: tuple[float, ...]) -> float | None:
    """Greatest common mesh of the delta grid, or None when there is none."""
    from fractions import Fraction
    from math import gcd

    fracs = [Fraction(d).limit_denominator(10_000) for d in delta_grid]
    if any(abs(float(f) - d) > 1e-12 for f, d in zip(fracs, delta_grid)):
        return None
    denom = 1
    for f in fracs:
        denom = denom * f.denominator // gcd(denom, f.denominator)
    nums = [f.numerator * (denom // f.denominator) for f in fracs]
    g = 0
    for n in nums:
        g = gcd(g, n)
    base = g / denom
    if base < min(delta_grid) / 64:
        return None
    return base


def _sim2_replicate(task: tuple) -> list[tuple[float, int]]:
    """One replicate across the whole delta grid: [(MSE over evals, failures), ...].

    A single underlying realization is drawn on the finest common mesh and
    observed at every delta, matching the experiment's premise (one process,
    several sampling meshes) and pairing the argmin comparison across cells.
    Replicate substreams are keyed by replicate index only, so the MAR masks
    nest across rates as well.
    """
    root, rep, n_fixed, delta_grid, base, mar_law, eval_zs = task
    mar = mar_law if mar_law is not None else MarNone()
    seed = derive_seed(root, _DATA, rep)
    if base is None:
        datasets = [
            generate(SimSpec(model="sine", T=n_fixed * d, delta=d, seed=seed, mar=mar))
            for d in delta_grid
        ]
    else:
        strides = [int(round(d / base)) for d in delta_grid]
        n_fine = n_fixed * max(strides)
        fine = generate(
            SimSpec(model="sine", T=n_fine * base, delta=base, seed=seed, mar=mar)
        )
        datasets = [
            FunctionalDataset(fine.observations[s - 1 :: s][:n_fixed], d)
            for s, d in zip(strides, delta_grid)
        ]
    m_true = [response_value(sine_shape(float(z)), "deriv_integral_square") for z in eval_zs]
    # one smoothing menu for every cell (n is fixed by design); KnnCv caps it
    # at the observed count, so the cross-rate comparison shares its grid
    cfg_est = EstimatorConfig(
        semimetric=semimetric_from_name("l2deriv1"),
        bandwidth=KnnCv(_kappa_grid(n_fixed), loo_cap=_LOO_CAP, score="mean"),
    )
    out = []
    for ds in datasets:
        errors = []
        failures = 0
        for z, target in zip(eval_zs, m_true):
            x = sine_shape(float(z))
            try:
                m_hat = regress(ds, x, Identity(), cfg_est)
                errors.append((m_hat - target) ** 2)
            except FtkregError:
                failures += 1
        out.append(((float(np.sum(errors)) / len(errors)) if errors else float("nan"), failures))
    return out


def run_sim2(cfg: Sim2Config, out_dir: str | None = None) -> dict:
    """Scan the sampling mesh; returns rows, per-rate delta_star and replicates.

    MISE(delta) averages the per-replicate mean squared error over the frozen
    evaluation curves; delta_star minimizes MISE per MAR rate (ties to the
    smaller delta).  With out_dir set, writes mise.csv, mise_replicates.csv,
    mise.svg and meta.json.
    """
    ou = OUParams()
    # fixed evaluation grid: equispaced stationary quantiles away from the
    # extreme tails, frozen across every (delta, rate, replicate) cell
    qs = np.linspace(0.05, 0.95, cfg.eval_curves)
    eval_zs = tuple(
        ou.mu + ou.stationary_sd * normal_quantile(float(q)) for q in qs
    )
    mar_laws = {
        rate: (
            calibrate_mar("sine", rate, seed=derive_seed(cfg.seed, _CALIBRATION, idx))
            if rate > 0.0
            else None
        )
        for idx, rate in enumerate(cfg.mar_rates)
    }
    base = _mesh_base(cfg.delta_grid)
    rows: list[dict] = []
    replicates: list[dict] = []
    delta_star: dict[float, float] = {}
    for rate in cfg.mar_rates:
        tasks = [
            (cfg.seed, rep, cfg.n_fixed, cfg.delta_grid, base, mar_laws[rate], eval_zs)
            for rep in range(cfg.replications)
        ]
        results = _run_tasks(_sim2_replicate, tasks, cfg.workers)
        for d_idx, delta in enumerate(cfg.delta_grid):
            per_rep = np.array([r[d_idx][0] for r in results])
            for rep, r in enumerate(results):
                replicates.append(
                    {"mar": rate, "delta": delta, "rep": rep,
                     "mise": r[d_idx][0], "failures": r[d_idx][1]}
                )
            ok = per_rep[~np.isnan(per_rep)]
            mise = float(np.sum(ok)) / ok.size if ok.size else float("nan")
            se = float(np.std(ok, ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else float("nan")
            rows.append({"mar": rate, "delta": delta, "mise": mise, "se_of_mise": se})
    for rate in cfg.mar_rates:
        rate_rows = [r for r in rows if r["mar"] == rate]
        best = min(rate_rows, key=lambda r: (r["mise"], r["delta"]))
        delta_star[rate] = best["delta"]
    result = {"rows": rows, "delta_star": delta_star, "replicates": replicates}
    if out_dir is not None:
        write_sim2_outputs(rows, delta_star, cfg.to_dict(), out_dir, replicates)
    return result


def write_sim2_outputs(
    rows: list[dict],
    delta_star: dict[float, float],
    config_echo: dict,
    out_dir: str,
    replicates: list[dict] | None = None,
) -> None:
    """Write mise.csv, mise.svg, per-replicate errors and meta.json."""
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "mise.csv"), ["mar", "delta", "mise", "se_of_mise"], rows)
    if replicates is not None:
        _write_csv(
            os.path.join(out_dir, "mise_replicates.csv"),
            ["mar", "delta", "rep", "mise", "failures"],
            replicates,
        )
    rates = sorted({r["mar"] for r in rows})
    series = {
        f"mar={rate:g}": [(r["delta"], r["mise"]) for r in rows if r["mar"] == rate]
        for rate in rates
    }
    with open(os.path.join(out_dir, "mise.svg"), "w") as fh:
        fh.write(_svg_lines(series, "sampling mesh delta", "MISE"))
    _write_meta(
        out_dir,
        {
            "experiment": "sim2",
            "config": config_echo,
            "delta_star": {f"{k:g}": v for k, v in delta_star.items()},
        },
    )


# ---------------------------------------------------------------------------
# Deterministic output writers.
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_meta(out_dir: str, payload: dict) -> None:
    from . import __version__

    meta = dict(payload)
    meta["version"] = __version__
    meta["quantile_convention"] = "type-7 (linear interpolation of order statistics)"
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _svg_lines(series: dict[str, list[tuple[float, float]]], xlabel: str, ylabel: str) -> str:
    """Minimal deterministic SVG line chart: one polyline per series."""
    width, height = 640, 440
    left, right, top, bottom = 80, 20, 24, 56
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts if math.isfinite(p[1])]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right)

    def sy(y):
        return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
        f'y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for i in range(5):
        xv = x_lo + i * (x_hi - x_lo) / 4
        yv = y_lo + i * (y_hi - y_lo) / 4
        parts.append(
            f'<text x="{sx(xv):.2f}" y="{height - bottom + 18}" text-anchor="middle">'
            f"{xv:.3g}</text>"
        )
        parts.append(
            f'<text x="{left - 8}" y="{sy(yv):.2f}" text-anchor="end" '
            f'dominant-baseline="middle">{yv:.3g}</text>'
        )
    parts.append(
        f'<text x="{(left + width - right) / 2:.2f}" y="{height - 12}" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{(top + height - bottom) / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(top + height - bottom) / 2:.2f})">{ylabel}</text>'
    )
    for idx, (label, pts) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts if math.isfinite(y)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 16 * (idx + 1)
        parts.append(
            f'<line x1="{width - right - 120}" y1="{ly - 4}" x2="{width - right - 96}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(f'<text x="{width - right - 90}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
