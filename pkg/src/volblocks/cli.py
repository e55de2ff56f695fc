"""Command-line interface: simulate, estimate, mc, avar, empirical."""
from __future__ import annotations

import dataclasses
import json
import sys

import click
import numpy as np

from . import harness as H
from . import simulate as sim
from .avar import avar_blocked, jump_time_for_rho, measures, \
    ushape_jump_path
from .kernels import from_name, profile
from .qmle import local_qmle
from .rk import BlockPartition, local_rk

FMT = click.Choice(["csv", "json"])


def _write_rows(rows: list[dict], header: list[str], fmt: str,
                out: str) -> None:
    """Row dicts as CSV or JSON to a path, or stdout when out is '-'."""
    fh = sys.stdout if out == "-" else open(out, "w")
    try:
        if fmt == "json":
            json.dump(rows, fh, indent=2)
            fh.write("\n")
        else:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(str(r[k]) for k in header) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


@click.group()
def main() -> None:
    """Blocked realized-kernel and QMLE estimation of integrated
    volatility from noisy high-frequency prices."""


@main.command()
@click.option("--model", type=click.Choice(sorted(sim.MODEL_PRESETS)),
              default="model2", show_default=True)
@click.option("--n-obs", type=int, default=23_400, show_default=True,
              help="Observations per session.")
@click.option("--xi2", type=float, default=0.001, show_default=True,
              help="Relative noise level xi^2.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--date", default="2000-01-03", show_default=True,
              help="Date stamped on exported tick rows.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=FMT, default="csv",
              show_default=True)
def simulate(model, n_obs, xi2, seed, date, out, fmt):
    """Draw one noisy price path and write it as tick data."""
    bundle = sim.simulate(sim.MODEL_PRESETS[model](xi2=xi2, n_obs=n_obs),
                          seed)
    if fmt == "csv":
        H.export_ticks_csv(bundle.to_series(), out, date=date)
    else:
        t = bundle.truth
        payload = {
            "model": model, "n_obs": n_obs, "xi2": xi2, "seed": seed,
            "truth": {"iv": t.iv, "qv": t.qv, "quarticity": t.quarticity,
                      "tricity": t.tricity, "rho": t.rho,
                      "kappa": t.kappa},
            "a0": bundle.a0,
            "jumps": [[float(a), float(b)] for a, b in bundle.jumps],
        }
        with open(out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    click.echo(f"wrote {out} (model={model}, n={n_obs}, xi2={xi2}, "
               f"rho={bundle.truth.rho:.3f})", err=True)


@main.group()
def estimate() -> None:
    """Estimate integrated variance from a date,time_sec,price CSV."""


def _estimate_days(input_path, runner, fmt, out):
    days = H.ingest_csv(input_path)
    if not days:
        raise click.ClickException("no usable days in the input file")
    rows = [runner(day) for day in days]
    _write_rows(rows, list(rows[0].keys()), fmt, out)


@estimate.command("rk")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--kernel", default="th2", show_default=True,
              help="Kernel name: th2, th16, parzen, cubic, or th<p>.")
@click.option("--blocks", "-B", type=int, default=1, show_default=True)
@click.option("--jitter", "-m", type=int, default=25, show_default=True,
              help="Boundary prices are averaged over m nearest ticks.")
@click.option("--bandwidth", type=int, default=None,
              help="Fixed per-block bandwidth H.")
@click.option("--auto/--no-auto", default=True, show_default=True,
              help="Pilot-based optimal bandwidth per block.")
@click.option("--out", default="-", show_default=True)
@click.option("--format", "fmt", type=FMT, default="csv",
              show_default=True)
def estimate_rk(input_path, kernel, blocks, jitter, bandwidth, auto,
                fmt, out):
    """Blocked flat-top realized kernel."""
    if bandwidth is not None and auto:
        auto = False
    if bandwidth is None and not auto:
        raise click.UsageError("need --bandwidth H or --auto")
    family = from_name(kernel)
    part = None

    def run(day):
        nonlocal part
        part = BlockPartition(blocks, day.session_span)
        bw = "auto" if auto else [bandwidth] * blocks
        est = local_rk(day, part, family, bandwidths=bw, m=jitter)
        return {
            "date": day.meta.get("date", "?"), "estimator": f"rk({kernel})",
            "B": blocks, "estimate": est.total,
            "bandwidths": ";".join(str(b.H) for b in est.blocks),
            "rho_hat_mean": float(np.nanmean(
                [b.rho_hat for b in est.blocks])),
        }

    _estimate_days(input_path, run, fmt, out)


@estimate.command("qmle")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--blocks", "-B", type=int, default=1, show_default=True)
@click.option("--box", default=None,
              help="Search box 'sigma2_lo,sigma2_hi,a2_lo,a2_hi'.")
@click.option("--out", default="-", show_default=True)
@click.option("--format", "fmt", type=FMT, default="csv",
              show_default=True)
def estimate_qmle(input_path, blocks, box, fmt, out):
    """Blocked Gaussian quasi-maximum-likelihood estimator."""
    if box is not None:
        vals = [float(x) for x in box.split(",")]
        if len(vals) != 4:
            raise click.UsageError(
                "--box needs four numbers: s2_lo,s2_hi,a2_lo,a2_hi")
        box = ((vals[0], vals[1]), (vals[2], vals[3]))

    def run(day):
        est = local_qmle(day, BlockPartition(blocks, day.session_span),
                         box)
        return {
            "date": day.meta.get("date", "?"), "estimator": "qmle",
            "B": blocks, "estimate": est.total, "a2_mean": est.a2_mean,
            "converged": est.converged,
        }

    _estimate_days(input_path, run, fmt, out)


@main.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON run configuration (volblocks-mc-config-1).")
@click.option("--seed", type=int, default=None,
              help="Override the configured base seed.")
@click.option("--reps", "-M", type=int, default=None,
              help="Override the configured replication count.")
@click.option("--workers", type=int, default=None, envvar="VOLBLOCKS_WORKERS",
              help="Parallel workers (VOLBLOCKS_WORKERS as fallback).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=FMT, default="json",
              show_default=True)
def mc(config_path, seed, reps, workers, out, fmt):
    """Monte Carlo study over (estimator, B, n, xi2) cells."""
    cfg = H.load_mc_config(config_path) if config_path else H.McConfig()
    overrides = {}
    if seed is not None:
        overrides["base_seed"] = seed
    if reps is not None:
        overrides["M"] = reps
    if workers is not None:
        overrides["workers"] = workers
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    report = H.run_mc(cfg)
    H.emit(report, fmt, out)
    click.echo(f"wrote {out}: {len(report.cells)} cells, "
               f"{report.failures} failures, "
               f"{report.nonconverged} non-converged fits", err=True)


@main.command()
@click.option("--rho-min", type=float, default=0.3, show_default=True)
@click.option("--rho-max", type=float, default=0.94, show_default=True)
@click.option("--rho-steps", type=int, default=10, show_default=True)
@click.option("--blocks", default="1,2,4,8", show_default=True,
              help="Comma-separated block counts.")
@click.option("--estimators", default="rk(th2),qmle", show_default=True,
              help="Comma-separated estimator tokens.")
@click.option("--n-grid", type=int, default=20_000, show_default=True,
              help="Time-grid resolution of the deterministic path.")
@click.option("--out", default="-", show_default=True)
@click.option("--format", "fmt", type=FMT, default="csv",
              show_default=True)
def avar(rho_min, rho_max, rho_steps, blocks, estimators, n_grid, out,
         fmt):
    """Efficiency loss over a rho grid on the deterministic
    U-shape-with-jump volatility path; emits (rho, B, loss) rows."""
    blocks = _parse_ints(blocks)
    toks = [t.strip() for t in estimators.split(",") if t.strip()]
    parsed = [(tok, *H.parse_estimator(tok)) for tok in toks]
    rows = []
    for rho in np.linspace(rho_min, rho_max, rho_steps):
        try:
            frac = jump_time_for_rho(float(rho), n_grid=n_grid)
        except ValueError as exc:
            raise click.ClickException(str(exc)) from exc
        f = ushape_jump_path(frac, n_grid=n_grid)
        rho_x, kappa, _ = measures(f)
        for tok, kind, family in parsed:
            prof = profile(family) if family is not None else None
            for b in blocks:
                loss = avar_blocked(f, BlockPartition(b, f.horizon),
                                    kind, prof).loss
                rows.append({"rho": float(rho_x), "kappa": float(kappa),
                             "estimator": tok, "B": b,
                             "loss": float(loss)})
    _write_rows(rows, ["rho", "kappa", "estimator", "B", "loss"], fmt,
                out)


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--blocks", default="1,2,4,6,8", show_default=True)
@click.option("--estimators", default="rk(th2),qmle", show_default=True)
@click.option("--jitter", "-m", type=int, default=25, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=FMT, default="json",
              show_default=True)
def empirical(input_path, blocks, estimators, jitter, out, fmt):
    """Per-day estimates with confidence intervals from tick data."""
    days = H.ingest_csv(input_path)
    if not days:
        raise click.ClickException("no usable days in the input file")
    toks = tuple(t.strip() for t in estimators.split(",") if t.strip())
    report = H.empirical_report(days, blocks=_parse_ints(blocks),
                                estimators=toks, jitter_m=jitter)
    H.emit(report, fmt, out)
    click.echo(f"wrote {out}: {len(report.rows)} day-rows, "
               f"{len(report.excluded_days)} days excluded", err=True)


if __name__ == "__main__":
    main()
