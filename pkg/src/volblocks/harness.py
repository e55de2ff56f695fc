"""Monte Carlo driver, tick-data ingestion, and report plumbing.

run_mc simulates paths, applies the blocked estimators over a grid of
(estimator, B, n, xi2) cells, and accumulates Z-statistics (infeasible,
studentized by the ground-truth blocked AVAR, and feasible, studentized
by the plug-in AVAR), empirical and theoretical losses, and quantile
coverage. Per-replication RNG streams come from seed-sequence spawning
keyed on the replication index, so reports are identical for any worker
count.

ingest_csv and empirical_report form the per-day pipeline for real tick
files: session filtering, de-duplication, per-day estimates with
confidence intervals, and the cross-day summary tables.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import simulate as sim
from .avar import VolFunctionals, avar_blocked, avar_feasible, \
    bound_efficiency, measures
from .kernels import KernelFamily, from_name, profile
from .preavg import PreAvgConfig, block_pilots, noise_variance
from .qmle import local_qmle
from .rk import BlockPartition, local_rk
from .series import DAY, SECONDS_PER_YEAR, TickSeries, seconds_to_years

log = logging.getLogger(__name__)

SCHEMA_VERSION = "volblocks-report-1"

#: coverage probes, in percent
COVERAGE_LEVELS = (0.5, 2.5, 5.0, 95.0, 97.5, 99.5)

#: abort threshold for failed replications
FAILURE_THRESHOLD = 0.01

SESSION_SECONDS = 23_400.0


def parse_estimator(token: str) -> tuple[str, KernelFamily | None]:
    """'qmle' or 'rk(<kernel>)' -> (kind, family)."""
    t = token.strip().lower()
    if t == "qmle":
        return "qmle", None
    if t.startswith("rk(") and t.endswith(")"):
        return "rk", from_name(t[3:-1])
    if t.startswith("rk:"):
        return "rk", from_name(t[3:])
    raise ValueError(f"unknown estimator {token!r};"
                     " use 'qmle' or 'rk(<kernel>)'")


@dataclass(frozen=True)
class McConfig:
    model: str | sim.ModelConfig = "model2"
    M: int = 2000
    base_seed: int = 0
    sizes: tuple[int, ...] = (23_400,)
    xi2_levels: tuple[float, ...] = (0.001,)
    blocks: tuple[int, ...] = (1, 2, 4, 6, 8)
    estimators: tuple[str, ...] = ("rk(th2)", "qmle")
    workers: int | None = None
    jitter_m: int = 25

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if not self.sizes:
            raise ValueError("need at least one sampling size")
        n_max = max(self.sizes)
        for n in self.sizes:
            if n_max % n:
                raise ValueError(
                    "sampling sizes must divide the largest size")
        for tok in self.estimators:
            parse_estimator(tok)
        self.model_config(0.001)  # validates the preset name / divisibility

    def model_config(self, xi2: float) -> sim.ModelConfig:
        n_max = max(self.sizes)
        if isinstance(self.model, sim.ModelConfig):
            return dataclasses.replace(
                self.model, noise=sim.NoiseParams(xi2=xi2),
                sampling=dataclasses.replace(self.model.sampling,
                                             n_obs=n_max))
        if self.model not in sim.MODEL_PRESETS:
            raise ValueError(f"unknown model preset {self.model!r}")
        return sim.MODEL_PRESETS[self.model](xi2=xi2, n_obs=n_max)


@dataclass(frozen=True)
class CellStats:
    estimator: str
    B: int
    n: int
    xi2: float
    reps: int
    z_mean: float
    z_sd: float
    z_rmse: float
    coverage: tuple[float, ...]
    fz_mean: float
    fz_sd: float
    fz_rmse: float
    fz_coverage: tuple[float, ...]
    emp_loss: float
    theo_loss: float
    decomp_gap: float


@dataclass(frozen=True)
class McReport:
    schema: str
    config: McConfig
    cells: tuple[CellStats, ...]
    failures: int
    nonconverged: int

    def cell(self, estimator: str, B: int, n: int,
             xi2: float) -> CellStats:
        for c in self.cells:
            if (c.estimator, c.B, c.n) == (estimator, B, n) \
                    and math.isclose(c.xi2, xi2):
                return c
        raise KeyError((estimator, B, n, xi2))


def _rep_seed(base_seed: int, rep: int):
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(rep,))


def _run_rep(args):
    """One replication: all cells for one (seed, xi2-level) grid."""
    cfg, rep = args
    out = {}
    failures = []
    nonconverged = 0
    for xi2 in cfg.xi2_levels:
        bundle = sim.simulate(cfg.model_config(xi2), _rep_seed(
            cfg.base_seed, rep))
        f = VolFunctionals.from_path(bundle)
        bound = bound_efficiency(f)
        target = bundle.truth.qv
        n_max = max(cfg.sizes)
        for n in cfg.sizes:
            thin_b = sim.thin(bundle, n_max // n)
            series = thin_b.to_series()
            for tok in cfg.estimators:
                kind, family = parse_estimator(tok)
                prof = profile(family) if family is not None else None
                for B in cfg.blocks:
                    key = (tok, B, n, xi2)
                    try:
                        part = BlockPartition(B, bundle.config.horizon)
                        if kind == "rk":
                            est = local_rk(series, part, family,
                                           m=cfg.jitter_m).total
                        else:
                            q = local_qmle(series, part)
                            est = q.total
                            nonconverged += not q.converged
                        truth_avar = avar_blocked(f, part, kind, prof).avar
                        feas_avar = avar_feasible(series, part, kind, prof)
                        err = est - target
                        root_n = n**0.25
                        out[key] = (
                            root_n * err / math.sqrt(truth_avar),
                            root_n * err / math.sqrt(feas_avar),
                            math.sqrt(n) * err**2 / bound,
                            truth_avar / bound,
                        )
                    except Exception as exc:  # noqa: BLE001
                        failures.append((rep, key, repr(exc)))
                        out[key] = (np.nan,) * 4
    return rep, out, failures, nonconverged


def run_mc(cfg: McConfig) -> McReport:
    """Monte Carlo study over the configured cell grid."""
    workers = cfg.workers
    if workers is None:
        workers = int(os.environ.get("VOLBLOCKS_WORKERS",
                                     os.cpu_count() or 1))
    tasks = [(cfg, rep) for rep in range(cfg.M)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_rep, tasks, chunksize=8))
    else:
        results = [_run_rep(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    all_failures = [f for _, _, fs, _ in results for f in fs]
    nonconverged = sum(nc for _, _, _, nc in results)
    if len(all_failures) > FAILURE_THRESHOLD * cfg.M * max(
            1, len(cfg.sizes) * len(cfg.xi2_levels) * len(cfg.blocks)
            * len(cfg.estimators)):
        for rep, key, msg in all_failures[:20]:
            log.error("replication %d cell %s failed: %s", rep, key, msg)
        raise RuntimeError(
            f"{len(all_failures)} cell failures exceed the "
            f"{FAILURE_THRESHOLD:.0%} threshold")
    for rep, key, msg in all_failures:
        log.warning("replication %d cell %s failed: %s", rep, key, msg)

    probes = norm.ppf(np.asarray(COVERAGE_LEVELS) / 100.0)
    cells = []
    for xi2 in cfg.xi2_levels:
        for n in cfg.sizes:
            for tok in cfg.estimators:
                for B in cfg.blocks:
                    key = (tok, B, n, xi2)
                    vals = np.array([out[key] for _, out, _, _ in results])
                    good = vals[~np.isnan(vals[:, 0])]
                    z, fz, emp, theo = (good[:, i] for i in range(4))
                    emp_loss = float(np.mean(emp)) - 1.0
                    theo_loss = float(np.mean(theo)) - 1.0
                    decomp = abs((emp_loss + 1.0)
                                 - (theo_loss + 1.0) * float(np.var(z)))
                    cells.append(CellStats(
                        tok, B, n, xi2, good.shape[0],
                        float(np.mean(z)), float(np.std(z)),
                        float(np.sqrt(np.mean(z**2))),
                        tuple(float(np.mean(z <= p) * 100) for p in probes),
                        float(np.mean(fz)), float(np.std(fz)),
                        float(np.sqrt(np.mean(fz**2))),
                        tuple(float(np.mean(fz <= p) * 100) for p in probes),
                        emp_loss, theo_loss, decomp))
    return McReport(SCHEMA_VERSION, cfg, tuple(cells), len(all_failures),
                    nonconverged)


CONFIG_SCHEMA_VERSION = "volblocks-mc-config-1"


def load_mc_config(path: str) -> McConfig:
    """McConfig from a JSON file in the volblocks-mc-config-1 schema."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    tag = raw.pop("schema", CONFIG_SCHEMA_VERSION)
    if tag != CONFIG_SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema {tag!r}")
    known = {f.name for f in dataclasses.fields(McConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    for key in ("sizes", "xi2_levels", "blocks", "estimators"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return McConfig(**raw)


def ingest_csv(path: str) -> list[TickSeries]:
    """Per-day tick series from a date,time_sec,price CSV.

    Rows outside the 09:30-16:00 session or with non-positive prices are
    dropped; duplicate timestamps keep the last trade; malformed rows are
    logged with their line numbers and become fatal past 0.1% of rows.
    """
    by_day: dict[str, dict[float, float]] = {}
    bad: list[int] = []
    total = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and header != ["date", "time_sec", "price"]:
            raise ValueError(
                f"unexpected header {header!r}; want date,time_sec,price")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            total += 1
            try:
                date, t, p = row[0].strip(), float(row[1]), float(row[2])
                if len(row) != 3 or not date:
                    raise ValueError("wrong field count")
            except (ValueError, IndexError):
                bad.append(lineno)
                continue
            if not 0.0 <= t <= SESSION_SECONDS or p <= 0.0:
                continue
            by_day.setdefault(date, {})[t] = p  # keep the last trade
    if bad:
        if len(bad) > 0.001 * total:
            raise ValueError(
                f"{len(bad)} malformed rows (>0.1%), first lines {bad[:10]}")
        log.warning("skipped %d malformed rows at lines %s", len(bad),
                    bad[:20])
    days = []
    for date in sorted(by_day):
        ticks = sorted(by_day[date].items())
        if len(ticks) < 2:
            log.warning("day %s has fewer than two ticks; skipped", date)
            continue
        t = seconds_to_years(np.array([x for x, _ in ticks]))
        lp = np.log(np.array([p for _, p in ticks]))
        days.append(TickSeries(t, lp, 0.0, seconds_to_years(
            SESSION_SECONDS), meta={"date": date, "open": "09:30",
                                    "close": "16:00"}))
    return days


def export_ticks_csv(series: TickSeries, path: str,
                     date: str = "2000-01-03") -> None:
    """Write the session part of a series in the tick-CSV schema.

    Prices are exp(logprice) rendered with full precision, so reading
    the file back reproduces the prices bit-for-bit.
    """
    i0, i1 = series.session_indices()
    secs = (series.times[i0:i1 + 1] - series.session_start) \
        * SECONDS_PER_YEAR
    prices = np.exp(series.logprices[i0:i1 + 1])
    with open(path, "w", newline="") as fh:
        fh.write("date,time_sec,price\n")
        for t, p in zip(secs, prices):
            fh.write(f"{date},{float(t)!r},{float(p)!r}\n")


@dataclass(frozen=True)
class DayRow:
    date: str
    estimator: str
    B: int
    estimate: float
    avar_hat: float
    ci_low: float
    ci_high: float
    rho_hat_mean: float
    ok: bool


@dataclass(frozen=True)
class EmpiricalReport:
    schema: str
    rows: tuple[DayRow, ...]
    rho_by_b: dict
    avar_ratio_by_b: dict
    correction_corr: dict
    estimator_corr: dict
    excluded_days: tuple[str, ...]


def _day_rho_by_block(series: TickSeries, B: int,
                      cfg: PreAvgConfig) -> float:
    i0, i1 = series.session_indices()
    edges = np.linspace(series.session_start, series.session_end, B + 1)
    bidx = [i0] + [series.boundary_index(t) for t in edges[1:-1]] + [i1]
    dz = np.diff(series.logprices)
    delta_b = series.session_span / B
    rhos = []
    for k in range(B):
        lo, hi = bidx[k], bidx[k + 1]
        rhos.append(block_pilots(dz[lo:hi], delta_b / (hi - lo), delta_b,
                                 cfg).rho)
    return float(np.mean(rhos))


def empirical_report(days: list[TickSeries],
                     blocks: tuple[int, ...] = (1, 2, 4, 6, 8),
                     estimators: tuple[str, ...] = ("rk(th2)", "qmle"),
                     jitter_m: int = 25) -> EmpiricalReport:
    """Per-day estimates with CIs plus cross-day summary tables."""
    if not days:
        raise ValueError("need at least one day")
    cfg = PreAvgConfig()
    rows: list[DayRow] = []
    excluded: list[str] = []
    per_day_est: dict[tuple[str, int], list[float]] = {}
    per_day_avar: dict[tuple[str, int], list[float]] = {}
    rho_lists: dict[int, list[float]] = {b: [] for b in blocks}
    kept_dates = []
    for day in days:
        date = str(day.meta.get("date", "?"))
        n = day.n_returns
        day_rows = []
        try:
            horizon = day.session_span
            for b in blocks:
                rho_lists_day = _day_rho_by_block(day, b, cfg)
                part = BlockPartition(b, horizon)
                for tok in estimators:
                    kind, family = parse_estimator(tok)
                    prof = profile(family) if family else None
                    if kind == "rk":
                        est = local_rk(day, part, family, m=jitter_m).total
                    else:
                        est = local_qmle(day, part).total
                    av = avar_feasible(day, part, kind, prof)
                    half = 1.96 * n**-0.25 * math.sqrt(av)
                    ok = bool(math.isfinite(est) and av > 0.0)
                    day_rows.append(DayRow(date, tok, b, est, av,
                                           est - half, est + half,
                                           rho_lists_day, ok))
        except Exception as exc:  # noqa: BLE001
            log.warning("day %s excluded: %r", date, exc)
            excluded.append(date)
            continue
        kept_dates.append(date)
        rows.extend(day_rows)
        for r in day_rows:
            per_day_est.setdefault((r.estimator, r.B), []).append(r.estimate)
            per_day_avar.setdefault((r.estimator, r.B), []).append(r.avar_hat)
        for b in blocks:
            rho_lists[b].append(
                next(r.rho_hat_mean for r in day_rows if r.B == b))

    if not kept_dates:
        raise ValueError("every day failed estimation")
    rho_by_b = {b: float(np.mean(v)) for b, v in rho_lists.items()}
    b1 = blocks[0]
    avar_ratio_by_b = {}
    for tok in estimators:
        base = np.array(per_day_avar[(tok, b1)])
        valid = base > 0
        avar_ratio_by_b[tok] = {
            b: (float(np.mean(np.array(per_day_avar[(tok, b)])[valid]
                              / base[valid])) if valid.any() else float("nan"))
            for b in blocks}
    correction_corr = {}
    estimator_corr = {}
    if len(kept_dates) >= 3 and len(estimators) >= 2:
        t0, t1 = estimators[0], estimators[1]
        e0_1 = np.array(per_day_est[(t0, b1)])
        e1_1 = np.array(per_day_est[(t1, b1)])
        for b in blocks[1:]:
            d0 = np.array(per_day_est[(t0, b)]) - e0_1
            d1 = np.array(per_day_est[(t1, b)]) - e1_1
            if np.std(d0) > 0 and np.std(d1) > 0:
                correction_corr[b] = float(np.corrcoef(d0, d1)[0, 1])
        labels = [(tok, b) for tok in estimators for b in blocks]
        mat = np.corrcoef(np.array([per_day_est[k] for k in labels]))
        estimator_corr = {
            f"{a[0]}|B={a[1]}~{c[0]}|B={c[1]}": float(mat[i, j])
            for i, a in enumerate(labels) for j, c in enumerate(labels)
            if i < j}
    return EmpiricalReport(SCHEMA_VERSION, tuple(rows), rho_by_b,
                           avar_ratio_by_b, correction_corr, estimator_corr,
                           tuple(excluded))


def _to_payload(report) -> dict:
    d = dataclasses.asdict(report)

    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        return x

    return clean(d)


def emit(report, fmt: str, path: str) -> None:
    """Write a report as JSON (full structure) or CSV (cell/row table)."""
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(_to_payload(report), fh, indent=2, sort_keys=True)
        return
    if fmt != "csv":
        raise ValueError("format must be 'csv' or 'json'")
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        if isinstance(report, McReport):
            cov = [f"cov{p}" for p in COVERAGE_LEVELS]
            fcov = [f"fcov{p}" for p in COVERAGE_LEVELS]
            writer.writerow(["estimator", "B", "n", "xi2", "reps",
                             "z_mean", "z_sd", "z_rmse", *cov,
                             "fz_mean", "fz_sd", "fz_rmse", *fcov,
                             "emp_loss", "theo_loss", "decomp_gap"])
            for c in report.cells:
                writer.writerow([c.estimator, c.B, c.n, c.xi2, c.reps,
                                 c.z_mean, c.z_sd, c.z_rmse, *c.coverage,
                                 c.fz_mean, c.fz_sd, c.fz_rmse,
                                 *c.fz_coverage, c.emp_loss, c.theo_loss,
                                 c.decomp_gap])
        elif isinstance(report, EmpiricalReport):
            writer.writerow(["date", "estimator", "B", "estimate",
                             "avar_hat", "ci_low", "ci_high",
                             "rho_hat_mean", "ok"])
            for r in report.rows:
                writer.writerow([r.date, r.estimator, r.B, r.estimate,
                                 r.avar_hat, r.ci_low, r.ci_high,
                                 r.rho_hat_mean, r.ok])
        else:
            raise TypeError(f"cannot emit {type(report).__name__} as CSV")


def load_report_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
