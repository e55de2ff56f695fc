"""Flat-top realized kernel, block jittering, and the blocked estimator.

The kernel on a block is K = gamma_0 + sum_{h=1}^{H} k((h-1)/H)
(gamma_h + gamma_{-h}) with non-truncated autocovariances: lags reach
into observations beyond the block window (neighbouring blocks, or
burn-in data at the sample ends). Block boundary prices are jittered,
i.e. replaced by a local average of the m nearest ticks, which tempers
the end-point noise terms.

The blocked estimator sums per-block kernels whose bandwidths are tuned
from the pre-averaging pilots: H_i = round(c*_i xi_i sqrt(n/B)).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .kernels import KernelFamily, KernelProfile, c_star, eval_kernel, profile
from .preavg import PreAvgConfig, PilotEstimates, block_pilots, noise_variance
from .series import DAY, TickSeries

log = logging.getLogger(__name__)

#: default minimum number of returns per block
MIN_BLOCK_OBS = 50


@dataclass(frozen=True)
class BlockPartition:
    """B equal blocks of the horizon: boundaries at i*T/B."""

    B: int
    horizon: float = DAY

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be a positive integer")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def boundaries(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.B + 1)

    def edges(self, start: float, end: float) -> np.ndarray:
        return np.linspace(start, end, self.B + 1)


@dataclass(frozen=True)
class BlockEstimate:
    k: float
    H: int
    c: float
    rho_hat: float
    xi2_hat: float
    avar: float


@dataclass(frozen=True)
class RkEstimate:
    total: float
    blocks: tuple[BlockEstimate, ...]


def _padded_returns(dz: np.ndarray, need_lo: int, need_hi: int
                    ) -> tuple[np.ndarray, int]:
    """Return-dz array covering indices [need_lo, need_hi].

    Indices outside the sample are reflect-padded; burn-in data, when
    present, is simply part of dz so no padding occurs.
    """
    pad_lo = max(0, -need_lo)
    pad_hi = max(0, need_hi - (dz.size - 1))
    if pad_lo or pad_hi:
        log.warning("no edge data at the sample end; reflect-padding "
                    "%d + %d returns", pad_lo, pad_hi)
        dz = np.pad(dz, (pad_lo, pad_hi), mode="reflect")
    return dz, pad_lo


def realized_autocov(series: TickSeries, window: tuple[int, int],
                     h: int) -> float:
    """gamma_h over an observation-index window [lo, hi] (inclusive).

    Lagged returns reach into edge data outside the window.
    """
    lo, hi = window
    if hi - lo < 1:
        raise ValueError("window must contain at least two observations")
    dz = np.diff(series.logprices)
    r0, r1 = lo, hi - 1  # return indices of the window
    dzp, off = _padded_returns(dz, min(r0, r0 - h), max(r1, r1 - h))
    w = dzp[r0 + off:r1 + 1 + off]
    s = dzp[r0 - h + off:r1 + 1 - h + off]
    return float(np.dot(w, s))


def rk_block(series: TickSeries, window: tuple[int, int], H: int,
             family: KernelFamily) -> float:
    """Flat-top realized kernel on one window with bandwidth H."""
    if H < 1:
        raise ValueError("bandwidth H must be at least 1")
    lo, hi = window
    if hi - lo < 1:
        raise ValueError("window must contain at least two observations")
    dz = np.diff(series.logprices)
    r0, r1 = lo, hi - 1
    dzp, off = _padded_returns(dz, r0 - H, r1 + H)
    w = dzp[r0 + off:r1 + 1 + off]
    acc = float(np.dot(w, w))
    for h in range(1, H + 1):
        kh = float(eval_kernel(family, (h - 1) / H))
        gp = float(np.dot(w, dzp[r0 - h + off:r1 + 1 - h + off]))
        gm = float(np.dot(w, dzp[r0 + h + off:r1 + 1 + h + off]))
        acc += kh * (gp + gm)
    return acc


def jitter(series: TickSeries, boundary_time: float, m: int) -> TickSeries:
    """Replace the boundary observation by the mean of its m nearest ticks."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if m == 1:
        return series
    if series.times.size < m:
        raise ValueError("insufficient neighborhood data for jittering")
    dist = np.abs(series.times - boundary_time)
    idx = int(np.argmin(dist))
    nearest = np.argsort(dist, kind="stable")[:m]
    lp = series.logprices.copy()
    lp[idx] = float(np.mean(series.logprices[nearest]))
    return TickSeries(series.times, lp, series.session_start,
                      series.session_end, series.meta)


def _auto_bandwidth(pilot: PilotEstimates, a2: float, delta_b: float,
                    n: int, B: int, prof: KernelProfile
                    ) -> tuple[int, float, float]:
    """(H, c*, xi2) for one block from its pilots."""
    if not pilot.quarticity > 0.0 or not a2 > 0.0:
        raise ValueError("degenerate pilots: cannot tune the bandwidth")
    xi2 = a2 / math.sqrt(delta_b * pilot.quarticity)
    c = c_star(pilot.rho, prof)
    h_raw = math.floor(c * math.sqrt(xi2) * math.sqrt(n / B) + 0.5)
    ub = max(1, n // B - 1)
    H = min(max(int(h_raw), 1), ub)
    if H != h_raw:
        log.info("bandwidth %d clamped to %d (bounds [1, %d])",
                 int(h_raw), H, ub)
    return H, c, xi2


def _block_avar(pilot: PilotEstimates, a2: float, delta_b: float,
                H: int, n: int, B: int, prof: KernelProfile) -> float:
    """Plug-in asymptotic variance contribution of one block.

    4 (block quarticity) {c k00 + 2 k11 rho xi^2 / c + k22 xi^4 / c^3}
    evaluated at the realized c = H / sqrt(n/B); equals
    a (Delta_B Q)^{3/4} g(rho) when H sits exactly at the optimum.
    """
    q_int = delta_b * pilot.quarticity
    xi2 = a2 / math.sqrt(q_int)
    c_eff = H / math.sqrt(n / B)
    bracket = (c_eff * prof.k00 + 2.0 * prof.k11 * pilot.rho * xi2 / c_eff
               + prof.k22 * xi2**2 / c_eff**3)
    return 4.0 * q_int * bracket


def local_rk(series: TickSeries, partition: BlockPartition,
             family: KernelFamily, bandwidths="auto", m: int = 25,
             preavg_cfg: PreAvgConfig | None = None,
             min_obs: int = MIN_BLOCK_OBS) -> RkEstimate:
    """Blocked realized kernel with jittered boundaries.

    bandwidths is either "auto" (pilot-tuned per block) or a sequence of
    B integers.
    """
    B = partition.B
    cfg = preavg_cfg or PreAvgConfig()
    i0, i1 = series.session_indices()
    n = i1 - i0
    edges = partition.edges(series.session_start, series.session_end)
    bidx = [i0] + [series.boundary_index(t) for t in edges[1:-1]] + [i1]
    for k in range(B):
        if bidx[k + 1] - bidx[k] < min_obs:
            raise ValueError(
                f"block {k} too short: {bidx[k + 1] - bidx[k]} returns, "
                f"need at least {min_obs}")

    manual = not (isinstance(bandwidths, str) and bandwidths == "auto")
    if manual:
        bandwidths = [int(h) for h in bandwidths]
        if len(bandwidths) != B:
            raise ValueError("need one bandwidth per block")

    jittered = series
    for t in edges:
        jittered = jitter(jittered, t, m)

    prof = profile(family)
    a2 = noise_variance(series)
    delta_b = series.session_span / B
    dz = np.diff(series.logprices)

    blocks = []
    for k in range(B):
        lo, hi = bidx[k], bidx[k + 1]
        n_k = hi - lo
        try:
            pilot = block_pilots(dz[lo:hi], delta_b / n_k, delta_b, cfg)
        except ValueError:
            if not manual:
                raise
            pilot = None
        if manual:
            H = bandwidths[k]
            if H < 1:
                raise ValueError("bandwidth H must be at least 1")
            if pilot is not None and pilot.quarticity > 0.0:
                c = H / math.sqrt(n / B)
                xi2 = a2 / math.sqrt(delta_b * pilot.quarticity)
            else:
                pilot = None
                c = xi2 = float("nan")
        else:
            H, c, xi2 = _auto_bandwidth(pilot, a2, delta_b, n, B, prof)
        est = rk_block(jittered, (lo, hi), H, family)
        avar = (_block_avar(pilot, a2, delta_b, H, n, B, prof)
                if pilot is not None else float("nan"))
        rho = pilot.rho if pilot is not None else float("nan")
        blocks.append(BlockEstimate(est, H, c, rho, xi2, avar))
    return RkEstimate(float(sum(b.k for b in blocks)), tuple(blocks))
