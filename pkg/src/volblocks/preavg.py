"""Pre-averaging pilot estimators.

These are not reported as estimators of record; they feed the bandwidth
and variance plug-ins: block integrated volatility, block quarticity,
the noise variance, the heteroskedasticity ratio rho-hat and the tuning
constant c-hat*.

The weight function is the triangular f(x) = min(x, 1-x), for which
psi1 = 1 and psi2 = 1/12 in the limit. Internally the finite-window
counterparts psi1_k, psi2_k are used so the estimators are unbiased at
the actual window length rather than asymptotically.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .series import SECONDS_PER_YEAR, TickSeries
from .kernels import KernelProfile, c_star

log = logging.getLogger(__name__)

#: clip bounds for rho-hat; estimates above 1 are deliberately allowed
RHO_CLIP = (0.05, 1.5)


def triangular(x):
    return np.minimum(x, 1.0 - x)


def _triangular_d(x):
    return np.where(x < 0.5, 1.0, -1.0)


@functools.lru_cache(maxsize=1)
def phi_constants() -> dict:
    """Quadrature values of the interaction constants Phi11, Phi12, Phi22.

    Exposed for completeness; only psi1 and psi2 enter the estimators.
    """
    def phi1(s):
        return quad(lambda u: float(_triangular_d(u) * _triangular_d(u - s)),
                    s, 1.0, points=[0.5, min(s + 0.5, 1.0)], limit=100)[0]

    def phi2(s):
        return quad(lambda u: float(triangular(u) * triangular(u - s)),
                    s, 1.0, points=[0.5, min(s + 0.5, 1.0)], limit=100)[0]

    grid_opts = dict(limit=200, epsrel=1e-10)
    return {
        "Phi11": quad(lambda s: phi1(s) ** 2, 0.0, 1.0, **grid_opts)[0],
        "Phi12": quad(lambda s: phi1(s) * phi2(s), 0.0, 1.0, **grid_opts)[0],
        "Phi22": quad(lambda s: phi2(s) ** 2, 0.0, 1.0, **grid_opts)[0],
    }


@dataclass(frozen=True)
class PreAvgConfig:
    """Pilot tuning. window is the pre-averaging span in years
    (default 30 trading seconds)."""

    window: float = 30.0 / SECONDS_PER_YEAR
    psi1: float = 1.0
    psi2: float = 1.0 / 12.0

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("window must be positive")

    def k_window(self, delta: float) -> int:
        """Number of returns averaged: k = max(2, round(window / delta))."""
        if delta <= 0:
            raise ValueError("delta must be positive")
        return max(2, int(round(self.window / delta)))


def psi_finite(k: int) -> tuple[float, float]:
    """Finite-window psi constants for the triangular weight.

    psi1_k = k sum (f(j/k) - f((j-1)/k))^2, psi2_k = (1/k) sum f(j/k)^2.
    For the triangular weight psi1_k is 1 for even k and (k-1)/k for odd
    k (the middle increment is flat).
    """
    j = np.arange(1, k + 1)
    f = triangular(j / k)
    fprev = triangular((j - 1) / k)
    psi1 = k * float(np.sum((f - fprev) ** 2))
    psi2 = float(np.sum(triangular(np.arange(1, k) / k) ** 2)) / k
    return psi1, psi2


def _session_returns(z: TickSeries) -> np.ndarray:
    i0, i1 = z.session_indices()
    return np.diff(z.logprices[i0:i1 + 1])


def noise_variance(z: TickSeries | np.ndarray) -> float:
    """a2-hat = sum of squared returns over twice the return count."""
    dz = _session_returns(z) if isinstance(z, TickSeries) else np.diff(np.asarray(z, float))
    if dz.size < 1:
        raise ValueError("need at least two observations")
    return float(np.sum(dz**2)) / (2.0 * dz.size)


def _preavg_returns(dz: np.ndarray, k: int) -> np.ndarray:
    w = triangular(np.arange(1, k) / k)
    return np.convolve(dz, w[::-1], mode="valid")


def preavg_iv_core(dz: np.ndarray, delta: float, k: int,
                   psi1: float, psi2: float) -> float:
    n = dz.size
    zbar = _preavg_returns(dz, k)
    main = float(np.sum(zbar**2)) / (k * psi2) * (n / zbar.size)
    bias = psi1 / (2.0 * k**2 * psi2) * float(np.sum(dz**2))
    return main - bias


def preavg_quarticity_core(dz: np.ndarray, delta: float, k: int,
                           psi1: float, psi2: float) -> float:
    """Three-term quarticity pilot; can be negative in finite samples."""
    n = dz.size
    zbar = _preavg_returns(dz, k)
    theta2 = k * k * delta
    a_term = float(np.sum(zbar**4)) / (3.0 * theta2 * psi2**2) * (n / zbar.size)

    # squared-return window [j+k, j+2k-1], disjoint from the averaging span
    dz2 = dz**2
    csum = np.concatenate(([0.0], np.cumsum(dz2)))
    j_max = n - 2 * k  # last j with j+2k-1 <= n-1
    b_term = 0.0
    if j_max >= 0:
        j = np.arange(j_max + 1)
        win = csum[j + 2 * k] - csum[j + k]
        b_sum = float(np.sum(zbar[: j_max + 1] ** 2 * win))
        b_term = delta * psi1 / (theta2**2 * psi2**2) * b_sum \
            * (n / (j_max + 1))
    c_sum = float(np.sum(dz2[:-2] * dz2[2:]))
    c_term = delta * psi1**2 / (4.0 * theta2**2 * psi2**2) * c_sum \
        * (n / max(n - 2, 1))
    return a_term - b_term + c_term


@dataclass(frozen=True)
class PilotEstimates:
    iv: float
    quarticity: float
    noise_var: float
    rho_raw: float
    rho: float
    k: int
    theta: float
    floored: bool


def block_pilots(dz: np.ndarray, delta: float, block_len: float,
                 cfg: PreAvgConfig) -> PilotEstimates:
    """All pilot quantities for one block of returns."""
    k = cfg.k_window(delta)
    if dz.size < 2 * k:
        raise ValueError(
            f"block too short for the pre-averaging window: {dz.size} returns,"
            f" need at least {2 * k}")
    psi1, psi2 = psi_finite(k)
    iv = preavg_iv_core(dz, delta, k, psi1, psi2)
    q = preavg_quarticity_core(dz, delta, k, psi1, psi2)
    a2 = float(np.sum(dz**2)) / (2.0 * dz.size)
    floored = False
    if not q > 0.0:
        floor = 0.01 * max(iv, 0.0) ** 2 / block_len
        if floor <= 0.0:
            floor = (a2 / block_len) ** 2 * block_len  # degenerate fallback
        log.warning("quarticity pilot %.3e not positive; floored to %.3e",
                    q, floor)
        q = floor
        floored = True
    if iv > 0.0:
        rho_raw = iv / math.sqrt(block_len * q)
    else:
        log.warning("integrated-volatility pilot %.3e not positive; "
                    "rho set to lower clip", iv)
        rho_raw = RHO_CLIP[0]
    rho = min(max(rho_raw, RHO_CLIP[0]), RHO_CLIP[1])
    if rho != rho_raw:
        log.debug("rho-hat %.4f clipped to %.4f", rho_raw, rho)
    return PilotEstimates(iv, q, a2, rho_raw, rho, k,
                          k * math.sqrt(delta), floored)


def _block_inputs(z: TickSeries) -> tuple[np.ndarray, float, float]:
    dz = _session_returns(z)
    span = z.session_span
    return dz, span / dz.size, span


def preavg_iv(z: TickSeries, cfg: PreAvgConfig | None = None) -> float:
    cfg = cfg or PreAvgConfig()
    dz, delta, span = _block_inputs(z)
    k = cfg.k_window(delta)
    if dz.size < 2 * k:
        raise ValueError("block too short for the pre-averaging window")
    psi1, psi2 = psi_finite(k)
    return preavg_iv_core(dz, delta, k, psi1, psi2)


def preavg_quarticity(z: TickSeries, cfg: PreAvgConfig | None = None) -> float:
    cfg = cfg or PreAvgConfig()
    dz, delta, span = _block_inputs(z)
    k = cfg.k_window(delta)
    if dz.size < 2 * k:
        raise ValueError("block too short for the pre-averaging window")
    psi1, psi2 = psi_finite(k)
    return preavg_quarticity_core(dz, delta, k, psi1, psi2)


def rho_hat(z: TickSeries, block_len: float | None = None,
            cfg: PreAvgConfig | None = None) -> float:
    cfg = cfg or PreAvgConfig()
    dz, delta, span = _block_inputs(z)
    return block_pilots(dz, delta, block_len or span, cfg).rho


def c_hat_star(z: TickSeries, block_len: float | None,
               cfg: PreAvgConfig | None, profile: KernelProfile) -> float:
    return c_star(rho_hat(z, block_len, cfg), profile)
