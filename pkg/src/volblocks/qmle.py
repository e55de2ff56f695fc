"""Gaussian MA(1) quasi-likelihood estimation of (sigma^2, a^2).

Observed returns under additive noise have the tridiagonal covariance
Omega with diagonal sigma^2 delta_tilde + 2 a^2 and off-diagonal -a^2.
Both the log-determinant and the quadratic form are O(n) through the
standard symmetric tridiagonal recursions, so a likelihood evaluation
costs one pass over the returns.

The blocked estimator fits each block separately and reports
q_i = Delta_B * sigma2_hat_i; on irregular grids delta_tilde is the
block span over the block's own return count.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .preavg import noise_variance
from .rk import MIN_BLOCK_OBS, BlockPartition
from .series import TickSeries

log = logging.getLogger(__name__)

#: minimum observations per block for a stable fit
MIN_FIT_OBS = 10

LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def _logdet_tridiag(diag: float, off: float, n: int) -> float:
    """log det of the n x n symmetric tridiagonal Toeplitz matrix.

    Pivot-ratio recursion r_k = diag - off^2 / r_{k-1}; the matrix is
    positive definite iff every pivot is positive. Returns nan on a
    non-positive pivot.
    """
    off2 = off * off
    r = diag
    if r <= 0.0:
        return np.nan
    # compensated summation: n can be large and the individual logs
    # nearly equal, where a plain running sum loses ~n*eps*|total|
    acc = math.log(r)
    comp = 0.0
    for _ in range(1, n):
        r = diag - off2 / r
        if r <= 0.0:
            return np.nan
        y = math.log(r) - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc


@njit(cache=True)
def _quadform_tridiag(y: np.ndarray, diag: float, off: float) -> float:
    """y' Omega^{-1} y by symmetric tridiagonal elimination.

    Returns nan on pivot breakdown (indefinite matrix).
    """
    n = y.size
    # forward sweep: d_k are the pivots, z the transformed rhs
    d = diag
    if d <= 0.0:
        return np.nan
    z = np.empty(n)
    piv = np.empty(n)
    piv[0] = d
    z[0] = y[0]
    for k in range(1, n):
        w = off / piv[k - 1]
        piv[k] = diag - w * off
        if piv[k] <= 0.0:
            return np.nan
        z[k] = y[k] - w * z[k - 1]
    # back substitution
    x = np.empty(n)
    x[n - 1] = z[n - 1] / piv[n - 1]
    for k in range(n - 2, -1, -1):
        x[k] = (z[k] - off * x[k + 1]) / piv[k]
    acc = 0.0
    for k in range(n):
        acc += y[k] * x[k]
    return acc


@njit(cache=True)
def _loglik_core(y: np.ndarray, diag: float, off: float) -> float:
    """log det and quadratic form in one LDL' sweep.

    With unit-bidiagonal L and pivots d_k, y' Omega^{-1} y equals
    sum w_k^2 / d_k where L w = y, so no back-substitution or scratch
    arrays are needed. Returns the full quasi-log-likelihood, nan if the
    matrix is not positive definite.
    """
    n = y.size
    d = diag
    if d <= 0.0:
        return np.nan
    w = y[0]
    logdet = math.log(d)
    comp = 0.0
    qf = w * w / d
    k = 1
    # the pivots contract to a fixed point; run the full recursion until
    # they stop moving in double precision
    while k < n:
        l = off / d
        dn = diag - l * off
        if dn <= 0.0:
            return np.nan
        moved = dn != d
        d = dn
        t1 = math.log(d) - comp
        t2 = logdet + t1
        comp = (t2 - logdet) - t1
        logdet = t2
        w = y[k] - l * w
        qf += w * w / d
        k += 1
        if not moved:
            break
    if k < n:
        # frozen-pivot tail: only the rhs recursion remains
        l = off / d
        inv_d = 1.0 / d
        logdet += (n - k) * math.log(d)
        for j in range(k, n):
            w = y[j] - l * w
            qf += w * w * inv_d
    return -0.5 * (n * LOG_2PI + logdet + qf)


def tridiag_logdet(diag: float, off: float, n: int) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    v = float(_logdet_tridiag(diag, off, n))
    if math.isnan(v):
        raise ValueError("matrix is not positive definite")
    return v


def tridiag_quadform(y: np.ndarray, diag: float, off: float) -> float:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.size < 1:
        raise ValueError("y must be non-empty")
    v = float(_quadform_tridiag(y, diag, off))
    if math.isnan(v):
        raise ValueError("pivot breakdown: matrix is not positive definite")
    return v


def quasi_loglik(returns: np.ndarray, sigma2: float, a2: float,
                 delta_tilde: float) -> float:
    """-1/2 [ n log 2pi + log det Omega + y' Omega^{-1} y ]."""
    if sigma2 < 0.0 or a2 <= 0.0 or delta_tilde <= 0.0:
        raise ValueError("need sigma2 >= 0, a2 > 0, delta_tilde > 0")
    y = np.ascontiguousarray(returns, dtype=np.float64)
    diag = sigma2 * delta_tilde + 2.0 * a2
    v = float(_loglik_core(y, diag, -a2))
    assert not math.isnan(v), \
        "tridiagonal covariance must be positive definite for valid inputs"
    return v


@dataclass(frozen=True)
class QmleFit:
    sigma2_hat: float
    a2_hat: float
    loglik: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class QmleBlock:
    q: float
    sigma2_hat: float
    a2_hat: float
    n: int
    avar: float


@dataclass(frozen=True)
class QmleEstimate:
    total: float
    blocks: tuple[QmleBlock, ...]
    a2_mean: float
    converged: bool = True


def _default_box(returns: np.ndarray, delta_tilde: float
                 ) -> tuple[tuple[float, float], tuple[float, float]]:
    rv = float(np.sum(returns**2))
    span = delta_tilde * returns.size
    s2_scale = max(rv / span, 1e-300)
    a2_hat = max(rv / (2.0 * returns.size), 1e-300)
    return ((1e-4 * s2_scale, 1e4 * s2_scale), (1e-2 * a2_hat, 1e2 * a2_hat))


def fit_qmle(returns: np.ndarray, delta_tilde: float,
             box=None) -> QmleFit:
    """Maximize the quasi-likelihood over a positive box in (sigma2, a2).

    Derivative-free simplex search in log-parameters with four
    multi-starts placed at the quarter points of the log box.
    """
    y = np.ascontiguousarray(returns, dtype=np.float64)
    if y.size < MIN_FIT_OBS:
        raise ValueError(f"need at least {MIN_FIT_OBS} returns")
    if box is None:
        box = _default_box(y, delta_tilde)
    (s_lo, s_hi), (a_lo, a_hi) = box
    if not (0 < s_lo < s_hi and 0 < a_lo < a_hi):
        raise ValueError("box bounds must be positive and ordered")
    lb = np.log([s_lo, a_lo])
    ub = np.log([s_hi, a_hi])
    width = ub - lb

    def neg(logp):
        p = np.clip(logp, lb, ub)
        penalty = float(np.sum((logp - p) ** 2))
        s2, a2 = np.exp(p)
        return -quasi_loglik(y, s2, a2, delta_tilde) + 1e6 * penalty

    scale = abs(neg(lb + 0.5 * width)) + 1.0
    best = None
    iters = 0
    ok = False
    for fs, fa in ((0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)):
        x0 = lb + width * np.array([fs, fa])
        res = minimize(neg, x0, method="Nelder-Mead",
                       options=dict(maxiter=500, fatol=1e-10 * scale,
                                    xatol=1e-10, adaptive=False))
        iters += int(res.nit)
        if best is None or res.fun < best.fun:
            best = res
        ok = ok or bool(res.success)
    p = np.clip(best.x, lb, ub)
    edge_tol = 1e-6 * np.maximum(width, 1.0)
    at_edge = bool(np.any(p - lb < edge_tol) or np.any(ub - p < edge_tol))
    if at_edge:
        log.warning("fit at the search-box edge; flagging non-convergence")
    s2, a2 = np.exp(p)
    return QmleFit(float(s2), float(a2), quasi_loglik(y, s2, a2, delta_tilde),
                   iters, ok and not at_edge)


def _block_avar(delta_b: float, sigma2: float, a2: float, n_block: int
                ) -> float:
    """Plug-in asymptotic variance contribution of one block:
    5 Delta_B a int sigma^4 / sqrt(int sigma^2) + 3 a (int sigma^2)^{3/2}
    with a = sqrt(a2) and the integrals evaluated at the block's fitted
    constant volatility, int sigma^2 = q and int sigma^4 = Delta_B s^4.
    """
    a = math.sqrt(max(a2, 0.0))
    q = delta_b * sigma2
    if q <= 0.0:
        return 0.0
    quart = delta_b * sigma2**2
    return 5.0 * delta_b * a * quart / math.sqrt(q) + 3.0 * a * q**1.5


def local_qmle(series: TickSeries, partition: BlockPartition,
               box=None) -> QmleEstimate:
    """Blocked QMLE: per-block fits aggregated as Q = sum Delta_B s2_i."""
    B = partition.B
    i0, i1 = series.session_indices()
    edges = partition.edges(series.session_start, series.session_end)
    bidx = [i0] + [series.boundary_index(t) for t in edges[1:-1]] + [i1]
    dz = np.diff(series.logprices)
    delta_b = series.session_span / B
    blocks = []
    converged = True
    for k in range(B):
        lo, hi = bidx[k], bidx[k + 1]
        n_k = hi - lo
        if n_k < MIN_FIT_OBS:
            raise ValueError(f"block {k} too short: {n_k} returns")
        fit = fit_qmle(dz[lo:hi], delta_b / n_k, box)
        converged = converged and fit.converged
        q = delta_b * fit.sigma2_hat
        blocks.append(QmleBlock(q, fit.sigma2_hat, fit.a2_hat, n_k,
                                _block_avar(delta_b, fit.sigma2_hat,
                                            fit.a2_hat, n_k)))
    total = float(sum(b.q for b in blocks))
    a2_mean = float(np.mean([b.a2_hat for b in blocks]))
    return QmleEstimate(total, tuple(blocks), a2_mean, converged)
