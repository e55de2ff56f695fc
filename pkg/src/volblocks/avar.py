"""Asymptotic-variance, efficiency-bound, and loss arithmetic.

Everything here is deterministic: the inputs are volatility functionals
(piecewise-constant sigma paths plus noise level and jump marks), so the
same code serves exact textbook-style examples and simulator ground
truth. Feasible (plug-in) variants take a tick series and reuse the
pre-averaging pilots.

Conventions: integrals are over clock intervals in years, a0 is the
noise standard deviation, and every loss is AVAR / bound - 1 with the
bound of efficiency 8 a0 sqrt(T) int sigma^3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelProfile, c_star, g
from .preavg import PreAvgConfig, block_pilots, noise_variance
from .rk import BlockPartition
from .series import TickSeries

__all__ = [
    "VolFunctionals", "BlockedAvar", "RobustLimits",
    "measures", "bound_efficiency", "avar_rk", "avar_rk_opt", "avar_qmle",
    "avar_blocked", "avar_feasible", "robust_limits",
    "loss_rk", "loss_qmle", "ushape_jump_path", "jump_time_for_rho",
    "USHAPE_JUMP",
]


@dataclass(frozen=True)
class VolFunctionals:
    """Piecewise-constant volatility path with noise level and jumps.

    sigma[k] holds on [grid[k], grid[k+1]); alpha is the sampling
    intensity on the same grid (None means regular sampling, alpha = 1).
    """

    grid: np.ndarray
    sigma: np.ndarray
    a0: float
    jumps: tuple[tuple[float, float], ...] = ()
    alpha: np.ndarray | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "sigma", sigma)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing, length >= 2")
        if sigma.shape != (grid.size - 1,):
            raise ValueError("need one sigma value per grid interval")
        if np.any(sigma < 0):
            raise ValueError("sigma must be non-negative")
        if self.a0 < 0:
            raise ValueError("a0 must be non-negative")
        if self.alpha is not None:
            alpha = np.asarray(self.alpha, dtype=float)
            object.__setattr__(self, "alpha", alpha)
            if alpha.shape != sigma.shape or np.any(alpha <= 0):
                raise ValueError("alpha must be positive, one per interval")

    @classmethod
    def from_blocks(cls, sigmas, horizon: float, a0: float = 1.0,
                    jumps=(), alpha=None) -> "VolFunctionals":
        """Equal-length intervals spanning [0, horizon]."""
        sigmas = np.asarray(sigmas, dtype=float)
        grid = np.linspace(0.0, horizon, sigmas.size + 1)
        return cls(grid, sigmas, a0, tuple(jumps), alpha)

    @classmethod
    def from_path(cls, bundle) -> "VolFunctionals":
        """Ground-truth functionals of a simulated path bundle."""
        t = bundle.euler_times
        T = bundle.config.horizon
        keep = (t >= 0.0) & (t <= T)
        grid = t[keep]
        idx = np.flatnonzero(keep)[:-1]
        return cls(grid, bundle.sigma_path[idx], bundle.a0,
                   tuple(bundle.jumps))

    @property
    def horizon(self) -> float:
        return float(self.grid[-1] - self.grid[0])

    def integral(self, p: float, r: float | None = None,
                 s: float | None = None) -> float:
        """Exact int_r^s sigma^p du on the piecewise-constant path."""
        r = self.grid[0] if r is None else r
        s = self.grid[-1] if s is None else s
        if s <= r:
            raise ValueError("degenerate interval")
        lo = np.clip(self.grid[:-1], r, s)
        hi = np.clip(self.grid[1:], r, s)
        return float(np.sum(self.sigma**p * (hi - lo)))

    def alpha_integral(self, p: float) -> float:
        """int alpha^p du; alpha = 1 when no intensity path is attached."""
        if self.alpha is None:
            return self.horizon
        return float(np.sum(self.alpha**p * np.diff(self.grid)))

    def _interval_of(self, t: float, left: bool = False) -> int:
        side = "left" if left else "right"
        k = int(np.searchsorted(self.grid, t, side=side)) - 1
        return min(max(k, 0), self.sigma.size - 1)

    def sigma_at(self, t: float, left: bool = False) -> float:
        return float(self.sigma[self._interval_of(t, left)])

    def alpha_at(self, t: float, left: bool = False) -> float:
        if self.alpha is None:
            return 1.0
        return float(self.alpha[self._interval_of(t, left)])

    @property
    def iv(self) -> float:
        return self.integral(2)

    @property
    def tricity(self) -> float:
        return self.integral(3)

    @property
    def quarticity(self) -> float:
        return self.integral(4)

    @property
    def qv(self) -> float:
        return self.iv + sum(dj**2 for _, dj in self.jumps)


def measures(f: VolFunctionals, r: float | None = None,
             s: float | None = None) -> tuple[float, float, float]:
    """Heteroskedasticity measures (rho, kappa) and noise ratio xi2.

    rho = IV / sqrt((s-r) quarticity),
    kappa = tricity / ((s-r)^{1/4} quarticity^{3/4}),
    xi2 = a0^2 / sqrt((s-r) quarticity), all integrals on (r, s).
    """
    r = float(f.grid[0]) if r is None else r
    s = float(f.grid[-1]) if s is None else s
    span = s - r
    if span <= 0:
        raise ValueError("degenerate interval")
    q = f.integral(4, r, s)
    root = math.sqrt(span * q)
    rho = f.integral(2, r, s) / root
    kappa = f.integral(3, r, s) / (span**0.25 * q**0.75)
    xi2 = f.a0**2 / root
    return rho, kappa, xi2


def bound_efficiency(f: VolFunctionals) -> float:
    """Nonparametric lower bound 8 a0 sqrt(T) int sigma^3."""
    return 8.0 * f.a0 * math.sqrt(f.horizon) * f.tricity


def avar_rk(f: VolFunctionals, r: float, s: float, c: float,
            profile: KernelProfile) -> float:
    """RK asymptotic variance on (r, s) at tuning constant c:
    4 (s-r) int sigma^4 { c k00 + 2 k11 rho xi^2 / c + k22 xi^4 / c^3 }.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    rho, _, xi2 = measures(f, r, s)
    q = f.integral(4, r, s)
    bracket = (c * profile.k00 + 2.0 * profile.k11 * rho * xi2 / c
               + profile.k22 * xi2**2 / c**3)
    return 4.0 * (s - r) * q * bracket


def avar_rk_opt(f: VolFunctionals, r: float | None = None,
                s: float | None = None,
                profile: KernelProfile = None) -> float:
    """RK asymptotic variance at the optimal c:
    a0 ((s-r) int sigma^4)^{3/4} g(rho)."""
    r = float(f.grid[0]) if r is None else r
    s = float(f.grid[-1]) if s is None else s
    rho, _, _ = measures(f, r, s)
    q = f.integral(4, r, s)
    return f.a0 * ((s - r) * q) ** 0.75 * g(rho, profile)


def avar_qmle(f: VolFunctionals, r: float | None = None,
              s: float | None = None) -> float:
    """QMLE asymptotic variance on (r, s):
    5 (s-r) a0 int sigma^4 / sqrt(int sigma^2) + 3 a0 (int sigma^2)^{3/2}.
    """
    r = float(f.grid[0]) if r is None else r
    s = float(f.grid[-1]) if s is None else s
    iv = f.integral(2, r, s)
    if iv <= 0:
        raise ValueError("integrated volatility must be positive")
    q = f.integral(4, r, s)
    return f.a0 * (5.0 * (s - r) * q / math.sqrt(iv) + 3.0 * iv**1.5)


@dataclass(frozen=True)
class BlockedAvar:
    avar: float
    loss: float
    per_block: tuple[float, ...]


def avar_blocked(f: VolFunctionals, partition: BlockPartition,
                 estimator: str, profile: KernelProfile | None = None
                 ) -> BlockedAvar:
    """B^{1/2} sum of per-block optimal AVARs, plus the loss vs bound."""
    if estimator not in ("rk", "qmle"):
        raise ValueError("estimator must be 'rk' or 'qmle'")
    if estimator == "rk" and profile is None:
        raise ValueError("rk needs a kernel profile")
    B = partition.B
    edges = partition.edges(float(f.grid[0]), float(f.grid[-1]))
    per = []
    for k in range(B):
        r, s = float(edges[k]), float(edges[k + 1])
        if estimator == "rk":
            per.append(avar_rk_opt(f, r, s, profile))
        else:
            per.append(avar_qmle(f, r, s))
    total = math.sqrt(B) * sum(per)
    return BlockedAvar(total, total / bound_efficiency(f) - 1.0, tuple(per))


def avar_feasible(series: TickSeries, partition: BlockPartition,
                  estimator: str, profile: KernelProfile | None = None,
                  preavg_cfg: PreAvgConfig | None = None) -> float:
    """Plug-in blocked AVAR from the pre-averaging pilots and a-hat."""
    if estimator not in ("rk", "qmle"):
        raise ValueError("estimator must be 'rk' or 'qmle'")
    if estimator == "rk" and profile is None:
        raise ValueError("rk needs a kernel profile")
    cfg = preavg_cfg or PreAvgConfig()
    B = partition.B
    i0, i1 = series.session_indices()
    edges = partition.edges(series.session_start, series.session_end)
    bidx = [i0] + [series.boundary_index(t) for t in edges[1:-1]] + [i1]
    dz = np.diff(series.logprices)
    delta_b = series.session_span / B
    a_hat = math.sqrt(noise_variance(series))
    acc = 0.0
    for k in range(B):
        lo, hi = bidx[k], bidx[k + 1]
        n_k = hi - lo
        pilot = block_pilots(dz[lo:hi], delta_b / n_k, delta_b, cfg)
        if estimator == "rk":
            acc += a_hat * (delta_b * pilot.quarticity) ** 0.75 \
                * g(pilot.rho, profile)
        else:
            iv = max(pilot.iv, 1e-300)
            acc += a_hat * (5.0 * delta_b * pilot.quarticity / math.sqrt(iv)
                            + 3.0 * iv**1.5)
    return math.sqrt(B) * acc


@dataclass(frozen=True)
class RobustLimits:
    rk_limit: float
    rk_jump_term: float
    qmle_limit: float
    qmle_jump_divergence_coeff: float


def robust_limits(f: VolFunctionals, profile: KernelProfile) -> RobustLimits:
    """Large-B AVAR limits under stochastic sampling times and jumps.

    With intensity path alpha and I = int alpha^{-1}:
      RK:   g(1) a0 sqrt(I) int alpha^{1/2} sigma^3, plus the jump term
            (16/3) a0 (1/sqrt2 + sqrt2) sqrt(k00 k11) sqrt(I)
            sum dJ^2 sqrt(sigma^2 alpha + sigma_-^2 alpha_-);
      QMLE: 8 a0 sqrt(I) int alpha^{1/2} sigma^3; with jumps the blocked
            AVAR diverges like B^{1/2} with coefficient
            3 a0 T^{-1/2} sqrt(I) sum alpha^{1/2} |dJ|^3.
    alpha = 1 recovers the regular-sampling limits g(1)/8 * bound and
    bound exactly.
    """
    inv_alpha = f.alpha_integral(-1.0)
    root_i = math.sqrt(inv_alpha)
    if f.alpha is None:
        weighted_tricity = f.tricity
    else:
        weighted_tricity = float(np.sum(
            np.sqrt(f.alpha) * f.sigma**3 * np.diff(f.grid)))
    rk_limit = g(1.0, profile) * f.a0 * root_i * weighted_tricity
    qmle_limit = 8.0 * f.a0 * root_i * weighted_tricity

    jump_sum = 0.0
    q_sum = 0.0
    for t, dj in f.jumps:
        s_r, s_l = f.sigma_at(t), f.sigma_at(t, left=True)
        a_r, a_l = f.alpha_at(t), f.alpha_at(t, left=True)
        jump_sum += dj**2 * math.sqrt(s_r**2 * a_r + s_l**2 * a_l)
        q_sum += math.sqrt(a_r) * abs(dj) ** 3
    rk_jump = ((16.0 / 3.0) * f.a0 * (1.0 / math.sqrt(2) + math.sqrt(2))
               * math.sqrt(profile.k00 * profile.k11) * root_i * jump_sum)
    qmle_coeff = 3.0 * f.a0 / math.sqrt(f.horizon) * root_i * q_sum
    return RobustLimits(rk_limit, rk_jump, qmle_limit, qmle_coeff)


#: U-shape constants of the deterministic loss-curve path: an intraday
#: smile C + A exp(-a t/T) + D exp(-b (1 - t/T)) with a 50% downward
#: volatility jump whose time indexes the achieved rho
USHAPE_JUMP = dict(C=0.88929198, A=0.75, D=0.25, a=10.0, b=10.0, beta=0.5)


def ushape_jump_path(tau_frac: float, horizon: float = 1.0,
                     a0: float = 1.0, n_grid: int = 20_000,
                     **overrides) -> VolFunctionals:
    """Deterministic U-shape volatility with one downward jump at
    tau_frac * horizon. Used for loss-vs-rho curves."""
    if not 0.0 < tau_frac <= 1.0:
        raise ValueError("tau_frac must be in (0, 1]")
    p = {**USHAPE_JUMP, **overrides}
    T = horizon
    t = np.linspace(0.0, T, n_grid + 1)
    x = t[:-1] / T

    def smile(u):
        return p["C"] + p["A"] * np.exp(-p["a"] * u) \
            + p["D"] * np.exp(-p["b"] * (1.0 - u))

    sig = smile(x) - p["beta"] * float(smile(np.array([tau_frac]))[0]) \
        * (x >= tau_frac)
    return VolFunctionals(t, np.maximum(sig, 0.0), a0)


def jump_time_for_rho(rho_target: float, horizon: float = 1.0,
                      a0: float = 1.0, n_grid: int = 20_000,
                      **overrides) -> float:
    """Jump-time fraction at which the loss-curve path attains rho.

    rho is increasing in the jump time on [0.013, 1], so a bracketed
    root search suffices.
    """
    from scipy.optimize import brentq

    def rho_of(frac):
        f = ushape_jump_path(frac, horizon, a0, n_grid, **overrides)
        return measures(f)[0]

    lo, hi = 0.013, 1.0
    r_lo, r_hi = rho_of(lo), rho_of(hi)
    if not r_lo <= rho_target <= r_hi:
        raise ValueError(
            f"rho target {rho_target} outside attainable range "
            f"[{r_lo:.3f}, {r_hi:.3f}]")
    return float(brentq(lambda x: rho_of(x) - rho_target, lo, hi,
                        xtol=1e-12))


def loss_rk(rho: float, kappa: float, profile: KernelProfile) -> float:
    """g(rho) / (8 kappa) - 1."""
    return g(rho, profile) / (8.0 * kappa) - 1.0


def loss_qmle(rho: float, kappa: float) -> float:
    """(5 + 3 rho^2) / (8 kappa sqrt(rho)) - 1."""
    return (5.0 + 3.0 * rho**2) / (8.0 * kappa * math.sqrt(rho)) - 1.0
