"""Discretized fixed-point operator F = (F1, F2) on a truncated uniform grid.

F_i(u)(xi) = (1/Lambda_i) [ int_{-inf}^{xi} e^{lam_i^-(xi-y)} h_i(y) dy
                          + int_{xi}^{inf}  e^{lam_i^+(xi-y)} h_i(y) dy ]

Both integrals are accumulated by first-order recurrences over the cells. Within a
cell the source is replaced by its linear interpolant and integrated against the
exponential kernel exactly (product integration), so the rule is exact for
piecewise-linear sources regardless of how stiff the kernel is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .bounds import BoundSet, eval_profiles
from .model import SpectralData, _force

RIGHT_LIMIT_NODES = 5
GAMMA_TOL = 1e-8


class GridMismatch(ValueError):
    pass


class OutsideGamma(ValueError):
    pass


@dataclass(frozen=True)
class WaveGrid:
    xi_min: float = -60.0
    xi_max: float = 120.0
    n: int = 9001

    def __post_init__(self):
        if not self.xi_max > self.xi_min:
            raise ValueError("xi_max must exceed xi_min")
        if self.n < 8:
            raise ValueError("grid needs at least 8 nodes")

    @property
    def h(self) -> float:
        return (self.xi_max - self.xi_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return _nodes(self.xi_min, self.xi_max, self.n)

    @classmethod
    def from_spacing(cls, xi_min: float, xi_max: float, h: float) -> "WaveGrid":
        n = int(round((xi_max - xi_min) / h)) + 1
        return cls(xi_min, xi_max, n)

    @classmethod
    def default_for(cls, spec: SpectralData, bs: BoundSet, h: Optional[float] = None) -> "WaveGrid":
        """[-60, 120] scaled by 1/lambda*, widened where the pulse decays slowly behind the front.

        Behind the front I decays like e^{-(gamma/b) xi}, b = (c* + sqrt(c*^2 + 4 d2 gamma))/2.
        """
        lam = spec.lambda_star
        prm = spec.params
        b = 0.5 * (spec.c_star + math.sqrt(spec.c_star**2 + 4.0 * prm.d2 * prm.gamma))
        # keep 30 length units left of xi3 so the leading edge can be fitted
        xi_min = min(-60.0 / lam, min(bs.xi2, bs.xi3) - 20.0 / lam, bs.xi3 - 30.0)
        xi_max = max(120.0 / lam, 40.0 * b / prm.gamma, bs.xi1 + 40.0 * prm.d2 / spec.c_star)
        if h is None:
            h = min(0.02 / lam, 0.25 / max(spec.lambda1_plus, spec.lambda2_plus))
        return cls.from_spacing(xi_min, xi_max, h)

    def check_requirements(self, spec: SpectralData, bs: BoundSet) -> list[str]:
        """Return the violated grid requirements (empty when the grid is adequate)."""
        issues = []
        lam = spec.lambda_star
        if not self.xi_min < min(bs.xi2, bs.xi3) - 10.0 / lam:
            issues.append("xi_min too close to the sub-solution kinks")
        if not self.xi_max > bs.xi1 + 20.0 * spec.params.d2 / spec.c_star:
            issues.append("xi_max too short to hold the infection pulse")
        if not self.h * max(spec.lambda1_plus, spec.lambda2_plus) < 0.5:
            issues.append("spacing does not resolve the fastest kernel")
        return issues

    def to_dict(self) -> dict:
        return {"xi_min": self.xi_min, "xi_max": self.xi_max, "n": self.n, "h": self.h}


@lru_cache(maxsize=32)
def _nodes(xi_min, xi_max, n):
    x = np.linspace(xi_min, xi_max, n)
    x.flags.writeable = False
    return x


@dataclass
class WaveProfile:
    grid: WaveGrid
    s: np.ndarray
    i: np.ndarray
    s_right_limit: Optional[float] = field(default=None)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.i = np.asarray(self.i, dtype=float)
        if self.s.shape != (self.grid.n,) or self.i.shape != (self.grid.n,):
            raise GridMismatch(f"profile arrays must have shape ({self.grid.n},)")
        if self.s_right_limit is None:
            self.s_right_limit = float(self.s[-RIGHT_LIMIT_NODES:].mean())

    @property
    def xi(self) -> np.ndarray:
        return self.grid.nodes

    def copy(self) -> "WaveProfile":
        return WaveProfile(self.grid, self.s.copy(), self.i.copy())


def _series(z: float, denom) -> float:
    # sum_k z^k / (k! denom(k)), used where the closed forms cancel
    total, term = 0.0, 1.0
    for k in range(30):
        total += term / denom(k)
        term *= z / (k + 1)
    return total


@lru_cache(maxsize=64)
def cell_weights(z: float) -> tuple[float, float]:
    """(int_0^1 (1-s) e^{zs} ds, int_0^1 s e^{zs} ds) for the kernel exponent z = rate * h."""
    if abs(z) < 0.5:
        near = _series(z, lambda k: (k + 1) * (k + 2))
        far = _series(z, lambda k: k + 2)
        return near, far
    em1 = math.expm1(z)
    far = (z * em1 - em1 + z) / (z * z)  # (e^z (z - 1) + 1) / z^2
    near = em1 / z - far
    return near, far


def _sweep(src: np.ndarray, rate: float, h: float, tail: float) -> np.ndarray:
    """Accumulate J_j = int_{-inf}^{xi_j} e^{rate (xi_j - y)} src(y) dy for rate < 0.

    ``tail`` is the constant value of src to the left of the first node.
    """
    z = rate * h
    near, far = cell_weights(z)
    x = np.empty_like(src)
    x[0] = tail / (-rate)
    x[1:] = h * (near * src[1:] + far * src[:-1])
    return lfilter([1.0], [1.0, -math.exp(z)], x)


def convolve(src: np.ndarray, lam_minus: float, lam_plus: float, big_lambda: float, h: float,
             left_tail: float, right_tail: float) -> np.ndarray:
    """Apply the two-sided exponential kernel (1/Lambda)[e^{lam^- t} for t>0, e^{lam^+ t} for t<0]."""
    left = _sweep(src, lam_minus, h, left_tail)
    right = _sweep(src[::-1], -lam_plus, h, right_tail)[::-1]
    return (left + right) / big_lambda


@lru_cache(maxsize=16)
def _bound_nodes(bs: BoundSet, grid: WaveGrid):
    out = tuple(np.asarray(a) for a in eval_profiles(bs, grid.nodes))
    for a in out:
        a.flags.writeable = False
    return out


def gamma_violation(p: WaveProfile, bs: BoundSet) -> float:
    """Largest distance of the profile outside the order interval Gamma."""
    _, i_bar, s_low, i_low = _bound_nodes(bs, p.grid)
    s0 = bs.s_minus_inf
    v = max(
        float(np.max(s_low - p.s, initial=0.0)),
        float(np.max(p.s - s0, initial=0.0)),
        float(np.max(i_low - p.i, initial=0.0)),
        float(np.max(p.i - i_bar, initial=0.0)),
    )
    return max(v, 0.0)


def apply_F(p: WaveProfile, spec: SpectralData, bs: BoundSet, check: bool = True) -> WaveProfile:
    """Evaluate F(S, I) at every node.

    Left of the grid the sources are closed with (S, I) = (S_-inf, 0), right of it
    with (s_right_limit, 0).
    """
    if check:
        viol = gamma_violation(p, bs)
        if viol > GAMMA_TOL * bs.s_minus_inf:
            raise OutsideGamma(f"profile leaves Gamma by {viol:.3g} (projection missing?)")
    prm = spec.params
    h = p.grid.h
    s = np.maximum(p.s, 0.0)
    i = np.maximum(p.i, 0.0)
    f = _force(s, i, prm.beta, prm.guard)
    h1 = spec.beta1 * s - f
    h2 = (spec.beta2 - prm.gamma) * i + f
    s0 = bs.s_minus_inf
    f1 = convolve(h1, spec.lambda1_minus, spec.lambda1_plus, spec.big_lambda1, h,
                  spec.beta1 * s0, spec.beta1 * p.s_right_limit)
    f2 = convolve(h2, spec.lambda2_minus, spec.lambda2_plus, spec.big_lambda2, h, 0.0, 0.0)
    return WaveProfile(p.grid, f1, f2)


def project_gamma(p: WaveProfile, bs: BoundSet) -> tuple[WaveProfile, float]:
    """Clamp nodewise into [S_low, S_-inf] x [I_low, I_bar]; also return the pre-clamp violation."""
    _, i_bar, s_low, i_low = _bound_nodes(bs, p.grid)
    viol = gamma_violation(p, bs)
    s = np.clip(p.s, s_low, bs.s_minus_inf)
    i = np.clip(p.i, i_low, i_bar)
    return WaveProfile(p.grid, s, i), viol


def weighted_norm_diff(p: WaveProfile, q: WaveProfile, mu: float) -> float:
    """max over nodes and components of |p - q| e^{-mu |xi|}."""
    if p.grid != q.grid:
        raise GridMismatch("profiles live on different grids")
    w = np.exp(-mu * np.abs(p.xi))
    return float(max(np.max(np.abs(p.s - q.s) * w), np.max(np.abs(p.i - q.i) * w)))


def midpoint_profile(grid: WaveGrid, bs: BoundSet) -> WaveProfile:
    s_bar, i_bar, s_low, i_low = _bound_nodes(bs, grid)
    return WaveProfile(grid, 0.5 * (s_low + s_bar), 0.5 * (i_low + i_bar))


def bound_profiles(grid: WaveGrid, bs: BoundSet) -> tuple[WaveProfile, WaveProfile]:
    """(upper, lower) corner profiles of Gamma on the grid."""
    s_bar, i_bar, s_low, i_low = _bound_nodes(bs, grid)
    return WaveProfile(grid, s_bar.copy(), i_bar.copy()), WaveProfile(grid, s_low.copy(), i_low.copy())
