"""Explicit super- and sub-solutions of the critical wave and their numerical certification.

    S_bar(xi) = S_-inf
    I_bar(xi) = min(-L1 xi e^{lambda* xi}, M)
    S_low(xi) = max(S_-inf (1 - e^{eps xi} / eps), 0)
    I_low(xi) = max((-L1 xi - L2 sqrt(-xi)) e^{lambda* xi}, 0)

with kinks at xi1 = -1/lambda*, xi2 = ln(eps)/eps and xi3 = -(L2/L1)^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import ModelParams, SpectralData

log = logging.getLogger(__name__)

MAX_SEARCH_STEPS = 60
# certification margins are compared against this fraction of the local term scale
CERT_RTOL = 1e-9


class BoundSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundSet:
    m: float
    l1: float
    l2: float
    eps: float
    xi1: float
    xi2: float
    xi3: float
    lambda_star: float
    s_minus_inf: float

    @classmethod
    def build(cls, params: ModelParams, spec: SpectralData, eps: float, l2: float) -> "BoundSet":
        m = params.plateau
        l1 = math.e * m * spec.lambda_star
        return cls(
            m=m,
            l1=l1,
            l2=l2,
            eps=eps,
            xi1=-1.0 / spec.lambda_star,
            xi2=math.log(eps) / eps,
            xi3=-((l2 / l1) ** 2),
            lambda_star=spec.lambda_star,
            s_minus_inf=params.s_minus_inf,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def eval_profiles(bs: BoundSet, xi):
    """Evaluate (S_bar, I_bar, S_low, I_low) at ``xi``."""
    xi = np.asarray(xi, dtype=float)
    lam = bs.lambda_star
    e = np.exp(lam * np.minimum(xi, 0.0))
    s_bar = np.full_like(xi, bs.s_minus_inf)
    i_bar = np.where(xi <= bs.xi1, -bs.l1 * xi * e, bs.m)
    s_low = np.where(
        xi <= bs.xi2, bs.s_minus_inf * (1.0 - np.exp(bs.eps * np.minimum(xi, bs.xi2)) / bs.eps), 0.0
    )
    neg = np.sqrt(np.maximum(-xi, 0.0))
    i_low = np.where(xi <= bs.xi3, (-bs.l1 * xi - bs.l2 * neg) * e, 0.0)
    return s_bar, i_bar, np.maximum(s_low, 0.0), np.maximum(i_low, 0.0)


def profile_derivatives(bs: BoundSet, xi):
    """Analytic first and second derivatives of the piecewise profiles (undefined at the kinks).

    Returns a dict with keys ``i_bar``, ``s_low``, ``i_low`` mapping to (value, d1, d2).
    """
    xi = np.asarray(xi, dtype=float)
    lam, l1, l2, eps, s0 = bs.lambda_star, bs.l1, bs.l2, bs.eps, bs.s_minus_inf
    e = np.exp(lam * np.minimum(xi, 0.0))
    _, i_bar, s_low, i_low = eval_profiles(bs, xi)

    left1 = xi < bs.xi1
    ib1 = np.where(left1, -l1 * e * (1.0 + lam * xi), 0.0)
    ib2 = np.where(left1, -l1 * e * (2.0 * lam + lam * lam * xi), 0.0)

    left2 = xi < bs.xi2
    ee = np.exp(eps * np.minimum(xi, bs.xi2))
    sl1 = np.where(left2, -s0 * ee, 0.0)
    sl2 = np.where(left2, -s0 * eps * ee, 0.0)

    left3 = xi < bs.xi3
    r = np.sqrt(np.maximum(-xi, 1e-30))
    q = -l1 * xi - l2 * r
    dq = -l1 + 0.5 * l2 / r
    ddq = 0.25 * l2 / r**3
    il1 = np.where(left3, e * (dq + lam * q), 0.0)
    il2 = np.where(left3, e * (ddq + 2.0 * lam * dq + lam * lam * q), 0.0)
    return {
        "i_bar": (i_bar, ib1, ib2),
        "s_low": (s_low, sl1, sl2),
        "i_low": (i_low, il1, il2),
    }


def g_function(bs: BoundSet, beta: float, xi):
    """g(xi) = beta L1^2 (-xi)^{7/2} e^{lambda* xi} on xi <= 0."""
    xi = np.asarray(xi, dtype=float)
    return beta * bs.l1**2 * np.maximum(-xi, 0.0) ** 3.5 * np.exp(bs.lambda_star * xi)


def g_max(bs: BoundSet, beta: float) -> tuple[float, float]:
    """Location and value of max g on (-inf, 0]: xi = -7/(2 lambda*)."""
    x = 3.5 / bs.lambda_star
    return -x, beta * bs.l1**2 * x**3.5 * math.exp(-3.5)


def _sub_s_sup(eps: float, params: ModelParams, spec: SpectralData, l1: float) -> float:
    """sup over xi <= xi2 of -beta L1 xi e^{(lambda* - eps) xi}."""
    rate = spec.lambda_star - eps
    xi2 = math.log(eps) / eps
    peak = -1.0 / rate
    x = peak if peak <= xi2 else xi2
    return -params.beta * l1 * x * math.exp(rate * x)


def _eps_ok(eps: float, params: ModelParams, spec: SpectralData, l1: float) -> bool:
    if not 0.0 < eps < min(spec.c_star / params.d1, spec.lambda_star):
        return False
    if not math.log(eps) / eps < -1.0 / spec.lambda_star:
        return False
    rhs = params.s_minus_inf * (spec.c_star - params.d1 * eps)
    return _sub_s_sup(eps, params, spec, l1) <= rhs


def _l2_ok(l2: float, eps: float, params: ModelParams, spec: SpectralData, l1: float) -> bool:
    xi3 = -((l2 / l1) ** 2)
    if not xi3 < math.log(eps) / eps:
        return False
    # LHS of the sufficient condition is decreasing in xi; its minimum on (-inf, xi3] sits at xi3
    lhs = params.d2 * l2 * params.s_minus_inf * (1.0 - math.exp(eps * xi3) / eps)
    x_peak = -3.5 / spec.lambda_star
    x = xi3 if xi3 < x_peak else x_peak
    rhs = 4.0 * params.beta * l1**2 * (-x) ** 3.5 * math.exp(spec.lambda_star * x)
    return lhs >= rhs


def select_constants(params: ModelParams, spec: SpectralData) -> BoundSet:
    """Pick the largest admissible eps (by halving then bisection), then grow L2 by doubling."""
    l1 = math.e * params.plateau * spec.lambda_star
    hi = min(spec.c_star / params.d1, spec.lambda_star)
    eps = hi / 2.0
    bad = hi
    for _ in range(MAX_SEARCH_STEPS):
        if _eps_ok(eps, params, spec, l1):
            break
        bad, eps = eps, eps / 2.0
    else:
        raise BoundSearchError(f"no admissible eps found below {hi:.3g} in {MAX_SEARCH_STEPS} halvings")
    good = eps
    for _ in range(MAX_SEARCH_STEPS):
        if bad - good <= 1e-6 * good:
            break
        mid = 0.5 * (good + bad)
        if _eps_ok(mid, params, spec, l1):
            good = mid
        else:
            bad = mid
    eps = good

    l2 = 1.05 * l1 * math.sqrt(-math.log(eps) / eps)
    for _ in range(MAX_SEARCH_STEPS):
        if _l2_ok(l2, eps, params, spec, l1):
            break
        l2 *= 2.0
    else:
        raise BoundSearchError(f"no admissible L2 found for eps = {eps:.6g}")
    bs = BoundSet.build(params, spec, eps, l2)
    log.debug("selected eps=%.6g L2=%.6g (xi2=%.4g, xi3=%.4g)", eps, l2, bs.xi2, bs.xi3)
    return bs


def certification_grid(bs: BoundSet, n: int = 4096) -> np.ndarray:
    """Sample points clustered logarithmically around each kink plus a far-left uniform tail.

    The kinks themselves are excluded.
    """
    left = 10.0 * min(bs.xi2, bs.xi3)
    right = bs.xi1 + 20.0
    kinks = np.array([bs.xi1, bs.xi2, bs.xi3])
    n_kink = (3 * n // 4) // (2 * len(kinks))
    offsets = np.logspace(-8, math.log10((right - left) / 2), n_kink)
    near = np.concatenate([np.concatenate([k - offsets, k + offsets]) for k in kinks])
    near = np.unique(near[(near > left) & (near < right)])
    # top up with a uniform sweep so the total is exactly n
    n_uniform = n - near.size
    xi = np.unique(np.concatenate([near, np.linspace(left, right, n_uniform)]))
    xi = xi[~np.isin(xi, kinks)]
    while xi.size < n:
        n_uniform += n - xi.size
        xi = np.unique(np.concatenate([near, np.linspace(left, right, n_uniform)]))
        xi = xi[~np.isin(xi, kinks)]
    return xi[:n] if xi.size > n else xi


@dataclass
class InequalityResult:
    name: str
    worst_margin: float
    worst_relative: float
    worst_xi: float
    n_points: int
    passed: bool
    statement: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CertReport:
    bounds: dict
    results: list[InequalityResult] = field(default_factory=list)
    grid_points: int = 0
    method: str = "numerical: analytic derivatives on a finite sample grid"

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "method": self.method,
            "grid_points": self.grid_points,
            "bounds": self.bounds,
            "inequalities": [r.to_dict() for r in self.results],
        }


def _summarize(name, xi, lhs, rhs, rtol, scale=None) -> InequalityResult:
    margin = lhs - rhs
    if scale is None:
        scale = np.abs(lhs) + np.abs(rhs)
    rel = np.where(scale > 0, margin / np.where(scale > 0, scale, 1.0), 0.0)
    if xi.size == 0:
        return InequalityResult(name, 0.0, 0.0, float("nan"), 0, True)
    k = int(np.argmin(rel))
    return InequalityResult(
        name=name,
        worst_margin=float(margin.min()),
        worst_relative=float(rel[k]),
        worst_xi=float(xi[k]),
        n_points=int(xi.size),
        passed=bool(rel[k] >= -rtol),
    )


def inequality_sides(bs: BoundSet, spec: SpectralData, xi):
    """Left and right hand sides of the three profile inequalities at ``xi`` (no range masking)."""
    p = spec.params
    c = spec.c_star
    der = profile_derivatives(bs, xi)
    ib, ib1, ib2 = der["i_bar"]
    sl, sl1, sl2 = der["s_low"]
    il, il1, il2 = der["i_low"]
    s_bar = bs.s_minus_inf

    upper_i = (c * ib1, p.d2 * ib2 + p.beta * s_bar * ib / (s_bar + ib) - p.gamma * ib)
    lower_s = (-p.beta * ib, -p.d1 * sl2 + c * sl1)
    tot = sl + il
    with np.errstate(divide="ignore", invalid="ignore"):
        inc = np.where(tot > 0, p.beta * sl * il / np.where(tot > 0, tot, 1.0), 0.0)
    lower_i = (inc - p.gamma * il, -p.d2 * il2 + c * il1)
    return {"upper_i": upper_i, "lower_s": lower_s, "lower_i": lower_i}


def term_scales(bs: BoundSet, spec: SpectralData, xi):
    """Sum of the magnitudes of the individual terms of each inequality.

    Margins are judged against this, so an inequality that holds with equality
    (both sides cancelling to roundoff) is not mistaken for a violation.
    """
    p = spec.params
    c = spec.c_star
    der = profile_derivatives(bs, xi)
    ib, ib1, ib2 = der["i_bar"]
    sl, sl1, sl2 = der["s_low"]
    il, il1, il2 = der["i_low"]
    s_bar = bs.s_minus_inf
    upper = np.abs(c * ib1) + np.abs(p.d2 * ib2) + p.beta * s_bar * ib / (s_bar + ib) + p.gamma * ib
    lower_s = p.beta * ib + np.abs(p.d1 * sl2) + np.abs(c * sl1)
    tot = sl + il
    with np.errstate(divide="ignore", invalid="ignore"):
        inc = np.where(tot > 0, p.beta * sl * il / np.where(tot > 0, tot, 1.0), 0.0)
    lower_i = inc + p.gamma * il + np.abs(p.d2 * il2) + np.abs(c * il1)
    return {"upper_i": upper, "lower_s": lower_s, "lower_i": lower_i}


def certify_inequalities(bs: BoundSet, spec: SpectralData, grid=None, rtol: float = CERT_RTOL) -> CertReport:
    """Check the super-solution inequality for I_bar and the sub-solution inequalities for S_low, I_low.

    Each margin (lhs - rhs) must be non-negative up to ``rtol`` times the summed
    magnitude of the terms in the inequality.
    """
    xi = certification_grid(bs) if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.isin(xi, [bs.xi1, bs.xi2, bs.xi3])):
        raise ValueError("certification grid must exclude the kink points")
    sides = inequality_sides(bs, spec, xi)
    scales = term_scales(bs, spec, xi)
    masks = {
        "upper_i": xi != bs.xi1,
        "lower_s": xi < bs.xi2,
        "lower_i": xi < bs.xi3,
    }
    labels = {
        "upper_i": "c* I_bar' >= d2 I_bar'' + f(S_bar, I_bar) - gamma I_bar  (xi != xi1)",
        "lower_s": "-beta I_bar >= -d1 S_low'' + c* S_low'  (xi < xi2)",
        "lower_i": "f(S_low, I_low) - gamma I_low >= -d2 I_low'' + c* I_low'  (xi < xi3)",
    }
    report = CertReport(bounds=bs.to_dict(), grid_points=int(xi.size))
    for key, (lhs, rhs) in sides.items():
        m = masks[key]
        res = _summarize(key, xi[m], lhs[m], rhs[m], rtol, scales[key][m])
        res.statement = labels[key]
        if not res.passed:
            log.warning("violation of %s at xi=%.6g (margin %.3g)", key, res.worst_xi, res.worst_margin)
        report.results.append(res)
    return report
