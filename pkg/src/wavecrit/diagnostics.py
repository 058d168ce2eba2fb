"""Read-only checks of a computed wave against the qualitative and quantitative
properties it must have: monotone S, bounded positive pulse I, left-tail order,
the integral identities linking the mass of I to the drop in S, and the monotone
auxiliary function P = I + k int I.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import tolerances as tol
from .bounds import BoundSet, eval_profiles
from .model import ModelParams, SpectralData, _force
from .waveop import WaveProfile, _sweep


@dataclass
class Check:
    name: str
    passed: bool
    value: float = float("nan")
    threshold: float = float("nan")
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _all(checks):
    return all(c.passed for c in checks)


# ---------------------------------------------------------------- primitives

def d1_4th(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order centered first derivative at nodes 2..n-3."""
    return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)


def d2_4th(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order centered second derivative at nodes 2..n-3."""
    return (-y[:-4] + 16 * y[1:-3] - 30 * y[2:-2] + 16 * y[3:-1] - y[4:]) / (12 * h * h)


def _right_sweep(src: np.ndarray, rate: float, h: float) -> np.ndarray:
    """int_xi^{xi_max} e^{rate (xi - v)} src(v) dv, rate > 0 (nothing assumed beyond the grid)."""
    return _sweep(src[::-1], -rate, h, 0.0)[::-1]


def _decay_rate(y: np.ndarray, h: float, nodes: int = 20) -> float:
    """Log-slope decay rate of the last ``nodes`` values (0 if they are not positive and decaying)."""
    tail = y[-nodes:]
    if np.any(tail <= 0):
        return 0.0
    slope = np.polyfit(np.arange(nodes) * h, np.log(tail), 1)[0]
    return max(-slope, 0.0)


def integrate(y: np.ndarray, p: WaveProfile, lam_left: Optional[float] = None) -> float:
    """Trapezoid rule on the grid plus closed-form tails.

    Left tail assumes y ~ (-xi) e^{lam xi} (the front's leading edge); right tail
    assumes exponential decay at the fitted log-slope.
    """
    h = p.grid.h
    total = h * (y.sum() - 0.5 * (y[0] + y[-1]))
    if lam_left is not None and y[0] > 0:
        x0 = p.grid.xi_min
        total += y[0] / lam_left * (1.0 + 1.0 / (lam_left * abs(x0)))
    rate = _decay_rate(y, h)
    if rate > 0:
        total += y[-1] / rate
    return float(total)


def cumulative(y: np.ndarray, p: WaveProfile, lam_left: Optional[float] = None) -> np.ndarray:
    """int_{-inf}^{xi_j} y, trapezoid on the grid plus the left tail as in ``integrate``."""
    h = p.grid.h
    out = np.concatenate([[0.0], np.cumsum(0.5 * h * (y[1:] + y[:-1]))])
    if lam_left is not None and y[0] > 0:
        out += y[0] / lam_left * (1.0 + 1.0 / (lam_left * abs(p.grid.xi_min)))
    return out


def s_infinity(p: WaveProfile, nodes: int = tol.S_INF_NODES) -> float:
    return float(np.mean(p.s[-nodes:]))


def incidence(p: WaveProfile, params: ModelParams) -> np.ndarray:
    return _force(np.maximum(p.s, 0.0), np.maximum(p.i, 0.0), params.beta, params.guard)


def reconstruct_s_prime(p: WaveProfile, params: ModelParams, c: float) -> np.ndarray:
    """S'(xi) = -(1/d1) int_xi^inf e^{(c/d1)(xi - v)} f(v) dv, from integrating the S equation."""
    f = incidence(p, params)
    return -_right_sweep(f, c / params.d1, p.grid.h) / params.d1


def ode_residual(p: WaveProfile, params: ModelParams, c: float, fields: bool = False):
    """Max residual of the wave ODEs at interior nodes, scaled by beta S_-inf.

    Uses fourth-order centered differences only; F is never involved. With
    ``fields=True`` also returns (xi, r_s, r_i) at the interior nodes.
    """
    h = p.grid.h
    f = incidence(p, params)[2:-2]
    r_s = c * d1_4th(p.s, h) - params.d1 * d2_4th(p.s, h) + f
    r_i = c * d1_4th(p.i, h) - params.d2 * d2_4th(p.i, h) - f + params.gamma * p.i[2:-2]
    scale = params.beta * params.s_minus_inf
    worst = float(max(np.max(np.abs(r_s)), np.max(np.abs(r_i))) / scale)
    if fields:
        return worst, (p.xi[2:-2], r_s / scale, r_i / scale)
    return worst


def upper_bound_pair(params: ModelParams, c: float, s_inf: float) -> tuple[float, float]:
    """(M, 2c(S_-inf - S_inf)/(sqrt(c^2 + 4 d2 gamma) + c))."""
    q = math.sqrt(c * c + 4.0 * params.d2 * params.gamma)
    return params.plateau, 2.0 * c * (params.s_minus_inf - s_inf) / (q + c)


def p_constant(params: ModelParams, c: float) -> float:
    """k = 2 gamma / (sqrt(c^2 + 4 d2 gamma) + c)."""
    return 2.0 * params.gamma / (math.sqrt(c * c + 4.0 * params.d2 * params.gamma) + c)


def p_rate(params: ModelParams, c: float) -> float:
    """b = (c + sqrt(c^2 + 4 d2 gamma))/2."""
    return 0.5 * (c + math.sqrt(c * c + 4.0 * params.d2 * params.gamma))


# ---------------------------------------------------------------- checks

def check_monotone_positive(p: WaveProfile, spec: SpectralData, c: Optional[float] = None) -> list[Check]:
    params = spec.params
    c = spec.c_star if c is None else c
    s0 = params.s_minus_inf
    sp = reconstruct_s_prime(p, params, c)
    inner = slice(1, -1)
    out = []

    # Right of the last node with S + I above the incidence guard, f is zero by
    # construction and so is the reconstructed S'.
    active = np.nonzero(incidence(p, params) > 0)[0]
    last = int(active[-1]) if active.size else 0
    zone = slice(1, max(min(last, p.grid.n - 1), 1))
    guard_nodes = p.grid.n - 1 - max(last, 1)
    worst = float(np.max(sp[zone])) if last > 1 else 0.0
    bad = np.nonzero(sp[zone] >= 0)[0]
    ok = bad.size == 0 and last > 1
    detail = f"{guard_nodes} right-edge nodes inside the incidence guard" if guard_nodes else ""
    if bad.size:
        detail = f"S' >= 0 first at xi={p.xi[1 + bad[0]]:.6g}"
    elif last <= 1:
        detail = "no active incidence"
    out.append(Check("s_prime_negative", ok, worst, 0.0, detail))

    jumps = np.diff(p.s)
    slack = tol.S_NODAL_SLACK * s0
    up = np.nonzero(jumps > slack)[0]
    out.append(Check("s_nodal_nonincreasing", up.size == 0, float(np.max(jumps)), slack,
                     "" if up.size == 0 else f"S increases between xi={p.xi[up[0]]:.6g} and the next node"))

    fd = d1_4th(p.s, p.grid.h)
    scale = float(np.max(np.abs(sp)))
    gap = float(np.max(np.abs(fd - sp[2:-2]))) / scale if scale > 0 else float(np.max(np.abs(fd)))
    out.append(Check("s_prime_matches_differences", gap < tol.SPRIME_FD_RTOL, gap, tol.SPRIME_FD_RTOL,
                     "reconstructed S' vs fourth-order differences, relative to max|S'|"))

    # S < S_-inf at the left end is invisible nodewise once S_-inf - S drops under
    # one ulp, so strictness is read from the accumulated deficit int_{-inf}^xi -S'.
    deficit = cumulative(-sp, p)
    s_ok = (np.all(p.s[inner] > 0) and np.all(p.s[inner] <= s0) and np.all(deficit[inner] > 0))
    out.append(Check("s_strictly_between", bool(s_ok), float(np.min(p.s[inner])), 0.0,
                     "0 < S < S_-inf at interior nodes (upper side via accumulated deficit)"))

    i_ok = bool(np.all(p.i[inner] > 0))
    first = "" if i_ok else f"I <= 0 first at xi={p.xi[1 + np.nonzero(p.i[inner] <= 0)[0][0]]:.6g}"
    out.append(Check("i_positive", i_ok, float(np.min(p.i[inner])), 0.0, first))
    return out


def identity_members(p: WaveProfile, params: ModelParams, spec: SpectralData,
                     c: Optional[float] = None, s_inf: Optional[float] = None) -> tuple[float, float, float]:
    """(int I, (beta/gamma) int SI/(S+I), c (S_-inf - S_inf)/gamma)."""
    c = spec.c_star if c is None else c
    s_inf = s_infinity(p) if s_inf is None else s_inf
    lam = spec.lambda_star
    mass = integrate(p.i, p, lam)
    inc = integrate(incidence(p, params), p, lam) / params.gamma
    drop = c * (params.s_minus_inf - s_inf) / params.gamma
    return mass, inc, drop


def check_integral_identities(p: WaveProfile, params: ModelParams, spec: SpectralData,
                              c: Optional[float] = None) -> list[Check]:
    members = identity_members(p, params, spec, c)
    names = ("mass", "incidence", "drop")
    out = []
    for a in range(3):
        for b in range(a + 1, 3):
            x, y = members[a], members[b]
            denom = max(abs(x), abs(y))
            rel = abs(x - y) / denom if denom > 0 else 0.0
            out.append(Check(f"identity_{names[a]}_vs_{names[b]}", rel < tol.IDENTITY_RTOL, rel,
                             tol.IDENTITY_RTOL, f"{x:.10g} vs {y:.10g}"))
    return out


def mass_from_flux(p: WaveProfile, params: ModelParams, c: float) -> float:
    """int I from integrating the I equation up to xi_max: (d2 I'(xi_max) - c I(xi_max) + int f)/gamma."""
    h = p.grid.h
    i = p.i
    di_end = (25 * i[-1] - 48 * i[-2] + 36 * i[-3] - 16 * i[-4] + 3 * i[-5]) / (12 * h)
    f = incidence(p, params)
    int_f = h * (f.sum() - 0.5 * (f[0] + f[-1]))
    lam = c / (2.0 * params.d2)
    if f[0] > 0:
        int_f += f[0] / lam * (1.0 + 1.0 / (lam * abs(p.grid.xi_min)))
    return float((params.d2 * di_end - c * i[-1] + int_f) / params.gamma)


def check_mass_flux(p: WaveProfile, params: ModelParams, spec: SpectralData) -> Check:
    direct = integrate(p.i, p, spec.lambda_star)
    flux = mass_from_flux(p, params, spec.c_star)
    rel = abs(direct - flux) / max(abs(direct), 1e-300)
    return Check("mass_flux_consistent", rel < tol.MASS_SELF_RTOL, rel, tol.MASS_SELF_RTOL,
                 f"quadrature {direct:.10g} vs flux form {flux:.10g}")


def check_upper_bounds(p: WaveProfile, params: ModelParams, spec: SpectralData,
                       c: Optional[float] = None, s_inf: Optional[float] = None) -> list[Check]:
    c = spec.c_star if c is None else c
    s_inf = s_infinity(p) if s_inf is None else s_inf
    bound_m, bound_p = upper_bound_pair(params, c, s_inf)
    i_max = float(np.max(p.i))
    return [
        Check("i_below_plateau", i_max < bound_m, i_max, bound_m,
              "" if i_max < bound_m else f"exceeds by {i_max - bound_m:.3g}"),
        Check("i_below_drop_bound", i_max < bound_p, i_max, bound_p,
              "" if i_max < bound_p else f"exceeds by {i_max - bound_p:.3g}"),
    ]


def tail_window(p: WaveProfile, bs: BoundSet, shift: float = 0.0) -> tuple[float, float]:
    m = tol.TAIL_WINDOW_MARGIN
    return p.grid.xi_min + m + shift, bs.xi3 - m + shift


def fit_tail_slope(p: WaveProfile, lo: float, hi: float) -> float:
    """Least-squares slope of ln(I/(-xi)) against xi on [lo, hi]."""
    xi = p.xi
    sel = (xi >= lo) & (xi <= hi) & (xi < 0) & (p.i > 0)
    if np.count_nonzero(sel) < 3:
        return float("nan")
    return float(np.polyfit(xi[sel], np.log(p.i[sel] / -xi[sel]), 1)[0])


def check_tail_asymptotics(p: WaveProfile, spec: SpectralData, bs: BoundSet) -> list[Check]:
    lam = spec.lambda_star
    lo, hi = tail_window(p, bs)
    if not hi - lo > 2 * tol.TAIL_WINDOW_MARGIN:
        return [Check("tail_window", False, hi - lo, 2 * tol.TAIL_WINDOW_MARGIN,
                      "grid does not extend far enough left of xi3 for a tail fit")]
    slope = fit_tail_slope(p, lo, hi)
    rel = abs(slope - lam) / lam
    out = [Check("tail_slope", rel < tol.TAIL_SLOPE_RTOL, slope, lam,
                 f"relative deviation {rel:.3g} on [{lo:.4g}, {hi:.4g}]")]

    shifted = fit_tail_slope(p, lo + tol.TAIL_WINDOW_MARGIN, hi + tol.TAIL_WINDOW_MARGIN)
    drift = abs(shifted - slope) / lam
    out.append(Check("tail_slope_window_shift", drift < tol.TAIL_SHIFT_RTOL, drift, tol.TAIL_SHIFT_RTOL,
                     "slope change when the window moves right by the margin"))

    _, i_bar, _, i_low = eval_profiles(bs, p.xi)
    # relative slack: the leading edge sits many decades below M
    rel = tol.ENVELOPE_RTOL
    win = (p.xi >= lo) & (p.xi <= hi)
    below = win & (p.i < i_low * (1.0 - rel))
    above = p.i > i_bar * (1.0 + rel)
    detail = []
    if below.any():
        detail.append(f"below lower envelope from xi={p.xi[below][0]:.6g}")
    if above.any():
        detail.append(f"above upper envelope from xi={p.xi[above][0]:.6g}")
    out.append(Check("tail_envelope", not (below.any() or above.any()),
                     float(np.count_nonzero(below) + np.count_nonzero(above)), 0.0, "; ".join(detail)))
    return out


def p_function(p: WaveProfile, params: ModelParams, spec: SpectralData, c: Optional[float] = None) -> np.ndarray:
    c = spec.c_star if c is None else c
    return p.i + p_constant(params, c) * cumulative(p.i, p, spec.lambda_star)


def p_prime_representation(p: WaveProfile, params: ModelParams, c: float) -> np.ndarray:
    """P'(xi) = (1/d2) int_xi^inf e^{(b/d2)(xi - v)} f(v) dv."""
    f = incidence(p, params)
    return _right_sweep(f, p_rate(params, c) / params.d2, p.grid.h) / params.d2


def check_p_function(p: WaveProfile, params: ModelParams, spec: SpectralData,
                     c: Optional[float] = None, s_inf: Optional[float] = None) -> list[Check]:
    c = spec.c_star if c is None else c
    s_inf = s_infinity(p) if s_inf is None else s_inf
    pf = p_function(p, params, spec, c)
    target = upper_bound_pair(params, c, s_inf)[1]
    out = []

    steps = np.diff(pf)
    slack = tol.P_MONOTONE_RTOL * max(abs(pf[-1]), 1e-300)
    down = np.nonzero(steps < -slack)[0]
    out.append(Check("p_nondecreasing", down.size == 0, float(np.min(steps)), -slack,
                     "" if down.size == 0 else f"P decreases first at xi={p.xi[down[0]]:.6g}"))

    left = float(pf[0])
    out.append(Check("p_left_limit", left < tol.P_LEFT_MAX * params.plateau, left,
                     tol.P_LEFT_MAX * params.plateau))

    rel = abs(pf[-1] - target) / abs(target) if target else abs(pf[-1])
    out.append(Check("p_right_limit", rel < tol.P_LIMIT_RTOL, float(pf[-1]), target,
                     f"relative deviation {rel:.3g}"))

    rep = p_prime_representation(p, params, c)
    direct = d1_4th(p.i, p.grid.h) + p_constant(params, c) * p.i[2:-2]
    scale = float(np.max(rep))
    gap = float(np.max(np.abs(direct - rep[2:-2]))) / scale if scale > 0 else 0.0
    ok = gap < tol.P_PRIME_RTOL and bool(np.all(rep >= 0))
    out.append(Check("p_prime_representation", ok, gap, tol.P_PRIME_RTOL,
                     "I' + k I vs the integral form, relative to max P'"))
    return out


def check_s_infinity(p: WaveProfile, params: ModelParams) -> list[Check]:
    s0 = params.s_minus_inf
    spread = abs(s_infinity(p, 20) - s_infinity(p, tol.S_INF_NODES))
    xi = p.xi[-tol.DRIFT_NODES:]
    slope = abs(float(np.polyfit(xi - xi[0], p.s[-tol.DRIFT_NODES:], 1)[0]))
    return [
        Check("s_inf_window_stable", spread < tol.S_INF_WINDOW_TOL * s0, spread, tol.S_INF_WINDOW_TOL * s0),
        Check("s_inf_plateau_drift", slope < tol.DRIFT_SLOPE_MAX * s0, slope, tol.DRIFT_SLOPE_MAX * s0),
    ]


def check_ode_residual(p: WaveProfile, params: ModelParams, c: float) -> Check:
    r = ode_residual(p, params, c)
    return Check("ode_residual", r < tol.ODE_RESIDUAL_MAX, r, tol.ODE_RESIDUAL_MAX,
                 "fourth-order differences, scaled by beta S_-inf")


# ---------------------------------------------------------------- report

@dataclass
class WaveReport:
    s_infinity: float
    wave_mass: float
    identity_lhs_rhs: tuple[float, float, float]
    i_max: float
    i_bound_m: float
    i_bound_p: float
    tail_slope: float
    p_limit: float
    ode_residual: float
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return _all(self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["identity_lhs_rhs"] = list(self.identity_lhs_rhs)
        d["passed"] = self.passed
        return d


UNIQUENESS_NOTE = (
    "The fixed point is computed inside the order interval of the bounds; uniqueness there is "
    "not established. Translation-invariant quantities (mass, max I, S_inf) are the robust outputs."
)


def diagnose(p: WaveProfile, spec: SpectralData, bs: BoundSet, c: Optional[float] = None) -> WaveReport:
    """Run every check on a converged profile and gather the measured values."""
    params = spec.params
    c = spec.c_star if c is None else c
    s_inf = s_infinity(p)
    members = identity_members(p, params, spec, c, s_inf)
    bound_m, bound_p = upper_bound_pair(params, c, s_inf)
    lo, hi = tail_window(p, bs)
    pf = p_function(p, params, spec, c)
    resid = ode_residual(p, params, c)

    checks = []
    checks += check_monotone_positive(p, spec, c)
    checks += check_upper_bounds(p, params, spec, c, s_inf)
    checks += check_tail_asymptotics(p, spec, bs)
    checks += check_integral_identities(p, params, spec, c)
    checks.append(check_mass_flux(p, params, spec))
    checks += check_p_function(p, params, spec, c, s_inf)
    checks += check_s_infinity(p, params)
    checks.append(check_ode_residual(p, params, c))

    return WaveReport(
        s_infinity=s_inf,
        wave_mass=members[0],
        identity_lhs_rhs=members,
        i_max=float(np.max(p.i)),
        i_bound_m=bound_m,
        i_bound_p=bound_p,
        tail_slope=fit_tail_slope(p, lo, hi),
        p_limit=float(pf[-1]),
        ode_residual=resid,
        checks=checks,
        notes=[UNIQUENESS_NOTE],
    )
