"""Fixed-point solve for the critical wave inside the order interval Gamma.

The base step is the projected, damped Picard map

    G(u) = P_Gamma((1 - theta) u + theta F(u)).

Plain Picard contracts very slowly here: the linearization of F about the critical
front has a mode along the leading edge whose rate is about
1 - d2 (pi/ell)^2 / (beta2 + beta - gamma), ell being the leading-edge length (~1e4
steps on the default grid). By default the G-iterates are therefore combined by
Anderson mixing over a short history, working in variables normalized by the
upper bounds (S/S_-inf, I/I_bar) so the exponentially small leading edge carries
weight in the mixing least-squares problem. Every mixed iterate is projected back
into Gamma. Set ``accel="none"`` for the plain scheme.

Convergence needs the |.|_mu residual below ``tol`` and, because the weight
e^{-mu|xi|} hides the tails, the same residual in normalized variables below
``flat_tol``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .bounds import BoundSet, select_constants
from .model import ModelParams, SpectralData, derive_spectral
from .waveop import (
    GAMMA_TOL,
    WaveGrid,
    WaveProfile,
    _bound_nodes,
    apply_F,
    gamma_violation,
    midpoint_profile,
    project_gamma,
)

log = logging.getLogger(__name__)


class NoConvergence(RuntimeError):
    def __init__(self, message: str, trace: "ConvergenceTrace", profile: WaveProfile):
        super().__init__(message)
        self.trace = trace
        self.profile = profile


@dataclass
class SolveConfig:
    theta0: float = 1.0
    tol: float = 1e-8
    max_iter: int = 5000
    stagnation_window: int = 100
    accel: str = "anderson"
    depth: int = 5
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    mu: Optional[float] = None
    # second stopping test on the residual in bound-normalized variables; None -> tol
    flat_tol: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.theta0 <= 1.0:
            raise ValueError("theta0 must lie in (0, 1]")
        if self.max_iter < 1 or self.stagnation_window < 1:
            raise ValueError("max_iter and stagnation_window must be positive")
        if self.accel not in ("anderson", "none"):
            raise ValueError(f"unknown accel {self.accel!r}; use 'anderson' or 'none'")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.flat_tol is not None and not self.flat_tol > 0:
            raise ValueError("flat_tol must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConvergenceTrace:
    iteration: list[int] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    theta: list[float] = field(default_factory=list)
    converged: bool = False

    def append(self, k: int, r: float, theta: float):
        self.iteration.append(k)
        self.residual.append(r)
        self.theta.append(theta)

    @property
    def iterations(self) -> int:
        return self.iteration[-1] if self.iteration else 0

    @property
    def final_residual(self) -> float:
        return self.residual[-1] if self.residual else float("inf")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# schema: wavecrit.trace/1\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "residual", "theta"])
        for row in zip(self.iteration, self.residual, self.theta):
            w.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConvergenceTrace":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        out = cls()
        for row in csv.DictReader(rows):
            out.append(int(row["iteration"]), float(row["residual"]), float(row["theta"]))
        return out


@dataclass
class Problem:
    """Everything a solve needs, derived once from the model parameters."""

    params: ModelParams
    spec: SpectralData
    bounds: BoundSet
    grid: WaveGrid

    @classmethod
    def build(cls, params: ModelParams, cfg: Optional[SolveConfig] = None,
              grid: Optional[WaveGrid] = None) -> "Problem":
        cfg = cfg or SolveConfig()
        spec = derive_spectral(params, cfg.beta1, cfg.beta2, cfg.mu)
        bs = select_constants(params, spec)
        grid = grid or WaveGrid.default_for(spec, bs)
        for issue in grid.check_requirements(spec, bs):
            log.warning("grid requirement not met: %s", issue)
        return cls(params, spec, bs, grid)


def _pack(p: WaveProfile) -> np.ndarray:
    return np.concatenate([p.s, p.i])


def _unpack(x: np.ndarray, grid: WaveGrid) -> WaveProfile:
    return WaveProfile(grid, x[: grid.n], x[grid.n:])


class _Anderson:
    """Anderson mixing (type II) over the last ``depth`` residual differences."""

    def __init__(self, depth: int):
        self.depth = depth
        self.reset()

    def reset(self):
        self.d_res: list[np.ndarray] = []
        self.d_val: list[np.ndarray] = []
        self.prev = None

    def mix(self, g: np.ndarray, res: np.ndarray) -> np.ndarray:
        if self.prev is not None:
            self.d_res.append(res - self.prev[0])
            self.d_val.append(g - self.prev[1])
            del self.d_res[: -self.depth], self.d_val[: -self.depth]
        self.prev = (res, g)
        if not self.d_res:
            return g
        coef, *_ = np.linalg.lstsq(np.array(self.d_res).T, res, rcond=None)
        return g - np.array(self.d_val).T @ coef


def picard_residual(u: WaveProfile, prob: Problem) -> float:
    """|P_Gamma(F(u)) - u|_mu, the fixed-point residual used for convergence."""
    fu, _ = project_gamma(apply_F(u, prob.spec, prob.bounds, check=False), prob.bounds)
    w = np.exp(-prob.spec.mu * np.abs(u.xi))
    return float(max(np.max(np.abs(fu.s - u.s) * w), np.max(np.abs(fu.i - u.i) * w)))


def iterate(prob: Problem, cfg: SolveConfig, u0: Optional[WaveProfile] = None) -> tuple[WaveProfile, ConvergenceTrace]:
    """Run the projected fixed-point iteration from ``u0`` (default: midpoint of Gamma)."""
    spec, bs, grid = prob.spec, prob.bounds, prob.grid
    u = midpoint_profile(grid, bs) if u0 is None else project_gamma(u0, bs)[0]
    w = np.exp(-spec.mu * np.abs(grid.nodes))
    _, i_bar, _, _ = _bound_nodes(bs, grid)
    scale = np.concatenate([np.full(grid.n, bs.s_minus_inf), np.where(i_bar > 0, i_bar, 1.0)])
    mixer = _Anderson(cfg.depth) if cfg.accel == "anderson" else None

    flat_tol = cfg.tol if cfg.flat_tol is None else cfg.flat_tol
    theta = cfg.theta0
    trace = ConvergenceTrace()
    best = np.inf
    best_at = 0
    for k in range(1, cfg.max_iter + 1):
        fu = apply_F(u, spec, bs)
        fu_proj, _ = project_gamma(fu, bs)
        r = float(max(np.max(np.abs(fu_proj.s - u.s) * w), np.max(np.abs(fu_proj.i - u.i) * w)))
        trace.append(k, r, theta)
        flat = float(np.max(np.abs(_pack(fu_proj) - _pack(u)) / scale))
        if r < cfg.tol and flat < flat_tol:
            trace.converged = True
            # The weighted norm barely sees the far tails, where mixing can leave
            # clipped zeros; one more plain step makes both components positive.
            r_polished = picard_residual(fu_proj, prob)
            if r_polished < cfg.tol:
                trace.append(k + 1, r_polished, 1.0)
                return fu_proj, trace
            return u, trace
        score = max(r / cfg.tol, flat / flat_tol)
        if score < best:
            best, best_at = score, k
        elif k - best_at >= cfg.stagnation_window:
            theta *= 0.5
            best, best_at = score, k
            if mixer is not None:
                mixer.reset()
            log.info("residual stagnated at iteration %d; damping reduced to %.4g", k, theta)

        x = _pack(u)
        g = (1.0 - theta) * x + theta * _pack(fu_proj)
        if mixer is not None:
            g = mixer.mix(g / scale, (g - x) / scale) * scale
        u, _ = project_gamma(_unpack(g, grid), bs)
        if gamma_violation(u, bs) > GAMMA_TOL * bs.s_minus_inf:
            raise AssertionError("iterate left Gamma after projection")

    raise NoConvergence(
        f"no convergence in {cfg.max_iter} iterations (residual {trace.final_residual:.3g} >= tol {cfg.tol:.3g})",
        trace,
        u,
    )


def solve_critical_wave(params: ModelParams, cfg: Optional[SolveConfig] = None,
                        grid: Optional[WaveGrid] = None,
                        u0: Optional[WaveProfile] = None) -> tuple[WaveProfile, ConvergenceTrace]:
    """Compute the critical traveling wave (S*, I*) on ``grid``.

    Raises InvalidRegime when R0 <= 1 and NoConvergence when the iteration cap is hit.
    """
    cfg = cfg or SolveConfig()
    prob = Problem.build(params, cfg, grid)
    return iterate(prob, cfg, u0)
