"""Direct simulation of the spatial SIR system on [0, L] with reflecting ends.

    S_t = d1 S_xx - f(S, I)
    I_t = d2 I_xx + f(S, I) - gamma I
    R_t = d3 R_xx + gamma I

Forward Euler in time, centered second differences in space. A compact seed of
infection at the left edge launches a front that travels right; its position is
tracked at a fixed level of I.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ModelParams, _force
from .waveop import WaveGrid, WaveProfile

log = logging.getLogger(__name__)

SEED_FRACTION = 0.01  # of M
SEED_SUBTHRESHOLD = 1e-4  # of S_-inf, used when R0 <= 1 and M is not positive
LEVEL_FRACTION = 0.1  # of M
BLOWUP_FACTOR = 10.0


class SimulationUnstable(RuntimeError):
    pass


class FrontNearBoundary(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    domain_length: float = 400.0
    dx: float = 0.1
    t_end: float = 150.0
    dt: Optional[float] = None
    level: Optional[float] = None
    include_r: bool = True
    seed_width: float = 5.0
    seed_amplitude: Optional[float] = None
    record_interval: float = 0.5
    snapshot_interval: Optional[float] = None
    edge_margin: float = 20.0  # front closer than this to x = L flags the record

    def __post_init__(self):
        if not (self.domain_length > 0 and self.dx > 0 and self.t_end > 0):
            raise ValueError("domain_length, dx and t_end must be positive")
        if self.dx * 8 > self.domain_length:
            raise ValueError("dx too coarse for the domain")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.record_interval <= 0:
            raise ValueError("record_interval must be positive")

    @property
    def n(self) -> int:
        return int(round(self.domain_length / self.dx)) + 1

    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.domain_length, self.n)

    def time_step(self, params: ModelParams) -> float:
        """Largest stable step, or the configured one after checking it.

        The diffusive bound keeps 1 - 2 d dt/dx^2 >= 0.2; the reaction bound keeps the
        remaining weight nonnegative, so every field stays nonnegative.
        """
        dmax = max(params.d1, params.d2, params.d3 if self.include_r else 0.0)
        diff_cap = 0.4 * self.dx**2 / dmax
        react_cap = 0.2 / (params.beta + params.gamma)
        if self.dt is None:
            steps = math.ceil(self.t_end / min(diff_cap, react_cap))
            return self.t_end / steps
        if self.dt > diff_cap * (1 + 1e-12):
            raise ValueError(f"dt = {self.dt} exceeds the diffusive limit 0.4 dx^2/max d = {diff_cap:.6g}")
        if self.dt * (params.beta + params.gamma) >= 1.0:
            raise ValueError("dt (beta + gamma) must stay below 1")
        return self.dt

    def level_for(self, params: ModelParams) -> float:
        if self.level is not None:
            return self.level
        if params.plateau > 0:
            return LEVEL_FRACTION * params.plateau
        return LEVEL_FRACTION * self.seed_for(params)

    def seed_for(self, params: ModelParams) -> float:
        if self.seed_amplitude is not None:
            return self.seed_amplitude
        if params.plateau > 0:
            return SEED_FRACTION * params.plateau
        return SEED_SUBTHRESHOLD * params.s_minus_inf

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SimState:
    t: float
    x: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray

    def copy(self) -> "SimState":
        return SimState(self.t, self.x, self.s.copy(), self.i.copy(), self.r.copy())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# schema: wavecrit.snapshot/1\n")
        buf.write(f"# t = {self.t!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "S", "I", "R"])
        for row in zip(self.x, self.s, self.i, self.r):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SimState":
        t = 0.0
        rows = []
        for ln in text.splitlines():
            if ln.startswith("# t ="):
                t = float(ln.split("=", 1)[1])
            elif ln and not ln.startswith("#"):
                rows.append(ln)
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        return cls(t, data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def initial_state(cfg: SimConfig, params: ModelParams) -> SimState:
    x = cfg.x()
    s = np.full_like(x, params.s_minus_inf)
    i = np.where(x <= cfg.seed_width, cfg.seed_for(params), 0.0)
    return SimState(0.0, x, s, i, np.zeros_like(x))


def trapezoid_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def total_mass(state: SimState) -> float:
    w = trapezoid_weights(state.x.size, state.x[1] - state.x[0])
    return float(w @ (state.s + state.i + state.r))


def _laplacian(u: np.ndarray, dx: float, out: np.ndarray) -> np.ndarray:
    # reflecting ends: ghost value mirrors the first interior node
    out[1:-1] = u[:-2] - 2.0 * u[1:-1] + u[2:]
    out[0] = 2.0 * (u[1] - u[0])
    out[-1] = 2.0 * (u[-2] - u[-1])
    out /= dx * dx
    return out


class _Stepper:
    """In-place forward Euler stepper with preallocated work arrays."""

    def __init__(self, cfg: SimConfig, params: ModelParams, dt: float, cap: float):
        self.cfg, self.params, self.dt, self.cap = cfg, params, dt, cap
        self.work = np.empty(cfg.n)

    def advance(self, st: SimState, k: int):
        p, dt, dx = self.params, self.dt, self.cfg.dx
        f = _force(st.s, st.i, p.beta, p.guard)
        lap = _laplacian(st.s, dx, self.work)
        s_new = st.s + dt * (p.d1 * lap - f)
        lap = _laplacian(st.i, dx, self.work)
        i_new = st.i + dt * (p.d2 * lap + f - p.gamma * st.i)
        if self.cfg.include_r:
            lap = _laplacian(st.r, dx, self.work)
            st.r += dt * (p.d3 * lap + p.gamma * st.i)
        st.s, st.i = s_new, i_new
        st.t += dt
        if not (np.isfinite(st.s).all() and np.isfinite(st.i).all()) or \
                max(st.s.max(), st.i.max(), st.r.max()) > self.cap:
            raise SimulationUnstable(f"blow-up detected at step {k}, t = {st.t:.6g}")


def step(state: SimState, cfg: SimConfig, params: ModelParams) -> SimState:
    """Advance a copy of ``state`` by one time step."""
    dt = cfg.time_step(params)
    cap = BLOWUP_FACTOR * max(params.s_minus_inf, float(state.s.max()), float(state.i.max()))
    out = state.copy()
    _Stepper(cfg, params, dt, cap).advance(out, 1)
    return out


def front_position(x: np.ndarray, i: np.ndarray, level: float) -> float:
    """Rightmost x where I crosses ``level`` (linear interpolation); nan if I < level everywhere."""
    above = np.nonzero(i >= level)[0]
    if above.size == 0:
        return float("nan")
    j = above[-1]
    if j == x.size - 1:
        return float(x[-1])
    a, b = i[j], i[j + 1]
    return float(x[j] + (a - level) / (a - b) * (x[j + 1] - x[j]))


@dataclass
class SimResult:
    config: SimConfig
    params: ModelParams
    times: np.ndarray
    fronts: np.ndarray
    i_max: np.ndarray
    final: SimState
    snapshots: list[SimState] = field(default_factory=list)
    mass_drift: float = 0.0  # max relative change of int (S+I+R)
    s_max_increase: float = 0.0  # largest pointwise increase of S in one step
    hit_boundary: bool = False  # run stopped early because the front reached the edge zone
    steps: int = 0

    def fronts_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# schema: wavecrit.front/1\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x_level"])
        for t, xf in zip(self.times, self.fronts):
            w.writerow([repr(float(t)), repr(float(xf))])
        return buf.getvalue()

    def snapshot_at(self, t: float) -> SimState:
        return min(self.snapshots + [self.final], key=lambda s: abs(s.t - t))


def read_fronts_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")][1:]
    data = np.array([[float(v) for v in r.split(",")] for r in rows]).reshape(-1, 2)
    return data[:, 0], data[:, 1]


def simulate(params: ModelParams, cfg: Optional[SimConfig] = None,
             snapshot_times: tuple = ()) -> SimResult:
    """Run from the seeded initial state to ``t_end``, recording the front each ``record_interval``."""
    cfg = cfg or SimConfig()
    dt = cfg.time_step(params)
    n_steps = int(round(cfg.t_end / dt))
    st = initial_state(cfg, params)
    cap = BLOWUP_FACTOR * max(params.s_minus_inf, float(st.i.max()))
    stepper = _Stepper(cfg, params, dt, cap)
    level = cfg.level_for(params)
    mass0 = total_mass(st)
    record_every = max(1, int(round(cfg.record_interval / dt)))
    snap_every = None if cfg.snapshot_interval is None else max(1, int(round(cfg.snapshot_interval / dt)))
    snap_steps = {int(round(t / dt)) for t in snapshot_times}

    times, fronts, peaks, snaps = [0.0], [front_position(st.x, st.i, level)], [float(st.i.max())], []
    mass_drift = 0.0
    s_inc = 0.0
    hit = False
    k = 0
    for k in range(1, n_steps + 1):
        s_prev = st.s
        stepper.advance(st, k)
        s_inc = max(s_inc, float(np.max(st.s - s_prev)))
        if k % record_every == 0 or k == n_steps:
            xf = front_position(st.x, st.i, level)
            times.append(st.t)
            fronts.append(xf)
            peaks.append(float(st.i.max()))
            if cfg.include_r:
                mass_drift = max(mass_drift, abs(total_mass(st) / mass0 - 1.0))
            if np.isfinite(xf) and xf > cfg.domain_length - cfg.edge_margin:
                # the record past this point is shaped by the reflecting end
                hit = True
                log.warning("front reached the right boundary zone at t = %.4g; stopping", st.t)
                break
        if (snap_every and k % snap_every == 0) or k in snap_steps:
            snaps.append(st.copy())

    return SimResult(cfg, params, np.array(times), np.array(fronts), np.array(peaks), st,
                     snaps, mass_drift, s_inc, hit, k)


@dataclass
class FrontSpeed:
    speed: float  # plain late-time slope
    speed_ci: float  # half-width of the 95% interval of the slope
    corrected: float  # c from x = c t - k ln t + const
    log_coefficient: float  # k
    n_points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def measure_front_speed(times, positions, burn_in: Optional[float] = None) -> FrontSpeed:
    """Fit the late-time half of a front record.

    The plain estimate is the least-squares slope; the corrected estimate fits
    x = c t - k ln t + const, which accounts for the slow approach of a pulled
    front to its asymptotic speed.
    """
    t = np.asarray(times, float)
    x = np.asarray(positions, float)
    ok = np.isfinite(x) & (t > 0)
    t, x = t[ok], x[ok]
    if burn_in is not None:
        keep = t >= burn_in
        t, x = t[keep], x[keep]
    if t.size < 8:
        raise FrontNearBoundary("insufficient front record (fewer than 8 valid samples before the edge zone)")

    late = t >= t[0] + 0.5 * (t[-1] - t[0])
    tl, xl = t[late], x[late]
    a = np.column_stack([tl, np.ones_like(tl)])
    coef, res, *_ = np.linalg.lstsq(a, xl, rcond=None)
    dof = max(tl.size - 2, 1)
    sigma2 = float(np.sum((a @ coef - xl) ** 2)) / dof
    se = math.sqrt(sigma2 / float(np.sum((tl - tl.mean()) ** 2)))

    b = np.column_stack([t, -np.log(t), np.ones_like(t)])
    c2, *_ = np.linalg.lstsq(b, x, rcond=None)
    return FrontSpeed(float(coef[0]), 1.96 * se, float(c2[0]), float(c2[1]), int(t.size))


def _peak_location(x: np.ndarray, y: np.ndarray) -> float:
    """Sub-grid location of max y from a parabola through the top three samples."""
    j = int(np.argmax(y))
    if j == 0 or j == y.size - 1:
        return float(x[j])
    a, b, c = y[j - 1], y[j], y[j + 1]
    denom = a - 2 * b + c
    off = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    return float(x[j] + off * (x[1] - x[0]))


def extract_comoving_profile(state: SimState, speed: float, grid: WaveGrid,
                             anchor: float = 0.0) -> WaveProfile:
    """Resample the simulated front into the wave variable.

    The simulated front moves toward +x, so xi = x_peak - x + anchor places the
    uninfected side at xi -> -inf and the I-maximum at xi = anchor.
    """
    if not speed > 0:
        raise ValueError("speed must be positive for a right-moving front")
    x_peak = _peak_location(state.x, state.i)
    x_need = x_peak + anchor - grid.nodes  # decreasing in xi
    if x_need.min() < state.x[0] or x_need.max() > state.x[-1]:
        raise FrontNearBoundary(
            f"comoving window [{x_need.min():.4g}, {x_need.max():.4g}] leaves the domain "
            f"[{state.x[0]:.4g}, {state.x[-1]:.4g}]"
        )
    s = np.interp(x_need, state.x, state.s)
    i = np.interp(x_need, state.x, state.i)
    return WaveProfile(grid, s, i)


def peak_xi(p: WaveProfile) -> float:
    return _peak_location(p.xi, p.i)


@dataclass
class CrossCheck:
    i_sup_diff: float  # relative to solver max I
    s_plateau_diff: float  # relative to S_-inf
    sim_i_max: float
    wave_i_max: float
    sim_s_plateau: float
    wave_s_plateau: float
    time: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare_with_wave(state: SimState, speed: float, wave: WaveProfile, params: ModelParams,
                      plateau_nodes: int = 5) -> tuple[CrossCheck, WaveProfile]:
    """Align the simulated front on the wave's I-maximum and measure the discrepancies."""
    sim = extract_comoving_profile(state, speed, wave.grid, anchor=peak_xi(wave))
    i_max = float(wave.i.max())
    s_sim = float(sim.s[-plateau_nodes:].mean())
    s_wave = float(wave.s[-plateau_nodes:].mean())
    out = CrossCheck(
        i_sup_diff=float(np.max(np.abs(sim.i - wave.i))) / i_max,
        s_plateau_diff=abs(s_sim - s_wave) / params.s_minus_inf,
        sim_i_max=float(sim.i.max()),
        wave_i_max=i_max,
        sim_s_plateau=s_sim,
        wave_s_plateau=s_wave,
        time=state.t,
    )
    return out, sim

