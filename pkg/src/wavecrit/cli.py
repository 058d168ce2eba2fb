"""Command-line entry point: ``wavecrit <subcommand> [--config PATH] [--out DIR] [--override k=v ...]``.

Exit status is 0 when every executed check passes, 1 when a check fails and 2
on errors (a JSON description of the error goes to stderr).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import tolerances as tol
from .bounds import certify_inequalities, select_constants
from .config import ConfigError, GridSpec, RunConfig, load_config, with_output
from .diagnostics import diagnose
from .files import profile_from_csv, profile_to_csv, read_json, to_json, write_text
from .model import derive_spectral
from .pdesim import FrontNearBoundary, SimResult, compare_with_wave, measure_front_speed, simulate
from .solver import Problem, iterate
from .waveop import WaveGrid

log = logging.getLogger("wavecrit")

SUBCOMMANDS = ("spectral", "verify-bounds", "solve", "diagnose", "simulate", "crosscheck", "report")


def thread_cap() -> int:
    raw = os.environ.get("WAVECRIT_THREADS", "")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"WAVECRIT_THREADS must be an integer, got {raw!r}", None, "WAVECRIT_THREADS",
                          "<environment>") from None
    if n < 1:
        raise ConfigError("WAVECRIT_THREADS must be at least 1", None, "WAVECRIT_THREADS", "<environment>")
    return n


def resolve_grid(spec, bs, g: GridSpec) -> WaveGrid:
    base = WaveGrid.default_for(spec, bs, g.h)
    if g.is_default():
        return base
    lo = base.xi_min if g.xi_min is None else g.xi_min
    hi = base.xi_max if g.xi_max is None else g.xi_max
    if g.n is not None:
        return WaveGrid(lo, hi, g.n)
    return WaveGrid.from_spacing(lo, hi, g.h if g.h is not None else base.h)


def build_problem(cfg: RunConfig) -> Problem:
    prob = Problem.build(cfg.model, cfg.solve)
    grid = resolve_grid(prob.spec, prob.bounds, cfg.grid)
    return replace(prob, grid=grid)


def _checks(*pairs) -> list[dict]:
    return [{"name": n, "passed": bool(ok)} for n, ok in pairs]


def _emit(cfg: RunConfig, name: str, kind: str, payload: dict) -> dict:
    write_text(cfg.output_dir / name, to_json(kind, payload))
    return payload


# ---------------------------------------------------------------- subcommands

def cmd_spectral(cfg: RunConfig, args) -> bool:
    spec = derive_spectral(cfg.model, cfg.solve.beta1, cfg.solve.beta2, cfg.solve.mu)
    checks = []
    for k, d in ((1, cfg.model.d1), (2, cfg.model.d2)):
        lm, lp, big, shift = spec.roots(k)
        res = max(abs(d * lam * lam - spec.c_star * lam - shift) for lam in (lm, lp))
        checks.append((f"root_residual_{k}", res < tol.ROOT_RTOL * shift))
        checks.append((f"normalizer_{k}", abs(big - d * (lp - lm)) < tol.ROOT_RTOL * big))
    checks.append(("mu_admissible", 0 < spec.mu < min(-spec.lambda1_minus, -spec.lambda2_minus)))
    payload = {"spectral": spec.to_dict(), "checks": _checks(*checks)}
    _emit(cfg, "spectral.json", "spectral", payload)
    print(json.dumps(spec.to_dict(), indent=2))
    return all(ok for _, ok in checks)


def cmd_verify_bounds(cfg: RunConfig, args) -> bool:
    spec = derive_spectral(cfg.model, cfg.solve.beta1, cfg.solve.beta2, cfg.solve.mu)
    bs = select_constants(cfg.model, spec)
    cert = certify_inequalities(bs, spec)
    payload = cert.to_dict()
    payload["checks"] = [{"name": r.name, "passed": r.passed} for r in cert.results]
    _emit(cfg, "bounds.json", "bounds", payload)
    for r in cert.results:
        print(f"{r.name:8s} {'PASS' if r.passed else 'FAIL'}  worst relative margin {r.worst_relative:.3e}"
              f" at xi={r.worst_xi:.6g}  [{r.statement}]")
    return cert.passed


def _solve(cfg: RunConfig):
    prob = build_problem(cfg)
    p, trace = iterate(prob, cfg.solve)
    return prob, p, trace


def cmd_solve(cfg: RunConfig, args) -> bool:
    prob, p, trace = _solve(cfg)
    _write_solution(cfg, prob, p, trace)
    print(f"converged in {trace.iterations} iterations, residual {trace.final_residual:.3e}, "
          f"max I = {p.i.max():.10g}")
    return trace.converged


def _write_solution(cfg, prob, p, trace):
    if "profile" in cfg.emit:
        write_text(cfg.output_dir / "wave_profile.csv", profile_to_csv(p))
    if "trace" in cfg.emit:
        write_text(cfg.output_dir / "trace.csv", trace.to_csv())
    _emit(cfg, "solve.json", "solve", {
        "iterations": trace.iterations,
        "final_residual": trace.final_residual,
        "grid": prob.grid.to_dict(),
        "bounds": prob.bounds.to_dict(),
        "config": cfg.solve.to_dict(),
        "checks": _checks(("converged", trace.converged)),
    })


def cmd_diagnose(cfg: RunConfig, args) -> bool:
    path = Path(args.profile) if args.profile else cfg.output_dir / "wave_profile.csv"
    spec = derive_spectral(cfg.model, cfg.solve.beta1, cfg.solve.beta2, cfg.solve.mu)
    bs = select_constants(cfg.model, spec)
    if path.exists():
        p = profile_from_csv(path.read_text())
    elif args.profile:
        raise FileNotFoundError(f"profile file {path} not found")
    else:
        log.info("no profile at %s; solving first", path)
        prob, p, trace = _solve(cfg)
        _write_solution(cfg, prob, p, trace)
    rep = diagnose(p, spec, bs)
    _emit(cfg, "wave_report.json", "wave_report", rep.to_dict())
    for c in rep.checks:
        print(f"{c.name:32s} {'PASS' if c.passed else 'FAIL'}  {c.value:.6g}  {c.detail}")
    return rep.passed


def _simulate(cfg: RunConfig, snapshot_times=()) -> SimResult:
    return simulate(cfg.model, cfg.sim, snapshot_times)


def _sim_payload(cfg: RunConfig, res: SimResult) -> tuple[dict, list]:
    prm = cfg.model
    checks = [
        ("nonnegative", bool(min(res.final.s.min(), res.final.i.min(), res.final.r.min()) >= 0)),
    ]
    if cfg.sim.include_r:
        checks.append(("mass_conserved", res.mass_drift < tol.MASS_CONSERVATION_RTOL * max(1, res.steps / 1000)))
    payload = {"steps": res.steps, "t_final": res.final.t, "mass_drift": res.mass_drift,
               "s_max_increase": res.s_max_increase, "stopped_at_edge": res.hit_boundary,
               "i_max_final": float(res.final.i.max())}
    if prm.r0 > 1:
        c_star = 2.0 * math.sqrt(prm.d2 * (prm.beta - prm.gamma))
        fs = measure_front_speed(res.times, res.fronts)
        payload["front_speed"] = fs.to_dict()
        payload["c_star"] = c_star
        checks.append(("speed_plain", abs(fs.speed / c_star - 1) < tol.SPEED_PLAIN_RTOL))
        checks.append(("speed_corrected", abs(fs.corrected / c_star - 1) < tol.SPEED_LOG_RTOL))
    else:
        checks.append(("infection_dies_out", float(res.final.i.max()) < tol.THRESHOLD_I_MAX))
    payload["checks"] = _checks(*checks)
    return payload, checks


def _write_sim(cfg: RunConfig, res: SimResult):
    if "fronts" in cfg.emit:
        write_text(cfg.output_dir / "fronts.csv", res.fronts_csv())
    if "snapshots" in cfg.emit:
        for snap in res.snapshots + [res.final]:
            write_text(cfg.output_dir / f"snapshot_t{snap.t:09.3f}.csv", snap.to_csv())


def cmd_simulate(cfg: RunConfig, args) -> bool:
    res = _simulate(cfg)
    _write_sim(cfg, res)
    payload, checks = _sim_payload(cfg, res)
    _emit(cfg, "simulate.json", "simulate", payload)
    if "front_speed" in payload:
        fs = payload["front_speed"]
        print(f"front speed {fs['speed']:.6g} (log-corrected {fs['corrected']:.6g}), c* = {payload['c_star']:.6g}")
    else:
        print(f"R0 <= 1: max I at t = {res.final.t:.4g} is {res.final.i.max():.3e}")
    return all(ok for _, ok in checks)


def cmd_crosscheck(cfg: RunConfig, args) -> bool:
    if cfg.model.r0 <= 1:
        raise FrontNearBoundary("crosscheck needs R0 > 1 (no wave to compare)")
    t_cmp = cfg.sim.t_end - 10.0
    if thread_cap() >= 2:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut_solve = pool.submit(_solve, cfg)
            fut_sim = pool.submit(_simulate, cfg, (t_cmp,))
            prob, p, trace = fut_solve.result()
            res = fut_sim.result()
    else:
        prob, p, trace = _solve(cfg)
        res = _simulate(cfg, (t_cmp,))
    _write_solution(cfg, prob, p, trace)
    _write_sim(cfg, res)
    fs = measure_front_speed(res.times, res.fronts)
    cmp_final, sim_final = compare_with_wave(res.final, fs.speed, p, cfg.model)
    earlier = res.snapshot_at(t_cmp)
    _, sim_early = compare_with_wave(earlier, fs.speed, p, cfg.model)
    drift = float(np.max(np.abs(sim_final.i - sim_early.i))) / float(sim_final.i.max())
    if "profile" in cfg.emit:
        write_text(cfg.output_dir / "comoving_profile.csv", profile_to_csv(sim_final))
    checks = [
        ("converged", trace.converged),
        ("i_profile_agreement", cmp_final.i_sup_diff < tol.CROSS_I_RTOL),
        ("s_plateau_agreement", cmp_final.s_plateau_diff < tol.CROSS_S_RTOL),
        ("shape_stable_in_time", drift < tol.SNAPSHOT_RTOL),
    ]
    _emit(cfg, "crosscheck.json", "crosscheck", {
        "comparison": cmp_final.to_dict(),
        "front_speed": fs.to_dict(),
        "snapshot_times": [earlier.t, res.final.t],
        "shape_drift": drift,
        "note": "Agreement of the simulated front with the computed wave is a plausibility check; "
                "convergence of initial-value solutions to the wave is not proven.",
        "checks": _checks(*checks),
    })
    print(f"I sup difference {cmp_final.i_sup_diff:.3%} of max I; S plateau difference "
          f"{cmp_final.s_plateau_diff:.3%} of S_-inf; shape drift {drift:.3%}")
    return all(ok for _, ok in checks)


def cmd_report(cfg: RunConfig, args) -> bool:
    parts = {}
    for path in sorted(cfg.output_dir.glob("*.json")):
        if path.name == "summary.json":
            continue
        try:
            doc = read_json(path)
        except ValueError:
            continue
        parts[doc.get("kind", path.stem)] = doc
    if not parts:
        raise FileNotFoundError(f"no reports found in {cfg.output_dir}")
    failed = [f"{kind}.{c['name']}" for kind, doc in parts.items() for c in doc.get("checks", []) if not c["passed"]]
    _emit(cfg, "summary.json", "summary", {"reports": parts, "failed": failed,
                                           "passed": not failed})
    for kind, doc in parts.items():
        n = len(doc.get("checks", []))
        bad = sum(not c["passed"] for c in doc.get("checks", []))
        print(f"{kind:12s} {n - bad}/{n} checks pass")
    return not failed


COMMANDS = {
    "spectral": cmd_spectral,
    "verify-bounds": cmd_verify_bounds,
    "solve": cmd_solve,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
    "crosscheck": cmd_crosscheck,
    "report": cmd_report,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavecrit", description="Critical traveling wave of the diffusive SIR model.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="INI run configuration")
    ap.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    ap.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config value; repeatable")
    ap.add_argument("--profile", help="profile CSV for diagnose (default: OUT/wave_profile.csv)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _error(kind: str, exc: BaseException, sub: str) -> int:
    doc = {"error": kind, "type": type(exc).__name__, "message": str(exc), "subcommand": sub}
    for attr in ("line", "key"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    if hasattr(exc, "trace"):
        doc["iterations"] = exc.trace.iterations
        doc["final_residual"] = exc.trace.final_residual
    print(json.dumps(doc), file=sys.stderr)
    return 2


def main(argv: Optional[list] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = with_output(load_config(args.config, args.override), args.out)
        ok = COMMANDS[args.subcommand](cfg, args)
    except ConfigError as exc:
        return _error("config", exc, args.subcommand)
    except Exception as exc:  # every module error becomes machine-readable output
        return _error("runtime", exc, args.subcommand)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
