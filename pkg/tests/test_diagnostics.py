import json
import math

import numpy as np
import pytest

from wavecrit.bounds import eval_profiles
from wavecrit.diagnostics import (
    check_monotone_positive,
    check_tail_asymptotics,
    check_upper_bounds,
    cumulative,
    d1_4th,
    d2_4th,
    diagnose,
    integrate,
    ode_residual,
    p_constant,
    p_function,
    p_rate,
    reconstruct_s_prime,
    upper_bound_pair,
)
from wavecrit.files import to_json
from wavecrit.waveop import WaveGrid, WaveProfile

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def report(default_solution):
    prob, p, _ = default_solution
    return diagnose(p, prob.spec, prob.bounds)


def by_name(checks):
    return {c.name: c for c in checks}


def test_default_wave_passes_every_check(report):
    assert report.passed, report.failed()
    assert len(report.checks) >= 15


def test_reported_values(report):
    assert report.wave_mass == pytest.approx(2.0, rel=1e-6)
    assert abs(report.s_infinity) < 1e-6
    assert report.i_bound_m == 1.0
    assert report.i_bound_p == pytest.approx(4.0 / (math.sqrt(8.0) + 2.0), rel=1e-6)
    assert report.p_limit == pytest.approx(0.828427124746, rel=1e-6)
    assert report.tail_slope == pytest.approx(1.0, rel=0.02)
    assert report.ode_residual < 1e-4


def test_closed_form_constants(default_problem):
    prm = default_problem.params
    assert p_rate(prm, 2.0) == pytest.approx(1.0 + SQRT2, rel=1e-15)
    assert p_constant(prm, 2.0) == pytest.approx(SQRT2 - 1.0, rel=1e-14)
    assert upper_bound_pair(prm, 2.0, 0.0) == pytest.approx((1.0, 4.0 / (math.sqrt(8.0) + 2.0)))


def test_difference_stencils_exact_on_quartics():
    x = np.linspace(-1.0, 2.0, 31)
    h = x[1] - x[0]
    y = 3 * x**4 - x**3 + 2 * x - 5
    assert np.allclose(d1_4th(y, h), (12 * x**3 - 3 * x**2 + 2)[2:-2], atol=1e-10)
    assert np.allclose(d2_4th(y, h), (36 * x**2 - 6 * x)[2:-2], atol=1e-9)


def test_integrate_leading_edge_tail_exact():
    g = WaveGrid(-30.0, 0.0, 30001)
    p = WaveProfile(g, np.ones(g.n), np.zeros(g.n))
    y = -g.nodes * np.exp(g.nodes)
    # int_{-inf}^0 (-x) e^x dx = 1; the trapezoid part carries its h^2/12 [y'] error
    exact = 1.0 - g.h**2 / 12.0
    assert integrate(y, p, 1.0) == pytest.approx(exact, rel=1e-11)
    assert cumulative(y, p, 1.0)[-1] == pytest.approx(exact, rel=1e-11)


def test_constant_state_solves_ode_exactly(default_problem):
    g = WaveGrid(-10.0, 10.0, 101)
    p = WaveProfile(g, np.full(g.n, 1.0), np.zeros(g.n))
    assert ode_residual(p, default_problem.params, 2.0) == 0.0


def test_bounds_have_residual_signs(default_problem):
    prob = default_problem
    bs = prob.bounds
    g = WaveGrid(-60.0, 20.0, 8001)
    s_bar, i_bar, s_low, i_low = eval_profiles(bs, g.nodes)
    _, (xi, _, r_i) = ode_residual(WaveProfile(g, s_bar, i_bar), prob.params, 2.0, fields=True)
    far = np.abs(xi - bs.xi1) > 5 * g.h
    # super-solution: c I' - d2 I'' - f + gamma I >= 0
    assert np.all(r_i[far] >= -1e-8)
    _, (xi, r_s, r_i) = ode_residual(WaveProfile(g, s_low, i_low), prob.params, 2.0, fields=True)
    away = (np.abs(xi - bs.xi2) > 5 * g.h) & (np.abs(xi - bs.xi3) > 5 * g.h)
    # sub-solution for I: c I' - d2 I'' - f + gamma I <= 0 where I_low > 0
    sel = away & (xi < bs.xi3)
    assert np.all(r_i[sel] <= 1e-8)


def test_s_prime_reconstruction_matches_differences(default_solution):
    prob, p, _ = default_solution
    sp = reconstruct_s_prime(p, prob.params, 2.0)
    fd = d1_4th(p.s, p.grid.h)
    assert np.max(np.abs(sp[2:-2] - fd)) < 1e-4 * np.max(np.abs(sp))


def test_p_function_increases_to_target(default_solution):
    prob, p, _ = default_solution
    pf = p_function(p, prob.params, prob.spec)
    assert pf[0] < 1e-6
    assert pf[-1] == pytest.approx(4.0 / (math.sqrt(8.0) + 2.0), rel=1e-3)


def test_zero_infection_fails_positivity(default_problem):
    prob = default_problem
    g = prob.grid
    p = WaveProfile(g, np.full(g.n, 1.0), np.zeros(g.n))
    checks = by_name(check_monotone_positive(p, prob.spec))
    assert not checks["i_positive"].passed
    assert not checks["s_strictly_between"].passed
    rep = diagnose(p, prob.spec, prob.bounds)
    assert not rep.passed
    assert "i_positive" in rep.failed()


def test_bump_in_s_is_caught(default_solution):
    prob, p, _ = default_solution
    q = p.copy()
    q.s[4000] += 0.05
    rep = diagnose(q, prob.spec, prob.bounds)
    failed = set(rep.failed())
    assert {"s_nodal_nonincreasing", "ode_residual"} <= failed


def test_plateau_bound_is_strict(default_solution):
    prob, p, _ = default_solution
    q = p.copy()
    q.i[np.argmax(q.i)] = prob.params.plateau
    checks = by_name(check_upper_bounds(q, prob.params, prob.spec))
    assert not checks["i_below_plateau"].passed
    assert not checks["i_below_drop_bound"].passed


def test_wrong_tail_rate_is_caught(default_solution):
    prob, p, _ = default_solution
    q = p.copy()
    left = q.xi < prob.bounds.xi3
    # pure e^{xi} edge: right rate but missing the (-xi) factor
    q.i[left] = np.exp(q.xi[left]) * q.i[left][-1] / math.exp(q.xi[left][-1])
    checks = by_name(check_tail_asymptotics(q, prob.spec, prob.bounds))
    assert not checks["tail_slope"].passed
    assert not checks["tail_envelope"].passed


def test_short_grid_reports_missing_tail_window(default_problem):
    prob = default_problem
    g = WaveGrid(prob.bounds.xi3 - 6.0, 40.0, 4001)
    p = WaveProfile(g, np.full(g.n, 0.5), np.full(g.n, 0.1))
    checks = check_tail_asymptotics(p, prob.spec, prob.bounds)
    assert [c.name for c in checks] == ["tail_window"]
    assert not checks[0].passed


def test_report_serializes(report):
    doc = json.loads(to_json("wave_report", report.to_dict()))
    assert doc["schema"] == "wavecrit.report/1"
    assert doc["passed"] is True
    assert len(doc["identity_lhs_rhs"]) == 3
    assert any("uniqueness" in n for n in doc["notes"])
