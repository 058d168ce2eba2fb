import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from oracles import (
    G_MAX_DEFAULT,
    L2_LHS_20,
    L2_RHS_20,
    LOWER_I_LHS_XI3M1,
    LOWER_I_MARGIN_XI3M1,
    SUB_S_SUP_EPS01,
)
from wavecrit.bounds import (
    BoundSet,
    _eps_ok,
    _l2_ok,
    _sub_s_sup,
    certification_grid,
    certify_inequalities,
    eval_profiles,
    g_function,
    g_max,
    inequality_sides,
    profile_derivatives,
    select_constants,
)
from wavecrit.model import ModelParams, derive_spectral


@pytest.fixture(scope="module")
def default():
    p = ModelParams()
    spec = derive_spectral(p)
    return p, spec


@pytest.fixture(scope="module")
def textbook(default):
    p, spec = default
    return BoundSet.build(p, spec, 0.1, 20.0)


def test_default_constants(textbook):
    bs = textbook
    assert bs.m == 1.0
    assert bs.l1 == pytest.approx(math.e, abs=1e-15)
    assert bs.xi1 == -1.0
    assert bs.xi2 == pytest.approx(-23.025850929940457, abs=1e-12)
    assert bs.xi3 == pytest.approx(-(20.0 / math.e) ** 2, abs=1e-12)


def test_profiles_continuous_at_kinks(textbook):
    bs = textbook
    for k in (bs.xi1, bs.xi2, bs.xi3):
        d = 1e-9 * max(1.0, abs(k))
        lo = np.array(eval_profiles(bs, np.array([k - d])))
        hi = np.array(eval_profiles(bs, np.array([k + d])))
        assert np.max(np.abs(lo - hi)) < 1e-7
    _, i_bar, s_low, i_low = eval_profiles(bs, np.array([bs.xi1, bs.xi2, bs.xi3]))
    assert i_bar[0] == pytest.approx(bs.m, abs=1e-12)
    assert abs(s_low[1]) < 1e-12
    assert abs(i_low[2]) < 1e-12


def test_derivatives_match_finite_differences(textbook):
    bs = textbook
    xi = np.array([-300.0, -80.0, -30.0, -10.0, -2.0, -0.5, 3.0])
    h = 1e-5
    der = profile_derivatives(bs, xi)
    idx = {"i_bar": 1, "s_low": 2, "i_low": 3}
    for key, (val, d1, d2) in der.items():
        f = lambda x: eval_profiles(bs, x)[idx[key]]
        fd1 = (f(xi + h) - f(xi - h)) / (2 * h)
        fd2 = (f(xi + h) - 2 * f(xi) + f(xi - h)) / (h * h)
        scale = np.abs(val) + np.abs(d1) + 1e-300
        assert np.all(np.abs(fd1 - d1) <= 1e-6 * scale + 1e-300), key
        assert np.all(np.abs(fd2 - d2) <= 1e-3 * (np.abs(d2) + scale) + 1e-300), key


def test_sub_s_supremum_against_scan(default):
    p, spec = default
    assert _sub_s_sup(0.1, p, spec, math.e) == pytest.approx(SUB_S_SUP_EPS01, rel=1e-9)


def test_l2_condition_sides_for_twenty(default, textbook):
    p, spec = default
    bs = textbook
    lhs = p.d2 * bs.l2 * p.s_minus_inf * (1.0 - math.exp(bs.eps * bs.xi3) / bs.eps)
    assert lhs == pytest.approx(L2_LHS_20, rel=1e-12)
    rhs = 4.0 * p.beta * bs.l1**2 * (-bs.xi3) ** 3.5 * math.exp(bs.xi3)
    assert rhs == pytest.approx(L2_RHS_20, rel=1e-9)
    assert _eps_ok(0.1, p, spec, bs.l1)
    assert _l2_ok(20.0, 0.1, p, spec, bs.l1)


def test_lower_i_margin_near_kink_against_extended_precision(default, textbook):
    p, spec = default
    xi = np.array([textbook.xi3 - 1.0])
    lhs, rhs = inequality_sides(textbook, spec, xi)["lower_i"]
    assert lhs[0] == pytest.approx(LOWER_I_LHS_XI3M1, rel=1e-8)
    assert (lhs - rhs)[0] == pytest.approx(LOWER_I_MARGIN_XI3M1, rel=1e-6)
    assert (lhs - rhs)[0] > 0


def test_g_max_closed_form_and_numeric(default, textbook):
    p, _ = default
    loc, val = g_max(textbook, p.beta)
    assert loc == -3.5
    assert val == pytest.approx(G_MAX_DEFAULT, rel=1e-13)
    res = minimize_scalar(lambda x: -float(g_function(textbook, p.beta, x)), bounds=(-20, 0),
                          method="bounded", options={"xatol": 1e-12})
    assert -res.fun == pytest.approx(val, rel=1e-10)


def test_profiles_ordered(textbook):
    bs = textbook
    xi = np.linspace(-10 * abs(bs.xi3), 50.0, 20001)
    s_bar, i_bar, s_low, i_low = eval_profiles(bs, xi)
    assert np.all(s_low <= s_bar) and np.all(i_low <= i_bar)
    assert np.all(s_low >= 0) and np.all(i_low >= 0)


def test_upper_tail_is_exact_and_lower_tail_gap_follows_root_law(textbook):
    bs = textbook
    xi = np.array([-100.0, -300.0, -700.0])
    _, i_bar, _, i_low = eval_profiles(bs, xi)
    lead = -bs.l1 * xi * np.exp(xi)
    assert np.allclose(i_bar / lead, 1.0, rtol=1e-14, atol=0)
    # the gap closes only like L2 / (L1 sqrt(-xi))
    gap = 1.0 - i_low / i_bar
    assert np.allclose(gap, bs.l2 / (bs.l1 * np.sqrt(-xi)), rtol=1e-12)
    # at xi = -1000 both profiles underflow; the ratio there is 1 - L2 / (L1 sqrt(1000))
    assert 1.0 - bs.l2 / (bs.l1 * math.sqrt(1000.0)) == pytest.approx(0.767332612, rel=1e-8)
    assert np.all(np.diff(gap) < 0)


def test_select_constants_defaults(default):
    p, spec = default
    bs = select_constants(p, spec)
    assert _eps_ok(bs.eps, p, spec, bs.l1)
    assert _l2_ok(bs.l2, bs.eps, p, spec, bs.l1)
    assert bs.xi3 < bs.xi2 < bs.xi1
    assert bs.eps == pytest.approx(0.318176, rel=1e-5)
    assert bs.l2 == pytest.approx(10.8296, rel=1e-4)


def test_certification_defaults(default):
    p, spec = default
    bs = select_constants(p, spec)
    rep = certify_inequalities(bs, spec)
    assert rep.passed, rep.to_dict()
    assert rep.grid_points == 4096
    assert [r.name for r in rep.results] == ["upper_i", "lower_s", "lower_i"]


def test_certification_random_sweep():
    rng = np.random.default_rng(7)
    for _ in range(20):
        gamma = rng.uniform(0.2, 3.0)
        r0 = rng.uniform(1.05, 10.0)
        p = ModelParams(d1=rng.uniform(0.2, 4.0), d2=rng.uniform(0.2, 4.0), beta=r0 * gamma,
                        gamma=gamma, s_minus_inf=rng.uniform(0.2, 5.0))
        spec = derive_spectral(p)
        bs = select_constants(p, spec)
        rep = certify_inequalities(bs, spec)
        assert rep.passed, (p, rep.to_dict())


def test_certification_grid_excludes_kinks(textbook):
    xi = certification_grid(textbook)
    assert xi.size == 4096
    assert np.all(np.diff(xi) > 0)
    assert not np.any(np.isin(xi, [textbook.xi1, textbook.xi2, textbook.xi3]))


def test_certification_rejects_kink_in_grid(default, textbook):
    _, spec = default
    with pytest.raises(ValueError, match="kink"):
        certify_inequalities(textbook, spec, grid=np.array([-30.0, textbook.xi1, 2.0]))


def test_upper_margin_closed_form(default, textbook):
    p, spec = default
    bs = textbook
    left = np.linspace(-60.0, -1.01, 200)
    lhs, rhs = inequality_sides(bs, spec, left)["upper_i"]
    ib = eval_profiles(bs, left)[1]
    expect = p.beta * ib**2 / (bs.s_minus_inf + ib)
    assert np.allclose(lhs - rhs, expect, rtol=1e-8, atol=1e-14)
    right = np.linspace(-0.99, 40.0, 200)
    lhs, rhs = inequality_sides(bs, spec, right)["upper_i"]
    assert np.max(np.abs(lhs - rhs)) < 1e-14


def test_broken_bounds_are_reported(default, textbook):
    _, spec = default
    # a lower bound for I that is too large violates its inequality
    bad = BoundSet(**{**textbook.to_dict(), "l2": 0.5, "xi3": -((0.5 / textbook.l1) ** 2)})
    rep = certify_inequalities(bad, spec)
    assert not rep.passed
    failed = [r.name for r in rep.results if not r.passed]
    assert "lower_i" in failed
