import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavecrit.model import (
    InvalidRegime,
    ModelParams,
    characteristic,
    critical_speed,
    derive_spectral,
    h_funcs,
    infection_force,
    kernel_roots,
)

pos = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)


def test_default_speed_and_rate():
    spec = derive_spectral(ModelParams())
    assert spec.c_star == pytest.approx(2.0, abs=1e-15)
    assert spec.lambda_star == pytest.approx(1.0, abs=1e-15)
    assert spec.r0 == 2.0


def test_kernel_roots_closed_forms():
    spec = derive_spectral(ModelParams())
    assert spec.beta1 == 4.0 and spec.beta2 == 3.0
    assert spec.lambda1_plus == pytest.approx(1 + math.sqrt(5), abs=1e-14)
    assert spec.lambda1_minus == pytest.approx(1 - math.sqrt(5), abs=1e-14)
    assert spec.big_lambda1 == pytest.approx(math.sqrt(20), abs=1e-14)
    assert (spec.lambda2_plus, spec.lambda2_minus, spec.big_lambda2) == pytest.approx((3.0, -1.0, 4.0), abs=1e-14)
    assert spec.mu == pytest.approx(0.5 * min(math.sqrt(5) - 1, 1.0))


def test_rejects_subcritical_regime_naming_threshold():
    with pytest.raises(InvalidRegime, match="R0 > 1"):
        derive_spectral(ModelParams(beta=0.9))
    with pytest.raises(InvalidRegime):
        critical_speed(1.0, 1.0, 1.0)


@pytest.mark.parametrize("kw", [{"beta1": 2.0}, {"beta1": 1.0}, {"beta2": 1.0}, {"beta2": 0.5}])
def test_rejects_inadmissible_shifts(kw):
    with pytest.raises(ValueError):
        derive_spectral(ModelParams(), **kw)


@pytest.mark.parametrize("mu", [0.0, -0.1, 1.0, 5.0])
def test_rejects_mu_outside_interval(mu):
    with pytest.raises(ValueError, match="mu"):
        derive_spectral(ModelParams(), mu=mu)


@pytest.mark.parametrize("field", ["d1", "d2", "d3", "beta", "gamma", "s_minus_inf"])
def test_params_must_be_positive(field):
    with pytest.raises(ValueError, match=field):
        ModelParams(**{field: 0.0})
    with pytest.raises(ValueError):
        ModelParams(**{field: float("nan")})


def test_params_dict_round_trip_and_unknown_key():
    p = ModelParams(beta=3.0, d1=0.5)
    assert ModelParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError, match="unknown"):
        ModelParams.from_dict({"beta": 2.0, "kappa": 1.0})


def test_force_examples():
    assert infection_force(0.0, 0.5, 2.0) == 0.0
    assert infection_force(1.0, 1.0, 2.0) == pytest.approx(1.0)
    assert infection_force(0.0, 0.0, 2.0, guard=1e-14) == 0.0


def test_force_tiny_infection_against_extended_precision():
    got = infection_force(1.0, 1e-300, 2.0, guard=1e-300)
    mpmath.mp.dps = 40
    exact = mpmath.mpf(2) * mpmath.mpf("1e-300") / (1 + mpmath.mpf("1e-300"))
    assert math.isfinite(got)
    assert abs(mpmath.mpf(got) - exact) < mpmath.mpf("1e-310")
    assert abs(got - 0.0) < 1e-299


def test_force_rejects_negative():
    with pytest.raises(ValueError):
        infection_force(-1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        infection_force(np.array([1.0, 2.0]), np.array([0.1, -0.1]), 2.0)


def test_force_continuous_across_guard():
    g = 1e-14
    below = infection_force(g * 0.5, g * 0.4, 2.0, guard=g)
    above = infection_force(g * 0.5, g * 0.6, 2.0, guard=g)
    assert below == 0.0
    assert above < 2.0 * g


def test_h_funcs_examples():
    spec = derive_spectral(ModelParams())
    assert h_funcs(1.0, 0.0, spec) == pytest.approx((4.0, 0.0))
    assert h_funcs(1.0, 1.0, spec) == pytest.approx((3.0, 3.0))
    # dh2/dS = beta I^2/(S+I)^2 > 0
    assert h_funcs(2.0, 1.0, spec)[1] > h_funcs(1.0, 1.0, spec)[1]
    assert h_funcs(2.0, 1.0, spec)[1] == pytest.approx(2.0 + 2.0 * 2.0 / 3.0)


def test_monotone_structure_of_sources():
    spec = derive_spectral(ModelParams())
    rng = np.random.default_rng(0)
    s = rng.uniform(1e-3, 10.0, 1000)
    i = rng.uniform(1e-3, 10.0, 1000)
    d = 1e-6
    a1, a2 = h_funcs(s, i, spec)
    a1_s, a2_s = h_funcs(s + d, i, spec)
    a1_i, a2_i = h_funcs(s, i + d, spec)
    slack = 1e-12
    assert np.all(a1_s - a1 >= -slack)
    assert np.all(a1_i - a1 <= slack)
    assert np.all(a2_s - a2 >= -slack)
    assert np.all(a2_i - a2 >= -slack)
    assert np.all(a1 >= 0) and np.all(a2 >= 0)


@settings(max_examples=200, deadline=None)
@given(s=st.floats(0, 1e6), i=st.floats(0, 1e6), beta=pos)
def test_force_bounded_by_smaller_density(s, i, beta):
    f = infection_force(s, i, beta, guard=1e-14)
    assert 0.0 <= f <= beta * min(s, i) * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(d1=pos, d2=pos, gamma=pos, excess=st.floats(0.01, 20.0))
def test_root_residuals_and_normalizers(d1, d2, gamma, excess):
    p = ModelParams(d1=d1, d2=d2, beta=gamma + excess, gamma=gamma)
    spec = derive_spectral(p)
    for k, d in ((1, d1), (2, d2)):
        lm, lp, big, shift = spec.roots(k)
        assert lm < 0 < lp
        for lam in (lm, lp):
            assert abs(d * lam * lam - spec.c_star * lam - shift) < 1e-12 * shift * max(1.0, d * lp * lp / shift)
        assert big == pytest.approx(d * (lp - lm), rel=1e-12)
    assert 0 < spec.mu < min(-spec.lambda1_minus, -spec.lambda2_minus)


@settings(max_examples=100, deadline=None)
@given(d2=pos, gamma=pos, excess=st.floats(0.01, 20.0), lam=st.floats(-50, 50))
def test_characteristic_has_double_root_at_critical_speed(d2, gamma, excess, lam):
    p = ModelParams(d2=d2, beta=gamma + excess, gamma=gamma)
    spec = derive_spectral(p)
    scale = d2 * spec.lambda_star**2 + excess
    assert abs(characteristic(spec.lambda_star, spec.c_star, p)) < 1e-12 * scale
    assert characteristic(lam, spec.c_star, p) >= -1e-12 * (scale + d2 * lam * lam)


def test_kernel_roots_stable_for_tiny_shift():
    lm, lp = kernel_roots(1.0, 1e4, 1e-6)
    # product of roots is -shift/d
    assert lm * lp == pytest.approx(-1e-6, rel=1e-12)
