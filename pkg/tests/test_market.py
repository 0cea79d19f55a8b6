import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import model_params
from parisian_ruin.market import (PAPER_PARAMS, ModelParams, ParameterError, derive_constants,
                                  dual_exponents, validate)

# 40-digit mpmath roots of −δB² + (r−h+δ)B + h = 0 at the reference parameters
B1 = 2.686140661634507164962652867054732329555
B2 = -0.1861406616345071649626528670547323295551
B3 = 2.186140661634507164962652867054732329555
B4 = -0.6861406616345071649626528670547323295551
Q = 1.593070330817253582481326433527366164778
ALPHA = 0.2965351654086267912406632167636830823888


def test_paper_params_accepted():
    assert validate(PAPER_PARAMS) is PAPER_PARAMS


@pytest.mark.parametrize("change, message", [
    ({"mu": 0.04}, "requires μ > r"),
    ({"mu": 0.03}, "requires μ > r"),
    ({"sigma": 0.0}, "requires σ > 0"),
    ({"sigma": -0.2}, "requires σ > 0"),
    ({"r": 0.0}, "requires r > 0"),
    ({"lam": 0.0}, "requires λ > 0"),
    ({"rho": 0.0}, "requires ρ > 0"),
    ({"c": -1.0}, "requires c > 0"),
    ({"L": 0.0}, "requires L > 0"),
])
def test_standing_assumptions_rejected(change, message):
    with pytest.raises(ParameterError, match=message):
        validate(PAPER_PARAMS.replace(**change))


@pytest.mark.parametrize("bad", [math.nan, math.inf, "0.2"])
def test_non_finite_rejected(bad):
    with pytest.raises(ParameterError, match="finite"):
        validate(PAPER_PARAMS.replace(sigma=bad))


def test_paper_constants():
    k = derive_constants(PAPER_PARAMS)
    assert k.delta == pytest.approx(0.02, rel=1e-14)
    for got, want in ((k.B1, B1), (k.B2, B2), (k.B3, B3), (k.B4, B4), (k.q, Q), (k.alpha, ALPHA)):
        assert got == pytest.approx(want, rel=1e-14)
    assert k.merton_ratio == pytest.approx(1.0)


def test_alpha_discriminant_is_exact():
    p = PAPER_PARAMS
    k = derive_constants(p)
    a = p.r - p.lam + k.delta
    assert a * a + 4 * k.delta * (p.lam + p.rho) == pytest.approx(0.0049, rel=1e-14)


def test_as_dict_keys():
    assert list(PAPER_PARAMS.as_dict()) == ["r", "mu", "sigma", "lambda", "rho", "c", "L"]
    assert set(derive_constants(PAPER_PARAMS).as_dict()) == {"delta", "B1", "B2", "B3", "B4", "q", "alpha"}


def test_safe_level_and_lower_payoff():
    assert PAPER_PARAMS.safe_level == pytest.approx(25.0)
    assert PAPER_PARAMS.lower_payoff == pytest.approx(2 / 3)


def test_small_root_without_cancellation():
    delta, r, h = 0.02, 0.04, 1e-12
    _, small = dual_exponents(delta, r, h)
    assert small == pytest.approx(-h / (r + delta), rel=1e-9)


@given(model_params())
def test_vieta_and_ordering(p):
    k = derive_constants(p)
    for (hi, lo), h in (((k.B1, k.B2), p.lam), ((k.B3, k.B4), p.lam + p.rho)):
        assert hi + lo == pytest.approx((p.r - h + k.delta) / k.delta, rel=1e-10, abs=1e-12)
        assert hi * lo == pytest.approx(-h / k.delta, rel=1e-10)
    assert k.B1 > k.B3 > 1.0 > 0.0 > k.B2 > k.B4
    assert k.q > 1.0 and k.alpha > 0.0


@given(model_params(), st.floats(1.05, 3.0))
def test_alpha_increases_with_rho(p, factor):
    a1 = derive_constants(p).alpha
    a2 = derive_constants(p.replace(rho=p.rho * factor)).alpha
    assert a2 > a1


@given(model_params(), st.floats(0.002, 0.5))
def test_q_independent_of_rho(p, rho):
    assert derive_constants(p).q == derive_constants(p.replace(rho=rho)).q


def test_replace_is_a_copy():
    p2 = PAPER_PARAMS.replace(rho=0.03)
    assert p2.rho == 0.03 and PAPER_PARAMS.rho == 0.02
    assert isinstance(p2, ModelParams)
