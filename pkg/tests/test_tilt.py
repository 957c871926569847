import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excursion_lab.errors import AssumptionNotSatisfied, DomainError, InputError, NoBracket
from excursion_lab.laws import SRW1D, Tabulated, TwoPoint, Zeta
from excursion_lab.tilt import (
    build_tilted,
    centering_constant,
    free_energy_residual,
    gamma_threshold,
    gumbel_constant,
    solve_free_energy,
    tail_asymptotic,
    threshold,
    tilted_tail_asymptotic,
    tilted_tail_exact,
)

from .conftest import BETA_TWOPOINT

# Independent values: mpmath (40 digits) with sum_n n^-a e^{-nF} = Li_a(e^{-F}),
# sum_{n>k} n^-a x^n = x^{k+1} Phi(x, a, k+1).
ZETA2_F = {0.5: 0.27401391377929542109, 1.0: 0.66088147183240153876, 2.0: 1.5588554588053938277}
ZETA2_MU = 1.2005351934865938818
ZETA2_C = -0.26045454166487967526
ZETA2_GAMMA0_N1E4 = 6.6071624960234333816
ZETA2_TILTED_TAIL = {100: 3.3682883533339210673e-33, 500: 2.1703873080287230732e-149}
ZETA2_TAIL_RATIO = {100: 0.96047933973565257559, 500: 0.99180564813025389246}


def test_twopoint_closed_form(twopoint_model):
    # x = e^{-F}: (x + x^2)/2 = 3/8  =>  x = 1/2
    assert solve_free_energy(TwoPoint(0.5), BETA_TWOPOINT) == pytest.approx(math.log(2), abs=1e-15)
    m = twopoint_model
    np.testing.assert_allclose(m.q, [2 / 3, 1 / 3], rtol=1e-14)
    assert m.mu == pytest.approx(4 / 3, rel=1e-14)
    assert m.M == 2


@pytest.mark.parametrize("beta", sorted(ZETA2_F))
def test_zeta2_free_energy_golden(beta):
    assert solve_free_energy(Zeta(2), beta) == pytest.approx(ZETA2_F[beta], rel=1e-14)


def test_zeta2_model_golden(zeta2_model):
    assert zeta2_model.mu == pytest.approx(ZETA2_MU, rel=1e-13)
    assert gumbel_constant(zeta2_model) == pytest.approx(ZETA2_C, rel=1e-13)
    g = gamma_threshold(zeta2_model, 0.0, 1e4 / zeta2_model.mu)
    assert g == pytest.approx(ZETA2_GAMMA0_N1E4, rel=1e-13)


def test_residual_certificate_independent_order(zeta2_model):
    m = zeta2_model
    law = m.law
    n = np.arange(20000, 0, -1)  # reverse summation order, plain accumulation
    s = 0.0
    for t in law.pmf_array(n) * np.exp(-n * m.F):
        s += t
    assert abs(s - math.exp(-m.beta)) <= m.tol
    r, err = free_energy_residual(law, m.F, m.beta)
    assert abs(r) + err <= m.tol


@pytest.mark.parametrize("law", [Zeta(1.5), Zeta(2), Zeta(3), SRW1D(), TwoPoint(0.3)], ids=lambda l: l.describe())
def test_monotone_in_beta(law):
    betas = [0.25, 0.5, 1.0, 2.0, 4.0]
    models = [build_tilted(law, b) for b in betas]
    Fs = [m.F for m in models]
    mus = [m.mu for m in models]
    assert all(0 < F < b for F, b in zip(Fs, betas))
    assert all(a < b for a, b in zip(Fs, Fs[1:]))
    assert all(a > b for a, b in zip(mus, mus[1:]))
    assert all(mu >= 1 for mu in mus)


@given(alpha=st.floats(1.5, 4.0), beta=st.floats(0.3, 5.0))
@settings(max_examples=25, deadline=None)
def test_table_brackets_one(alpha, beta):
    m = build_tilted(Zeta(alpha), beta)
    assert 1 - m.eps_trunc - 1e-14 <= m.table_mass <= 1 + 1e-14
    assert m.residual <= m.tol
    assert 0 < m.F < beta


def test_q_matches_definition(srw_model):
    m = srw_model
    n = np.arange(1, m.M + 1)
    np.testing.assert_allclose(m.q, math.exp(m.beta) * m.law.pmf_array(n) * np.exp(-n * m.F), rtol=1e-13)
    assert m.mu == pytest.approx(float(np.sum(n * m.q)), rel=1e-14)


def test_build_rejects_bad_eps():
    with pytest.raises(InputError):
        build_tilted(Zeta(2), 1.0, eps_trunc=1e-3)
    with pytest.raises(InputError):
        solve_free_energy(Zeta(2), -1.0)


def test_degenerate_law_has_no_bracket():
    # all mass at n = 1: the root sits at F = beta, outside the open interval
    law = Tabulated(np.array([1.0]))
    assert solve_free_energy(law, 0.7) == pytest.approx(0.7)
    with pytest.raises(NoBracket):
        solve_free_energy(Zeta(2), 1e-300)


def test_centering_constant_synthetic():
    assert centering_constant(1.0, 1.0, 0.0, 1.0) == pytest.approx(-math.log(1 - math.exp(-1)), rel=1e-15)
    assert centering_constant(1.0, 1.0, 0.0, 1.0) == pytest.approx(0.45868, abs=1e-5)


def test_gumbel_constant_needs_tail(twopoint_model):
    with pytest.raises(AssumptionNotSatisfied):
        gumbel_constant(twopoint_model)
    with pytest.raises(AssumptionNotSatisfied):
        tilted_tail_asymptotic(twopoint_model, 3)


def test_threshold_synthetic():
    assert threshold(0.0, math.exp(math.e), 1.0, 0.0, 2.0) == pytest.approx(math.e - 2, rel=1e-15)
    with pytest.raises(DomainError):
        threshold(0.0, 2.0, 1.0, 0.0, 2.0)


@given(x=st.floats(-10, 10), d=st.floats(-5, 5))
@settings(max_examples=50)
def test_threshold_linear_in_x(x, d):
    F = 0.66
    a = threshold(x + d, 1e4, F, -0.26, 2.0)
    b = threshold(x, 1e4, F, -0.26, 2.0)
    assert a - b == pytest.approx(d / F, abs=1e-12)


def test_tilted_tail_exact(twopoint_model, zeta2_model):
    assert tilted_tail_exact(twopoint_model, 0) == 1.0
    assert tilted_tail_exact(twopoint_model, 1) == pytest.approx(1 / 3, rel=1e-14)
    assert tilted_tail_exact(twopoint_model, 2) == 0.0
    for k, v in ZETA2_TILTED_TAIL.items():
        assert tilted_tail_exact(zeta2_model, k) == pytest.approx(v, rel=1e-12)


@pytest.mark.parametrize("k", [0, 1, 5, 17, 42, 43, 60])
def test_tilted_tail_telescopes(zeta2_model, k):
    m = zeta2_model
    qk1 = math.exp(m.beta) * float(m.law.pmf_array(k + 1)) * math.exp(-(k + 1) * m.F)
    assert tilted_tail_exact(m, k) - tilted_tail_exact(m, k + 1) == pytest.approx(qk1, abs=1e-14)


def test_tail_asymptotic_synthetic():
    v = tail_asymptotic(1.0, 1.0, 1.0, 0.0, 1.0)
    assert v == pytest.approx(math.exp(-1) / (1 - math.exp(-1)), rel=1e-15)
    assert v == pytest.approx(0.58198, abs=1e-5)
    # doubling F rescales by e^{-kF} and the F-dependent prefactor only
    k, F, D, a, b = 7.0, 0.4, 0.3, 1.7, 0.9
    r = tail_asymptotic(k, 2 * F, D, a, b) / tail_asymptotic(k, F, D, a, b)
    expect = math.exp(-k * F) * math.exp(-F) * (1 - math.exp(-F)) / (1 - math.exp(-2 * F))
    assert r == pytest.approx(expect, rel=1e-14)


def test_tilted_tail_ratio(zeta2_model):
    r = {k: tilted_tail_exact(zeta2_model, k) / tilted_tail_asymptotic(zeta2_model, k) for k in (100, 500)}
    for k in r:
        assert r[k] == pytest.approx(ZETA2_TAIL_RATIO[k], rel=1e-12)
    assert abs(r[500] - 1) < 0.01 < abs(r[100] - 1)
