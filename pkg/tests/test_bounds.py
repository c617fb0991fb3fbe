import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from scipy.special import ellipkm1

from slabstack.bounds import (
    LAMBDA_BREAK,
    agm,
    conjecture_trend,
    envelopes,
    lambda_bound,
    ratio_and_extrapolate,
    ray_crossing,
    upsilon,
    upsilon_agm,
)
from slabstack.errors import SeriesGapError, SlabDomainError
from slabstack.model import slab_params

GRID = np.linspace(0.0, 1.0, 1002)[1:-1]

# frozen from upsilon_agm; cross-checked against scipy's ellipk below
UPSILON_085 = 0.959788
UPSILON_05 = 0.834627


def upsilon_ellipk(tau1):
    # K(m) with m = 2S/(C+S); 1 - m = (C-S)/(C+S) = e^(-4 theta) avoids cancellation
    p = slab_params(tau1)
    return 2 / math.pi * ellipkm1(math.exp(-4 * p.theta)) / math.sqrt(p.C + p.S)


def lambda_by_minimization(tau1):
    p = slab_params(tau1)

    def ratio(u):
        c = math.exp(u)
        return (c + p.C) / math.sqrt((c + 1) * (2 * p.C**2 + c - 1))

    res = minimize_scalar(ratio, bounds=(0.0, math.log(1e6)), method="bounded",
                          options={"xatol": 1e-12})
    return min(res.fun, ratio(0.0), ratio(math.log(1e6)))


def test_agm():
    assert agm(1.0, 1.0) == 1.0
    # Gauss's constant
    assert 1 / agm(1.0, math.sqrt(2.0)) == pytest.approx(0.8346268416740731, rel=1e-15)


@pytest.mark.parametrize("tau1", [1e-3, 0.05, 0.3, 0.5, 0.85, 0.999])
def test_upsilon_oracles_agree(tau1):
    q = upsilon(tau1)
    assert q == pytest.approx(upsilon_agm(tau1), rel=1e-12)
    assert q == pytest.approx(upsilon_ellipk(tau1), rel=1e-12)


def test_upsilon_examples():
    assert upsilon(1.0) == 1.0
    assert upsilon(0.85) == pytest.approx(UPSILON_085, abs=1e-6)
    assert upsilon(0.5) == pytest.approx(UPSILON_05, abs=1e-6)
    assert upsilon(0.5) < upsilon(0.85) < 1.0


def test_upsilon_rejects_few_nodes():
    with pytest.raises(SlabDomainError):
        upsilon(0.5, quad_nodes=8)


def test_lambda_examples():
    assert lambda_bound(1.0) == 1.0
    assert lambda_bound(0.85) == pytest.approx(1 / 1.15, rel=1e-15)
    assert lambda_bound(LAMBDA_BREAK) == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_lambda_continuity():
    lo = math.sqrt(LAMBDA_BREAK - LAMBDA_BREAK**2 / 4)
    hi = 1 / (2 - LAMBDA_BREAK)
    assert abs(lo - hi) < 1e-12
    below = lambda_bound(np.nextafter(LAMBDA_BREAK, 0))
    assert abs(below - lambda_bound(LAMBDA_BREAK)) < 1e-12


@pytest.mark.parametrize("tau1", [0.01, 0.2, 0.4, LAMBDA_BREAK, 0.6, 0.85, 0.99])
def test_lambda_is_minimum_of_f3_over_f2(tau1):
    assert lambda_bound(tau1) == pytest.approx(lambda_by_minimization(tau1), rel=1e-9)


def test_factor_ordering_on_grid():
    ups = np.array([upsilon(t) for t in GRID])
    lam = np.array([lambda_bound(t) for t in GRID])
    assert np.all(lam > GRID)
    assert np.all(lam <= ups)
    assert np.all(ups < 1.0)


# the gap (1 - tau1)^2 / (2 - tau1) must stay above float resolution
@given(st.floats(1e-6, 1.0 - 1e-6))
def test_lambda_exceeds_tau1(tau1):
    assert lambda_bound(tau1) > tau1


# -- envelopes


def test_envelopes():
    rep = envelopes(0.85, 200)
    log_tau2 = math.log(0.85 / 1.15)
    assert rep.N[0] == 2 and rep.N[-1] == 200
    assert rep.upper_envelope_log[0] == rep.lower_envelope_log[0] == pytest.approx(log_tau2)
    assert np.all(rep.upper_envelope_log >= rep.lower_envelope_log)
    assert np.all(rep.lower_envelope_log >= rep.bk_lower_log)
    assert rep.lower_envelope_log[-1] > rep.bk_lower_log[-1]
    assert rep.ray_value[1] == pytest.approx(0.85 / (0.85 + 3 * 0.15))
    with pytest.raises(SlabDomainError):
        envelopes(0.85, 1)


def test_ray_crossing():
    n = ray_crossing(0.85)
    ups = upsilon(0.85)
    tau2 = 0.85 / 1.15

    def gap(k):
        return 0.85 / (0.85 + k * 0.15) - tau2 * ups ** (k - 2)

    assert n is not None and gap(n) > 0
    assert all(gap(k) <= 0 for k in range(2, n))
    assert ray_crossing(1.0) is None


# -- ratio series and extrapolation


def test_pure_exponential():
    g, tau2 = 0.93, 0.6
    series = {n: math.log(tau2) + (n - 2) * math.log(g) for n in range(3, 40)}
    r, A, B = ratio_and_extrapolate(tau2, series)
    for n in r:
        assert r[n] == pytest.approx(g, rel=1e-14)
    for n in A:
        assert A[n] == pytest.approx(g, rel=1e-12)
        assert B[n] == pytest.approx(0.0, abs=1e-10)


def test_recovers_a_minus_b_over_n():
    tau2 = 0.7
    series = {n: math.log(tau2) + (n - 2) * math.log(0.9 - 0.5 / n) for n in range(3, 60)}
    r, A, B = ratio_and_extrapolate(tau2, series)
    assert set(A) == set(range(4, 60))
    for n in A:
        assert A[n] == pytest.approx(0.9, rel=1e-11)
        assert B[n] == pytest.approx(0.5, rel=1e-9)


def test_series_validation():
    with pytest.raises(SeriesGapError):
        ratio_and_extrapolate(0.5, {3: -1.0, 5: -2.0})
    with pytest.raises(SeriesGapError):
        ratio_and_extrapolate(0.5, {})
    with pytest.raises(SlabDomainError):
        ratio_and_extrapolate(0.5, {2: -1.0, 3: -2.0})


def test_conjecture_trend_report():
    A = {n: 0.9 - 1 / n for n in range(40, 80)}
    rep = conjecture_trend(0.9, A, N_from=50)
    assert rep["N_from"] == 50 and rep["N_to"] == 79
    assert rep["monotone_non_increasing"] and rep["A_below_upsilon"]
    assert rep["gap_last"] < rep["gap_first"]
