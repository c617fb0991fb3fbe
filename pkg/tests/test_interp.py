import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slabstack.interp import interpolate, locate, pchip_slopes


def test_reproduces_nodes():
    y = np.cos(np.arange(20) * 0.1)
    np.testing.assert_allclose(interpolate(y, 0.1, np.arange(20) * 0.1), y, rtol=0, atol=1e-15)


def test_exact_on_linear_data_away_from_ends():
    x = np.arange(30) * 0.25
    y = 2.0 - 0.5 * x
    q = np.linspace(0.5, 6.5, 101)
    np.testing.assert_allclose(interpolate(y, 0.25, q, even=False), 2.0 - 0.5 * q, atol=1e-14)


def test_even_reflection_gives_flat_start():
    y = np.cosh(np.arange(10) * 0.1)
    assert pchip_slopes(y, 0.1)[0] == 0.0


def test_fourth_order_on_smooth_data():
    errs = []
    for h in (0.02, 0.01):
        x = np.arange(int(3.0 / h) + 1) * h
        q = np.linspace(0.3, 2.7, 997)
        errs.append(np.max(np.abs(interpolate(np.exp(-x), h, q) - np.exp(-q))))
    # harmonic-mean slopes are second-order, so the error falls at least 4x
    assert errs[1] < errs[0] / 3.5
    assert errs[1] < 1e-6


@given(arrays(float, st.integers(3, 30), elements=st.floats(-5, 5)).map(np.sort))
def test_monotone_data_gives_monotone_interpolant(y):
    y = y[::-1]
    q = np.linspace(0.0, (y.size - 1) * 0.1, 400)
    v = interpolate(y, 0.1, q)
    assert np.all(np.diff(v) <= 1e-12)
    assert v.min() >= y.min() - 1e-12 and v.max() <= y.max() + 1e-12


def test_locate_clamps_roundoff_and_rejects_outside():
    idx, t = locate(np.array([4.0 + 1e-12]), 0.5, 9)
    assert idx[0] == 7 and t[0] == 1.0
    with pytest.raises(ValueError):
        locate(np.array([4.1]), 0.5, 9)
    with pytest.raises(ValueError):
        locate(np.array([-0.01]), 0.5, 9)
