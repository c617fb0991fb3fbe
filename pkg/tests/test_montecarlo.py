import math

import numpy as np
import pytest

import slabstack.montecarlo as mcmod
from helpers import mc
from slabstack.errors import MatrixCheckError, SlabDomainError
from slabstack.model import exact_statistics, slab_params
from slabstack.montecarlo import RngSpec, chunk_generator, draw_phases, run_mc, sample_realization


def test_rng_spec_validation():
    RngSpec(2**64 - 1, 2**64 - 1)
    for bad in (-1, 2**64, 1.5):
        with pytest.raises(SlabDomainError):
            RngSpec(bad)


def test_streams_are_reproducible_and_distinct():
    a = draw_phases(chunk_generator(RngSpec(7), 5, 0), 5, 10)
    b = draw_phases(chunk_generator(RngSpec(7), 5, 0), 5, 10)
    np.testing.assert_array_equal(a, b)
    for other in (RngSpec(8), RngSpec(7, 1)):
        assert not np.array_equal(a, draw_phases(chunk_generator(other, 5, 0), 5, 10))
    assert not np.array_equal(a, draw_phases(chunk_generator(RngSpec(7), 5, 1), 5, 10))
    assert a.min() >= 0.0 and a.max() < 2 * math.pi


def test_single_slab_realization():
    p = slab_params(0.85)
    gen = np.random.default_rng(0)
    assert sample_realization(p, 1, gen) == p.two_theta
    with pytest.raises(SlabDomainError):
        sample_realization(p, 0, gen)


def test_two_slab_realization():
    p = slab_params(0.85)
    psi = draw_phases(chunk_generator(RngSpec(3), 2, 0), 2)
    eta = sample_realization(p, 2, chunk_generator(RngSpec(3), 2, 0))
    assert eta == pytest.approx(math.acosh(p.C**2 + p.S**2 * math.cos(psi[0])), rel=1e-12)


def test_transparent_stack():
    res = run_mc(1.0, [1, 7, 40], 1000, RngSpec(0))
    for s in res.values():
        assert s.tau_mean == 1.0 and s.log_tau_mean == 0.0


def test_one_trial_one_slab():
    s = run_mc(0.85, [1], 1, RngSpec(1))[1]
    assert s.count == 1 and s.tau_mean == 0.85


def test_argument_validation():
    for kw in (dict(N_values=[]), dict(N_values=[0]), dict(trials=0), dict(workers=0)):
        args = dict(tau1=0.85, N_values=[2], trials=10, rng=RngSpec(1))
        args.update(kw)
        with pytest.raises(SlabDomainError):
            run_mc(**args)
    with pytest.raises(SlabDomainError):
        run_mc(0.0, [2], 10, RngSpec(1))


def fields(s):
    return (s.count, s.tau_mean, s.tau_m2, s.log_tau_mean, s.log_tau_m2,
            s.block_count.tolist(), s.block_lse.tolist())


def test_worker_count_does_not_change_results():
    ref = run_mc(0.7, [3, 20], 5000, RngSpec(11), chunk_size=512)
    for w in (2, 4, 16):
        got = run_mc(0.7, [3, 20], 5000, RngSpec(11), workers=w, chunk_size=512)
        for N in ref:
            assert fields(got[N]) == fields(ref[N])


def test_inv_tau_error_matches_exact_variance():
    # 1/tau = (C' + 1)/2, so Var(1/tau) = (<C'^2> - <C'>^2)/4 from the exact moments
    res = mc(0.85, (2, 3, 10), 200_000)
    for N in (2, 3):
        ex = exact_statistics(0.85, N)
        var = (ex.mean_cosh_sq - ex.mean_cosh**2) / 4
        predicted = math.sqrt(var / res[N].count) / ex.mean_inv_tau
        assert res[N].rel_se("inv_tau") == pytest.approx(predicted, rel=0.3)


def test_matrix_check_passes():
    res = run_mc(0.3, [2, 17, 50, 51], 5000, RngSpec(4), matrix_check=True)
    assert set(res) == {2, 17, 50, 51}


def test_matrix_check_reports_seed_and_phases(monkeypatch):
    monkeypatch.setattr(mcmod, "MATRIX_CHECK_RTOL", -1.0)
    with pytest.raises(MatrixCheckError, match=r"seed=9 .*trial=0 .*phases=\["):
        run_mc(0.5, [5], 100, RngSpec(9), matrix_check=True)


def test_exact_moments_small_n():
    # N = 2 and 3 have light tails, so 200k trials pin the means down well
    res = mc(0.85, (2, 3, 10), 200_000)
    for N, s in res.items():
        ex = exact_statistics(0.85, N)
        assert abs(s.log_tau_mean - ex.mean_log_tau) < 4 * s.se_log_tau
        assert s.jensen_ok
    s2 = res[2]
    inv_tau = math.exp(s2.log_mean("inv_tau"))
    assert abs(inv_tau - 1.415225) < 4 * s2.rel_se("inv_tau") * inv_tau
    assert abs(s2.tau_mean - 0.85 / 1.15) < 4 * s2.se_tau
    assert abs(res[3].tau_mean - exact_statistics(0.85, 3).mean_tau3) < 4 * res[3].se_tau


def test_inv_tau_error_grows_with_n():
    res = mc(0.85, (2, 3, 10), 200_000)
    rel = [res[N].rel_se("inv_tau") for N in (2, 3, 10)]
    assert rel[0] < rel[1] < rel[2]
