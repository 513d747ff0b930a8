"""Importance sampling of the cat input and the thermal starts."""

import math

import numpy as np
import pytest
from scipy.special import gammaln

from catmem.model import BRANCHES, CatParams
from catmem.sampling import (SamplerConfig, block_stream, branch_weights,
                             sample_cat, sample_thermal, verify_cat_moments)


def fock_cat_moments(alpha0, cutoff=60):
    """Exact cat moments from the Fock expansion, as an independent oracle."""
    n = np.arange(cutoff + 1)
    log_c = -0.5 * alpha0 ** 2 + n * math.log(alpha0) - 0.5 * gammaln(n + 1)
    c = np.exp(log_c) * (1.0 + (-1.0) ** n)  # even components only, unnormalised
    c /= math.sqrt(np.sum(c * c))
    a_c = np.zeros_like(c)
    a_c[:-1] = np.sqrt(n[1:]) * c[1:]        # a|psi>
    return {
        "a": float(np.dot(c, a_c)),
        "a_sq": float(np.sum(np.sqrt(n[2:] * (n[2:] - 1)) * c[2:] * c[:-2])),
        "adag_a": float(np.dot(a_c, a_c)),
    }


@pytest.mark.parametrize("alpha0", [1.0, 2.0, 3.0])
def test_weighted_moments_match_fock_oracle(alpha0):
    samples = sample_cat(SamplerConfig(cat=CatParams.make(alpha0), n_samples=4,
                                       master_seed=0))
    got = verify_cat_moments(samples)
    want = fock_cat_moments(alpha0)
    assert got["a"] == pytest.approx(want["a"], abs=1e-12)
    assert got["a_sq"].real == pytest.approx(want["a_sq"], rel=1e-12)
    assert got["adag_a"].real == pytest.approx(want["adag_a"], rel=1e-12)
    assert abs(got["a_sq"].imag) < 1e-14 and abs(got["adag_a"].imag) < 1e-14


@pytest.mark.parametrize("alpha0", [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
@pytest.mark.parametrize("n_samples", [4, 4096])
def test_mean_weight_exactly_one(alpha0, n_samples):
    samples = sample_cat(SamplerConfig(cat=CatParams.make(alpha0),
                                       n_samples=n_samples, master_seed=0))
    mean = math.fsum(s.weight for s in samples) / n_samples
    assert mean == 1.0


def test_branch_weights_small_cat_exact_difference():
    w_diag, w_off = branch_weights(CatParams.make(2.0))
    q = math.exp(-8.0)
    assert w_diag == 2.0 / (1.0 + q)
    assert w_off == 2.0 - w_diag                      # exact float difference
    assert w_off == pytest.approx(2.0 * q / (1.0 + q), rel=1e-9)
    assert w_off == pytest.approx(6.707e-4, rel=1e-4)


def test_branch_weights_large_cat_direct_formula():
    # w_diag rounds to 2.0 here, so the difference form would return zero
    w_diag, w_off = branch_weights(CatParams.make(5.0))
    q = math.exp(-50.0)
    assert w_off == 2.0 * q / (1.0 + q)
    assert w_off > 0.0
    assert w_diag + w_off == pytest.approx(2.0, abs=1e-15)


def test_branch_weights_underflow_rejected():
    with pytest.raises(ValueError):
        branch_weights(CatParams.make(20.0))


def test_stratified_layout():
    samples = sample_cat(SamplerConfig(cat=CatParams.make(2.0), n_samples=8,
                                       master_seed=0))
    assert [s.branch for s in samples] == ["++", "++", "--", "--",
                                           "+-", "+-", "-+", "-+"]
    for s in samples:
        sign_ket = 1.0 if s.branch[0] == "+" else -1.0
        sign_bra = 1.0 if s.branch[1] == "+" else -1.0
        assert s.alpha_in == sign_ket * 2.0
        assert s.alpha_in_plus == sign_bra * 2.0


def test_stratified_needs_multiple_of_four():
    with pytest.raises(ValueError):
        SamplerConfig(cat=CatParams.make(2.0), n_samples=6, master_seed=0)
    with pytest.raises(ValueError):
        SamplerConfig(cat=CatParams.make(2.0), n_samples=2, master_seed=0,
                      stratified=False)


def test_unstratified_reproducible():
    cfg = SamplerConfig(cat=CatParams.make(2.0), n_samples=400, master_seed=7,
                        stratified=False)
    first = [s.branch for s in sample_cat(cfg)]
    second = [s.branch for s in sample_cat(cfg)]
    assert first == second
    assert set(first) == set(BRANCHES)


def test_thermal_moments():
    rng = block_stream(3, 0)
    beta = sample_thermal(1.7, 200_000, rng)
    n_est = float(np.mean(np.abs(beta) ** 2))
    assert n_est == pytest.approx(1.7, abs=0.02)
    assert abs(np.mean(beta)) < 0.01
    assert abs(np.mean(beta ** 2)) < 0.02


def test_thermal_zero_occupation_consumes_no_randomness():
    rng = block_stream(5, 1)
    zeros = sample_thermal(0.0, 16, rng)
    assert np.all(zeros == 0.0)
    fresh = block_stream(5, 1)
    assert rng.standard_normal() == fresh.standard_normal()


def test_thermal_validation():
    rng = block_stream(0, 0)
    with pytest.raises(ValueError):
        sample_thermal(-0.1, 4, rng)
    with pytest.raises(ValueError):
        sample_thermal(1.0, -1, rng)


def test_block_streams_keyed_by_seed_and_block():
    a = block_stream(11, 0).standard_normal(4)
    b = block_stream(11, 0).standard_normal(4)
    c = block_stream(11, 1).standard_normal(4)
    d = block_stream(12, 0).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
