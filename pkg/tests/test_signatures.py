"""Estimator checks against closed-form quantum signatures of the cat."""

import math

import numpy as np
import pytest

from catmem.engine import EnsembleResult
from catmem.model import CatParams, GridAxis
from catmem.oracle import (cat_variance, evolved_wigner_field, ideal_P_p,
                           ideal_P_x)
from catmem.sampling import SamplerConfig, sample_cat
from catmem.signatures import (QuadratureGrid, WignerGrid,
                               default_density_axis, default_quadrature_grid,
                               default_wigner_grid, field_norm,
                               fringe_visibility, is_mixture_falsified,
                               negativity_with_error, p_distribution,
                               p_variance, quadrature_moments,
                               reconstruct_density, wigner_estimate,
                               wigner_negativity)

# negative volume of the alpha0 = 2 cat on an h = 0.01, +-8 grid; the
# default h = 0.05 grid undershoots this by about 1.1e-3
FINE_NEGATIVITY = 0.2937501161


def input_ensemble(alpha0, n=4, seed=11):
    """Cat sampler output repackaged as a zero-evolution ensemble."""
    cfg = SamplerConfig(cat=CatParams.make(alpha0=alpha0), n_samples=n,
                        master_seed=seed)
    samples = sample_cat(cfg)
    return EnsembleResult(
        alpha_out=np.array([s.alpha_in for s in samples]),
        alpha_out_plus=np.array([s.alpha_in_plus for s in samples]),
        weight=np.array([s.weight for s in samples]),
        branch=np.array([s.branch for s in samples]))


def test_quadrature_grid_rejects_nonuniform():
    with pytest.raises(ValueError):
        QuadratureGrid(theta=0.0, points=np.array([0.0, 0.1, 0.3]))
    grid = QuadratureGrid(theta=0.0, points=np.linspace(-1.0, 1.0, 21))
    assert grid.step == pytest.approx(0.1)


def test_wigner_grid_spacing_cap():
    axis = np.arange(-10, 11) * 0.06
    with pytest.raises(ValueError):
        WignerGrid(x=axis, y=axis, h=0.06)


def test_default_grid_extents():
    quad = default_quadrature_grid(6.0, theta=0.0)
    assert quad.points[-1] >= math.sqrt(2.0) * 6.0 + 5.0
    assert default_quadrature_grid(1.0, theta=0.0).points[-1] >= 12.0
    wig = default_wigner_grid(2.0)
    assert wig.x[-1] >= 6.0 and wig.h == 0.05
    dens = default_density_axis(3.0)
    assert dens[-1] >= 5.0


@pytest.mark.parametrize("alpha0", [1.0, 2.0, 3.0])
def test_p_distribution_matches_ideal(alpha0):
    # four stratified samples carry the exact cat, so the estimator must
    # reproduce the closed-form fringe pattern pointwise
    grid = default_quadrature_grid(alpha0, theta=math.pi / 2)
    field = p_distribution(input_ensemble(alpha0), grid)
    assert field.axes[0].tag == "x_theta_quadrature"
    ideal = ideal_P_p(grid.points, alpha0)
    assert np.max(np.abs(field.values - ideal)) < 1e-8
    assert field.meta["norm"] == pytest.approx(1.0, abs=1e-6)
    assert field.meta["max_imag_residual"] < 1e-8


def test_x_distribution_matches_ideal():
    grid = default_quadrature_grid(2.0, theta=0.0)
    field = p_distribution(input_ensemble(2.0), grid)
    assert np.max(np.abs(field.values - ideal_P_x(grid.points, 2.0))) < 1e-10


def test_wigner_matches_ideal():
    grid = default_wigner_grid(2.0)
    field = wigner_estimate(input_ensemble(2.0), grid)
    assert [ax.tag for ax in field.axes] == ["re_alpha", "im_alpha"]
    oracle = evolved_wigner_field(grid.x, grid.y, 0.0, 2.0, 0.0, 1.0)
    assert np.max(np.abs(field.values - oracle.values)) < 1e-10
    assert field.meta["norm"] == pytest.approx(1.0, abs=1e-6)


def test_negativity_baselines():
    ens = input_ensemble(2.0)
    default = wigner_negativity(wigner_estimate(ens, default_wigner_grid(2.0)))
    assert default == pytest.approx(0.2926461056, abs=1e-8)
    fine_axis = np.arange(-800, 801) * 0.01
    fine = wigner_negativity(
        wigner_estimate(ens, WignerGrid(x=fine_axis, y=fine_axis, h=0.01)))
    assert fine == pytest.approx(FINE_NEGATIVITY, abs=1e-8)
    assert abs(default - fine) < 2e-3


def test_negativity_matches_oracle_field_on_same_grid():
    grid = default_wigner_grid(2.0)
    sim = wigner_negativity(wigner_estimate(input_ensemble(2.0), grid))
    ora = wigner_negativity(evolved_wigner_field(grid.x, grid.y, 0.0, 2.0, 0.0, 1.0))
    assert sim == pytest.approx(ora, abs=1e-10)


def test_jackknife_zero_for_atomic_ensemble():
    # stratified cat samples are four repeated atoms; every delete-block
    # estimate coincides, so the jackknife error must vanish
    ens = input_ensemble(2.0, n=64)
    out = negativity_with_error(ens, default_wigner_grid(2.0), n_blocks=8)
    assert out["n_blocks"] == 8
    assert out["jackknife_se"] == pytest.approx(0.0, abs=1e-12)
    assert out["negativity"] == pytest.approx(0.2926461056, abs=1e-8)


def test_jackknife_positive_for_noisy_weights():
    rng = np.random.default_rng(5)
    ens = input_ensemble(2.0, n=4096)
    noisy = EnsembleResult(alpha_out=ens.alpha_out,
                           alpha_out_plus=ens.alpha_out_plus,
                           weight=ens.weight * (1.0 + 0.1 * rng.standard_normal(4096)),
                           branch=ens.branch)
    out = negativity_with_error(noisy, default_wigner_grid(2.0), n_blocks=16)
    assert out["jackknife_se"] > 0.0
    assert abs(out["negativity"] - 0.2926461056) < 6.0 * out["jackknife_se"] + 0.01
    assert out["field"].values.shape == (241, 241)


def test_negativity_invariant_under_permutation():
    ens = input_ensemble(2.0, n=64)
    order = np.random.default_rng(3).permutation(64)
    mixed = EnsembleResult(alpha_out=ens.alpha_out[order],
                           alpha_out_plus=ens.alpha_out_plus[order],
                           weight=ens.weight[order],
                           branch=ens.branch[order])
    grid = default_wigner_grid(2.0)
    a = negativity_with_error(ens, grid, n_blocks=8)
    b = negativity_with_error(mixed, grid, n_blocks=8)
    assert b["negativity"] == pytest.approx(a["negativity"], abs=1e-12)


@pytest.mark.parametrize("alpha0,tol", [(1.0, 1e-12), (2.0, 1e-10), (3.0, 1e-8)])
def test_density_matches_closed_form(alpha0, tol):
    axis = default_density_axis(alpha0)
    field = reconstruct_density(input_ensemble(alpha0), axis, axis)
    assert [ax.tag for ax in field.axes] == ["coherent_a", "coherent_b"]
    q = math.exp(-2.0 * alpha0 ** 2)
    aa, bb = np.meshgrid(axis, axis, indexing="ij")
    closed = (4.0 * np.cosh(aa * alpha0) * np.cosh(bb * alpha0)
              * np.exp(-0.5 * (aa ** 2 + bb ** 2) - alpha0 ** 2)
              / (2.0 * (1.0 + q)))
    assert np.max(np.abs(field.values - closed)) < tol


@pytest.mark.parametrize("alpha0", [1.0, 2.0])
def test_moments_match_fock_values(alpha0):
    m = quadrature_moments(input_ensemble(alpha0))
    q = math.exp(-2.0 * alpha0 ** 2)
    assert m["mean_weight"] == 1.0
    assert abs(m["a"]) < 1e-12
    assert abs(m["a_plus"]) < 1e-12
    assert m["a_sq"] == pytest.approx(alpha0 ** 2, rel=1e-12)
    assert m["a_plus_sq"] == pytest.approx(alpha0 ** 2, rel=1e-12)
    assert m["adag_a"] == pytest.approx(alpha0 ** 2 * (1 - q) / (1 + q), rel=1e-12)
    assert abs(m["p_mean"]) < 1e-12
    assert m["p_sq"] == pytest.approx(cat_variance(alpha0), rel=1e-12)


def test_p_variance_beats_mixture_floor():
    var = p_variance(input_ensemble(1.0))
    assert var == pytest.approx(cat_variance(1.0), rel=1e-12)
    assert is_mixture_falsified(var)
    assert not is_mixture_falsified(0.5)
    with pytest.raises(ValueError):
        is_mixture_falsified(-0.1)


def test_fringe_visibility_full_for_ideal_cat():
    # trough snaps to the nearest grid point, so full contrast is only
    # approached; picking alpha0 with the trough exactly on the grid
    # recovers machine-precision unity
    grid = default_quadrature_grid(5.0, theta=math.pi / 2)
    field = p_distribution(input_ensemble(5.0), grid)
    assert fringe_visibility(field, alpha_bar=5.0) == pytest.approx(1.0, abs=1e-3)
    a_snap = math.pi / (2.0 * math.sqrt(2.0) * 0.25)
    grid = default_quadrature_grid(a_snap, theta=math.pi / 2)
    field = p_distribution(input_ensemble(a_snap), grid)
    assert fringe_visibility(field, alpha_bar=a_snap) == pytest.approx(1.0, abs=1e-12)


def test_fringe_visibility_reads_off_coherence():
    # envelope times (1 + c cos) has contrast exactly c once the envelope
    # is divided out
    axis = GridAxis(start=-12.0, stop=12.0, step=0.01, tag="x_theta_quadrature")
    p = axis.points()
    c = 0.37
    values = np.exp(-p ** 2) * (1.0 + c * np.cos(2.0 * math.sqrt(2.0) * 2.0 * p))
    from catmem.model import GridField
    field = GridField(axes=(axis,), values=values, meta={})
    assert fringe_visibility(field, alpha_bar=2.0) == pytest.approx(c, abs=1e-3)


def test_chunked_sums_match_small_ensemble():
    base = input_ensemble(2.0)
    reps = 6000  # pushes the ensemble well past one processing chunk
    big = EnsembleResult(alpha_out=np.tile(base.alpha_out, reps),
                         alpha_out_plus=np.tile(base.alpha_out_plus, reps),
                         weight=np.tile(base.weight, reps),
                         branch=np.tile(base.branch, reps))
    grid = default_quadrature_grid(2.0, theta=math.pi / 2)
    small_f = p_distribution(base, grid)
    big_f = p_distribution(big, grid)
    assert np.max(np.abs(small_f.values - big_f.values)) < 1e-12
    wgrid = default_wigner_grid(2.0)
    assert np.max(np.abs(wigner_estimate(base, wgrid).values
                         - wigner_estimate(big, wgrid).values)) < 1e-12


def test_field_norm_and_validation():
    grid = default_quadrature_grid(2.0, theta=math.pi / 2)
    field = p_distribution(input_ensemble(2.0), grid)
    assert field_norm(field) == pytest.approx(field.meta["norm"])
    with pytest.raises(ValueError):
        p_distribution([], grid)
    with pytest.raises(ValueError):
        wigner_negativity(field)
