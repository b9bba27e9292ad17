"""
Tests for the two-way clustered simulation design
"""
import numpy as np
import pytest

from mwdml.config.schema import DGPParams
from mwdml.models.elastic_net import predict
from mwdml.simulation.dgp import (
    assemble,
    draw_components,
    generate_dgp,
    oracle_nuisance,
    toeplitz_factor,
    true_coefficients,
)
from mwdml.utils.seeding import child_rng

NO_CLUSTERING = {"x": (0.0, 0.0), "eps": (0.0, 0.0), "ups": (0.0, 0.0), "v": (0.0, 0.0)}


def test_shape_and_labels():
    dataset = generate_dgp(DGPParams(N=4, M=3, dim_x=5, seed=1))

    assert dataset.n_obs == 12
    assert dataset.cluster_counts == (4, 3)
    assert dataset.n_covariates == 5
    assert dataset.max_occupancy == 1
    assert tuple(dataset.cluster_index[4]) == (2, 2)


def test_seed_determines_the_draw():
    a = generate_dgp(DGPParams(N=5, M=5, dim_x=3, seed=7))
    b = generate_dgp(DGPParams(N=5, M=5, dim_x=3, seed=7))
    c = generate_dgp(DGPParams(N=5, M=5, dim_x=3, seed=8))
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)


def test_true_coefficients():
    np.testing.assert_allclose(true_coefficients(3), [0.5, 0.25, 0.125])


def test_unclustered_errors_have_unit_variance():
    params = DGPParams(N=317, M=317, dim_x=2, s_x=0.0, s_eps_ups=0.0, weights=NO_CLUSTERING)
    eps = draw_components(params, child_rng(0)).eps_ups.combine((0.0, 0.0))[..., 0]
    assert eps.var() == pytest.approx(1.0, abs=0.015)


def test_clustered_error_variance():
    params = DGPParams(N=200, M=200, dim_x=2)
    eps = draw_components(params, child_rng(1)).eps_ups.combine((0.25, 0.25))[..., 0]
    # (1 - w1 - w2)^2 + w1^2 + w2^2
    assert eps.var() == pytest.approx(0.375, abs=0.03)


def test_toeplitz_correlation():
    params = DGPParams(N=317, M=317, dim_x=3, s_x=0.25, weights=NO_CLUSTERING)
    X = draw_components(params, child_rng(2)).x.combine((0.0, 0.0)).reshape(-1, 3)
    assert np.corrcoef(X[:, 0], X[:, 1])[0, 1] == pytest.approx(0.25, abs=0.01)
    assert np.corrcoef(X[:, 0], X[:, 2])[0, 1] == pytest.approx(0.0625, abs=0.01)


def test_toeplitz_factor_reproduces_covariance():
    factor = toeplitz_factor(4, 0.5)
    expected = 0.5 ** np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
    np.testing.assert_allclose(factor @ factor.T, expected)


def test_permuting_row_components_permutes_rows():
    params = DGPParams(N=5, M=4, dim_x=3, seed=3)
    components = draw_components(params, child_rng(3))
    perm = np.array([2, 0, 4, 1, 3])

    base = assemble(params, components)
    moved = assemble(params, components.permute(rows=perm))
    order = (perm[:, None] * 4 + np.arange(4)[None, :]).reshape(-1)
    np.testing.assert_allclose(moved.y, base.y[order], rtol=0, atol=1e-12)
    np.testing.assert_allclose(moved.X, base.X[order], rtol=0, atol=1e-12)


def test_permuting_column_components_permutes_columns():
    params = DGPParams(N=3, M=4, dim_x=2, seed=4)
    components = draw_components(params, child_rng(4))
    perm = np.array([3, 1, 0, 2])

    base = assemble(params, components)
    moved = assemble(params, components.permute(cols=perm))
    order = (np.arange(3)[:, None] * 4 + perm[None, :]).reshape(-1)
    np.testing.assert_allclose(moved.z, base.z[order], rtol=0, atol=1e-12)


def test_oracle_nuisance_recovers_the_structural_errors():
    params = DGPParams(N=6, M=6, dim_x=4, seed=5)
    components = draw_components(params, child_rng(params.seed))
    dataset = assemble(params, components)
    nuisance = oracle_nuisance(params)

    V = components.v.combine(params.weights.v)[..., 0].reshape(-1)
    ups = components.eps_ups.combine(params.weights.ups)[..., 1].reshape(-1)
    eps = components.eps_ups.combine(params.weights.eps)[..., 0].reshape(-1)
    np.testing.assert_allclose(dataset.z - predict(nuisance.m_fit, dataset.X), V, atol=1e-12)
    np.testing.assert_allclose(dataset.d - predict(nuisance.g2_fit, dataset.X), V + ups, atol=1e-12)
    np.testing.assert_allclose(
        dataset.y - predict(nuisance.g1_fit, dataset.X), V + ups + eps, atol=1e-12
    )


def test_generate_matches_components_draw():
    params = DGPParams(N=3, M=3, dim_x=2, seed=9)
    direct = generate_dgp(params)
    manual = assemble(params, draw_components(params, child_rng(9)))
    np.testing.assert_array_equal(direct.y, manual.y)
