"""
Tests for monomial lifting, moments and parity blocks.
"""

import numpy as np
import pytest
from pytest import approx

from errors_support import ModelFormatError, ValidationError
from netmodel_support import FirMatrix
from poly_lift_support import (
    POLY_PRESETS, PolyCorrelationSpec, basis_size, cluster_correlation_graph, enumerate_monomials,
    gaussian_moment, lift_series, lifted_covariance_matrix, lifted_moment_matrix, monomial_mean,
    parity_class, parity_permutation, symmetric_moment,
)


def _spec(columns, children=(0, 1), n=4):
    coefficients = np.zeros((n, basis_size(2, 3), 2))
    for column in columns:
        for child in children:
            coefficients[child, column, 1] = 0.5
    return PolyCorrelationSpec(m=2, p=3, sigma=1.0, gains=FirMatrix(coefficients))


class TestBasis:
    @pytest.mark.parametrize("m,p,size", [(1, 2, 3), (2, 3, 10), (3, 2, 10), (4, 4, 70)])
    def test_basis_size(self, m, p, size):
        assert basis_size(m, p) == size
        assert enumerate_monomials(m, p).size == size

    def test_degree_major_ordering(self):
        basis = enumerate_monomials(2, 3)
        assert basis.entries == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
                                 (3, 0), (2, 1), (1, 2), (0, 3))
        assert basis.index((1, 1)) == 4
        assert basis.describe(7) == 'v1^2 v2'
        assert basis.describe(0) == '1'

    def test_invalid_basis(self):
        with pytest.raises(ValidationError):
            enumerate_monomials(0, 2)


class TestMoments:
    def test_gaussian_moments(self):
        assert gaussian_moment(0, 2.0) == 1.0
        assert gaussian_moment(3, 2.0) == 0.0
        assert gaussian_moment(2, 2.0) == approx(4.0)
        assert gaussian_moment(4, 1.0) == approx(3.0)
        assert gaussian_moment(6, 1.0) == approx(15.0)

    def test_uniform_moments_match_variance(self):
        assert symmetric_moment(2, 1.5, 'uniform') == approx(2.25)
        assert symmetric_moment(5, 1.5, 'uniform') == 0.0

    def test_unknown_driver(self):
        with pytest.raises(ValidationError):
            symmetric_moment(2, 1.0, 'cauchy')

    def test_monomial_mean(self):
        assert monomial_mean((2, 0), 1.0) == approx(1.0)
        assert monomial_mean((1, 2), 1.0) == 0.0

    def test_lifted_covariance_of_squares(self):
        covariance = lifted_covariance_matrix(2, 3, 1.0)
        # Var(v1^2) = E v^4 - (E v^2)^2
        assert covariance[3, 3] == approx(2.0)
        assert covariance[1, 1] == approx(1.0)
        assert covariance[0, 0] == approx(0.0)


class TestParityBlocks:
    def test_parity_class(self):
        assert parity_class((2, 1)) == (1, 0)

    def test_ordering_for_two_drivers_cubic(self):
        permutation = parity_permutation(enumerate_monomials(2, 3))
        assert permutation.order == (0, 3, 5, 1, 6, 8, 2, 7, 9, 4)
        assert (1, 6, 8) in permutation.clusters
        assert permutation.block_sizes == [3, 3, 3, 1]

    @pytest.mark.parametrize("m,p", [(1, 2), (2, 3), (3, 2)])
    def test_off_block_moments_are_exactly_zero(self, m, p):
        basis = enumerate_monomials(m, p)
        permutation = parity_permutation(basis)
        moments = lifted_moment_matrix(m, p, 1.3)
        labels = np.asarray(permutation.labels)
        assert np.all(moments[labels[:, None] != labels[None, :]] == 0.0)
        assert len(permutation.clusters) <= 2 ** m
        reordered = moments[np.ix_(permutation.order, permutation.order)]
        assert np.allclose(reordered, reordered.T)

    def test_within_block_moments_can_be_nonzero(self):
        moments = lifted_moment_matrix(2, 3, 1.0)
        # v1 and v1^3 share a parity class
        assert moments[1, 6] == approx(3.0)


class TestLiftSeries:
    def test_lift_single_sample(self):
        lifted = lift_series(np.array([[2.0], [3.0]]), enumerate_monomials(2, 3))
        assert lifted[:, 0] == approx([1, 2, 3, 4, 6, 9, 8, 12, 18, 27])

    def test_lift_selected_columns(self):
        lifted = lift_series(np.array([[2.0, 1.0], [3.0, -1.0]]), enumerate_monomials(2, 3), columns=[1, 6, 8])
        assert lifted.shape == (3, 2)
        assert lifted[:, 1] == approx([1.0, 1.0, 1.0])

    def test_wrong_driver_count(self):
        with pytest.raises(ValidationError):
            lift_series(np.ones((3, 4)), enumerate_monomials(2, 3))


class TestPolySpec:
    def test_parity_preset_forms_one_cluster(self):
        spec = _spec(POLY_PRESETS['parity'], children=(0, 1, 2))
        assert spec.active == (1, 6, 8)
        assert spec.latent_gains().shape == (4, 3)
        gc = cluster_correlation_graph(spec)
        assert gc.edges == frozenset({(0, 1), (0, 2), (1, 2)})

    def test_latent_covariance_is_block_of_lifted_covariance(self):
        spec = _spec(POLY_PRESETS['parity'])
        full = lifted_covariance_matrix(2, 3, 1.0)
        assert np.allclose(spec.latent_covariance(), full[np.ix_([1, 6, 8], [1, 6, 8])])

    def test_listed_preset_spans_two_clusters(self):
        spec = _spec(POLY_PRESETS['listed'])
        labels = parity_permutation(spec.basis).labels
        assert len({labels[k] for k in spec.active}) == 2

    def test_constant_monomial_gain_rejected(self):
        with pytest.raises(ModelFormatError):
            _spec([0])

    def test_wrong_column_count_rejected(self):
        with pytest.raises(ModelFormatError):
            PolyCorrelationSpec(m=2, p=3, sigma=1.0, gains=FirMatrix(np.zeros((3, 4, 2))))
