"""
Tests for seeded benchmark generation.
"""

from dataclasses import replace

import numpy as np
import pytest
from pytest import approx

from config_support import RunConfig
from decomp_support import deg_max, incoherence
from errors_support import GenerationError, ValidationError
from generator_support import (
    BENCHMARK_CHILDREN, RECOVERY_TOL, ROW_GAIN_CAP, closed_neighbourhoods_disjoint, default_edge_count,
    generate_model, planted_split, random_transfer_matrix, recovery_check,
)
from latent_support import latents_far_apart, maximal_cliques
from netmodel_support import Topology, check_well_posed


class TestRandomTransferMatrix:
    def test_structure(self):
        rng = np.random.default_rng(0)
        h = random_transfer_matrix(10, 12, rng)
        support = h.support()
        assert support.sum() == 12
        assert not np.any(support & support.T)
        assert h.strictly_causal
        assert h.max_delay == 1
        assert np.all(h.coefficients[:, :, 1].sum(axis=1) <= ROW_GAIN_CAP + 1e-12)
        assert check_well_posed(h, grid_size=64).well_posed

    def test_required_edges_are_present(self):
        rng = np.random.default_rng(1)
        h = random_transfer_matrix(6, 4, rng, required=[(0, 5), (2, 3)])
        assert h.support()[5, 0] and h.support()[3, 2]

    def test_too_many_edges(self):
        with pytest.raises(ValidationError):
            random_transfer_matrix(4, 7, np.random.default_rng(0))

    def test_default_edge_count(self):
        assert default_edge_count(29) == 16


class TestPlantedSplit:
    def test_planted_structure(self):
        s, l = planted_split(30, 2)
        assert np.allclose(s, -s.T) and np.allclose(l, -l.T)
        assert deg_max(s) == 1
        assert incoherence(l) == approx(np.sqrt(2 / 30))

    def test_odd_size_rejected(self):
        with pytest.raises(ValidationError):
            planted_split(31, 0)

    def test_seeded(self):
        a = planted_split(20, 9)
        b = planted_split(20, 9)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestGenerateModel:
    def test_small_affine_model(self):
        model = generate_model(RunConfig(n=12, q=1, seed=3))
        assert model.n == 12
        assert maximal_cliques(model.correlation_graph).q == 1
        assert model.expansion.latent_count == 1
        assert model.attempts >= 1
        assert model.diagnostics['attempts'] == model.attempts
        assert check_well_posed(model.ldim, 64).well_posed

    def test_same_seed_same_model(self):
        a = generate_model(RunConfig(n=12, q=1, seed=4))
        b = generate_model(RunConfig(n=12, q=1, seed=4))
        assert a.ldim.h == b.ldim.h
        assert np.array_equal(a.expansion.f.coefficients, b.expansion.f.coefficients)
        assert a.ldim.noise.base == b.ldim.noise.base

    def test_truth_support_is_the_topology(self):
        config = RunConfig(n=12, q=1, seed=5)
        model = generate_model(config)
        truth = model.ground_truth(config.omega_value)
        support = np.abs(truth.s_im) > 1e-6 * np.abs(truth.s_im).max()
        edges = {(i, j) for i, j in zip(*np.nonzero(np.triu(support, 1)))}
        assert edges == set(model.topology.edges)

    def test_separated_benchmark(self):
        model = generate_model(RunConfig(separated_latents=True))
        assert model.n == 29
        assert model.expansion.latent_count == 3
        assert model.diagnostics['separated_latents']
        assert closed_neighbourhoods_disjoint(model.expansion)
        assert latents_far_apart(model.expansion)

    def test_poly_model_has_one_cluster(self):
        model = generate_model(RunConfig(n=12, poly='parity', seed=2))
        assert model.poly is not None
        assert model.poly.active == (1, 6, 8)
        assert model.diagnostics['q'] == 1
        assert maximal_cliques(model.correlation_graph).q == 1

    def test_poly_presets_need_two_drivers_cubic(self):
        with pytest.raises(ValidationError):
            generate_model(RunConfig(n=12, poly='parity', m=1))

    def test_infeasible_constraints(self):
        with pytest.raises(GenerationError):
            generate_model(RunConfig(n=4, q=3, max_retries=3))


class TestBenchmarkShape:
    def test_groups_have_children_and_external_parents(self):
        model = generate_model(RunConfig(separated_latents=True))
        gains = model.expansion.f.coefficients[:, :, 1]
        base = np.asarray(model.expansion.base)
        for col, children in enumerate(model.expansion.children):
            assert len(children) == BENCHMARK_CHILDREN
            parents = set()
            for child in children:
                assert not model.directed.parents(child) & children
                assert len(model.directed.parents(child)) <= 1
                parents |= model.directed.parents(child)
            assert len(parents) == BENCHMARK_CHILDREN - 1
            ratios = gains[sorted(children), col] / base[sorted(children)]
            assert np.allclose(ratios, ratios[0])

    def test_benchmark_passes_the_recovery_filter(self):
        model = generate_model(RunConfig(separated_latents=True))
        assert model.diagnostics['recovery_checked']
        assert model.diagnostics['recovery_min_tol'] < RECOVERY_TOL
        assert model.diagnostics['recovery_t0'] is not None

    def test_recovery_check_on_a_generated_model(self):
        config = RunConfig(separated_latents=True, seed=11)
        model = generate_model(config)
        result = recovery_check(model, config)
        assert result.recovered, result.reason
        assert result.regions >= 3
        assert result.min_tol < RECOVERY_TOL

    def test_recovery_check_rejects_a_wrong_topology(self):
        config = RunConfig(separated_latents=True, seed=11)
        model = generate_model(config)
        result = recovery_check(replace(model, topology=Topology(model.n)), config)
        assert not result.recovered
        assert "supp(S_t0)" in result.reason

    def test_recovery_filter_can_be_switched_off(self):
        model = generate_model(RunConfig(separated_latents=True, require_recovery=False))
        assert not model.diagnostics['recovery_checked']
        assert model.diagnostics['recovery_min_tol'] is None

    def test_random_models_skip_the_recovery_filter(self):
        model = generate_model(RunConfig(n=12, q=1, seed=3))
        assert not model.diagnostics['recovery_checked']
