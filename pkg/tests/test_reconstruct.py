"""
Tests for graph read-out, edge metrics, threshold calibration and the end-to-end pipeline.
"""

import numpy as np
import pytest
from pytest import approx

from config_support import RunConfig
from errors_support import RegionSelectionError
from generator_support import generate_model
from latent_support import CorrelationGraph, analytic_sl_split
from netmodel_support import Topology
from reconstruct_support import (
    GroundTruth, PipelineInput, PipelineSettings, ReconstructionReport, calibrate_threshold,
    correlation_graph_from_lowrank, data_input, direct_threshold_topology, end_to_end, evaluate_edges,
    input_scale, latent_groups_from_lowrank, topology_from_sparse,
)
from spectral_support import simulate_ldim, simulate_noise_affine


def _skew_from_pairs(n, values):
    matrix = np.zeros((n, n))
    for (i, j), value in values.items():
        matrix[i, j], matrix[j, i] = value, -value
    return matrix


def _latent_block(n, children, parents, scale, rng):
    """a b^T - b a^T with b on the children and a on children plus parents"""
    b = np.zeros(n)
    a = np.zeros(n)
    b[children] = rng.uniform(0.5, 1.0, len(children))
    a[children + parents] = rng.uniform(0.5, 1.0, len(children) + len(parents))
    return scale * (np.outer(a, b) - np.outer(b, a))


class TestGraphReadout:
    def test_topology_from_sparse(self):
        s = _skew_from_pairs(4, {(0, 1): 1.0, (2, 3): -0.4, (1, 2): 1e-9})
        assert topology_from_sparse(s, 1e-6).edges == frozenset({(0, 1), (2, 3)})

    def test_zero_matrix_gives_empty_topology(self):
        assert len(topology_from_sparse(np.zeros((3, 3)))) == 0

    def test_direct_threshold_uses_imaginary_part(self):
        phi_inv = np.eye(3, dtype=complex) + 1j * _skew_from_pairs(3, {(0, 2): 0.3})
        assert direct_threshold_topology(phi_inv).edges == frozenset({(0, 2)})

    def test_entries_below_the_absolute_floor_are_not_edges(self):
        s = _skew_from_pairs(4, {(0, 1): 1.0, (2, 3): -0.4})
        assert len(topology_from_sparse(1e-15 * s)) == 0
        assert topology_from_sparse(1e-15 * s, reference=1e-15).edges == frozenset({(0, 1), (2, 3)})
        phi_inv = np.eye(4, dtype=complex) + 1e-17j * s
        assert len(direct_threshold_topology(phi_inv)) == 0

    def test_imaginary_part_at_pi_has_no_edges(self):
        model = generate_model(RunConfig(n=12, q=1, seed=3))
        split = analytic_sl_split(model.expansion, np.pi)
        assert len(topology_from_sparse(np.imag(split.s), 1e-6, float(np.abs(split.s).max()))) == 0
        assert len(direct_threshold_topology(model.ldim.ipsdm(np.pi))) == 0


class TestEdgeMetrics:
    def test_counts(self):
        truth = Topology(4, frozenset({(0, 1), (1, 2)}))
        estimate = Topology(4, frozenset({(0, 1), (2, 3)}))
        metrics = evaluate_edges(estimate, truth)
        assert (metrics.true_positives, metrics.false_positives, metrics.false_negatives) == (1, 1, 1)
        assert metrics.total_error_fraction == approx(1.0)
        assert not metrics.exact

    def test_empty_truth_counts_raw_errors(self):
        metrics = evaluate_edges(Topology(3, frozenset({(0, 1)})), Topology(3))
        assert metrics.total_error_fraction == approx(1.0)

    def test_calibration_finds_separating_threshold(self):
        truth = Topology(4, frozenset({(0, 1), (2, 3)}))
        s = _skew_from_pairs(4, {(0, 1): 1.0, (2, 3): 0.6, (1, 2): 0.1})
        calibrated = calibrate_threshold(s, truth)
        assert calibrated.metrics.exact
        assert 0.1 <= calibrated.tau < 0.6


class TestLatentGroups:
    def test_disjoint_latents_recover_child_sets(self):
        rng = np.random.default_rng(0)
        l = _latent_block(12, [0, 1, 2], [3, 4], 1.0, rng) + _latent_block(12, [6, 7, 8], [9, 10], 3.0, rng)
        groups = latent_groups_from_lowrank(l, tau_rank=1e-6, tau_supp=1e-3)
        assert groups.exact, groups.notes
        assert groups.groups == [frozenset({0, 1, 2}), frozenset({6, 7, 8})]

    def test_correlation_graph_from_groups(self):
        rng = np.random.default_rng(1)
        l = _latent_block(8, [0, 1, 2], [4, 5], 1.0, rng)
        gc = correlation_graph_from_lowrank(l, tau_supp=1e-3)
        assert gc.edges == frozenset({(0, 1), (0, 2), (1, 2)})

    def test_children_win_over_external_parents(self):
        """No edges among the children: the span splits into a child half and a parent half"""
        rng = np.random.default_rng(2)
        children, parents = [0, 1, 2, 3, 4], [6, 7, 8, 9]
        b = np.zeros(12)
        b[children] = rng.uniform(0.5, 1.0, len(children))
        a = 0.4 * b
        a[parents] = -rng.uniform(0.5, 1.0, len(parents))
        groups = latent_groups_from_lowrank(np.outer(a, b) - np.outer(b, a), tau_rank=1e-6, tau_supp=1e-3)
        assert groups.exact, groups.notes
        assert groups.groups == [frozenset(children)]

    def test_zero_low_rank_part(self):
        groups = latent_groups_from_lowrank(np.zeros((5, 5)))
        assert groups.groups == [] and groups.exact


class TestPipeline:
    def test_settings_for_data_mode_raise_support_threshold(self):
        settings = PipelineSettings.from_run_config(RunConfig(mode='data'))
        assert settings.tau_edge == approx(0.05)
        assert settings.tau_supp == approx(0.05)
        assert PipelineSettings.from_run_config(RunConfig()).tau_edge == approx(1e-6)

    def test_region_failure_keeps_partial_report(self):
        c = _skew_from_pairs(4, {(0, 1): 1.0})
        source = PipelineInput(phi_inv=1j * c, omega=0.5, omega_used=0.5, source='matrix')
        with pytest.raises(RegionSelectionError) as info:
            end_to_end(source, 0.5, eps=0.25)
        assert isinstance(info.value.partial, ReconstructionReport)
        assert info.value.partial.sweep is not None
        assert info.value.partial.direct_topology.edges == frozenset({(0, 1)})

    @pytest.mark.slow
    def test_affine_benchmark_is_reconstructed_exactly(self):
        config = RunConfig(separated_latents=True)
        model = generate_model(config)
        omega = config.omega_value
        report = end_to_end(model.expansion, omega, config.eps, PipelineSettings.from_run_config(config),
                            truth=model.ground_truth(omega))
        assert len(report.regions) >= 3
        assert report.metrics.exact
        assert report.topology == model.topology
        payload = report.to_dict({'seed': 7})
        assert payload['metadata'] == {'seed': 7}
        assert payload['t0'] == approx(report.t0)

    @pytest.mark.slow
    def test_polynomial_benchmark_is_reconstructed_exactly(self):
        config = RunConfig(poly='parity')
        model = generate_model(config)
        omega = config.omega_value
        report = end_to_end(model.expansion, omega, config.eps, PipelineSettings.from_run_config(config),
                            truth=model.ground_truth(omega))
        assert report.metrics.exact
        assert report.correlation_metrics.exact
        assert report.correlation_graph == model.correlation_graph

    @pytest.mark.slow
    def test_correlation_graph_is_exact_across_seeds(self):
        exact = 0
        for seed in range(1, 21):
            config = RunConfig(separated_latents=True, seed=seed)
            model = generate_model(config)
            omega = config.omega_value
            report = end_to_end(model.expansion, omega, config.eps, PipelineSettings.from_run_config(config),
                                truth=model.ground_truth(omega))
            exact += report.correlation_metrics.exact
        assert exact >= 18

    @pytest.mark.slow
    def test_data_path_decomposition_never_loses_to_direct_thresholding(self):
        config = RunConfig(separated_latents=True, mode='data', samples=1_000_000)
        model = generate_model(config)
        omega = config.omega_value
        settings = PipelineSettings.from_run_config(config)
        noise = simulate_noise_affine(model.expansion, config.samples + config.burn_in, config.seed)
        source = data_input(simulate_ldim(model.ldim, noise, config.burn_in), omega, settings)
        truth = model.ground_truth(omega)
        try:
            report = end_to_end(source, omega, config.eps, settings, truth=truth)
        except RegionSelectionError as exc:
            report = exc.partial
        assert report.source == 'data'
        assert report.omega_used == approx(omega, abs=np.pi / config.segment_length)
        reference = input_scale(source.phi_inv)
        decomposition = min(calibrate_threshold(r.s, truth.topology, reference).metrics.total_error_fraction
                            for r in report.sweep.records if r.converged)
        assert decomposition <= report.direct_calibrated.metrics.total_error_fraction

    def test_diagonal_noise_truth_has_no_low_rank_part(self):
        config = RunConfig(q=0, seed=3)
        model = generate_model(config)
        omega = config.omega_value
        truth = model.ground_truth(omega)
        assert not np.any(truth.l_im)
        assert isinstance(truth, GroundTruth)
        assert model.correlation_graph == CorrelationGraph(model.n)
