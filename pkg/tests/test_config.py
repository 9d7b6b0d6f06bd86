"""
Tests for run configuration defaults, files and validation.
"""

import math

import pytest

from config_support import VERSION, RunConfig, build_config, load_config_file, parse_omega
from decomp_support import SolverConfig
from errors_support import ConfigError


class TestDefaults:
    def test_benchmark_defaults(self):
        config = RunConfig().validate()
        assert (config.seed, config.n, config.q) == (7, 29, 3)
        assert config.eps == 0.01
        assert config.omega_value == pytest.approx(3 * math.pi / 8)
        assert config.require_recovery
        assert SolverConfig.from_run_config(config.updated(gap_tol=1e-6)).gap_tol == 1e-6

    def test_edge_threshold_depends_on_mode(self):
        assert RunConfig().edge_threshold == 1e-6
        assert RunConfig(mode='data').edge_threshold == 0.05
        assert RunConfig(mode='data', tau_edge=0.2).edge_threshold == 0.2

    def test_metadata(self):
        metadata = RunConfig(seed=3).metadata()
        assert metadata['seed'] == 3
        assert metadata['version'] == VERSION
        assert len(metadata['config_hash']) == 64


class TestOmega:
    @pytest.mark.parametrize('text, expected', [('3/8', 3 * math.pi / 8), ('1', math.pi), ('0', 0.0),
                                                ('-1/2', -math.pi / 2)])
    def test_rational_multiples(self, text, expected):
        assert parse_omega(text) == pytest.approx(expected)

    @pytest.mark.parametrize('text', ['3/2', '-1', 'pi', '1/0'])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_omega(text)


class TestHash:
    def test_output_locations_do_not_change_the_hash(self):
        assert RunConfig(out_dir='a').config_hash() == RunConfig(out_dir='b', threads=4).config_hash()

    def test_numerical_parameters_change_the_hash(self):
        assert RunConfig().config_hash() != RunConfig(eps=0.02).config_hash()


class TestOverrides:
    def test_none_keeps_the_current_value(self):
        assert RunConfig().updated(n=12, q=None).q == 3

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig().updated(colour='blue')

    def test_yaml_file(self, tmp_path):
        path = tmp_path / 'run.yaml'
        path.write_text('n: 12\nq: 1\nomega: "1/4"\n', encoding='utf-8')
        config = build_config(str(path), seed=5)
        assert (config.n, config.q, config.seed) == (12, 1, 5)
        assert config.omega_value == pytest.approx(math.pi / 4)

    def test_flags_override_the_file(self, tmp_path):
        path = tmp_path / 'run.toml'
        path.write_text('n = 12\neps = 0.02\n', encoding='utf-8')
        config = build_config(str(path), n=14)
        assert config.n == 14
        assert config.eps == 0.02

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / 'run.ini'
        path.write_text('n = 3\n', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / 'absent.yaml')

    def test_non_mapping_file(self, tmp_path):
        path = tmp_path / 'run.yaml'
        path.write_text('- 1\n- 2\n', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_config_file(path)


class TestValidation:
    @pytest.mark.parametrize('overrides', [
        {'eps': 0.03},
        {'eps': 0.6},
        {'n': 1},
        {'mode': 'oracle'},
        {'segment_length': 1000},
        {'clique_size_min': 5, 'clique_size_max': 3},
        {'omega': '5/4'},
        {'poly': 'cubic'},
        {'n': True},
        {'gap_tol': 0},
        {'require_recovery': 'yes'},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigError):
            RunConfig(**overrides).validate()

    def test_valid_edge_cases(self):
        RunConfig(eps=0.5, omega='1', q=0, segment_length=8).validate()
