"""
Tests for the property suites.
"""

import pytest

from config_support import RunConfig
from decomp_support import numerical_rank
from errors_support import ValidationError
from generator_support import generate_model
from reconstruct_support import PipelineSettings
from verify_support import BLOCKDIAG_CASES, SUITES, _low_rank_index, planted_recovery, run_suite, suite_size


def _small(**overrides):
    base = dict(n=12, q=1, seeds=2, seed=3)
    base.update(overrides)
    return RunConfig(**base).validate()


class TestRunSuite:
    def test_unknown_suite(self):
        with pytest.raises(ValidationError):
            run_suite('nope', _small())

    def test_every_suite_is_registered(self):
        assert set(SUITES) == {'equivalence', 'structure', 'blockdiag', 'identity', 'pigeonhole', 'recovery',
                               'negative'}

    def test_ticks_match_the_announced_size(self):
        config = _small()
        ticks = []
        run_suite('equivalence', config, tick=lambda: ticks.append(1))
        assert len(ticks) == suite_size('equivalence', config)


class TestFastSuites:
    def test_blockdiag(self):
        results = run_suite('blockdiag', _small())
        assert len(results) == len(BLOCKDIAG_CASES) + 2
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    @pytest.mark.parametrize('suite', ['equivalence', 'identity'])
    def test_model_suites(self, suite):
        results = run_suite(suite, _small())
        assert len(results) == 2
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_structure_catches_a_deleted_latent(self):
        results = run_suite('structure', _small())
        assert any('deleted latent' in r.name for r in results)
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_pigeonhole(self):
        results = run_suite('pigeonhole', _small(n=16, q=2, seeds=1))
        assert [r.name.split()[-1] for r in results] == ['per-edge', 'merged']
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_results_serialize(self):
        result = run_suite('blockdiag', _small())[0]
        assert set(result.to_dict()) == {'suite', 'name', 'passed', 'detail'}

    def test_latent_free_model_reads_the_first_zero_region(self):
        config = _small(q=0, mode='analytic')
        model = generate_model(config)
        sr, index = _low_rank_index(config, model, PipelineSettings.from_run_config(config))
        assert sr.regions and sr.regions[0].start <= index <= sr.regions[0].end
        assert sr.tols[index] < 1e-3
        assert numerical_rank(sr.records[index].l, config.tau_rank, scale=sr.c_norm) == 0


@pytest.mark.slow
class TestSlowSuites:
    def test_planted_recovery_single_seed(self):
        assert planted_recovery(0) < 1e-4

    def test_negative_controls(self):
        results = run_suite('negative', RunConfig(seeds=2).validate())
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]
