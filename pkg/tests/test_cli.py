"""
Tests for the netrecon command-line entry point.
"""

import json

import pytest

from netrecon import EXIT_OK, build_parser, main


def _generate(out_dir, *extra):
    return main(['generate', '--n', '12', '--q', '1', '--seed', '5', '--out-dir', str(out_dir), *extra])


class TestParser:
    def test_pipeline_mode_flags(self):
        args = build_parser().parse_args(['pipeline', '--model', 'm.json', '--data', '--segment', '1024'])
        assert args.mode == 'data'
        assert args.segment_length == 1024

    def test_analytic_and_data_are_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(['pipeline', '--analytic', '--data'])


class TestCommands:
    def test_schema(self, capsys):
        assert main(['schema']) == EXIT_OK
        assert json.loads(capsys.readouterr().out)['title'] == 'RunConfig'

    def test_help(self, capsys):
        assert main(['help']) == EXIT_OK
        assert 'verify <suite>' in capsys.readouterr().out

    def test_generate_writes_metadata(self, tmp_path):
        assert _generate(tmp_path) == EXIT_OK
        data = json.loads((tmp_path / 'model.json').read_text(encoding='utf-8'))
        assert data['metadata']['seed'] == 5
        assert set(data['metadata']) == {'seed', 'config_hash', 'version'}
        assert data['n'] == 12

    def test_generate_is_reproducible(self, tmp_path):
        first, second = tmp_path / 'a.json', tmp_path / 'b.json'
        assert _generate(tmp_path, '--output', str(first)) == EXIT_OK
        assert _generate(tmp_path, '--output', str(second)) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_plot(self, tmp_path):
        csv_path = tmp_path / 'sweep.csv'
        csv_path.write_text('t,diff_t\n0.1,0\n0.2,1e-2\n', encoding='utf-8')
        assert main(['plot', str(csv_path)]) == EXIT_OK
        assert (tmp_path / 'sweep.svg').exists()

    def test_verify_blockdiag(self, tmp_path):
        assert main(['verify', 'blockdiag', '--out-dir', str(tmp_path)]) == EXIT_OK
        report = json.loads((tmp_path / 'verify-blockdiag.json').read_text(encoding='utf-8'))
        assert report['passed'] == report['total']


class TestErrors:
    def test_unknown_suite(self, tmp_path, capsys):
        assert main(['verify', 'nope', '--out-dir', str(tmp_path)]) == 2
        assert json.loads((tmp_path / 'error.json').read_text(encoding='utf-8'))['error'] == 'ValidationError'
        assert 'unknown verification suite' in capsys.readouterr().err

    def test_pipeline_without_model(self, tmp_path):
        assert main(['pipeline', '--out-dir', str(tmp_path)]) == 2

    def test_pipeline_with_missing_model(self, tmp_path):
        assert main(['pipeline', '--model', str(tmp_path / 'absent.json'), '--out-dir', str(tmp_path)]) == 2

    def test_frequency_outside_the_range(self, tmp_path):
        assert _generate(tmp_path, '--omega', '3/2') == 2

    def test_plot_missing_csv(self, tmp_path):
        assert main(['plot', str(tmp_path / 'absent.csv')]) == 2

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / 'run.yaml'
        path.write_text('colour: blue\n', encoding='utf-8')
        assert main(['generate', '--config', str(path), '--out-dir', str(tmp_path)]) == 2


@pytest.mark.slow
class TestPipelineRun:
    def test_benchmark_artifacts(self, tmp_path):
        assert main(['generate', '--separated-latents', '--out-dir', str(tmp_path)]) == EXIT_OK
        assert main(['pipeline', '--model', str(tmp_path / 'model.json'), '--out-dir', str(tmp_path)]) == EXIT_OK
        for name in ['sweep.csv', 'S_t0.csv', 'L_t0.csv', 'topology.csv', 'correlation.csv', 'report.json']:
            assert (tmp_path / name).exists()
        lines = (tmp_path / 'sweep.csv').read_text(encoding='utf-8').splitlines()
        assert len(lines) == 2 + 100
        assert main(['plot', str(tmp_path / 'sweep.csv')]) == EXIT_OK
