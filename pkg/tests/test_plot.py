"""
Tests for sweep figures.
"""

import numpy as np
import pytest

from errors_support import ModelFormatError
from plot_support import _region_spans, plot_sweep
from serialization_support import SweepTable

SWEEP_CSV = (
    '# {"seed":7}\n'
    't,diff_t,tol_t,zero_region\n'
    '0.1,0,0,1\n0.2,0,0,1\n0.3,0.5,0.4,\n0.4,0,0.3,2\n0.5,0,0,2\n0.6,0.2,0.7,\n0.7,0,1.0,3\n0.8,0,1.0,3\n'
)


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / 'sweep.csv'
    path.write_text(SWEEP_CSV, encoding='utf-8')
    return path


class TestRegionSpans:
    def test_spans_follow_labels(self):
        table = SweepTable(t=np.array([0.1, 0.2, 0.3, 0.4]), diff=np.zeros(4), tol=None,
                           zero_region=[1, 1, None, 2])
        assert _region_spans(table) == [(0.1, 0.2), (0.4, 0.4)]

    def test_no_regions(self):
        table = SweepTable(t=np.array([0.1, 0.2]), diff=np.ones(2), tol=None, zero_region=[None, None])
        assert _region_spans(table) == []


class TestPlotSweep:
    def test_writes_svg(self, sweep_csv, tmp_path):
        path = plot_sweep(sweep_csv, tmp_path / 'figs' / 'sweep.svg', title='benchmark')
        text = path.read_text(encoding='utf-8')
        assert text.lstrip().startswith('<?xml')
        assert '<svg' in text

    def test_output_is_deterministic(self, sweep_csv, tmp_path):
        first = plot_sweep(sweep_csv, tmp_path / 'a.svg').read_bytes()
        second = plot_sweep(sweep_csv, tmp_path / 'b.svg').read_bytes()
        assert first == second

    def test_sweep_without_truth(self, tmp_path):
        path = tmp_path / 'sweep.csv'
        path.write_text('t,diff_t\n0.1,1e-3\n0.2,0\n', encoding='utf-8')
        assert plot_sweep(path, tmp_path / 'sweep.svg').exists()

    def test_missing_csv(self, tmp_path):
        with pytest.raises(ModelFormatError):
            plot_sweep(tmp_path / 'absent.csv', tmp_path / 'out.svg')
