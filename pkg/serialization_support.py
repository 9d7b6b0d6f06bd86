"""
Artifact I/O: model JSON, sweep / matrix / edge-list CSV, report JSON and
time-series files. CSV artifacts start with one '# {json}' metadata line.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from decomp_support import SweepResult
from errors_support import ModelFormatError
from generator_support import GeneratedModel
from latent_support import CorrelationGraph, LatentExpansion, build_lq_expansion, graph_from_children, poly_expansion
from netmodel_support import DirectedGraph, FirMatrix, Ldim, NoiseSpec, TransferMatrix, UndirectedGraph, topology_of
from poly_lift_support import PolyCorrelationSpec, basis_size, cluster_correlation_graph
from spectral_support import SpectralEstimate, TimeSeries

SWEEP_COLUMNS = ['t', 'diff_t', 'tol_t', 'degmax_S', 'inc_L', 'rank_L', 'primal_residual', 'iters', 'zero_region']
REQUIRED_SWEEP_COLUMNS = ('t', 'diff_t')


def _number(value: float) -> str:
    return format(float(value), '.17g')


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + '\n', encoding='utf-8')
    return path


def read_json(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ModelFormatError("file does not exist", path=str(path))
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise ModelFormatError("file is not valid JSON", path=str(path), reason=str(exc)) from exc


def _metadata_line(metadata: Optional[Dict[str, Any]]) -> str:
    return '# ' + json.dumps(metadata or {}, sort_keys=True, separators=(',', ':')) + '\n'


def _split_metadata(text: str) -> Tuple[Dict[str, Any], str]:
    if not text.startswith('#'):
        return {}, text
    first, _, rest = text.partition('\n')
    try:
        return json.loads(first[1:].strip() or '{}'), rest
    except json.JSONDecodeError as exc:
        raise ModelFormatError("metadata line is not valid JSON", reason=str(exc)) from exc


def _write_csv(path: Path, header: List[str], rows: List[List[str]], metadata: Optional[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    buffer.write(_metadata_line(metadata))
    writer = csv.writer(buffer, lineterminator='\n')
    if header:
        writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding='utf-8')
    return path


# === models ===

def _taps(values) -> List[float]:
    values = [float(v) for v in values]
    while len(values) > 1 and values[-1] == 0.0:
        values.pop()
    return values


def model_to_dict(model: GeneratedModel, metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    h = model.ldim.h
    edges = [{'from': int(k), 'to': int(i), 'taps': _taps(h.coefficients[i, k])}
             for i, k in sorted(h.nonzero_entries(), key=lambda e: (e[1], e[0]))]
    exp = model.expansion
    noise: Dict[str, Any] = {'base': [float(v) for v in exp.base]}
    if model.poly is not None:
        spec = model.poly
        noise['kind'] = 'poly'
        noise['poly'] = {
            'm': spec.m, 'p': spec.p, 'sigma': spec.sigma, 'driver': spec.driver,
            'gains': [{'node': int(i), 'monomial_index': int(k), 'taps': _taps(spec.gains.coefficients[i, k])}
                      for i, k in spec.gains.nonzero_entries()],
        }
    elif exp.latent_count:
        noise['kind'] = 'affine'
        noise['latents'] = [
            {
                'id': col,
                'variance': float(exp.latent_cov[col, col]),
                'children': sorted(int(c) for c in exp.children[col]),
                'taps': [_taps(exp.f.coefficients[c, col]) for c in sorted(exp.children[col])],
            }
            for col in range(exp.latent_count)
        ]
    else:
        noise['kind'] = 'diagonal'
    return {
        'metadata': metadata or {},
        'n': model.n,
        'edges': edges,
        'noise': noise,
        'truth': {'correlation_graph': [list(e) for e in model.correlation_graph.sorted_edges()]},
        'diagnostics': model.diagnostics,
    }


def model_from_dict(data: Dict[str, Any]) -> GeneratedModel:
    try:
        n = int(data['n'])
        h = TransferMatrix.from_edges(n, {(int(e['from']), int(e['to'])): e['taps'] for e in data['edges']})
        noise = data['noise']
        base = tuple(float(v) for v in noise['base'])
        kind = noise.get('kind', 'diagonal')
        poly = None
        if kind == 'poly':
            spec = noise['poly']
            m, p = int(spec['m']), int(spec['p'])
            gains = FirMatrix.from_entries(n, basis_size(m, p), {
                (int(g['node']), int(g['monomial_index'])): g['taps'] for g in spec['gains']})
            poly = PolyCorrelationSpec(m=m, p=p, sigma=float(spec['sigma']), gains=gains,
                                       driver=spec.get('driver', 'gaussian'))
            expansion = poly_expansion(h, poly, base)
            ldim = Ldim(h, NoiseSpec(base, poly))
            gc = cluster_correlation_graph(poly)
        elif kind == 'affine':
            latents = sorted(noise['latents'], key=lambda item: int(item['id']))
            entries = {}
            for col, latent in enumerate(latents):
                if len(latent['children']) != len(latent['taps']):
                    raise ModelFormatError("each latent child needs its own tap list", latent=latent.get('id'))
                for child, taps in zip(latent['children'], latent['taps']):
                    entries[(int(child), col)] = taps
            f = FirMatrix.from_entries(n, len(latents), entries)
            variances = [float(latent.get('variance', 1.0)) for latent in latents]
            expansion = LatentExpansion(h=h, f=f, base=base, latent_cov=np.diag(variances))
            ldim = expansion.as_ldim()
            gc = graph_from_children(n, expansion.children)
        elif kind == 'diagonal':
            gc = CorrelationGraph(n)
            expansion = build_lq_expansion(Ldim(h, NoiseSpec(base)), gc, 0)
            ldim = expansion.as_ldim()
        else:
            raise ModelFormatError("unknown noise kind", kind=kind)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError("model document is malformed", reason=f"{type(exc).__name__}: {exc}") from exc
    directed = DirectedGraph.from_transfer_matrix(h)
    metadata = data.get('metadata') or {}
    diagnostics = data.get('diagnostics') or {}
    return GeneratedModel(ldim=ldim, expansion=expansion, correlation_graph=gc, directed=directed,
                          topology=topology_of(directed), seed=int(metadata.get('seed', 0)),
                          attempts=int(diagnostics.get('attempts', 0)), poly=poly, diagnostics=diagnostics)


def save_model(path: Path, model: GeneratedModel, metadata: Optional[Dict[str, Any]] = None) -> Path:
    return write_json(path, model_to_dict(model, metadata))


def load_model(path: Path) -> GeneratedModel:
    return model_from_dict(read_json(path))


# === sweeps ===

@dataclass
class SweepTable:
    t: np.ndarray
    diff: np.ndarray
    tol: Optional[np.ndarray]
    zero_region: List[Optional[int]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)


def write_sweep_csv(path: Path, sr: SweepResult, metadata: Optional[Dict[str, Any]] = None) -> Path:
    labels: Dict[int, int] = {}
    for number, region in enumerate(sr.regions, start=1):
        for index in range(region.start, region.end + 1):
            labels[index] = number
    rows = []
    for index, record in enumerate(sr.records):
        rows.append([
            _number(record.t), _number(record.diff), '' if record.tol is None else _number(record.tol),
            str(record.deg_max), _number(record.inc), str(record.rank), _number(record.primal_residual),
            str(record.iterations), str(labels.get(index, '')),
        ])
    return _write_csv(path, SWEEP_COLUMNS, rows, metadata)


def read_sweep_csv(path: Path) -> SweepTable:
    path = Path(path)
    if not path.exists():
        raise ModelFormatError("sweep CSV does not exist", path=str(path))
    metadata, body = _split_metadata(path.read_text(encoding='utf-8'))
    rows = list(csv.DictReader(io.StringIO(body)))
    if not rows:
        raise ModelFormatError("sweep CSV has no rows", path=str(path))
    missing = [c for c in REQUIRED_SWEEP_COLUMNS if c not in rows[0]]
    if missing:
        raise ModelFormatError("sweep CSV lacks required columns", missing=missing)
    try:
        t = np.array([float(r['t']) for r in rows])
        diff = np.array([float(r['diff_t']) for r in rows])
        tol_cells = [r.get('tol_t') or '' for r in rows]
        tol = np.array([float(c) for c in tol_cells]) if all(tol_cells) else None
        regions = [int(r['zero_region']) if r.get('zero_region') else None for r in rows]
    except (TypeError, ValueError) as exc:
        raise ModelFormatError("sweep CSV has a malformed value", reason=str(exc)) from exc
    return SweepTable(t=t, diff=diff, tol=tol, zero_region=regions, metadata=metadata)


# === matrices, graphs, reports ===

def write_matrix_csv(path: Path, matrix: np.ndarray, metadata: Optional[Dict[str, Any]] = None) -> Path:
    rows = [[_number(v) for v in row] for row in np.asarray(matrix, dtype=float)]
    return _write_csv(path, [], rows, metadata)


def read_matrix_csv(path: Path) -> np.ndarray:
    _, body = _split_metadata(Path(path).read_text(encoding='utf-8'))
    return np.array([[float(v) for v in row] for row in csv.reader(io.StringIO(body)) if row])


def write_edges_csv(path: Path, graph: UndirectedGraph, metadata: Optional[Dict[str, Any]] = None) -> Path:
    return _write_csv(path, ['i', 'j'], [[str(i), str(j)] for i, j in graph.sorted_edges()], metadata)


def write_report_json(path: Path, payload: Dict[str, Any]) -> Path:
    return write_json(path, payload)


# === time series ===

def write_series_csv(path: Path, series: TimeSeries, metadata: Optional[Dict[str, Any]] = None) -> Path:
    rows = [[_number(v) for v in row] for row in series.values]
    return _write_csv(path, [], rows, metadata)


def read_series_csv(path: Path) -> TimeSeries:
    metadata, body = _split_metadata(Path(path).read_text(encoding='utf-8'))
    try:
        values = np.array([[float(v) for v in row] for row in csv.reader(io.StringIO(body)) if row])
    except ValueError as exc:
        raise ModelFormatError("series CSV has a malformed value", reason=str(exc)) from exc
    return TimeSeries(values=values, seed=metadata.get('seed'))


def write_series_binary(path: Path, series: TimeSeries) -> Path:
    """Little-endian {n: int64, N: int64} header followed by float64 samples, row-major"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([series.n, series.length], dtype='<i8')
    path.write_bytes(header.tobytes() + np.ascontiguousarray(series.values, dtype='<f8').tobytes())
    return path


def read_series_binary(path: Path) -> TimeSeries:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ModelFormatError("binary series is missing its header", path=str(path))
    n, length = np.frombuffer(raw[:16], dtype='<i8')
    expected = 16 + 8 * int(n) * int(length)
    if len(raw) != expected:
        raise ModelFormatError("binary series size does not match its header", expected=expected, actual=len(raw))
    values = np.frombuffer(raw[16:], dtype='<f8').reshape(int(n), int(length))
    return TimeSeries(values=values.copy())


def write_spectral_json(path: Path, estimate: SpectralEstimate, omegas: List[float],
                        metadata: Optional[Dict[str, Any]] = None) -> Path:
    """Cross-PSD estimates at the requested frequencies as [re, im] pairs"""
    entries = []
    for omega in omegas:
        matrix, used = estimate.at(omega)
        entries.append({
            'omega': float(omega),
            'omega_used': used,
            'matrix': [[[float(v.real), float(v.imag)] for v in row] for row in matrix],
        })
    return write_json(path, {
        'metadata': metadata or {},
        'segments': int(estimate.segments),
        'segment_length': int(estimate.segment_length),
        'estimates': entries,
    })


def read_spectral_json(path: Path) -> Dict[float, np.ndarray]:
    data = read_json(path)
    try:
        return {float(e['omega_used']): np.array([[complex(re, im) for re, im in row] for row in e['matrix']])
                for e in data['estimates']}
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError("spectral estimate document is malformed", reason=str(exc)) from exc
