"""
From decomposition outputs to graphs: topology from the sparse part, a
best-effort correlation graph from the low-rank part, the direct hard
thresholding baseline, edge metrics and the end-to-end pipeline.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np

from decomp_support import (
    SUPPORT_FLOOR, RegionSelection, SolverConfig, SweepResult, is_skew, select_middle_region, skew_part,
    support_mask, svd, sweep,
)
from errors_support import RegionSelectionError, ValidationError
from latent_support import CorrelationGraph, LatentExpansion, graph_from_children
from netmodel_support import Ldim, Topology, UndirectedGraph
from spectral_support import SpectralEstimate, TimeSeries, WelchConfig, estimate_ipsdm, welch_cross_psd

logger = logging.getLogger(__name__)

GROUP_JACCARD = 0.5
PAIR_TOL = 1e-6


def _support_pairs(matrix: np.ndarray, tau: float, reference: float = 1.0) -> FrozenSet[Tuple[int, int]]:
    magnitude = np.abs(np.asarray(matrix))
    np.fill_diagonal(magnitude, 0.0)
    rows, cols = np.nonzero(np.triu(support_mask(magnitude, tau, reference), k=1))
    return frozenset(zip(rows.tolist(), cols.tolist()))


def topology_from_sparse(s: np.ndarray, tau_edge: float = 1e-6, reference: float = 1.0) -> Topology:
    """Edge (i, j) iff |S_ij| > tau_edge * max |S| and above the absolute floor scaled by `reference`"""
    return Topology(s.shape[0], _support_pairs(s, tau_edge, reference))


def direct_threshold_topology(phi_inv: np.ndarray, tau_edge: float = 1e-6) -> Topology:
    """Baseline: hard-threshold the imaginary part of the IPSDM directly"""
    return Topology(phi_inv.shape[0], _support_pairs(np.imag(phi_inv), tau_edge, input_scale(phi_inv)))


def input_scale(phi_inv: np.ndarray) -> float:
    """Largest entry magnitude of the complex IPSDM; the reference for the absolute support floor"""
    return float(np.abs(np.asarray(phi_inv)).max(initial=0.0))


@dataclass(frozen=True)
class EdgeMetrics:
    true_positives: int
    false_positives: int
    false_negatives: int
    total_error_fraction: float

    @property
    def exact(self) -> bool:
        return self.false_positives == 0 and self.false_negatives == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'true_positives': self.true_positives,
            'false_positives': self.false_positives,
            'false_negatives': self.false_negatives,
            'total_error_fraction': self.total_error_fraction,
        }


def evaluate_edges(estimate: UndirectedGraph, truth: UndirectedGraph) -> EdgeMetrics:
    """(FP + FN) / |truth|; an empty truth counts raw errors"""
    if estimate.n != truth.n:
        raise ValidationError("graphs have different node counts", estimate=estimate.n, truth=truth.n)
    tp = len(estimate.edges & truth.edges)
    fp = len(estimate.edges - truth.edges)
    fn = len(truth.edges - estimate.edges)
    return EdgeMetrics(tp, fp, fn, (fp + fn) / max(len(truth.edges), 1))


@dataclass(frozen=True)
class CalibratedThreshold:
    tau: float
    metrics: EdgeMetrics


def calibrate_threshold(matrix: np.ndarray, truth: UndirectedGraph, reference: float = 1.0) -> CalibratedThreshold:
    """Relative threshold with the fewest edge errors against the truth; ties go to the larger threshold"""
    magnitude = np.abs(np.asarray(matrix))
    np.fill_diagonal(magnitude, 0.0)
    scale = magnitude.max(initial=0.0)
    if scale <= SUPPORT_FLOOR * reference:
        return CalibratedThreshold(0.0, evaluate_edges(Topology(truth.n), truth))
    levels = np.unique(magnitude[np.triu_indices(truth.n, k=1)] / scale)
    # a threshold just below each level keeps that level and everything above it
    candidates = [0.0] + [float(np.nextafter(level, 0.0)) for level in levels if level > 0] + [1.0]
    best = None
    for tau in candidates:
        metrics = evaluate_edges(Topology(truth.n, _support_pairs(matrix, tau, reference)), truth)
        errors = metrics.false_positives + metrics.false_negatives
        if best is None or errors <= best[0]:
            best = (errors, tau, metrics)
    return CalibratedThreshold(best[1], best[2])


def calibrate_direct_threshold(phi_inv: np.ndarray, truth: UndirectedGraph) -> CalibratedThreshold:
    return calibrate_threshold(np.imag(phi_inv), truth, input_scale(phi_inv))


@dataclass
class LatentGroups:
    groups: List[FrozenSet[int]] = field(default_factory=list)
    exact: bool = True
    notes: List[str] = field(default_factory=list)


def _support(vector: np.ndarray, tau: float) -> FrozenSet[int]:
    magnitude = np.abs(vector)
    scale = magnitude.max(initial=0.0)
    if scale == 0:
        return frozenset()
    return frozenset(np.flatnonzero(magnitude > tau * scale).tolist())


def _child_support(u1: np.ndarray, u2: np.ndarray, tau: float) -> FrozenSet[int]:
    """Child set inside span{u1, u2}.

    Candidates are u1, u2 and the combinations cancelling one coordinate. When
    two minimal candidates split the span's support into disjoint halves (the
    children and the external parents of a latent with no edges among its
    children), the larger half is taken; otherwise the smallest candidate.
    """
    candidates = [u1, u2] + [u2[k] * u1 - u1[k] * u2 for k in range(len(u1))]
    supports = set(s for s in (_support(v, tau) for v in candidates) if len(s) >= 2)
    if not supports:
        return frozenset()
    span = _support(u1, tau) | _support(u2, tau)
    minimal = [s for s in supports if not any(other < s for other in supports)]
    halves = [(a, b) for a in minimal for b in minimal if not a & b and a | b == span]
    if halves:
        return max((max(pair, key=len) for pair in halves), key=lambda s: (len(s), sorted(s)))
    return min(supports, key=lambda s: (len(s), sorted(s)))


def _merge_groups(groups: List[FrozenSet[int]]) -> List[FrozenSet[int]]:
    merged = list(groups)
    changed = True
    while changed:
        changed = False
        for a in range(len(merged)):
            for b in range(a + 1, len(merged)):
                union = merged[a] | merged[b]
                if union and len(merged[a] & merged[b]) / len(union) >= GROUP_JACCARD:
                    merged[a] = union
                    del merged[b]
                    changed = True
                    break
            if changed:
                break
    return sorted(merged, key=lambda g: sorted(g))


def latent_groups_from_lowrank(l: np.ndarray, tau_rank: float = 1e-6, tau_supp: float = 1e-6) -> LatentGroups:
    """Child sets of the latent nodes behind a skew-symmetric low-rank part.

    Singular values of a skew matrix come in equal pairs; each pair spans the
    contribution of one latent node and its child set is read off that span
    (see _child_support). Exact when latent neighbourhoods are disjoint and
    every child set has parents outside it; flagged otherwise.
    """
    u, s, _ = svd(np.asarray(l, dtype=float))
    if s.size == 0 or s[0] == 0:
        return LatentGroups()
    rank = int(np.count_nonzero(s > tau_rank * s[0]))
    result = LatentGroups()
    if rank % 2:
        result.exact = False
        result.notes.append(f"odd numerical rank {rank}")
    raw = []
    for k in range(0, rank - 1, 2):
        if abs(s[k] - s[k + 1]) > PAIR_TOL * s[0]:
            result.exact = False
            result.notes.append(f"singular values {k} and {k + 1} are not paired")
        group = _child_support(u[:, k], u[:, k + 1], tau_supp)
        if len(group) < 2:
            result.exact = False
            result.notes.append(f"pair {k // 2} has no child set of size >= 2")
            continue
        raw.append(group)
    distinct = sorted(set(raw), key=sorted)
    result.groups = _merge_groups(distinct)
    if len(result.groups) != len(distinct):
        result.exact = False
        result.notes.append("overlapping groups were merged")
    return result


def correlation_graph_from_lowrank(l: np.ndarray, tau_rank: float = 1e-6, tau_supp: float = 1e-6) -> CorrelationGraph:
    groups = latent_groups_from_lowrank(l, tau_rank, tau_supp)
    if not groups.exact:
        logger.warning("correlation graph recovery is best effort here: %s", '; '.join(groups.notes))
    return graph_from_children(l.shape[0], groups.groups)


@dataclass
class GroundTruth:
    topology: Topology
    correlation_graph: Optional[CorrelationGraph] = None
    s_im: Optional[np.ndarray] = None
    l_im: Optional[np.ndarray] = None

    @property
    def split(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        if self.s_im is None or self.l_im is None:
            return None
        return self.s_im, self.l_im


@dataclass
class PipelineSettings:
    solver: SolverConfig = field(default_factory=SolverConfig)
    tau_edge: float = 1e-6
    tau_supp: float = 1e-6
    tau_rank: float = 1e-6
    tau_group: float = 1e-3
    tau_zero: float = 1e-3
    min_zero_run: int = 2
    threads: Optional[int] = None
    welch: WelchConfig = field(default_factory=WelchConfig)
    cond_limit: float = 1e8

    @classmethod
    def from_run_config(cls, config) -> 'PipelineSettings':
        return cls(
            solver=SolverConfig.from_run_config(config),
            tau_edge=config.edge_threshold,
            tau_supp=config.tau_supp if config.mode == 'analytic' else max(config.tau_supp, config.edge_threshold),
            tau_rank=config.tau_rank,
            tau_group=config.tau_group,
            tau_zero=config.tau_zero,
            min_zero_run=config.min_zero_run,
            threads=config.threads,
            welch=WelchConfig(config.segment_length, config.overlap, config.window, config.burn_in),
            cond_limit=config.cond_limit,
        )


@dataclass
class PipelineInput:
    phi_inv: np.ndarray
    omega: float
    omega_used: float
    source: str
    estimate: Optional[SpectralEstimate] = None


def analytic_input(model: Union[Ldim, LatentExpansion], omega: float) -> PipelineInput:
    ldim = model.as_ldim() if isinstance(model, LatentExpansion) else model
    return PipelineInput(phi_inv=ldim.ipsdm(omega), omega=omega, omega_used=omega, source='analytic')


def data_input(series: TimeSeries, omega: float, settings: PipelineSettings) -> PipelineInput:
    estimate = welch_cross_psd(series, settings.welch, threads=settings.threads)
    _, used = estimate.at(omega)
    phi_inv = estimate_ipsdm(estimate, omega, cond_limit=settings.cond_limit)
    return PipelineInput(phi_inv=phi_inv, omega=omega, omega_used=used, source='data', estimate=estimate)


@dataclass
class ReconstructionReport:
    topology: Topology
    correlation_graph: Optional[CorrelationGraph]
    t0: Optional[float]
    omega: float
    omega_used: float
    source: str
    thresholds: Dict[str, float]
    metrics: Optional[EdgeMetrics] = None
    calibrated: Optional[CalibratedThreshold] = None
    correlation_metrics: Optional[EdgeMetrics] = None
    correlation_exact_recovery: bool = True
    direct_topology: Optional[Topology] = None
    direct_metrics: Optional[EdgeMetrics] = None
    direct_calibrated: Optional[CalibratedThreshold] = None
    regions: List[Dict[str, Any]] = field(default_factory=list)
    sufficient_product: Optional[float] = None
    flags: List[str] = field(default_factory=list)
    sweep: Optional[SweepResult] = None
    selection: Optional[RegionSelection] = None

    def to_dict(self, metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        def graph(g):
            return None if g is None else [list(e) for e in g.sorted_edges()]

        def calibrated(c):
            return None if c is None else {'tau': c.tau, **c.metrics.to_dict()}

        return {
            'metadata': metadata or {},
            'source': self.source,
            'omega': self.omega,
            'omega_used': self.omega_used,
            't0': self.t0,
            'thresholds': self.thresholds,
            'regions': self.regions,
            'sufficient_product': self.sufficient_product,
            'topology': graph(self.topology),
            'correlation_graph': graph(self.correlation_graph),
            'correlation_exact_recovery': self.correlation_exact_recovery,
            'metrics': None if self.metrics is None else self.metrics.to_dict(),
            'calibrated': calibrated(self.calibrated),
            'correlation_metrics': None if self.correlation_metrics is None else self.correlation_metrics.to_dict(),
            'direct': {
                'topology': graph(self.direct_topology),
                'metrics': None if self.direct_metrics is None else self.direct_metrics.to_dict(),
                'calibrated': calibrated(self.direct_calibrated),
            },
            'flags': self.flags,
        }


def _direct_baseline(report: ReconstructionReport, phi_inv: np.ndarray, truth: Optional[GroundTruth]):
    report.direct_topology = direct_threshold_topology(phi_inv, report.thresholds['tau_edge'])
    if truth is not None:
        report.direct_metrics = evaluate_edges(report.direct_topology, truth.topology)
        report.direct_calibrated = calibrate_direct_threshold(phi_inv, truth.topology)


def end_to_end(source, omega: float, eps: float = 0.01, settings: Optional[PipelineSettings] = None,
               truth: Optional[GroundTruth] = None, on_step=None) -> ReconstructionReport:
    """IPSDM -> C = Im -> sweep -> middle region -> supp(S_t0) and the low-rank correlation graph"""
    settings = settings or PipelineSettings()
    if isinstance(source, PipelineInput):
        prepared = source
    elif isinstance(source, TimeSeries):
        prepared = data_input(source, omega, settings)
    elif hasattr(source, 'h'):
        prepared = analytic_input(source, omega)
    else:
        prepared = PipelineInput(np.asarray(source), omega, omega, 'matrix')

    c = skew_part(np.imag(prepared.phi_inv))
    if not is_skew(c):
        raise ValidationError("imaginary part of the IPSDM is not skew-symmetric")
    thresholds = {
        'tau_edge': settings.tau_edge, 'tau_supp': settings.tau_supp,
        'tau_rank': settings.tau_rank, 'tau_group': settings.tau_group, 'tau_zero': settings.tau_zero,
    }
    sr = sweep(c, eps, settings.solver, truth=truth.split if truth else None, threads=settings.threads,
               tau_supp=settings.tau_supp, tau_rank=settings.tau_rank, on_step=on_step)
    report = ReconstructionReport(
        topology=Topology(c.shape[0]), correlation_graph=None, t0=None, omega=prepared.omega,
        omega_used=prepared.omega_used, source=prepared.source, thresholds=thresholds, sweep=sr,
    )
    _direct_baseline(report, prepared.phi_inv, truth)
    try:
        selection = select_middle_region(sr, settings.tau_zero, settings.min_zero_run,
                                         settings.tau_supp, settings.tau_rank)
    except RegionSelectionError as exc:
        report.regions = exc.regions
        report.flags.append(exc.message)
        if exc.details.get('median_rule'):
            report.flags.append(exc.details['median_rule'])
        raise RegionSelectionError(exc.message, regions=exc.regions, partial=report) from exc

    record = sr.records[selection.index]
    report.selection = selection
    report.t0 = selection.t0
    report.regions = [r.to_dict() for r in selection.regions]
    report.sufficient_product = selection.sufficient.product
    report.flags.extend(selection.flags)
    report.topology = topology_from_sparse(record.s, settings.tau_edge, input_scale(prepared.phi_inv))
    groups = latent_groups_from_lowrank(record.l, settings.tau_rank, settings.tau_group)
    report.correlation_graph = graph_from_children(c.shape[0], groups.groups)
    report.correlation_exact_recovery = groups.exact
    if not groups.exact:
        report.flags.append("correlation graph is a best-effort recovery: " + '; '.join(groups.notes))
        logger.warning(report.flags[-1])
    if truth is not None:
        report.metrics = evaluate_edges(report.topology, truth.topology)
        report.calibrated = calibrate_threshold(record.s, truth.topology, input_scale(prepared.phi_inv))
        if truth.correlation_graph is not None:
            report.correlation_metrics = evaluate_edges(report.correlation_graph, truth.correlation_graph)
    logger.info("reconstructed %d edges at t0=%.2f", len(report.topology), report.t0)
    return report
