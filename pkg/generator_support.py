"""
Seeded random models for experiments and benchmarks.

Every edge is a single-delay tap g z^-1; gains are rescaled so each row sums to
at most 0.9, which keeps I - H invertible on the unit circle. Correlated noise
comes from disjoint cliques (one latent node each) or from one parity cluster
of lifted monomials.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np

from decomp_support import check_sufficient_condition
from errors_support import GenerationError, NetReconError, RegionSelectionError, ValidationError
from latent_support import (
    LATENT_GAIN_RANGE, CorrelationGraph, LatentExpansion, analytic_sl_split, build_lq_expansion, graph_from_children,
    latents_far_apart, poly_expansion,
)
from netmodel_support import DirectedGraph, FirMatrix, Ldim, NoiseSpec, Topology, TransferMatrix, check_well_posed, topology_of
from poly_lift_support import POLY_PRESETS, PolyCorrelationSpec, basis_size, cluster_correlation_graph
from reconstruct_support import GroundTruth, PipelineSettings, end_to_end, topology_from_sparse

logger = logging.getLogger(__name__)

GAIN_RANGE = (0.1, 0.9)
ROW_GAIN_CAP = 0.9
BASE_VARIANCE_RANGE = (0.5, 1.5)
POLY_GAIN_RANGE = (0.3, 1.0)
EXTERNAL_PARENTS = 2
# Benchmark groups: this many children, one fewer external parents.
BENCHMARK_CHILDREN = 5
RECOVERY_TOL = 1e-4


def default_edge_count(n: int) -> int:
    return int(round(0.55 * n))


def random_transfer_matrix(n: int, n_edges: int, rng: np.random.Generator,
                           required: Optional[List[Tuple[int, int]]] = None,
                           allowed=None) -> TransferMatrix:
    """Single-delay gains in [0.1, 0.9]; no self-loops or antiparallel pairs; row gain sums <= 0.9.

    `required` edges (source, target) are always present; `allowed(source, target)` filters the rest.
    """
    required = list(required or [])
    if n_edges > n * (n - 1) // 2:
        raise ValidationError("too many edges for a graph without antiparallel pairs", n=n, edges=n_edges)
    chosen: Set[Tuple[int, int]] = set(required)
    candidates = [(a, b) for a in range(n) for b in range(n)
                  if a != b and (a, b) not in chosen and (allowed is None or allowed(a, b))]
    order = rng.permutation(len(candidates))
    for index in order:
        if len(chosen) >= n_edges:
            break
        a, b = candidates[index]
        if (b, a) in chosen:
            continue
        chosen.add((a, b))
    if len(chosen) < n_edges:
        raise GenerationError("could not place the requested number of edges", requested=n_edges, placed=len(chosen))
    coefficients = np.zeros((n, n, 2))
    low, high = GAIN_RANGE
    for source, target in sorted(chosen):
        coefficients[target, source, 1] = rng.uniform(low, high)
    row_sums = coefficients[:, :, 1].sum(axis=1)
    scale = np.where(row_sums > ROW_GAIN_CAP, ROW_GAIN_CAP / np.maximum(row_sums, 1e-300), 1.0)
    coefficients[:, :, 1] *= scale[:, np.newaxis]
    return TransferMatrix(coefficients)


def _draw_groups(n: int, q: int, size_min: int, size_max: int, rng: np.random.Generator,
                 reserve: int = 0) -> Tuple[List[FrozenSet[int]], List[FrozenSet[int]]]:
    """Disjoint child groups plus `reserve` disjoint external-parent nodes per group"""
    size_max = min(size_max, n)
    size_min = min(size_min, size_max)
    sizes = [int(rng.integers(size_min, size_max + 1)) for _ in range(q)]
    if sum(sizes) + reserve * q > n:
        raise GenerationError("not enough nodes for disjoint groups", n=n, q=q, needed=sum(sizes) + reserve * q)
    nodes = rng.permutation(n).tolist()
    groups, parents = [], []
    cursor = 0
    for size in sizes:
        groups.append(frozenset(nodes[cursor:cursor + size]))
        cursor += size
    for _ in range(q):
        parents.append(frozenset(nodes[cursor:cursor + reserve]))
        cursor += reserve
    return groups, parents


def _benchmark_structure(n: int, n_edges: int, groups: List[FrozenSet[int]], parents: List[FrozenSet[int]],
                         rng: np.random.Generator) -> TransferMatrix:
    """Each external parent feeds its own child of its group, with one gain per group.

    Children have no edges among themselves and nothing else touches a group's
    neighbourhood. Remaining edges form a matching on the free nodes.
    """
    coefficients = np.zeros((n, n, 2))
    low, high = GAIN_RANGE
    for group, extra in zip(groups, parents):
        gain = rng.uniform(low, high)
        targets = rng.permutation(sorted(group))[:len(extra)]
        for parent, child in zip(sorted(extra), targets):
            coefficients[child, parent, 1] = gain
    reserved = set().union(*groups, *parents) if groups else set()
    free = [node for node in rng.permutation(n).tolist() if node not in reserved]
    required = sum(len(extra) for extra in parents)
    extra_edges = max(0, min(n_edges - required, len(free) // 2))
    for k in range(extra_edges):
        source, target = free[2 * k], free[2 * k + 1]
        coefficients[target, source, 1] = rng.uniform(low, high)
    return TransferMatrix(coefficients)


def _benchmark_expansion(h: TransferMatrix, base: Tuple[float, ...], groups: List[FrozenSet[int]],
                         rng: np.random.Generator) -> LatentExpansion:
    """Latent gain of each child proportional to its base variance, one factor per latent"""
    coefficients = np.zeros((h.n, len(groups), 2))
    low, high = LATENT_GAIN_RANGE
    for col, group in enumerate(groups):
        factor = rng.uniform(low, high)
        for child in sorted(group):
            coefficients[child, col, 1] = factor * base[child]
    return LatentExpansion(h=h, f=FirMatrix(coefficients), base=base, latent_cov=np.eye(len(groups)),
                           children=tuple(groups))


def closed_neighbourhoods_disjoint(exp: LatentExpansion, external_parents: int = EXTERNAL_PARENTS) -> bool:
    """Sets C u Pa(C) pairwise disjoint, each with at least `external_parents` parents outside C"""
    graph = DirectedGraph.from_transfer_matrix(exp.h)
    seen: Set[int] = set()
    for children in exp.children:
        parents = set()
        for child in children:
            parents |= graph.parents(child)
        closed = set(children) | parents
        if closed & seen or len(parents - set(children)) < external_parents:
            return False
        seen |= closed
    return True


def planted_split(n: int, seed: int, amplitude: float = 3.0) -> Tuple[np.ndarray, np.ndarray]:
    """Skew pair with deg_max(S) = 1 and inc(L) = sqrt(2/n): a signed perfect matching plus a(u v^T - v u^T)"""
    if n < 4 or n % 2:
        raise ValidationError("planted splits need an even n >= 4", n=n)
    rng = np.random.default_rng(seed)
    s = np.zeros((n, n))
    perm = rng.permutation(n)
    for k in range(0, n, 2):
        i, j = perm[k], perm[k + 1]
        value = rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 2.0)
        s[i, j], s[j, i] = value, -value
    u = rng.choice([-1.0, 1.0], size=n) / np.sqrt(n)
    w = rng.permutation(np.repeat([1.0, -1.0], n // 2))
    v = u * w
    l = amplitude * (np.outer(u, v) - np.outer(v, u))
    return s, l


@dataclass
class GeneratedModel:
    ldim: Ldim
    expansion: LatentExpansion
    correlation_graph: CorrelationGraph
    directed: DirectedGraph
    topology: Topology
    seed: int
    attempts: int
    poly: Optional[PolyCorrelationSpec] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.ldim.n

    def ground_truth(self, omega: float) -> GroundTruth:
        split = analytic_sl_split(self.expansion, omega)
        return GroundTruth(topology=self.topology, correlation_graph=self.correlation_graph,
                           s_im=np.imag(split.s), l_im=np.imag(split.l))


def _poly_spec(n: int, group: FrozenSet[int], base: Tuple[float, ...], config,
               rng: np.random.Generator) -> PolyCorrelationSpec:
    """Gains w_k * base_c: every active monomial reaches the children along one common direction"""
    if (config.m, config.p) != (2, 3):
        raise ValidationError("monomial presets are defined on the (m=2, p=3) lift", m=config.m, p=config.p)
    columns = POLY_PRESETS[config.poly]
    coefficients = np.zeros((n, basis_size(config.m, config.p), 2))
    low, high = POLY_GAIN_RANGE
    for column in columns:
        weight = rng.uniform(low, high)
        for child in sorted(group):
            coefficients[child, column, 1] = weight * base[child]
    return PolyCorrelationSpec(m=config.m, p=config.p, sigma=config.sigma, gains=FirMatrix(coefficients))


def benchmark_shaped(config) -> bool:
    return bool(config.separated_latents or config.poly)


def _draw_candidate(config, rng: np.random.Generator) -> GeneratedModel:
    n = config.n
    n_edges = config.edges if config.edges is not None else default_edge_count(n)
    groups_wanted = 1 if config.poly else config.q
    shaped = benchmark_shaped(config) and groups_wanted > 0
    if shaped:
        groups, parents = _draw_groups(n, groups_wanted, BENCHMARK_CHILDREN, BENCHMARK_CHILDREN, rng,
                                       BENCHMARK_CHILDREN - 1)
        h = _benchmark_structure(n, n_edges, groups, parents, rng)
    else:
        groups, _ = _draw_groups(n, groups_wanted, config.clique_size_min, config.clique_size_max, rng)
        h = random_transfer_matrix(n, n_edges, rng)
    low, high = BASE_VARIANCE_RANGE
    base = tuple(rng.uniform(low, high, size=n).tolist())

    poly = None
    if config.poly:
        poly = _poly_spec(n, groups[0], base, config, rng)
        expansion = poly_expansion(h, poly, base)
        ldim = Ldim(h, NoiseSpec(base, poly))
        gc = cluster_correlation_graph(poly)
    elif shaped:
        gc = graph_from_children(n, groups)
        expansion = _benchmark_expansion(h, base, groups, rng)
        ldim = expansion.as_ldim()
    else:
        gc = graph_from_children(n, groups)
        expansion = build_lq_expansion(Ldim(h, NoiseSpec(base)), gc, int(rng.integers(2 ** 31)))
        ldim = expansion.as_ldim()
    directed = DirectedGraph.from_transfer_matrix(h)
    return GeneratedModel(ldim=ldim, expansion=expansion, correlation_graph=gc, directed=directed,
                          topology=topology_of(directed), seed=config.seed, attempts=0, poly=poly)


@dataclass(frozen=True)
class RecoveryCheck:
    recovered: bool
    min_tol: float
    regions: int
    t0: Optional[float]
    reason: str = ''


def recovery_check(model: GeneratedModel, config) -> RecoveryCheck:
    """Run the analytic pipeline against the truth: min tol_t below RECOVERY_TOL, three or more
    zero regions, and supp(S_t0) plus the correlation graph read-out both exact"""
    omega = config.omega_value
    settings = PipelineSettings.from_run_config(config.updated(mode='analytic'))
    try:
        report = end_to_end(model.expansion, omega, config.eps, settings, truth=model.ground_truth(omega))
    except RegionSelectionError as exc:
        sweep_result = exc.partial.sweep if exc.partial is not None else None
        tols = sweep_result.tols if sweep_result is not None else None
        return RecoveryCheck(False, float(np.min(tols)) if tols is not None else np.inf,
                             len(exc.regions), None, exc.message)
    except NetReconError as exc:
        return RecoveryCheck(False, np.inf, 0, None, exc.message)
    min_tol = float(np.min(report.sweep.tols))
    reasons = []
    if min_tol >= RECOVERY_TOL:
        reasons.append(f"min tol_t {min_tol:.2e}")
    if not report.metrics.exact:
        reasons.append("supp(S_t0) differs from the topology")
    if report.correlation_metrics is not None and not report.correlation_metrics.exact:
        reasons.append("correlation graph read-out differs")
    return RecoveryCheck(not reasons, min_tol, len(report.regions), report.t0, '; '.join(reasons))


def generate_model(config) -> GeneratedModel:
    """Retry seeded draws until every requested property holds"""
    omega = config.omega_value
    for attempt in range(1, config.max_retries + 1):
        rng = np.random.default_rng([config.seed, attempt])
        try:
            model = _draw_candidate(config, rng)
        except GenerationError as exc:
            logger.info("attempt %d rejected: %s", attempt, exc.message)
            continue
        posed = check_well_posed(model.ldim, config.grid_size)
        if not posed.well_posed:
            logger.info("attempt %d rejected: not well posed", attempt)
            continue
        truth = model.ground_truth(omega)
        sufficient = check_sufficient_condition(truth.s_im, truth.l_im, config.tau_supp, config.tau_rank)
        separated = closed_neighbourhoods_disjoint(model.expansion) and latents_far_apart(model.expansion)
        support_ok = topology_from_sparse(truth.s_im, config.tau_supp) == model.topology
        if config.separated_latents and not config.poly and not separated:
            logger.info("attempt %d rejected: latent neighbourhoods overlap", attempt)
            continue
        if config.require_sufficient_condition and not sufficient.holds:
            logger.info("attempt %d rejected: deg_max * inc = %.3f", attempt, sufficient.product)
            continue
        if not support_ok:
            logger.info("attempt %d rejected: cancellation in the sparse support", attempt)
            continue
        recovery = None
        if config.require_recovery and benchmark_shaped(config):
            recovery = recovery_check(model, config)
            if not recovery.recovered:
                logger.info("attempt %d rejected: analytic sweep does not recover it (%s)", attempt, recovery.reason)
                continue
        model.attempts = attempt
        model.diagnostics = {
            'attempts': attempt,
            'edges': len(model.directed.edges),
            'q': len(model.expansion.children) if not config.poly else 1,
            'min_abs_det': posed.min_abs_det,
            'deg_max': sufficient.degree,
            'incoherence': sufficient.incoherence,
            'sufficient_product': sufficient.product,
            'sufficient': sufficient.holds,
            'separated_latents': separated,
            'poly': config.poly,
            'recovery_checked': recovery is not None,
            'recovery_min_tol': None if recovery is None else recovery.min_tol,
            'recovery_t0': None if recovery is None else recovery.t0,
        }
        logger.info("generated model after %d attempt(s)", attempt)
        return model
    raise GenerationError("no model satisfied the requested constraints", attempts=config.max_retries)
