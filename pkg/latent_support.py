"""
Correlation graphs and latent-node expansions.

Correlated noise e is rewritten as e = e_o + F e_h with mutually uncorrelated
components; every latent node is a strict parent of the observed nodes in its
child set. The minimal expansion carries one latent node per maximal clique
of the correlation graph.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from errors_support import ModelFormatError, SingularSystemError, ValidationError
from netmodel_support import (
    FirMatrix, Ldim, NoiseSpec, TransferMatrix, UndirectedGraph, _hermitize,
    analytic_psd, eval_transfer_matrix, frequency_grid, noise_psd,
)

logger = logging.getLogger(__name__)

MAX_CLIQUE_NODES = 10_000
LATENT_GAIN_RANGE = (0.3, 1.0)


class CorrelationGraph(UndirectedGraph):
    """Edge (i, j) iff the noise cross-spectrum between i and j is nonzero"""


@dataclass(frozen=True)
class MaximalCliqueSet:
    cliques: Tuple[FrozenSet[int], ...] = ()

    @property
    def q(self) -> int:
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)


def maximal_cliques(gc: UndirectedGraph) -> MaximalCliqueSet:
    """All maximal cliques with at least two nodes, canonically sorted"""
    if gc.n > MAX_CLIQUE_NODES:
        raise ValidationError("graph too large for clique enumeration", n=gc.n, limit=MAX_CLIQUE_NODES)
    graph = nx.Graph()
    graph.add_edges_from(gc.edges)
    found = [tuple(sorted(c)) for c in nx.find_cliques(graph) if len(c) >= 2]
    return MaximalCliqueSet(tuple(frozenset(c) for c in sorted(found)))


def graph_from_children(n: int, children: Iterable[Iterable[int]]) -> CorrelationGraph:
    """Correlation graph implied by latent child sets: each child set becomes a clique"""
    pairs = set()
    for group in children:
        members = sorted(group)
        for idx, a in enumerate(members):
            for b in members[idx + 1:]:
                pairs.add((a, b))
    return CorrelationGraph(n, frozenset(pairs))


@dataclass(frozen=True)
class AffineCorrelationSpec:
    """Latent gains F (n x L) driven by independent white latent sources"""
    gains: FirMatrix
    variances: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'variances', tuple(float(v) for v in self.variances))
        if self.gains.shape[1] != len(self.variances):
            raise ModelFormatError("one variance per latent column is required",
                                   columns=self.gains.shape[1], variances=len(self.variances))
        if any(v <= 0 for v in self.variances):
            raise ModelFormatError("latent variances must be positive")

    def latent_gains(self) -> FirMatrix:
        return self.gains

    def latent_covariance(self) -> np.ndarray:
        return np.diag(np.asarray(self.variances, dtype=float))

    def latent_children(self) -> List[FrozenSet[int]]:
        support = self.gains.support()
        return [frozenset(np.flatnonzero(support[:, col]).tolist()) for col in range(support.shape[1])]


@dataclass(frozen=True, eq=False)
class LatentExpansion:
    """An L-transformed model: H, latent gains F and the spectra of [e_o, e_h]

    The latent covariance is diagonal for affine correlation and
    block diagonal for lifted polynomial correlation.
    """
    h: TransferMatrix
    f: FirMatrix
    base: Tuple[float, ...]
    latent_cov: np.ndarray
    children: Tuple[FrozenSet[int], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'base', tuple(float(v) for v in self.base))
        cov = np.atleast_2d(np.asarray(self.latent_cov, dtype=float))
        if self.f.shape[1] == 0:
            cov = np.zeros((0, 0))
        if self.f.shape[0] != self.h.n or len(self.base) != self.h.n:
            raise ModelFormatError("latent gains and base spectra must match the node count")
        if cov.shape != (self.f.shape[1], self.f.shape[1]):
            raise ModelFormatError("latent covariance must be L x L", shape=list(cov.shape))
        if any(v <= 0 for v in self.base):
            raise ModelFormatError("base noise variances of an expansion must be positive")
        object.__setattr__(self, 'latent_cov', cov)
        if not self.children:
            object.__setattr__(self, 'children', tuple(self.latent_children()))

    @property
    def n(self) -> int:
        return self.h.n

    @property
    def latent_count(self) -> int:
        return self.f.shape[1]

    def latent_gains(self) -> FirMatrix:
        return self.f

    def latent_covariance(self) -> np.ndarray:
        return self.latent_cov

    def latent_children(self) -> List[FrozenSet[int]]:
        support = self.f.support()
        return [frozenset(np.flatnonzero(support[:, col]).tolist()) for col in range(support.shape[1])]

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.base, self if self.latent_count else None)

    def as_ldim(self) -> Ldim:
        """The equivalent observed model with correlated noise"""
        return Ldim(self.h, self.noise_spec())

    def base_ldim(self) -> Ldim:
        return Ldim(self.h, NoiseSpec(self.base))

    def correlation_graph(self) -> CorrelationGraph:
        """Correlation graph implied by the latent structure"""
        cov_support = np.abs(self.latent_cov) > 0
        pairs = set()
        for a in range(self.latent_count):
            for b in range(self.latent_count):
                if not cov_support[a, b]:
                    continue
                for i in self.children[a]:
                    for j in self.children[b]:
                        if i != j:
                            pairs.add((min(i, j), max(i, j)))
        return CorrelationGraph(self.n, frozenset(pairs))

    def expanded_transfer_matrix(self) -> FirMatrix:
        """[[H, F], [0, 0]] over the n + L nodes of the transformed graph"""
        n, latent = self.n, self.latent_count
        width = max(self.h.coefficients.shape[2], self.f.coefficients.shape[2])
        coefficients = np.zeros((n + latent, n + latent, width))
        coefficients[:n, :n, :self.h.coefficients.shape[2]] = self.h.coefficients
        coefficients[:n, n:, :self.f.coefficients.shape[2]] = self.f.coefficients
        return TransferMatrix(coefficients)

    def full_noise_covariance(self) -> np.ndarray:
        n, latent = self.n, self.latent_count
        cov = np.zeros((n + latent, n + latent))
        cov[:n, :n] = np.diag(self.base)
        cov[n:, n:] = self.latent_cov
        return cov

    def full_psd(self, omega: float) -> np.ndarray:
        """PSD of the observed block computed through the (n + L)-node model"""
        h_full = self.expanded_transfer_matrix()
        phi = analytic_psd(h_full, self.full_noise_covariance().astype(complex), omega)
        return phi[:self.n, :self.n]


def build_lq_expansion(ldim: Ldim, gc: UndirectedGraph, seed: int) -> LatentExpansion:
    """One latent node per maximal clique; child set of latent l equals clique l"""
    cliques = maximal_cliques(gc)
    rng = np.random.default_rng(seed)
    coefficients = np.zeros((ldim.n, cliques.q, 2))
    low, high = LATENT_GAIN_RANGE
    for col, clique in enumerate(cliques):
        for child in sorted(clique):
            coefficients[child, col, 1] = rng.uniform(low, high)
    logger.debug("built L_q expansion with %d latent nodes", cliques.q)
    return LatentExpansion(
        h=ldim.h,
        f=FirMatrix(coefficients),
        base=ldim.noise.base,
        latent_cov=np.eye(cliques.q),
        children=tuple(cliques.cliques),
    )


def alternative_expansion(h: TransferMatrix, base: Sequence[float], gc: UndirectedGraph,
                          seed: int, mode: str = 'per_edge') -> LatentExpansion:
    """Non-minimal members of the transformation space.

    per_edge: one latent node per correlation edge.
    merged:   the first two maximal cliques share one latent node (L = q - 1).
    """
    rng = np.random.default_rng(seed)
    low, high = LATENT_GAIN_RANGE
    if mode == 'per_edge':
        groups = [frozenset(edge) for edge in sorted(gc.edges)]
    elif mode == 'merged':
        cliques = list(maximal_cliques(gc))
        if len(cliques) < 2:
            raise ValidationError("merged expansion needs at least two maximal cliques", q=len(cliques))
        groups = [cliques[0] | cliques[1]] + cliques[2:]
    else:
        raise ValidationError("unknown expansion mode", mode=mode)
    coefficients = np.zeros((h.n, len(groups), 2))
    for col, group in enumerate(groups):
        for child in sorted(group):
            coefficients[child, col, 1] = rng.uniform(low, high)
    return LatentExpansion(h, FirMatrix(coefficients), tuple(base), np.eye(len(groups)), tuple(groups))


def poly_expansion(h: TransferMatrix, spec, base: Sequence[float]) -> LatentExpansion:
    """Latent model over the active lifted monomials of a polynomial correlation spec"""
    return LatentExpansion(
        h=h,
        f=spec.latent_gains(),
        base=tuple(base),
        latent_cov=spec.latent_covariance(),
        children=tuple(spec.latent_children()),
    )


def noise_psd_of_expansion(exp: LatentExpansion, omega: float) -> np.ndarray:
    return noise_psd(exp.noise_spec(), omega)


def correlation_graph_from_psd(phi_e: Union[np.ndarray, Sequence[np.ndarray]], tau_supp: float = 1e-6) -> CorrelationGraph:
    """Edge (i, j) iff max over the sampled spectra of |Phi_ij| exceeds tau_supp * max entry"""
    stack = np.asarray(phi_e)
    if stack.ndim == 2:
        stack = stack[np.newaxis]
    magnitude = np.abs(stack).max(axis=0)
    scale = magnitude.max()
    n = magnitude.shape[0]
    if scale == 0:
        return CorrelationGraph(n)
    rows, cols = np.nonzero(np.triu(magnitude > tau_supp * scale, k=1))
    return CorrelationGraph(n, frozenset(zip(rows.tolist(), cols.tolist())))


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    max_deviation: float
    frequencies: int


def _observed_psd(model, omega: float) -> np.ndarray:
    if isinstance(model, LatentExpansion):
        return model.full_psd(omega)
    return model.psd(omega)


def check_equivalence(model_a, model_b, grid: Union[int, Sequence[float]] = 16, tol: float = 1e-10) -> EquivalenceReport:
    """Compare observed PSDs of two models (Ldim or LatentExpansion) over a frequency grid"""
    omegas = frequency_grid(grid) if isinstance(grid, int) else np.asarray(grid, dtype=float)
    if model_a.n != model_b.n:
        raise ValidationError("models observe different node counts", a=model_a.n, b=model_b.n)
    deviation = max(
        float(np.linalg.norm(_observed_psd(model_a, w) - _observed_psd(model_b, w), 'fro'))
        for w in omegas
    )
    return EquivalenceReport(equivalent=deviation <= tol, max_deviation=deviation, frequencies=len(omegas))


@dataclass
class SLSplit:
    """Sparse and low-rank parts of the IPSDM at one frequency"""
    s: np.ndarray
    l: np.ndarray
    omega: float

    def __iter__(self):
        return iter((self.s, self.l))

    @property
    def total(self) -> np.ndarray:
        return self.s + self.l


def analytic_sl_split(exp: LatentExpansion, omega: float, cond_limit: float = 1e12) -> SLSplit:
    """S = (I-H)^* D^-1 (I-H), L = -Psi^* Lambda^-1 Psi with D the observed base spectrum"""
    n = exp.n
    a = np.eye(n) - eval_transfer_matrix(exp.h, omega)
    d_inv = np.diag(1.0 / np.asarray(exp.base))
    s = _hermitize(a.conj().T @ d_inv @ a)
    if exp.latent_count == 0:
        return SLSplit(s=s, l=np.zeros((n, n), dtype=complex), omega=omega)
    f = exp.f.evaluate(omega)
    cov_condition = float(np.linalg.cond(exp.latent_cov))
    if not cov_condition < cond_limit:
        raise SingularSystemError("latent covariance is singular", omega=float(omega), condition=cov_condition)
    psi = f.conj().T @ d_inv @ a
    lam = f.conj().T @ d_inv @ f + np.linalg.inv(exp.latent_cov)
    lam_condition = float(np.linalg.cond(lam))
    if not lam_condition < cond_limit:
        raise SingularSystemError("Lambda is singular", omega=float(omega), condition=lam_condition)
    l = -psi.conj().T @ np.linalg.solve(lam, psi)
    return SLSplit(s=s, l=_hermitize(l), omega=omega)


@dataclass
class StructureReport:
    checks: Dict[str, bool] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def verify_structure(exp: LatentExpansion, gc: UndirectedGraph, other_seed: int = 1) -> StructureReport:
    """Clique/latent correspondence, L >= q and seed-independence of the transformed topology"""
    report = StructureReport()

    implied = exp.correlation_graph()
    missing = sorted(gc.edges - implied.edges)
    extra = sorted(implied.edges - gc.edges)
    report.checks['clique_latent'] = not missing and not extra
    for edge in missing:
        report.violations.append(f"correlation edge {edge} has no common latent parent")
    for edge in extra:
        report.violations.append(f"latent parents join {edge} outside the correlation graph")

    spectra = [noise_psd_of_expansion(exp, w) for w in frequency_grid(8)]
    report.checks['noise_spectrum'] = correlation_graph_from_psd(spectra).edges == gc.edges
    if not report.checks['noise_spectrum']:
        report.violations.append("support of Phi_e differs from the correlation graph")

    q = maximal_cliques(gc).q
    report.checks['latent_count'] = exp.latent_count >= q
    if exp.latent_count < q:
        report.violations.append(f"{exp.latent_count} latent nodes for {q} maximal cliques")

    reference = build_lq_expansion(exp.base_ldim(), gc, other_seed)
    same = reference.latent_count == exp.latent_count and np.array_equal(
        reference.expanded_transfer_matrix().support(), exp.expanded_transfer_matrix().support())
    report.checks['topology_unique'] = bool(same)
    if not same:
        report.violations.append("transformed topology differs from an independently seeded expansion")

    observed = np.array_equal(exp.expanded_transfer_matrix().support()[:exp.n, :exp.n], exp.h.support())
    report.checks['observed_topology'] = bool(observed)
    if not observed:
        report.violations.append("observed block of the transformed graph differs from H")
    return report


def latents_far_apart(exp: LatentExpansion, min_hops: int = 4) -> bool:
    """Every pair of latent nodes is at least `min_hops` apart in the undirected transformed graph"""
    if exp.latent_count < 2:
        return True
    support = exp.expanded_transfer_matrix().support()
    graph = nx.Graph()
    graph.add_nodes_from(range(support.shape[0]))
    rows, cols = np.nonzero(support)
    graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
    latents = range(exp.n, exp.n + exp.latent_count)
    for source in latents:
        reach = nx.single_source_shortest_path_length(graph, source, cutoff=min_hops - 1)
        if any(other in reach for other in latents if other != source):
            return False
    return True
