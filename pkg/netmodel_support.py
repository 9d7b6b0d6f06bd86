"""
Linear dynamic influence models: FIR transfer matrices, noise specifications,
directed / undirected graphs and analytic spectra.

Conventions: nodes are 0-based. H[i, k] is the transfer function from node k
into node i, so a nonzero H[i, k] is the directed edge k -> i. A tap list
[c_0, ..., c_d] evaluates to sum_tau c_tau * exp(-j * omega * tau).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Protocol, Sequence, Tuple

import networkx as nx
import numpy as np

from errors_support import IllConditionedError, ModelFormatError, SingularSystemError, ValidationError

logger = logging.getLogger(__name__)

TAU_DET = 1e-8
# Frequencies scanned when an Ldim is constructed.
VALIDATION_GRID = 16
DEFAULT_COND_LIMIT = 1e12


@dataclass(frozen=True)
class TransferFunction:
    """Scalar FIR transfer function c_0 + c_1 z^-1 + ... + c_d z^-d"""
    taps: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        taps = tuple(float(c) for c in self.taps) or (0.0,)
        if not all(math.isfinite(c) for c in taps):
            raise ModelFormatError("transfer function taps must be finite", taps=list(taps))
        object.__setattr__(self, 'taps', taps)

    @property
    def degree(self) -> int:
        return len(self.taps) - 1

    @property
    def strictly_causal(self) -> bool:
        return self.taps[0] == 0.0

    @property
    def is_zero(self) -> bool:
        return not any(self.taps)

    def evaluate(self, omega: float) -> complex:
        phases = np.exp(-1j * omega * np.arange(len(self.taps)))
        return complex(np.dot(np.asarray(self.taps), phases))


class FirMatrix:
    """Rectangular matrix of FIR transfer functions, stored as a (rows, cols, taps) array"""

    def __init__(self, coefficients: np.ndarray):
        coefficients = np.array(coefficients, dtype=float)
        if coefficients.ndim == 2:
            coefficients = coefficients[:, :, np.newaxis]
        if coefficients.ndim != 3 or coefficients.shape[2] == 0:
            raise ModelFormatError("FIR coefficients must have shape (rows, cols, taps)",
                                   shape=list(coefficients.shape))
        if not np.all(np.isfinite(coefficients)):
            raise ModelFormatError("FIR coefficients must be finite")
        coefficients.setflags(write=False)
        self.coefficients = coefficients

    @classmethod
    def zeros(cls, rows: int, cols: int, taps: int = 2) -> 'FirMatrix':
        return cls(np.zeros((rows, cols, taps)))

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Dict[Tuple[int, int], Sequence[float]]) -> 'FirMatrix':
        width = max([len(t) for t in entries.values()] + [1])
        coefficients = np.zeros((rows, cols, width))
        for (i, k), taps in entries.items():
            if not (0 <= i < rows and 0 <= k < cols):
                raise ModelFormatError("transfer entry index out of range", row=i, col=k)
            coefficients[i, k, :len(taps)] = taps
        return cls(coefficients)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.coefficients.shape[0], self.coefficients.shape[1]

    @property
    def max_delay(self) -> int:
        nonzero = np.flatnonzero(np.any(self.coefficients != 0, axis=(0, 1)))
        return int(nonzero[-1]) if nonzero.size else 0

    @property
    def strictly_causal(self) -> bool:
        return not np.any(self.coefficients[:, :, 0])

    def entry(self, i: int, k: int) -> TransferFunction:
        taps = self.coefficients[i, k, :self.max_delay + 1]
        return TransferFunction(tuple(taps))

    def lag(self, tau: int) -> np.ndarray:
        if tau >= self.coefficients.shape[2]:
            return np.zeros(self.shape)
        return self.coefficients[:, :, tau]

    def support(self) -> np.ndarray:
        return np.any(self.coefficients != 0, axis=2)

    def nonzero_entries(self) -> List[Tuple[int, int]]:
        rows, cols = np.nonzero(self.support())
        return list(zip(rows.tolist(), cols.tolist()))

    def evaluate(self, omega: float) -> np.ndarray:
        phases = np.exp(-1j * omega * np.arange(self.coefficients.shape[2]))
        return self.coefficients @ phases

    def scaled(self, factor: float) -> 'FirMatrix':
        return type(self)(self.coefficients * factor)

    def __add__(self, other: 'FirMatrix') -> 'FirMatrix':
        width = max(self.coefficients.shape[2], other.coefficients.shape[2])
        a = np.zeros(self.shape + (width,))
        b = np.zeros(other.shape + (width,))
        a[:, :, :self.coefficients.shape[2]] = self.coefficients
        b[:, :, :other.coefficients.shape[2]] = other.coefficients
        return type(self)(a + b)

    def __eq__(self, other) -> bool:
        return isinstance(other, FirMatrix) and self.coefficients.shape == other.coefficients.shape \
            and np.array_equal(self.coefficients, other.coefficients)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(shape={self.shape}, taps={self.coefficients.shape[2]})"


class TransferMatrix(FirMatrix):
    """Square FIR matrix H with an identically zero diagonal"""

    def __init__(self, coefficients: np.ndarray):
        super().__init__(coefficients)
        rows, cols = self.shape
        if rows != cols:
            raise ModelFormatError("transfer matrix must be square", shape=[rows, cols])
        if np.any(self.coefficients[np.arange(rows), np.arange(rows), :]):
            raise ModelFormatError("transfer matrix diagonal must be zero (no self-loops)")

    @classmethod
    def zeros(cls, n: int, taps: int = 2) -> 'TransferMatrix':
        return cls(np.zeros((n, n, taps)))

    @classmethod
    def from_edges(cls, n: int, edges: Dict[Tuple[int, int], Sequence[float]]) -> 'TransferMatrix':
        """Build from {(source, target): taps}, i.e. H[target, source] = taps"""
        entries = {(target, source): taps for (source, target), taps in edges.items()}
        fir = FirMatrix.from_entries(n, n, entries)
        return cls(fir.coefficients)

    @property
    def n(self) -> int:
        return self.shape[0]


class CorrelationSource(Protocol):
    """Anything that realises correlated noise through strict-parent latent nodes"""

    def latent_gains(self) -> FirMatrix:
        ...

    def latent_covariance(self) -> np.ndarray:
        ...

    def latent_children(self) -> List[FrozenSet[int]]:
        ...


@dataclass(frozen=True)
class NoiseSpec:
    """White, mutually independent base noise plus an optional correlation source"""
    base: Tuple[float, ...]
    correlation: Optional[CorrelationSource] = None

    def __post_init__(self):
        base = tuple(float(v) for v in self.base)
        if any(not math.isfinite(v) or v < 0 for v in base):
            raise ModelFormatError("base noise variances must be finite and nonnegative", base=list(base))
        object.__setattr__(self, 'base', base)
        if self.correlation is not None:
            rows, _ = self.correlation.latent_gains().shape
            if rows != len(base):
                raise ModelFormatError("latent gain rows must match the node count",
                                       rows=rows, n=len(base))

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def latent_count(self) -> int:
        return 0 if self.correlation is None else self.correlation.latent_gains().shape[1]


def noise_psd(noise: NoiseSpec, omega: float) -> np.ndarray:
    """Phi_e(omega) = diag(base) + F(omega) Phi_h F(omega)^*"""
    phi = np.diag(np.asarray(noise.base, dtype=complex))
    if noise.correlation is not None and noise.latent_count:
        f = noise.correlation.latent_gains().evaluate(omega)
        phi = phi + f @ noise.correlation.latent_covariance() @ f.conj().T
    return _hermitize(phi)


@dataclass(frozen=True)
class Ldim:
    """The pair (H, e) whose output obeys x = H x + e"""
    h: TransferMatrix
    noise: NoiseSpec

    def __post_init__(self):
        if self.h.n != self.noise.n:
            raise ModelFormatError("transfer matrix and noise sizes differ", h=self.h.n, noise=self.noise.n)
        self.validate(VALIDATION_GRID)

    @property
    def n(self) -> int:
        return self.h.n

    def noise_psd(self, omega: float) -> np.ndarray:
        return noise_psd(self.noise, omega)

    def psd(self, omega: float) -> np.ndarray:
        return analytic_psd(self, self.noise_psd(omega), omega)

    def ipsdm(self, omega: float) -> np.ndarray:
        return analytic_ipsdm(self, self.noise_psd(omega), omega)

    def validate(self, grid_size: int = 64) -> 'Ldim':
        """Raise ValidationError unless the model is well posed and detectable on the grid"""
        report = check_well_posed(self, grid_size)
        if not report.well_posed:
            raise ValidationError("model is not well posed", min_abs_det=report.min_abs_det)
        for omega in frequency_grid(grid_size):
            smallest = float(np.linalg.eigvalsh(self.noise_psd(omega))[0])
            if smallest <= 0:
                raise ValidationError("noise spectrum is not positive definite",
                                      omega=float(omega), min_eigenvalue=smallest)
        return self


def eval_transfer_matrix(h: FirMatrix, omega: float) -> np.ndarray:
    return h.evaluate(omega)


def frequency_grid(size: int) -> np.ndarray:
    """`size` uniformly spaced frequencies in (-pi, pi]"""
    return -np.pi + 2 * np.pi * np.arange(1, size + 1) / size


@dataclass(frozen=True)
class WellPosedness:
    well_posed: bool
    min_abs_det: float
    grid_size: int


def check_well_posed(model, grid_size: int = 512, tau_det: float = TAU_DET) -> WellPosedness:
    """Scan |det(I - H(e^jw))| over a uniform grid; accepts an Ldim or a TransferMatrix"""
    if grid_size < 8:
        raise ValidationError("grid_size must be at least 8", grid_size=grid_size)
    h = model.h if isinstance(model, Ldim) else model
    identity = np.eye(h.n)
    minimum = min(abs(np.linalg.det(identity - h.evaluate(w))) for w in frequency_grid(grid_size))
    logger.debug("well-posedness scan: min |det(I-H)| = %.3e over %d points", minimum, grid_size)
    return WellPosedness(well_posed=bool(minimum > tau_det), min_abs_det=float(minimum), grid_size=grid_size)


def analytic_ipsdm(model, phi_e: np.ndarray, omega: float, cond_limit: float = DEFAULT_COND_LIMIT) -> np.ndarray:
    """Phi_x^-1 = (I - H)^* Phi_e^-1 (I - H)"""
    h = model.h if isinstance(model, Ldim) else model
    condition = float(np.linalg.cond(phi_e))
    if not condition < cond_limit:
        raise IllConditionedError("noise spectrum is not invertible", omega=float(omega), condition=condition)
    a = np.eye(h.n) - eval_transfer_matrix(h, omega)
    return _hermitize(a.conj().T @ np.linalg.solve(phi_e, a))


def analytic_psd(model, phi_e: np.ndarray, omega: float, cond_limit: float = DEFAULT_COND_LIMIT) -> np.ndarray:
    """Phi_x = (I - H)^-1 Phi_e (I - H)^-*"""
    h = model.h if isinstance(model, Ldim) else model
    a = np.eye(h.n) - eval_transfer_matrix(h, omega)
    condition = float(np.linalg.cond(a))
    if not condition < cond_limit:
        raise SingularSystemError("I - H is singular at this frequency", omega=float(omega), condition=condition)
    inverse = np.linalg.inv(a)
    return _hermitize(inverse @ phi_e @ inverse.conj().T)


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.conj().T) / 2


def _ordered(i: int, j: int) -> Tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class UndirectedGraph:
    """Simple undirected graph; edges stored as (i, j) with i < j"""
    n: int
    edges: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        normalized = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ModelFormatError("graphs carry no self-loops", node=i)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ModelFormatError("edge endpoint out of range", edge=[i, j], n=self.n)
            normalized.add(_ordered(i, j))
        object.__setattr__(self, 'edges', frozenset(normalized))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Tuple[int, int]]):
        return cls(n, frozenset(pairs))

    def sorted_edges(self) -> List[Tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        matrix = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            matrix[i, j] = matrix[j, i] = True
        return matrix

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    def __len__(self) -> int:
        return len(self.edges)


class Topology(UndirectedGraph):
    pass


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph with edges (source, target)"""
    n: int
    edges: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        edges = frozenset((int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if a == b:
                raise ModelFormatError("graphs carry no self-loops", node=a)
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ModelFormatError("edge endpoint out of range", edge=[a, b], n=self.n)
        object.__setattr__(self, 'edges', edges)

    @classmethod
    def from_transfer_matrix(cls, h: TransferMatrix) -> 'DirectedGraph':
        return cls(h.n, frozenset((k, i) for i, k in h.nonzero_entries()))

    def parents(self, node: int) -> FrozenSet[int]:
        return frozenset(a for a, b in self.edges if b == node)

    def children(self, node: int) -> FrozenSet[int]:
        return frozenset(b for a, b in self.edges if a == node)

    def spouses(self, node: int) -> FrozenSet[int]:
        shared = set()
        for child in self.children(node):
            shared |= self.parents(child)
        shared.discard(node)
        return frozenset(shared)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph


def topology_of(g: DirectedGraph) -> Topology:
    return Topology(g.n, frozenset(_ordered(a, b) for a, b in g.edges))


def kin_graph(g: DirectedGraph) -> Topology:
    """Join every node with its parents, children and spouses"""
    pairs = set(topology_of(g).edges)
    for child in range(g.n):
        parents = sorted(g.parents(child))
        for idx, a in enumerate(parents):
            for b in parents[idx + 1:]:
                pairs.add(_ordered(a, b))
    return Topology(g.n, frozenset(pairs))
