"""
Monomial lifting for polynomially correlated noise.

A driver vector v (m independent zero-mean symmetric sources) is lifted to all
monomials of total degree <= p. Monomials whose exponent parities differ are
uncorrelated, so the lifted moment matrix is block diagonal with at most 2^m
blocks once the basis is grouped by parity class.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb, factorial2

from errors_support import ModelFormatError, ValidationError
from latent_support import CorrelationGraph
from netmodel_support import FirMatrix

logger = logging.getLogger(__name__)

MAX_BASIS_SIZE = 1_000_000

# 0-based positions in the (m=2, p=3) basis [1, v1, v2, v1^2, v1v2, v2^2, v1^3, v1^2v2, v1v2^2, v2^3].
# "parity" follows the cluster derivation {y2, y7, y9}; "listed" is {y2, y5, y9}, which spans two clusters.
POLY_PRESETS: Dict[str, Tuple[int, ...]] = {
    'parity': (1, 6, 8),
    'listed': (1, 4, 8),
}

DRIVERS = ('gaussian', 'uniform')


@dataclass(frozen=True)
class MonomialBasis:
    m: int
    p: int
    entries: Tuple[Tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.entries)

    def index(self, alpha: Sequence[int]) -> int:
        return self.entries.index(tuple(alpha))

    def exponents(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=int).reshape(self.size, self.m)

    def describe(self, k: int) -> str:
        """Human-readable monomial, e.g. 'v1^2 v2'"""
        parts = []
        for i, power in enumerate(self.entries[k]):
            if power == 1:
                parts.append(f"v{i + 1}")
            elif power > 1:
                parts.append(f"v{i + 1}^{power}")
        return ' '.join(parts) or '1'


def basis_size(m: int, p: int) -> int:
    return int(comb(m + p, p, exact=True))


def enumerate_monomials(m: int, p: int) -> MonomialBasis:
    """Degree-major basis, lexicographic (descending exponent vectors) within a degree"""
    if m < 1 or p < 0:
        raise ValidationError("monomial basis needs m >= 1 and p >= 0", m=m, p=p)
    size = basis_size(m, p)
    if size > MAX_BASIS_SIZE:
        raise ValidationError("monomial basis too large", m=m, p=p, size=size, limit=MAX_BASIS_SIZE)
    entries = []
    for degree in range(p + 1):
        for combo in combinations_with_replacement(range(m), degree):
            alpha = [0] * m
            for i in combo:
                alpha[i] += 1
            entries.append(tuple(alpha))
    return MonomialBasis(m=m, p=p, entries=tuple(entries))


def gaussian_moment(p: int, sigma: float) -> float:
    """E[v^p] for v ~ N(0, sigma^2): zero for odd p, sigma^p (p-1)!! for even p"""
    if p < 0:
        raise ValidationError("moment order must be nonnegative", p=p)
    if p % 2:
        return 0.0
    if p == 0:
        return 1.0
    return float(sigma ** p * factorial2(p - 1, exact=True))


def symmetric_moment(p: int, sigma: float, driver: str = 'gaussian') -> float:
    if driver == 'gaussian':
        return gaussian_moment(p, sigma)
    if driver == 'uniform':
        # uniform on [-a, a] with a = sigma * sqrt(3)
        if p % 2:
            return 0.0
        return float((sigma * math.sqrt(3)) ** p / (p + 1))
    raise ValidationError("unknown driver distribution", driver=driver)


def monomial_second_moment(alpha: Sequence[int], beta: Sequence[int], sigma: float, driver: str = 'gaussian') -> float:
    if len(alpha) != len(beta):
        raise ValidationError("multi-indices must have the same length", alpha=list(alpha), beta=list(beta))
    return float(np.prod([symmetric_moment(a + b, sigma, driver) for a, b in zip(alpha, beta)]))


def monomial_mean(alpha: Sequence[int], sigma: float, driver: str = 'gaussian') -> float:
    return float(np.prod([symmetric_moment(a, sigma, driver) for a in alpha]))


def parity_class(alpha: Sequence[int]) -> Tuple[int, ...]:
    """1 marks an even exponent, 0 an odd one"""
    return tuple(1 - (a % 2) for a in alpha)


@dataclass(frozen=True)
class ParityPermutation:
    order: Tuple[int, ...]
    labels: Tuple[int, ...]
    clusters: Tuple[Tuple[int, ...], ...]
    patterns: Tuple[Tuple[int, ...], ...]

    @property
    def block_sizes(self) -> List[int]:
        return [len(c) for c in self.clusters]


def parity_permutation(basis: MonomialBasis) -> ParityPermutation:
    """Group monomials by parity class; clusters in order of first appearance"""
    patterns: List[Tuple[int, ...]] = []
    members: Dict[Tuple[int, ...], List[int]] = {}
    labels = []
    for k, alpha in enumerate(basis.entries):
        pattern = parity_class(alpha)
        if pattern not in members:
            patterns.append(pattern)
            members[pattern] = []
        members[pattern].append(k)
        labels.append(patterns.index(pattern))
    clusters = tuple(tuple(members[pattern]) for pattern in patterns)
    order = tuple(k for cluster in clusters for k in cluster)
    return ParityPermutation(order=order, labels=tuple(labels), clusters=clusters, patterns=tuple(patterns))


def _same_class_mask(basis: MonomialBasis) -> np.ndarray:
    labels = np.asarray(parity_permutation(basis).labels)
    return labels[:, np.newaxis] == labels[np.newaxis, :]


def lifted_moment_matrix(m: int, p: int, sigma: float, driver: str = 'gaussian') -> np.ndarray:
    """E[y y^T] for the lifted vector y; entries across parity classes are exactly zero"""
    basis = enumerate_monomials(m, p)
    mask = _same_class_mask(basis)
    moments = np.zeros((basis.size, basis.size))
    for k, alpha in enumerate(basis.entries):
        for l in range(k, basis.size):
            if mask[k, l]:
                moments[k, l] = moments[l, k] = monomial_second_moment(alpha, basis.entries[l], sigma, driver)
    return moments


def lifted_covariance_matrix(m: int, p: int, sigma: float, driver: str = 'gaussian') -> np.ndarray:
    """Covariance of the mean-centred lifted vector"""
    basis = enumerate_monomials(m, p)
    mean = np.array([monomial_mean(alpha, sigma, driver) for alpha in basis.entries])
    covariance = lifted_moment_matrix(m, p, sigma, driver) - np.outer(mean, mean)
    covariance[~_same_class_mask(basis)] = 0.0
    return covariance


def lift_series(v: np.ndarray, basis: MonomialBasis, columns: Optional[Sequence[int]] = None) -> np.ndarray:
    """Row k at time t is prod_i v_i(t)^alpha_ki; `columns` restricts the output rows"""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if v.shape[0] != basis.m:
        raise ValidationError("series has the wrong number of driver rows", rows=v.shape[0], m=basis.m)
    exponents = basis.exponents()
    if columns is not None:
        exponents = exponents[list(columns)]
    lifted = np.ones((exponents.shape[0], v.shape[1]))
    for k, alpha in enumerate(exponents):
        for i, power in enumerate(alpha):
            if power:
                lifted[k] *= v[i] ** power
    return lifted


@dataclass(frozen=True, eq=False)
class PolyCorrelationSpec:
    """Observed nodes driven by lifted monomials of a common driver vector v"""
    m: int
    p: int
    sigma: float
    gains: FirMatrix
    driver: str = 'gaussian'

    def __post_init__(self):
        expected = basis_size(self.m, self.p)
        if self.gains.shape[1] != expected:
            raise ModelFormatError("poly gains need one column per monomial", columns=self.gains.shape[1],
                                   expected=expected)
        if np.any(self.gains.coefficients[:, 0, :]):
            raise ModelFormatError("the constant monomial carries no gain")
        if self.sigma <= 0:
            raise ModelFormatError("driver standard deviation must be positive", sigma=self.sigma)
        if self.driver not in DRIVERS:
            raise ModelFormatError("unknown driver distribution", driver=self.driver)

    @property
    def basis(self) -> MonomialBasis:
        return enumerate_monomials(self.m, self.p)

    @property
    def active(self) -> Tuple[int, ...]:
        support = self.gains.support()
        return tuple(int(k) for k in np.flatnonzero(support.any(axis=0)))

    @property
    def n(self) -> int:
        return self.gains.shape[0]

    def latent_gains(self) -> FirMatrix:
        return FirMatrix(self.gains.coefficients[:, list(self.active), :].reshape(
            self.n, len(self.active), self.gains.coefficients.shape[2]))

    def latent_covariance(self) -> np.ndarray:
        covariance = lifted_covariance_matrix(self.m, self.p, self.sigma, self.driver)
        active = list(self.active)
        return covariance[np.ix_(active, active)]

    def latent_children(self) -> List[FrozenSet[int]]:
        support = self.gains.support()
        return [frozenset(np.flatnonzero(support[:, k]).tolist()) for k in self.active]

    def monomial_means(self) -> np.ndarray:
        basis = self.basis
        return np.array([monomial_mean(basis.entries[k], self.sigma, self.driver) for k in self.active])


def cluster_correlation_graph(spec: PolyCorrelationSpec) -> CorrelationGraph:
    """Edge (i, j) iff some parity cluster has both i and j among its children"""
    labels = parity_permutation(spec.basis).labels
    support = spec.gains.support()
    by_cluster: Dict[int, set] = {}
    for k in spec.active:
        by_cluster.setdefault(labels[k], set()).update(np.flatnonzero(support[:, k]).tolist())
    pairs = set()
    for children in by_cluster.values():
        ordered = sorted(children)
        for idx, a in enumerate(ordered):
            for b in ordered[idx + 1:]:
                pairs.add((a, b))
    return CorrelationGraph(spec.n, frozenset(pairs))
