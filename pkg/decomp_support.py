"""
Sparse plus low-rank splitting of real skew-symmetric matrices.

    minimize   t ||S||_1 + (1 - t) ||L||_*    subject to   S + L = C

solved by an inexact augmented Lagrangian method: element-wise soft
thresholding for S, singular value thresholding for L, a multiplier update on
the coupling constraint and a geometrically growing penalty. A sweep over
t = eps, 2 eps, ..., 1 tracks how the solution moves; flat stretches of that
trace (zero regions) locate the penalty range where the split is exact.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from errors_support import ConvergenceError, NumericalError, RegionSelectionError, ValidationError

logger = logging.getLogger(__name__)

SUFFICIENT_BOUND = 1.0 / 12.0
SKEW_TOL = 1e-10
# Entries at or below SUPPORT_FLOOR * reference scale never count as support.
SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.25
    rho_growth: float = 1.2
    mu_max_ratio: float = 1e7
    max_iters: int = 3000
    primal_tol: float = 1e-7
    dual_tol: float = 1e-6
    rank_tol: float = 1e-8
    gap_tol: float = 1e-4

    def __post_init__(self):
        for name in ('rho', 'primal_tol', 'dual_tol', 'rank_tol', 'gap_tol'):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive", **{name: getattr(self, name)})
        if self.rho_growth < 1 or self.mu_max_ratio < 1 or self.max_iters < 1:
            raise ValidationError("rho_growth and mu_max_ratio must be >= 1, max_iters >= 1")

    @classmethod
    def from_run_config(cls, config) -> 'SolverConfig':
        return cls(rho=config.rho, rho_growth=config.rho_growth, mu_max_ratio=config.mu_max_ratio,
                   max_iters=config.max_iters, primal_tol=config.primal_tol, dual_tol=config.dual_tol,
                   rank_tol=config.rank_tol, gap_tol=config.gap_tol)


def skew_part(matrix: np.ndarray) -> np.ndarray:
    return (matrix - matrix.T) / 2


def is_skew(matrix: np.ndarray, tol: float = SKEW_TOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or np.iscomplexobj(matrix):
        return False
    return bool(np.max(np.abs(matrix + matrix.T), initial=0.0) <= tol * max(1.0, np.max(np.abs(matrix), initial=0.0)))


def soft_threshold(matrix: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(matrix) * np.maximum(np.abs(matrix) - tau, 0.0)


def svd(matrix: np.ndarray, compute_uv: bool = True):
    """numpy's divide-and-conquer SVD, falling back to LAPACK gesvd when it fails to converge"""
    matrix = np.asarray(matrix)
    try:
        return np.linalg.svd(matrix, full_matrices=False, compute_uv=compute_uv)
    except np.linalg.LinAlgError:
        logger.debug("gesdd failed on a %s matrix, retrying with gesvd", matrix.shape)
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, compute_uv=compute_uv, lapack_driver='gesvd')
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("SVD did not converge", shape=matrix.shape, reason=str(exc)) from exc


def singular_value_threshold(matrix: np.ndarray, tau: float) -> Tuple[np.ndarray, int]:
    u, s, vt = svd(matrix)
    shrunk = np.maximum(s - tau, 0.0)
    rank = int(np.count_nonzero(shrunk))
    return (u[:, :rank] * shrunk[:rank]) @ vt[:rank], rank


@dataclass
class SplitResult:
    """Solution of one splitting problem; unpacks as (S, L)"""
    s: np.ndarray
    l: np.ndarray
    t: float
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    duality_gap: float = 0.0
    converged: bool = True

    def __iter__(self):
        return iter((self.s, self.l))


def _relative_gap(c: np.ndarray, s: np.ndarray, l: np.ndarray, y: np.ndarray, t: float) -> float:
    """Gap against the dual point obtained by scaling Y into the dual-feasible set"""
    primal = t * np.abs(s).sum() + (1 - t) * svd(l, compute_uv=False).sum()
    limits = [1.0]
    if t > 0:
        limits.append(np.max(np.abs(y)) / t)
    if t < 1:
        limits.append(svd(y, compute_uv=False).max(initial=0.0) / (1 - t))
    dual = float(np.sum(y * c)) / max(limits)
    return float((primal - dual) / max(primal, np.finfo(float).tiny))


def solve_split(c: np.ndarray, t: float, cfg: Optional[SolverConfig] = None) -> SplitResult:
    """Minimise t||S||_1 + (1-t)||L||_* subject to S + L = C for a real skew-symmetric C"""
    cfg = cfg or SolverConfig()
    c = np.asarray(c)
    if not is_skew(c):
        raise ValidationError("splitting needs a real skew-symmetric matrix")
    if not 0 <= t <= 1:
        raise ValidationError("t must lie in [0, 1]", t=t)
    c = skew_part(c.astype(float))
    zeros = np.zeros_like(c)
    c_fro = np.linalg.norm(c, 'fro')
    if t == 0 or c_fro == 0:
        return SplitResult(s=c.copy(), l=zeros, t=t)
    if t == 1:
        return SplitResult(s=zeros, l=c.copy(), t=t)

    # objective scaled by 1/(1-t): lam ||S||_1 + ||L||_*
    lam = t / (1 - t)
    spectral = float(svd(c, compute_uv=False)[0])
    y = c / max(spectral, np.max(np.abs(c)) / lam)
    mu = cfg.rho / spectral
    mu_max = mu * cfg.mu_max_ratio
    s, l = zeros.copy(), zeros.copy()
    primal = dual = np.inf
    for iteration in range(1, cfg.max_iters + 1):
        s_prev, l_prev = s, l
        s = skew_part(soft_threshold(c - l + y / mu, lam / mu))
        l, _ = singular_value_threshold(c - s + y / mu, 1.0 / mu)
        l = skew_part(l)
        residual = c - s - l
        y = y + mu * residual
        primal = np.linalg.norm(residual, 'fro') / c_fro
        step = (np.linalg.norm(s - s_prev, 'fro') + np.linalg.norm(l - l_prev, 'fro')) / c_fro
        dual = mu * np.linalg.norm(l - l_prev, 'fro')
        if iteration % 200 == 0:
            logger.debug("t=%.4f iter %d primal %.2e step %.2e", t, iteration, primal, step)
        if primal < cfg.primal_tol and step < cfg.dual_tol:
            gap = _relative_gap(c, s, l, (1 - t) * y, t)
            if abs(gap) <= cfg.gap_tol:
                return SplitResult(s=s, l=l, t=t, iterations=iteration, primal_residual=float(primal),
                                   dual_residual=float(dual), duality_gap=gap)
        mu = min(mu * cfg.rho_growth, mu_max)

    gap = _relative_gap(c, s, l, (1 - t) * y, t)
    partial = SplitResult(s=s, l=l, t=t, iterations=cfg.max_iters, primal_residual=float(primal),
                          dual_residual=float(dual), duality_gap=gap, converged=False)
    reason = "duality gap stayed open" if primal < cfg.primal_tol else "splitting solver did not converge"
    raise ConvergenceError(reason, partial=partial, t=t, iterations=cfg.max_iters,
                           primal_residual=float(primal), dual_residual=float(dual), duality_gap=gap)


def solve_split_gamma(c: np.ndarray, gamma: float, cfg: Optional[SolverConfig] = None) -> SplitResult:
    """gamma ||S||_1 + ||L||_*, solved through t = gamma / (1 + gamma)"""
    if gamma < 0:
        raise ValidationError("gamma must be nonnegative", gamma=gamma)
    return solve_split(c, gamma / (1 + gamma), cfg)


def support_mask(matrix: np.ndarray, tau: float, reference: float = 1.0) -> np.ndarray:
    """Entries above tau times the largest entry and above SUPPORT_FLOOR * reference"""
    magnitude = np.abs(np.asarray(matrix))
    scale = magnitude.max(initial=0.0)
    return magnitude > max(tau * scale, SUPPORT_FLOOR * reference)


def deg_max(matrix: np.ndarray, tau_supp: float = 1e-6, reference: float = 1.0) -> int:
    """Largest number of supported entries in any row or column"""
    mask = support_mask(matrix, tau_supp, reference)
    if not mask.any():
        return 0
    return int(max(mask.sum(axis=0).max(), mask.sum(axis=1).max()))


def incoherence(matrix: np.ndarray, tau_rank: float = 1e-6) -> float:
    """max_k ||U U^T e_k|| over the column space of the truncated SVD"""
    u, s, _ = svd(matrix)
    if s.size == 0 or s[0] == 0:
        return 0.0
    basis = u[:, s > tau_rank * s[0]]
    return float(np.sqrt(np.max(np.sum(np.abs(basis) ** 2, axis=1))))


def numerical_rank(matrix: np.ndarray, tol: float, scale: Optional[float] = None) -> int:
    s = svd(matrix, compute_uv=False)
    reference = scale if scale is not None else (s[0] if s.size else 0.0)
    if reference == 0:
        return 0
    return int(np.count_nonzero(s > tol * reference))


@dataclass(frozen=True)
class SufficiencyCheck:
    holds: bool
    product: float
    degree: int
    incoherence: float


def check_sufficient_condition(s: np.ndarray, l: np.ndarray, tau_supp: float = 1e-6,
                               tau_rank: float = 1e-6, reference: float = 1.0) -> SufficiencyCheck:
    """deg_max(S) * inc(L) < 1/12"""
    degree = deg_max(s, tau_supp, reference)
    inc = incoherence(l, tau_rank)
    product = degree * inc
    return SufficiencyCheck(holds=product < SUFFICIENT_BOUND, product=product, degree=degree, incoherence=inc)


@dataclass
class SweepRecord:
    t: float
    s: np.ndarray
    l: np.ndarray
    diff: float = 0.0
    tol: Optional[float] = None
    deg_max: int = 0
    inc: float = 0.0
    rank: int = 0
    primal_residual: float = 0.0
    iterations: int = 0
    converged: bool = True
    error: Optional[str] = None


@dataclass(frozen=True)
class ZeroRegion:
    start: int
    end: int
    t_start: float
    t_end: float

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def median_index(self) -> int:
        return (self.start + self.end) // 2

    def to_dict(self) -> dict:
        return {'t_start': self.t_start, 't_end': self.t_end, 'points': self.length}


@dataclass
class SweepResult:
    eps: float
    c_norm: float
    records: List[SweepRecord] = field(default_factory=list)
    regions: List[ZeroRegion] = field(default_factory=list)
    t0: Optional[float] = None

    @property
    def ts(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def diffs(self) -> np.ndarray:
        return np.array([r.diff for r in self.records])

    @property
    def tols(self) -> Optional[np.ndarray]:
        if not self.records or self.records[0].tol is None:
            return None
        return np.array([r.tol for r in self.records])

    @property
    def failures(self) -> List[float]:
        return [r.t for r in self.records if not r.converged]

    def record_at(self, t: float) -> SweepRecord:
        return min(self.records, key=lambda r: abs(r.t - t))


def truth_error(s: np.ndarray, l: np.ndarray, truth: Tuple[np.ndarray, np.ndarray]) -> float:
    """||S - S~||/||S~|| + ||L - L~||/||L~||, absolute where a true part is zero"""
    total = 0.0
    for estimate, reference in ((s, truth[0]), (l, truth[1])):
        error = np.linalg.norm(estimate - reference, 'fro')
        norm = np.linalg.norm(reference, 'fro')
        total += error / norm if norm > 0 else error
    return float(total)


def _solve_record(c: np.ndarray, t: float, cfg: SolverConfig) -> SweepRecord:
    try:
        result = solve_split(c, t, cfg)
    except ConvergenceError as exc:
        result = exc.partial
        logger.warning("solver did not converge at t=%.4f (primal residual %.2e)", t, result.primal_residual)
        return SweepRecord(t=t, s=result.s, l=result.l, primal_residual=result.primal_residual,
                           iterations=result.iterations, converged=False, error=exc.message)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        logger.warning("solver failed at t=%.4f: %s", t, exc)
        return SweepRecord(t=t, s=np.full_like(c, np.nan), l=np.full_like(c, np.nan), converged=False,
                           error=str(exc))
    return SweepRecord(t=t, s=result.s, l=result.l, primal_residual=result.primal_residual,
                       iterations=result.iterations, converged=result.converged)


def sweep(c: np.ndarray, eps: float = 0.01, cfg: Optional[SolverConfig] = None,
          truth: Optional[Tuple[np.ndarray, np.ndarray]] = None, threads: Optional[int] = None,
          tau_supp: float = 1e-6, tau_rank: float = 1e-6,
          on_step: Optional[Callable[[float], None]] = None, stop_below: Optional[float] = None) -> SweepResult:
    """Solve on t = eps, 2 eps, ..., 1 and trace diff_t (and tol_t when the truth is known)

    With a truth and `stop_below`, a sequential sweep ends at the first t whose tol_t falls below it.
    """
    cfg = cfg or SolverConfig()
    if not 0 < eps <= 0.5:
        raise ValidationError("eps must lie in (0, 0.5]", eps=eps)
    steps = int(round(1.0 / eps))
    if abs(steps * eps - 1.0) > 1e-9:
        raise ValidationError("1/eps must be an integer", eps=eps)
    c = np.asarray(c, dtype=float)
    if not is_skew(c):
        raise ValidationError("sweep needs a real skew-symmetric matrix")
    grid = [k / steps for k in range(1, steps + 1)]
    logger.info("sweeping %d penalty values (eps=%g)", steps, eps)

    def run(t: float) -> SweepRecord:
        record = _solve_record(c, t, cfg)
        if on_step:
            on_step(t)
        return record

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, grid))
    else:
        records = []
        for t in grid:
            record = run(t)
            records.append(record)
            if stop_below is not None and truth is not None and np.all(np.isfinite(record.s)) \
                    and truth_error(record.s, record.l, truth) < stop_below:
                logger.info("tol_t below %g at t=%.4f, stopping the sweep", stop_below, t)
                break

    c_norm = float(np.linalg.norm(c, 'fro'))
    spectral = float(svd(c, compute_uv=False)[0]) if c.size else 0.0
    s_prev, l_prev = c, np.zeros_like(c)
    for record in records:
        if not (np.all(np.isfinite(record.s)) and np.all(np.isfinite(record.l))):
            record.diff = np.inf
            record.tol = np.inf if truth is not None else None
            continue
        record.diff = float(np.linalg.norm(s_prev - record.s, 'fro') + np.linalg.norm(l_prev - record.l, 'fro'))
        s_prev, l_prev = record.s, record.l
        if truth is not None:
            record.tol = truth_error(record.s, record.l, truth)
        record.deg_max = deg_max(record.s, tau_supp, c_norm)
        record.inc = incoherence(record.l, tau_rank)
        record.rank = numerical_rank(record.l, cfg.rank_tol, scale=spectral)
    result = SweepResult(eps=eps, c_norm=c_norm, records=records)
    logger.info("sweep finished, %d non-converged points", len(result.failures))
    return result


def _runs_below(sr: SweepResult, threshold: float, min_run: int) -> List[ZeroRegion]:
    regions = []
    start = None
    diffs = list(sr.diffs) + [np.inf]
    for index, value in enumerate(diffs):
        if value <= threshold and index < len(sr.records):
            if start is None:
                start = index
            continue
        if start is not None and index - start >= min_run:
            regions.append(ZeroRegion(start, index - 1, sr.records[start].t, sr.records[index - 1].t))
        start = None
    return regions


def zero_region_threshold(sr: SweepResult, tau_zero: float = 1e-3, rule: str = 'norm') -> float:
    """tau_zero * ||C||_F ('norm') or tau_zero * median of the finite diffs ('median')"""
    if rule == 'norm':
        return tau_zero * sr.c_norm
    if rule == 'median':
        finite = sr.diffs[np.isfinite(sr.diffs)]
        return tau_zero * float(np.median(finite)) if finite.size else 0.0
    raise ValidationError("unknown zero-region rule", rule=rule)


def zero_regions(sr: SweepResult, tau_zero: float = 1e-3, min_run: int = 2, rule: str = 'norm') -> List[ZeroRegion]:
    """Maximal runs of at least `min_run` grid points with diff_t below the rule's threshold"""
    return _runs_below(sr, zero_region_threshold(sr, tau_zero, rule), min_run)


def _region_rule_disagreement(sr: SweepResult, regions: List[ZeroRegion], tau_zero: float,
                              min_run: int) -> Optional[str]:
    alternative = zero_regions(sr, tau_zero, min_run, rule='median')
    if [(r.start, r.end) for r in alternative] == [(r.start, r.end) for r in regions]:
        return None
    return (f"median-diff rule finds {len(alternative)} zero region(s) "
            f"{[(round(r.t_start, 4), round(r.t_end, 4)) for r in alternative]}, "
            f"the ||C||_F rule finds {len(regions)}")


@dataclass
class RegionSelection:
    region: ZeroRegion
    t0: float
    index: int
    sufficient: SufficiencyCheck
    regions: List[ZeroRegion]
    flags: List[str] = field(default_factory=list)


def select_middle_region(sr: SweepResult, tau_zero: float = 1e-3, min_run: int = 2,
                         tau_supp: float = 1e-6, tau_rank: float = 1e-6) -> RegionSelection:
    """Pick the middle zero region and its median grid point t0, then re-check deg_max * inc < 1/12"""
    regions = zero_regions(sr, tau_zero, min_run)
    sr.regions = regions
    disagreement = _region_rule_disagreement(sr, regions, tau_zero, min_run)
    if len(regions) < 3:
        raise RegionSelectionError("fewer than three zero regions in the diff trace",
                                   regions=[r.to_dict() for r in regions], partial=sr, median_rule=disagreement)
    flags = []
    if disagreement:
        flags.append(disagreement)
        logger.warning(disagreement)

    def check(region: ZeroRegion) -> SufficiencyCheck:
        record = sr.records[region.median_index]
        return check_sufficient_condition(record.s, record.l, tau_supp, tau_rank, sr.c_norm)

    if len(regions) == 3:
        chosen = regions[1]
    else:
        interior = regions[1:-1]
        passing = [r for r in interior if check(r).holds]
        candidates = passing or interior
        chosen = min(candidates, key=lambda r: abs(sr.records[r.median_index].t - 0.5))
        flags.append(f"{len(regions)} zero regions found; chose the one at t={sr.records[chosen.median_index].t:.2f}")
        logger.warning(flags[-1])

    index = chosen.median_index
    sufficient = check(chosen)
    if not sufficient.holds:
        flags.append(f"deg_max * inc = {sufficient.product:.3f} is not below 1/12 at the chosen t")
        logger.warning(flags[-1])
    sr.t0 = sr.records[index].t
    logger.info("middle zero region [%.2f, %.2f], t0=%.2f", chosen.t_start, chosen.t_end, sr.t0)
    return RegionSelection(region=chosen, t0=sr.t0, index=index, sufficient=sufficient, regions=regions, flags=flags)
