"""
Property suites run by `netrecon.py verify <suite>`.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from decomp_support import SolverConfig, SweepResult, check_sufficient_condition, numerical_rank, sweep
from errors_support import NetReconError, RegionSelectionError, ValidationError
from generator_support import GeneratedModel, generate_model, planted_split
from latent_support import (
    LatentExpansion, alternative_expansion, analytic_sl_split, check_equivalence, maximal_cliques, verify_structure,
)
from poly_lift_support import enumerate_monomials, monomial_second_moment, parity_permutation
from reconstruct_support import PipelineSettings, end_to_end, evaluate_edges, topology_from_sparse

logger = logging.getLogger(__name__)

BLOCKDIAG_CASES = ((1, 2), (2, 3), (3, 2))
PARITY_ORDER_2_3 = (0, 3, 5, 1, 6, 8, 2, 7, 9, 4)
PLANTED_N = 300
PLANTED_SUCCESS_TOL = 1e-4


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    name: str
    passed: bool
    detail: str = ''

    def to_dict(self) -> dict:
        return {'suite': self.suite, 'name': self.name, 'passed': self.passed, 'detail': self.detail}


def _models(config, seeds: int, **overrides) -> List[GeneratedModel]:
    models = []
    for offset in range(seeds):
        models.append(generate_model(config.updated(seed=config.seed + offset, **overrides)))
    return models


def suite_equivalence(config, tick: Callable[[], None]) -> List[PropertyResult]:
    results = []
    for model in _models(config, config.seeds, n=min(config.n, 29), q=min(config.q, 3)):
        report = check_equivalence(model.ldim, model.expansion, grid=16, tol=1e-10)
        results.append(PropertyResult('equivalence', f"seed {model.seed}", report.equivalent,
                                      f"max deviation {report.max_deviation:.2e}"))
        tick()
    return results


def suite_structure(config, tick) -> List[PropertyResult]:
    results = []
    for model in _models(config, config.seeds):
        report = verify_structure(model.expansion, model.correlation_graph, other_seed=model.seed + 1)
        results.append(PropertyResult('structure', f"seed {model.seed}", report.passed,
                                      '; '.join(report.violations) or f"q={model.expansion.latent_count}"))
        if model.expansion.latent_count:
            exp = model.expansion
            mutated = LatentExpansion(h=exp.h, f=type(exp.f)(exp.f.coefficients[:, 1:, :]), base=exp.base,
                                      latent_cov=exp.latent_cov[1:, 1:])
            caught = not verify_structure(mutated, model.correlation_graph).checks['clique_latent']
            results.append(PropertyResult('structure', f"seed {model.seed} deleted latent", caught,
                                          "violation detected" if caught else "deleted latent went unnoticed"))
        tick()
    return results


def suite_blockdiag(config, tick) -> List[PropertyResult]:
    results = []
    for m, p in BLOCKDIAG_CASES:
        basis = enumerate_monomials(m, p)
        permutation = parity_permutation(basis)
        moments = np.array([[monomial_second_moment(a, b, config.sigma) for b in basis.entries] for a in basis.entries])
        labels = np.asarray(permutation.labels)
        off_block = moments[labels[:, None] != labels[None, :]]
        passed = bool(np.all(off_block == 0.0)) and len(permutation.clusters) <= 2 ** m
        results.append(PropertyResult('blockdiag', f"(m={m}, p={p})", passed,
                                      f"{len(permutation.clusters)} blocks of sizes {permutation.block_sizes}"))
        tick()
    permutation = parity_permutation(enumerate_monomials(2, 3))
    results.append(PropertyResult('blockdiag', "(2,3) ordering", permutation.order == PARITY_ORDER_2_3,
                                  f"order {[k + 1 for k in permutation.order]}"))
    results.append(PropertyResult('blockdiag', "(2,3) cluster {y2,y7,y9}", (1, 6, 8) in permutation.clusters,
                                  f"clusters {[[k + 1 for k in c] for c in permutation.clusters]}"))
    return results


def suite_identity(config, tick) -> List[PropertyResult]:
    results = []
    omega = config.omega_value
    for model in _models(config, config.seeds):
        split = analytic_sl_split(model.expansion, omega)
        error = float(np.linalg.norm(split.total - model.ldim.ipsdm(omega), 'fro'))
        results.append(PropertyResult('identity', f"seed {model.seed}", error < 1e-9, f"||S+L-IPSDM|| = {error:.2e}"))
        tick()
    return results


def suite_pigeonhole(config, tick) -> List[PropertyResult]:
    results = []
    for model in _models(config, config.seeds, q=max(config.q, 2)):
        gc = model.correlation_graph
        q = maximal_cliques(gc).q
        base = model.expansion.base
        per_edge = alternative_expansion(model.ldim.h, base, gc, model.seed, mode='per_edge')
        valid = per_edge.latent_count >= q and per_edge.correlation_graph().edges == gc.edges
        results.append(PropertyResult('pigeonhole', f"seed {model.seed} per-edge", valid,
                                      f"L={per_edge.latent_count} >= q={q}"))
        merged = alternative_expansion(model.ldim.h, base, gc, model.seed, mode='merged')
        rejected = merged.latent_count < q and merged.correlation_graph().edges != gc.edges
        results.append(PropertyResult('pigeonhole', f"seed {model.seed} merged", rejected,
                                      f"L={merged.latent_count} < q={q} cannot reproduce the correlation graph"))
        tick()
    return results


def planted_recovery(seed: int, n: int = PLANTED_N, cfg: Optional[SolverConfig] = None, eps: float = 0.01,
                     threads: Optional[int] = None) -> float:
    """Smallest tol_t over the eps grid; a sequential sweep stops once it is below the success bar"""
    s_true, l_true = planted_split(n, seed)
    sr = sweep(s_true + l_true, eps, cfg, truth=(s_true, l_true), threads=threads, stop_below=PLANTED_SUCCESS_TOL)
    return float(np.min(sr.tols))


def suite_recovery(config, tick) -> List[PropertyResult]:
    results = []
    cfg = SolverConfig.from_run_config(config)
    successes = 0
    for offset in range(config.seeds):
        seed = config.seed + offset
        s_true, l_true = planted_split(PLANTED_N, seed)
        condition = check_sufficient_condition(s_true, l_true)
        best = planted_recovery(seed, PLANTED_N, cfg, config.eps)
        successes += best < PLANTED_SUCCESS_TOL
        results.append(PropertyResult('recovery', f"planted seed {seed}", condition.holds and best < PLANTED_SUCCESS_TOL,
                                      f"deg*inc={condition.product:.3f}, min tol_t={best:.2e}"))
        tick()
    rate = successes / config.seeds
    results.append(PropertyResult('recovery', "planted success rate", rate >= 0.95, f"{rate:.0%}"))

    settings = PipelineSettings.from_run_config(config.updated(mode='analytic'))
    for model in _models(config, config.seeds, separated_latents=True):
        omega = config.omega_value
        try:
            report = end_to_end(model.expansion, omega, config.eps, settings, truth=model.ground_truth(omega))
        except NetReconError as exc:
            results.append(PropertyResult('recovery', f"pipeline seed {model.seed}", False, exc.message))
            tick()
            continue
        gc_ok = report.correlation_metrics is not None and report.correlation_metrics.exact
        results.append(PropertyResult('recovery', f"pipeline seed {model.seed}", report.metrics.exact and gc_ok,
                                      f"t0={report.t0:.2f}, topology errors "
                                      f"{report.metrics.false_positives + report.metrics.false_negatives}, "
                                      f"correlation graph {'exact' if gc_ok else 'inexact'}"))
        tick()
    return results


def _low_rank_index(config, model, settings) -> Tuple[SweepResult, int]:
    """Grid index of the recovered split.

    Without latent nodes the true split is S = C, L = 0, which is what the first
    zero region holds; otherwise the pipeline's middle region.
    """
    omega = config.omega_value
    try:
        report = end_to_end(model.expansion, omega, config.eps, settings, truth=model.ground_truth(omega))
        sr, index = report.sweep, report.selection.index
    except RegionSelectionError as exc:
        if model.expansion.latent_count or exc.partial is None:
            raise
        sr, index = exc.partial.sweep, None
    if model.expansion.latent_count == 0:
        if not sr.regions:
            raise RegionSelectionError("no zero region in the diff trace", partial=sr)
        return sr, sr.regions[0].median_index
    return sr, index


def suite_negative(config, tick) -> List[PropertyResult]:
    results = []
    for model in _models(config, config.seeds):
        split = analytic_sl_split(model.expansion, np.pi)
        empty = len(topology_from_sparse(np.imag(split.s), config.tau_supp, float(np.abs(split.s).max()))) == 0
        results.append(PropertyResult('negative', f"seed {model.seed} omega=pi", empty,
                                      f"max |Im S| = {np.max(np.abs(np.imag(split.s))):.1e}"))
        tick()
    settings = PipelineSettings.from_run_config(config.updated(mode='analytic'))
    for model in _models(config, min(config.seeds, 5), q=0):
        try:
            sr, index = _low_rank_index(config, model, settings)
        except NetReconError as exc:
            results.append(PropertyResult('negative', f"seed {model.seed} q=0", False, exc.message))
            tick()
            continue
        record = sr.records[index]
        rank = numerical_rank(record.l, config.tau_rank, scale=sr.c_norm)
        topology = topology_from_sparse(record.s, settings.tau_edge)
        exact = evaluate_edges(topology, model.topology).exact
        results.append(PropertyResult('negative', f"seed {model.seed} q=0", rank == 0 and exact,
                                      f"rank(L)={rank} at t={record.t:.2f}, topology exact={exact}"))
        tick()
    return results


SUITES: Dict[str, Callable] = {
    'equivalence': suite_equivalence,
    'structure': suite_structure,
    'blockdiag': suite_blockdiag,
    'identity': suite_identity,
    'pigeonhole': suite_pigeonhole,
    'recovery': suite_recovery,
    'negative': suite_negative,
}


def suite_size(name: str, config) -> int:
    if name == 'blockdiag':
        return len(BLOCKDIAG_CASES)
    if name == 'recovery':
        return 2 * config.seeds
    if name == 'negative':
        return config.seeds + min(config.seeds, 5)
    return config.seeds


def run_suite(name: str, config, tick: Optional[Callable[[], None]] = None) -> List[PropertyResult]:
    if name not in SUITES:
        raise ValidationError("unknown verification suite", suite=name, available=sorted(SUITES))
    logger.info("running suite %s", name)
    return SUITES[name](config, tick or (lambda: None))
