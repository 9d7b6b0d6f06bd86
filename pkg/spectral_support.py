"""
Time-domain simulation of influence models and Welch cross-PSD estimation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window, lfilter

from errors_support import IllConditionedError, InsufficientDataError, ValidationError
from latent_support import LatentExpansion
from netmodel_support import FirMatrix, NoiseSpec, TransferMatrix, _hermitize
from poly_lift_support import PolyCorrelationSpec, lift_series

logger = logging.getLogger(__name__)

SEGMENTS_PER_CHUNK = 32
DEFAULT_SPECTRAL_COND_LIMIT = 1e8


@dataclass
class TimeSeries:
    """n x N real samples, plus the latent driver series when one was simulated"""
    values: np.ndarray
    seed: Optional[int] = None
    latent: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("time series contains non-finite samples")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int = 4096
    overlap: float = 0.5
    window: str = 'hann'
    burn_in: int = 1000

    def __post_init__(self):
        if self.segment_length < 8 or self.segment_length & (self.segment_length - 1):
            raise ValidationError("segment_length must be a power of two >= 8", segment_length=self.segment_length)
        if not 0 <= self.overlap < 1:
            raise ValidationError("overlap must lie in [0, 1)", overlap=self.overlap)
        if self.burn_in < 0:
            raise ValidationError("burn_in must be nonnegative", burn_in=self.burn_in)

    @property
    def step(self) -> int:
        return max(1, self.segment_length - int(round(self.overlap * self.segment_length)))


@dataclass
class SpectralEstimate:
    """Averaged cross-periodograms on the one-sided bin grid 2*pi*k/segment_length"""
    omegas: np.ndarray
    values: np.ndarray
    segments: int
    segment_length: int

    def bin_index(self, omega: float) -> int:
        index = int(round(abs(omega) * self.segment_length / (2 * np.pi)))
        return min(index, len(self.omegas) - 1)

    def at(self, omega: float) -> Tuple[np.ndarray, float]:
        """Estimate at the bin nearest to omega and the bin frequency used"""
        index = self.bin_index(omega)
        if omega < 0:
            return self.values[index].conj(), -float(self.omegas[index])
        return self.values[index], float(self.omegas[index])


def _latent_root(covariance: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def _apply_gains(e: np.ndarray, gains: FirMatrix, drivers: np.ndarray) -> np.ndarray:
    """e_i += sum_l (F_il * d_l) by FIR filtering"""
    for i, col in gains.nonzero_entries():
        e[i] += lfilter(gains.coefficients[i, col], [1.0], drivers[col])
    return e


def simulate_noise_affine(model: Union[LatentExpansion, NoiseSpec], length: int, seed: int) -> TimeSeries:
    """e = e_o + F e_h with independent Gaussian components"""
    rng = np.random.default_rng(seed)
    if isinstance(model, LatentExpansion):
        base, gains, covariance = model.base, model.f, model.latent_cov
    else:
        base = model.base
        gains = model.correlation.latent_gains() if model.latent_count else None
        covariance = model.correlation.latent_covariance() if model.latent_count else None
    n = len(base)
    e = np.sqrt(np.asarray(base))[:, np.newaxis] * rng.standard_normal((n, length))
    latent = None
    if gains is not None and gains.shape[1]:
        latent = _latent_root(covariance) @ rng.standard_normal((gains.shape[1], length))
        e = _apply_gains(e, gains, latent)
    return TimeSeries(values=e, seed=seed, latent=latent)


def simulate_noise_poly(spec: PolyCorrelationSpec, base, length: int, seed: int) -> TimeSeries:
    """e = e_o + F_poly (lift(v) - E[lift(v)]) with v IID zero-mean drivers"""
    rng = np.random.default_rng(seed)
    n = spec.n
    e = np.sqrt(np.asarray(base, dtype=float))[:, np.newaxis] * rng.standard_normal((n, length))
    if spec.driver == 'gaussian':
        v = spec.sigma * rng.standard_normal((spec.m, length))
    else:
        bound = spec.sigma * np.sqrt(3.0)
        v = rng.uniform(-bound, bound, size=(spec.m, length))
    active = spec.active
    if not active:
        return TimeSeries(values=e, seed=seed, latent=v)
    lifted = lift_series(v, spec.basis, columns=active) - spec.monomial_means()[:, np.newaxis]
    e = _apply_gains(e, spec.latent_gains(), lifted)
    return TimeSeries(values=e, seed=seed, latent=v)


def simulate_ldim(model, e: TimeSeries, burn_in: int = 0) -> TimeSeries:
    """Forward recursion x(t) = sum_{tau>=1} H_tau x(t - tau) + e(t); drops the first burn_in samples"""
    h: TransferMatrix = getattr(model, 'h', model)
    if not h.strictly_causal:
        raise ValidationError("simulation needs a strictly causal transfer matrix (zero lag-0 taps)")
    if e.n != h.n:
        raise ValidationError("noise series and model sizes differ", noise=e.n, model=h.n)
    if e.length <= burn_in:
        raise InsufficientDataError("series is not longer than the burn-in", length=e.length, burn_in=burn_in)
    lags = [(tau, h.lag(tau)) for tau in range(1, h.max_delay + 1) if np.any(h.lag(tau))]
    drive = e.values.T
    x = np.empty_like(drive)
    for t in range(drive.shape[0]):
        acc = drive[t].copy()
        for tau, matrix in lags:
            if t >= tau:
                acc += matrix @ x[t - tau]
        x[t] = acc
    logger.debug("simulated %d samples (%d burn-in)", drive.shape[0], burn_in)
    return TimeSeries(values=x[burn_in:].T.copy(), seed=e.seed)


def _chunk_periodogram(centred: np.ndarray, starts: np.ndarray, window: np.ndarray) -> np.ndarray:
    segments = sliding_window_view(centred, len(window), axis=1)[:, starts, :]
    spectra = np.fft.rfft(segments * window, axis=2)
    return np.einsum('ikf,jkf->fij', spectra, spectra.conj())


def welch_cross_psd(x: TimeSeries, cfg: WelchConfig, threads: Optional[int] = None) -> SpectralEstimate:
    """Averaged windowed cross-periodograms; unit-variance white input gives about I"""
    seg = cfg.segment_length
    if x.length < 4 * seg:
        raise InsufficientDataError("need at least four segments of data",
                                    length=x.length, segment_length=seg)
    centred = x.values - x.values.mean(axis=1, keepdims=True)
    window = get_window(cfg.window, seg)
    starts = np.arange(0, x.length - seg + 1, cfg.step)
    chunks: List[np.ndarray] = [starts[i:i + SEGMENTS_PER_CHUNK] for i in range(0, len(starts), SEGMENTS_PER_CHUNK)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda c: _chunk_periodogram(centred, c, window), chunks))
    else:
        partials = [_chunk_periodogram(centred, c, window) for c in chunks]
    total = partials[0]
    for partial in partials[1:]:
        total = total + partial
    values = total / (len(starts) * np.sum(window ** 2))
    values = (values + np.conj(np.swapaxes(values, 1, 2))) / 2
    omegas = 2 * np.pi * np.arange(values.shape[0]) / seg
    logger.info("Welch estimate from %d segments of length %d", len(starts), seg)
    return SpectralEstimate(omegas=omegas, values=values, segments=len(starts), segment_length=seg)


def estimate_ipsdm(estimate: Union[SpectralEstimate, np.ndarray], omega: float,
                   cond_limit: float = DEFAULT_SPECTRAL_COND_LIMIT) -> np.ndarray:
    """Inverse of the spectral estimate at omega, Hermitian-symmetrised"""
    if isinstance(estimate, SpectralEstimate):
        phi, omega = estimate.at(omega)
    else:
        phi = np.asarray(estimate)
    condition = float(np.linalg.cond(phi))
    if not condition < cond_limit:
        raise IllConditionedError("spectral estimate is ill-conditioned", omega=float(omega), condition=condition)
    return _hermitize(np.linalg.inv(phi))
