"""Second-order and distributional statistics of oscillator time series.

Conventions, fixed once for the whole package:

* Autocovariance: ACV(u) = E[(x(t) - m)(x(t + u) - m)], estimated with the
  biased (divide by N) mean-subtracted sample form, so |ACV(u)| <= ACV(0).
* Power spectrum: two-sided density  PS(w) = integral ACV(u) e^{-i w u} du,
  reported on w >= 0.  Total variance is recovered as (1/pi) times the
  integral of the reported half-line, and integral PS dw = 2 pi ACV(0).
  The per-path periodogram |DFT|^2 dt / N on the grid w_k = 2 pi k / (N dt)
  estimates exactly this density; the linear relaxation process with rate
  lambda and amplitude sigma comes out as sigma^2 / (lambda^2 + w^2).

Closed forms for the leading-order phase/deviation oscillator, s = sigma/r:

    ACV(u) = (r^2/2) (1 + NSR^2 e^{-lambda |u|}) cos(alpha u) e^{-|u| s^2/2}

    PS(w)  = 2 r^2 s^2 [4(alpha^2+w^2) + s^4]
             / ([4(alpha-w)^2 + s^4][4(alpha+w)^2 + s^4])
           + NSR^2 2 r^2 g [4(alpha^2+w^2) + g^2]
             / ([4(alpha-w)^2 + g^2][4(alpha+w)^2 + g^2]),   g = s^2 + 2 lambda

which are each other's Fourier transforms under the convention above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigError,
    DegenerateSampleError,
    DegenerateSpectrumError,
)
from .hopf import HopfParams, nsr as _nsr

__all__ = [
    "AcvEstimate",
    "PsdEstimate",
    "DensityEstimate",
    "sample_acv",
    "averaged_periodogram",
    "acv_formula",
    "psd_formula",
    "kde",
    "kurtosis",
    "wk_transform",
]


@dataclass
class AcvEstimate:
    """Autocovariance on a uniform lag grid starting at zero."""

    lags: np.ndarray
    values: np.ndarray


@dataclass
class PsdEstimate:
    """Two-sided spectral density sampled on nonnegative frequencies."""

    omegas: np.ndarray
    values: np.ndarray


@dataclass
class DensityEstimate:
    """Smoothed probability density on a uniform grid."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def sample_acv(series, dt, max_lag) -> AcvEstimate:
    """Biased mean-subtracted sample autocovariance up to ``max_lag``.

    Computed with an FFT over a zero-padded copy, identical to the direct
    sum  (1/N) sum_t (x_t - m)(x_{t+k} - m).  The series must cover at
    least twice the requested lag span.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ConfigError(f"series must be 1-D, got shape {x.shape}")
    n = x.size
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    k_max = int(np.floor(max_lag / dt + 1e-9))
    if max_lag > n * dt / 2.0:
        raise ConfigError(
            f"max_lag {max_lag} exceeds half the series span {n * dt / 2.0}"
        )
    x = x - x.mean()
    nfft = 1 << int(np.ceil(np.log2(n + k_max + 1)))
    spec = np.fft.rfft(x, nfft)
    acv = np.fft.irfft(spec * spec.conj(), nfft)[: k_max + 1] / n
    return AcvEstimate(lags=np.arange(k_max + 1) * dt, values=acv)


def averaged_periodogram(paths, dt) -> PsdEstimate:
    """Mean periodogram of equally long paths, each centred on its own mean.

    Per path the raw (untapered) periodogram |DFT|^2 dt / N is taken on the
    frequency grid w_k = 2 pi k / (N dt); no windowing is applied.
    """
    arr = np.atleast_2d(np.asarray(paths, dtype=float))
    if arr.size == 0 or arr.shape[0] == 0:
        raise ConfigError("at least one path is required")
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    n = arr.shape[1]
    centred = arr - arr.mean(axis=1, keepdims=True)
    pgram = np.abs(np.fft.rfft(centred, axis=1)) ** 2 * (dt / n)
    omegas = 2.0 * np.pi * np.fft.rfftfreq(n, dt)
    return PsdEstimate(omegas=omegas, values=pgram.mean(axis=0))


def acv_formula(params: HopfParams, u) -> np.ndarray:
    """Leading-order autocovariance of the x component; even in the lag."""
    u = np.abs(np.asarray(u, dtype=float))
    s2 = (params.sigma / params.r) ** 2
    amp = 1.0 + _nsr(params) ** 2 * np.exp(-params.lambda_ * u)
    return 0.5 * params.r**2 * amp * np.cos(params.alpha * u) * np.exp(-0.5 * s2 * u)


def _lorentzian_pair(alpha, w, r2, weight, width):
    """weight * 2 r^2 width (4(alpha^2+w^2) + width^2) over the split-peak
    denominator; ``width`` is the full decay rate of the matching ACV term."""
    num = 4.0 * (alpha**2 + w**2) + width**2
    den = (4.0 * (alpha - w) ** 2 + width**2) * (4.0 * (alpha + w) ** 2 + width**2)
    return weight * 2.0 * r2 * width * num / den


def psd_formula(params: HopfParams, omega) -> np.ndarray:
    """Leading-order two-sided spectral density; even in frequency."""
    if params.sigma == 0.0:
        raise DegenerateSpectrumError(
            "sigma = 0 gives a line spectrum (delta peaks at +-alpha); "
            "the density formula is degenerate there"
        )
    w = np.asarray(omega, dtype=float)
    s2 = (params.sigma / params.r) ** 2
    r2 = params.r**2
    direct = _lorentzian_pair(params.alpha, w, r2, 1.0, s2)
    broadened = _lorentzian_pair(
        params.alpha, w, r2, _nsr(params) ** 2, s2 + 2.0 * params.lambda_
    )
    return direct + broadened


def kde(samples, grid_size=512, bandwidth=None) -> DensityEstimate:
    """Gaussian kernel density with the Silverman rule of thumb.

    bandwidth = 0.9 min(std, IQR / 1.34) N^{-1/5} unless given explicitly.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ConfigError("at least 2 samples are required")
    if bandwidth is None:
        std = x.std()
        q75, q25 = np.percentile(x, [75.0, 25.0])
        spread = min(std, (q75 - q25) / 1.34)
        bandwidth = 0.9 * spread * x.size ** (-0.2)
    if not (bandwidth > 0.0 and np.isfinite(bandwidth)):
        raise DegenerateSampleError(
            f"sample spread is degenerate (bandwidth {bandwidth})"
        )
    grid = np.linspace(x.min() - 4.0 * bandwidth, x.max() + 4.0 * bandwidth, grid_size)
    density = np.zeros(grid_size)
    norm = 1.0 / (np.sqrt(2.0 * np.pi) * bandwidth * x.size)
    for start in range(0, x.size, 4096):
        chunk = x[start:start + 4096]
        d = (grid[:, None] - chunk[None, :]) / bandwidth
        density += np.exp(-0.5 * d * d).sum(axis=1)
    return DensityEstimate(grid=grid, density=norm * density, bandwidth=float(bandwidth))


def kurtosis(samples) -> float:
    """Non-excess kurtosis m4 / m2^2 with population moments."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 30:
        raise ConfigError(f"kurtosis needs >= 30 samples, got {x.size}")
    x = x - x.mean()
    m2 = np.mean(x * x)
    if m2 == 0.0:
        raise DegenerateSampleError("zero variance sample")
    return float(np.mean(x**4) / m2**2)


def wk_transform(acv, omegas, max_lag=None, lag_step=None) -> PsdEstimate:
    """Cosine transform of an autocovariance:  PS(w) = 2 int_0^U ACV cos(wu) du.

    ``acv`` is either an :class:`AcvEstimate` (integrated on its own lag
    grid) or a callable u -> ACV(u); for callables the lag grid is built
    automatically, extending until the block envelope of |ACV| falls below
    1e-6 of ACV(0) (non-decaying inputs, e.g. a noiseless template, raise
    :class:`DegenerateSpectrumError`).  Trapezoid quadrature throughout.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if np.any(omegas < 0.0):
        raise ConfigError("omegas must be nonnegative")

    if isinstance(acv, AcvEstimate):
        lags, vals = acv.lags, acv.values
        c0 = abs(vals[0])
        env = _block_envelope(vals, 512)
        below = np.nonzero(env < 1e-6 * c0)[0]
        if below.size:
            cut = min((below[0] + 1) * 512, vals.size)
            lags, vals = lags[:cut], vals[:cut]
    else:
        w_max = max(omegas.max(), 1e-12)
        du = lag_step if lag_step is not None else np.pi / (128.0 * w_max)
        cap = max_lag if max_lag is not None else 2**21 * du
        lags, vals = _sampled_until_decay(acv, du, cap)

    values = np.empty(omegas.size)
    for start in range(0, omegas.size, 64):
        ws = omegas[start:start + 64, None]
        values[start:start + 64] = 2.0 * np.trapezoid(
            vals[None, :] * np.cos(ws * lags[None, :]), lags, axis=1
        )
    return PsdEstimate(omegas=omegas, values=values)


def _block_envelope(vals, block):
    nb = int(np.ceil(vals.size / block))
    padded = np.full(nb * block, 0.0)
    padded[: vals.size] = np.abs(vals)
    return padded.reshape(nb, block).max(axis=1)


def _sampled_until_decay(fn, du, cap):
    c0 = abs(float(fn(0.0)))
    if not np.isfinite(c0) or c0 == 0.0:
        raise ConfigError("ACV(0) must be finite and nonzero")
    block = 4096
    chunks_u, chunks_v = [], []
    start = 0
    while True:
        stop = start + block + (1 if start == 0 else 0)
        u = np.arange(start, stop) * du
        v = np.asarray(fn(u), dtype=float)
        chunks_u.append(u)
        chunks_v.append(v)
        if np.max(np.abs(v[-block:])) < 1e-6 * c0:
            break
        if u[-1] >= cap:
            raise DegenerateSpectrumError(
                "autocovariance envelope did not decay below 1e-6 of ACV(0) "
                f"within lag {cap:g}; a line spectrum has no density limit"
            )
        start = stop
    return np.concatenate(chunks_u), np.concatenate(chunks_v)
