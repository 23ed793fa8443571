"""Estimators and closed-form curves, checked against slow direct oracles."""

import numpy as np
import pytest

from noisycycles import (
    AcvEstimate,
    ConfigError,
    DegenerateSampleError,
    DegenerateSpectrumError,
    HopfParams,
    acv_formula,
    averaged_periodogram,
    kde,
    kurtosis,
    psd_formula,
    sample_acv,
    sigma_for_nsr,
    wk_transform,
)

TAU = 2.0 * np.pi


def _params(nsr=0.1):
    return HopfParams(alpha=TAU, alpha0=TAU, lambda_=TAU, r=1.0,
                      sigma=sigma_for_nsr(nsr, TAU, 1.0))


def _naive_acv(x, k_max):
    # direct O(N k) reference: biased, mean subtracted
    x = x - x.mean()
    n = x.size
    return np.array([(x[: n - k] * x[k:]).sum() / n for k in range(k_max + 1)])


def test_sample_acv_matches_direct_computation():
    rng = np.random.default_rng(1)
    x = rng.normal(size=1200)
    dt = 0.25
    est = sample_acv(x, dt, max_lag=20 * dt)
    assert est.lags == pytest.approx(np.arange(21) * dt)
    assert est.values == pytest.approx(_naive_acv(x, 20), abs=1e-12)


def test_sample_acv_rejects_lags_beyond_half_the_span():
    with pytest.raises(ConfigError):
        sample_acv(np.zeros(100), 0.1, max_lag=6.0)


def test_periodogram_matches_direct_dft():
    rng = np.random.default_rng(2)
    dt = 0.5
    x = rng.normal(size=256)
    est = averaged_periodogram(x[None, :], dt)
    xc = x - x.mean()
    ref = np.abs(np.fft.rfft(xc)) ** 2 * dt / x.size
    assert est.values == pytest.approx(ref, abs=1e-12)
    assert est.omegas == pytest.approx(2 * np.pi * np.fft.rfftfreq(x.size, dt))


def test_periodogram_averages_rows():
    rng = np.random.default_rng(3)
    rows = rng.normal(size=(8, 128))
    avg = averaged_periodogram(rows, 1.0)
    singles = [averaged_periodogram(row[None, :], 1.0).values for row in rows]
    assert avg.values == pytest.approx(np.mean(singles, axis=0))


def test_periodogram_variance_normalization():
    # half-line integral of the two-sided density over pi recovers the power
    rng = np.random.default_rng(4)
    x = rng.normal(size=4096)
    est = averaged_periodogram(x[None, :], 0.1)
    var = np.trapezoid(est.values, est.omegas) / np.pi
    assert var == pytest.approx(x.var(), rel=0.02)


def test_acv_formula_values():
    p = _params(0.1)
    acv0 = acv_formula(p, np.array([0.0]))[0]
    assert acv0 == pytest.approx(0.5 * (1 + 0.01))
    # spot value one period out, from the closed form evaluated by hand
    s2 = p.sigma**2 / p.r**2
    by_hand = 0.5 * (1 + 0.01 * np.exp(-p.lambda_)) * np.exp(-s2 / 2)
    assert acv_formula(p, np.array([1.0]))[0] == pytest.approx(by_hand)
    assert by_hand == pytest.approx(0.46956, abs=5e-5)
    # even in the lag
    u = np.array([0.3])
    assert acv_formula(p, -u) == pytest.approx(acv_formula(p, u))


def test_psd_formula_peak_and_variance():
    p = _params(0.1)
    w = np.linspace(0.0, 40 * TAU, 400_001)
    psd = psd_formula(p, w)
    peak = w[np.argmax(psd)]
    assert peak == pytest.approx(TAU, rel=1e-3)
    # the spectral convention ties the half-line integral to ACV(0)
    var = np.trapezoid(psd, w) / np.pi
    assert var == pytest.approx(acv_formula(p, np.array([0.0]))[0], rel=1e-3)


def test_psd_formula_needs_noise():
    quiet = HopfParams(alpha=TAU, alpha0=TAU, lambda_=TAU, r=1.0, sigma=0.0)
    with pytest.raises(DegenerateSpectrumError):
        psd_formula(quiet, np.array([1.0]))


def test_wk_transform_callable_and_sampled_agree():
    p = _params(0.1)
    w = np.linspace(0.0, 3 * TAU, 121)
    from_callable = wk_transform(lambda u: acv_formula(p, u), w).values
    # span the lags until the envelope is ~3e-6 of the zero-lag value,
    # otherwise the truncated tail dominates the comparison
    lags = np.arange(0.0, 200.0, 0.005)
    sampled = AcvEstimate(lags=lags, values=acv_formula(p, lags))
    from_curve = wk_transform(sampled, w).values
    direct = psd_formula(p, w)
    scale = direct.max()
    assert np.abs(from_callable - direct).max() / scale < 1e-3
    assert np.abs(from_curve - direct).max() / scale < 1e-3


def test_wk_transform_rejects_non_decaying_input():
    with pytest.raises(DegenerateSpectrumError):
        wk_transform(lambda u: np.cos(u), np.array([0.5, 1.0]))


def test_kde_recovers_a_normal_density():
    rng = np.random.default_rng(7)
    x = rng.normal(size=20_000)
    est = kde(x)
    pdf = np.exp(-est.grid**2 / 2) / np.sqrt(2 * np.pi)
    assert np.abs(est.density - pdf).max() < 0.02
    mass = np.trapezoid(est.density, est.grid)
    assert mass == pytest.approx(1.0, abs=2e-3)
    assert est.bandwidth > 0


def test_kde_bandwidth_override_and_degenerate_sample():
    rng = np.random.default_rng(8)
    x = rng.normal(size=500)
    wide = kde(x, bandwidth=2.0)
    assert wide.bandwidth == 2.0
    with pytest.raises(DegenerateSampleError):
        kde(np.ones(100))


def test_kurtosis_reference_values():
    rng = np.random.default_rng(9)
    assert kurtosis(rng.normal(size=200_000)) == pytest.approx(3.0, abs=0.05)
    assert kurtosis(rng.uniform(size=200_000)) == pytest.approx(1.8, abs=0.02)
    with pytest.raises(ConfigError):
        kurtosis(np.arange(10.0))  # too few samples
    with pytest.raises(DegenerateSampleError):
        kurtosis(np.full(100, 3.3))
