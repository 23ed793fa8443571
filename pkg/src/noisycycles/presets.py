"""Ready-made example systems for tests and the command line.

Each factory returns an :class:`~noisycycles.sde.SdeSystem`; pass sigma = 0
for the deterministic skeleton used by cycle detection.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError
from .hopf import HopfParams, hopf_system
from .sde import SdeSystem, ornstein_uhlenbeck

__all__ = ["van_der_pol", "hopf", "ornstein_uhlenbeck", "named_system"]


def van_der_pol(mu=1.0, sigma=0.0) -> SdeSystem:
    """Van der Pol oscillator x'' - mu (1 - x^2) x' + x = 0 as a plane system.

    State is (x, v) with v = x'.  Isotropic noise of level ``sigma`` on
    both components.
    """
    if mu <= 0.0:
        raise ConfigError(f"mu must be positive, got {mu}")

    def drift(y):
        y = np.asarray(y, dtype=float)
        x, v = y[..., 0], y[..., 1]
        return np.stack([v, mu * (1.0 - x * x) * v - x], axis=-1)

    def jacobian(y):
        x, v = np.asarray(y, dtype=float)
        return np.array(
            [[0.0, 1.0], [-2.0 * mu * x * v - 1.0, mu * (1.0 - x * x)]]
        )

    return SdeSystem(
        dimension=2,
        drift=drift,
        isotropic_sigma=sigma,
        vectorized=True,
        jacobian=jacobian,
    )


def hopf(alpha, alpha0, lambda_, r, sigma) -> SdeSystem:
    """Hopf normal-form oscillator; see :mod:`noisycycles.hopf`."""
    return hopf_system(
        HopfParams(alpha=alpha, alpha0=alpha0, lambda_=lambda_, r=r, sigma=sigma)
    )


def named_system(name, **params) -> SdeSystem:
    """Look up a preset by its command-line name."""
    factories = {
        "hopf": hopf,
        "van-der-pol": van_der_pol,
        "ornstein-uhlenbeck": ornstein_uhlenbeck,
    }
    try:
        factory = factories[name]
    except KeyError:
        raise ConfigError(
            f"unknown system {name!r}; choose from {sorted(factories)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name!r}: {exc}") from None
