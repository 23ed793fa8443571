"""The normal-form oscillator used throughout as the exactly-solvable testbed.

State (x, y), cycle radius r, angular frequency alpha on the cycle, radial
relaxation rate lambda, and isotropic noise amplitude sigma:

    dx = [ (lambda/2) x - alpha0 y + rho2 (-(lambda/2) x - (alpha - alpha0) y) ] dt + sigma dW1
    dy = [ alpha0 x + (lambda/2) y + rho2 ( (alpha - alpha0) x - (lambda/2) y) ] dt + sigma dW2

with rho2 = (x^2 + y^2) / r^2.  In polar coordinates the drift reads
d(rho)/dt = (lambda/2) rho (1 - rho^2/r^2) and
d(phi)/dt = alpha0 + (alpha - alpha0) rho^2/r^2, so the rotation speed
depends on amplitude unless alpha0 = alpha.

For weak noise the dynamics near the cycle reduce to an amplitude deviation
z relaxing at rate lambda and a reparameterised time tau:

    dz   = -lambda z dt + sigma dW_d
    dtau = dt + 2 z (alpha - alpha0) / (alpha (r + z)) dt
              + sigma dW_p / (alpha (r + z))

reconstructed through x = (r + z) cos(alpha tau), y = (r + z) sin(alpha tau).
``simulate_hopf_linear`` integrates this pair: z exactly per step through its
Gaussian transition density, tau by Euler-Maruyama.  With
``leading_order=True`` the amplitude modulation of the phase speed is dropped
(denominators frozen at alpha r, deterministic tau correction gone), which is
the variant whose autocovariance and spectrum have closed forms.

The dimensionless noise-to-signal ratio is NSR = sqrt(sigma^2/(2 lambda))/r:
stationary deviation spread over cycle radius.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .exceptions import ConfigError, SingularAmplitudeError
from .sde import SdeSystem, Trajectory, _generator, integrate_path

__all__ = [
    "HopfParams",
    "PhaseDeviationPath",
    "hopf_drift",
    "hopf_jacobian",
    "hopf_system",
    "nsr",
    "sigma_for_nsr",
    "simulate_hopf_exact",
    "simulate_hopf_linear",
]


@dataclass(frozen=True)
class HopfParams:
    """Parameter set (alpha, alpha0, lambda_, r, sigma); sigma may be zero."""

    alpha: float
    alpha0: float
    lambda_: float
    r: float
    sigma: float

    def __post_init__(self):
        for name in ("alpha", "alpha0", "lambda_", "r"):
            v = getattr(self, name)
            if not (v > 0.0 and np.isfinite(v)):
                raise ConfigError(f"{name} must be positive, got {v}")
        if not (self.sigma >= 0.0 and np.isfinite(self.sigma)):
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def from_nsr(cls, alpha, alpha0, lambda_, r, nsr) -> "HopfParams":
        """Build a parameter set with sigma chosen to hit a target NSR."""
        return cls(alpha, alpha0, lambda_, r, sigma_for_nsr(nsr, lambda_, r))


def sigma_for_nsr(nsr, lambda_, r) -> float:
    """Noise amplitude giving the requested noise-to-signal ratio."""
    if nsr < 0:
        raise ConfigError(f"nsr must be >= 0, got {nsr}")
    return float(nsr) * r * np.sqrt(2.0 * lambda_)


def nsr(params: HopfParams) -> float:
    """sqrt(sigma^2 / (2 lambda)) / r."""
    return np.sqrt(params.sigma**2 / (2.0 * params.lambda_)) / params.r


def hopf_drift(params: HopfParams, state) -> np.ndarray:
    """Deterministic velocity at ``state``; broadcasts over leading axes."""
    state = np.asarray(state, dtype=float)
    x, y = state[..., 0], state[..., 1]
    lam, al, al0 = params.lambda_, params.alpha, params.alpha0
    rho2 = (x * x + y * y) / params.r**2
    fx = 0.5 * lam * x - al0 * y + rho2 * (-0.5 * lam * x - (al - al0) * y)
    fy = al0 * x + 0.5 * lam * y + rho2 * ((al - al0) * x - 0.5 * lam * y)
    return np.stack([fx, fy], axis=-1)


def hopf_jacobian(params: HopfParams, state) -> np.ndarray:
    """Analytic Jacobian of :func:`hopf_drift` at a single state."""
    x, y = np.asarray(state, dtype=float)
    lam, al, al0 = params.lambda_, params.alpha, params.alpha0
    r2 = params.r**2
    rho2 = (x * x + y * y) / r2
    gx = -0.5 * lam * x - (al - al0) * y
    gy = (al - al0) * x - 0.5 * lam * y
    return np.array(
        [
            [0.5 * lam + 2 * x * gx / r2 - 0.5 * lam * rho2,
             -al0 + 2 * y * gx / r2 - (al - al0) * rho2],
            [al0 + 2 * x * gy / r2 + (al - al0) * rho2,
             0.5 * lam + 2 * y * gy / r2 - 0.5 * lam * rho2],
        ]
    )


def hopf_system(params: HopfParams) -> SdeSystem:
    """The oscillator as an additive-noise system with isotropic noise."""
    return SdeSystem(
        dimension=2,
        drift=lambda state: hopf_drift(params, state),
        isotropic_sigma=params.sigma,
        vectorized=True,
        jacobian=lambda state: hopf_jacobian(params, state),
    )


def simulate_hopf_exact(params, config, record_every=1) -> Trajectory:
    """Integrate the full oscillator; starts on the cycle at phase zero
    unless the config carries an explicit initial state."""
    if len(config.initial_state) == 0:
        config = dataclasses.replace(config, initial_state=(params.r, 0.0))
    return integrate_path(
        hopf_system(params), config, record_every, channel_labels=("x", "y")
    )


@dataclass
class PhaseDeviationPath:
    """Sampled (tau, z) pair plus the reconstructed planar trajectory.

    ``reconstructed[k] = ((r + z[k]) cos(alpha tau[k]),
                          (r + z[k]) sin(alpha tau[k]))`` exactly.
    """

    dt: float
    tau: np.ndarray
    z: np.ndarray
    reconstructed: np.ndarray
    seed: int = None

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.tau.shape[0]) * self.dt

    @property
    def x(self) -> np.ndarray:
        return self.reconstructed[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.reconstructed[:, 1]


def simulate_hopf_linear(params, config, leading_order=False, record_every=1):
    """Integrate the phase/deviation pair and reconstruct (x, y).

    z advances through its exact Gaussian transition; tau by Euler-Maruyama
    (its coefficients depend on z only, so this is the whole-path update; the
    config's scheme field is not consulted).  The two Wiener components are
    drawn per step in the order (deviation, phase) from the same chunked
    Philox pattern as the generic integrator, so a seed here matches the
    increments of a 2-dimensional generic run with the same seed.

    With the full phase-speed modulation the update divides by r + z; the
    step where r + z first reaches zero, if any, raises
    :class:`SingularAmplitudeError` (expected only for NSR around 0.5 or
    larger).  The leading-order variant never divides by the amplitude.

    Initial (z, tau) come from ``config.initial_state`` (default (0, 0):
    on the cycle, phase zero).
    """
    if record_every < 1 or config.n_steps % record_every:
        raise ConfigError(
            f"record_every must divide n_steps ({config.n_steps}), got {record_every}"
        )
    if len(config.initial_state) == 0:
        z0, tau0 = 0.0, 0.0
    elif len(config.initial_state) == 2:
        z0, tau0 = map(float, config.initial_state)
    else:
        raise ConfigError("initial_state must be empty or (z0, tau0)")

    lam, al, al0, r, sig = (
        params.lambda_, params.alpha, params.alpha0, params.r, params.sigma,
    )
    h = config.dt
    n = config.n_steps
    rng = _generator(config.seed)

    # frozen draw pattern: chunks of (m, dim=2, 2); only column 0 (the
    # Wiener normals) is consumed here, column 1 is the area auxiliary
    from .sde import _CHUNK

    xi = np.empty((n, 2))
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        u = rng.standard_normal((m, 2, 2))
        xi[done:done + m] = u[:, :, 0]
        done += m
    xi_d, xi_p = xi[:, 0], xi[:, 1]

    # exact deviation update: z_{k+1} = phi z_k + s_h xi
    phi = np.exp(-lam * h)
    s_h = sig * np.sqrt((1.0 - phi * phi) / (2.0 * lam)) if sig > 0 else 0.0
    z = np.empty(n + 1)
    z[0] = z0
    z[1:] = lfilter([s_h], [1.0, -phi], xi_d, zi=[phi * z0])[0]

    dw_p = np.sqrt(h) * xi_p
    if leading_order:
        dtau = h + sig * dw_p / (al * r)
    else:
        amp = r + z[:-1]
        if np.any(amp <= 0.0):
            k = int(np.argmax(amp <= 0.0))
            raise SingularAmplitudeError(
                f"r + z reached zero at step {k}: the phase-speed "
                f"denominator is singular",
                step_index=k,
            )
        dtau = (
            h * (1.0 + 2.0 * z[:-1] * (al - al0) / (al * amp))
            + sig * dw_p / (al * amp)
        )
    tau = np.empty(n + 1)
    tau[0] = tau0
    tau[1:] = tau0 + np.cumsum(dtau)

    z = z[::record_every]
    tau = tau[::record_every]
    amp = r + z
    angle = al * tau
    rec = np.stack([amp * np.cos(angle), amp * np.sin(angle)], axis=-1)
    return PhaseDeviationPath(
        dt=h * record_every, tau=tau, z=z, reconstructed=rec, seed=config.seed
    )
