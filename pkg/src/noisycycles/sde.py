"""Ito integration of additive-noise systems  dy = f(y) dt + S dW.

Two fixed-step schemes are provided: Euler-Maruyama (strong order 1.0 for
additive noise) and an explicit derivative-free scheme of strong order 3/2
(``Scheme.STRONG_RK15``).  The 3/2 scheme advances one step of size h by

    base    = y + (h/m) f(y)
    Y(+,j)  = base + sqrt(h) S_j          Y(-,j) = base - sqrt(h) S_j
    y_next  = y + h f(y) + S dW
              + sum_j [ (f(Y+,j) - f(Y-,j)) dZ_j / (2 sqrt(h))
                      + (f(Y+,j) - 2 f(y) + f(Y-,j)) h / 4 ]

where S_j are the m columns of the noise matrix and dZ_j is the area
increment of the j-th Wiener component over the step,

    dZ_j = int_t^{t+h} (W_j(s) - W_j(t)) ds,
    E dZ = 0,   Var dZ = h^3/3,   Cov(dW, dZ) = h^2/2.

The two stage differences reproduce both the area-increment coupling and the
deterministic h^2/2 correction; with the noise switched off the scheme
reduces to a second-order deterministic integrator.  On systems with linear
drift the local curvature terms vanish and the scheme converges with order 2;
the generic 3/2 rate is observed on nonlinear drift once the stochastic part
of the local error dominates.

Randomness is counter-based and splittable: every path owns a Philox stream
keyed by ``SeedSequence([seed])`` (single paths) or by the sub-seed
``path_seed(seed, k)`` (ensemble member k), and normals are consumed in a
fixed chunked pattern, so results do not depend on evaluation order or on
how members are scheduled across workers.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import ConfigError, DivergenceError

__all__ = [
    "Scheme",
    "SdeSystem",
    "IntegratorConfig",
    "Trajectory",
    "OrderEstimate",
    "path_seed",
    "integrate_path",
    "integrate_ensemble",
    "strong_order_estimate",
    "ornstein_uhlenbeck",
    "ou_exact_endpoint",
]

#: divergence guard: abort when any state component leaves [-TRUST, TRUST]
TRUST_RADIUS = 1.0e6

#: number of steps whose normals are drawn per generator call (frozen so that
#: a seed pins the Brownian path regardless of scheme or ensemble layout)
_CHUNK = 16384

#: default integration step, as a fraction of the relevant cycle period
DEFAULT_DT_PER_PERIOD = 1.0e-4


class Scheme(enum.Enum):
    """Available stepping schemes."""

    EULER_MARUYAMA = "euler-maruyama"
    STRONG_RK15 = "strong-rk15"


@dataclass
class SdeSystem:
    """An autonomous SDE with state-independent (additive) noise.

    Parameters
    ----------
    dimension : int
        State dimension n.
    drift : callable
        Maps a state vector of shape (n,) to a velocity of shape (n,).
        When ``vectorized`` is true it must accept stacked states of shape
        (..., n) and broadcast over leading axes.
    noise_matrix : ndarray of shape (n, n), optional
        Constant noise matrix S.  Omit it and pass ``isotropic_sigma``
        for the common case S = sigma * Id.
    isotropic_sigma : float, optional
        Shorthand for an isotropic noise matrix.
    vectorized : bool
        Whether ``drift`` accepts batched states; enables the fast
        lock-step ensemble path.
    jacobian : callable, optional
        Analytic Jacobian, (n,) -> (n, n).  Consumers fall back to central
        finite differences when absent.
    """

    dimension: int
    drift: Callable[[np.ndarray], np.ndarray]
    noise_matrix: Optional[np.ndarray] = None
    isotropic_sigma: Optional[float] = None
    vectorized: bool = False
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        n = self.dimension
        if n < 1:
            raise ConfigError(f"dimension must be >= 1, got {n}")
        if self.noise_matrix is None:
            sigma = 0.0 if self.isotropic_sigma is None else float(self.isotropic_sigma)
            if sigma < 0.0:
                raise ConfigError(f"isotropic_sigma must be >= 0, got {sigma}")
            self.noise_matrix = sigma * np.eye(n)
        else:
            self.noise_matrix = np.asarray(self.noise_matrix, dtype=float)
            if self.noise_matrix.shape != (n, n):
                raise ConfigError(
                    f"noise_matrix must have shape ({n}, {n}), "
                    f"got {self.noise_matrix.shape}"
                )
            if not np.all(np.isfinite(self.noise_matrix)):
                raise ConfigError("noise_matrix must be finite")
            if self.isotropic_sigma is not None:
                expected = float(self.isotropic_sigma) * np.eye(n)
                if not np.allclose(self.noise_matrix, expected):
                    raise ConfigError(
                        "noise_matrix conflicts with isotropic_sigma"
                    )


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, horizon, scheme, seed and initial state of one run."""

    dt: float
    n_steps: int
    scheme: Scheme = Scheme.STRONG_RK15
    seed: int = 0
    initial_state: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive and finite, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if not isinstance(self.scheme, Scheme):
            raise ConfigError(f"unknown scheme: {self.scheme!r}")


@dataclass
class Trajectory:
    """A sampled path: row k of ``values`` is the state at time k * dt.

    ``dt`` is the spacing of the stored samples, which equals the
    integration step unless the run was thinned with ``record_every``.
    ``seed`` is None for trajectories read back from disk.
    """

    dt: float
    values: np.ndarray
    channel_labels: tuple
    seed: Optional[int] = None

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) * self.dt

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def component(self, label: str) -> np.ndarray:
        try:
            j = self.channel_labels.index(label)
        except ValueError:
            raise ConfigError(
                f"no channel {label!r}; have {self.channel_labels}"
            ) from None
        return self.values[:, j]


def path_seed(seed: int, index: int) -> int:
    """Sub-seed for ensemble member ``index`` derived from ``seed``.

    Stable across platforms and independent of how many members run or in
    which order; member k of an ensemble is bit-identical to a single path
    integrated with this sub-seed.
    """
    if seed < 0 or index < 0:
        raise ConfigError("seed and index must be >= 0")
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _generator(seed: int) -> np.random.Generator:
    # Philox is counter based: the draw at a given chunk offset is a pure
    # function of (key, counter), which is what makes runs order independent.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed)])))


def _batched(system: SdeSystem) -> Callable[[np.ndarray], np.ndarray]:
    """Drift acting on (P, n) stacks regardless of ``system.vectorized``."""
    if system.vectorized:
        return system.drift

    f = system.drift

    def apply(states: np.ndarray) -> np.ndarray:
        flat = states.reshape(-1, states.shape[-1])
        out = np.stack([np.asarray(f(row), dtype=float) for row in flat])
        return out.reshape(states.shape)

    return apply


class _IncrementSource:
    """Chunked (dW, dZ) arrays of shape (m, P, n) for the step kernel."""

    def __init__(self, rngs, dim, dt):
        self._rngs = rngs
        self._dim = dim
        self._sq = np.sqrt(dt)
        self._z = dt ** 1.5 / 2.0
        self._inv3 = 1.0 / np.sqrt(3.0)

    def take(self, n_steps: int):
        u = np.stack(
            [rng.standard_normal((n_steps, self._dim, 2)) for rng in self._rngs],
            axis=1,
        )
        dw = self._sq * u[..., 0]
        dz = self._z * (u[..., 0] + self._inv3 * u[..., 1])
        return dw, dz


class _ArraySource:
    """Pre-composed increments, used by the convergence harness."""

    def __init__(self, dw, dz):
        self._dw = dw
        self._dz = dz
        self._pos = 0

    def take(self, n_steps: int):
        k = self._pos
        self._pos += n_steps
        return self._dw[k:self._pos], self._dz[k:self._pos]


def _check_state(y, step_index, path_ids):
    ok = np.abs(y) <= TRUST_RADIUS
    if ok.all():
        return
    bad = int(np.argmax(~ok.all(axis=1)))
    pid = path_ids[bad] if path_ids is not None else None
    where = "" if pid is None else f" (path {pid})"
    raise DivergenceError(
        f"state left |y| <= {TRUST_RADIUS:g} at step {step_index}{where}",
        step_index=step_index,
        path_index=pid,
    )


def _run(system, scheme, y0, dt, n_steps, source, record_every, path_ids=None):
    """Advance P paths in lock step; returns samples (n_rec + 1, P, n)."""
    F = _batched(system)
    S = system.noise_matrix
    n = system.dimension
    m = S.shape[1]
    P = y0.shape[0]
    sq = np.sqrt(dt)

    n_rec = n_steps // record_every
    rec = np.empty((n_rec + 1, P, n))
    rec[0] = y0
    y = y0.copy()

    # stage offsets for the 3/2 scheme: rows j and m + j are +/- sqrt(h) S_j
    offsets = np.concatenate([sq * S.T, -sq * S.T])[:, None, :]  # (2m, 1, n)

    # chunk draws; the per-path stream is element ordered, so the chunk
    # size never changes results, only the allocation high-water mark
    step_budget = max(1, _CHUNK // P)
    done = 0
    while done < n_steps:
        span = min(step_budget, n_steps - done)
        dW, dZ = source.take(span)
        for i in range(span):
            k = done + i
            if scheme is Scheme.EULER_MARUYAMA:
                y = y + dt * F(y) + dW[i] @ S.T
            else:
                a0 = F(y)
                stages = (y + (dt / m) * a0)[None] + offsets      # (2m, P, n)
                A = F(stages)
                diff = A[:m] - A[m:]
                curv = A[:m] + A[m:] - 2.0 * a0[None]
                y = (
                    y
                    + dt * a0
                    + dW[i] @ S.T
                    + np.einsum("jpn,pj->pn", diff, dZ[i]) / (2.0 * sq)
                    + curv.sum(axis=0) * (dt / 4.0)
                )
            _check_state(y, k, path_ids)
            if (k + 1) % record_every == 0:
                rec[(k + 1) // record_every] = y
        done += span
    return rec


def _initial(system, config) -> np.ndarray:
    y0 = np.asarray(config.initial_state, dtype=float)
    if y0.shape != (system.dimension,):
        raise ConfigError(
            f"initial_state must have shape ({system.dimension},), got {y0.shape}"
        )
    return y0


def _labels(system, channel_labels):
    if channel_labels is None:
        return tuple(f"y{i + 1}" for i in range(system.dimension))
    labels = tuple(channel_labels)
    if len(labels) != system.dimension:
        raise ConfigError("one channel label per state component is required")
    return labels


def _validated_record_every(config, record_every):
    if record_every < 1 or config.n_steps % record_every:
        raise ConfigError(
            f"record_every must divide n_steps ({config.n_steps}), got {record_every}"
        )
    return record_every


def integrate_path(system, config, record_every=1, channel_labels=None) -> Trajectory:
    """Integrate a single path; bit-reproducible for a given config.

    ``record_every`` thins the stored samples: with value q the returned
    trajectory holds every q-th state and its ``dt`` is q times the
    integration step.
    """
    record_every = _validated_record_every(config, record_every)
    y0 = _initial(system, config)[None]
    source = _IncrementSource([_generator(config.seed)], system.dimension, config.dt)
    rec = _run(system, config.scheme, y0, config.dt, config.n_steps, source, record_every)
    return Trajectory(
        dt=config.dt * record_every,
        values=rec[:, 0, :],
        channel_labels=_labels(system, channel_labels),
        seed=config.seed,
    )


def _member_config(config, k):
    return IntegratorConfig(
        dt=config.dt,
        n_steps=config.n_steps,
        scheme=config.scheme,
        seed=path_seed(config.seed, k),
        initial_state=config.initial_state,
    )


def integrate_ensemble(
    system, config, n_paths, record_every=1, channel_labels=None, threads=None
) -> list:
    """Integrate ``n_paths`` independent paths.

    Member k draws from the sub-seed ``path_seed(config.seed, k)``, so the
    result is independent of evaluation order and of ``threads``; a one-path
    ensemble reproduces ``integrate_path`` under that sub-seed exactly.
    Vectorized systems advance all members in lock step.
    """
    if n_paths < 1:
        raise ConfigError(f"n_paths must be >= 1, got {n_paths}")
    record_every = _validated_record_every(config, record_every)
    labels = _labels(system, channel_labels)

    if system.vectorized:
        y0 = np.tile(_initial(system, config), (n_paths, 1))
        rngs = [_generator(path_seed(config.seed, k)) for k in range(n_paths)]
        source = _IncrementSource(rngs, system.dimension, config.dt)
        rec = _run(
            system, config.scheme, y0, config.dt, config.n_steps, source,
            record_every, path_ids=list(range(n_paths)),
        )
        return [
            Trajectory(
                dt=config.dt * record_every,
                values=rec[:, k, :].copy(),
                channel_labels=labels,
                seed=path_seed(config.seed, k),
            )
            for k in range(n_paths)
        ]

    def run_one(k):
        return integrate_path(
            system, _member_config(config, k), record_every, labels
        )

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_one, range(n_paths)))
    return [run_one(k) for k in range(n_paths)]


# ---------------------------------------------------------------------------
# strong-order measurement


@dataclass(frozen=True)
class OrderEstimate:
    """Log-log slope of RMS endpoint error against step size."""

    slope: float
    dts: np.ndarray
    rms_errors: np.ndarray
    scheme: Scheme


def strong_order_estimate(
    system,
    initial_state,
    t_final,
    dts,
    n_paths,
    scheme=Scheme.STRONG_RK15,
    seed=0,
    exact_endpoint=None,
    refine=16,
) -> OrderEstimate:
    """Measure the strong convergence order of ``scheme`` on ``system``.

    All step sizes consume the same Brownian paths: increments are generated
    on a fine grid (the smallest dt divided by ``refine``) and summed into
    coarse ones, area increments included.  The error at each dt is the RMS
    over paths of the euclidean endpoint distance to the reference, which is
    ``exact_endpoint(initial_state, h_fine, dW_fine, dZ_fine)`` when given
    (use :func:`ou_exact_endpoint` for the linear test system) and otherwise
    the same scheme run on the fine grid.

    Returns the least-squares slope of log RMS error against log dt.
    """
    dts = np.asarray(sorted(dts, reverse=True), dtype=float)
    if dts.size < 3:
        raise ConfigError("at least 3 step sizes are required")
    if n_paths < 2:
        raise ConfigError("at least 2 paths are required")
    hf = dts[-1] / refine
    nf = int(round(t_final / hf))
    if not np.isclose(nf * hf, t_final, rtol=1e-12):
        raise ConfigError("t_final must be an integer multiple of min(dts)/refine")
    ratios = []
    for dt in dts:
        r = int(round(dt / hf))
        if not (np.isclose(r * hf, dt, rtol=1e-12) and nf % r == 0):
            raise ConfigError(
                f"dt {dt} must be an integer multiple of the fine step {hf}"
            )
        ratios.append(r)

    y0 = np.asarray(initial_state, dtype=float)
    if y0.shape != (system.dimension,):
        raise ConfigError(
            f"initial_state must have shape ({system.dimension},), got {y0.shape}"
        )
    y0 = np.tile(y0, (n_paths, 1))

    rngs = [_generator(path_seed(seed, k)) for k in range(n_paths)]
    fine = _IncrementSource(rngs, system.dimension, hf)
    dw_f, dz_f = fine.take(nf)

    if exact_endpoint is not None:
        reference = exact_endpoint(y0[0], hf, dw_f, dz_f)
    else:
        rec = _run(system, scheme, y0, hf, nf, _ArraySource(dw_f, dz_f), nf)
        reference = rec[-1]

    rms = np.empty(dts.size)
    for i, (dt, r) in enumerate(zip(dts, ratios)):
        nc = nf // r
        shape = (nc, r) + dw_f.shape[1:]
        bw = dw_f.reshape(shape)
        bz = dz_f.reshape(shape)
        dw = bw.sum(axis=1)
        dz = bz.sum(axis=1) + hf * (np.cumsum(bw, axis=1) - bw).sum(axis=1)
        rec = _run(system, scheme, y0, dt, nc, _ArraySource(dw, dz), nc)
        err = rec[-1] - reference
        rms[i] = np.sqrt(np.mean(np.sum(err * err, axis=1)))
    slope = float(np.polyfit(np.log(dts), np.log(rms), 1)[0])
    return OrderEstimate(slope=slope, dts=dts, rms_errors=rms, scheme=scheme)


def ornstein_uhlenbeck(lambda_, sigma, dimension=1) -> SdeSystem:
    """The linear relaxation process dz = -lambda z dt + sigma dW."""
    if lambda_ <= 0:
        raise ConfigError(f"lambda_ must be > 0, got {lambda_}")
    lam = float(lambda_)

    def drift(y):
        return -lam * np.asarray(y, dtype=float)

    return SdeSystem(
        dimension=dimension,
        drift=drift,
        isotropic_sigma=float(sigma),
        vectorized=True,
    )


def ou_exact_endpoint(lambda_, sigma):
    """Pathwise endpoint of the linear process from fine-grid increments.

    The stochastic convolution  int_0^T e^{-lambda (T - s)} dW  is evaluated
    per fine step through second order,  e^{lambda t_k} (dW (1 + lambda h)
    - lambda dZ),  so the reference error is O(h_fine^2): negligible against
    the O(h^1..h^2) scheme errors measured at the coarse steps.
    """
    lam = float(lambda_)
    sig = float(sigma)

    def endpoint(y0, h, dw, dz):
        nf = dw.shape[0]
        t_final = nf * h
        t = np.arange(nf) * h
        decay = np.exp(-lam * (t_final - t))[:, None, None]
        conv = (decay * (dw * (1.0 + lam * h) - lam * dz)).sum(axis=0)
        return np.exp(-lam * t_final) * y0[None, :] + sig * conv

    return endpoint
