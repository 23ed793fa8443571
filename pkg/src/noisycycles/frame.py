"""Limit-cycle geometry and the reduced phase/deviation model.

Given an autonomous ODE with an attracting limit cycle, this module locates
the cycle, equips it with a comoving orthogonal frame, and projects
isotropic white noise onto the frame to obtain a closed reduced SDE for the
phase tau (position along the cycle) and the deviation z0 (transverse
offset, expressed in the fixed initial normal hyperplane).

The frame U(t) solves

    dU/dt = -T(t) Tdot(t)^T U P0  +  Tdot(t) T0^T,      U(0) = Id,

where T is the unit tangent of the cycle, T0 = T(0), and P0 projects onto
the hyperplane normal to T0.  U stays orthogonal, carries T0 to T(t), and
its rate V = dU/dt has operator norm equal to |Tdot|; these properties are
enforced as invariants after construction.  The reduced model is then

    dz0 = J0(tau) z0 dt + sigma dW_d,
    dtau = dt + sigma dW_p / |f(L(tau))|,

with J0 the Jacobian of the drift seen from the frame, restricted to the
normal hyperplane.  For a planar cycle J0 is scalar and the integral of J0
over one period is the log of the nontrivial Floquet multiplier.

All per-cycle quantities are sampled on a uniform grid of ``grid_size``
points per period and interpolated with periodic cubic splines.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from .exceptions import (
    ConfigError,
    FixedPointError,
    NoCycleError,
    NumericsError,
    StabilityWarning,
)
from .sde import (
    _CHUNK,
    IntegratorConfig,
    SdeSystem,
    Trajectory,
    _generator,
    _validated_record_every,
    path_seed,
)

__all__ = [
    "CycleParameterization",
    "ComovingFrame",
    "ReducedModel",
    "find_limit_cycle",
    "build_frame",
    "reduce",
    "simulate_reduced",
    "reconstruct",
]

# ODE tolerances for cycle location; the period itself is pinned down by
# the solver's event root-finding, which is much tighter than these.
_ODE_RTOL = 1.0e-12
_ODE_ATOL = 1.0e-12
_ESCAPE_RADIUS = 1.0e6


@dataclass(frozen=True)
class CycleParameterization:
    """One period of an attracting limit cycle on a uniform time grid.

    ``grid`` holds ``m`` times covering [0, period); row i of the sample
    arrays belongs to grid[i].  ``J`` stacks the drift Jacobian at each
    sample, ``kappa`` is the curvature |dT/ds| and ``speed`` = |f(L)|.
    """

    period: float
    grid: np.ndarray
    L: np.ndarray
    f_on_L: np.ndarray
    T: np.ndarray
    J: np.ndarray
    kappa: np.ndarray
    speed: np.ndarray

    def __post_init__(self):
        norms = np.linalg.norm(self.T, axis=1)
        if np.abs(norms - 1.0).max() > 1e-10:
            raise NumericsError("cycle tangents are not unit vectors")
        if np.any(np.einsum("mi,mi->m", self.T, self.f_on_L) <= 0.0):
            raise NumericsError("cycle tangents are not aligned with the drift")

    @property
    def dimension(self) -> int:
        return self.L.shape[1]

    @property
    def grid_size(self) -> int:
        return self.grid.size

    def tangent_rate(self) -> np.ndarray:
        """dT/dt on the grid via the projected Jacobian, (I - TT^T) J T."""
        jt = np.einsum("mij,mj->mi", self.J, self.T)
        return jt - self.T * np.einsum("mi,mi->m", self.T, jt)[:, None]


@dataclass(frozen=True)
class ComovingFrame:
    """Orthogonal frame samples U, their rates V, and the initial normal
    basis (columns of ``basis_P0`` span the hyperplane normal to T(0))."""

    U: np.ndarray
    V: np.ndarray
    basis_P0: np.ndarray


@dataclass(frozen=True)
class ReducedModel:
    """Phase/deviation SDE coefficients sampled on the cycle grid."""

    J0: np.ndarray
    speed: np.ndarray
    sigma: float


def _drift_fn(ode: SdeSystem):
    def f(y):
        return np.asarray(ode.drift(np.asarray(y, dtype=float)), dtype=float)

    return f


def _require_deterministic(ode: SdeSystem):
    if ode.noise_matrix is not None and np.any(ode.noise_matrix != 0.0):
        raise ConfigError(
            "cycle detection needs the deterministic part only; "
            "build the system with sigma = 0"
        )


def find_limit_cycle(
    ode: SdeSystem,
    initial_guess,
    tol=1e-8,
    grid_size=1024,
    transient_time=100.0,
    max_time=1000.0,
) -> CycleParameterization:
    """Locate an attracting limit cycle reachable from ``initial_guess``.

    The guess is integrated for ``transient_time`` to land on the
    attractor, then a Poincare section is placed through the arrival state,
    normal to the local drift.  Successive positively-oriented crossings
    are collected (event root-finding pins each crossing time to machine
    precision) until the return map has converged; the period is the
    spacing of the last two crossings and one period is resampled on a
    uniform grid of ``grid_size`` points.

    Parameters
    ----------
    ode : SdeSystem
        Noise-free system; only the drift (and Jacobian, if set) is used.
    initial_guess : array_like
        Starting state in the cycle's basin of attraction.
    tol : float
        Cycle-closure tolerance: |L(period) - L(0)| <= tol (1 + |L(0)|).
    grid_size : int
        Samples per period, m.
    transient_time, max_time : float
        Relaxation horizon, and total horizon for the recurrence search.

    Raises
    ------
    FixedPointError
        If the trajectory settles on a state with vanishing drift.
    NoCycleError
        If no converged recurrence is found within ``max_time``.
    """
    _require_deterministic(ode)
    f = _drift_fn(ode)

    def rhs(t, y):
        return f(y)

    y0 = np.asarray(initial_guess, dtype=float)
    if y0.shape != (ode.dimension,):
        raise ConfigError(
            f"initial_guess must have shape ({ode.dimension},), got {y0.shape}"
        )
    if grid_size < 8:
        raise ConfigError("grid_size must be at least 8")

    def check_not_fixed_point(y):
        sp = np.linalg.norm(f(y))
        if sp < 1e-8 * (1.0 + np.linalg.norm(y)):
            raise FixedPointError(
                f"trajectory settled on a stationary point (drift norm {sp:.2e})"
            )
        return sp

    check_not_fixed_point(y0)
    relax = solve_ivp(
        rhs, (0.0, transient_time), y0, method="DOP853", rtol=1e-10, atol=1e-12
    )
    if not relax.success:
        raise NumericsError(f"transient integration failed: {relax.message}")
    ystar = relax.y[:, -1]
    sp = check_not_fixed_point(ystar)
    normal = f(ystar) / sp

    def section(t, y):
        return normal @ (y - ystar)

    section.direction = 1.0

    def escape(t, y):
        return y @ y - _ESCAPE_RADIUS**2

    escape.terminal = True

    # collect crossings window by window until two consecutive section
    # states coincide to 1e-10 (relative); their spacing is the period
    t_cur, y_cur = 0.0, ystar
    crossings_t, crossings_y = [], []
    converged = False
    while t_cur < max_time and not converged:
        span = min(transient_time, max_time - t_cur)
        sol = solve_ivp(
            rhs,
            (t_cur, t_cur + span),
            y_cur,
            method="DOP853",
            rtol=_ODE_RTOL,
            atol=_ODE_ATOL,
            events=[section, escape],
        )
        if not sol.success:
            raise NumericsError(f"recurrence search failed: {sol.message}")
        if sol.status == 1:
            raise NoCycleError(
                f"trajectory escaped |y| = {_ESCAPE_RADIUS:g} without recurring"
            )
        for te, ye in zip(sol.t_events[0], sol.y_events[0]):
            # a spiral into a focus keeps crossing the section with ever
            # smaller drift; catch that before the gaps look converged
            check_not_fixed_point(ye)
            crossings_t.append(te)
            crossings_y.append(ye)
            if len(crossings_y) >= 2:
                gap = np.linalg.norm(crossings_y[-1] - crossings_y[-2])
                if gap <= 1e-10 * (1.0 + np.linalg.norm(crossings_y[-1])):
                    converged = True
                    break
        t_cur = sol.t[-1]
        y_cur = sol.y[:, -1]
        check_not_fixed_point(y_cur)

    if not converged:
        if not crossings_t:
            raise NoCycleError(
                f"no section recurrence within the horizon {max_time:g}"
            )
        raise NoCycleError(
            f"return map did not converge within {max_time:g} "
            f"({len(crossings_t)} crossings seen)"
        )

    period = crossings_t[-1] - crossings_t[-2]
    anchor = crossings_y[-1]

    one_turn = solve_ivp(
        rhs,
        (0.0, period),
        anchor,
        method="DOP853",
        rtol=_ODE_RTOL,
        atol=1e-14,
        dense_output=True,
    )
    if not one_turn.success:
        raise NumericsError(f"cycle resampling failed: {one_turn.message}")
    closure = np.linalg.norm(one_turn.sol(period) - anchor)
    if closure > tol * (1.0 + np.linalg.norm(anchor)):
        raise NoCycleError(
            f"cycle does not close: |L(period) - L(0)| = {closure:.2e}"
        )

    grid = np.arange(grid_size) * (period / grid_size)
    L = one_turn.sol(grid).T
    f_on_L = (
        np.asarray(ode.drift(L), dtype=float)
        if ode.vectorized
        else np.array([f(p) for p in L])
    )
    speed = np.linalg.norm(f_on_L, axis=1)
    T = f_on_L / speed[:, None]
    J = _jacobian_samples(ode, f, L)

    cycle = CycleParameterization(
        period=float(period),
        grid=grid,
        L=L,
        f_on_L=f_on_L,
        T=T,
        J=J,
        kappa=np.zeros(grid_size),
        speed=speed,
    )
    kappa = np.linalg.norm(cycle.tangent_rate(), axis=1) / speed
    object.__setattr__(cycle, "kappa", kappa)
    return cycle


def _jacobian_samples(ode, f, points) -> np.ndarray:
    if ode.jacobian is not None:
        return np.array([np.asarray(ode.jacobian(p), dtype=float) for p in points])
    m, n = points.shape
    J = np.empty((m, n, n))
    for i, p in enumerate(points):
        step = 1e-6 * (1.0 + np.linalg.norm(p))
        for j in range(n):
            e = np.zeros(n)
            e[j] = step
            J[i, :, j] = (f(p + e) - f(p - e)) / (2.0 * step)
    return J


def _periodic_spline(grid, values, period) -> CubicSpline:
    t = np.concatenate([grid, [period]])
    v = np.concatenate([values, values[:1]], axis=0)
    return CubicSpline(t, v, axis=0, bc_type="periodic")


def _nearest_orthogonal(A) -> np.ndarray:
    u, _, vt = np.linalg.svd(A)
    return u @ vt


def _normal_basis(t0) -> np.ndarray:
    """Orthonormal completion of the tangent; columns ordered by the
    coordinate index they were seeded from, with the sign freedom pinned
    deterministically (in the plane: the tangent rotated -90 degrees, the
    outward normal of a counterclockwise cycle)."""
    n = t0.size
    if n == 2:
        return np.array([[t0[1]], [-t0[0]]])
    q, _ = np.linalg.qr(np.column_stack([t0, np.eye(n)]))
    b = q[:, 1:n]
    idx = np.argmax(np.abs(b), axis=0)
    return b * np.sign(b[idx, np.arange(n - 1)])


def build_frame(cycle: CycleParameterization, substeps=1) -> ComovingFrame:
    """Integrate the frame equation along the cycle grid.

    Classical RK4 with ``substeps`` stages per grid interval; after every
    step U is projected to the nearest orthogonal matrix (polar
    projection), and the drift from orthogonality before projection must
    stay below 1e-6 or the grid is judged too coarse.  All frame
    invariants are verified before returning.
    """
    m, n = cycle.L.shape
    t0 = cycle.T[0]
    p0 = np.eye(n) - np.outer(t0, t0)
    tan = _periodic_spline(cycle.grid, cycle.T, cycle.period)
    rate = _periodic_spline(cycle.grid, cycle.tangent_rate(), cycle.period)

    def dU(t, U):
        td = rate(t)
        return -np.outer(tan(t), td) @ U @ p0 + np.outer(td, t0)

    h = cycle.period / (m * substeps)
    U = np.empty((m, n, n))
    U[0] = np.eye(n)
    cur = np.eye(n)
    t = 0.0
    for i in range(1, m + 1):
        for _ in range(substeps):
            k1 = dU(t, cur)
            k2 = dU(t + h / 2.0, cur + h / 2.0 * k1)
            k3 = dU(t + h / 2.0, cur + h / 2.0 * k2)
            k4 = dU(t + h, cur + h * k3)
            cur = cur + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
            drift_from_orthogonal = np.linalg.norm(cur.T @ cur - np.eye(n))
            if drift_from_orthogonal > 1e-6:
                raise NumericsError(
                    f"frame lost orthogonality ({drift_from_orthogonal:.2e}) "
                    f"at t = {t:.4g}; rebuild with a finer grid or more substeps"
                )
            cur = _nearest_orthogonal(cur)
        if i < m:
            U[i] = cur

    V = np.array([dU(cycle.grid[i], U[i]) for i in range(m)])
    frame = ComovingFrame(U=U, V=V, basis_P0=_normal_basis(t0))
    _verify_frame(cycle, frame)
    return frame


def _verify_frame(cycle, frame):
    m, n = cycle.L.shape
    eye = np.eye(n)
    ortho = max(np.linalg.norm(u.T @ u - eye) for u in frame.U)
    carried = np.einsum("mij,j->mi", frame.U, cycle.T[0])
    tangent_dev = np.linalg.norm(carried - cycle.T, axis=1).max()
    # the rotation-rate identity is about the operator norm, not Frobenius
    rate_norm = np.array([np.linalg.norm(v, 2) for v in frame.V])
    lemma_dev = np.abs(
        rate_norm - np.linalg.norm(cycle.tangent_rate(), axis=1)
    ).max()
    if ortho > 1e-8 or tangent_dev > 1e-6 or lemma_dev > 1e-6:
        raise NumericsError(
            "frame invariants violated "
            f"(orthogonality {ortho:.2e}, tangent transport {tangent_dev:.2e}, "
            f"rate norm {lemma_dev:.2e}); rebuild with a finer grid"
        )


def reduce(cycle: CycleParameterization, frame: ComovingFrame, sigma) -> ReducedModel:
    """Project the drift Jacobian into the frame's normal coordinates.

    Sample i of the result is  B0^T U_i^T P_i J_i U_i B0  with P_i the
    projector normal to the tangent at sample i and B0 the initial normal
    basis; the noise level ``sigma`` is recorded for the reduced SDE.
    Emits :class:`StabilityWarning` when the one-period monodromy of J0 is
    not a contraction.
    """
    if sigma < 0.0 or not np.isfinite(sigma):
        raise ConfigError(f"sigma must be finite and >= 0, got {sigma}")
    U, B = frame.U, frame.basis_P0
    ub = np.einsum("mij,jk->mik", U, B)
    jub = np.einsum("mij,mjk->mik", cycle.J, ub)
    pjub = jub - cycle.T[:, :, None] * np.einsum("mi,mik->mk", cycle.T, jub)[:, None, :]
    j0 = np.einsum("jl,mjk->mlk", B, np.einsum("mji,mjk->mik", U, pjub))

    h = cycle.period / cycle.grid_size
    mono = np.eye(B.shape[1])
    closed = np.concatenate([j0, j0[:1]], axis=0)
    for i in range(cycle.grid_size):
        mono = expm(0.5 * h * (closed[i] + closed[i + 1])) @ mono
    radius = np.abs(np.linalg.eigvals(mono)).max()
    if radius >= 1.0:
        warnings.warn(
            f"one-period monodromy has spectral radius {radius:.3f} >= 1; "
            "the cycle is not attracting at this resolution",
            StabilityWarning,
        )
    return ReducedModel(J0=j0, speed=cycle.speed.copy(), sigma=float(sigma))


def simulate_reduced(
    model: ReducedModel,
    cycle: CycleParameterization,
    config: IntegratorConfig,
    record_every=1,
    n_paths=None,
):
    """Euler-Maruyama integration of the reduced phase/deviation SDE.

    J0 and the speed are evaluated at tau modulo the period through
    periodic cubic splines of their grid samples.  The Wiener components
    are drawn in the order (deviation ..., phase) from the same chunked
    pattern as the generic integrator, so for a planar cycle a run here
    consumes exactly the normals of ``simulate_hopf_linear`` at equal
    seeds.  The config's scheme field is not consulted: the coefficients
    are state dependent, which the derivative-free strong scheme does not
    cover.

    ``config.initial_state`` is (z0 ..., tau0), defaulting to (0, ..., 0):
    on the cycle at phase zero.  With ``n_paths`` set, member k uses
    ``path_seed(config.seed, k)`` and the returned arrays gain a leading
    path axis.

    Returns
    -------
    tau : ndarray, (N+1,) or (n_paths, N+1)
    z0 : ndarray, (N+1, n-1) or (n_paths, N+1, n-1)
    """
    record_every = _validated_record_every(config, record_every)
    n = cycle.dimension
    d = n - 1
    if len(config.initial_state) == 0:
        z_init = np.zeros(d)
        tau_init = 0.0
    elif len(config.initial_state) == n:
        z_init = np.asarray(config.initial_state[:d], dtype=float)
        tau_init = float(config.initial_state[-1])
    else:
        raise ConfigError(f"initial_state must be empty or (z0 ..., tau0) of length {n}")

    j0_sp = _periodic_spline(cycle.grid, model.J0, cycle.period)
    speed_sp = _periodic_spline(cycle.grid, model.speed, cycle.period)

    single = n_paths is None
    p = 1 if single else int(n_paths)
    if p < 1:
        raise ConfigError(f"n_paths must be >= 1, got {n_paths}")
    seeds = [config.seed] if single else [path_seed(config.seed, k) for k in range(p)]
    rngs = [_generator(s) for s in seeds]

    h = config.dt
    sq = np.sqrt(h)
    sig = model.sigma
    n_steps = config.n_steps
    n_rec = n_steps // record_every
    tau_out = np.empty((p, n_rec + 1))
    z_out = np.empty((p, n_rec + 1, d))
    tau = np.full(p, tau_init)
    z = np.tile(z_init, (p, 1))
    tau_out[:, 0] = tau
    z_out[:, 0] = z

    done = 0
    while done < n_steps:
        span = min(_CHUNK, n_steps - done)
        # frozen pattern: (steps, dim, 2) per path, normals in column 0
        xi = np.stack(
            [rng.standard_normal((span, n, 2))[..., 0] for rng in rngs], axis=1
        )
        for i in range(span):
            wrapped = np.mod(tau, cycle.period)
            z = z + h * np.einsum("pij,pj->pi", j0_sp(wrapped), z) + (sig * sq) * xi[i, :, :d]
            tau = tau + h + (sig * sq) * xi[i, :, d] / speed_sp(wrapped)
            k = done + i + 1
            if k % record_every == 0:
                tau_out[:, k // record_every] = tau
                z_out[:, k // record_every] = z
        done += span

    if single:
        return tau_out[0], z_out[0]
    return tau_out, z_out


def reconstruct(cycle, frame, tau, z0, dt=1.0, channel_labels=None) -> Trajectory:
    """Lift reduced coordinates back to the full space, L(tau) + U(tau) B0 z0.

    ``tau`` wraps modulo the period; L and U are interpolated with
    periodic cubic splines on the cycle grid.  ``dt`` only sets the time
    axis of the returned trajectory (the sample spacing of the series).
    """
    tau = np.asarray(tau, dtype=float)
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    if tau.ndim != 1 or z0.shape != (tau.size, cycle.dimension - 1):
        raise ConfigError(
            f"need tau (N,) and z0 (N, {cycle.dimension - 1}); "
            f"got {tau.shape} and {z0.shape}"
        )
    l_sp = _periodic_spline(cycle.grid, cycle.L, cycle.period)
    u_sp = _periodic_spline(cycle.grid, frame.U, cycle.period)
    wrapped = np.mod(tau, cycle.period)
    emb = z0 @ frame.basis_P0.T
    values = l_sp(wrapped) + np.einsum("tij,tj->ti", u_sp(wrapped), emb)
    labels = _labels_for(cycle.dimension, channel_labels)
    return Trajectory(dt=float(dt), values=values, channel_labels=labels)


def _labels_for(dim, channel_labels):
    if channel_labels is None:
        return tuple(f"y{i + 1}" for i in range(dim))
    labels = tuple(channel_labels)
    if len(labels) != dim:
        raise ConfigError("one channel label per state component is required")
    return labels
