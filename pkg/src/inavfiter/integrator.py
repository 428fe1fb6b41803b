"""Functional-iteration navigation update in the Earth frame.

One update interval of ``N`` inertial samples is processed as follows: the
angular rate and specific force are fitted with Chebyshev series, the
attitude quaternion is iterated to convergence, then velocity and position
are iterated together using the converged attitude. Every quantity is
carried as a Chebyshev series over the whole interval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .chebyshev import (
    ChebSeries,
    cosine_node_coeffs,
    cosine_nodes,
    fit_from_increments,
    fit_from_samples,
    integrate_coeffs,
    product_coeffs,
)
from .earth import WGS84, EarthModel, gravity_ecef
from .geomath import quat_conj, quat_mul, quat_to_rotvec, rotvec_to_quat, vec_to_quat
from .imu import ImuBatch

log = logging.getLogger(__name__)

__all__ = [
    "DivergenceError",
    "IterConfig",
    "NavState",
    "IterDiagnostics",
    "NavSolution",
    "attitude_iterate",
    "transformed_force_integral",
    "gravity_approx",
    "velpos_iterate",
    "update_interval",
    "navigate",
    "ReducedConfigRecord",
    "reduced_config_check",
]


class DivergenceError(FloatingPointError):
    """An iteration produced non-finite coefficients."""


@dataclass(frozen=True)
class IterConfig:
    """Degrees, iteration limits and update order of one update interval.

    ``None`` entries take the defaults used for the reference experiments:
    fit degrees ``N - 1``, truncation degrees ``N + 1``, ``max_iter = N + 1``.
    """

    N: int = 8
    n_omega: int | None = None
    n_f: int | None = None
    m_q: int | None = None
    m_v: int | None = None
    m_p: int | None = None
    m_g: int = 5
    P: int = 5
    max_iter: int | None = None
    tol: float = 1e-16
    order: Literal["standard", "swapped"] = "standard"

    def __post_init__(self) -> None:
        n = self.N
        if n < 2:
            raise ValueError("N must be at least 2")
        for name, default in (("n_omega", n - 1), ("n_f", n - 1), ("m_q", n + 1),
                              ("m_v", n + 1), ("m_p", n + 1), ("max_iter", n + 1)):
            if getattr(self, name) is None:
                object.__setattr__(self, name, default)
        if self.n_omega > n - 1 or self.n_f > n - 1:
            raise ValueError("fit degrees must not exceed N - 1")
        if min(self.n_omega, self.n_f, self.m_q, self.m_v, self.m_p, self.m_g) < 0:
            raise ValueError("degrees must be non-negative")
        # a degree-P coefficient from P cosine nodes is identically zero, so m_g == P is allowed
        if self.P < self.m_g:
            raise ValueError("P must be at least m_g")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not self.tol >= 0:
            raise ValueError("tol must be non-negative")
        if self.order not in ("standard", "swapped"):
            raise ValueError(f"unknown update order {self.order!r}")


@dataclass(frozen=True, eq=False)
class NavState:
    """Earth-frame navigation state at one epoch.

    ``q`` rotates body vectors into the Earth frame (``v_e = q o v_b o q*``),
    ``v`` is the ground velocity in ECEF axes and ``p`` the ECEF position.
    """

    q: NDArray[np.float64]
    v: NDArray[np.float64]
    p: NDArray[np.float64]
    t: float = 0.0

    def __post_init__(self) -> None:
        for name, size in (("q", 4), ("v", 3), ("p", 3)):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (size,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be {size} finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "t", float(self.t))

    def as_array(self) -> NDArray[np.float64]:
        """``[t, q0..q3, vx, vy, vz, x, y, z]``."""
        return np.concatenate([[self.t], self.q, self.v, self.p])


@dataclass
class IterDiagnostics:
    iterations: int = 0
    converged: bool = False
    residuals: list[float] = field(default_factory=list)


@dataclass(eq=False)
class NavSolution:
    """Result of one update interval; the series cover the whole interval."""

    q_series: ChebSeries
    v_series: ChebSeries
    p_series: ChebSeries
    attitude: IterDiagnostics
    velpos: IterDiagnostics
    start: NavState
    end_state: NavState

    @property
    def converged(self) -> bool:
        return self.attitude.converged and self.velpos.converged

    def state_at(self, t: float) -> NavState:
        """State at absolute time ``t`` inside the interval."""
        tau = 2.0 * (t - self.start.t) / self.q_series.t_span - 1.0
        tau = float(np.clip(tau, -1.0, 1.0))
        return NavState(self.q_series(tau), self.v_series(tau), self.p_series(tau), t)


def _rss_change(new: NDArray, old: NDArray) -> float:
    n = max(new.shape[0], old.shape[0])
    diff = np.zeros((n, new.shape[1]))
    diff[: new.shape[0]] += new
    diff[: old.shape[0]] -= old
    return math.hypot(*diff.ravel())


def _check_finite(coeffs: NDArray, what: str) -> None:
    if not np.all(np.isfinite(coeffs)):
        raise DivergenceError(f"{what} iteration produced non-finite coefficients")


def attitude_iterate(
    q0: ArrayLike,
    omega: ChebSeries,
    omega_e: ArrayLike,
    cfg: IterConfig,
    q_init: ChebSeries | None = None,
) -> tuple[ChebSeries, IterDiagnostics]:
    """Iterate the quaternion kinematics over one interval.

    Parameters
    ----------
    q0 : array-like, shape (4,)
        Attitude at the interval start.
    omega : ChebSeries
        Fitted body angular rate (rad/s), ``t_span`` set to the interval length.
    omega_e : array-like, shape (3,)
        Earth rate in the Earth frame (rad/s).
    cfg : IterConfig
    q_init : ChebSeries, optional
        Starting iterate; the constant ``q0`` when omitted.
    """
    q0 = np.asarray(q0, dtype=float)
    rate = vec_to_quat(omega.coeffs)
    we = vec_to_quat(np.asarray(omega_e, dtype=float))
    scale = omega.t_span / 4.0
    b = q0[None, :] if q_init is None else q_init.coeffs
    diag = IterDiagnostics()
    for it in range(1, cfg.max_iter + 1):
        # overflow surfaces as DivergenceError below, not as warnings
        with np.errstate(over="ignore", invalid="ignore"):
            integrand = product_coeffs(b, rate, quat_mul)
            integrand[: b.shape[0]] -= quat_mul(we, b)
            new = scale * integrate_coeffs(integrand)[: cfg.m_q + 1]
            new[0] += q0
        _check_finite(new, "attitude")
        res = _rss_change(new, b)
        b = new
        diag.iterations = it
        diag.residuals.append(res)
        if res < cfg.tol:
            diag.converged = True
            break
    return ChebSeries(b, omega.t_span), diag


def transformed_force_integral(q_series: ChebSeries, f_series: ChebSeries) -> ChebSeries:
    """Series of ``int_{-1}^{tau} q o f o q* dtau`` (mapped variable, no ``t_N/2``).

    The attitude series is used without normalization.
    """
    b = q_series.coeffs
    qf = product_coeffs(b, vec_to_quat(f_series.coeffs), quat_mul)
    qfq = product_coeffs(qf, quat_conj(b), quat_mul)
    return ChebSeries(integrate_coeffs(qfq[:, 1:]), f_series.t_span)


def gravity_approx(p_series: ChebSeries, cfg: IterConfig, earth: EarthModel = WGS84) -> ChebSeries:
    """Degree-``m_g`` series of ECEF gravity along a position series."""
    g = gravity_ecef(p_series(cosine_nodes(cfg.P)), earth)
    coeffs = np.zeros((cfg.m_g + 1, 3))
    m = min(cfg.m_g, cfg.P - 1)
    coeffs[: m + 1] = cosine_node_coeffs(g, m)
    return ChebSeries(coeffs, p_series.t_span)


def _cross_rows(w: NDArray, coeffs: NDArray) -> NDArray:
    return np.cross(w[None, :], coeffs)


def _padded_sum(*arrays: NDArray) -> NDArray:
    n = max(a.shape[0] for a in arrays)
    out = np.zeros((n, arrays[0].shape[1]))
    for a in arrays:
        out[: a.shape[0]] += a
    return out


def velpos_iterate(
    v0: ArrayLike,
    p0: ArrayLike,
    force_integral: ChebSeries,
    omega_e: ArrayLike,
    cfg: IterConfig,
    earth: EarthModel = WGS84,
    gravity: Callable[[ChebSeries], ChebSeries] | None = None,
    v_init: ChebSeries | None = None,
    p_init: ChebSeries | None = None,
) -> tuple[ChebSeries, ChebSeries, IterDiagnostics]:
    """Iterate velocity and position over one interval.

    ``gravity`` maps a position series to a gravity series and defaults to
    :func:`gravity_approx`. With ``cfg.order == "swapped"`` the position is
    updated first and its gravity is used in the same iteration's velocity
    update.
    """
    v0 = np.asarray(v0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    w = np.asarray(omega_e, dtype=float)
    span = force_integral.t_span
    half = 0.5 * span
    if gravity is None:
        def gravity(ps: ChebSeries) -> ChebSeries:
            return gravity_approx(ps, cfg, earth)

    vel = v0[None, :] if v_init is None else v_init.coeffs
    pos = p0[None, :] if p_init is None else p_init.coeffs
    swapped = cfg.order == "swapped"
    diag = IterDiagnostics()
    for it in range(1, cfg.max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            new_pos = half * integrate_coeffs(vel)[: cfg.m_p + 1]
            new_pos[0] += p0
        _check_finite(new_pos, "position")
        g = gravity(ChebSeries(new_pos if swapped else pos, span)).coeffs
        with np.errstate(over="ignore", invalid="ignore"):
            accel = integrate_coeffs(_padded_sum(-2.0 * _cross_rows(w, vel), g))
            new_vel = half * _padded_sum(force_integral.coeffs, accel)[: cfg.m_v + 1]
            new_vel[0] += v0
        _check_finite(new_vel, "velocity")
        res = float(np.hypot(_rss_change(new_vel, vel), _rss_change(new_pos, pos)))
        vel, pos = new_vel, new_pos
        diag.iterations = it
        diag.residuals.append(res)
        if res < cfg.tol:
            diag.converged = True
            break
    return ChebSeries(vel, span), ChebSeries(pos, span), diag


def fit_batch(batch: ImuBatch, cfg: IterConfig) -> tuple[ChebSeries, ChebSeries]:
    """Chebyshev fits of angular rate and specific force for one batch."""
    if batch.n_samples != cfg.N:
        raise ValueError(f"batch has {batch.n_samples} samples, config expects {cfg.N}")
    if batch.kind == "increments":
        omega = fit_from_increments(batch.gyro, cfg.n_omega, batch.t_span)
        force = fit_from_increments(batch.accel, cfg.n_f, batch.t_span)
    else:
        omega = fit_from_samples(batch.gyro, cfg.n_omega, t_span=batch.t_span)
        force = fit_from_samples(batch.accel, cfg.n_f, t_span=batch.t_span)
    return omega, force


def update_interval(
    state: NavState,
    batch: ImuBatch,
    cfg: IterConfig | None = None,
    earth: EarthModel = WGS84,
) -> NavSolution:
    """Advance ``state`` across the interval covered by ``batch``.

    Attitude is iterated to completion before velocity/position start.
    Hitting ``max_iter`` is logged, not raised; the last iterate is used.
    """
    cfg = IterConfig() if cfg is None else cfg
    if not np.isclose(batch.t_start, state.t, rtol=0.0, atol=1e-9 * max(1.0, abs(state.t))):
        raise ValueError(f"batch starts at {batch.t_start}, state is at {state.t}")
    omega, force = fit_batch(batch, cfg)
    w = earth.omega_ie_e
    q_series, att_diag = attitude_iterate(state.q, omega, w, cfg)
    i_f = transformed_force_integral(q_series, force)
    v_series, p_series, vp_diag = velpos_iterate(state.v, state.p, i_f, w, cfg, earth)
    if not (att_diag.converged and vp_diag.converged):
        log.debug("interval at t=%.3f hit max_iter (attitude %s, vel/pos %s)",
                  state.t, att_diag.converged, vp_diag.converged)
    end = NavState(q_series(1.0), v_series(1.0), p_series(1.0), state.t + batch.t_span)
    return NavSolution(q_series, v_series, p_series, att_diag, vp_diag, state, end)


def navigate(
    state: NavState,
    gyro: ArrayLike,
    accel: ArrayLike,
    sample_rate: float,
    cfg: IterConfig | None = None,
    earth: EarthModel = WGS84,
    kind: Literal["increments", "rates"] = "increments",
    after_interval: Callable[[NavState], NavState] | None = None,
) -> Iterator[NavSolution]:
    """Chain update intervals over a uniformly sampled stream.

    Trailing samples that do not fill an interval are ignored.
    ``after_interval`` may replace each end state before the next interval
    (used for vertical damping).
    """
    cfg = IterConfig() if cfg is None else cfg
    gyro = np.asarray(gyro, dtype=float)
    accel = np.asarray(accel, dtype=float)
    h = 1.0 / sample_rate
    n_int = gyro.shape[0] // cfg.N
    t0 = state.t
    for k in range(n_int):
        sl = slice(k * cfg.N, (k + 1) * cfg.N)
        batch = ImuBatch(state.t, cfg.N * h, gyro[sl], accel[sl], kind)
        sol = update_interval(state, batch, cfg, earth)
        end = sol.end_state
        # pin epochs to the sample grid so long runs do not drift
        end = NavState(end.q, end.v, end.p, t0 + (k + 1) * cfg.N * h)
        if after_interval is not None:
            end = after_interval(end)
        sol.end_state = end
        yield sol
        state = end


@dataclass(frozen=True)
class ReducedConfigRecord:
    """Two-sample correspondence between the iterated and classical attitude updates."""

    sigma_classical: NDArray[np.float64]
    sigma_iterated: NDArray[np.float64]
    discrepancy: float
    increment_size: float
    quaternion_gap: float


def reduced_config_check(dtheta1: ArrayLike, dtheta2: ArrayLike, T: float) -> ReducedConfigRecord:
    """Compare the 2nd attitude iterate with the two-sample coning correction.

    A linear rate fit (``N = 2``, ``n_omega = 1``) is iterated twice from the
    identity with the Earth rate switched off. Twice the vector part of that
    iterate is compared with ``dth1 + dth2 + 2/3 dth1 x dth2``.
    ``quaternion_gap`` is the principal angle between the normalized iterate
    and the classical rotation-vector quaternion.
    """
    d1 = np.asarray(dtheta1, dtype=float)
    d2 = np.asarray(dtheta2, dtype=float)
    sigma = d1 + d2 + (2.0 / 3.0) * np.cross(d1, d2)
    # m_q = 4 keeps the second iterate untruncated
    cfg = IterConfig(N=2, n_omega=1, n_f=1, m_q=4, max_iter=2, tol=0.0)
    omega = fit_from_increments(np.stack([d1, d2]), 1, T)
    q_series, _ = attitude_iterate([1.0, 0.0, 0.0, 0.0], omega, np.zeros(3), cfg)
    q2 = q_series(1.0)
    iterated = 2.0 * q2[1:]
    classical_q = rotvec_to_quat(sigma)
    gap = np.linalg.norm(quat_to_rotvec(quat_mul(quat_conj(classical_q), q2)))
    return ReducedConfigRecord(
        sigma_classical=sigma,
        sigma_iterated=iterated,
        discrepancy=float(np.linalg.norm(iterated - sigma)),
        increment_size=float(max(np.linalg.norm(d1), np.linalg.norm(d2))),
        quaternion_gap=float(gap),
    )
