"""Analytic flight trajectories with closed-form inertial rates.

The vehicle flies east along the equator from zero longitude, latitude and
height with east-velocity rate ``a sin(w t)``, while the body either keeps
the local-level attitude (``level``) or performs classical coning
(``coning``). Truth is generated in the local-level frame and mapped to the
Earth frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .baselines import LlNavState
from .earth import WGS84, EarthModel, cne_from_geodetic, ecef2lla, gravity_n, lla2ecef, radii
from .geomath import dcm_to_quat, quat_conj, quat_mul, quat_sandwich, vec_to_quat
from .imu import ImuBatch
from .integrator import NavState
from .quadrature import integrate_intervals


@dataclass(frozen=True)
class TrajectoryParams:
    """Flight profile. Defaults reproduce the reference simulation set-up."""

    a: float = 10.0
    w: float = 0.02 * math.pi
    v0: float = 500.0
    zeta: float = 0.74 * math.pi
    alpha: float = math.radians(10.0)
    mode: Literal["coning", "level"] = "coning"
    sample_rate: float = 100.0
    duration: float = 4000.0

    def __post_init__(self) -> None:
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ValueError("sample_rate and duration must be positive")
        if not 0.0 <= self.alpha < math.pi:
            raise ValueError("coning angle must lie in [0, pi)")
        if self.mode not in ("coning", "level"):
            raise ValueError(f"unknown trajectory mode {self.mode!r}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass(frozen=True, eq=False)
class TruthState:
    """Ground truth at one or more epochs (leading axis = time when vectorized)."""

    t: NDArray
    q_nb: NDArray  # body -> NUE
    v_n: NDArray
    lla: NDArray
    q_eb: NDArray  # body -> ECEF
    v_e: NDArray
    p_e: NDArray

    def nav_state(self, i: int | None = None) -> NavState:
        if i is None:
            return NavState(self.q_eb, self.v_e, self.p_e, float(self.t))
        return NavState(self.q_eb[i], self.v_e[i], self.p_e[i], float(self.t[i]))

    def ll_state(self, i: int | None = None) -> LlNavState:
        if i is None:
            return LlNavState(self.q_nb, self.v_n, self.lla, float(self.t))
        return LlNavState(self.q_nb[i], self.v_n[i], self.lla[i], float(self.t[i]))


def _attitude(params: TrajectoryParams, t: NDArray) -> tuple[NDArray, NDArray]:
    q = np.zeros(t.shape + (4,))
    dq = np.zeros_like(q)
    if params.mode == "level":
        q[..., 0] = 1.0
        return q, dq
    ca, sa = math.cos(params.alpha / 2), math.sin(params.alpha / 2)
    zt = params.zeta * t
    q[..., 0] = ca
    q[..., 2] = sa * np.cos(zt)
    q[..., 3] = sa * np.sin(zt)
    dq[..., 2] = -params.zeta * sa * np.sin(zt)
    dq[..., 3] = params.zeta * sa * np.cos(zt)
    return q, dq


def _kinematics(params: TrajectoryParams, t: NDArray, earth: EarthModel):
    a, w, v0 = params.a, params.w, params.v0
    zero = np.zeros_like(t)
    r_e, _ = radii(0.0, earth)
    v_east = v0 - (a * np.cos(w * t) - a) / w
    v_n = np.stack([zero, zero, v_east], axis=-1)
    dv_n = np.stack([zero, zero, a * np.sin(w * t)], axis=-1)
    lon = (v0 * t - (a * np.sin(w * t) - a * w * t) / w**2) / r_e
    lla = np.stack([lon, zero, zero], axis=-1)
    return v_n, dv_n, lla


def truth_state(params: TrajectoryParams, t: ArrayLike, earth: EarthModel = WGS84) -> TruthState:
    """Analytic attitude, velocity and position at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    q_nb, _ = _attitude(params, t)
    v_n, _, lla = _kinematics(params, t, earth)
    c_ne = cne_from_geodetic(lla[..., 0], lla[..., 1])
    q_en = dcm_to_quat(c_ne)
    q_eb = quat_mul(q_en, q_nb)
    v_e = np.einsum("...ij,...j->...i", c_ne, v_n)
    p_e = lla2ecef(lla, earth)
    return TruthState(t, q_nb, v_n, lla, q_eb, v_e, p_e)


def truth_rates(params: TrajectoryParams, t: ArrayLike, earth: EarthModel = WGS84) -> tuple[NDArray, NDArray]:
    """Body angular rate ``omega_ib^b`` and specific force ``f^b`` at ``t``."""
    t = np.asarray(t, dtype=float)
    q, dq = _attitude(params, t)
    v_n, dv_n, lla = _kinematics(params, t, earth)
    lat, h = lla[..., 1], lla[..., 2]
    r_e, r_n = radii(lat, earth)
    w_ie = np.stack([earth.omega * np.cos(lat), earth.omega * np.sin(lat), np.zeros_like(lat)], axis=-1)
    w_en = np.stack(
        [v_n[..., 2] / (r_e + h), v_n[..., 2] * np.tan(lat) / (r_e + h), -v_n[..., 0] / (r_n + h)], axis=-1
    )
    w_in = w_ie + w_en
    omega_ib = quat_mul(quat_conj(q), 2.0 * dq + quat_mul(vec_to_quat(w_in), q))[..., 1:]
    accel_n = dv_n + np.cross(2.0 * w_ie + w_en, v_n) - gravity_n(lat, h, earth)
    f_b = quat_sandwich(quat_conj(q), accel_n)
    return omega_ib, f_b


def _rates_flat(params: TrajectoryParams, earth: EarthModel):
    def f(t: NDArray) -> NDArray:
        w, fb = truth_rates(params, t, earth)
        return np.concatenate([w, fb], axis=-1)

    return f


def _phase_rate(params: TrajectoryParams) -> float:
    # fastest phase in the integrand; sets the abscissa rounding floor
    return max(abs(params.zeta) if params.mode == "coning" else 0.0, abs(params.w))


def synth_stream(
    params: TrajectoryParams,
    earth: EarthModel = WGS84,
    t_start: float = 0.0,
    n_samples: int | None = None,
    rtol: float = 1e-15,
    chunk: int = 20000,
) -> tuple[NDArray, NDArray, NDArray]:
    """Exact angular and velocity increments for consecutive sample periods.

    Returns ``(t_end, dtheta, dv)`` with ``t_end[k]`` the end of sample ``k``.
    """
    n = params.n_samples if n_samples is None else n_samples
    h = 1.0 / params.sample_rate
    edges = t_start + h * np.arange(n + 1)
    f = _rates_flat(params, earth)
    out = np.empty((n, 6))
    for i in range(0, n, chunk):
        j = min(n, i + chunk)
        out[i:j] = integrate_intervals(
            f, edges[i:j], edges[i + 1 : j + 1], rtol=rtol, phase_rate=_phase_rate(params)
        )
    return edges[1:], out[:, :3], out[:, 3:]


def synth_increments(
    params: TrajectoryParams,
    t_a: float,
    t_b: float,
    n: int,
    earth: EarthModel = WGS84,
    rtol: float = 1e-15,
) -> ImuBatch:
    """Increment batch of ``n`` equal subintervals spanning ``[t_a, t_b]``."""
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")
    edges = np.linspace(t_a, t_b, n + 1)
    inc = integrate_intervals(
        _rates_flat(params, earth), edges[:-1], edges[1:], rtol=rtol, phase_rate=_phase_rate(params)
    )
    return ImuBatch(t_a, t_b - t_a, inc[:, :3], inc[:, 3:], "increments")


def damp_vertical(state, earth: EarthModel = WGS84):
    """Zero the up velocity and the height, keeping latitude and longitude."""
    if isinstance(state, LlNavState):
        v = state.v.copy()
        v[1] = 0.0
        p = state.p.copy()
        p[2] = 0.0
        return replace(state, v=v, p=p)
    if isinstance(state, NavState):
        lla = ecef2lla(state.p, earth)
        c_ne = cne_from_geodetic(lla[0], lla[1])
        v_n = c_ne.T @ state.v
        v_n[1] = 0.0
        lla[2] = 0.0
        return NavState(state.q, c_ne @ v_n, lla2ecef(lla, earth), state.t)
    raise TypeError(f"cannot damp {type(state).__name__}")
