"""Two-sample strapdown algorithms in the local-level (North-Up-East) frame.

Both step functions consume two consecutive angular/velocity increments
covering an update interval ``T``. Earth rate, transport rate, gravity and
the curvature matrix are frozen at the interval start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .earth import WGS84, EarthModel, curvature_matrix, earth_rate_n, gravity_n, transport_rate
from .geomath import quat_conj, quat_mul, quat_to_dcm, rotvec_to_quat, skew

__all__ = ["LlNavState", "typical_2sample_step", "improved_2sample_step", "coning_rotvec"]

_I3 = np.eye(3)


@dataclass(frozen=True, eq=False)
class LlNavState:
    """Local-level navigation state.

    ``q`` maps body vectors to NUE axes, ``v`` is the NUE ground velocity and
    ``p`` is ``[lon, lat, h]``.
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
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "t", float(self.t))


def coning_rotvec(dtheta1: ArrayLike, dtheta2: ArrayLike) -> NDArray[np.float64]:
    """Two-sample rotation vector ``dth1 + dth2 + 2/3 dth1 x dth2``."""
    d1 = np.asarray(dtheta1, dtype=float)
    d2 = np.asarray(dtheta2, dtype=float)
    return d1 + d2 + (2.0 / 3.0) * np.cross(d1, d2)


def _frame_terms(state: LlNavState, earth: EarthModel):
    lat, h = state.p[1], state.p[2]
    w_ie = earth_rate_n(lat, earth)
    w_en = transport_rate(state.v, state.p, earth)
    return w_ie, w_en, gravity_n(lat, h, earth), curvature_matrix(state.p, earth)


def _sculled_dv(c0, dth1, dth2, dv1, dv2):
    dth, dv = dth1 + dth2, dv1 + dv2
    return c0 @ (dv + 0.5 * np.cross(dth, dv) + (2.0 / 3.0) * (np.cross(dth1, dv2) + np.cross(dv1, dth2)))


def _attitude(state: LlNavState, sigma_b, w_in, T):
    q_nn = quat_conj(rotvec_to_quat(T * w_in))
    return quat_mul(quat_mul(q_nn, state.q), rotvec_to_quat(sigma_b)), q_nn


def typical_2sample_step(
    state: LlNavState,
    dtheta1: ArrayLike,
    dtheta2: ArrayLike,
    dv1: ArrayLike,
    dv2: ArrayLike,
    T: float,
    earth: EarthModel = WGS84,
) -> LlNavState:
    """Classical coning/sculling update with trapezoidal position."""
    d1, d2 = np.asarray(dtheta1, float), np.asarray(dtheta2, float)
    u1, u2 = np.asarray(dv1, float), np.asarray(dv2, float)
    w_ie, w_en, g, r_c = _frame_terms(state, earth)
    c0 = quat_to_dcm(state.q)
    q_new, _ = _attitude(state, coning_rotvec(d1, d2), w_ie + w_en, T)
    u = _sculled_dv(c0, d1, d2, u1, u2)
    v_new = state.v + u - T * np.cross(2.0 * w_ie + w_en, state.v) + T * g
    r = 0.5 * T * (state.v + v_new)
    return LlNavState(q_new, v_new, state.p + r_c @ r, state.t + T)


def improved_2sample_step(
    state: LlNavState,
    dtheta1: ArrayLike,
    dtheta2: ArrayLike,
    dv1: ArrayLike,
    dv2: ArrayLike,
    T: float,
    earth: EarthModel = WGS84,
) -> LlNavState:
    """Two-sample update with the frame-rotation corrections.

    Velocity and position are first propagated in the interval-start frame,
    rotated into the end frame, then corrected for the within-interval change
    of velocity (Coriolis) and of the frame (position).
    """
    d1, d2 = np.asarray(dtheta1, float), np.asarray(dtheta2, float)
    u1, u2 = np.asarray(dv1, float), np.asarray(dv2, float)
    w_ie, w_en, g, r_c = _frame_terms(state, earth)
    w_in = w_ie + w_en
    c0 = quat_to_dcm(state.q)
    q_new, q_nn = _attitude(state, coning_rotvec(d1, d2), w_in, T)
    c_nn = quat_to_dcm(q_nn)
    wx = skew(w_in)
    v0 = state.v
    cor0 = np.cross(w_ie, v0)

    u = _sculled_dv(c0, d1, d2, u1, u2)
    a1 = T * _I3 + 0.5 * T**2 * wx
    v_bar = c_nn @ (v0 + u - a1 @ cor0 + a1 @ g)
    v_new = v_bar - c_nn @ ((0.5 * T * _I3 + T**2 / 3.0 * wx) @ np.cross(w_ie, v_bar - v0))

    i_u = (T / 30.0) * c0 @ (
        25.0 * u1 + 5.0 * u2 + 12.0 * np.cross(d1, u1) + 8.0 * np.cross(d1, u2)
        + 2.0 * np.cross(u1, d2) + 2.0 * np.cross(d2, u2)
    )
    r = c_nn @ (
        T * v0 + i_u
        - (T**2 / 3.0 * _I3 + T**3 / 12.0 * wx) @ cor0
        - (T**2 / 6.0 * _I3 + T**3 / 12.0 * wx) @ np.cross(w_ie, v_new)
        + (0.5 * T**2 * _I3 + T**3 / 6.0 * wx) @ g
    )
    r_n = r + c_nn @ ((0.5 * T * _I3 + T**2 / 3.0 * wx) @ np.cross(w_in, r))
    return LlNavState(q_new, v_new, state.p + r_c @ r_n, state.t + T)
