"""Quaternion and rotation helpers.

Quaternions are ``[s, x, y, z]`` arrays, scalar first. Every function
broadcasts over leading axes.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])
IDENTITY_QUAT.setflags(write=False)


def quat_mul(q1: ArrayLike, q2: ArrayLike) -> NDArray[np.float64]:
    """Quaternion product ``q1 o q2``."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    s1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    s2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack(
        [
            s1 * s2 - x1 * x2 - y1 * y2 - z1 * z2,
            s1 * x2 + x1 * s2 + y1 * z2 - z1 * y2,
            s1 * y2 - x1 * z2 + y1 * s2 + z1 * x2,
            s1 * z2 + x1 * y2 - y1 * x2 + z1 * s2,
        ],
        axis=-1,
    )


def vec_to_quat(v: ArrayLike) -> NDArray[np.float64]:
    """Embed 3-vectors as pure quaternions."""
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def skew(v: ArrayLike) -> NDArray[np.float64]:
    """Cross-product matrix ``(v x)`` so that ``skew(a) @ b == cross(a, b)``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def mul_matrix_plus(q: ArrayLike) -> NDArray[np.float64]:
    """``[q]+`` with ``q o p == [q]+ @ p``."""
    s, *eta = np.asarray(q, dtype=float)
    m = np.empty((4, 4))
    m[0, 0] = s
    m[0, 1:] = -np.asarray(eta)
    m[1:, 0] = eta
    m[1:, 1:] = s * np.eye(3) + skew(eta)
    return m


def mul_matrix_minus(q: ArrayLike) -> NDArray[np.float64]:
    """``[q]-`` with ``p o q == [q]- @ p``."""
    s, *eta = np.asarray(q, dtype=float)
    m = np.empty((4, 4))
    m[0, 0] = s
    m[0, 1:] = -np.asarray(eta)
    m[1:, 0] = eta
    m[1:, 1:] = s * np.eye(3) - skew(eta)
    return m


def quat_conj(q: ArrayLike) -> NDArray[np.float64]:
    q = np.array(q, dtype=float)
    q[..., 1:] *= -1.0
    return q


def quat_norm(q: ArrayLike) -> NDArray[np.float64]:
    return np.linalg.norm(np.asarray(q, dtype=float), axis=-1)


def quat_normalize(q: ArrayLike) -> NDArray[np.float64]:
    q = np.asarray(q, dtype=float)
    n = quat_norm(q)
    if np.any(n == 0):
        raise ValueError("cannot normalize a zero quaternion")
    return q / np.expand_dims(n, -1)


def quat_to_dcm(q: ArrayLike) -> NDArray[np.float64]:
    """Rotation matrix ``(s^2 - eta.eta) I + 2 eta eta^T + 2 s (eta x)``.

    Non-unit input is accepted and used as is.
    """
    q = np.asarray(q, dtype=float)
    s = q[..., 0]
    eta = q[..., 1:]
    x, y, z = eta[..., 0], eta[..., 1], eta[..., 2]
    d = s * s - np.sum(eta * eta, axis=-1)
    c = 2.0 * eta[..., :, None] * eta[..., None, :]
    c[..., 0, 0] += d
    c[..., 1, 1] += d
    c[..., 2, 2] += d
    c[..., 0, 1] -= 2.0 * s * z
    c[..., 0, 2] += 2.0 * s * y
    c[..., 1, 0] += 2.0 * s * z
    c[..., 1, 2] -= 2.0 * s * x
    c[..., 2, 0] -= 2.0 * s * y
    c[..., 2, 1] += 2.0 * s * x
    return c


def dcm_to_quat(c: ArrayLike) -> NDArray[np.float64]:
    """Unit quaternion (``s >= 0``) whose :func:`quat_to_dcm` is ``c``.

    Shepperd's method: the largest of the four squared components picks the
    numerically safe branch.
    """
    c = np.asarray(c, dtype=float)
    tr = np.trace(c, axis1=-2, axis2=-1)
    d0, d1, d2 = c[..., 0, 0], c[..., 1, 1], c[..., 2, 2]
    a = c[..., 2, 1] - c[..., 1, 2]
    b = c[..., 0, 2] - c[..., 2, 0]
    e = c[..., 1, 0] - c[..., 0, 1]
    xy = c[..., 0, 1] + c[..., 1, 0]
    xz = c[..., 0, 2] + c[..., 2, 0]
    yz = c[..., 1, 2] + c[..., 2, 1]
    # 4 * component * (all four components) per branch
    branches = np.stack([
        np.stack([1.0 + tr, a, b, e], axis=-1),
        np.stack([a, 1.0 + 2 * d0 - tr, xy, xz], axis=-1),
        np.stack([b, xy, 1.0 + 2 * d1 - tr, yz], axis=-1),
        np.stack([e, xz, yz, 1.0 + 2 * d2 - tr], axis=-1),
    ], axis=-2)
    k = np.argmax(np.stack([tr, d0, d1, d2], axis=-1), axis=-1)
    row = np.take_along_axis(branches, k[..., None, None], axis=-2)[..., 0, :]
    pivot = np.take_along_axis(row, k[..., None], axis=-1)
    q = row / (2.0 * np.sqrt(pivot))
    return np.where(q[..., :1] < 0, -q, q)


def quat_sandwich(q: ArrayLike, v: ArrayLike) -> NDArray[np.float64]:
    """Vector part of ``q o v o q*``."""
    return quat_mul(quat_mul(q, vec_to_quat(v)), quat_conj(q))[..., 1:]


def rotvec_to_quat(phi: ArrayLike) -> NDArray[np.float64]:
    """``cos(|phi|/2) + phi/|phi| sin(|phi|/2)``.

    Below 1e-8 rad the ``sin(|phi|/2)/|phi|`` factor comes from its series.
    """
    phi = np.asarray(phi, dtype=float)
    ang = np.linalg.norm(phi, axis=-1)
    small = ang < 1e-8
    safe = np.where(small, 1.0, ang)
    factor = np.where(small, 0.5 - ang * ang / 48.0, np.sin(0.5 * safe) / safe)
    return np.concatenate([np.cos(0.5 * ang)[..., None], factor[..., None] * phi], axis=-1)


def quat_to_rotvec(q: ArrayLike) -> NDArray[np.float64]:
    """Rotation vector of a (normalized internally) quaternion, angle in [0, pi]."""
    q = quat_normalize(q)
    q = np.where(q[..., :1] < 0, -q, q)
    vn = np.linalg.norm(q[..., 1:], axis=-1)
    ang = 2.0 * np.arctan2(vn, q[..., 0])
    small = vn < 1e-12
    factor = np.where(small, 2.0 / np.where(small, q[..., 0], 1.0), ang / np.where(small, 1.0, vn))
    return factor[..., None] * q[..., 1:]


def principal_angle(q_est: ArrayLike, q_true: ArrayLike) -> NDArray[np.float64]:
    """Rotation angle of ``q_true* o q_est`` after normalizing both, in [0, pi]."""
    qe = quat_normalize(q_est)
    qt = quat_normalize(q_true)
    dq = quat_mul(quat_conj(qt), qe)
    return 2.0 * np.arctan2(np.linalg.norm(dq[..., 1:], axis=-1), np.abs(dq[..., 0]))
