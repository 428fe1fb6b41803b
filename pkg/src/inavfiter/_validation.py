"""Input checks shared by the estimator front-ends."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_imu_stream(X, block: int) -> np.ndarray:
    """Validate an ``(n_samples, 6)`` increment stream ``[dtheta, dv]``.

    ``n_samples`` must be a positive multiple of ``block``.
    """
    X = check_array(X, dtype=np.float64, ensure_min_samples=block, ensure_all_finite=True)
    if X.shape[1] != 6:
        raise ValueError(f"expected 6 columns [gyro xyz, accel xyz], got {X.shape[1]}")
    if X.shape[0] % block:
        raise ValueError(f"number of samples ({X.shape[0]}) must be a multiple of {block}")
    return X


def check_state_vector(state, name: str = "initial_state") -> np.ndarray:
    """Flatten ``[q(4), v(3), p(3)]`` into a validated length-10 array."""
    if state is None:
        raise ValueError(f"{name} must be provided")
    if all(hasattr(state, a) for a in ("q", "v", "p")):
        state = np.concatenate([state.q, state.v, state.p])
    arr = np.asarray(state, dtype=float).ravel()
    if arr.shape != (10,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must hold 10 finite values [q(4), v(3), p(3)]")
    if abs(np.linalg.norm(arr[:4]) - 1.0) > 1e-6:
        raise ValueError(f"{name} quaternion must have unit norm")
    return arr


def check_positive(value, name: str) -> None:
    if not (np.isscalar(value) and value > 0):
        raise ValueError(f"{name} must be a positive number, got {value!r}")
