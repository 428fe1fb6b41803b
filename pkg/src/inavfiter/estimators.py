"""scikit-learn style front-ends for the navigation algorithms.

Both navigators take an increment stream ``X`` of shape ``(n_samples, 6)``
(angular increments in rad, then velocity increments in m/s) sampled at
``sample_rate`` and produce the navigation solution at update-interval
boundaries. Hyper-parameters live in the constructor so ``get_params`` /
``set_params`` / ``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_imu_stream, check_positive, check_state_vector
from .baselines import LlNavState, improved_2sample_step, typical_2sample_step
from .earth import WGS84
from .integrator import IterConfig, NavState, navigate
from .trajgen import damp_vertical

STATE_COLUMNS = ("t", "q0", "q1", "q2", "q3", "v1", "v2", "v3", "p1", "p2", "p3")


class FunctionalIterationNavigator(TransformerMixin, BaseEstimator):
    """Earth-frame navigation by Chebyshev fitting and functional iteration.

    Parameters
    ----------
    initial_state : array-like of shape (10,) or NavState
        ``[q(4), v_ecef(3), p_ecef(3)]`` at ``t0``; ``q`` maps body to ECEF.
    sample_rate : float, default=100.0
    samples_per_update : int, default=8
    fit_degree : int, optional
        Degree of both measurement fits; ``samples_per_update - 1`` if None.
    truncation_degree : int, optional
        Attitude/velocity/position truncation; ``samples_per_update + 1`` if None.
    gravity_degree, gravity_nodes : int, default=5
    max_iter : int, optional
        Iteration cap; ``samples_per_update + 1`` if None.
    tol : float, default=1e-16
    order : {"standard", "swapped"}
    damped : bool, default=False
        Zero vertical velocity and height after every interval.
    t0 : float, default=0.0
    earth : EarthModel, optional

    Attributes
    ----------
    states_ : ndarray of shape (n_intervals + 1, 11)
        ``[t, q, v, p]`` at interval boundaries, see ``STATE_COLUMNS``.
    solutions_ : list of NavSolution
    n_iter_ : ndarray of shape (n_intervals, 2)
        Attitude and velocity/position iteration counts.
    converged_ : ndarray of bool
    """

    def __init__(
        self,
        initial_state=None,
        sample_rate=100.0,
        samples_per_update=8,
        fit_degree=None,
        truncation_degree=None,
        gravity_degree=5,
        gravity_nodes=5,
        max_iter=None,
        tol=1e-16,
        order="standard",
        damped=False,
        t0=0.0,
        earth=None,
    ):
        self.initial_state = initial_state
        self.sample_rate = sample_rate
        self.samples_per_update = samples_per_update
        self.fit_degree = fit_degree
        self.truncation_degree = truncation_degree
        self.gravity_degree = gravity_degree
        self.gravity_nodes = gravity_nodes
        self.max_iter = max_iter
        self.tol = tol
        self.order = order
        self.damped = damped
        self.t0 = t0
        self.earth = earth

    def _config(self) -> IterConfig:
        n = self.samples_per_update
        m = self.truncation_degree
        return IterConfig(
            N=n, n_omega=self.fit_degree, n_f=self.fit_degree, m_q=m, m_v=m, m_p=m,
            m_g=self.gravity_degree, P=self.gravity_nodes, max_iter=self.max_iter,
            tol=self.tol, order=self.order,
        )

    def _run(self, X):
        cfg = self._config()
        check_positive(self.sample_rate, "sample_rate")
        X = check_imu_stream(X, cfg.N)
        s = check_state_vector(self.initial_state)
        earth = WGS84 if self.earth is None else self.earth
        start = NavState(s[:4], s[4:7], s[7:], self.t0)
        hook = (lambda st: damp_vertical(st, earth)) if self.damped else None
        sols = list(navigate(start, X[:, :3], X[:, 3:], self.sample_rate, cfg, earth, after_interval=hook))
        states = np.vstack([start.as_array()] + [sol.end_state.as_array() for sol in sols])
        return X, sols, states

    def fit(self, X, y=None):
        X, sols, states = self._run(X)
        self.n_features_in_ = X.shape[1]
        self.solutions_ = sols
        self.states_ = states
        self.n_iter_ = np.array([[s.attitude.iterations, s.velpos.iterations] for s in sols], dtype=int)
        self.converged_ = np.array([s.converged for s in sols], dtype=bool)
        return self

    def transform(self, X):
        """Navigate ``X`` from ``initial_state``; returns boundary states."""
        check_is_fitted(self, "states_")
        return self._run(X)[2]

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).states_

    def predict(self, t):
        """Dense ``[q, v, p]`` at absolute times inside the fitted horizon."""
        check_is_fitted(self, "solutions_")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        edges = self.states_[:, 0]
        if np.any(t < edges[0] - 1e-9) or np.any(t > edges[-1] + 1e-9):
            raise ValueError("requested times fall outside the navigated horizon")
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(self.solutions_) - 1)
        out = np.empty((t.size, 10))
        for k, (i, ti) in enumerate(zip(idx, t)):
            st = self.solutions_[i].state_at(ti)
            out[k] = np.concatenate([st.q, st.v, st.p])
        return out


class TwoSampleNavigator(TransformerMixin, BaseEstimator):
    """Local-level two-sample strapdown algorithm.

    Parameters
    ----------
    initial_state : array-like of shape (10,) or LlNavState
        ``[q(4), v_nue(3), lla(3)]``; ``q`` maps body to NUE.
    variant : {"typical", "improved"}
    sample_rate : float, default=100.0
    damped : bool, default=False
    t0 : float, default=0.0
    earth : EarthModel, optional

    Attributes
    ----------
    states_ : ndarray of shape (n_samples // 2 + 1, 11)
    """

    def __init__(self, initial_state=None, variant="typical", sample_rate=100.0, damped=False, t0=0.0, earth=None):
        self.initial_state = initial_state
        self.variant = variant
        self.sample_rate = sample_rate
        self.damped = damped
        self.t0 = t0
        self.earth = earth

    def _run(self, X):
        if self.variant not in ("typical", "improved"):
            raise ValueError(f"variant must be 'typical' or 'improved', got {self.variant!r}")
        check_positive(self.sample_rate, "sample_rate")
        X = check_imu_stream(X, 2)
        s = check_state_vector(self.initial_state)
        earth = WGS84 if self.earth is None else self.earth
        step = typical_2sample_step if self.variant == "typical" else improved_2sample_step
        T = 2.0 / self.sample_rate
        state = LlNavState(s[:4], s[4:7], s[7:], self.t0)
        rows = [np.concatenate([[state.t], state.q, state.v, state.p])]
        for k in range(X.shape[0] // 2):
            a, b = X[2 * k], X[2 * k + 1]
            state = step(state, a[:3], b[:3], a[3:], b[3:], T, earth)
            state = LlNavState(state.q, state.v, state.p, self.t0 + (k + 1) * T)
            if self.damped:
                state = damp_vertical(state, earth)
            rows.append(np.concatenate([[state.t], state.q, state.v, state.p]))
        return X, np.array(rows)

    def fit(self, X, y=None):
        X, states = self._run(X)
        self.n_features_in_ = X.shape[1]
        self.states_ = states
        return self

    def transform(self, X):
        check_is_fitted(self, "states_")
        return self._run(X)[1]

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).states_
