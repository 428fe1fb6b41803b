"""Chebyshev series algebra on the mapped interval [-1, 1].

A series is stored as an ``(m + 1, dim)`` coefficient array where row ``i``
multiplies the first-kind polynomial ``F_i``. Physical time ``t`` in
``[0, t_span]`` maps to ``tau = 2 t / t_span - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "ChebSeries",
    "cheb_eval_basis",
    "series_eval",
    "basis_product_indices",
    "integral_over_subinterval",
    "indefinite_integral",
    "product_coeffs",
    "fit_from_samples",
    "fit_from_increments",
    "interp_at_cosine_nodes",
    "cosine_node_coeffs",
    "truncate",
]


@dataclass(frozen=True, eq=False)
class ChebSeries:
    """Vector-valued truncated Chebyshev series.

    Parameters
    ----------
    coeffs : array-like, shape (m + 1, dim)
        ``coeffs[i]`` multiplies ``F_i(tau)``. A 1-D input is taken as a
        scalar series (``dim == 1``).
    t_span : float
        Physical length of the interval mapped onto [-1, 1], in seconds.
    """

    coeffs: NDArray[np.float64]
    t_span: float = 2.0

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] == 0:
            raise ValueError(f"coeffs must have shape (m+1, dim), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise FloatingPointError("non-finite Chebyshev coefficients")
        if not self.t_span > 0:
            raise ValueError("t_span must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "t_span", float(self.t_span))

    @property
    def max_degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, tau):
        return series_eval(self, tau)

    def at_time(self, t):
        """Evaluate at physical time(s) ``t`` measured from the interval start."""
        return series_eval(self, 2.0 * np.asarray(t, dtype=float) / self.t_span - 1.0)

    def __repr__(self) -> str:
        return f"ChebSeries(max_degree={self.max_degree}, dim={self.dim}, t_span={self.t_span:g})"


def cheb_eval_basis(i: int, tau: float) -> float:
    """Value of ``F_i(tau)`` from the three-term recurrence."""
    if i < 0:
        raise ValueError(f"degree must be non-negative, got {i}")
    f_prev, f_cur = 1.0, float(tau)
    if i == 0:
        return f_prev
    for _ in range(i - 1):
        f_prev, f_cur = f_cur, 2.0 * tau * f_cur - f_prev
    return f_cur


def _clenshaw(coeffs: NDArray, tau: NDArray) -> NDArray:
    # coeffs (m+1, dim), tau (k,) -> (k, dim)
    t2 = 2.0 * tau[:, None]
    b1 = np.zeros((tau.size, coeffs.shape[1]))
    b2 = np.zeros_like(b1)
    for c in coeffs[:0:-1]:
        b1, b2 = t2 * b1 - b2 + c, b1
    return tau[:, None] * b1 - b2 + coeffs[0]


def series_eval(s: ChebSeries, tau: ArrayLike) -> NDArray[np.float64]:
    """Evaluate ``s`` at ``tau``; returns shape ``(dim,)`` or ``(len(tau), dim)``.

    Raises ``ValueError`` outside [-1, 1]; there is no extrapolation.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(np.abs(tau_arr) > 1.0 + 1e-12):
        raise ValueError("tau outside [-1, 1]")
    out = _clenshaw(s.coeffs, np.atleast_1d(tau_arr).ravel())
    if tau_arr.ndim == 0:
        return out[0]
    return out.reshape(tau_arr.shape + (s.dim,))


def basis_product_indices(j: int, k: int) -> tuple[tuple[int, float], tuple[int, float]]:
    """Linearization ``F_j F_k = (F_{j+k} + F_{|j-k|}) / 2`` as (degree, weight) pairs."""
    if j < 0 or k < 0:
        raise ValueError("degrees must be non-negative")
    return (j + k, 0.5), (abs(j - k), 0.5)


def integral_over_subinterval(i: int, tau_a: float, tau_b: float) -> float:
    """Closed-form ``int_{tau_a}^{tau_b} F_i(tau) dtau``."""
    if i < 0:
        raise ValueError(f"degree must be non-negative, got {i}")
    if i == 0:
        return tau_b - tau_a
    if i == 1:
        return 0.5 * (tau_b * tau_b - tau_a * tau_a)

    def antideriv(x: float) -> float:
        return cheb_eval_basis(i + 1, x) / (2.0 * (i + 1)) - cheb_eval_basis(i - 1, x) / (2.0 * (i - 1))

    return antideriv(tau_b) - antideriv(tau_a)


@lru_cache(maxsize=64)
def _integration_matrix(n: int) -> NDArray:
    """Map ``n`` coefficients to the ``n + 1`` coefficients of the integral from -1."""
    k = np.zeros((n + 1, n))
    for i in range(n):
        if i == 0:
            k[1, 0] = 1.0
        elif i == 1:
            k[2, 1] = 0.25
        else:
            k[i + 1, i] += 1.0 / (2.0 * (i + 1))
            k[i - 1, i] -= 1.0 / (2.0 * (i - 1))
    # choose the constant so the integral vanishes at tau = -1
    signs = (-1.0) ** np.arange(n + 1)
    k[0, :] -= signs @ k
    k.setflags(write=False)
    return k


def indefinite_integral(s: ChebSeries) -> ChebSeries:
    """Series of ``tau -> int_{-1}^{tau} s``; degree grows by one.

    No ``t_span / 2`` factor is applied, callers scale as needed.
    """
    return ChebSeries(_integration_matrix(s.coeffs.shape[0]) @ s.coeffs, s.t_span)


def integrate_coeffs(coeffs: NDArray) -> NDArray:
    """Raw-array form of :func:`indefinite_integral`."""
    return _integration_matrix(coeffs.shape[0]) @ coeffs


@lru_cache(maxsize=256)
def _product_matrix(na: int, nb: int) -> NDArray:
    m = np.zeros((na + nb - 1, na * nb))
    for j in range(na):
        for k in range(nb):
            for deg, w in basis_product_indices(j, k):
                m[deg, j * nb + k] += w
    m.setflags(write=False)
    return m


def product_coeffs(
    a: NDArray,
    b: NDArray,
    pairwise: Callable[[NDArray, NDArray], NDArray] | None = None,
) -> NDArray:
    """Coefficients of the product of two series.

    ``pairwise(a[:, None], b[None, :])`` must return the bilinear product of
    every coefficient pair, shape ``(na, nb, d)``. The default is the
    elementwise product. Output degree is ``(na - 1) + (nb - 1)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    pairs = a[:, None, :] * b[None, :, :] if pairwise is None else pairwise(a[:, None, :], b[None, :, :])
    na, nb = a.shape[0], b.shape[0]
    return _product_matrix(na, nb) @ pairs.reshape(na * nb, -1)


def _as_rows(values: ArrayLike) -> NDArray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _lstsq(design: NDArray, rhs: NDArray) -> NDArray:
    n = design.shape[1]
    # scale columns so the rank test is not skewed by the t_span factor
    scale = np.max(np.abs(design), axis=0)
    scale[scale == 0] = 1.0
    q, r = np.linalg.qr(design / scale)
    diag = np.abs(np.diag(r))
    if diag.min() <= diag.max() * n * np.finfo(float).eps * 10:
        raise np.linalg.LinAlgError("rank-deficient Chebyshev design matrix")
    sol = np.linalg.solve(r, q.T @ rhs)
    return sol / scale[:, None]


def _sample_times(n_samples: int, times: ArrayLike | None, t_span: float | None) -> tuple[NDArray, float]:
    if times is None:
        span = float(n_samples) if t_span is None else float(t_span)
        return span * np.arange(1, n_samples + 1) / n_samples, span
    t = np.asarray(times, dtype=float)
    if t.shape != (n_samples,):
        raise ValueError("times must have one entry per sample")
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise ValueError("times must be positive and strictly increasing")
    return t, float(t[-1] if t_span is None else t_span)


def fit_from_samples(
    samples: ArrayLike,
    n: int,
    times: ArrayLike | None = None,
    t_span: float | None = None,
) -> ChebSeries:
    """Least-squares fit of point samples taken at ``t_1 .. t_N``.

    Parameters
    ----------
    samples : array-like, shape (N, dim)
    n : int
        Maximum fit degree, at most ``N - 1``.
    times : array-like, shape (N,), optional
        Sample instants measured from the interval start. Defaults to the
        uniform grid ``k * t_span / N``, ``k = 1..N``.
    t_span : float, optional
        Interval length ``t_N``. Defaults to ``times[-1]``.
    """
    y = _as_rows(samples)
    n_samples = y.shape[0]
    if n < 0 or n > n_samples - 1:
        raise ValueError(f"fit degree {n} must lie in [0, {n_samples - 1}]")
    t, span = _sample_times(n_samples, times, t_span)
    tau = 2.0 * t / span - 1.0
    design = np.polynomial.chebyshev.chebvander(tau, n)
    return ChebSeries(_lstsq(design, y), span)


def _increment_design(tau_edges: NDArray, n: int, span: float) -> NDArray:
    # antiderivative of each F_i evaluated at the subinterval edges
    vander = np.polynomial.chebyshev.chebvander(tau_edges, n + 1)
    anti = np.empty((tau_edges.size, n + 1))
    anti[:, 0] = tau_edges
    if n >= 1:
        anti[:, 1] = 0.5 * tau_edges**2
    for i in range(2, n + 1):
        anti[:, i] = vander[:, i + 1] / (2.0 * (i + 1)) - vander[:, i - 1] / (2.0 * (i - 1))
    return 0.5 * span * np.diff(anti, axis=0)


def fit_from_increments(
    increments: ArrayLike,
    n: int,
    t_span: float,
    times: ArrayLike | None = None,
) -> ChebSeries:
    """Least-squares fit of a rate from its subinterval integrals.

    ``increments[k]`` is the integral of the rate over ``[t_{k-1}, t_k]`` with
    ``t_0 = 0``. The returned series is the rate itself (per second).
    """
    y = _as_rows(increments)
    n_samples = y.shape[0]
    if n < 0 or n > n_samples - 1:
        raise ValueError(f"fit degree {n} must lie in [0, {n_samples - 1}]")
    t, span = _sample_times(n_samples, times, t_span)
    tau_edges = np.concatenate([[-1.0], 2.0 * t / span - 1.0])
    return ChebSeries(_lstsq(_increment_design(tau_edges, n, span), y), span)


def cosine_nodes(p: int) -> NDArray:
    """The ``p`` interpolation nodes ``cos((k + 1/2) pi / p)``."""
    return np.cos((np.arange(p) + 0.5) * np.pi / p)


def cosine_node_coeffs(values: ArrayLike, m: int) -> NDArray:
    """Coefficients ``0..m`` from function values at :func:`cosine_nodes`."""
    vals = _as_rows(values)
    p = vals.shape[0]
    if p < m + 1:
        raise ValueError(f"need at least {m + 1} nodes for degree {m}, got {p}")
    ang = np.outer(np.arange(m + 1), (np.arange(p) + 0.5) * np.pi / p)
    weights = np.full(m + 1, 2.0 / p)
    weights[0] = 1.0 / p
    return weights[:, None] * (np.cos(ang) @ vals)


def interp_at_cosine_nodes(
    f: Callable[[float], ArrayLike], m: int, p: int, t_span: float = 2.0
) -> ChebSeries:
    """Degree-``m`` Chebyshev approximation of ``f`` from ``p`` cosine nodes."""
    if p < m + 1:
        raise ValueError(f"need at least {m + 1} nodes for degree {m}, got {p}")
    values = np.array([np.atleast_1d(f(x)) for x in cosine_nodes(p)], dtype=float)
    return ChebSeries(cosine_node_coeffs(values, m), t_span)


def truncate(s: ChebSeries, m: int) -> ChebSeries:
    """Drop coefficients above degree ``m``."""
    if m < 0:
        raise ValueError("truncation degree must be non-negative")
    if m >= s.max_degree:
        return s
    return ChebSeries(s.coeffs[: m + 1], s.t_span)
