"""WGS-84 Earth model: normal gravity, frames, and coordinate conversions.

Local-level axes are North-Up-East throughout. Geodetic positions are
``[lon, lat, h]`` arrays (rad, rad, m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

POLE_MARGIN = 1e-6


class SingularityError(ValueError):
    """Local-level quantity requested too close to a pole."""


@dataclass(frozen=True)
class EarthModel:
    """Reference ellipsoid and gravity constants (defaults: WGS-84, NIMA TR8350.2)."""

    R: float = 6378137.0
    f: float = 1.0 / 298.257223563
    omega: float = 7.292115e-5
    GM: float = 3.986004418e14
    gamma_e: float = 9.7803253359
    gamma_p: float = 9.8321849378
    # derived constants; computed when omitted, verified when given
    r: float | None = None
    e2: float | None = None
    k: float | None = None
    m: float | None = None

    def __post_init__(self) -> None:
        r = self.R * (1.0 - self.f)
        derived = {
            "r": r,
            "e2": self.f * (2.0 - self.f),
            "k": r * self.gamma_p / (self.R * self.gamma_e) - 1.0,
            "m": self.omega**2 * self.R**2 * r / self.GM,
        }
        for name, want in derived.items():
            got = getattr(self, name)
            if got is None:
                object.__setattr__(self, name, want)
            elif not math.isclose(got, want, rel_tol=1e-12):
                raise ValueError(f"inconsistent Earth model: {name}={got!r}, constants imply {want!r}")

    @property
    def e(self) -> float:
        return math.sqrt(self.e2)

    @property
    def omega_ie_e(self) -> NDArray[np.float64]:
        """Earth rate in the Earth frame, ``[0, 0, omega]``."""
        return np.array([0.0, 0.0, self.omega])


WGS84 = EarthModel()


def somigliana_gravity(lat: ArrayLike, h: ArrayLike, earth: EarthModel = WGS84) -> NDArray[np.float64]:
    """Normal gravity magnitude at latitude ``lat`` and height ``h``."""
    s2 = np.sin(lat) ** 2
    h = np.asarray(h, dtype=float)
    g0 = earth.gamma_e * (1.0 + earth.k * s2) / np.sqrt(1.0 - earth.e2 * s2)
    corr = 1.0 - 2.0 * h / earth.R * (1.0 + earth.f + earth.m - 2.0 * earth.f * s2) + 3.0 * h**2 / earth.R**2
    return g0 * corr


def cne_from_geodetic(lon: ArrayLike, lat: ArrayLike) -> NDArray[np.float64]:
    """Rotation from local-level (N, U, E) to ECEF axes."""
    sl, cl = np.sin(lon), np.cos(lon)
    sL, cL = np.sin(lat), np.cos(lat)
    zero = np.zeros_like(sl * sL)
    return np.stack(
        [
            np.stack([-sL * cl, cL * cl, -sl + zero], axis=-1),
            np.stack([-sL * sl, cL * sl, cl + zero], axis=-1),
            np.stack([cL + zero, sL + zero, zero], axis=-1),
        ],
        axis=-2,
    )


def radii(lat: ArrayLike, earth: EarthModel = WGS84) -> tuple[NDArray, NDArray]:
    """Transverse and meridian radii of curvature ``(R_E, R_N)``."""
    w2 = 1.0 - earth.e2 * np.sin(lat) ** 2
    return earth.R / np.sqrt(w2), earth.R * (1.0 - earth.e2) / w2**1.5


def lla2ecef(lla: ArrayLike, earth: EarthModel = WGS84) -> NDArray[np.float64]:
    lla = np.asarray(lla, dtype=float)
    lon, lat, h = lla[..., 0], lla[..., 1], lla[..., 2]
    r_e, _ = radii(lat, earth)
    cL = np.cos(lat)
    return np.stack(
        [
            (r_e + h) * cL * np.cos(lon),
            (r_e + h) * cL * np.sin(lon),
            (r_e * (1.0 - earth.e2) + h) * np.sin(lat),
        ],
        axis=-1,
    )


def ecef2lla(p: ArrayLike, earth: EarthModel = WGS84, tol: float = 1e-12, max_iter: int = 10) -> NDArray[np.float64]:
    """ECEF to ``[lon, lat, h]``.

    Bowring's starting latitude refined by fixed-point iteration. Points on
    the polar axis get longitude 0.
    """
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    rho = np.hypot(x, y)
    lon = np.arctan2(y, x)
    e2 = earth.e2
    ep2 = e2 / (1.0 - e2)
    beta = np.arctan2(z * earth.R, rho * earth.r)
    lat = np.arctan2(z + ep2 * earth.r * np.sin(beta) ** 3, rho - e2 * earth.R * np.cos(beta) ** 3)

    def step(lat):
        r_e = earth.R / np.sqrt(1.0 - e2 * np.sin(lat) ** 2)
        return np.arctan2(z + e2 * r_e * np.sin(lat), rho)

    for _ in range(max_iter):
        new = step(lat)
        done = np.all(np.abs(new - lat) <= tol)
        lat = new
        if done:
            break
    else:
        raise ArithmeticError("ecef2lla did not converge")
    # the map contracts by about e^2, so one more pass removes the residual
    lat = step(lat)
    sL, cL = np.sin(lat), np.cos(lat)
    r_e = earth.R / np.sqrt(1.0 - e2 * sL**2)
    h = (rho - r_e * cL) * cL + (z - r_e * (1.0 - e2) * sL) * sL
    return np.stack([lon, lat, h], axis=-1)


def gravity_ecef(p: ArrayLike, earth: EarthModel = WGS84) -> NDArray[np.float64]:
    """Normal gravity vector in ECEF: ``C_n^e [0, -g, 0]``."""
    lla = ecef2lla(p, earth)
    g = somigliana_gravity(lla[..., 1], lla[..., 2], earth)
    c = cne_from_geodetic(lla[..., 0], lla[..., 1])
    return -g[..., None] * c[..., :, 1]


def gravity_n(lat: ArrayLike, h: ArrayLike, earth: EarthModel = WGS84) -> NDArray[np.float64]:
    g = np.asarray(somigliana_gravity(lat, h, earth))
    zero = np.zeros_like(g)
    return np.stack([zero, -g, zero], axis=-1)


def _check_lat(lat) -> None:
    if np.any(np.abs(lat) >= np.pi / 2 - POLE_MARGIN):
        raise SingularityError("latitude too close to a pole for local-level mechanization")


def curvature_matrix(lla: ArrayLike, earth: EarthModel = WGS84) -> NDArray[np.float64]:
    """Map NUE velocity to ``d[lon, lat, h]/dt``."""
    _, lat, h = np.asarray(lla, dtype=float)
    _check_lat(lat)
    r_e, r_n = radii(lat, earth)
    return np.array(
        [
            [0.0, 0.0, 1.0 / ((r_e + h) * math.cos(lat))],
            [1.0 / (r_n + h), 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ]
    )


def transport_rate(v_n: ArrayLike, lla: ArrayLike, earth: EarthModel = WGS84) -> NDArray[np.float64]:
    """Rate of the local-level frame relative to the Earth, in NUE axes."""
    v_north, _, v_east = np.asarray(v_n, dtype=float)
    _, lat, h = np.asarray(lla, dtype=float)
    _check_lat(lat)
    r_e, r_n = radii(lat, earth)
    return np.array([v_east / (r_e + h), v_east * math.tan(lat) / (r_e + h), -v_north / (r_n + h)])


def earth_rate_n(lat: float, earth: EarthModel = WGS84) -> NDArray[np.float64]:
    return np.array([earth.omega * math.cos(lat), earth.omega * math.sin(lat), 0.0])
