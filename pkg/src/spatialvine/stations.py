"""Station tables and great-circle geometry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import DomainError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class Stations:
    """Station identifiers with longitude, latitude (degrees) and elevation (m)."""

    ids: tuple
    lon: np.ndarray
    lat: np.ndarray
    elev: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        lon = np.asarray(self.lon, dtype=float).reshape(-1)
        lat = np.asarray(self.lat, dtype=float).reshape(-1)
        elev = np.asarray(self.elev, dtype=float).reshape(-1)
        ids = tuple(str(i) for i in self.ids)
        if not (len(ids) == lon.size == lat.size == elev.size):
            raise DomainError("station fields differ in length")
        if len(set(ids)) != len(ids):
            raise DomainError("duplicate station ids")
        if np.any(np.abs(lon) > 180) or np.any(np.abs(lat) > 90):
            raise DomainError("longitude/latitude out of range")
        if np.any(elev < -500):
            raise DomainError("elevation below -500 m")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "lon", lon)
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "elev", elev)
        names = tuple(self.names) if self.names else ids
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, idx) -> "Stations":
        idx = np.asarray(idx, dtype=int)
        return Stations(tuple(self.ids[i] for i in idx), self.lon[idx], self.lat[idx],
                        self.elev[idx], tuple(self.names[i] for i in idx))

    def covariates(self) -> np.ndarray:
        """(n, 3) matrix of (elev, lon, lat)."""
        return np.column_stack([self.elev, self.lon, self.lat])


def haversine(lon1, lat1, lon2, lat2, radius: float = EARTH_RADIUS_KM):
    """Great-circle distance in km (broadcasting)."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def distance_matrix(st: Stations, radius: float = EARTH_RADIUS_KM) -> np.ndarray:
    return haversine(st.lon[:, None], st.lat[:, None], st.lon[None, :], st.lat[None, :], radius)


def distances_to(st: Stations, lon: float, lat: float, radius: float = EARTH_RADIUS_KM) -> np.ndarray:
    return haversine(st.lon, st.lat, lon, lat, radius)
