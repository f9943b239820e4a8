"""Geographic primitives: normalized network coordinates and epicentral distance.

All station and hypocenter positions are plain latitude/longitude degrees.
A :class:`Region` is the fixed bounding box of the seismic network; feature
coordinates fed to the linker are the affine map of lat/lon onto [0, 1]
within that box.  Distances are great-circle (haversine) on a sphere of
radius 6371 km, which is accurate to well under a meter at the local
(<~100 km) distances this package works with.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0


class OutOfRegionError(ValueError):
    """A point fell outside the region it was to be normalized against."""


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude position in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Region:
    """Axis-aligned lat/lon bounding box (no antimeridian crossing)."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not self.lat_min < self.lat_max:
            raise ValueError(f"lat_min {self.lat_min} must be < lat_max {self.lat_max}")
        if not self.lon_min < self.lon_max:
            raise ValueError(f"lon_min {self.lon_min} must be < lon_max {self.lon_max}")

    @property
    def lat_span(self) -> float:
        return self.lat_max - self.lat_min

    @property
    def lon_span(self) -> float:
        return self.lon_max - self.lon_min

    def contains(self, p: GeoPoint) -> bool:
        return (self.lat_min <= p.lat <= self.lat_max
                and self.lon_min <= p.lon <= self.lon_max)


def normalize(p: GeoPoint, region: Region) -> tuple[float, float]:
    """Map a point inside ``region`` to (x, y) with each coordinate in [0, 1].

    x is the normalized longitude, y the normalized latitude.  Raises
    :class:`OutOfRegionError` for points outside the box; callers that want
    clamping must clamp before calling.
    """
    if not region.contains(p):
        raise OutOfRegionError(f"point ({p.lat}, {p.lon}) outside region {region}")
    x = (p.lon - region.lon_min) / region.lon_span
    y = (p.lat - region.lat_min) / region.lat_span
    return x, y


def denormalize(x: float, y: float, region: Region) -> GeoPoint:
    """Inverse of :func:`normalize`."""
    return GeoPoint(lat=region.lat_min + y * region.lat_span,
                    lon=region.lon_min + x * region.lon_span)


def epicentral_distance_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in km (haversine)."""
    return float(epicentral_distances_km(a.lat, a.lon,
                                         np.asarray([b.lat]), np.asarray([b.lon]))[0])


def epicentral_distances_km(lat0: float, lon0: float,
                            lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Haversine distances from one point to arrays of points, in km."""
    lat0r = math.radians(lat0)
    latr = np.radians(lats)
    dlat = latr - lat0r
    dlon = np.radians(lons) - math.radians(lon0)
    h = np.sin(dlat / 2.0) ** 2 + math.cos(lat0r) * np.cos(latr) * np.sin(dlon / 2.0) ** 2
    # guard rounding just above 1.0 for antipodal-ish inputs
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


@dataclass(frozen=True)
class StationTable:
    """An ordered seismic network: parallel arrays of station ids and coordinates.

    Pick records refer to stations by index into this table, so the order is
    part of the experiment definition and must not change between training
    and inference.
    """

    ids: tuple[str, ...]
    lats: np.ndarray
    lons: np.ndarray

    def __post_init__(self):
        if not (len(self.ids) == len(self.lats) == len(self.lons)):
            raise ValueError("ids/lats/lons lengths differ")
        if len(self.ids) == 0:
            raise ValueError("station table is empty")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate station ids")

    def __len__(self) -> int:
        return len(self.ids)

    def point(self, index: int) -> GeoPoint:
        return GeoPoint(float(self.lats[index]), float(self.lons[index]))

    def index_of(self, station_id: str) -> int:
        try:
            return self.ids.index(station_id)
        except ValueError:
            raise KeyError(f"unknown station id {station_id!r}") from None

    def normalized(self, region: Region) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) arrays for all stations; every station must lie in ``region``."""
        for i in range(len(self)):
            if not region.contains(self.point(i)):
                raise OutOfRegionError(
                    f"station {self.ids[i]} at ({self.lats[i]}, {self.lons[i]}) "
                    f"outside region {region}")
        x = (self.lons - region.lon_min) / region.lon_span
        y = (self.lats - region.lat_min) / region.lat_span
        return x, y


def load_stations(path) -> StationTable:
    """Read a station list CSV with header ``id,lat,lon`` (extra columns ignored).

    An optional elevation column is accepted and discarded: elevation plays
    no role in the features or the travel times computed here.
    """
    ids: list[str] = []
    lats: list[float] = []
    lons: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "lat", "lon"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected CSV header with columns id,lat,lon")
        for lineno, row in enumerate(reader, start=2):
            try:
                ids.append(row["id"])
                lats.append(float(row["lat"]))
                lons.append(float(row["lon"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad station row: {exc}") from None
    return StationTable(ids=tuple(ids), lats=np.asarray(lats), lons=np.asarray(lons))
