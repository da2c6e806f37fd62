"""City datasets and distance matrices."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0


class CityFileError(ValueError):
    """Raised for unreadable or malformed city files."""


class DuplicateCityError(CityFileError):
    pass


class CoordinateRangeError(CityFileError):
    pass


class MatrixCacheError(ValueError):
    """Raised when a cached matrix does not match the request or is invalid."""


@dataclass(frozen=True)
class City:
    name: str
    lat: float
    lon: float

    def __post_init__(self):
        if not self.name:
            raise CityFileError("city name must be non-empty")
        if not -90.0 <= self.lat <= 90.0:
            raise CoordinateRangeError(f"{self.name}: latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise CoordinateRangeError(f"{self.name}: longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric kilometre distances between named cities."""

    names: tuple[str, ...]
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        n = len(self.names)
        if d.shape != (n, n):
            raise ValueError(f"matrix shape {d.shape} does not match {n} names")
        if len(set(self.names)) != n:
            raise ValueError("duplicate city names in matrix")
        check_matrix(d)
        d.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.d, other.d)

    def __hash__(self):
        return hash((self.names, self.d.tobytes()))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown city {name!r}") from None

    def submatrix(self, indices: Sequence[int]) -> "DistanceMatrix":
        idx = list(indices)
        return DistanceMatrix(tuple(self.names[i] for i in idx), self.d[np.ix_(idx, idx)])


def check_matrix(d: np.ndarray) -> None:
    if not np.all(np.isfinite(d)):
        raise MatrixCacheError("matrix has non-finite entries")
    if np.any(np.diag(d) != 0.0):
        raise MatrixCacheError("matrix diagonal must be zero")
    if not np.array_equal(d, d.T):
        raise MatrixCacheError("matrix is not symmetric")
    off = ~np.eye(len(d), dtype=bool)
    if np.any(d[off] <= 0.0):
        raise MatrixCacheError("off-diagonal distances must be positive")


def load_cities(path) -> list[City]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"city file not found: {path}")
    cities: list[City] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["name", "lat", "lon"]:
            raise CityFileError(f"{path}: expected header 'name,lat,lon', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise CityFileError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            name = row[0].strip()
            try:
                lat, lon = float(row[1]), float(row[2])
            except ValueError:
                raise CityFileError(f"{path}:{lineno}: non-numeric coordinate in {row}") from None
            if not (math.isfinite(lat) and math.isfinite(lon)):
                raise CityFileError(f"{path}:{lineno}: non-finite coordinate in {row}")
            if name in seen:
                raise DuplicateCityError(f"{path}:{lineno}: duplicate city {name!r}")
            try:
                city = City(name, lat, lon)
            except CoordinateRangeError as exc:
                raise CoordinateRangeError(f"{path}:{lineno}: {exc}") from None
            except CityFileError as exc:
                raise CityFileError(f"{path}:{lineno}: {exc}") from None
            seen.add(name)
            cities.append(city)
    if not cities:
        raise CityFileError(f"{path}: no cities")
    return cities


def haversine_km(a: City, b: City) -> float:
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    # clamp guards asin against rounding just above 1 for antipodal points
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def build_distance_matrix(cities: Sequence[City], source="haversine") -> DistanceMatrix:
    """Build a matrix for ``cities`` from great-circle distances or a cache file.

    ``source`` is either the string ``"haversine"`` or a path to a JSON cache
    written by :func:`save_matrix`. A cache must list exactly the same cities
    in the same order.
    """
    if not cities:
        raise ValueError("need at least one city")
    names = tuple(c.name for c in cities)
    if isinstance(source, str) and source == "haversine":
        n = len(cities)
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d[i, j] = d[j, i] = haversine_km(cities[i], cities[j])
        return DistanceMatrix(names, d)
    cached = load_matrix(source)
    if cached.names != names:
        raise MatrixCacheError(
            f"cached city list {list(cached.names)} does not match request {list(names)}"
        )
    return cached


def save_matrix(dm: DistanceMatrix, path) -> None:
    payload = {"cities": list(dm.names), "matrix_km": dm.d.tolist()}
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_matrix(path) -> DistanceMatrix:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        names = payload["cities"]
        rows = payload["matrix_km"]
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MatrixCacheError(f"{path}: malformed matrix cache ({exc})") from None
    d = np.array(rows, dtype=float)
    if d.shape != (len(names), len(names)):
        raise MatrixCacheError(f"{path}: matrix shape {d.shape} does not match {len(names)} cities")
    if np.any(d < 0):
        raise MatrixCacheError(f"{path}: negative distance in cache")
    return DistanceMatrix(tuple(names), d)


def default_cities_path() -> Path:
    return Path(__file__).parent / "data" / "european_cities.csv"
