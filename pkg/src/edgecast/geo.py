"""AP topology: coordinates, great-circle distances, block grid, AP files.

Distances use a spherical Earth of radius 6371.0 km.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidTopologyError, ParseError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidInputError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidInputError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidInputError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class BBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        vals = (self.min_lat, self.max_lat, self.min_lon, self.max_lon)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError("bbox has non-finite bounds")
        if not (self.min_lat < self.max_lat and self.min_lon < self.max_lon):
            raise InvalidInputError(f"degenerate bbox {vals}")
        if self.min_lat < -90 or self.max_lat > 90 or self.min_lon < -180 or self.max_lon > 180:
            raise InvalidInputError(f"bbox {vals} outside coordinate range")

    def contains(self, p: GeoPoint) -> bool:
        return self.min_lat <= p.lat <= self.max_lat and self.min_lon <= p.lon <= self.max_lon

    @property
    def diagonal_deg(self) -> float:
        return math.hypot(self.max_lat - self.min_lat, self.max_lon - self.min_lon)


# Named presets. The cloud sits at a US-West data-center site.
CHICAGO_BBOX = BBox(41.64, 42.02, -87.94, -87.52)
CHICAGO_CENTER = GeoPoint(41.8781, -87.6298)
OREGON_DC = GeoPoint(45.8399, -119.7006)
BBOX_PRESETS = {"chicago": CHICAGO_BBOX}
LOCATION_PRESETS = {"oregon": OREGON_DC, "chicago": CHICAGO_CENTER}


@dataclass(frozen=True)
class BlockGrid:
    bbox: BBox
    rows: int = 32
    cols: int = 32

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidInputError("grid needs at least one row and one column")

    @property
    def n_blocks(self) -> int:
        return self.rows * self.cols

    def block_index(self, p: GeoPoint, clip: bool = False) -> int:
        """Row-major cell index; the max edges belong to the last row/column.

        Points outside the bbox raise unless ``clip`` is set, in which case
        they are assigned to the nearest border cell.
        """
        if not clip and not self.bbox.contains(p):
            raise InvalidInputError(f"{p} outside grid bbox")
        return int(self.block_indices(np.array([p.lat]), np.array([p.lon]))[0])

    def block_indices(self, lat, lon):
        b = self.bbox
        r = np.floor((np.asarray(lat) - b.min_lat) / (b.max_lat - b.min_lat) * self.rows)
        c = np.floor((np.asarray(lon) - b.min_lon) / (b.max_lon - b.min_lon) * self.cols)
        r = np.clip(r, 0, self.rows - 1).astype(np.int64)
        c = np.clip(c, 0, self.cols - 1).astype(np.int64)
        return r * self.cols + c


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable AP layout. AP ids are dense ``0..n-1`` in file order.

    ``edge_units`` is optional; when absent every AP is assumed to host an
    edge server, which is how ``edge_present`` is derived.
    """

    aps: tuple
    cloud_location: GeoPoint
    grid: BlockGrid
    edge_units: Optional[tuple] = None
    source_ids: Optional[tuple] = None
    lat: np.ndarray = field(init=False, repr=False)
    lon: np.ndarray = field(init=False, repr=False)
    ap_blocks: np.ndarray = field(init=False, repr=False)
    edge_present: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.aps) == 0:
            raise InvalidTopologyError("topology has no APs")
        for i, (ap_id, _) in enumerate(self.aps):
            if ap_id != i:
                raise InvalidTopologyError(f"AP ids must be dense 0..n-1, got {ap_id} at position {i}")
        lat = np.array([p.lat for _, p in self.aps], dtype=float)
        lon = np.array([p.lon for _, p in self.aps], dtype=float)
        lat.flags.writeable = False
        lon.flags.writeable = False
        blocks = self.grid.block_indices(lat, lon)
        blocks.flags.writeable = False
        units = self.edge_units
        if units is not None and len(units) != len(self.aps):
            raise InvalidTopologyError("edge_units length differs from AP count")
        present = np.zeros(self.grid.n_blocks, dtype=bool)
        for i, b in enumerate(blocks):
            if units is None or units[i] > 0:
                present[b] = True
        present.flags.writeable = False
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)
        object.__setattr__(self, "ap_blocks", blocks)
        object.__setattr__(self, "edge_present", present)

    def __len__(self):
        return len(self.aps)

    def point(self, ap_id: int) -> GeoPoint:
        if not 0 <= ap_id < len(self.aps):
            raise InvalidTopologyError(f"unknown AP id {ap_id}")
        return self.aps[ap_id][1]

    def with_edge_units(self, units: Sequence[int]) -> "Topology":
        return Topology(self.aps, self.cloud_location, self.grid, tuple(int(u) for u in units), self.source_ids)

    def with_cloud(self, location: GeoPoint) -> "Topology":
        return Topology(self.aps, location, self.grid, self.edge_units, self.source_ids)


def _check_coords(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise InvalidInputError("non-finite coordinate")
    return lat, lon


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km between two points."""
    return float(haversine_km_many(a.lat, a.lon, b.lat, b.lon))


def haversine_km_many(lat1, lon1, lat2, lon2):
    """Vectorised haversine; arguments broadcast against each other."""
    lat1, lon1 = _check_coords(lat1, lon1)
    lat2, lon2 = _check_coords(lat2, lon2)
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(lon2 - lon1)
    h = np.sin(dp / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def nearest_ap(ue: GeoPoint, topo: Topology):
    """Return ``(ap_id, distance_km)`` of the closest AP, lowest id on ties."""
    if topo is None or len(topo) == 0:
        raise InvalidTopologyError("empty topology")
    d = haversine_km_many(ue.lat, ue.lon, topo.lat, topo.lon)
    i = int(np.argmin(d))
    return i, float(d[i])


def nearest_aps(lat, lon, topo: Topology, chunk: int = 4096):
    """Vectorised nearest_ap over arrays of UE coordinates."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    ids = np.empty(lat.shape[0], dtype=np.int64)
    dist = np.empty(lat.shape[0], dtype=float)
    for s in range(0, lat.shape[0], chunk):
        d = haversine_km_many(lat[s:s + chunk, None], lon[s:s + chunk, None], topo.lat[None, :], topo.lon[None, :])
        j = np.argmin(d, axis=1)
        ids[s:s + chunk] = j
        dist[s:s + chunk] = d[np.arange(j.shape[0]), j]
    return ids, dist


def distance_matrix_km(topo: Topology) -> np.ndarray:
    return haversine_km_many(topo.lat[:, None], topo.lon[:, None], topo.lat[None, :], topo.lon[None, :])


def fit_grid(lat, lon, rows=32, cols=32, pad_deg=1e-3) -> BlockGrid:
    """Grid over the bounding box of the points, padded if degenerate."""
    lo_lat, hi_lat = float(np.min(lat)), float(np.max(lat))
    lo_lon, hi_lon = float(np.min(lon)), float(np.max(lon))
    if hi_lat - lo_lat <= 0:
        lo_lat, hi_lat = max(-90.0, lo_lat - pad_deg), min(90.0, hi_lat + pad_deg)
    if hi_lon - lo_lon <= 0:
        lo_lon, hi_lon = max(-180.0, lo_lon - pad_deg), min(180.0, hi_lon + pad_deg)
    return BlockGrid(BBox(lo_lat, hi_lat, lo_lon, hi_lon), rows, cols)


def make_topology(lat, lon, cloud_location=OREGON_DC, rows=32, cols=32, source_ids=None) -> Topology:
    aps = tuple((i, GeoPoint(float(a), float(b))) for i, (a, b) in enumerate(zip(lat, lon)))
    if not aps:
        raise InvalidTopologyError("topology has no APs")
    grid = fit_grid(lat, lon, rows, cols)
    return Topology(aps, cloud_location, grid, source_ids=source_ids)


def load_ap_csv(path, rows=32, cols=32, cloud_location=OREGON_DC) -> Topology:
    """Read an ``ap_id,lat,lon`` file into a Topology.

    Ids may be arbitrary unique integers; they are remapped to ``0..n-1`` in
    file order and the originals kept in ``source_ids``.
    """
    seen = set()
    ids, lats, lons = [], [], []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", line=1)
        if [h.strip() for h in header] != ["ap_id", "lat", "lon"]:
            raise ParseError(f"expected header 'ap_id,lat,lon', got {','.join(header)!r}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", line=line)
            try:
                ap_id = int(row[0].strip())
                lat = float(row[1].strip())
                lon = float(row[2].strip())
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
            if ap_id in seen:
                raise ParseError(f"duplicate ap_id {ap_id}", line=line)
            try:
                GeoPoint(lat, lon)
            except InvalidInputError as exc:
                raise ParseError(str(exc), line=line) from None
            seen.add(ap_id)
            ids.append(ap_id)
            lats.append(lat)
            lons.append(lon)
    if not ids:
        raise ParseError("no AP rows", line=2)
    return make_topology(lats, lons, cloud_location, rows, cols, source_ids=tuple(ids))


def write_ap_csv(topo: Topology, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ap_id", "lat", "lon"])
        for ap_id, p in topo.aps:
            w.writerow([ap_id, repr(p.lat), repr(p.lon)])


def synth_aps(n: int, bbox: BBox, mode: str = "uniform", seed: int = 0,
              cloud_location=OREGON_DC, rows=32, cols=32) -> Topology:
    """Synthetic AP layout inside ``bbox``.

    ``clustered`` draws ceil(n/50) centres, then Gaussian offsets with sigma
    equal to 1% of the bbox diagonal (in degrees), clipped to the bbox.
    The grid covers ``bbox`` itself rather than the drawn points.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if not isinstance(bbox, BBox):
        bbox = BBox(*bbox)
    rng = np.random.default_rng(seed)
    if mode == "uniform":
        lat = rng.uniform(bbox.min_lat, bbox.max_lat, size=n)
        lon = rng.uniform(bbox.min_lon, bbox.max_lon, size=n)
    elif mode == "clustered":
        k = math.ceil(n / 50)
        c_lat = rng.uniform(bbox.min_lat, bbox.max_lat, size=k)
        c_lon = rng.uniform(bbox.min_lon, bbox.max_lon, size=k)
        which = rng.integers(0, k, size=n)
        sigma = 0.01 * bbox.diagonal_deg
        lat = np.clip(c_lat[which] + rng.normal(0.0, sigma, size=n), bbox.min_lat, bbox.max_lat)
        lon = np.clip(c_lon[which] + rng.normal(0.0, sigma, size=n), bbox.min_lon, bbox.max_lon)
    else:
        raise InvalidInputError(f"unknown mode {mode!r}; expected uniform or clustered")
    aps = tuple((i, GeoPoint(float(a), float(b))) for i, (a, b) in enumerate(zip(lat, lon)))
    return Topology(aps, cloud_location, BlockGrid(bbox, rows, cols))
