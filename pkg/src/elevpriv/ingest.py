"""Getting elevation data into the pipeline.

GPX parsing, grid segmentation of a boundary box, synthetic terrain and
routes (the stand-in for mined route segments), and elevation providers.
"""
from __future__ import annotations

import io
import json
import math
import os
import threading
import urllib.error
import urllib.parse
import urllib.request
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ._seeding import derive_seed
from .core import BoundingRect, Dataset, ElevationProfile
from .errors import (DataError, DegenerateBoundaryError, EmptyTrackError, MalformedXmlError,
                     MissingElevationError, OutOfCoverageError, ProviderUnavailableError)

FEET_PER_METER = 3.28084
MAX_SEGMENTS_PER_TILE = 10
DEFAULT_BOUNDARY = BoundingRect((0.0, 0.0), (0.1, 0.1))


# --- GPX ------------------------------------------------------------------

def _local(tag):
    return tag.rpartition("}")[2]


def parse_gpx(document, source_id=""):
    """Parse a GPX 1.1 document into an :class:`ElevationProfile`.

    Track points of every ``trk/trkseg`` are concatenated in document order.
    ``<ele>`` is read in meters and converted to feet.

    Parameters
    ----------
    document : bytes, str or binary file object
    source_id : str
        Stored on the returned profile.
    """
    if isinstance(document, str):
        document = document.encode("utf-8")
    if isinstance(document, (bytes, bytearray)):
        document = io.BytesIO(document)
    try:
        root = ET.parse(document).getroot()
    except ET.ParseError as exc:
        raise MalformedXmlError(f"malformed GPX: {exc}") from exc

    points = []
    for trk in (e for e in root if _local(e.tag) == "trk"):
        for seg in (e for e in trk if _local(e.tag) == "trkseg"):
            points.extend(e for e in seg if _local(e.tag) == "trkpt")
    if not points:
        raise EmptyTrackError("GPX document has no track points")

    lat_lon = np.empty((len(points), 2))
    ele = np.empty(len(points))
    for i, pt in enumerate(points):
        try:
            lat_lon[i] = float(pt.attrib["lat"]), float(pt.attrib["lon"])
        except (KeyError, ValueError) as exc:
            raise MalformedXmlError(f"trackpoint {i} has bad lat/lon") from exc
        ele_el = next((e for e in pt if _local(e.tag) == "ele"), None)
        if ele_el is None or not (ele_el.text or "").strip():
            raise MissingElevationError(i)
        ele[i] = float(ele_el.text)
    return ElevationProfile(ele * FEET_PER_METER, lat_lon, None, source_id)


def write_gpx(profile: ElevationProfile, name="route") -> bytes:
    """Serialize a profile with coordinates as a minimal GPX 1.1 document."""
    if profile.coords is None:
        raise DataError("GPX output needs coordinates")
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             '<gpx version="1.1" creator="elevpriv" xmlns="http://www.topografix.com/GPX/1/1">',
             f"<trk><name>{name}</name><trkseg>"]
    for (lat, lon), ft in zip(profile.coords, profile.values):
        lines.append(f'<trkpt lat="{float(lat)!r}" lon="{float(lon)!r}">'
                     f'<ele>{float(ft) / FEET_PER_METER!r}</ele></trkpt>')
    lines.append("</trkseg></trk></gpx>")
    return "\n".join(lines).encode("utf-8")


# --- grid segmentation ----------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    boundary: BoundingRect
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DataError("grid needs at least one row and one column")


def segment_grid(spec: GridSpec) -> list:
    """Split the boundary into ``rows x cols`` tiles, row-major from the south-west.

    Neighbouring tiles share their edge coordinates exactly, and the outer
    edges are the boundary's own coordinates.
    """
    b = spec.boundary
    if b.area <= 0:
        raise DegenerateBoundaryError("boundary has zero area")
    lat_edges = np.linspace(b.south_west[0], b.north_east[0], spec.rows + 1)
    lon_edges = np.linspace(b.south_west[1], b.north_east[1], spec.cols + 1)
    lat_edges[-1], lon_edges[-1] = b.north_east
    tiles = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            tiles.append(BoundingRect((lat_edges[r], lon_edges[c]),
                                      (lat_edges[r + 1], lon_edges[c + 1])))
    return tiles


# --- synthetic terrain and routes -----------------------------------------

@dataclass(frozen=True)
class TerrainSpec:
    """Parameters of a midpoint-displacement heightmap.

    ``roughness`` is the per-octave amplitude decay: small values give
    smooth rolling terrain, values near 1 give jagged terrain.
    """

    seed: int
    base_elevation: float
    relief: float
    roughness: float = 0.5
    grid_size: int = 129

    def __post_init__(self):
        if self.relief < 0:
            raise DataError("relief must be non-negative")
        if not 0 < self.roughness < 1:
            raise DataError("roughness must be in (0, 1)")
        k = self.grid_size - 1
        if self.grid_size < 65 or k & (k - 1):
            raise DataError("grid_size must be 2**k + 1 and at least 65")


def synth_terrain(spec: TerrainSpec) -> np.ndarray:
    """Diamond-square heightmap scaled to ``base_elevation +/- relief`` feet."""
    n = spec.grid_size
    rng = np.random.default_rng(spec.seed)
    h = np.zeros((n, n))
    h[0, 0], h[0, -1], h[-1, 0], h[-1, -1] = rng.uniform(-1, 1, 4)
    step = n - 1
    amp = 1.0
    while step > 1:
        half = step // 2
        # diamond step: centres of squares
        corners = (h[0:-1:step, 0:-1:step] + h[0:-1:step, step::step]
                   + h[step::step, 0:-1:step] + h[step::step, step::step]) / 4.0
        h[half::step, half::step] = corners + rng.uniform(-amp, amp, corners.shape)
        # square step: edge midpoints, averaging the in-bounds neighbours
        for r0, c0 in ((0, half), (half, 0)):
            rows = np.arange(r0, n, step)
            cols = np.arange(c0, n, step)
            rr, cc = np.meshgrid(rows, cols, indexing="ij")
            total = np.zeros(rr.shape)
            count = np.zeros(rr.shape)
            for dr, dc in ((-half, 0), (half, 0), (0, -half), (0, half)):
                r2, c2 = rr + dr, cc + dc
                ok = (r2 >= 0) & (r2 < n) & (c2 >= 0) & (c2 < n)
                total[ok] += h[r2[ok], c2[ok]]
                count[ok] += 1
            h[rr, cc] = total / count + rng.uniform(-amp, amp, rr.shape)
        step = half
        amp *= spec.roughness
    lo, hi = h.min(), h.max()
    unit = (h - lo) / (hi - lo) * 2.0 - 1.0 if hi > lo else np.zeros_like(h)
    out = spec.base_elevation + spec.relief * unit
    return np.clip(out, spec.base_elevation - spec.relief, spec.base_elevation + spec.relief)


_MOVES = np.array([(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)])


def _cell_coords(cells, shape, boundary):
    rows, cols = shape
    lat = boundary.south_west[0] + cells[:, 0] / (rows - 1) * boundary.height
    lon = boundary.south_west[1] + cells[:, 1] / (cols - 1) * boundary.width
    return np.column_stack([lat, lon])


def _walk(rng, shape, route_len, box):
    """One self-avoiding-biased walk inside the inclusive cell box ``(r0, c0, r1, c1)``."""
    r0, c0, r1, c1 = box
    cur = np.array([rng.integers(r0, r1 + 1), rng.integers(c0, c1 + 1)])
    cells = [cur.copy()]
    visited = {tuple(cur)}
    heading = _MOVES[rng.integers(len(_MOVES))]
    for _ in range(route_len - 1):
        nxt = cur + _MOVES
        ok = (nxt[:, 0] >= r0) & (nxt[:, 0] <= r1) & (nxt[:, 1] >= c0) & (nxt[:, 1] <= c1)
        weights = np.where(ok, 1.0, 0.0)
        weights *= np.array([0.05 if tuple(p) in visited else 1.0 for p in nxt])
        # momentum: prefer keeping roughly the same heading
        weights *= 1.0 + 2.0 * np.maximum(_MOVES @ heading, 0)
        if weights.sum() == 0:
            weights = ok.astype(float)
        k = rng.choice(len(_MOVES), p=weights / weights.sum())
        heading = _MOVES[k]
        cur = nxt[k]
        cells.append(cur.copy())
        visited.add(tuple(cur))
    return np.array(cells)


def synth_routes(heightmap, n_routes, route_len, seed, boundary=DEFAULT_BOUNDARY, label=None,
                 cell_box=None, prefix="route"):
    """Seeded random-walk routes over a heightmap.

    Each route is an 8-connected walk that avoids revisiting cells where it
    can and tends to keep its heading. Elevations are the heightmap values of
    the traversed cells; coordinates map the grid onto ``boundary``.
    """
    if route_len < 2:
        raise DataError("route_len must be at least 2")
    if n_routes < 1:
        raise DataError("n_routes must be at least 1")
    heightmap = np.asarray(heightmap, dtype=float)
    shape = heightmap.shape
    box = cell_box if cell_box is not None else (0, 0, shape[0] - 1, shape[1] - 1)
    rng = np.random.default_rng(seed)
    routes = []
    for i in range(n_routes):
        cells = _walk(rng, shape, route_len, box)
        routes.append(ElevationProfile(heightmap[cells[:, 0], cells[:, 1]],
                                       _cell_coords(cells, shape, boundary), label,
                                       f"{prefix}-{i:04d}"))
    return routes


class SegmentSource(Protocol):
    def explore(self, tile: BoundingRect) -> list: ...


class SyntheticSegmentSource:
    """Serves at most ten synthetic routes lying fully inside a requested tile."""

    def __init__(self, heightmap, boundary, seed, route_len=96, label=None, per_tile=MAX_SEGMENTS_PER_TILE):
        self.heightmap = np.asarray(heightmap, dtype=float)
        self.boundary = boundary
        self.seed = seed
        self.route_len = route_len
        self.label = label
        self.per_tile = min(per_tile, MAX_SEGMENTS_PER_TILE)

    def _cell_box(self, tile):
        rows, cols = self.heightmap.shape
        b = self.boundary
        fr = lambda lat: (lat - b.south_west[0]) / b.height * (rows - 1)  # noqa: E731
        fc = lambda lon: (lon - b.south_west[1]) / b.width * (cols - 1)  # noqa: E731
        r0 = max(0, math.ceil(fr(tile.south_west[0]) - 1e-9))
        r1 = min(rows - 1, math.floor(fr(tile.north_east[0]) + 1e-9))
        c0 = max(0, math.ceil(fc(tile.south_west[1]) - 1e-9))
        c1 = min(cols - 1, math.floor(fc(tile.north_east[1]) + 1e-9))
        return r0, c0, r1, c1

    def explore(self, tile):
        r0, c0, r1, c1 = self._cell_box(tile)
        if r1 < r0 or c1 < c0:
            return []
        key = (round(tile.south_west[0], 9), round(tile.south_west[1], 9))
        seed = derive_seed(self.seed, "tile", *(int(v * 1e6) for v in key))
        routes = synth_routes(self.heightmap, self.per_tile, self.route_len, seed, self.boundary,
                              self.label, cell_box=(r0, c0, r1, c1),
                              prefix=f"{self.label or 'seg'}-{r0}-{c0}")
        return [r for r in routes if all(tile.contains(a, b) for a, b in r.coords)]


def mine_segments(spec: GridSpec, source: SegmentSource) -> list:
    """Grid the boundary and collect every tile's explored segments."""
    out = []
    for tile in segment_grid(spec):
        found = source.explore(tile)
        if len(found) > MAX_SEGMENTS_PER_TILE:
            raise DataError("segment source returned more than ten routes for a tile")
        out.extend(found)
    return out


# Per-class separability comes from distinct base elevation and roughness.
CITY_PRESETS = [
    # name, base ft, relief ft, roughness
    ("MIA", 10.0, 30.0, 0.45),
    ("NYC", 120.0, 140.0, 0.55),
    ("WDC", 250.0, 180.0, 0.5),
    ("SF", 300.0, 500.0, 0.65),
    ("LA", 450.0, 400.0, 0.6),
    ("MIN", 850.0, 120.0, 0.5),
    ("DUL", 1000.0, 350.0, 0.6),
    ("NJ", 80.0, 100.0, 0.5),
    ("TAM", 40.0, 40.0, 0.4),
    ("CS", 6100.0, 700.0, 0.6),
]


def synth_city_dataset(n_cities=5, routes_per_city=200, route_len=96, seed=0, grid_size=129,
                       presets=None, rows=4, cols=4, provenance="synthetic"):
    """Synthetic city-level dataset mined tile by tile from per-city terrains.

    Each city gets its own heightmap and its own nominal boundary box; routes
    are collected through :func:`mine_segments` until ``routes_per_city`` are
    available (the grid is refined when a pass yields too few).
    """
    presets = list(presets or CITY_PRESETS)
    if n_cities > len(presets):
        raise DataError(f"only {len(presets)} city presets available")
    samples = []
    for ci, (name, base, relief, rough) in enumerate(presets[:n_cities]):
        hm = synth_terrain(TerrainSpec(derive_seed(seed, "terrain", name), base, relief, rough, grid_size))
        boundary = BoundingRect((30.0 + ci, -100.0 + ci), (30.0 + ci + 0.2, -100.0 + ci + 0.2))
        samples.extend(_mine_n(hm, boundary, name, routes_per_city, route_len,
                               derive_seed(seed, "mine", name), rows, cols))
    return Dataset(samples, tuple(p[0] for p in presets[:n_cities]), provenance)


def _mine_n(heightmap, boundary, label, n, route_len, seed, rows, cols):
    got = []
    rnd = 0
    while len(got) < n:
        source = SyntheticSegmentSource(heightmap, boundary, derive_seed(seed, rnd), route_len, label)
        for r in mine_segments(GridSpec(boundary, rows, cols), source):
            got.append(r.replace(source_id=f"{label}-{len(got):04d}"))
        rnd += 1
    return got[:n]


def synth_borough_datasets(n_cities=3, boroughs_per_city=3, routes_per_borough=60, route_len=96,
                           seed=0, grid_size=129):
    """One dataset per synthetic city whose labels are boroughs.

    Boroughs of a city are tiles of one shared terrain, so they share the
    elevation range and differ only in local shape.
    """
    out = {}
    for ci, (name, base, relief, rough) in enumerate(CITY_PRESETS[:n_cities]):
        hm = synth_terrain(TerrainSpec(derive_seed(seed, "terrain", name), base, relief, rough, grid_size))
        boundary = BoundingRect((30.0 + ci, -100.0 + ci), (30.0 + ci + 0.2, -100.0 + ci + 0.2))
        cols = boroughs_per_city
        samples = []
        labels = []
        for bi, tile in enumerate(segment_grid(GridSpec(boundary, 1, cols))):
            bname = f"{name}-B{bi + 1}"
            labels.append(bname)
            rows_c, cols_c = hm.shape
            c0 = math.ceil(bi * (cols_c - 1) / cols)
            c1 = math.floor((bi + 1) * (cols_c - 1) / cols) - (1 if bi + 1 < cols else 0)
            routes = synth_routes(hm, routes_per_borough, route_len,
                                  derive_seed(seed, "borough", name, bi), boundary, bname,
                                  cell_box=(0, c0, rows_c - 1, c1), prefix=bname)
            samples.extend(routes)
        out[name] = Dataset(samples, tuple(labels), "borough_level")
    return out


def synth_user_history(labels=("WDC", "ORL", "NYC", "SD"), favorites=3, activities=100,
                       route_len=96, favorite_len=300, noise=0.5, seed=0, grid_size=129):
    """One athlete's activity history: repeated runs over a few favorite routes per region.

    Regions are column strips of one terrain. Each region has ``favorites``
    long routes; an activity is a random ``route_len`` window of one of them
    with additive Gaussian measurement noise of ``noise`` feet.
    """
    if favorite_len < route_len:
        raise DataError("favorite_len must be at least route_len")
    _, base, relief, rough = CITY_PRESETS[2]
    hm = synth_terrain(TerrainSpec(derive_seed(seed, "terrain", "history"), base, relief, rough, grid_size))
    rng = np.random.default_rng(derive_seed(seed, "activities"))
    cols = hm.shape[1]
    samples = []
    for ri, lab in enumerate(labels):
        c0 = ri * (cols - 1) // len(labels)
        c1 = (ri + 1) * (cols - 1) // len(labels)
        fav = synth_routes(hm, favorites, favorite_len, derive_seed(seed, "favorites", lab), label=lab,
                           cell_box=(0, c0, hm.shape[0] - 1, c1), prefix=f"{lab}-fav")
        for a in range(activities):
            route = fav[rng.integers(favorites)]
            start = int(rng.integers(0, favorite_len - route_len + 1))
            sl = slice(start, start + route_len)
            values = route.values[sl] + rng.normal(0.0, noise, route_len)
            samples.append(ElevationProfile(values, route.coords[sl], lab, f"{lab}-act{a:04d}"))
    return Dataset(samples, tuple(labels), "user_specific")


# --- elevation providers --------------------------------------------------

class ElevationProvider(Protocol):
    def elevations(self, path: Sequence) -> list: ...


class TileStoreProvider:
    """Reads elevations from a directory of JSON tiles keyed by integer-degree cell.

    A tile ``{lat}_{lon}.json`` covers ``[lat, lat+1) x [lon, lon+1)`` and is
    either ``{"value": ft}`` or ``{"grid": [[ft, ...], ...]}`` with rows
    running south to north; grid lookups use the nearest cell.
    Safe for concurrent reads.
    """

    def __init__(self, directory):
        self.directory = directory
        self._cache = {}
        self._lock = threading.Lock()

    def _tile(self, key):
        with self._lock:
            if key not in self._cache:
                path = os.path.join(self.directory, f"{key[0]}_{key[1]}.json")
                if os.path.exists(path):
                    with open(path, encoding="utf-8") as fh:
                        self._cache[key] = json.load(fh)
                else:
                    self._cache[key] = None
            return self._cache[key]

    def elevations(self, path):
        out = []
        for i, (lat, lon) in enumerate(path):
            key = (math.floor(lat), math.floor(lon))
            tile = self._tile(key)
            if tile is None:
                raise OutOfCoverageError(i, lat, lon)
            if "value" in tile:
                out.append(float(tile["value"]))
            else:
                grid = np.asarray(tile["grid"], dtype=float)
                r = min(int(round((lat - key[0]) * (grid.shape[0] - 1))), grid.shape[0] - 1)
                c = min(int(round((lon - key[1]) * (grid.shape[1] - 1))), grid.shape[1] - 1)
                out.append(float(grid[r, c]))
        return out


class HttpElevationProvider:
    """Client for an elevation web service speaking the ``locations=lat,lon|...`` protocol.

    Responses report meters; results are returned in feet.
    """

    def __init__(self, base_url, key=None, batch_size=100, timeout=10.0):
        self.base_url = base_url
        self.key = key
        self.batch_size = batch_size
        self.timeout = timeout

    def _request(self, chunk):
        params = {"locations": "|".join(f"{lat},{lon}" for lat, lon in chunk)}
        if self.key:
            params["key"] = self.key
        url = f"{self.base_url}?{urllib.parse.urlencode(params, safe='|,')}"
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderUnavailableError(f"elevation service request failed: {exc}") from exc
        if payload.get("status") != "OK":
            raise ProviderUnavailableError(f"elevation service status {payload.get('status')!r}")
        results = payload.get("results", [])
        if len(results) != len(chunk):
            raise ProviderUnavailableError(
                f"elevation service returned {len(results)} results for {len(chunk)} locations")
        return [float(r["elevation"]) * FEET_PER_METER for r in results]

    def elevations(self, path):
        path = list(path)
        out = []
        for start in range(0, len(path), self.batch_size):
            out.extend(self._request(path[start:start + self.batch_size]))
        return out


def fetch_elevations(path, provider: ElevationProvider) -> np.ndarray:
    """One elevation in feet per ``(lat, lon)`` in ``path``."""
    path = [(float(a), float(b)) for a, b in path]
    if not path:
        raise ValueError("path must contain at least one coordinate")
    return np.asarray(provider.elevations(path), dtype=float)
