import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elevpriv.core import BoundingRect, ElevationProfile
from elevpriv.errors import (DataError, DegenerateBoundaryError, EmptyTrackError, MalformedXmlError,
                             MissingElevationError, OutOfCoverageError, ProviderUnavailableError)
from elevpriv.ingest import (FEET_PER_METER, GridSpec, HttpElevationProvider, MAX_SEGMENTS_PER_TILE,
                             SyntheticSegmentSource, TerrainSpec, TileStoreProvider, fetch_elevations,
                             mine_segments, parse_gpx, segment_grid, synth_borough_datasets,
                             synth_city_dataset, synth_routes, synth_terrain, synth_user_history,
                             write_gpx)


def gpx(points, ns=True):
    head = '<gpx xmlns="http://www.topografix.com/GPX/1/1" version="1.1">' if ns else "<gpx>"
    body = "".join(points)
    return f"<?xml version='1.0'?>{head}<trk><trkseg>{body}</trkseg></trk></gpx>"


def pt(lat, lon, ele=None):
    inner = f"<ele>{ele}</ele>" if ele is not None else ""
    return f'<trkpt lat="{lat}" lon="{lon}">{inner}</trkpt>'


# --- GPX ------------------------------------------------------------------------

def test_parse_gpx_converts_meters_to_feet():
    p = parse_gpx(gpx([pt(1, 2, 10), pt(1.1, 2, 10), pt(1.2, 2, 10)]), "t")
    assert np.allclose(p.values, [32.8084] * 3, atol=1e-12)
    assert p.coords.shape == (3, 2) and p.source_id == "t"


def test_parse_gpx_without_namespace():
    assert len(parse_gpx(gpx([pt(0, 0, 1), pt(0, 1, 2)], ns=False))) == 2


def test_parse_gpx_errors():
    with pytest.raises(EmptyTrackError):
        parse_gpx(gpx([]))
    with pytest.raises(MissingElevationError) as exc:
        parse_gpx(gpx([pt(0, 0, 1), pt(0, 1), pt(0, 2, 3)]))
    assert exc.value.index == 1
    with pytest.raises(MalformedXmlError):
        parse_gpx("<gpx><trk>")


@given(st.lists(st.tuples(st.floats(-89, 89), st.floats(-179, 179), st.floats(-1000, 30000)),
                min_size=1, max_size=20))
def test_gpx_roundtrip(points):
    coords = [(a, b) for a, b, _ in points]
    prof = ElevationProfile([c for _, _, c in points], coords)
    back = parse_gpx(write_gpx(prof))
    assert np.allclose(back.values, prof.values, atol=1e-6, rtol=0)
    assert np.allclose(back.coords, prof.coords)


# --- grid -------------------------------------------------------------------------

def test_segment_grid_examples():
    b = BoundingRect((0, 0), (2, 2))
    tiles = segment_grid(GridSpec(b, 2, 2))
    assert [(t.south_west, t.north_east) for t in tiles] == [
        ((0, 0), (1, 1)), ((0, 1), (1, 2)), ((1, 0), (2, 1)), ((1, 1), (2, 2))]
    assert segment_grid(GridSpec(b, 1, 1)) == [b]
    with pytest.raises(DegenerateBoundaryError):
        segment_grid(GridSpec(BoundingRect((0, 0), (0, 2)), 2, 2))


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.01, 10), st.floats(0.01, 10),
       st.integers(1, 7), st.integers(1, 7))
def test_segment_grid_partitions(lat, lon, h, w, rows, cols):
    b = BoundingRect((lat, lon), (lat + h, lon + w))
    tiles = segment_grid(GridSpec(b, rows, cols))
    assert len(tiles) == rows * cols
    assert sum(t.area for t in tiles) == pytest.approx(b.area, rel=1e-9)
    for i, a in enumerate(tiles):
        for c in tiles[i + 1:]:
            ih = min(a.north_east[0], c.north_east[0]) - max(a.south_west[0], c.south_west[0])
            iw = min(a.north_east[1], c.north_east[1]) - max(a.south_west[1], c.south_west[1])
            assert ih <= 1e-12 or iw <= 1e-12


# --- terrain and routes ----------------------------------------------------------------

def test_terrain_flat_and_deterministic():
    assert np.all(synth_terrain(TerrainSpec(1, 50.0, 0.0, 0.5, 65)) == 50.0)
    a = synth_terrain(TerrainSpec(3, 100.0, 40.0, 0.5, 65))
    assert np.array_equal(a, synth_terrain(TerrainSpec(3, 100.0, 40.0, 0.5, 65)))
    b = synth_terrain(TerrainSpec(4, 100.0, 40.0, 0.5, 65))
    assert not np.array_equal(a, b)
    for h in (a, b):
        assert h.min() >= 60.0 and h.max() <= 140.0


def test_terrain_spec_validation():
    with pytest.raises(DataError):
        TerrainSpec(0, 0.0, 1.0, 0.5, 100)
    with pytest.raises(DataError):
        TerrainSpec(0, 0.0, -1.0)


def test_routes_examples():
    hm = synth_terrain(TerrainSpec(0, 10.0, 5.0, 0.5, 65))
    (r,) = synth_routes(hm, 1, 2, 0)
    assert len(r) == 2
    flat = synth_terrain(TerrainSpec(0, 10.0, 0.0, 0.5, 65))
    assert all(np.all(p.values == 10.0) for p in synth_routes(flat, 3, 20, 1))
    a = synth_routes(hm, 4, 30, 9)
    b = synth_routes(hm, 4, 30, 9)
    assert all(np.array_equal(x.values, y.values) and np.array_equal(x.coords, y.coords)
               for x, y in zip(a, b))


def test_routes_are_connected_walks():
    hm = synth_terrain(TerrainSpec(0, 10.0, 5.0, 0.5, 65))
    for p in synth_routes(hm, 5, 50, 2):
        step = np.abs(np.diff(p.coords, axis=0)) * 64 / 0.1
        assert np.all(np.round(step).max(axis=1) == 1)


def test_mining_respects_tile_limit_and_bounds():
    hm = synth_terrain(TerrainSpec(0, 10.0, 5.0, 0.5, 65))
    b = BoundingRect((30, -100), (30.2, -99.8))
    src = SyntheticSegmentSource(hm, b, 5, route_len=12, label="X")
    spec = GridSpec(b, 2, 2)
    for tile in segment_grid(spec):
        found = src.explore(tile)
        assert len(found) <= MAX_SEGMENTS_PER_TILE
        assert all(tile.contains(a, c) for p in found for a, c in p.coords)
    assert len(mine_segments(spec, src)) > 0


def test_synthetic_datasets_reproducible():
    a = synth_city_dataset(2, 15, 40, seed=3)
    b = synth_city_dataset(2, 15, 40, seed=3)
    assert a.counts() == {"MIA": 15, "NYC": 15}
    assert [s.source_id for s in a.samples] == [s.source_id for s in b.samples]
    assert len({s.source_id for s in a.samples}) == len(a)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a.samples, b.samples))


def test_borough_and_history_datasets():
    boroughs = synth_borough_datasets(2, 3, 10, 30, seed=1)
    assert sorted(boroughs) == ["MIA", "NYC"]
    assert boroughs["MIA"].labels == ("MIA-B1", "MIA-B2", "MIA-B3")
    hist = synth_user_history(("WDC", "ORL"), favorites=2, activities=5, route_len=20, favorite_len=40)
    assert hist.counts() == {"WDC": 5, "ORL": 5} and hist.provenance == "user_specific"


# --- providers ---------------------------------------------------------------------

def test_tile_store_provider(tmp_path):
    (tmp_path / "40_-75.json").write_text(json.dumps({"value": 100.0}))
    (tmp_path / "41_-75.json").write_text(json.dumps({"grid": [[1.0, 2.0], [3.0, 4.0]]}))
    prov = TileStoreProvider(tmp_path)
    assert list(fetch_elevations([(40.1, -74.5), (40.5, -74.9), (40.9, -74.1)], prov)) == [100.0] * 3
    # nearest cell: row 1 (north), col 0 (west)
    assert fetch_elevations([(41.9, -74.9)], prov)[0] == 3.0
    with pytest.raises(OutOfCoverageError) as exc:
        fetch_elevations([(40.1, -74.5), (10.0, 10.0)], prov)
    assert exc.value.index == 1
    with pytest.raises(ValueError):
        fetch_elevations([], prov)


class _Handler(BaseHTTPRequestHandler):
    def do_GET(self):
        q = parse_qs(urlparse(self.path).query)
        locs = q["locations"][0].split("|")
        if q.get("key") == ["bad"]:
            body = {"status": "REQUEST_DENIED", "results": []}
        else:
            body = {"status": "OK", "results": [{"elevation": float(l.split(",")[0])} for l in locs]}
        data = json.dumps(body).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def elevation_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/elevation"
    server.shutdown()


def test_http_provider_batches_and_converts(elevation_server):
    prov = HttpElevationProvider(elevation_server, batch_size=2)
    out = fetch_elevations([(1, 0), (2, 0), (3, 0)], prov)
    assert np.allclose(out, np.array([1, 2, 3]) * FEET_PER_METER)


def test_http_provider_failures(elevation_server):
    with pytest.raises(ProviderUnavailableError):
        fetch_elevations([(1, 0)], HttpElevationProvider(elevation_server, key="bad"))
    with pytest.raises(ProviderUnavailableError):
        fetch_elevations([(1, 0)], HttpElevationProvider("http://127.0.0.1:9/x", timeout=1))
