"""Image-like representation: elevation line plots on a small RGB raster."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, TooShortError

# Eight distinct hues, low elevations to high.
DEFAULT_PALETTE = (
    (0, 0, 255),
    (0, 128, 255),
    (0, 200, 200),
    (0, 160, 0),
    (160, 200, 0),
    (255, 200, 0),
    (255, 100, 0),
    (200, 0, 0),
)
BACKGROUND = (255, 255, 255)


@dataclass(frozen=True)
class RasterConfig:
    width: int = 32
    height: int = 32
    points: int = 200
    palette: tuple = DEFAULT_PALETTE
    global_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise DataError("raster must be at least 8x8")
        if self.points < 2:
            raise DataError("need at least two points per image")
        palette = tuple(tuple(int(v) for v in c) for c in self.palette)
        if len(palette) < 2 or len(set(palette)) != len(palette):
            raise DataError("palette needs at least two distinct colors")
        object.__setattr__(self, "palette", palette)
        lo, hi = self.global_range
        if hi < lo:
            raise DataError("global_range must be (min, max)")
        object.__setattr__(self, "global_range", (float(lo), float(hi)))

    def with_range(self, lo, hi):
        return RasterConfig(self.width, self.height, self.points, self.palette, (lo, hi))


@dataclass(frozen=True, eq=False)
class RasterImage:
    pixels: np.ndarray  # (height, width, 3) uint8

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def flatten(self) -> np.ndarray:
        """Row-major ``height*width*3`` vector scaled to [0, 1]."""
        return self.pixels.reshape(-1).astype(float) / 255.0

    def save_png(self, path):
        from PIL import Image

        Image.fromarray(self.pixels, mode="RGB").save(path, format="PNG")


def resample(values, points: int = 200) -> np.ndarray:
    """Resize a signal to ``points`` samples.

    Longer signals are split into ``points`` contiguous index partitions of
    (near) equal length and each partition is averaged; shorter signals are
    linearly interpolated.
    """
    x = np.asarray(values, dtype=float).reshape(-1)
    n = len(x)
    if n < 2:
        raise TooShortError("need at least two values to resample")
    if n == points:
        return x.copy()
    if n > points:
        edges = (np.arange(points + 1) * n) // points
        sums = np.add.reduceat(x, edges[:-1])
        return sums / np.diff(edges)
    return np.interp(np.linspace(0, n - 1, points), np.arange(n), x)


def _line(r0, c0, r1, c1):
    """Integer Bresenham line from (r0, c0) to (r1, c1), endpoints included."""
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    out = [(r, c)]
    while (r, c) != (r1, c1):
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        out.append((r, c))
    return out


def color_bucket(mean, config: RasterConfig) -> int:
    lo, hi = config.global_range
    k = len(config.palette)
    if hi <= lo or mean <= lo:
        return 0
    if mean >= hi:
        return k - 1
    return int(min(np.floor((mean - lo) / (hi - lo) * k), k - 1))


def raster_rows(values, height) -> np.ndarray:
    """Row index per sample with the signal fitted to its own [min, max]; row 0 is the top."""
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(len(values), height // 2, dtype=int)
    return np.rint((hi - values) / (hi - lo) * (height - 1)).astype(int)


def rasterize(values, config: RasterConfig) -> RasterImage:
    """Draw ``values`` as a one-pixel polyline, colored by the bucket of its mean."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if len(v) != config.points:
        raise DataError(f"expected {config.points} values, got {len(v)}; resample first")
    rows = raster_rows(v, config.height)
    cols = np.rint(np.arange(len(v)) * (config.width - 1) / (len(v) - 1)).astype(int)
    color = np.array(config.palette[color_bucket(v.mean(), config)], dtype=np.uint8)
    img = np.empty((config.height, config.width, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    img[rows[0], cols[0]] = color
    for i in range(len(v) - 1):
        for r, c in _line(rows[i], cols[i], rows[i + 1], cols[i + 1]):
            img[r, c] = color
    return RasterImage(img)


def profile_image(values, config: RasterConfig) -> RasterImage:
    return rasterize(resample(values, config.points), config)


def export_tensor_csv(path, images, labels=None):
    """Row-major float CSV, one flattened image per row."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for i, img in enumerate(images):
            prefix = [labels[i]] if labels is not None else []
            writer.writerow(prefix + [repr(float(x)) for x in img.flatten()])
