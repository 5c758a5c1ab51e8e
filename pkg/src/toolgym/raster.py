"""Minimal RGB raster substrate.

Images are owned, immutable-by-convention buffers of 8-bit RGB pixels backed
by numpy arrays of shape (height, width, 3). Every operation returns a new
buffer and leaves pixels outside its declared write region bit-identical.

Conventions, fixed package-wide:
  - pixel coordinates are absolute, origin at the top-left, x to the right,
    y downward;
  - bounding boxes are half-open: a box (x1, y1, x2, y2) covers columns
    x1..x2-1 and rows y1..y2-1;
  - scaling is nearest-neighbor (bit-exact, no anti-aliasing);
  - lines are Bresenham segments dilated by a square brush.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import (
    DegeneratePath,
    InvalidDimension,
    OutOfBounds,
    ShapeMismatch,
)


@dataclass(frozen=True)
class Color:
    r: int
    g: int
    b: int

    def __post_init__(self):
        for v in (self.r, self.g, self.b):
            if not (isinstance(v, (int, np.integer)) and 0 <= v <= 255):
                raise InvalidDimension(f"channel value out of range: {v}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.r, self.g, self.b)


BLACK = Color(0, 0, 0)
WHITE = Color(255, 255, 255)


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box: x1 <= x < x2, y1 <= y < y2."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise OutOfBounds(f"degenerate box {self.astuple()}")
        if self.x1 < 0 or self.y1 < 0:
            raise OutOfBounds(f"negative box corner {self.astuple()}")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    def astuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


class ImageBuffer:
    """Owned RGB image; the substrate all environments and tools operate on."""

    __slots__ = ("_a",)

    def __init__(self, array: np.ndarray):
        a = np.asarray(array)
        if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidDimension(f"expected (h, w, 3) array, got {a.shape}")
        self._a = np.ascontiguousarray(a, dtype=np.uint8)

    @property
    def width(self) -> int:
        return self._a.shape[1]

    @property
    def height(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the pixel data."""
        v = self._a.view()
        v.flags.writeable = False
        return v

    def copy_array(self) -> np.ndarray:
        return self._a.copy()

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise OutOfBounds(f"pixel ({x}, {y}) outside {self.width}x{self.height}")
        return tuple(int(c) for c in self._a[y, x])

    def same_pixels(self, other: "ImageBuffer") -> bool:
        return self._a.shape == other._a.shape and bool(np.array_equal(self._a, other._a))

    def __repr__(self):
        return f"ImageBuffer({self.width}x{self.height})"


def _check_box(img: ImageBuffer, box: BBox) -> None:
    if box.x2 > img.width or box.y2 > img.height:
        raise OutOfBounds(f"box {box.astuple()} exceeds {img.width}x{img.height}")


def create_canvas(width: int, height: int, fill: Color) -> ImageBuffer:
    """Uniform canvas of the given dimensions."""
    if width < 1 or height < 1:
        raise InvalidDimension(f"dimensions must be >= 1, got {width}x{height}")
    a = np.empty((height, width, 3), dtype=np.uint8)
    a[:, :] = fill.as_tuple()
    return ImageBuffer(a)


def fill_rect(img: ImageBuffer, box: BBox, color: Color) -> ImageBuffer:
    """New image with the box region set to ``color``."""
    _check_box(img, box)
    a = img.copy_array()
    a[box.y1 : box.y2, box.x1 : box.x2] = color.as_tuple()
    return ImageBuffer(a)


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    """Integer line from (x0, y0) to (x1, y1), inclusive of both endpoints."""
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        yield x, y
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def draw_polyline(
    img: ImageBuffer,
    points: list[tuple[int, int]],
    color: Color,
    thickness: int = 1,
) -> ImageBuffer:
    """Draw connected Bresenham segments through ``points``.

    Thickness > 1 dilates each line pixel with a square brush; brush pixels
    spilling over the border are clipped. All vertices must lie in bounds.
    """
    if len(points) < 2:
        raise DegeneratePath(f"polyline needs >= 2 points, got {len(points)}")
    if thickness < 1:
        raise InvalidDimension(f"thickness must be >= 1, got {thickness}")
    for x, y in points:
        if not (0 <= x < img.width and 0 <= y < img.height):
            raise OutOfBounds(f"point ({x}, {y}) outside {img.width}x{img.height}")
    a = img.copy_array()
    lo = -(thickness // 2)
    hi = (thickness - 1) // 2
    rgb = color.as_tuple()
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        for x, y in _bresenham(x0, y0, x1, y1):
            for oy in range(lo, hi + 1):
                py = y + oy
                if py < 0 or py >= img.height:
                    continue
                for ox in range(lo, hi + 1):
                    px = x + ox
                    if 0 <= px < img.width:
                        a[py, px] = rgb
    return ImageBuffer(a)


def _nearest_resize(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    sh, sw = src.shape[:2]
    rows = (np.arange(out_h) * sh) // out_h
    cols = (np.arange(out_w) * sw) // out_w
    return src[rows[:, None], cols[None, :]]


def composite(base: ImageBuffer, patch: ImageBuffer, box: BBox) -> ImageBuffer:
    """Write ``patch`` into ``box`` of ``base``, nearest-neighbor scaled to fit."""
    _check_box(base, box)
    a = base.copy_array()
    a[box.y1 : box.y2, box.x1 : box.x2] = _nearest_resize(
        patch.array, box.height, box.width
    )
    return ImageBuffer(a)


def crop_region(img: ImageBuffer, box: BBox, upscale: int = 1) -> ImageBuffer:
    """Extract ``box`` and magnify it by an integer factor."""
    _check_box(img, box)
    if not isinstance(upscale, (int, np.integer)) or upscale < 1:
        raise InvalidDimension(f"upscale must be an integer >= 1, got {upscale}")
    sub = img.array[box.y1 : box.y2, box.x1 : box.x2]
    if upscale == 1:
        return ImageBuffer(sub.copy())
    return ImageBuffer(_nearest_resize(sub, box.height * upscale, box.width * upscale))


def pixel_diff(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean absolute per-channel difference; 0 iff the images are identical."""
    if a.width != b.width or a.height != b.height:
        raise ShapeMismatch(
            f"{a.width}x{a.height} vs {b.width}x{b.height}"
        )
    return float(
        np.mean(np.abs(a.array.astype(np.int16) - b.array.astype(np.int16)))
    )


def to_png(img: ImageBuffer) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.copy_array(), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def from_png(data: bytes) -> ImageBuffer:
    with Image.open(io.BytesIO(data)) as im:
        return ImageBuffer(np.asarray(im.convert("RGB")))
