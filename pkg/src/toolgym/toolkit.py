"""Declarative tool registry and the seven executable visual tools.

Tools are described by schemas (name, typed parameters, descriptions) and
dispatched by name. Dispatch validates the call against the schema before
executing and never raises for a bad call: every validation failure becomes
an error ToolResult with a distinct ``error_kind``, which is exactly what
the reward engine and the success-rate metrics consume.

Perception tools (Point, OCR) are ground-truth oracles with a pluggable
engine hook; manipulation tools (Draw2DPath, InsertImage, Crop) delegate to
the raster primitives; AStar is a self-contained planner.
"""

from __future__ import annotations

import heapq
import json
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from . import raster
from .errors import (
    BadImageRef,
    BadValue,
    DegeneratePath,
    InvalidArgument,
    MissingParam,
    NoPath,
    OracleUnavailable,
    TargetNotFound,
    ToolGymError,
    UnknownParam,
    UnknownTool,
)
from .raster import BBox, Color, ImageBuffer
from .vsp import DELTA, DIRECTIONS, Cell, parse_directions

PARAM_KINDS = (
    "image-ref",
    "text",
    "coordinate",
    "coordinate-list",
    "direction-list",
    "bbox",
)

PATH_COLOR = Color(255, 0, 0)

_IMG_REF_RE = re.compile(r"^img_([1-9][0-9]*)$")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    description: str
    kind: str

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise InvalidArgument(f"unknown param kind: {self.kind}")


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    params: tuple[ParamSpec, ...]
    returns: str

    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": [
                {"name": p.name, "kind": p.kind, "description": p.description}
                for p in self.params
            ],
            "returns": self.returns,
        }


@dataclass
class ToolCallRequest:
    name: str
    parameters: dict
    images: Optional[list[ImageBuffer]] = None


@dataclass
class ToolResult:
    status: str  # "ok" | "error"
    text: str = ""
    image: Optional[ImageBuffer] = None
    error_kind: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def success(cls, text: str, image: Optional[ImageBuffer] = None, **extra):
        return cls(status="ok", text=text, image=image, extra=extra)

    @classmethod
    def failure(cls, kind: str, message: str):
        return cls(status="error", text=f"error: {kind}: {message}", error_kind=kind)


@dataclass
class ToolContext:
    """Per-episode execution context handed to dispatch.

    Never shared mutable state: each episode owns its context.
    """

    images: list[ImageBuffer] = field(default_factory=list)
    ground_truth: Optional[dict] = None
    cell_px: int = 100
    grid_size: Optional[int] = None
    text_layers: dict = field(default_factory=dict)  # 1-based image index -> layer
    min_black_area: int = 64
    crop_upscale: int = 2
    # pluggable real engines; the ground-truth oracles are the default
    ocr_engine: Optional[Callable[[ImageBuffer], list]] = None
    point_engine: Optional[Callable[[ImageBuffer, str], list]] = None


class ToolRegistry:
    """Immutable-after-construction name -> (schema, handler) mapping.

    ``param_keymap`` translates a schema's (possibly randomized) parameter
    names back to the names the handler was written against.
    """

    def __init__(self):
        self._entries: dict[str, tuple[ToolSchema, Callable, Optional[dict]]] = {}

    def register(
        self,
        schema: ToolSchema,
        handler: Callable,
        param_keymap: Optional[dict] = None,
    ) -> None:
        if schema.name in self._entries:
            raise InvalidArgument(f"duplicate tool name: {schema.name}")
        self._entries[schema.name] = (schema, handler, param_keymap)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> list[str]:
        return list(self._entries)

    def schemas(self) -> list[ToolSchema]:
        return [s for s, _, _ in self._entries.values()]

    def schema(self, name: str) -> ToolSchema:
        if name not in self._entries:
            raise UnknownTool(name)
        return self._entries[name][0]

    def handler(self, name: str) -> Callable:
        if name not in self._entries:
            raise UnknownTool(name)
        return self._entries[name][1]

    def param_keymap(self, name: str) -> Optional[dict]:
        if name not in self._entries:
            raise UnknownTool(name)
        return self._entries[name][2]


def resolve_image_ref(ref, images: list[ImageBuffer]) -> tuple[int, ImageBuffer]:
    """Resolve an ``img_n`` placeholder to (1-based index, image)."""
    if not isinstance(ref, str):
        raise BadImageRef(f"image reference must be a string, got {ref!r}")
    m = _IMG_REF_RE.match(ref)
    if not m:
        raise BadImageRef(f"malformed image reference: {ref!r}")
    idx = int(m.group(1))
    if idx > len(images):
        raise BadImageRef(f"{ref} out of range: dialogue has {len(images)} image(s)")
    return idx, images[idx - 1]


# --- parameter value validation (schema-level, context-free) ---------------


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _as_int(v):
    if _is_int(v):
        return int(v)
    if isinstance(v, float) and v.is_integer():
        return int(v)
    raise BadValue(f"expected an integer, got {v!r}")


def _canon_coordinate(v) -> tuple[int, int]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise BadValue(f"coordinate must be a [a, b] pair, got {v!r}")
    a, b = (_as_int(x) for x in v)
    if a < 0 or b < 0:
        raise BadValue(f"coordinate components must be >= 0, got {v!r}")
    return (a, b)


def _canon_coordinate_list(v) -> tuple[tuple[int, int], ...]:
    if not isinstance(v, (list, tuple)):
        raise BadValue(f"expected a list of coordinates, got {v!r}")
    return tuple(_canon_coordinate(item) for item in v)


def _canon_direction_list(v) -> tuple[str, ...]:
    if not isinstance(v, (list, tuple, str)):
        raise BadValue(f"expected direction tokens, got {v!r}")
    try:
        return tuple(parse_directions(v))
    except ToolGymError as e:
        raise BadValue(str(e))


def _canon_bbox(v) -> BBox:
    if not isinstance(v, (list, tuple)) or len(v) != 4:
        raise BadValue(f"bbox must be [x1, y1, x2, y2], got {v!r}")
    try:
        return BBox(*(_as_int(x) for x in v))
    except ToolGymError as e:
        raise BadValue(str(e))


def _canon_text(v) -> str:
    if not isinstance(v, str):
        raise BadValue(f"expected text, got {v!r}")
    return v


def _canon_image_ref(v) -> str:
    if not isinstance(v, str) or not _IMG_REF_RE.match(v):
        raise BadValue(f"expected an img_n reference, got {v!r}")
    return v


_CANONICALIZERS = {
    "image-ref": _canon_image_ref,
    "text": _canon_text,
    "coordinate": _canon_coordinate,
    "coordinate-list": _canon_coordinate_list,
    "direction-list": _canon_direction_list,
    "bbox": _canon_bbox,
}


def param_value_valid(kind: str, value) -> bool:
    """Schema-level validity of a parameter value (no episode context)."""
    try:
        _CANONICALIZERS[kind](value)
        return True
    except ToolGymError:
        return False


# --- the tools --------------------------------------------------------------


def astar_search(
    start, goal, obstacles, grid_size: int
) -> list[str]:
    """Optimal 4-connected path via A* with a Manhattan heuristic.

    Ties are broken by U,D,L,R expansion order (FIFO among equal f-scores),
    so outputs are reproducible; path length always equals the BFS optimum.
    """
    start = Cell(*start)
    goal = Cell(*goal)
    blocked = {Cell(*o) for o in obstacles}

    def in_bounds(c: Cell) -> bool:
        return 0 <= c.row < grid_size and 0 <= c.col < grid_size

    if grid_size < 1:
        raise InvalidArgument(f"grid_size must be >= 1, got {grid_size}")
    if not in_bounds(start) or not in_bounds(goal):
        raise InvalidArgument(f"start/goal outside {grid_size}x{grid_size} grid")
    if start in blocked or goal in blocked:
        raise InvalidArgument("start/goal may not be obstacles")
    if start == goal:
        return []

    def h(c: Cell) -> int:
        return abs(c.row - goal.row) + abs(c.col - goal.col)

    counter = 0
    frontier = [(h(start), counter, start)]
    best_g = {start: 0}
    came: dict[Cell, tuple[Cell, str]] = {}
    closed: set[Cell] = set()
    while frontier:
        _, _, cur = heapq.heappop(frontier)
        if cur in closed:
            continue
        if cur == goal:
            moves = []
            while cur != start:
                cur, move = came[cur]
                moves.append(move)
            moves.reverse()
            return moves
        closed.add(cur)
        g = best_g[cur]
        for d in DIRECTIONS:
            dr, dc = DELTA[d]
            nxt = Cell(cur.row + dr, cur.col + dc)
            if not in_bounds(nxt) or nxt in blocked or nxt in closed:
                continue
            ng = g + 1
            if ng < best_g.get(nxt, 1 << 30):
                best_g[nxt] = ng
                came[nxt] = (cur, d)
                counter += 1
                heapq.heappush(frontier, (ng + h(nxt), counter, nxt))
    raise NoPath(f"no route from {tuple(start)} to {tuple(goal)}")


def point_targets(
    description: str, ctx: ToolContext, img: Optional[ImageBuffer] = None
) -> list[tuple[int, int]]:
    """Ground-truth lookup behind the pointing tool.

    A plugged-in external engine takes precedence; otherwise targets are
    inverted exactly from the episode's ground truth.
    """
    if ctx.point_engine is not None and img is not None:
        return [tuple(c) for c in ctx.point_engine(img, description)]
    if ctx.ground_truth is None:
        raise OracleUnavailable("no ground truth bound to this episode")
    gt = ctx.ground_truth
    desc = description.lower()
    kind = gt.get("task_kind")
    if kind in ("navigation", "verification"):
        px = gt.get("cell_px", ctx.cell_px)

        def center(cell) -> tuple[int, int]:
            return (cell[1] * px + px // 2, cell[0] * px + px // 2)

        if "start" in desc:
            return [center(gt["start"])]
        if "goal" in desc or "end point" in desc or "target point" in desc:
            return [center(gt["goal"])]
        if "hole" in desc:
            return [center(h) for h in sorted(map(tuple, gt["holes"]))]
    if kind == "jigsaw" and "black" in desc:
        x1, y1, x2, y2 = gt["slot"]
        return [((x1 + x2) // 2, (y1 + y2) // 2)]
    raise TargetNotFound(f"no known target matches {description!r}")


def detect_black_area(img: ImageBuffer, min_area: int = 64) -> list[BBox]:
    """Bounding boxes of 4-connected pure-black components, (y1, x1) sorted."""
    mask = np.all(img.array == 0, axis=2)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    labels, count = ndimage.label(mask, structure=structure)
    boxes = []
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        area = int(np.count_nonzero(labels[sl]))
        if area >= min_area:
            ys, xs = sl
            boxes.append(BBox(xs.start, ys.start, xs.stop, ys.stop))
    boxes.sort(key=lambda b: (b.y1, b.x1))
    return boxes


def draw_2d_path(
    img: ImageBuffer,
    start_xy: tuple[int, int],
    moves,
    cell_px: int,
) -> tuple[ImageBuffer, bool]:
    """Draw a red path stepping one cell per direction command.

    If the path exits the image it is drawn up to the boundary and the
    returned flag is True.
    """
    if len(moves) == 0:
        raise DegeneratePath("directions must be non-empty")
    x, y = start_xy
    if not (0 <= x < img.width and 0 <= y < img.height):
        raise InvalidArgument(f"start {start_xy} outside {img.width}x{img.height}")
    points = [(x, y)]
    out_of_bounds = False
    for move in moves:
        dr, dc = DELTA[move]
        x, y = x + dc * cell_px, y + dr * cell_px
        if not (0 <= x < img.width and 0 <= y < img.height):
            out_of_bounds = True
            cx = min(max(x, 0), img.width - 1)
            cy = min(max(y, 0), img.height - 1)
            if (cx, cy) != points[-1]:
                points.append((cx, cy))
            break
        points.append((x, y))
    if len(points) < 2:
        points.append(points[0])
    thickness = max(2, cell_px // 20)
    drawn = raster.draw_polyline(img, points, PATH_COLOR, thickness)
    return drawn, out_of_bounds


# --- handlers ---------------------------------------------------------------
# Handlers receive canonicalized values; image-ref values arrive resolved as
# (index, ImageBuffer) pairs.


def _h_point(values, ctx: ToolContext) -> ToolResult:
    _, img = values["image"]
    coords = point_targets(values["description"], ctx, img)
    return ToolResult.success(json.dumps([list(c) for c in coords]))


def _h_draw_2d_path(values, ctx: ToolContext) -> ToolResult:
    _, img = values["image"]
    drawn, oob = draw_2d_path(img, values["start"], values["directions"], ctx.cell_px)
    note = "path drawn"
    if oob:
        note += "; the path left the image and was truncated at the boundary"
    return ToolResult.success(note, image=drawn, out_of_bounds=oob)


def _h_astar(values, ctx: ToolContext) -> ToolResult:
    coords = [values["start"], values["goal"], *values["obstacles"]]
    size = ctx.grid_size or (max(max(a, b) for a, b in coords) + 1)
    moves = astar_search(values["start"], values["goal"], values["obstacles"], size)
    return ToolResult.success(json.dumps(moves))


def _h_detect_black_area(values, ctx: ToolContext) -> ToolResult:
    _, img = values["image"]
    boxes = detect_black_area(img, ctx.min_black_area)
    return ToolResult.success(json.dumps([list(b.astuple()) for b in boxes]))


def _h_insert_image(values, ctx: ToolContext) -> ToolResult:
    _, base = values["base"]
    _, patch = values["insert"]
    combined = raster.composite(base, patch, values["box"])
    return ToolResult.success("insert complete", image=combined)


def _h_ocr(values, ctx: ToolContext) -> ToolResult:
    idx, img = values["image"]
    layer = ctx.text_layers.get(idx)
    if layer is None:
        if ctx.ocr_engine is not None:
            layer = ctx.ocr_engine(img)
        else:
            raise OracleUnavailable(
                f"img_{idx} has no text layer and no OCR engine is plugged in"
            )
    payload = [{"text": t, "box": list(b.astuple())} for t, b in layer]
    return ToolResult.success(json.dumps(payload))


def _h_crop(values, ctx: ToolContext) -> ToolResult:
    idx, img = values["image"]
    box = values["box"]
    cropped = raster.crop_region(img, box, ctx.crop_upscale)
    return ToolResult.success(
        "crop complete",
        image=cropped,
        crop={"source_index": idx, "box": list(box.astuple()), "upscale": ctx.crop_upscale},
    )


def _p(name: str, kind: str, description: str) -> ParamSpec:
    return ParamSpec(name=name, kind=kind, description=description)


CANONICAL_TOOLS: list[tuple[ToolSchema, Callable]] = [
    (
        ToolSchema(
            name="Point",
            description=(
                "Locate a described target in an image and return the absolute "
                "pixel coordinates of each match's center."
            ),
            params=(
                _p("image", "image-ref", "Image to search, as an img_n placeholder."),
                _p("description", "text", "Natural-language name of the target."),
            ),
            returns="JSON list of [x, y] pixel coordinates, one per match.",
        ),
        _h_point,
    ),
    (
        ToolSchema(
            name="Draw2DPath",
            description=(
                "Overlay a path on an image: starting from a pixel coordinate, "
                "draw one cell-sized red segment per direction command."
            ),
            params=(
                _p("image", "image-ref", "Image to draw on, as an img_n placeholder."),
                _p("start", "coordinate", "Starting point as absolute pixels [x, y]."),
                _p(
                    "directions",
                    "direction-list",
                    "Move commands, each one of U, D, L, R.",
                ),
            ),
            returns="The image with the path drawn, attached as a new img_n.",
        ),
        _h_draw_2d_path,
    ),
    (
        ToolSchema(
            name="AStar",
            description=(
                "Compute the shortest obstacle-free route between two grid "
                "cells with A* search."
            ),
            params=(
                _p("start", "coordinate", "Start cell as [row, col]."),
                _p("goal", "coordinate", "Goal cell as [row, col]."),
                _p(
                    "obstacles",
                    "coordinate-list",
                    "Blocked cells as a list of [row, col] pairs.",
                ),
            ),
            returns="JSON list of direction letters (U, D, L, R).",
        ),
        _h_astar,
    ),
    (
        ToolSchema(
            name="DetectBlackArea",
            description=(
                "Find regions of pure black pixels in an image and return "
                "their bounding boxes."
            ),
            params=(_p("image", "image-ref", "Image to scan, as an img_n placeholder."),),
            returns="JSON list of [x1, y1, x2, y2] boxes, top-to-bottom.",
        ),
        _h_detect_black_area,
    ),
    (
        ToolSchema(
            name="InsertImage",
            description=(
                "Paste one image into another inside a bounding box, scaling "
                "it to fit, and return the combined image."
            ),
            params=(
                _p("base", "image-ref", "Image to paste into."),
                _p("insert", "image-ref", "Image to paste."),
                _p("box", "bbox", "Target region as [x1, y1, x2, y2] pixels."),
            ),
            returns="The combined image, attached as a new img_n.",
        ),
        _h_insert_image,
    ),
    (
        ToolSchema(
            name="OCR",
            description="Read the text visible in an image and where it sits.",
            params=(_p("image", "image-ref", "Image to read, as an img_n placeholder."),),
            returns="JSON list of {text, box} entries.",
        ),
        _h_ocr,
    ),
    (
        ToolSchema(
            name="Crop",
            description=(
                "Cut out a bounding-box region of an image and return it "
                "magnified for closer inspection."
            ),
            params=(
                _p("image", "image-ref", "Image to crop, as an img_n placeholder."),
                _p("box", "bbox", "Region to keep as [x1, y1, x2, y2] pixels."),
            ),
            returns="The magnified cutout, attached as a new img_n.",
        ),
        _h_crop,
    ),
]


def canonical_registry() -> ToolRegistry:
    reg = ToolRegistry()
    for schema, handler in CANONICAL_TOOLS:
        reg.register(schema, handler)
    return reg


def dispatch(
    call: ToolCallRequest, registry: ToolRegistry, ctx: ToolContext
) -> ToolResult:
    """Validate and execute a tool call.

    Never raises for call problems; every failure mode returns an error
    result with its own error_kind. Episode images are never mutated:
    image-producing tools return fresh buffers.
    """
    if not isinstance(call.name, str) or call.name not in registry:
        return ToolResult.failure("UnknownTool", f"no tool named {call.name!r}")
    schema = registry.schema(call.name)
    params = call.parameters if isinstance(call.parameters, dict) else {}
    expected = {p.name: p for p in schema.params}

    unknown = [k for k in params if k not in expected]
    if unknown:
        return ToolResult.failure(
            "UnknownParam", f"{call.name} does not take {', '.join(map(repr, unknown))}"
        )
    missing = [n for n in expected if n not in params]
    if missing:
        return ToolResult.failure(
            "MissingParam", f"{call.name} requires {', '.join(map(repr, missing))}"
        )

    images = call.images if call.images is not None else ctx.images
    values = {}
    for name, spec in expected.items():
        try:
            value = _CANONICALIZERS[spec.kind](params[name])
        except ToolGymError as e:
            return ToolResult.failure("BadValue", f"parameter {name!r}: {e.message}")
        if spec.kind == "image-ref":
            try:
                value = resolve_image_ref(value, images)
            except ToolGymError as e:
                return ToolResult.failure("BadImageRef", e.message)
        values[name] = value

    keymap = registry.param_keymap(call.name)
    if keymap:
        values = {keymap.get(k, k): v for k, v in values.items()}
    handler = registry.handler(call.name)
    try:
        return handler(values, ctx)
    except ToolGymError as e:
        return ToolResult.failure(e.error_kind, e.message)
