import itertools
import json
from collections import deque

import numpy as np
import pytest

from toolgym.errors import InvalidArgument, NoPath, OracleUnavailable, TargetNotFound
from toolgym.raster import BBox, BLACK, Color, WHITE, create_canvas, fill_rect
from toolgym.toolkit import (
    ToolCallRequest,
    ToolContext,
    astar_search,
    canonical_registry,
    detect_black_area,
    dispatch,
    draw_2d_path,
    param_value_valid,
    point_targets,
    resolve_image_ref,
)


def bfs_length(start, goal, obstacles, size):
    """Plain BFS distance, the independent pathfinding oracle."""
    if start == goal:
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        (r, c), d = queue.popleft()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < size and 0 <= nc < size:
                nxt = (nr, nc)
                if nxt in obstacles or nxt in seen:
                    continue
                if nxt == goal:
                    return d + 1
                seen.add(nxt)
                queue.append((nxt, d + 1))
    return None


def walk(start, moves):
    deltas = {"U": (-1, 0), "D": (1, 0), "L": (0, -1), "R": (0, 1)}
    cur = start
    trail = [cur]
    for m in moves:
        dr, dc = deltas[m]
        cur = (cur[0] + dr, cur[1] + dc)
        trail.append(cur)
    return trail


class TestAStar:
    def test_center_obstacle_length_from_bfs_oracle(self):
        moves = astar_search((0, 0), (2, 2), {(1, 1)}, 3)
        assert len(moves) == bfs_length((0, 0), (2, 2), {(1, 1)}, 3) == 4
        trail = walk((0, 0), moves)
        assert trail[-1] == (2, 2)
        assert (1, 1) not in trail

    def test_start_equals_goal(self):
        assert astar_search((1, 1), (1, 1), set(), 3) == []

    def test_walled_goal(self):
        with pytest.raises(NoPath):
            astar_search((0, 0), (2, 2), {(1, 2), (2, 1)}, 3)

    def test_invalid_cells(self):
        with pytest.raises(InvalidArgument):
            astar_search((0, 0), (5, 5), set(), 3)
        with pytest.raises(InvalidArgument):
            astar_search((0, 0), (1, 1), {(1, 1)}, 3)

    def test_deterministic(self):
        a = astar_search((0, 0), (3, 3), {(1, 1), (2, 2)}, 4)
        b = astar_search((0, 0), (3, 3), {(1, 1), (2, 2)}, 4)
        assert a == b

    def test_matches_bfs_on_3x3_exhaustive(self):
        cells = [(r, c) for r in range(3) for c in range(3)]
        for start, goal in itertools.permutations(cells, 2):
            rest = [c for c in cells if c not in (start, goal)]
            for k in range(4):
                for obstacles in itertools.combinations(rest, k):
                    expected = bfs_length(start, goal, set(obstacles), 3)
                    if expected is None:
                        with pytest.raises(NoPath):
                            astar_search(start, goal, set(obstacles), 3)
                    else:
                        moves = astar_search(start, goal, set(obstacles), 3)
                        assert len(moves) == expected
                        trail = walk(start, moves)
                        assert trail[-1] == goal
                        assert not set(trail) & set(obstacles)


class TestPointOracle:
    def vsp_ctx(self):
        gt = {
            "task_kind": "navigation",
            "size": 4,
            "cell_px": 100,
            "start": [0, 0],
            "goal": [3, 3],
            "holes": [[1, 2], [2, 1]],
        }
        return ToolContext(ground_truth=gt, cell_px=100)

    def test_start_center_formula(self):
        assert point_targets("the start point", self.vsp_ctx()) == [(50, 50)]

    def test_holes_list_valued(self):
        coords = point_targets("ice holes", self.vsp_ctx())
        assert coords == [(250, 150), (150, 250)]

    def test_unknown_target(self):
        with pytest.raises(TargetNotFound):
            point_targets("red cars", self.vsp_ctx())

    def test_no_ground_truth(self):
        with pytest.raises(OracleUnavailable):
            point_targets("the start point", ToolContext())

    def test_jigsaw_black_area(self):
        ctx = ToolContext(
            ground_truth={"task_kind": "jigsaw", "slot": [100, 0, 200, 100]}
        )
        assert point_targets("the black area", ctx) == [(150, 50)]


class TestDraw2DPath:
    def test_in_bounds_arithmetic(self):
        img = create_canvas(300, 300, WHITE)
        drawn, oob = draw_2d_path(img, (50, 50), ["R", "R"], cell_px=100)
        assert not oob
        assert drawn.pixel(150, 50) == (255, 0, 0)
        assert drawn.pixel(250, 50) == (255, 0, 0)
        assert img.pixel(150, 50) == (255, 255, 255)  # source untouched

    def test_out_of_bounds_truncates_and_flags(self):
        img = create_canvas(200, 200, WHITE)
        drawn, oob = draw_2d_path(img, (150, 50), ["R", "R"], cell_px=100)
        assert oob
        assert drawn.pixel(199, 50) == (255, 0, 0)

    def test_empty_directions(self):
        from toolgym.errors import DegeneratePath

        with pytest.raises(DegeneratePath):
            draw_2d_path(create_canvas(100, 100, WHITE), (10, 10), [], cell_px=50)


class TestDetectBlackArea:
    def test_single_rect(self):
        img = fill_rect(create_canvas(100, 100, WHITE), BBox(10, 20, 40, 50), BLACK)
        assert detect_black_area(img) == [BBox(10, 20, 40, 50)]

    def test_no_black(self):
        assert detect_black_area(create_canvas(50, 50, WHITE)) == []

    def test_two_rects_sorted(self):
        img = create_canvas(100, 100, WHITE)
        img = fill_rect(img, BBox(60, 40, 80, 60), BLACK)
        img = fill_rect(img, BBox(5, 5, 25, 25), BLACK)
        assert detect_black_area(img) == [BBox(5, 5, 25, 25), BBox(60, 40, 80, 60)]

    def test_min_area_threshold(self):
        img = fill_rect(create_canvas(100, 100, WHITE), BBox(0, 0, 7, 7), BLACK)
        assert detect_black_area(img, min_area=64) == []  # 49 px < 64
        assert detect_black_area(img, min_area=49) == [BBox(0, 0, 7, 7)]

    def test_four_connectivity(self):
        # two diagonal pixels touch only at a corner: separate components
        img = create_canvas(10, 10, WHITE)
        arr = img.copy_array()
        arr[2, 2] = 0
        arr[3, 3] = 0
        from toolgym.raster import ImageBuffer

        assert detect_black_area(ImageBuffer(arr), min_area=2) == []
        boxes = detect_black_area(ImageBuffer(arr), min_area=1)
        assert len(boxes) == 2


class TestParamValidation:
    @pytest.mark.parametrize(
        "kind,value,valid",
        [
            ("image-ref", "img_1", True),
            ("image-ref", "image_1", False),
            ("image-ref", "img_0", False),
            ("text", "anything", True),
            ("text", 5, False),
            ("coordinate", [3, 4], True),
            ("coordinate", [3.0, 4.0], True),
            ("coordinate", [3], False),
            ("coordinate", [1, -2], False),
            ("coordinate", [True, False], False),
            ("coordinate-list", [], True),
            ("coordinate-list", [[1, 2], [3, 4]], True),
            ("coordinate-list", [[1, 2], [3]], False),
            ("direction-list", ["U", "D"], True),
            ("direction-list", "RRD", True),
            ("direction-list", ["Q"], False),
            ("bbox", [0, 0, 5, 5], True),
            ("bbox", [5, 0, 0, 5], False),
            ("bbox", [0, 0, 5], False),
        ],
    )
    def test_kinds(self, kind, value, valid):
        assert param_value_valid(kind, value) is valid


class TestDispatch:
    def ctx(self):
        return ToolContext(
            images=[create_canvas(300, 300, WHITE)],
            ground_truth={
                "task_kind": "navigation",
                "size": 3,
                "cell_px": 100,
                "start": [0, 0],
                "goal": [2, 2],
                "holes": [[1, 1]],
            },
            grid_size=3,
        )

    def test_valid_astar_call(self, registry):
        call = ToolCallRequest(
            name="AStar",
            parameters={"start": [0, 0], "goal": [2, 2], "obstacles": [[1, 1]]},
        )
        result = dispatch(call, registry, self.ctx())
        assert result.ok
        assert len(json.loads(result.text)) == 4

    def test_unknown_tool(self, registry):
        result = dispatch(ToolCallRequest("Func_zzz", {}), registry, self.ctx())
        assert result.error_kind == "UnknownTool"

    def test_unknown_param(self, registry):
        call = ToolCallRequest(
            "AStar", {"strt": [0, 0], "goal": [2, 2], "obstacles": []}
        )
        result = dispatch(call, registry, self.ctx())
        assert result.error_kind == "UnknownParam"

    def test_missing_param(self, registry):
        result = dispatch(ToolCallRequest("AStar", {"start": [0, 0]}), registry, self.ctx())
        assert result.error_kind == "MissingParam"

    def test_bad_value(self, registry):
        call = ToolCallRequest(
            "AStar", {"start": "zero", "goal": [2, 2], "obstacles": []}
        )
        result = dispatch(call, registry, self.ctx())
        assert result.error_kind == "BadValue"

    def test_bad_image_ref(self, registry):
        call = ToolCallRequest(
            "Crop", {"image": "img_9", "box": [0, 0, 10, 10]}
        )
        result = dispatch(call, registry, self.ctx())
        assert result.error_kind == "BadImageRef"

    def test_tool_error_surfaces_kind(self, registry):
        call = ToolCallRequest(
            "AStar", {"start": [0, 0], "goal": [2, 2], "obstacles": [[0, 1], [1, 0], [1, 1]]}
        )
        result = dispatch(call, registry, self.ctx())
        assert result.error_kind == "NoPath"

    def test_dispatch_never_mutates_images(self, registry):
        ctx = self.ctx()
        before = ctx.images[0].copy_array()
        call = ToolCallRequest(
            "Draw2DPath",
            {"image": "img_1", "start": [50, 50], "directions": ["R", "D"]},
        )
        result = dispatch(call, registry, ctx)
        assert result.ok and result.image is not None
        assert np.array_equal(ctx.images[0].array, before)
        assert len(ctx.images) == 1  # appending is the episode's job

    def test_crop_delegates_with_upscale(self, registry):
        ctx = self.ctx()
        result = dispatch(
            ToolCallRequest("Crop", {"image": "img_1", "box": [0, 0, 30, 20]}),
            registry,
            ctx,
        )
        assert result.ok
        assert (result.image.width, result.image.height) == (60, 40)
        assert result.extra["crop"]["source_index"] == 1

    def test_insert_image(self, registry):
        ctx = self.ctx()
        ctx.images.append(create_canvas(10, 10, Color(1, 2, 3)))
        result = dispatch(
            ToolCallRequest(
                "InsertImage",
                {"base": "img_1", "insert": "img_2", "box": [0, 0, 10, 10]},
            ),
            registry,
            ctx,
        )
        assert result.ok
        assert result.image.pixel(5, 5) == (1, 2, 3)

    def test_ocr_without_layer(self, registry):
        result = dispatch(
            ToolCallRequest("OCR", {"image": "img_1"}), registry, self.ctx()
        )
        assert result.error_kind == "OracleUnavailable"

    def test_ocr_with_layer(self, registry):
        ctx = self.ctx()
        ctx.text_layers[1] = [("Buy Now", BBox(10, 10, 60, 30))]
        result = dispatch(ToolCallRequest("OCR", {"image": "img_1"}), registry, ctx)
        assert result.ok
        assert json.loads(result.text) == [
            {"text": "Buy Now", "box": [10, 10, 60, 30]}
        ]

    def test_ocr_pluggable_engine(self, registry):
        ctx = self.ctx()
        ctx.ocr_engine = lambda img: [("engine!", BBox(0, 0, 5, 5))]
        result = dispatch(ToolCallRequest("OCR", {"image": "img_1"}), registry, ctx)
        assert result.ok and "engine!" in result.text

    def test_empty_holes_point_is_ok(self, registry):
        ctx = self.ctx()
        ctx.ground_truth["holes"] = []
        result = dispatch(
            ToolCallRequest(
                "Point", {"image": "img_1", "description": "the ice holes"}
            ),
            registry,
            ctx,
        )
        assert result.ok and json.loads(result.text) == []


def test_resolve_image_ref():
    imgs = [create_canvas(2, 2, WHITE), create_canvas(3, 3, WHITE)]
    idx, img = resolve_image_ref("img_2", imgs)
    assert idx == 2 and img.width == 3
    from toolgym.errors import BadImageRef

    with pytest.raises(BadImageRef):
        resolve_image_ref("img_3", imgs)
    with pytest.raises(BadImageRef):
        resolve_image_ref("image_1", imgs)


def test_registry_has_seven_tools(registry):
    assert len(registry.schemas()) == 7
    assert registry.names() == [
        "Point",
        "Draw2DPath",
        "AStar",
        "DetectBlackArea",
        "InsertImage",
        "OCR",
        "Crop",
    ]
