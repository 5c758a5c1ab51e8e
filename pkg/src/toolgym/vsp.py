"""FrozenLake-style grid tasks: procedural maps, rendering, and checkers.

Two task flavors share the same maps:
  - navigation: produce a move sequence from start to goal avoiding holes;
  - verification: judge whether a given candidate path is safe.

Maps are pure functions of (size, hole_count, seed). Rendering is
deterministic so perception oracles can be inverted exactly from ground
truth. Direction tokens are the single letters U, D, L, R (row-1, row+1,
col-1, col+1).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InfeasibleConfig, InvalidAnswer, NoPath
from .raster import ImageBuffer


class Cell(NamedTuple):
    row: int
    col: int


DIRECTIONS = ("U", "D", "L", "R")
DELTA = {"U": (-1, 0), "D": (1, 0), "L": (0, -1), "R": (0, 1)}

# Conventional data split: mid sizes for training, the rest held out for
# evaluation. Purely advisory; every size in 3..9 is generable.
TRAIN_SIZES = (4, 6, 8)
HELDOUT_SIZES = (3, 5, 7, 9)

ICE_COLOR = (255, 255, 255)
HOLE_COLOR = (70, 130, 230)
START_COLOR = (60, 180, 75)
GOAL_COLOR = (255, 214, 0)
GRID_COLOR = (160, 160, 160)
GLYPH_COLOR = (40, 40, 40)

# 5x7 bitmaps for the start/goal glyphs.
_GLYPHS = {
    "S": [
        ".####",
        "#....",
        "#....",
        ".###.",
        "....#",
        "....#",
        "####.",
    ],
    "G": [
        ".###.",
        "#...#",
        "#....",
        "#.###",
        "#...#",
        "#...#",
        ".###.",
    ],
}


@dataclass(frozen=True)
class GridMap:
    size: int
    start: Cell
    goal: Cell
    holes: frozenset[Cell]
    cell_px: int = 100

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell.row < self.size and 0 <= cell.col < self.size

    def cell_center_px(self, cell: Cell) -> tuple[int, int]:
        """Absolute (x, y) pixel center of a cell."""
        half = self.cell_px // 2
        return (cell.col * self.cell_px + half, cell.row * self.cell_px + half)


@dataclass(frozen=True)
class PathSpec:
    origin: Cell
    moves: tuple[str, ...]


@dataclass
class VspInstance:
    kind: str  # "navigation" | "verification"
    map: GridMap
    candidate: Optional[PathSpec]
    label: object  # move tuple for navigation, "safe"/"unsafe" for verification
    rendered: ImageBuffer
    require_goal: bool = True
    seed: int = 0

    def to_record(self) -> dict:
        rec = {
            "task_kind": self.kind,
            "size": self.map.size,
            "cell_px": self.map.cell_px,
            "start": list(self.map.start),
            "goal": list(self.map.goal),
            "holes": sorted([list(h) for h in self.map.holes]),
            "seed": self.seed,
        }
        if self.kind == "navigation":
            rec["label"] = list(self.label)
        else:
            rec["label"] = self.label
            rec["candidate"] = {
                "origin": list(self.candidate.origin),
                "moves": list(self.candidate.moves),
            }
            rec["require_goal"] = self.require_goal
        return rec


def parse_directions(answer) -> list[str]:
    """Normalize a move-sequence answer into direction tokens.

    Accepts a sequence of tokens, a separated string ("R, R, D") or a
    contiguous string ("RRD"). Raises InvalidAnswer on any unknown token.
    """
    if isinstance(answer, str):
        cleaned = answer.strip().strip("[](){}")
        parts = [p for p in _split_tokens(cleaned) if p]
    elif isinstance(answer, Sequence):
        parts = [str(p) for p in answer]
    else:
        raise InvalidAnswer(f"cannot parse direction answer: {answer!r}")
    moves: list[str] = []
    for part in parts:
        token = part.strip().strip("'\"").upper()
        if not token:
            continue
        if token in DELTA:
            moves.append(token)
        elif all(ch in DELTA for ch in token):
            moves.extend(token)  # contiguous form, e.g. "RRDD"
        else:
            raise InvalidAnswer(f"unknown direction token: {part!r}")
    return moves


def _split_tokens(text: str) -> list[str]:
    out, cur = [], []
    for ch in text:
        if ch.isalpha():
            cur.append(ch)
        else:
            if cur:
                out.append("".join(cur))
                cur = []
    if cur:
        out.append("".join(cur))
    return out


def _solvable(size: int, start: Cell, goal: Cell, holes: frozenset[Cell]) -> bool:
    return _bfs_parents(size, start, goal, holes) is not None


def _bfs_parents(size, start, goal, holes):
    """BFS with U,D,L,R neighbor order; returns parent map or None."""
    parents: dict[Cell, Optional[Cell]] = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            return parents
        for d in DIRECTIONS:
            dr, dc = DELTA[d]
            nxt = Cell(cur.row + dr, cur.col + dc)
            if 0 <= nxt.row < size and 0 <= nxt.col < size:
                if nxt not in holes and nxt not in parents:
                    parents[nxt] = cur
                    queue.append(nxt)
    return None


def generate_map(size: int, hole_count: int, seed: int, cell_px: int = 100) -> GridMap:
    """Deterministically sample a solvable map for the given seed."""
    if not 3 <= size <= 9:
        raise InfeasibleConfig(f"grid size must be in 3..9, got {size}")
    if hole_count < 0 or hole_count > size * size - 2:
        raise InfeasibleConfig(
            f"hole_count {hole_count} infeasible for size {size} "
            f"(max {size * size - 2})"
        )
    rng = random.Random(seed)
    cells = [Cell(r, c) for r in range(size) for c in range(size)]
    for _ in range(100_000):
        picked = rng.sample(cells, hole_count + 2)
        start, goal = picked[0], picked[1]
        holes = frozenset(picked[2:])
        if _solvable(size, start, goal, holes):
            return GridMap(size=size, start=start, goal=goal, holes=holes, cell_px=cell_px)
    raise InfeasibleConfig(
        f"no solvable map found for size={size} hole_count={hole_count}"
    )


def _draw_glyph(a: np.ndarray, glyph: str, cell: Cell, cell_px: int) -> None:
    rows = _GLYPHS[glyph]
    gh, gw = len(rows), len(rows[0])
    scale = max(1, (cell_px * 3 // 5) // gh)
    top = cell.row * cell_px + (cell_px - gh * scale) // 2
    left = cell.col * cell_px + (cell_px - gw * scale) // 2
    for gy, row in enumerate(rows):
        for gx, ch in enumerate(row):
            if ch == "#":
                y0, x0 = top + gy * scale, left + gx * scale
                a[y0 : y0 + scale, x0 : x0 + scale] = GLYPH_COLOR


def render_map(grid: GridMap) -> ImageBuffer:
    """Deterministic render: white ice, blue holes, S/G glyphs, gray grid."""
    px = grid.cell_px
    side = grid.size * px
    a = np.empty((side, side, 3), dtype=np.uint8)
    a[:, :] = ICE_COLOR
    for hole in grid.holes:
        a[hole.row * px : (hole.row + 1) * px, hole.col * px : (hole.col + 1) * px] = HOLE_COLOR
    a[grid.start.row * px : (grid.start.row + 1) * px, grid.start.col * px : (grid.start.col + 1) * px] = START_COLOR
    a[grid.goal.row * px : (grid.goal.row + 1) * px, grid.goal.col * px : (grid.goal.col + 1) * px] = GOAL_COLOR
    for k in range(grid.size + 1):
        pos = min(k * px, side - 1)
        a[pos, :] = GRID_COLOR
        a[:, pos] = GRID_COLOR
    _draw_glyph(a, "S", grid.start, px)
    _draw_glyph(a, "G", grid.goal, px)
    return ImageBuffer(a)


def shortest_path(grid: GridMap) -> list[str]:
    """BFS-shortest hole-free move sequence; ties broken by U,D,L,R order."""
    parents = _bfs_parents(grid.size, grid.start, grid.goal, grid.holes)
    if parents is None:
        raise NoPath(f"goal unreachable on map {grid}")
    moves: list[str] = []
    cur = grid.goal
    while parents[cur] is not None:
        prev = parents[cur]
        step = (cur.row - prev.row, cur.col - prev.col)
        for d, delta in DELTA.items():
            if delta == step:
                moves.append(d)
                break
        cur = prev
    moves.reverse()
    return moves


def walk(grid: GridMap, origin: Cell, moves: Sequence[str]):
    """Simulate a walk; returns (final_cell, in_bounds, hole_free).

    Leaving the grid or entering a hole stops the walk at the offending step.
    """
    cur = origin
    for move in moves:
        dr, dc = DELTA[move]
        cur = Cell(cur.row + dr, cur.col + dc)
        if not grid.in_bounds(cur):
            return cur, False, True
        if cur in grid.holes:
            return cur, True, False
    return cur, True, True


def path_is_safe(grid: GridMap, path: PathSpec, require_goal: bool = True) -> bool:
    final, in_bounds, hole_free = walk(grid, path.origin, path.moves)
    if not (in_bounds and hole_free):
        return False
    return final == grid.goal if require_goal else True


def check_navigation(grid: GridMap, answer) -> bool:
    """True iff the answer walks start->goal in bounds without holes."""
    moves = parse_directions(answer)
    final, in_bounds, hole_free = walk(grid, grid.start, moves)
    return in_bounds and hole_free and final == grid.goal


def check_verification(instance: VspInstance, answer) -> bool:
    """Compare a Yes/No answer against the instance's safety label."""
    if instance.kind != "verification":
        raise InvalidAnswer("not a verification instance")
    if not isinstance(answer, str):
        raise InvalidAnswer(f"expected Yes/No, got {answer!r}")
    token = answer.strip().strip(".!").lower()
    if token not in ("yes", "no"):
        raise InvalidAnswer(f"expected Yes/No, got {answer!r}")
    return (token == "yes") == (instance.label == "safe")


def _unsafe_candidate(grid: GridMap, rng: random.Random) -> tuple[str, ...]:
    """Build a move sequence that is unsafe under any semantics."""
    variants = []
    if grid.holes:
        hole = rng.choice(sorted(grid.holes))
        # Path that terminates inside a hole: BFS treating only other holes
        # as obstacles.
        others = grid.holes - {hole}
        parents = _bfs_parents(grid.size, grid.start, hole, others)
        if parents is not None:
            moves, cur = [], hole
            while parents[cur] is not None:
                prev = parents[cur]
                step = (cur.row - prev.row, cur.col - prev.col)
                moves.append(next(d for d, dd in DELTA.items() if dd == step))
                cur = prev
            moves.reverse()
            variants.append(tuple(moves))
    # Walking off the top edge is always out of bounds.
    variants.append(tuple(["U"] * (grid.start.row + 1)))
    return rng.choice(variants)


def make_instance(
    kind: str,
    size: int,
    hole_count: int,
    seed: int,
    cell_px: int = 100,
    require_goal: bool = True,
) -> VspInstance:
    """Generate a full task instance (map, render, label, candidate)."""
    grid = generate_map(size, hole_count, seed, cell_px=cell_px)
    rendered = render_map(grid)
    if kind == "navigation":
        return VspInstance(
            kind=kind,
            map=grid,
            candidate=None,
            label=tuple(shortest_path(grid)),
            rendered=rendered,
            seed=seed,
        )
    if kind == "verification":
        rng = random.Random(seed ^ 0x5F5E5F)
        optimal = tuple(shortest_path(grid))
        if rng.random() < 0.5:
            moves = optimal
        else:
            pick = rng.random()
            if pick < 0.6 or len(optimal) < 2:
                moves = _unsafe_candidate(grid, rng)
            else:
                moves = optimal[:-1]  # stops short of the goal
        candidate = PathSpec(origin=grid.start, moves=moves)
        label = "safe" if path_is_safe(grid, candidate, require_goal) else "unsafe"
        return VspInstance(
            kind=kind,
            map=grid,
            candidate=candidate,
            label=label,
            rendered=rendered,
            require_goal=require_goal,
            seed=seed,
        )
    raise InfeasibleConfig(f"unknown vsp kind: {kind}")
