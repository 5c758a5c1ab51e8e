"""Jigsaw puzzles over synthetic imagery.

A source image is cut into a 3x3 patch grid; a 2x2 sub-grid becomes the
base image with one patch blacked out. The removed patch is the correct
candidate, a distractor comes from the five patches outside the base, and
the A/B presentation order is seed-randomized.

Sources are synthesized (gradients plus seeded shapes) with no pure-black
pixels, so black-region detection is unambiguous, and with a unique marker
pixel per patch, so no two patches are ever identical.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .errors import InvalidAnswer, InvalidDimension
from .raster import BBox, ImageBuffer


@dataclass
class JigsawInstance:
    base: ImageBuffer          # 2x2 patch grid with one slot blacked out
    slot: BBox                 # missing region, in base coordinates
    candidates: dict           # {"A": ImageBuffer, "B": ImageBuffer}
    answer: str                # "A" | "B"
    original: ImageBuffer      # the base before blacking the slot
    seed: int = 0

    def to_record(self) -> dict:
        return {
            "task_kind": "jigsaw",
            "slot": list(self.slot.astuple()),
            "label": self.answer,
            "base_size": [self.base.width, self.base.height],
            "seed": self.seed,
        }


def synth_source(width: int, height: int, seed: int) -> ImageBuffer:
    """Deterministic structured source image with no (0,0,0) pixels."""
    if width % 3 or height % 3:
        raise InvalidDimension(f"dimensions must be divisible by 3, got {width}x{height}")
    if width < 3 or height < 3:
        raise InvalidDimension(f"dimensions too small: {width}x{height}")
    rng = random.Random(seed)
    xs = np.arange(width)
    ys = np.arange(height)
    a = np.empty((height, width, 3), dtype=np.uint8)
    a[:, :, 0] = 24 + (xs * 160) // max(width - 1, 1)
    a[:, :, 1] = (24 + (ys * 160) // max(height - 1, 1))[:, None]
    a[:, :, 2] = 90 + ((xs[None, :] + ys[:, None]) * 120) // max(width + height - 2, 1)

    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(rng.randint(6, 10)):
        color = (rng.randint(24, 240), rng.randint(24, 240), rng.randint(24, 240))
        if rng.random() < 0.5:
            x0 = rng.randrange(width)
            y0 = rng.randrange(height)
            w = rng.randint(width // 8 + 1, max(width // 3, width // 8 + 2))
            h = rng.randint(height // 8 + 1, max(height // 3, height // 8 + 2))
            a[y0 : min(y0 + h, height), x0 : min(x0 + w, width)] = color
        else:
            cx, cy = rng.randrange(width), rng.randrange(height)
            r = rng.randint(min(width, height) // 10 + 1, min(width, height) // 4 + 1)
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
            a[mask] = color

    # Unique marker pixel per 3x3 patch: no two patches can be identical.
    pw, ph = width // 3, height // 3
    for pr in range(3):
        for pc in range(3):
            idx = pr * 3 + pc
            a[pr * ph, pc * pw] = (250 - idx * 12, 40 + idx * 20, 180)

    np.maximum(a, 8, out=a)  # keep every channel off pure black
    return ImageBuffer(a)


def generate_puzzle(src: ImageBuffer, seed: int) -> JigsawInstance:
    """Cut a 3x3 grid, pick a 2x2 base, black out one patch, pick candidates."""
    if src.width % 3 or src.height % 3:
        raise InvalidDimension(
            f"source dimensions must be divisible by 3, got {src.width}x{src.height}"
        )
    rng = random.Random(seed)
    pw, ph = src.width // 3, src.height // 3
    arr = src.array

    def patch(pr: int, pc: int) -> np.ndarray:
        return arr[pr * ph : (pr + 1) * ph, pc * pw : (pc + 1) * pw]

    base_r = rng.randint(0, 1)
    base_c = rng.randint(0, 1)
    base_cells = [(base_r + dr, base_c + dc) for dr in (0, 1) for dc in (0, 1)]
    removed = rng.choice(base_cells)
    outside = [
        (pr, pc)
        for pr in range(3)
        for pc in range(3)
        if (pr, pc) not in base_cells
    ]
    distractor_cell = rng.choice(outside)

    original = np.ascontiguousarray(
        arr[base_r * ph : (base_r + 2) * ph, base_c * pw : (base_c + 2) * pw]
    )
    slot = BBox(
        x1=(removed[1] - base_c) * pw,
        y1=(removed[0] - base_r) * ph,
        x2=(removed[1] - base_c + 1) * pw,
        y2=(removed[0] - base_r + 1) * ph,
    )
    base = original.copy()
    base[slot.y1 : slot.y2, slot.x1 : slot.x2] = (0, 0, 0)

    correct = ImageBuffer(patch(*removed).copy())
    distractor = ImageBuffer(patch(*distractor_cell).copy())
    answer = rng.choice(["A", "B"])
    candidates = (
        {"A": correct, "B": distractor}
        if answer == "A"
        else {"A": distractor, "B": correct}
    )
    return JigsawInstance(
        base=ImageBuffer(base),
        slot=slot,
        candidates=candidates,
        answer=answer,
        original=ImageBuffer(original),
        seed=seed,
    )


def check_jigsaw(instance: JigsawInstance, answer) -> bool:
    if not isinstance(answer, str):
        raise InvalidAnswer(f"expected A or B, got {answer!r}")
    token = answer.strip().strip(".").upper()
    if token not in ("A", "B"):
        raise InvalidAnswer(f"expected A or B, got {answer!r}")
    return token == instance.answer


def make_instance(seed: int, source_px: int = 300) -> JigsawInstance:
    src = synth_source(source_px, source_px, seed)
    return generate_puzzle(src, seed)
