"""Synthetic GUI question-answering fixtures.

Renders a fake interface of labeled elements and attaches the labels as a
ground-truth text layer, which the OCR oracle reads back verbatim. The
question names the target element's bounding box in absolute pixels; the
answer is that element's label.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .errors import InvalidAnswer
from .raster import BBox, ImageBuffer

LABELS = (
    "Submit", "Cancel", "Buy Now", "Sign In", "Search", "Settings",
    "Profile", "Help", "Checkout", "Add to Cart", "Log Out", "Home",
    "Next", "Back", "Upload", "Download",
)


@dataclass
class GuiInstance:
    image: ImageBuffer
    text_layer: list  # [(label, BBox), ...] in layout order
    target_index: int
    question: str
    answer: str
    seed: int = 0

    def to_record(self) -> dict:
        return {
            "task_kind": "guiqa",
            "label": self.answer,
            "target_box": list(self.text_layer[self.target_index][1].astuple()),
            "elements": [
                {"text": t, "box": list(b.astuple())} for t, b in self.text_layer
            ],
            "seed": self.seed,
        }


def make_instance(
    seed: int,
    width: int = 480,
    height: int = 360,
    n_elements: int = 6,
) -> GuiInstance:
    """Deterministic fake GUI with ``n_elements`` labeled boxes."""
    rng = random.Random(seed)
    a = np.empty((height, width, 3), dtype=np.uint8)
    a[:, :] = (242, 244, 248)
    a[: height // 8, :] = (52, 70, 110)  # top bar

    cols = 2
    rows = (n_elements + cols - 1) // cols
    cell_w = width // cols
    cell_h = (height - height // 8) // rows
    top0 = height // 8

    labels = rng.sample(LABELS, n_elements)
    layer: list[tuple[str, BBox]] = []
    for i, label in enumerate(labels):
        r, c = divmod(i, cols)
        pad_x = rng.randint(8, max(9, cell_w // 6))
        pad_y = rng.randint(8, max(9, cell_h // 6))
        x1 = c * cell_w + pad_x
        y1 = top0 + r * cell_h + pad_y
        x2 = (c + 1) * cell_w - pad_x
        y2 = top0 + (r + 1) * cell_h - pad_y
        box = BBox(x1, y1, x2, y2)
        color = (rng.randint(90, 220), rng.randint(90, 220), rng.randint(90, 220))
        a[y1:y2, x1:x2] = color
        # pseudo-text bar so the element looks like it carries a caption
        bar_h = max(2, (y2 - y1) // 5)
        bar_y = (y1 + y2) // 2 - bar_h // 2
        bar_pad = max(2, (x2 - x1) // 8)
        a[bar_y : bar_y + bar_h, x1 + bar_pad : x2 - bar_pad] = (30, 30, 38)
        layer.append((label, box))

    target_index = rng.randrange(n_elements)
    tbox = layer[target_index][1]
    question = (
        "What is the caption of the interface element inside the region "
        f"({tbox.x1}, {tbox.y1}, {tbox.x2}, {tbox.y2})? Coordinates are "
        "absolute pixels with the origin at the top-left."
    )
    return GuiInstance(
        image=ImageBuffer(a),
        text_layer=layer,
        target_index=target_index,
        question=question,
        answer=labels[target_index],
        seed=seed,
    )


def check_guiqa(instance: GuiInstance, answer) -> bool:
    if not isinstance(answer, str):
        raise InvalidAnswer(f"expected a text answer, got {answer!r}")
    token = answer.strip().strip(".").casefold()
    if not token:
        raise InvalidAnswer("empty answer")
    return token == instance.answer.casefold()


def derive_text_layer(
    layer: list, box: BBox, upscale: int
) -> list:
    """Text layer of a cropped region: fully contained elements, remapped."""
    out = []
    for text, b in layer:
        if b.x1 >= box.x1 and b.y1 >= box.y1 and b.x2 <= box.x2 and b.y2 <= box.y2:
            out.append(
                (
                    text,
                    BBox(
                        (b.x1 - box.x1) * upscale,
                        (b.y1 - box.y1) * upscale,
                        (b.x2 - box.x1) * upscale,
                        (b.y2 - box.y1) * upscale,
                    ),
                )
            )
    return out
