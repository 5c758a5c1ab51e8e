"""Blueprint-driven trajectory synthesis.

Each task has an abstract plan of tool-call steps with chain-of-thought
slots. Instantiation grounds the plan against a live instance: tool calls
are executed through the real dispatcher, observations are embedded, and
the slots are filled from deterministic templates (an LLM hook can replace
the templates). Every emitted record parses and validates cleanly.

Three perturbation variants diversify the data:
  - reflection: a deliberately wrong manipulation attempt plus a correcting
    turn before the correct continuation;
  - failure: the first tool call fails k times (formatted error
    observations) and the record falls back to a direct best-effort answer;
  - no_tool: a straight think-then-answer record with no tool use.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .episodes import EpisodeConfig, _make_instance, build_system_prompt
from .errors import BlueprintError, InstantiationError
from .guiqa import derive_text_layer
from .protocol import (
    Trajectory,
    Turn,
    response_text,
    tool_call_text,
    validate_trajectory,
)
from .raster import BBox, ImageBuffer, pixel_diff, to_png
from .toolkit import ToolCallRequest, ToolContext, ToolRegistry, canonical_registry, dispatch
from .vsp import DIRECTIONS

PERTURBATIONS = ("none", "reflection", "failure", "no_tool")

FAILURE_OBSERVATION = "error: Unavailable: the tool backend did not return a result"


@dataclass
class CurationContext:
    instance: object
    gt: dict
    toolctx: ToolContext
    rng: random.Random
    observations: list = field(default_factory=list)
    scratch: dict = field(default_factory=dict)


@dataclass
class StepTemplate:
    kind: str                                  # "tool-call" | "response"
    tool: Optional[str] = None
    bind: Optional[Callable[[CurationContext], dict]] = None
    cot: Optional[Callable[[CurationContext], str]] = None
    respond: Optional[Callable[[CurationContext], str]] = None


@dataclass
class Blueprint:
    task: str
    name: str
    steps: list[StepTemplate]


@dataclass
class PerturbationConfig:
    reflection_fraction: float = 0.0
    failure_fraction: float = 0.0
    no_tool_fraction: float = 0.0
    failure_retry_count: int = 2
    seed: int = 0

    def __post_init__(self):
        fractions = (
            self.reflection_fraction,
            self.failure_fraction,
            self.no_tool_fraction,
        )
        if any(f < 0 or f > 1 for f in fractions) or sum(fractions) > 1:
            raise BlueprintError("perturbation fractions must lie in [0,1], sum <= 1")
        if self.failure_retry_count < 1:
            raise BlueprintError("failure_retry_count must be >= 1")


@dataclass
class DatasetRecord:
    messages: list[dict]
    images: list[str] = field(default_factory=list)   # relative paths at emit time
    metadata: dict = field(default_factory=dict)
    image_data: list[ImageBuffer] = field(default_factory=list)  # not serialized

    def assistant_turns(self) -> list[str]:
        return [m["content"] for m in self.messages if m["role"] == "assistant"]


# --- chain-of-thought templates ------------------------------------------------


def _fmt_moves(moves) -> str:
    return ", ".join(moves)


def _vsp_plan_cot(ctx: CurationContext) -> str:
    gt = ctx.gt
    moves = gt["label"]
    return (
        "The coordinates pin down the whole grid: start, goal and every hole "
        f"are known. Walking {_fmt_moves(moves)} keeps clear of the holes and "
        "ends on the goal cell. Let me draw it to double-check before "
        "answering."
    )


def _start_center(ctx: CurationContext) -> list[int]:
    gt = ctx.gt
    px = gt["cell_px"]
    row, col = gt["start"]
    return [col * px + px // 2, row * px + px // 2]


# --- blueprint bindings ----------------------------------------------------------


def _bp_vsp_nav(use_astar: bool = False) -> Blueprint:
    steps = [
        StepTemplate(
            kind="tool-call",
            tool="Point",
            bind=lambda ctx: {"image": "img_1", "description": "the start point"},
            cot=lambda ctx: "I need the exact start location before planning anything.",
        ),
        StepTemplate(
            kind="tool-call",
            tool="Point",
            bind=lambda ctx: {"image": "img_1", "description": "the goal point"},
            cot=lambda ctx: "Now the goal cell, so I know where the path must end.",
        ),
        StepTemplate(
            kind="tool-call",
            tool="Point",
            bind=lambda ctx: {"image": "img_1", "description": "the ice holes"},
            cot=lambda ctx: "Finally the holes: every cell I must avoid.",
        ),
    ]
    if use_astar:
        steps.append(
            StepTemplate(
                kind="tool-call",
                tool="AStar",
                bind=lambda ctx: {
                    "start": list(ctx.gt["start"]),
                    "goal": list(ctx.gt["goal"]),
                    "obstacles": [list(h) for h in ctx.gt["holes"]],
                },
                cot=lambda ctx: (
                    "With all key cells located I can delegate the route "
                    "computation to the path planner."
                ),
            )
        )
    steps.append(
        StepTemplate(
            kind="tool-call",
            tool="Draw2DPath",
            bind=lambda ctx: {
                "image": "img_1",
                "start": _start_center(ctx),
                "directions": list(ctx.gt["label"]),
            },
            cot=_vsp_plan_cot,
        )
    )
    steps.append(
        StepTemplate(
            kind="response",
            respond=lambda ctx: (
                "The drawn path stays on the grid, touches no hole, and ends "
                f"on G. \\boxed{{{_fmt_moves(ctx.gt['label'])}}}"
            ),
        )
    )
    return Blueprint(task="vsp_nav", name="vsp-nav", steps=steps)


def _bp_vsp_verify() -> Blueprint:
    def verdict(ctx: CurationContext) -> str:
        safe = ctx.gt["label"] == "safe"
        reason = (
            "the drawn line stays on ice the whole way and stops on G"
            if safe
            else "the drawn line leaves the safe cells before reaching G"
        )
        word = "Yes" if safe else "No"
        return f"Looking at the overlay, {reason}. \\boxed{{{word}}}"

    return Blueprint(
        task="vsp_verify",
        name="vsp-verify",
        steps=[
            StepTemplate(
                kind="tool-call",
                tool="Point",
                bind=lambda ctx: {"image": "img_1", "description": "the start point"},
                cot=lambda ctx: "First, anchor the candidate path at the true start cell.",
            ),
            StepTemplate(
                kind="tool-call",
                tool="Draw2DPath",
                bind=lambda ctx: {
                    "image": "img_1",
                    "start": _start_center(ctx),
                    "directions": list(ctx.gt["candidate"]["moves"]),
                },
                cot=lambda ctx: (
                    "Rendering the proposed moves onto the map turns the "
                    "judgement into a simple visual check."
                ),
            ),
            StepTemplate(kind="response", respond=verdict),
        ],
    )


def _bp_jigsaw() -> Blueprint:
    # Candidate attempt order is seed-randomized; attempts stop once the
    # inserted patch matches the original content.
    def detect_bind(ctx: CurationContext) -> dict:
        return {"image": "img_1"}

    return Blueprint(
        task="jigsaw",
        name="jigsaw",
        steps=[
            StepTemplate(
                kind="tool-call",
                tool="DetectBlackArea",
                bind=detect_bind,
                cot=lambda ctx: (
                    "First find exactly where the missing patch sits; the "
                    "blacked-out region gives its bounding box."
                ),
            ),
            # insert attempts are expanded dynamically by the instantiator
            StepTemplate(kind="jigsaw-attempts"),
            StepTemplate(
                kind="response",
                respond=lambda ctx: (
                    f"Candidate {ctx.scratch['winner']} continues the "
                    "surrounding content seamlessly. "
                    f"\\boxed{{{ctx.scratch['winner']}}}"
                ),
            ),
        ],
    )


def _bp_guiqa() -> Blueprint:
    def crop_bind(ctx: CurationContext) -> dict:
        return {"image": "img_1", "box": list(ctx.gt["target_box"])}

    def answer(ctx: CurationContext) -> str:
        caption = json.loads(ctx.observations[-1].text)[0]["text"]
        return (
            "The zoomed view makes the caption unambiguous. "
            f"\\boxed{{{caption}}}"
        )

    return Blueprint(
        task="guiqa_fixture",
        name="guiqa",
        steps=[
            StepTemplate(
                kind="tool-call",
                tool="Crop",
                bind=crop_bind,
                cot=lambda ctx: (
                    "The question points at one region; zooming into it cuts "
                    "away the rest of the interface."
                ),
            ),
            StepTemplate(
                kind="tool-call",
                tool="OCR",
                bind=lambda ctx: {"image": f"img_{len(ctx.toolctx.images)}"},
                cot=lambda ctx: "Reading the cropped element gives the exact caption.",
            ),
            StepTemplate(kind="response", respond=answer),
        ],
    )


def default_blueprints(use_astar: bool = False) -> dict[str, Blueprint]:
    return {
        "vsp_nav": _bp_vsp_nav(use_astar=use_astar),
        "vsp_verify": _bp_vsp_verify(),
        "jigsaw": _bp_jigsaw(),
        "guiqa_fixture": _bp_guiqa(),
    }


# --- instantiation ---------------------------------------------------------------


def _apply_tool(
    ctx: CurationContext, registry: ToolRegistry, name: str, params: dict
) -> tuple[str, bool]:
    """Dispatch a call, record images/layers, return (observation, ok)."""
    result = dispatch(ToolCallRequest(name=name, parameters=params), registry, ctx.toolctx)
    ctx.observations.append(result)
    obs = result.text
    if result.ok and result.image is not None:
        ctx.toolctx.images.append(result.image)
        idx = len(ctx.toolctx.images)
        crop_info = result.extra.get("crop")
        if crop_info is not None:
            src = ctx.toolctx.text_layers.get(crop_info["source_index"])
            if src is not None:
                ctx.toolctx.text_layers[idx] = derive_text_layer(
                    src, BBox(*crop_info["box"]), crop_info["upscale"]
                )
        obs = f"{obs}\n[attached as img_{idx}]"
    return obs, result.ok


def _emit_call(messages, ctx, registry, tool, params, cot, expect_ok=True):
    messages.append({"role": "assistant", "content": tool_call_text(cot, tool, params)})
    obs, ok = _apply_tool(ctx, registry, tool, params)
    if expect_ok and not ok:
        raise InstantiationError(f"{tool} failed during instantiation: {obs}")
    messages.append({"role": "tool", "content": obs})
    return obs


def _jigsaw_attempts(messages, ctx, registry) -> None:
    """Seed-randomized insert attempts, stopping at the matching patch."""
    slot = json.loads(ctx.observations[-1].text)[0]
    order = ["A", "B"]
    ctx.rng.shuffle(order)
    original = ctx.instance.original
    for label in order:
        img_ref = "img_2" if label == "A" else "img_3"
        cot = (
            f"Trying candidate {label}: paste it into the detected box and "
            "see whether the content lines up."
        )
        _emit_call(
            messages,
            ctx,
            registry,
            "InsertImage",
            {"base": "img_1", "insert": img_ref, "box": slot},
            cot,
        )
        composed = ctx.toolctx.images[-1]
        if pixel_diff(composed, original) == 0:
            ctx.scratch["winner"] = label
            return
    raise InstantiationError("no candidate reproduced the original content")


def _build_context(cfg: EpisodeConfig) -> tuple[CurationContext, str, str]:
    instance, gt, images, layers, user_prompt = _make_instance(cfg)
    toolctx = ToolContext(
        images=list(images),
        ground_truth=gt,
        cell_px=cfg.cell_px,
        grid_size=gt.get("size"),
        text_layers=dict(layers),
    )
    ctx = CurationContext(
        instance=instance, gt=gt, toolctx=toolctx, rng=random.Random(cfg.seed)
    )
    return ctx, user_prompt, build_system_prompt(canonical_registry().schemas())


def instantiate(
    blueprint: Blueprint,
    cfg: EpisodeConfig,
    registry: Optional[ToolRegistry] = None,
    perturbation: str = "none",
    perturb_cfg: Optional[PerturbationConfig] = None,
) -> DatasetRecord:
    """Ground a blueprint against a live instance into a dataset record."""
    registry = registry or canonical_registry()
    for step in blueprint.steps:
        if step.kind == "tool-call" and step.tool not in registry:
            raise BlueprintError(f"blueprint names unknown tool {step.tool!r}")
    if blueprint.task != cfg.task:
        raise BlueprintError(
            f"blueprint is for {blueprint.task!r}, instance is {cfg.task!r}"
        )
    ctx, user_prompt, system_prompt = _build_context(cfg)
    messages = [
        {"role": "system", "content": system_prompt},
        {"role": "user", "content": user_prompt},
    ]

    if perturbation == "no_tool":
        _append_no_tool(messages, ctx, cfg)
    elif perturbation == "failure":
        _append_failure(
            messages, ctx, cfg, blueprint,
            (perturb_cfg or PerturbationConfig()).failure_retry_count,
        )
    else:
        steps = blueprint.steps
        if perturbation == "reflection":
            _run_steps_with_reflection(messages, ctx, registry, cfg, steps)
        else:
            _run_steps(messages, ctx, registry, steps)

    record = DatasetRecord(
        messages=messages,
        metadata={
            "task": cfg.task,
            "seed": cfg.seed,
            "perturbation": perturbation,
            "blueprint": blueprint.name,
            "gen": cfg.to_dict(),
            "ground_truth": ctx.gt,
        },
        image_data=list(ctx.toolctx.images),
    )
    report = validate_trajectory(
        Trajectory(turns=[Turn(raw_text=t) for t in record.assistant_turns()]),
        registry,
    )
    if not report.all_formatted:
        raise InstantiationError("instantiated record failed format validation")
    return record


def _run_steps(messages, ctx, registry, steps) -> None:
    for step in steps:
        if step.kind == "tool-call":
            _emit_call(
                messages, ctx, registry, step.tool, step.bind(ctx), step.cot(ctx)
            )
        elif step.kind == "jigsaw-attempts":
            _jigsaw_attempts(messages, ctx, registry)
        elif step.kind == "response":
            messages.append(
                {
                    "role": "assistant",
                    "content": response_text(
                        "Everything checks out; time to answer.", step.respond(ctx)
                    ),
                }
            )
        else:
            raise BlueprintError(f"unknown step kind {step.kind!r}")


# --- perturbation variants --------------------------------------------------------


def _rotate_move(move: str) -> str:
    order = list(DIRECTIONS)
    return order[(order.index(move) + 1) % len(order)]


def _run_steps_with_reflection(messages, ctx, registry, cfg, steps) -> None:
    """Wrong manipulation attempt, reflective correction, then the plan."""
    task = cfg.task
    if task == "vsp_nav":
        for step in steps[:-2]:
            _emit_call(messages, ctx, registry, step.tool, step.bind(ctx), step.cot(ctx))
        true_moves = list(ctx.gt["label"])
        wrong_moves = [_rotate_move(true_moves[0])] + true_moves[1:]
        _emit_call(
            messages, ctx, registry,
            "Draw2DPath",
            {"image": "img_1", "start": _start_center(ctx), "directions": wrong_moves},
            "I think the route starts this way; let me draw it to verify.",
        )
        draw = steps[-2]
        _emit_call(
            messages, ctx, registry, draw.tool, draw.bind(ctx),
            "Wait - the drawn line is wrong: it does not trace a safe route to "
            "G. The first move must differ. Re-deriving from the coordinates "
            "and drawing again.",
        )
        resp = steps[-1]
        messages.append(
            {
                "role": "assistant",
                "content": response_text(
                    "The corrected drawing is safe end to end.", resp.respond(ctx)
                ),
            }
        )
        return
    if task == "vsp_verify":
        point = steps[0]
        _emit_call(messages, ctx, registry, point.tool, point.bind(ctx), point.cot(ctx))
        px = ctx.gt["cell_px"]
        x, y = _start_center(ctx)
        size = ctx.gt["size"]
        wrong = [x + px, y] if ctx.gt["start"][1] + 1 < size else [x - px, y]
        _emit_call(
            messages, ctx, registry,
            "Draw2DPath",
            {
                "image": "img_1",
                "start": wrong,
                "directions": list(ctx.gt["candidate"]["moves"]),
            },
            "Overlaying the candidate moves from what I take to be the start.",
        )
        draw = steps[1]
        _emit_call(
            messages, ctx, registry, draw.tool, draw.bind(ctx),
            "Hold on - I anchored the overlay on the wrong cell; it must start "
            "exactly on S. Redrawing from the reported start coordinates.",
        )
        resp = steps[2]
        messages.append(
            {
                "role": "assistant",
                "content": response_text(
                    "Now the overlay is anchored correctly.", resp.respond(ctx)
                ),
            }
        )
        return
    if task == "jigsaw":
        detect = steps[0]
        _emit_call(messages, ctx, registry, detect.tool, detect.bind(ctx), detect.cot(ctx))
        slot = json.loads(ctx.observations[-1].text)[0]
        correct = ctx.instance.answer
        wrong = "B" if correct == "A" else "A"
        wrong_ref = "img_2" if wrong == "A" else "img_3"
        correct_ref = "img_2" if correct == "A" else "img_3"
        _emit_call(
            messages, ctx, registry, "InsertImage",
            {"base": "img_1", "insert": wrong_ref, "box": slot},
            f"Candidate {wrong} looks plausible at a glance; paste it in first.",
        )
        _emit_call(
            messages, ctx, registry, "InsertImage",
            {"base": "img_1", "insert": correct_ref, "box": slot},
            f"On inspection the seam from candidate {wrong} clashes with the "
            f"surroundings - that was the wrong pick. Trying candidate {correct}.",
        )
        ctx.scratch["winner"] = correct
        resp = steps[2]
        messages.append(
            {
                "role": "assistant",
                "content": response_text(
                    "The second composition is seamless.", resp.respond(ctx)
                ),
            }
        )
        return
    if task == "guiqa_fixture":
        elements = ctx.gt["elements"]
        target_box = list(ctx.gt["target_box"])
        wrong_box = next(
            (list(e["box"]) for e in elements if list(e["box"]) != target_box),
            target_box,
        )
        _emit_call(
            messages, ctx, registry, "Crop",
            {"image": "img_1", "box": wrong_box},
            "Zooming into the element I believe the question refers to.",
        )
        _emit_call(
            messages, ctx, registry, "Crop",
            {"image": "img_1", "box": target_box},
            "That crop does not match the region in the question - wrong "
            "element. Cropping the exact coordinates asked about instead.",
        )
        ocr_ref = f"img_{len(ctx.toolctx.images)}"
        _emit_call(
            messages, ctx, registry, "OCR", {"image": ocr_ref},
            "Reading the corrected crop.",
        )
        resp = steps[2]
        messages.append(
            {
                "role": "assistant",
                "content": response_text(
                    "The caption is confirmed by the readout.", resp.respond(ctx)
                ),
            }
        )
        return
    raise BlueprintError(f"no reflection variant for task {task!r}")


def _ground_truth_answer(ctx: CurationContext, task: str) -> str:
    if task == "vsp_nav":
        return _fmt_moves(ctx.gt["label"])
    if task == "vsp_verify":
        return "Yes" if ctx.gt["label"] == "safe" else "No"
    if task in ("jigsaw", "guiqa_fixture"):
        return str(ctx.gt["label"])
    raise BlueprintError(f"unknown task {task!r}")


def _append_failure(messages, ctx, cfg, blueprint, retries: int) -> None:
    first = next(s for s in blueprint.steps if s.kind in ("tool-call",))
    for attempt in range(retries):
        cot = (
            first.cot(ctx)
            if attempt == 0
            else "The tool returned an error; retrying the same call once more."
        )
        messages.append(
            {
                "role": "assistant",
                "content": tool_call_text(cot, first.tool, first.bind(ctx)),
            }
        )
        messages.append({"role": "tool", "content": FAILURE_OBSERVATION})
    answer = _ground_truth_answer(ctx, cfg.task)
    messages.append(
        {
            "role": "assistant",
            "content": response_text(
                "The tool keeps failing, so I will rely on my own reading of "
                "the image and give my best answer.",
                f"Working without the tool, my best answer is \\boxed{{{answer}}}.",
            ),
        }
    )


def _append_no_tool(messages, ctx, cfg) -> None:
    answer = _ground_truth_answer(ctx, cfg.task)
    messages.append(
        {
            "role": "assistant",
            "content": response_text(
                "This one is simple enough to answer directly from the image; "
                "no tool needed.",
                f"\\boxed{{{answer}}}",
            ),
        }
    )


# --- batch generation, perturbation, emission ------------------------------------


def _episode_cfg(task: str, seed: int, **gen) -> EpisodeConfig:
    return EpisodeConfig(task=task, seed=seed, **gen)


def assign_perturbations(n: int, cfg: PerturbationConfig) -> list[str]:
    """Deterministic variant per record index, honoring fractions exactly."""
    n_reflection = round(cfg.reflection_fraction * n)
    n_failure = round(cfg.failure_fraction * n)
    n_no_tool = round(cfg.no_tool_fraction * n)
    tags = (
        ["reflection"] * n_reflection
        + ["failure"] * n_failure
        + ["no_tool"] * n_no_tool
    )
    tags += ["none"] * (n - len(tags))
    random.Random(cfg.seed).shuffle(tags)
    return tags


def build_records(
    tasks: list[str],
    count: int,
    perturb_cfg: PerturbationConfig,
    seed: int = 0,
    registry: Optional[ToolRegistry] = None,
    gen_overrides: Optional[dict] = None,
) -> list[DatasetRecord]:
    """Generate ``count`` records cycling over ``tasks`` with perturbations."""
    registry = registry or canonical_registry()
    blueprints = default_blueprints()
    tags = assign_perturbations(count, perturb_cfg)
    overrides = gen_overrides or {}
    records = []
    for i in range(count):
        task = tasks[i % len(tasks)]
        cfg = _episode_cfg(task, seed + i, **overrides.get(task, {}))
        records.append(
            instantiate(
                blueprints[task],
                cfg,
                registry,
                perturbation=tags[i],
                perturb_cfg=perturb_cfg,
            )
        )
    return records


def perturb(
    records: list[DatasetRecord],
    cfg: PerturbationConfig,
    registry: Optional[ToolRegistry] = None,
) -> list[DatasetRecord]:
    """Re-synthesize a seeded fraction of records as perturbed variants.

    Unassigned records pass through unchanged; assigned ones are rebuilt
    from their recorded generation config, so the output is deterministic
    in (records, cfg).
    """
    registry = registry or canonical_registry()
    blueprints = default_blueprints()
    tags = assign_perturbations(len(records), cfg)
    out = []
    for record, tag in zip(records, tags):
        if tag == "none":
            out.append(record)
            continue
        gen = dict(record.metadata["gen"])
        task = gen.pop("task")
        seed = gen.pop("seed")
        gen = {
            k: v
            for k, v in gen.items()
            if k
            in (
                "size",
                "hole_count",
                "cell_px",
                "source_px",
                "gui_elements",
                "verify_require_goal",
            )
        }
        cfg_ep = _episode_cfg(task, seed, **gen)
        out.append(
            instantiate(
                blueprints[task],
                cfg_ep,
                registry,
                perturbation=tag,
                perturb_cfg=cfg,
            )
        )
    return out


def emit_dataset(
    records: list[DatasetRecord],
    out_dir,
    registry: Optional[ToolRegistry] = None,
) -> dict:
    """Write records as JSONL plus PNGs; returns (and writes) the manifest.

    Invalid records are listed in the manifest and not written. Re-running
    with identical inputs reproduces every byte.
    """
    registry = registry or canonical_registry()
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    manifest = {
        "records": 0,
        "rejected": [],
        "per_task": {},
        "per_perturbation": {},
    }
    lines = []
    written_index = 0
    for i, record in enumerate(records):
        report = validate_trajectory(
            Trajectory(turns=[Turn(raw_text=t) for t in record.assistant_turns()]),
            registry,
        )
        if not report.all_formatted:
            manifest["rejected"].append({"index": i, "reason": "format validation"})
            continue
        image_refs = []
        for k, img in enumerate(record.image_data):
            rel = f"images/{written_index:05d}_{k}.png"
            (out / rel).write_bytes(to_png(img))
            image_refs.append(rel)
        record.images = image_refs
        payload = {
            "messages": record.messages,
            "images": image_refs,
            "metadata": record.metadata,
        }
        lines.append(json.dumps(payload, ensure_ascii=False))
        manifest["records"] += 1
        task = record.metadata.get("task", "?")
        tag = record.metadata.get("perturbation", "none")
        manifest["per_task"][task] = manifest["per_task"].get(task, 0) + 1
        manifest["per_perturbation"][tag] = manifest["per_perturbation"].get(tag, 0) + 1
        written_index += 1
    (out / "data.jsonl").write_text(
        "".join(line + "\n" for line in lines), encoding="utf-8"
    )
    manifest["per_task"] = dict(sorted(manifest["per_task"].items()))
    manifest["per_perturbation"] = dict(sorted(manifest["per_perturbation"].items()))
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return manifest


def load_dataset(out_dir) -> list[dict]:
    """Read back an emitted dataset; inverse of emit_dataset's JSONL."""
    path = Path(out_dir) / "data.jsonl"
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
