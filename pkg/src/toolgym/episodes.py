"""Episode lifecycle: create a task, step raw policy text, settle rewards.

This is the transport-free core behind the HTTP server. Episodes are fully
independent: each owns its instance, image list, and tool context, so any
number can run concurrently; steps within one episode are serialized and a
second in-flight step is rejected as Busy.

A malformed turn does not hard-terminate the episode: it is recorded with
its format flag down and the episode continues, so whole-trajectory format
nullification is observable end to end. Episodes end when a response turn
arrives or the turn budget runs out, and the terminal breakdown is computed
by the reward engine over the stored trajectory (so an offline recompute
agrees bit for bit).
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field
from typing import Optional

from . import guiqa, jigsaw, vsp
from .errors import (
    Busy,
    EpisodeFinished,
    InfeasibleConfig,
    InvalidAnswer,
    NoSuchEpisode,
)
from .guiqa import derive_text_layer
from .protocol import (
    FinalResponse,
    ToolCallAction,
    Trajectory,
    parse_turn,
    validate_trajectory,
)
from .raster import BBox, ImageBuffer, to_png
from .randomization import IdentifierMapping, randomize_identifiers
from .rewards import RewardBreakdown, RewardWeights, trajectory_reward
from .toolkit import ToolContext, ToolRegistry, canonical_registry, dispatch

TASKS = ("vsp_nav", "vsp_verify", "jigsaw", "guiqa_fixture")


@dataclass(frozen=True)
class EpisodeConfig:
    task: str = "vsp_nav"
    seed: int = 0
    size: int = 4
    hole_count: Optional[int] = None     # defaults to size
    cell_px: int = 100
    source_px: int = 300                 # jigsaw source side length
    gui_elements: int = 6
    reward: RewardWeights = field(default_factory=RewardWeights)
    randomize_seed: Optional[int] = None
    max_turns: int = 10
    verify_require_goal: bool = True
    inline_images: bool = False   # embed base64 PNGs in create/step payloads

    def resolved_hole_count(self) -> int:
        return self.size if self.hole_count is None else self.hole_count

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seed": self.seed,
            "size": self.size,
            "hole_count": self.resolved_hole_count(),
            "cell_px": self.cell_px,
            "source_px": self.source_px,
            "gui_elements": self.gui_elements,
            "reward": {
                "lambda_tool": self.reward.lambda_tool,
                "lambda_acc": self.reward.lambda_acc,
                "acc_scale": self.reward.acc_scale,
                "adaptive": self.reward.adaptive,
            },
            "randomize_seed": self.randomize_seed,
            "max_turns": self.max_turns,
            "verify_require_goal": self.verify_require_goal,
            "inline_images": self.inline_images,
        }


@dataclass
class EpisodeState:
    id: str
    config: EpisodeConfig
    instance: object
    ground_truth: dict
    registry: ToolRegistry
    mapping: Optional[IdentifierMapping]
    ctx: ToolContext
    trajectory: Trajectory
    image_ids: list[str]
    system_prompt: str
    user_prompt: str
    turn_count: int = 0
    status: str = "active"
    breakdown: Optional[RewardBreakdown] = None
    answer_correct: Optional[bool] = None
    hidden_image_ids: list[str] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class StepOutcome:
    status: str                     # tool_observation | terminal | protocol_error
    observation: str = ""
    new_image_id: Optional[str] = None
    breakdown: Optional[RewardBreakdown] = None
    answer_correct: Optional[bool] = None
    turn_index: int = 0
    format_ok: bool = True
    tool_ok: Optional[bool] = None
    new_image_base64: Optional[str] = None  # only when cfg.inline_images


def render_tool_list(schemas) -> str:
    blocks = []
    for schema in schemas:
        blocks.append(json.dumps(schema.to_dict(), ensure_ascii=False, indent=2))
    return "\n".join(blocks)


def build_system_prompt(schemas) -> str:
    return f"""You are a visual assistant that solves visual reasoning problems. You may \
answer from your own understanding or call external tools when they help.

Available tools:
{render_tool_list(schemas)}

Every turn must follow this format:
1. Begin with your reasoning wrapped in <think> and </think> tags.
2. Then emit exactly one of the following, never both in the same turn:
   - a tool call wrapped in <tool_call> and </tool_call> tags, containing a \
JSON object {{"name": "...", "parameters": {{...}}}} (use an empty object when \
a tool takes no parameters), or
   - your final answer wrapped in <response> and </response> tags, with the \
answer itself inside \\boxed{{}}.

Rules:
- At most one tool call per turn.
- Refer to images with the placeholders img_1, img_2, ...: img_1 is the \
original image, and every image a tool produces is appended to the dialogue \
in order.
- All image coordinates are absolute pixels with the origin at the top-left.
- Emitting a response ends the episode."""


def _vsp_user_prompt(cfg: EpisodeConfig, instance: vsp.VspInstance) -> str:
    grid = instance.map
    base = (
        f"img_1 shows a {grid.size}x{grid.size} frozen-lake grid; each cell is "
        f"{grid.cell_px}x{grid.cell_px} pixels. The green cell marked S is the "
        "start, the yellow cell marked G is the goal, and blue cells are holes."
    )
    if instance.kind == "navigation":
        return (
            f"{base} Produce a sequence of moves (U, D, L, R) that walks from S "
            "to G without leaving the grid or entering a hole. Answer with the "
            "move letters separated by commas inside \\boxed{}."
        )
    moves = ", ".join(instance.candidate.moves)
    goal_clause = (
        " and end on G" if instance.require_goal else ""
    )
    return (
        f"{base} A candidate path starting at S is proposed: [{moves}]. Decide "
        f"whether this path is safe: it must stay on the grid, avoid every "
        f"hole{goal_clause}. Answer \\boxed{{Yes}} or \\boxed{{No}}."
    )


def _make_instance(cfg: EpisodeConfig):
    """Instance, ground truth, initial images, text layers, user prompt."""
    if cfg.task == "vsp_nav" or cfg.task == "vsp_verify":
        kind = "navigation" if cfg.task == "vsp_nav" else "verification"
        instance = vsp.make_instance(
            kind,
            cfg.size,
            cfg.resolved_hole_count(),
            cfg.seed,
            cell_px=cfg.cell_px,
            require_goal=cfg.verify_require_goal,
        )
        return (
            instance,
            instance.to_record(),
            [instance.rendered],
            {},
            _vsp_user_prompt(cfg, instance),
        )
    if cfg.task == "jigsaw":
        instance = jigsaw.make_instance(cfg.seed, source_px=cfg.source_px)
        prompt = (
            "img_1 is a 2x2 patch grid with one patch blacked out. Two candidate "
            "patches are attached: img_2 is candidate A and img_3 is candidate "
            "B. Exactly one of them is the missing patch. Answer \\boxed{A} or "
            "\\boxed{B}."
        )
        images = [instance.base, instance.candidates["A"], instance.candidates["B"]]
        return instance, instance.to_record(), images, {}, prompt
    if cfg.task == "guiqa_fixture":
        instance = guiqa.make_instance(cfg.seed, n_elements=cfg.gui_elements)
        prompt = (
            f"img_1 is a screenshot of an interface. {instance.question} "
            "Answer with the caption text inside \\boxed{}."
        )
        return (
            instance,
            instance.to_record(),
            [instance.image],
            {1: list(instance.text_layer)},
            prompt,
        )
    raise InfeasibleConfig(f"unknown task {cfg.task!r}; expected one of {TASKS}")


def config_from_dict(data: dict) -> EpisodeConfig:
    """Inverse of EpisodeConfig.to_dict (reward dict accepted)."""
    payload = dict(data)
    reward = payload.pop("reward", None)
    if isinstance(reward, dict):
        payload["reward"] = RewardWeights(**reward)
    payload.pop("n", None)
    return EpisodeConfig(**payload)


def offline_breakdown(snapshot: dict) -> RewardBreakdown:
    """Recompute a terminal episode's breakdown from its transcript alone.

    Rebuilds the instance from the recorded config (generation is
    deterministic), re-parses every stored turn, re-validates against the
    same (possibly randomized) registry, and re-runs the reward engine.
    Must agree bit for bit with the server-issued breakdown.
    """
    cfg = config_from_dict(snapshot["config"])
    if cfg.randomize_seed is None:
        registry = canonical_registry()
    else:
        registry = randomize_identifiers(
            canonical_registry(), cfg.randomize_seed
        ).registry
    instance, _, _, _, _ = _make_instance(cfg)
    from .protocol import Turn  # local import keeps module top uncluttered

    traj = Trajectory(turns=[Turn(raw_text=t["text"]) for t in snapshot["turns"]])
    report = validate_trajectory(traj, registry)
    answer_correct = False
    if traj.turns:
        last = parse_turn(traj.turns[-1].raw_text)
        if last.format_ok and isinstance(last.action, FinalResponse):
            answer_correct = check_answer(
                instance, cfg.task, last.action.boxed_answer
            )
    return trajectory_reward(traj, report, answer_correct, cfg.reward)


def check_answer(instance, task: str, boxed: Optional[str]) -> bool:
    """Task-specific terminal answer check; unparsable answers are wrong."""
    if boxed is None:
        return False
    try:
        if task == "vsp_nav":
            return vsp.check_navigation(instance.map, boxed)
        if task == "vsp_verify":
            return vsp.check_verification(instance, boxed)
        if task == "jigsaw":
            return jigsaw.check_jigsaw(instance, boxed)
        if task == "guiqa_fixture":
            return guiqa.check_guiqa(instance, boxed)
    except InvalidAnswer:
        return False
    raise InfeasibleConfig(f"unknown task {task!r}")


class EpisodeService:
    """In-memory episode registry with per-episode step serialization.

    State lives for the process lifetime only; ``log_dir`` optionally
    appends every terminal episode's snapshot to ``episodes.jsonl``.
    """

    def __init__(self, log_dir=None):
        from pathlib import Path

        self._log_dir = Path(log_dir) if log_dir else None
        if self._log_dir is not None:
            self._log_dir.mkdir(parents=True, exist_ok=True)
        self._episodes: dict[str, EpisodeState] = {}
        self._images: dict[str, bytes] = {}
        self._alloc = threading.Lock()
        self._next_id = 0
        self._registry_cache: dict[Optional[int], tuple] = {}
        self.counters = {
            "episodes_created": 0,
            "episodes_terminal": 0,
            "episodes_deleted": 0,
            "steps_total": 0,
            "protocol_errors": 0,
            "tool_calls": 0,
            "tool_errors": 0,
        }
        self.per_tool_calls: dict[str, int] = {}

    # -- registries ----------------------------------------------------------

    def registry_for(self, seed: Optional[int]) -> tuple[ToolRegistry, Optional[IdentifierMapping]]:
        with self._alloc:
            if seed not in self._registry_cache:
                if seed is None:
                    self._registry_cache[seed] = (canonical_registry(), None)
                else:
                    rset = randomize_identifiers(canonical_registry(), seed)
                    self._registry_cache[seed] = (rset.registry, rset.mapping)
            return self._registry_cache[seed]

    def list_tools(self, seed: Optional[int] = None) -> list[dict]:
        registry, _ = self.registry_for(seed)
        return [s.to_dict() for s in registry.schemas()]

    # -- episode lifecycle -----------------------------------------------------

    def _register_image(self, episode_id: str, img: ImageBuffer) -> str:
        with self._alloc:
            image_id = f"{episode_id}-i{self._next_id}"
            self._next_id += 1
        self._images[image_id] = to_png(img)
        return image_id

    def create_episode(self, cfg: EpisodeConfig) -> EpisodeState:
        instance, ground_truth, images, layers, user_prompt = _make_instance(cfg)
        registry, mapping = self.registry_for(cfg.randomize_seed)
        with self._alloc:
            episode_id = f"ep{self._next_id:06d}"
            self._next_id += 1
        grid_size = ground_truth.get("size")
        ctx = ToolContext(
            images=list(images),
            ground_truth=ground_truth,
            cell_px=cfg.cell_px,
            grid_size=grid_size,
            text_layers=dict(layers),
        )
        state = EpisodeState(
            id=episode_id,
            config=cfg,
            instance=instance,
            ground_truth=ground_truth,
            registry=registry,
            mapping=mapping,
            ctx=ctx,
            trajectory=Trajectory(images=ctx.images),
            image_ids=[self._register_image(episode_id, img) for img in images],
            system_prompt=build_system_prompt(registry.schemas()),
            user_prompt=user_prompt,
        )
        if cfg.task == "jigsaw":
            # ground-truth-only image (not part of the dialogue): lets test
            # policies run the pixel-difference check the task is built on
            original_id = self._register_image(episode_id, instance.original)
            state.ground_truth["original_image_id"] = original_id
            state.hidden_image_ids.append(original_id)
        self._episodes[episode_id] = state
        with self._alloc:
            self.counters["episodes_created"] += 1
        return state

    def create_group(self, cfg: EpisodeConfig, n: int) -> list[EpisodeState]:
        """Convenience: n independent episodes over the same instance."""
        if n < 1:
            raise InfeasibleConfig(f"group size must be >= 1, got {n}")
        return [self.create_episode(cfg) for _ in range(n)]

    def get(self, episode_id: str) -> EpisodeState:
        state = self._episodes.get(episode_id)
        if state is None:
            raise NoSuchEpisode(f"no episode {episode_id!r}")
        return state

    def get_image(self, image_id: str) -> bytes:
        data = self._images.get(image_id)
        if data is None:
            raise NoSuchEpisode(f"no image {image_id!r}")
        return data

    def images_base64(self, state: EpisodeState) -> list[str]:
        return [
            base64.b64encode(self._images[image_id]).decode("ascii")
            for image_id in state.image_ids
        ]

    def delete_episode(self, episode_id: str) -> None:
        state = self.get(episode_id)
        for image_id in (*state.image_ids, *state.hidden_image_ids):
            self._images.pop(image_id, None)
        self._episodes.pop(episode_id, None)
        with self._alloc:
            self.counters["episodes_deleted"] += 1

    # -- stepping ---------------------------------------------------------------

    def step(self, episode_id: str, text: str) -> StepOutcome:
        state = self.get(episode_id)
        if not state.lock.acquire(blocking=False):
            raise Busy(f"a step on {episode_id} is already in flight")
        try:
            return self._step_locked(state, text)
        finally:
            state.lock.release()

    def _step_locked(self, state: EpisodeState, text: str) -> StepOutcome:
        if state.status == "terminal":
            raise EpisodeFinished(f"episode {state.id} is terminal")
        with self._alloc:
            self.counters["steps_total"] += 1
        turn = parse_turn(text)
        state.trajectory.turns.append(turn)
        state.turn_count += 1
        turn_index = state.turn_count - 1

        if turn.format_ok and isinstance(turn.action, ToolCallAction):
            outcome = self._run_tool(state, turn, turn_index)
        elif turn.format_ok and isinstance(turn.action, FinalResponse):
            outcome = self._finish(
                state,
                answer_correct=check_answer(
                    state.instance, state.config.task, turn.action.boxed_answer
                ),
                turn_index=turn_index,
            )
        else:
            with self._alloc:
                self.counters["protocol_errors"] += 1
            obs = (
                f"protocol error: {turn.format_reason}. Follow the required "
                "turn format."
            )
            outcome = StepOutcome(
                status="protocol_error",
                observation=obs,
                turn_index=turn_index,
                format_ok=False,
            )

        if state.status == "active" and state.turn_count >= state.config.max_turns:
            final = self._finish(state, answer_correct=False, turn_index=turn_index)
            final.status = "terminal"
            final.observation = outcome.observation or "turn budget exhausted"
            final.format_ok = outcome.format_ok
            final.tool_ok = outcome.tool_ok
            final.new_image_id = outcome.new_image_id
            return final
        return outcome

    def _run_tool(self, state: EpisodeState, turn, turn_index: int) -> StepOutcome:
        call = turn.action.call
        result = dispatch(call, state.registry, state.ctx)
        turn.observation = result
        canonical_name = call.name
        if state.mapping is not None and isinstance(call.name, str):
            canonical_name = state.mapping.inverse.get(call.name, call.name)
        with self._alloc:
            self.counters["tool_calls"] += 1
            if not result.ok:
                self.counters["tool_errors"] += 1
            key = canonical_name if isinstance(canonical_name, str) else "<invalid>"
            self.per_tool_calls[key] = self.per_tool_calls.get(key, 0) + 1

        new_image_id = None
        obs_text = result.text
        if result.ok and result.image is not None:
            state.ctx.images.append(result.image)
            idx = len(state.ctx.images)
            crop_info = result.extra.get("crop")
            if crop_info is not None:
                src_layer = state.ctx.text_layers.get(crop_info["source_index"])
                if src_layer is not None:
                    state.ctx.text_layers[idx] = derive_text_layer(
                        src_layer, BBox(*crop_info["box"]), crop_info["upscale"]
                    )
            new_image_id = self._register_image(state.id, result.image)
            state.image_ids.append(new_image_id)
            obs_text = f"{obs_text}\n[attached as img_{idx}]"
        outcome = StepOutcome(
            status="tool_observation",
            observation=obs_text,
            new_image_id=new_image_id,
            turn_index=turn_index,
            tool_ok=result.ok,
        )
        if new_image_id is not None and state.config.inline_images:
            outcome.new_image_base64 = base64.b64encode(
                self._images[new_image_id]
            ).decode("ascii")
        return outcome

    def _finish(
        self, state: EpisodeState, answer_correct: bool, turn_index: int
    ) -> StepOutcome:
        report = validate_trajectory(state.trajectory, state.registry)
        breakdown = trajectory_reward(
            state.trajectory, report, answer_correct, state.config.reward
        )
        state.status = "terminal"
        state.breakdown = breakdown
        state.answer_correct = answer_correct
        with self._alloc:
            self.counters["episodes_terminal"] += 1
            if self._log_dir is not None:
                with open(self._log_dir / "episodes.jsonl", "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(self.snapshot(state.id)) + "\n")
        return StepOutcome(
            status="terminal",
            observation="episode complete",
            breakdown=breakdown,
            answer_correct=answer_correct,
            turn_index=turn_index,
        )

    # -- introspection -----------------------------------------------------------

    def snapshot(self, episode_id: str) -> dict:
        state = self.get(episode_id)
        return {
            "id": state.id,
            "status": state.status,
            "task": state.config.task,
            "config": state.config.to_dict(),
            "ground_truth": state.ground_truth,
            "system_prompt": state.system_prompt,
            "user_prompt": state.user_prompt,
            "image_ids": list(state.image_ids),
            "turn_count": state.turn_count,
            "turns": [
                {
                    "text": t.raw_text,
                    "format_ok": t.format_ok,
                    "observation": t.observation.text if t.observation else None,
                    "tool_ok": t.observation.ok if t.observation else None,
                }
                for t in state.trajectory.turns
            ],
            "breakdown": state.breakdown.to_dict() if state.breakdown else None,
            "answer_correct": state.answer_correct,
        }

    def metrics(self) -> dict:
        with self._alloc:
            data = dict(self.counters)
            data["episodes_active"] = sum(
                1 for s in self._episodes.values() if s.status == "active"
            )
            data["per_tool_calls"] = dict(sorted(self.per_tool_calls.items()))
        return data
