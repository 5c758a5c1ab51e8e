"""Scripted policies rolled out against the gym, plus usage metrics.

Policies come in four kinds:
  - oracle: follows the per-task blueprint with real tool outputs and always
    answers correctly (any failure indicates a bug in the environment, the
    tools, or the protocol, not the policy);
  - noisy(p): the oracle with seeded corruption (wasted junk tool calls,
    possibly a flipped final answer), built on common random numbers so
    accuracy is non-increasing in p on a fixed seed;
  - no_tool: answers directly from ground truth without any tool call;
  - replay: re-steps recorded dialogues (e.g. a curated dataset) verbatim.

The same policy code runs in-process or over HTTP; the two transports
expose an identical dict-level interface.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import httpx

from .curation import load_dataset
from .episodes import EpisodeService, config_from_dict
from .errors import ToolGymError, Unavailable
from .protocol import CALL_OPEN, response_text, tool_call_text
from .randomization import apply_mapping, randomize_identifiers
from .raster import from_png, pixel_diff
from .toolkit import canonical_registry


@dataclass(frozen=True)
class PolicySpec:
    kind: str                      # oracle | noisy | no_tool | replay
    p_error: float = 0.0
    replay_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("oracle", "noisy", "no_tool", "replay"):
            raise ToolGymError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.p_error <= 1.0:
            raise ToolGymError("p_error must lie in [0, 1]")


@dataclass
class EpisodeMetrics:
    task: str
    episode_index: int
    seed: int
    turns: int = 0
    tool_calls: int = 0
    tool_successes: int = 0
    accuracy: int = 0
    per_tool: dict = field(default_factory=dict)
    breakdown: Optional[dict] = None
    episode_id: str = ""

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "episode_index": self.episode_index,
            "seed": self.seed,
            "turns": self.turns,
            "tool_calls": self.tool_calls,
            "tool_successes": self.tool_successes,
            "accuracy": self.accuracy,
            "per_tool": dict(self.per_tool),
            "breakdown": self.breakdown,
            "episode_id": self.episode_id,
        }


@dataclass
class SuiteReport:
    per_task: dict
    episodes: list[EpisodeMetrics]

    def to_dict(self) -> dict:
        return {
            "per_task": self.per_task,
            "episodes": [m.to_dict() for m in self.episodes],
        }

    def tool_frequency_series(self) -> dict[str, list[int]]:
        """Per-tool call counts over episode index, for frequency curves."""
        tools = sorted({t for m in self.episodes for t in m.per_tool})
        return {
            tool: [m.per_tool.get(tool, 0) for m in self.episodes] for tool in tools
        }

    def frequency_csv(self) -> str:
        series = self.tool_frequency_series()
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["episode_index", "task", *series.keys()])
        for i, m in enumerate(self.episodes):
            writer.writerow([i, m.task, *(series[t][i] for t in series)])
        return buf.getvalue()


# --- transports -------------------------------------------------------------


class InProcessGym:
    """Direct EpisodeService calls with the HTTP-equivalent dict surface."""

    def __init__(self, service: Optional[EpisodeService] = None):
        self.service = service or EpisodeService()

    def create(self, cfg: dict) -> dict:
        state = self.service.create_episode(config_from_dict(cfg))
        return {
            "id": state.id,
            "system_prompt": state.system_prompt,
            "user_prompt": state.user_prompt,
            "image_ids": list(state.image_ids),
            "config": state.config.to_dict(),
            "ground_truth": state.ground_truth,
            "images_base64": (
                self.service.images_base64(state)
                if state.config.inline_images
                else None
            ),
        }

    def step(self, episode_id: str, text: str) -> dict:
        outcome = self.service.step(episode_id, text)
        return {
            "status": outcome.status,
            "observation": outcome.observation,
            "new_image_id": outcome.new_image_id,
            "breakdown": outcome.breakdown.to_dict() if outcome.breakdown else None,
            "answer_correct": outcome.answer_correct,
            "turn_index": outcome.turn_index,
            "format_ok": outcome.format_ok,
            "tool_ok": outcome.tool_ok,
            "new_image_base64": outcome.new_image_base64,
        }

    def snapshot(self, episode_id: str) -> dict:
        return self.service.snapshot(episode_id)

    def image(self, image_id: str) -> bytes:
        return self.service.get_image(image_id)

    def delete(self, episode_id: str) -> None:
        self.service.delete_episode(episode_id)


class HttpGym:
    """The same surface over the wire protocol.

    ``client`` may be any httpx-compatible client (e.g. a TestClient) for
    socketless testing.
    """

    def __init__(self, base_url: str = "", timeout: float = 30.0, client=None):
        self.base_url = base_url.rstrip("/")
        self.client = client or httpx.Client(base_url=self.base_url, timeout=timeout)

    def _check(self, resp: httpx.Response) -> dict:
        if resp.status_code >= 400:
            try:
                kind = resp.json().get("error_kind", "Unavailable")
            except Exception:
                kind = "Unavailable"
            err = ToolGymError(f"server error {resp.status_code}: {resp.text[:200]}")
            err.error_kind = kind
            raise err
        return resp.json()

    def _request(self, method: str, path: str, **kwargs):
        try:
            return self.client.request(method, path, **kwargs)
        except httpx.HTTPError as e:
            raise Unavailable(f"transport failure: {e}")

    def create(self, cfg: dict) -> dict:
        return self._check(self._request("POST", "/episodes", json=cfg))

    def step(self, episode_id: str, text: str) -> dict:
        return self._check(
            self._request("POST", f"/episodes/{episode_id}/step", json={"text": text})
        )

    def snapshot(self, episode_id: str) -> dict:
        return self._check(self._request("GET", f"/episodes/{episode_id}"))

    def image(self, image_id: str) -> bytes:
        resp = self._request("GET", f"/images/{image_id}")
        if resp.status_code >= 400:
            self._check(resp)
        return resp.content

    def delete(self, episode_id: str) -> None:
        self._check(self._request("DELETE", f"/episodes/{episode_id}"))




# --- rollout driver -----------------------------------------------------------


class EpisodeOver(Exception):
    def __init__(self, outcome: dict):
        super().__init__(outcome["status"])
        self.outcome = outcome


class Rollout:
    """Tracks one episode's emissions and outcomes."""

    def __init__(self, gym, handle: dict, rewrite=None):
        self.gym = gym
        self.handle = handle
        self.episode_id = handle["id"]
        self.rewrite = rewrite
        self.image_count = len(handle["image_ids"])
        self.sent: list[str] = []
        self.outcomes: list[dict] = []
        self.final: Optional[dict] = None

    def emit(self, text: str) -> dict:
        wire_text = self.rewrite(text) if self.rewrite else text
        outcome = self.gym.step(self.episode_id, wire_text)
        self.sent.append(text)
        self.outcomes.append(outcome)
        if outcome.get("new_image_id"):
            self.image_count += 1
        if outcome["status"] == "terminal":
            self.final = outcome
            raise EpisodeOver(outcome)
        return outcome


def _obs_json(outcome: dict):
    return json.loads(outcome["observation"].split("\n")[0])


# --- oracle policies -------------------------------------------------------------


def _oracle_vsp_nav(rollout: Rollout) -> None:
    gt = rollout.handle["ground_truth"]
    px = gt["cell_px"]
    obs = rollout.emit(
        tool_call_text(
            "Locate the start cell first.",
            "Point",
            {"image": "img_1", "description": "the start point"},
        )
    )
    sx, sy = _obs_json(obs)[0]
    obs = rollout.emit(
        tool_call_text(
            "Now the goal cell.",
            "Point",
            {"image": "img_1", "description": "the goal point"},
        )
    )
    gx, gy = _obs_json(obs)[0]
    obs = rollout.emit(
        tool_call_text(
            "And every hole to avoid.",
            "Point",
            {"image": "img_1", "description": "the ice holes"},
        )
    )
    holes_px = _obs_json(obs)
    to_cell = lambda x, y: [y // px, x // px]  # noqa: E731
    obs = rollout.emit(
        tool_call_text(
            "Delegate the route computation to the planner.",
            "AStar",
            {
                "start": to_cell(sx, sy),
                "goal": to_cell(gx, gy),
                "obstacles": [to_cell(x, y) for x, y in holes_px],
            },
        )
    )
    moves = _obs_json(obs)
    rollout.emit(
        tool_call_text(
            "Draw the planned route to confirm it visually.",
            "Draw2DPath",
            {"image": "img_1", "start": [sx, sy], "directions": moves},
        )
    )
    rollout.emit(
        response_text(
            "The drawn route is hole-free and ends on the goal.",
            f"\\boxed{{{', '.join(moves)}}}",
        )
    )


def _oracle_vsp_verify(rollout: Rollout) -> None:
    gt = rollout.handle["ground_truth"]
    obs = rollout.emit(
        tool_call_text(
            "Anchor the candidate at the true start.",
            "Point",
            {"image": "img_1", "description": "the start point"},
        )
    )
    sx, sy = _obs_json(obs)[0]
    rollout.emit(
        tool_call_text(
            "Overlay the proposed moves on the map.",
            "Draw2DPath",
            {
                "image": "img_1",
                "start": [sx, sy],
                "directions": list(gt["candidate"]["moves"]),
            },
        )
    )
    word = "Yes" if gt["label"] == "safe" else "No"
    rollout.emit(
        response_text(
            "The overlay settles the judgement.", f"\\boxed{{{word}}}"
        )
    )


def _oracle_jigsaw(rollout: Rollout) -> None:
    gt = rollout.handle["ground_truth"]
    obs = rollout.emit(
        tool_call_text(
            "Find the blacked-out slot.",
            "DetectBlackArea",
            {"image": "img_1"},
        )
    )
    slot = _obs_json(obs)[0]
    composed_ids = {}
    for label, ref in (("A", "img_2"), ("B", "img_3")):
        obs = rollout.emit(
            tool_call_text(
                f"Insert candidate {label} into the slot.",
                "InsertImage",
                {"base": "img_1", "insert": ref, "box": slot},
            )
        )
        composed_ids[label] = obs["new_image_id"]
    original = from_png(rollout.gym.image(gt["original_image_id"]))
    diffs = {
        label: pixel_diff(from_png(rollout.gym.image(img_id)), original)
        for label, img_id in composed_ids.items()
    }
    winner = min(diffs, key=lambda k: (diffs[k], k))
    rollout.emit(
        response_text(
            "The zero-difference composition identifies the true patch.",
            f"\\boxed{{{winner}}}",
        )
    )


def _oracle_guiqa(rollout: Rollout) -> None:
    gt = rollout.handle["ground_truth"]
    rollout.emit(
        tool_call_text(
            "Zoom into the region the question names.",
            "Crop",
            {"image": "img_1", "box": list(gt["target_box"])},
        )
    )
    obs = rollout.emit(
        tool_call_text(
            "Read the cropped element.",
            "OCR",
            {"image": f"img_{rollout.image_count}"},
        )
    )
    text = _obs_json(obs)[0]["text"]
    rollout.emit(
        response_text("The readout gives the caption.", f"\\boxed{{{text}}}")
    )


_ORACLES = {
    "vsp_nav": _oracle_vsp_nav,
    "vsp_verify": _oracle_vsp_verify,
    "jigsaw": _oracle_jigsaw,
    "guiqa_fixture": _oracle_guiqa,
}


def _ground_truth_response(task: str, gt: dict) -> str:
    if task == "vsp_nav":
        answer = ", ".join(gt["label"])
    elif task == "vsp_verify":
        answer = "Yes" if gt["label"] == "safe" else "No"
    else:
        answer = str(gt["label"])
    return response_text(
        "I can answer this directly from the image.", f"\\boxed{{{answer}}}"
    )


def _wrong_response(task: str, gt: dict) -> str:
    if task == "vsp_nav":
        answer = "X"
    elif task == "vsp_verify":
        answer = "No" if gt["label"] == "safe" else "Yes"
    elif task == "jigsaw":
        answer = "B" if gt["label"] == "A" else "A"
    else:
        answer = "wrong caption"
    return response_text("Answering from a quick glance.", f"\\boxed{{{answer}}}")


_JUNK_CALL = tool_call_text(
    "Maybe this helper exists.", "BrokenTool", {"input": "img_1"}
)


class _NoisyEmit:
    """Wraps Rollout.emit with seeded corruption, nested in p.

    One episode-level draw decides whether the final answer is flipped; one
    draw per emitted turn decides whether a junk tool call burns the turn
    first. Both streams are independent of p, so raising p only adds
    corruption events.
    """

    def __init__(self, raw_emit, task: str, gt: dict, p: float, seed: int):
        self.raw_emit = raw_emit
        self.task = task
        self.gt = gt
        self.p = p
        rng = random.Random(seed)
        self.answer_draw = rng.random()
        self.rng = rng

    def __call__(self, text: str) -> dict:
        is_response = CALL_OPEN not in text
        if is_response:
            if self.answer_draw < self.p:
                text = _wrong_response(self.task, self.gt)
            return self.raw_emit(text)
        if self.rng.random() < self.p:
            self.raw_emit(_JUNK_CALL)  # burns a turn; may end the episode
        return self.raw_emit(text)


def run_episode(
    gym, cfg: dict, spec: PolicySpec, episode_index: int = 0, delete_after: bool = True
) -> EpisodeMetrics:
    handle = gym.create(cfg)
    rewrite = None
    randomize_seed = handle["config"].get("randomize_seed")
    if randomize_seed is not None:
        mapping = randomize_identifiers(canonical_registry(), randomize_seed).mapping
        rewrite = lambda text: apply_mapping(text, mapping, "forward")  # noqa: E731
    rollout = Rollout(gym, handle, rewrite=rewrite)
    task = handle["config"]["task"]
    gt = handle["ground_truth"]
    try:
        if spec.kind == "oracle":
            _ORACLES[task](rollout)
        elif spec.kind == "no_tool":
            rollout.emit(_ground_truth_response(task, gt))
        elif spec.kind == "noisy":
            rollout.emit = _NoisyEmit(
                rollout.emit,
                task,
                gt,
                spec.p_error,
                seed=handle["config"]["seed"] * 7919 + 13,
            )
            _ORACLES[task](rollout)
        else:
            raise ToolGymError("replay runs through run_replay()")
    except EpisodeOver:
        pass
    return _collect_metrics(gym, rollout, handle, task, episode_index, delete_after)


def _collect_metrics(
    gym, rollout: Rollout, handle, task, episode_index, delete_after
) -> EpisodeMetrics:
    final = rollout.final
    if final is None:  # policy stopped early; settle via snapshot
        snap = gym.snapshot(rollout.episode_id)
        breakdown = snap.get("breakdown")
        accuracy = 1 if snap.get("answer_correct") else 0
    else:
        breakdown = final.get("breakdown")
        accuracy = 1 if final.get("answer_correct") else 0
    metrics = EpisodeMetrics(
        task=task,
        episode_index=episode_index,
        seed=handle["config"]["seed"],
        episode_id=rollout.episode_id,
        breakdown=breakdown,
        accuracy=accuracy,
    )
    metrics.turns = len(rollout.sent)
    for text, outcome in zip(rollout.sent, rollout.outcomes):
        if CALL_OPEN not in text:
            continue
        metrics.tool_calls += 1
        if outcome.get("tool_ok"):
            metrics.tool_successes += 1
        name = _call_name(text)
        metrics.per_tool[name] = metrics.per_tool.get(name, 0) + 1
    if delete_after:
        gym.delete(rollout.episode_id)
    return metrics


def _call_name(text: str) -> str:
    start = text.find(CALL_OPEN) + len(CALL_OPEN)
    end = text.find("</tool_call>")
    try:
        return str(json.loads(text[start:end]).get("name"))
    except (json.JSONDecodeError, ValueError):
        return "<unparsed>"


DEFAULT_TASK_CONFIGS = {
    "vsp_nav": {"task": "vsp_nav", "size": 4},
    "vsp_verify": {"task": "vsp_verify", "size": 4},
    "jigsaw": {"task": "jigsaw"},
    "guiqa_fixture": {"task": "guiqa_fixture"},
}


def run_suite(
    spec: PolicySpec,
    tasks: list[str],
    count: int,
    seed: int,
    gym=None,
    cfg_overrides: Optional[dict] = None,
    delete_episodes: bool = True,
) -> SuiteReport:
    """Roll ``count`` episodes per task; deterministic in (spec, seed)."""
    if count < 1:
        raise ToolGymError("count must be >= 1")
    gym = gym or InProcessGym()
    if spec.kind == "replay":
        return run_replay(gym, spec.replay_path, delete_episodes=delete_episodes)
    episodes: list[EpisodeMetrics] = []
    overrides = cfg_overrides or {}
    index = 0
    for task in tasks:
        base = dict(DEFAULT_TASK_CONFIGS[task])
        base.update(overrides.get(task, {}))
        for i in range(count):
            cfg = dict(base)
            cfg["seed"] = seed + i
            episodes.append(
                run_episode(gym, cfg, spec, episode_index=index, delete_after=delete_episodes)
            )
            index += 1
    return compute_metrics(episodes)


def run_replay(gym, dataset_path, delete_episodes: bool = True) -> SuiteReport:
    """Re-step recorded dialogues against fresh episodes of the same seeds."""
    path = Path(dataset_path)
    records = load_dataset(path if path.is_dir() else path.parent)
    episodes = []
    for index, record in enumerate(records):
        gen = dict(record["metadata"]["gen"])
        gen.pop("reward", None)
        handle = gym.create(gen)
        rollout = Rollout(gym, handle)
        try:
            for message in record["messages"]:
                if message["role"] == "assistant":
                    rollout.emit(message["content"])
        except EpisodeOver:
            pass
        episodes.append(
            _collect_metrics(
                gym, rollout, handle, gen["task"], index, delete_episodes
            )
        )
    return compute_metrics(episodes)


def compute_metrics(episodes: list[EpisodeMetrics]) -> SuiteReport:
    """Aggregate per task; order-invariant."""
    per_task: dict[str, dict] = {}
    for m in episodes:
        agg = per_task.setdefault(
            m.task,
            {"episodes": 0, "turns": 0, "calls": 0, "successes": 0, "correct": 0},
        )
        agg["episodes"] += 1
        agg["turns"] += m.turns
        agg["calls"] += m.tool_calls
        agg["successes"] += m.tool_successes
        agg["correct"] += m.accuracy
    out = {}
    for task, agg in sorted(per_task.items()):
        n = agg["episodes"]
        calls = agg["calls"]
        out[task] = {
            "episodes": n,
            "mean_turns": agg["turns"] / n,
            "cps": calls / n,
            # no calls means the success rate is undefined, not perfect
            "succ_pct": (100.0 * agg["successes"] / calls) if calls else None,
            "acc_pct": 100.0 * agg["correct"] / n,
        }
    return SuiteReport(per_task=out, episodes=list(episodes))
