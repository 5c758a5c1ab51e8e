"""Turn grammar: parsing, validation, and canonical serialization.

The wire grammar is frozen:

    <think> ... </think>
    followed by exactly one of
    <tool_call> {"name": <string>, "parameters": {<string>: <value>, ...}} </tool_call>
    <response> ... \\boxed{answer} ... </response>

Whitespace around tags is tolerated; any other content outside the tags, a
missing block, both action tags in one turn, or invalid JSON inside the
tool_call tags makes the turn malformed. Parsing is total: malformed input
yields ``format_ok=False`` with a reason, never an exception.

Final answers are read from ``\\boxed{...}``; when a response contains
several, the last one wins, and nested boxes resolve to the innermost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import InvalidArgument
from .raster import ImageBuffer
from .toolkit import (
    ToolCallRequest,
    ToolRegistry,
    ToolResult,
    param_value_valid,
    resolve_image_ref as _resolve,
)

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
CALL_OPEN, CALL_CLOSE = "<tool_call>", "</tool_call>"
RESP_OPEN, RESP_CLOSE = "<response>", "</response>"


@dataclass
class ToolCallAction:
    call: ToolCallRequest


@dataclass
class FinalResponse:
    text: str
    boxed_answer: Optional[str] = None


ParsedAction = Union[ToolCallAction, FinalResponse]


@dataclass
class Turn:
    raw_text: str
    think: str = ""
    action: Optional[ParsedAction] = None
    observation: Optional[ToolResult] = None
    format_ok: bool = False
    format_reason: str = ""


@dataclass
class Trajectory:
    turns: list[Turn] = field(default_factory=list)
    images: list[ImageBuffer] = field(default_factory=list)
    terminal: bool = False


@dataclass
class CallDiagnostics:
    """Structural facts about one attempted tool call.

    Sufficient to compute the hierarchical 0-4 score without re-parsing:
    encapsulation, name validity, and the correct-name / valid-value counts
    against the schema's parameter total.
    """

    turn_index: int
    wrapped: bool
    name_known: bool = False
    param_name_hits: int = 0
    param_value_hits: int = 0
    param_total: int = 0


@dataclass
class ValidationReport:
    format_flags: list[bool]
    calls: list[CallDiagnostics]

    @property
    def all_formatted(self) -> bool:
        return all(self.format_flags)


def extract_boxed(text: str) -> Optional[str]:
    """Content of the last ``\\boxed{...}``, innermost if boxes nest."""
    marker = "\\boxed{"
    pos = text.rfind(marker)
    if pos < 0:
        return None
    depth = 1
    i = pos + len(marker)
    start = i
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                inner = text[start:i]
                nested = extract_boxed(inner)
                return nested if nested is not None else inner
        i += 1
    return None  # unbalanced braces: nothing extractable


def _failed(raw: str, reason: str, think: str = "") -> Turn:
    return Turn(raw_text=raw, think=think, format_ok=False, format_reason=reason)


def parse_turn(raw: str) -> Turn:
    """Parse one policy emission against the turn grammar. Total."""
    if not isinstance(raw, str):
        return _failed("", "turn is not text")
    body = raw.strip()
    if not body.startswith(THINK_OPEN):
        return _failed(raw, "turn must begin with a think block")
    close = body.find(THINK_CLOSE)
    if close < 0:
        return _failed(raw, "unterminated think block")
    think = body[len(THINK_OPEN) : close]
    rest = body[close + len(THINK_CLOSE) :].strip()

    has_call = CALL_OPEN in rest
    has_resp = RESP_OPEN in rest
    if has_call and has_resp:
        return _failed(raw, "tool_call and response are mutually exclusive", think)
    if not rest:
        return _failed(raw, "think block must be followed by an action", think)

    if rest.startswith(CALL_OPEN):
        end = rest.find(CALL_CLOSE)
        if end < 0:
            return _failed(raw, "unterminated tool_call block", think)
        inner = rest[len(CALL_OPEN) : end]
        trailing = rest[end + len(CALL_CLOSE) :]
        if trailing.strip():
            return _failed(raw, "content after the tool_call block", think)
        try:
            obj = json.loads(inner)
        except (json.JSONDecodeError, ValueError):
            return _failed(raw, "tool_call is not valid JSON", think)
        if not isinstance(obj, dict):
            return _failed(raw, "tool_call must be a JSON object", think)
        params = obj.get("parameters")
        call = ToolCallRequest(
            name=obj.get("name"),
            parameters=params if isinstance(params, dict) else {},
        )
        return Turn(
            raw_text=raw, think=think, action=ToolCallAction(call), format_ok=True
        )

    if rest.startswith(RESP_OPEN):
        end = rest.find(RESP_CLOSE)
        if end < 0:
            return _failed(raw, "unterminated response block", think)
        inner = rest[len(RESP_OPEN) : end]
        trailing = rest[end + len(RESP_CLOSE) :]
        if trailing.strip():
            return _failed(raw, "content after the response block", think)
        return Turn(
            raw_text=raw,
            think=think,
            action=FinalResponse(text=inner, boxed_answer=extract_boxed(inner)),
            format_ok=True,
        )

    return _failed(raw, "action must be a tool_call or a response", think)


def resolve_image_ref(ref: str, images: list[ImageBuffer]) -> ImageBuffer:
    """Resolve an ``img_n`` placeholder against the dialogue image list."""
    _, img = _resolve(ref, images)
    return img


def tool_call_text(think: str, name: str, parameters: dict) -> str:
    """Canonical serialization of a tool-calling turn."""
    payload = json.dumps({"name": name, "parameters": parameters}, ensure_ascii=False)
    return f"{THINK_OPEN}{think}{THINK_CLOSE}\n{CALL_OPEN}\n{payload}\n{CALL_CLOSE}"


def response_text(think: str, response: str) -> str:
    """Canonical serialization of a final-response turn."""
    return f"{THINK_OPEN}{think}{THINK_CLOSE}\n{RESP_OPEN}{response}{RESP_CLOSE}"


def _diagnose_call(
    index: int, call: ToolCallRequest, registry: ToolRegistry
) -> CallDiagnostics:
    name_known = isinstance(call.name, str) and call.name in registry
    if not name_known:
        return CallDiagnostics(turn_index=index, wrapped=True, name_known=False)
    schema = registry.schema(call.name)
    supplied = call.parameters if isinstance(call.parameters, dict) else {}
    total = len(schema.params)
    name_hits = sum(1 for p in schema.params if p.name in supplied)
    value_hits = sum(
        1
        for p in schema.params
        if p.name in supplied and param_value_valid(p.kind, supplied[p.name])
    )
    return CallDiagnostics(
        turn_index=index,
        wrapped=True,
        name_known=True,
        param_name_hits=name_hits,
        param_value_hits=value_hits,
        param_total=total,
    )


def validate_trajectory(
    traj: Trajectory, registry: ToolRegistry, content_mode: str = "schema"
) -> ValidationReport:
    """Per-turn format flags plus per-call structural diagnostics.

    Pure: each turn's raw text is re-parsed, so the report is independent of
    how the trajectory object was built. Every turn except a well-formed
    final response yields a diagnostics entry; malformed turns count as
    unwrapped calls (score 0 under the hierarchical scale).

    ``content_mode`` selects how parameter-content validity is judged:
    "schema" (default) checks values against the declared kinds before any
    execution; "execution" instead credits all values when the recorded
    observation executed cleanly and none when it errored (turns without a
    recorded observation keep the schema-level judgement).
    """
    if content_mode not in ("schema", "execution"):
        raise InvalidArgument(f"unknown content_mode {content_mode!r}")
    flags: list[bool] = []
    calls: list[CallDiagnostics] = []
    for i, turn in enumerate(traj.turns):
        parsed = parse_turn(turn.raw_text)
        flags.append(parsed.format_ok)
        if parsed.format_ok and isinstance(parsed.action, FinalResponse):
            continue
        if parsed.format_ok and isinstance(parsed.action, ToolCallAction):
            diag = _diagnose_call(i, parsed.action.call, registry)
            if (
                content_mode == "execution"
                and diag.name_known
                and diag.param_name_hits == diag.param_total
                and turn.observation is not None
            ):
                diag.param_value_hits = diag.param_total if turn.observation.ok else 0
            calls.append(diag)
        else:
            calls.append(CallDiagnostics(turn_index=i, wrapped=False))
    return ValidationReport(format_flags=flags, calls=calls)
