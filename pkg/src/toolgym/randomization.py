"""Schema randomization: the surface of a tool set without its semantics.

Tool and parameter names are replaced by random 8-character identifiers
through a seed-deterministic bijection, and descriptions can be paraphrased
by a pluggable engine (a deterministic offline fallback ships in-package).
Parameter structure (arity, kinds) is never altered, so a randomized
registry dispatches exactly like the canonical one once calls are rewritten
through the mapping.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import string
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import UnmappedIdentifier
from .protocol import CALL_CLOSE, CALL_OPEN
from .toolkit import ParamSpec, ToolCallRequest, ToolRegistry, ToolSchema

IDENTIFIER_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]{7}$")

_FIRST = string.ascii_letters
_REST = string.ascii_letters + string.digits + "_"


@dataclass(frozen=True)
class IdentifierMapping:
    forward: dict
    inverse: dict
    seed: int

    @classmethod
    def build(cls, names: list[str], seed: int) -> "IdentifierMapping":
        rng = random.Random(seed)
        taken = set(names)
        forward: dict[str, str] = {}
        for name in sorted(set(names)):
            while True:
                candidate = rng.choice(_FIRST) + "".join(
                    rng.choice(_REST) for _ in range(7)
                )
                if candidate not in taken:
                    taken.add(candidate)
                    forward[name] = candidate
                    break
        inverse = {v: k for k, v in forward.items()}
        return cls(forward=forward, inverse=inverse, seed=seed)

    def map_name(self, name: str, direction: str = "forward") -> str:
        table = self.forward if direction == "forward" else self.inverse
        if name not in table:
            raise UnmappedIdentifier(f"{name!r} not in {direction} mapping")
        return table[name]

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "forward": self.forward}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "IdentifierMapping":
        data = json.loads(text)
        forward = dict(data["forward"])
        return cls(
            forward=forward,
            inverse={v: k for k, v in forward.items()},
            seed=data["seed"],
        )


@dataclass
class RandomizedSchemaSet:
    schemas: list[ToolSchema]
    mapping: Optional[IdentifierMapping] = None
    # per original tool name: {"text", "source_hash", "status"}
    descriptions: dict = field(default_factory=dict)
    registry: Optional[ToolRegistry] = None


def randomize_identifiers(registry: ToolRegistry, seed: int) -> RandomizedSchemaSet:
    """Replace every tool and parameter name; descriptions untouched.

    The returned set carries a ready-to-dispatch registry: the original
    handlers re-registered under their randomized names.
    """
    names: list[str] = []
    for schema in registry.schemas():
        names.append(schema.name)
        names.extend(schema.param_names())
    mapping = IdentifierMapping.build(names, seed)

    new_registry = ToolRegistry()
    new_schemas = []
    for schema in registry.schemas():
        new_schema = ToolSchema(
            name=mapping.forward[schema.name],
            description=schema.description,
            params=tuple(
                ParamSpec(
                    name=mapping.forward[p.name],
                    description=p.description,
                    kind=p.kind,
                )
                for p in schema.params
            ),
            returns=schema.returns,
        )
        new_schemas.append(new_schema)
        new_registry.register(
            new_schema,
            registry.handler(schema.name),
            param_keymap={mapping.forward[p.name]: p.name for p in schema.params},
        )
    return RandomizedSchemaSet(
        schemas=new_schemas, mapping=mapping, registry=new_registry
    )


def _map_call_dict(obj: dict, mapping: IdentifierMapping, direction: str) -> dict:
    out = dict(obj)
    if "name" in out and isinstance(out["name"], str):
        out["name"] = mapping.map_name(out["name"], direction)
    params = out.get("parameters")
    if isinstance(params, dict):
        out["parameters"] = {
            mapping.map_name(k, direction) if isinstance(k, str) else k: v
            for k, v in params.items()
        }
    return out


def _map_text(text: str, mapping: IdentifierMapping, direction: str) -> str:
    """Rewrite identifiers inside every tool_call block of a dialogue text.

    Tool-call JSON is re-serialized in the canonical single-line form; all
    text outside the blocks is untouched.
    """
    out, pos = [], 0
    while True:
        start = text.find(CALL_OPEN, pos)
        if start < 0:
            out.append(text[pos:])
            break
        end = text.find(CALL_CLOSE, start)
        if end < 0:
            out.append(text[pos:])
            break
        inner = text[start + len(CALL_OPEN) : end]
        out.append(text[pos:start])
        try:
            obj = json.loads(inner)
        except (json.JSONDecodeError, ValueError):
            obj = None
        if isinstance(obj, dict):
            mapped = _map_call_dict(obj, mapping, direction)
            out.append(f"{CALL_OPEN}\n{json.dumps(mapped, ensure_ascii=False)}\n{CALL_CLOSE}")
        else:
            out.append(text[start : end + len(CALL_CLOSE)])
        pos = end + len(CALL_CLOSE)
    return "".join(out)


def apply_mapping(obj, mapping: IdentifierMapping, direction: str = "forward"):
    """Rewrite tool/parameter identifiers in a call or dialogue text.

    Accepts a ToolCallRequest, a raw call dict, or text containing
    tool_call blocks. Identifier rewriting is the only change; forward then
    inverse is the identity. Raises UnmappedIdentifier for names absent
    from the mapping.
    """
    if direction not in ("forward", "inverse"):
        raise UnmappedIdentifier(f"unknown direction: {direction}")
    if isinstance(obj, ToolCallRequest):
        mapped = _map_call_dict(
            {"name": obj.name, "parameters": obj.parameters}, mapping, direction
        )
        return ToolCallRequest(
            name=mapped["name"], parameters=mapped["parameters"], images=obj.images
        )
    if isinstance(obj, dict):
        return _map_call_dict(obj, mapping, direction)
    if isinstance(obj, str):
        return _map_text(obj, mapping, direction)
    raise UnmappedIdentifier(f"cannot rewrite object of type {type(obj).__name__}")


# Deterministic offline paraphrase fallback: fixed phrase swaps applied in
# order, then a template reorder for sentences ending in "for closer
# inspection"-style suffixes. Crude, but stable across runs.
_PHRASE_TABLE = (
    ("Locate", "Find"),
    ("Compute", "Work out"),
    ("Paste", "Place"),
    ("Read the text visible in", "Transcribe the text shown in"),
    ("Cut out", "Extract"),
    ("Overlay", "Superimpose"),
    ("Find regions", "Detect regions"),
    ("an image", "a picture"),
    ("the image", "the picture"),
    ("one image", "one picture"),
    ("bounding box", "rectangle"),
    ("bounding-box", "rectangle"),
    ("return", "hand back"),
    ("Image to", "Picture to"),
)


def fallback_paraphrase(text: str) -> str:
    out = text
    for old, new in _PHRASE_TABLE:
        out = out.replace(old, new)
    if out == text and text:
        out = "In other words: " + text[0].lower() + text[1:]
    return out


def paraphrase_descriptions(
    schemas: list[ToolSchema],
    engine: Optional[Callable[[str], str]] = None,
) -> RandomizedSchemaSet:
    """Replace every tool and parameter description via ``engine``.

    Engine failures keep the original text and flag the entry; empty
    descriptions are retained and flagged. Identifiers and parameter kinds
    are never altered.
    """
    engine = engine or fallback_paraphrase
    new_schemas = []
    notes: dict[str, dict] = {}

    def rewrite(text: str, key: str) -> str:
        source_hash = hashlib.sha256(text.encode()).hexdigest()[:12]
        if not text:
            notes[key] = {"text": text, "source_hash": source_hash, "status": "empty"}
            return text
        try:
            new_text = engine(text)
        except Exception as e:
            notes[key] = {
                "text": text,
                "source_hash": source_hash,
                "status": f"ParaphraseUnavailable: {e}",
            }
            return text
        notes[key] = {"text": new_text, "source_hash": source_hash, "status": "ok"}
        return new_text

    for schema in schemas:
        new_schemas.append(
            ToolSchema(
                name=schema.name,
                description=rewrite(schema.description, schema.name),
                params=tuple(
                    ParamSpec(
                        name=p.name,
                        description=rewrite(p.description, f"{schema.name}.{p.name}"),
                        kind=p.kind,
                    )
                    for p in schema.params
                ),
                returns=schema.returns,
            )
        )
    return RandomizedSchemaSet(schemas=new_schemas, descriptions=notes)
