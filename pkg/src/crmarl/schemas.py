"""JSON schemas of every file the command line reads or writes."""

from __future__ import annotations

from functools import lru_cache
from typing import Any

import jsonschema

from .actions import ActionKind, Direction
from .errors import SchemaMismatch

ENVPACK_SCHEMA = "crmarl.envpack/1"
CHECKPOINT_SCHEMA = "crmarl.checkpoint/1"
MANIFEST_SCHEMA = "crmarl.manifest/1"

_nullable_str = {"type": ["string", "null"]}
_nullable_int = {"type": ["integer", "null"], "minimum": 0}

ACTION = {
    "type": "object",
    "required": ["kind", "target", "payload", "direction"],
    "properties": {
        "kind": {"enum": [k.value for k in ActionKind]},
        "target": _nullable_int,
        "payload": _nullable_str,
        "direction": {"enum": [d.value for d in Direction] + [None]},
    },
    "additionalProperties": False,
}

CELL = {
    "type": "object",
    "required": ["action", "response"],
    "properties": {"action": ACTION, "response": {"type": "string"}},
}

ELEMENT_VIEW = {
    "type": "object",
    "required": ["index", "kind", "label", "state"],
    "properties": {"index": {"type": "integer", "minimum": 0}, "kind": {"type": "string"},
                   "label": {"type": "string"}, "state": {"type": "string"},
                   "options": {"type": "array", "items": {"type": "string"}}},
}

OBSERVATION = {
    "type": "object",
    "required": ["page_name", "elements"],
    "properties": {"page_name": {"type": "string"}, "elements": {"type": "array", "items": ELEMENT_VIEW}},
}

EDGE = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2}

PREFERENCE = {
    "type": "object",
    "required": ["schema", "context", "chosen", "rejected", "agent_index", "round", "step", "task_id",
                 "dag_edges", "score"],
    "properties": {
        "schema": {"const": "crmarl.preference/1"},
        "context": {
            "type": "object",
            "required": ["observation", "history", "messages", "query", "env_kind",
                         "observation_text", "history_text", "messages_text"],
            "properties": {"observation": OBSERVATION, "query": {"type": "string"},
                           "env_kind": {"enum": ["mobile", "web"]},
                           "observation_text": {"type": "string"}, "history_text": {"type": "string"},
                           "messages_text": {"type": "string"}},
        },
        "chosen": CELL,
        "rejected": CELL,
        "agent_index": {"type": "integer", "minimum": 0},
        "round": {"type": "integer", "minimum": 1},
        "step": {"type": "integer", "minimum": 0},
        "task_id": {"type": "string"},
        "dag_edges": {"type": "array", "items": EDGE},
        "score": {"type": "number", "minimum": 0, "maximum": 1},
        "source_outcome": {"enum": [0, 1, None]},
    },
}

CURRICULUM = {
    "type": "object",
    "required": ["schema", "tier", "subtype", "prompt", "target", "target_action", "preference",
                 "source", "backend"],
    "properties": {
        "schema": {"const": "crmarl.curriculum/1"},
        "tier": {"enum": ["basic", "instruction", "preference"]},
        "subtype": {"enum": ["ui_understanding", "element_recognition", None]},
        "prompt": {"type": "string"},
        "target": _nullable_str,
        "target_action": {"oneOf": [ACTION, {"type": "null"}]},
        "preference": {"oneOf": [PREFERENCE, {"type": "null"}]},
        "source": {"type": "object"},
        "backend": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"tier": {"const": "basic"}}},
         "then": {"properties": {"subtype": {"enum": ["ui_understanding", "element_recognition"]},
                                 "target": {"type": "string"}}}},
        {"if": {"properties": {"tier": {"const": "instruction"}}},
         "then": {"properties": {"target": {"type": "string"}, "target_action": ACTION}}},
        {"if": {"properties": {"tier": {"const": "preference"}}},
         "then": {"properties": {"preference": PREFERENCE}}},
    ],
}

GOAL_ATOM = {
    "type": "object",
    "required": ["kind", "page"],
    "properties": {"kind": {"enum": ["on_page", "value_equals", "checked", "selected", "answered"]},
                   "page": {"type": "integer", "minimum": 0}},
}

TASK = {
    "type": "object",
    "required": ["id", "query", "env_kind", "goal", "max_steps", "env_id"],
    "properties": {"id": {"type": "string"}, "query": {"type": "string"},
                   "env_kind": {"enum": ["mobile", "web"]},
                   "goal": {"type": "array", "items": GOAL_ATOM, "minItems": 1},
                   "max_steps": {"type": "integer", "minimum": 1}, "env_id": {"type": "string"}},
}

WORLD = {
    "type": "object",
    "required": ["id", "env_kind", "pages", "difficulty", "seed"],
    "properties": {
        "id": {"type": "string"}, "env_kind": {"enum": ["mobile", "web"]},
        "difficulty": {"enum": ["easy", "medium"]}, "seed": {"type": "integer"},
        "pages": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["id", "name", "elements"],
            "properties": {"id": {"type": "integer"}, "name": {"type": "string"},
                           "elements": {"type": "array"}}}},
    },
}

ENVPACK = {
    "type": "object",
    "required": ["schema", "env_kind", "difficulty", "seed", "suite"],
    "properties": {
        "schema": {"const": ENVPACK_SCHEMA},
        "env_kind": {"enum": ["mobile", "web"]},
        "difficulty": {"enum": ["easy", "medium"]},
        "seed": {"type": "integer"},
        "suite": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["world", "tasks"],
            "properties": {"world": WORLD, "tasks": {"type": "array", "items": TASK}}}},
    },
}

PARAMS = {
    "type": "object",
    "required": ["feature_schema", "feature_names", "shared", "temperature", "weights"],
    "properties": {"feature_schema": {"type": "string"},
                   "feature_names": {"type": "array", "items": {"type": "string"}},
                   "shared": {"type": "boolean"}, "temperature": {"type": "number", "exclusiveMinimum": 0},
                   "weights": {"type": "array"}},
}

CHECKPOINT = {
    "type": "object",
    "required": ["schema", "type", "feature_schema", "env_kind", "seed", "config", "params", "reference"],
    "properties": {"schema": {"const": CHECKPOINT_SCHEMA}, "type": {"const": "checkpoint"},
                   "feature_schema": {"type": "string"}, "env_kind": {"enum": ["mobile", "web"]},
                   "seed": {"type": "integer"}, "config": {"type": "object"},
                   "params": PARAMS, "reference": PARAMS},
}

TRAJECTORY_LINE = {
    "type": "object",
    "required": ["type"],
    "properties": {"type": {"enum": ["header", "episode_start", "step", "episode_end"]}},
    "allOf": [
        {"if": {"properties": {"type": {"const": "header"}}}, "then": {"required": ["config"]}},
        {"if": {"properties": {"type": {"const": "episode_start"}}},
         "then": {"required": ["episode", "task"], "properties": {"task": TASK}}},
        {"if": {"properties": {"type": {"const": "step"}}}, "then": {"required": ["episode", "record"]}},
        {"if": {"properties": {"type": {"const": "episode_end"}}},
         "then": {"required": ["episode", "outcome_reward", "termination_reason", "steps"],
                  "properties": {"outcome_reward": {"enum": [0, 1]},
                                 "termination_reason": {"enum": ["goal", "declared_done", "max_steps"]}}}},
    ],
}

MANIFEST = {
    "type": "object",
    "required": ["schema", "tool", "version", "command", "config_hash", "seeds", "outputs"],
    "properties": {"schema": {"const": MANIFEST_SCHEMA}, "tool": {"const": "crmarl"},
                   "version": {"type": "string"}, "command": {"type": "string"},
                   "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                   "seeds": {"type": "object"}, "outputs": {"type": "object"}},
}

SCHEMAS: dict[str, dict[str, Any]] = {
    "action": ACTION, "preference": PREFERENCE, "curriculum": CURRICULUM, "task": TASK,
    "envpack": ENVPACK, "checkpoint": CHECKPOINT, "trajectory_line": TRAJECTORY_LINE,
    "manifest": MANIFEST,
}


@lru_cache(maxsize=None)
def _validator(kind: str) -> jsonschema.protocols.Validator:
    schema = SCHEMAS[kind]
    cls = jsonschema.validators.validator_for(schema, default=jsonschema.Draft202012Validator)
    return cls(schema)


def check(kind: str, obj: Any) -> None:
    """Raise :class:`SchemaMismatch` with the first violation, if any."""
    if kind not in SCHEMAS:
        raise SchemaMismatch(f"unknown schema {kind!r}")
    err = jsonschema.exceptions.best_match(_validator(kind).iter_errors(obj))
    if err is not None:
        path = "/".join(str(p) for p in err.absolute_path)
        raise SchemaMismatch(f"{kind} at /{path}: {err.message}")


def validate_record(kind: str, obj: Any) -> bool:
    return _validator(kind).is_valid(obj)
