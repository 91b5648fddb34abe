"""Prompt templates with named ``{placeholder}`` fields.

Only the given names are substituted, so literal JSON braces in a template
survive rendering untouched. Rendering is pure.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from ..actions import VOCABULARY, Action, EnvKind, canonicalize_action, validate_action
from ..errors import ValidationError


@lru_cache(maxsize=None)
def _builtin(name: str) -> str:
    return resources.files("crmarl.agents").joinpath("templates", f"{name}.txt").read_text("utf-8")


def load_template(name: str, template_dir: str | Path | None = None) -> str:
    if template_dir is not None:
        path = Path(template_dir) / f"{name}.txt"
        if path.exists():
            return path.read_text("utf-8")
    return _builtin(name)


def render(template: str, **values: Any) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", str(value))
    return out


def vocabulary_text(env_kind: EnvKind) -> str:
    return ", ".join(sorted(k.value for k in VOCABULARY[EnvKind(env_kind)] if k.value != "UNKNOWN"))


_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)\n?```", re.S)


def fenced_json(text: str) -> Any:
    """Decode the single fenced JSON block in ``text``; raise if absent or ambiguous."""
    blocks = _FENCE.findall(text)
    if len(blocks) != 1:
        raise ValidationError("parse", f"expected one fenced JSON block, found {len(blocks)}")
    try:
        return json.loads(blocks[0])
    except json.JSONDecodeError as exc:
        raise ValidationError("parse", str(exc)) from exc


def parse_action_block(text: str, env_kind: EnvKind) -> Action:
    data = fenced_json(text)
    if not isinstance(data, dict) or not isinstance(data.get("action"), dict):
        raise ValidationError("parse", 'missing "action" object')
    action = canonicalize_action(Action.from_json(data["action"]))
    validate_action(action, env_kind)
    return action


def parse_score_grid(text: str, n: int, m: int) -> list[list[float]]:
    """Decode an n x m score grid, clamping each value into [0, 1]."""
    data = fenced_json(text)
    grid = data.get("scores") if isinstance(data, dict) else data
    if not isinstance(grid, list) or len(grid) != n:
        raise ValidationError("parse", f"expected {n} rows")
    out = []
    for row in grid:
        if not isinstance(row, list) or len(row) != m:
            raise ValidationError("parse", f"expected {m} columns")
        vals = []
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValidationError("parse", f"non-numeric score {v!r}")
            vals.append(min(1.0, max(0.0, float(v))))
        out.append(vals)
    return out
