"""Canonical UI actions for the mobile and web vocabularies."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

from .errors import ValidationError


class ActionKind(str, Enum):
    # mobile
    CLICK = "CLICK"
    DOUBLE_TAP = "DOUBLE_TAP"
    SCROLL = "SCROLL"
    SWIPE = "SWIPE"
    INPUT_TEXT = "INPUT_TEXT"
    NAVIGATE_HOME = "NAVIGATE_HOME"
    NAVIGATE_BACK = "NAVIGATE_BACK"
    KEYBOARD_ENTER = "KEYBOARD_ENTER"
    OPEN_APP = "OPEN_APP"
    STATUS = "STATUS"
    WAIT = "WAIT"
    LONG_PRESS = "LONG_PRESS"
    ANSWER = "ANSWER"
    UNKNOWN = "UNKNOWN"
    # web
    HOVER = "HOVER"
    SELECT = "SELECT"
    TYPE_STRING = "TYPE_STRING"
    SCROLL_PAGE = "SCROLL_PAGE"
    GO = "GO"
    JUMP_TO = "JUMP_TO"
    SWITCH_TAB = "SWITCH_TAB"
    USER_INPUT = "USER_INPUT"
    FINISH = "FINISH"


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    FORWARD = "forward"
    BACK = "back"


class EnvKind(str, Enum):
    MOBILE = "mobile"
    WEB = "web"


K = ActionKind

MOBILE_KINDS = frozenset({
    K.CLICK, K.DOUBLE_TAP, K.SCROLL, K.SWIPE, K.INPUT_TEXT, K.NAVIGATE_HOME,
    K.NAVIGATE_BACK, K.KEYBOARD_ENTER, K.OPEN_APP, K.STATUS, K.WAIT,
    K.LONG_PRESS, K.ANSWER, K.UNKNOWN,
})
WEB_KINDS = frozenset({
    K.CLICK, K.HOVER, K.SELECT, K.TYPE_STRING, K.SCROLL_PAGE, K.GO, K.JUMP_TO,
    K.SWITCH_TAB, K.USER_INPUT, K.FINISH,
})
VOCABULARY = {EnvKind.MOBILE: MOBILE_KINDS, EnvKind.WEB: WEB_KINDS}

# SWITCH_TAB addresses a tab index through ``target``.
TARGETED_KINDS = frozenset({
    K.CLICK, K.DOUBLE_TAP, K.LONG_PRESS, K.INPUT_TEXT, K.HOVER, K.SELECT,
    K.TYPE_STRING, K.SWITCH_TAB,
})
TEXT_KINDS = frozenset({K.INPUT_TEXT, K.TYPE_STRING, K.ANSWER, K.OPEN_APP, K.JUMP_TO, K.SELECT})
DIRECTIONS = {
    K.SCROLL: frozenset({Direction.UP, Direction.DOWN, Direction.LEFT, Direction.RIGHT}),
    K.SWIPE: frozenset({Direction.UP, Direction.DOWN, Direction.LEFT, Direction.RIGHT}),
    K.SCROLL_PAGE: frozenset({Direction.UP, Direction.DOWN}),
    K.GO: frozenset({Direction.FORWARD, Direction.BACK}),
}

# Kinds that end an episode by self-declaration.
DECLARE_KINDS = frozenset({K.STATUS, K.FINISH})


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    target: int | None = None
    payload: str | None = None
    direction: Direction | None = None

    def __str__(self) -> str:
        return render_action(self)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "target": self.target,
            "payload": self.payload,
            "direction": self.direction.value if self.direction is not None else None,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> Action:
        try:
            kind = ActionKind(str(data["kind"]).upper())
        except (KeyError, ValueError) as exc:
            raise ValidationError("unknown-kind", repr(data.get("kind"))) from exc
        direction = data.get("direction")
        try:
            direction = Direction(str(direction).lower()) if direction is not None else None
        except ValueError as exc:
            raise ValidationError("bad-direction", repr(direction)) from exc
        target = data.get("target")
        if target is not None:
            if isinstance(target, bool) or not isinstance(target, int):
                raise ValidationError("bad-target", repr(target))
        payload = data.get("payload")
        if payload is not None and not isinstance(payload, str):
            payload = str(payload)
        return cls(kind, target, payload, direction)


UNKNOWN_ACTION = Action(ActionKind.UNKNOWN)


def canonicalize_action(raw: Action) -> Action:
    """Return the canonical form of ``raw``.

    Fields that the kind does not use are cleared and payloads are trimmed
    (case is kept), so dataclass equality is the action equality used for
    voting. Empty payloads become ``None``.
    """
    if not isinstance(raw.kind, ActionKind):
        try:
            kind = ActionKind(raw.kind)
        except ValueError as exc:
            raise ValidationError("unknown-kind", repr(raw.kind)) from exc
        raw = replace(raw, kind=kind)
    kind = raw.kind
    target = raw.target if kind in TARGETED_KINDS else None
    payload = None
    if kind in TEXT_KINDS and raw.payload is not None:
        payload = raw.payload.strip() or None
    direction = raw.direction if kind in DIRECTIONS else None
    if direction is not None and not isinstance(direction, Direction):
        try:
            direction = Direction(direction)
        except ValueError as exc:
            raise ValidationError("bad-direction", repr(direction)) from exc
    return Action(kind, target, payload, direction)


def actions_equal(a: Action, b: Action) -> bool:
    return (a.kind, a.target, a.payload, a.direction) == (b.kind, b.target, b.payload, b.direction)


def validate_action(a: Action, env_kind: EnvKind | str) -> None:
    """Raise :class:`ValidationError` unless ``a`` is executable in ``env_kind``.

    UNKNOWN is representable but never executable.
    """
    env_kind = EnvKind(env_kind)
    if a.kind is ActionKind.UNKNOWN:
        raise ValidationError("unknown-action", "UNKNOWN is not executable")
    if a.kind not in VOCABULARY[env_kind]:
        raise ValidationError("wrong-vocabulary", f"{a.kind.value} not in {env_kind.value} vocabulary")
    if a.kind in TARGETED_KINDS:
        if a.target is None:
            raise ValidationError("missing-target", a.kind.value)
        if a.target < 0:
            raise ValidationError("bad-target", str(a.target))
    if a.kind in TEXT_KINDS and not a.payload:
        raise ValidationError("missing-payload", a.kind.value)
    if a.kind in DIRECTIONS:
        if a.direction is None:
            raise ValidationError("missing-direction", a.kind.value)
        if a.direction not in DIRECTIONS[a.kind]:
            raise ValidationError("bad-direction", f"{a.kind.value}({a.direction.value})")


def is_valid(a: Action, env_kind: EnvKind | str) -> bool:
    try:
        validate_action(a, env_kind)
    except ValidationError:
        return False
    return True


def render_action(a: Action) -> str:
    """Compact text form, e.g. ``INPUT_TEXT(2, "hi")`` or ``GO(back)``."""
    args: list[str] = []
    if a.target is not None:
        args.append(str(a.target))
    if a.payload is not None:
        args.append(json.dumps(a.payload, ensure_ascii=False))
    if a.direction is not None:
        args.append(a.direction.value)
    return f"{a.kind.value}({', '.join(args)})"


_RENDERED = re.compile(r"^\s*([A-Z_]+)\((.*)\)\s*$", re.S)


def parse_action_text(text: str) -> Action:
    """Inverse of :func:`render_action`."""
    m = _RENDERED.match(text)
    if not m:
        raise ValidationError("unparsable", text)
    try:
        kind = ActionKind(m.group(1))
    except ValueError as exc:
        raise ValidationError("unknown-kind", m.group(1)) from exc
    rest = m.group(2).strip()
    target = payload = direction = None
    decoder = json.JSONDecoder()
    while rest:
        if rest[0] == '"':
            try:
                payload, end = decoder.raw_decode(rest)
            except json.JSONDecodeError as exc:
                raise ValidationError("unparsable", text) from exc
            rest = rest[end:].strip()
            if rest.startswith(","):
                rest = rest[1:]
        else:
            token, _, rest = rest.partition(",")
            token = token.strip()
            if token.lstrip("-").isdigit():
                target = int(token)
            else:
                try:
                    direction = Direction(token)
                except ValueError as exc:
                    raise ValidationError("unparsable", text) from exc
        rest = rest.strip()
    return Action(kind, target, payload, direction)
