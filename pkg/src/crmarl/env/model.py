"""FormWorld page model, transition function and goal checks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

from ..actions import Action, ActionKind, Direction, EnvKind
from ..errors import InvalidArgument
from ..types import ElementView, GoalAtom, Observation, Task

ELEMENT_KINDS = ("button", "link", "input", "checkbox", "select", "label")
CHECKED = "checked"


@dataclass(frozen=True)
class Element:
    index: int
    kind: str
    label: str
    target_page: int | None = None
    options: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"bad element kind {self.kind!r}")
        if bool(self.options) != (self.kind == "select"):
            raise ValueError("options must be non-empty exactly for selects")

    def to_json(self) -> dict[str, Any]:
        return {"index": self.index, "kind": self.kind, "label": self.label,
                "target_page": self.target_page, "options": list(self.options)}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Element:
        return cls(d["index"], d["kind"], d["label"], d.get("target_page"), tuple(d.get("options", ())))


@dataclass(frozen=True)
class Page:
    id: int
    name: str
    elements: tuple[Element, ...]

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "name": self.name, "elements": [e.to_json() for e in self.elements]}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Page:
        return cls(d["id"], d["name"], tuple(Element.from_json(e) for e in d["elements"]))


@dataclass(frozen=True, eq=False)
class FormWorld:
    """Static layout of one environment. Compared and hashed by identity."""

    id: str
    env_kind: EnvKind
    pages: tuple[Page, ...]
    difficulty: str = "easy"
    seed: int = 0

    def __post_init__(self):
        for p in self.pages:
            for el in p.elements:
                if el.target_page is not None and not 0 <= el.target_page < len(self.pages):
                    raise ValueError(f"element {p.id}/{el.index} links to missing page {el.target_page}")

    def initial_state(self) -> EnvState:
        return EnvState(self, (0,), (), False, None)

    def element(self, page: int, index: int) -> Element:
        return self.pages[page].elements[index]

    def path_to(self, page: int) -> tuple[int, ...]:
        """Page ids from the root to ``page`` following links (shortest)."""
        prev = {0: None}
        queue = [0]
        for p in queue:
            for el in self.pages[p].elements:
                if el.kind == "link" and el.target_page not in prev:
                    prev[el.target_page] = p
                    queue.append(el.target_page)
        if page not in prev:
            raise InvalidArgument(f"page {page} unreachable")
        out = [page]
        while prev[out[-1]] is not None:
            out.append(prev[out[-1]])
        return tuple(reversed(out))

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "env_kind": self.env_kind.value, "difficulty": self.difficulty,
                "seed": self.seed, "pages": [p.to_json() for p in self.pages]}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> FormWorld:
        return cls(d["id"], EnvKind(d["env_kind"]), tuple(Page.from_json(p) for p in d["pages"]),
                   d.get("difficulty", "easy"), d.get("seed", 0))


Key = tuple[int, int]


@dataclass(frozen=True)
class EnvState:
    world: FormWorld
    page_stack: tuple[int, ...]
    values: tuple[tuple[Key, str], ...]  # sorted, non-default entries only
    done_declared: bool = False
    answer: str | None = None

    def __post_init__(self):
        if not self.page_stack:
            raise ValueError("page stack must be non-empty")

    @property
    def page(self) -> int:
        return self.page_stack[-1]

    @property
    def key(self) -> tuple:
        return (self.page_stack, self.values, self.done_declared, self.answer)

    def value(self, page: int, index: int) -> str:
        for k, v in self.values:
            if k == (page, index):
                return v
        return ""

    def with_value(self, page: int, index: int, value: str) -> EnvState:
        vals = {k: v for k, v in self.values}
        if value:
            vals[(page, index)] = value
        else:
            vals.pop((page, index), None)
        return replace(self, values=tuple(sorted(vals.items())))

    def to_json(self) -> dict[str, Any]:
        return {"world": self.world.id, "page_stack": list(self.page_stack),
                "values": [[p, i, v] for (p, i), v in self.values],
                "done_declared": self.done_declared, "answer": self.answer}

    @classmethod
    def from_json(cls, d: dict[str, Any], world: FormWorld) -> EnvState:
        if d["world"] != world.id:
            raise InvalidArgument(f"state belongs to {d['world']!r}, not {world.id!r}")
        return cls(world, tuple(d["page_stack"]), tuple(((p, i), v) for p, i, v in d["values"]),
                   d["done_declared"], d.get("answer"))


def observe(state: EnvState) -> Observation:
    """Render the current page. Pure function of the state."""
    page = state.world.pages[state.page]
    views = []
    for el in page.elements:
        v = state.value(page.id, el.index)
        if el.kind == "input":
            text = f'value: "{v}"' if v else "empty"
        elif el.kind == "checkbox":
            text = "checked" if v == CHECKED else "unchecked"
        elif el.kind == "select":
            text = f"selected: {v}" if v else "selected: none"
        else:
            text = ""
        views.append(ElementView(el.index, el.kind, el.label, text, el.options))
    return Observation(page.name, tuple(views))


def reset(world: FormWorld, task: Task) -> tuple[EnvState, Observation]:
    if task.env_id and task.env_id != world.id:
        raise InvalidArgument(f"task {task.id} belongs to {task.env_id!r}, not {world.id!r}")
    s0 = world.initial_state()
    return s0, observe(s0)


@dataclass(frozen=True)
class StepResult:
    state: EnvState
    changed: bool
    invalid: bool
    declared_done: bool


def _invalid(state: EnvState) -> StepResult:
    return StepResult(state, False, True, state.done_declared)


def step(state: EnvState, action: Action) -> StepResult:
    """Deterministic transition. Invalid actions never mutate the state."""
    world = state.world
    page = world.pages[state.page]
    k = action.kind
    el = None
    if action.target is not None and k not in (ActionKind.SWITCH_TAB,):
        if not 0 <= action.target < len(page.elements):
            return _invalid(state)
        el = page.elements[action.target]

    if k is ActionKind.CLICK:
        if el is None:
            return _invalid(state)
        if el.kind in ("link", "button") and el.target_page is not None:
            new = replace(state, page_stack=state.page_stack + (el.target_page,))
            return StepResult(new, True, False, new.done_declared)
        if el.kind == "checkbox":
            cur = state.value(page.id, el.index)
            new = state.with_value(page.id, el.index, "" if cur == CHECKED else CHECKED)
            return StepResult(new, True, False, new.done_declared)
        return _invalid(state)

    if k in (ActionKind.INPUT_TEXT, ActionKind.TYPE_STRING):
        if el is None or el.kind != "input" or not action.payload:
            return _invalid(state)
        new = state.with_value(page.id, el.index, action.payload)
        return StepResult(new, new.values != state.values, False, new.done_declared)

    if k is ActionKind.SELECT:
        if el is None or el.kind != "select" or action.payload not in el.options:
            return _invalid(state)
        new = state.with_value(page.id, el.index, action.payload)
        return StepResult(new, new.values != state.values, False, new.done_declared)

    if k is ActionKind.NAVIGATE_BACK or (k is ActionKind.GO and action.direction is Direction.BACK):
        if len(state.page_stack) == 1:
            return _invalid(state)
        new = replace(state, page_stack=state.page_stack[:-1])
        return StepResult(new, True, False, new.done_declared)

    if k is ActionKind.NAVIGATE_HOME:
        if len(state.page_stack) == 1:
            return StepResult(state, False, False, state.done_declared)
        new = replace(state, page_stack=state.page_stack[:1])
        return StepResult(new, True, False, new.done_declared)

    if k in (ActionKind.STATUS, ActionKind.FINISH):
        new = replace(state, done_declared=True)
        return StepResult(new, not state.done_declared, False, True)

    if k is ActionKind.ANSWER:
        if not action.payload:
            return _invalid(state)
        new = replace(state, answer=action.payload)
        return StepResult(new, new.answer != state.answer, False, new.done_declared)

    if k in (ActionKind.WAIT, ActionKind.HOVER, ActionKind.SCROLL, ActionKind.SCROLL_PAGE,
             ActionKind.SWIPE):
        return StepResult(state, False, False, state.done_declared)

    return _invalid(state)


def atom_satisfied(state: EnvState, atom: GoalAtom) -> bool:
    if atom.kind == "on_page":
        return state.page == atom.page
    if atom.kind == "value_equals":
        return state.value(atom.page, atom.element) == atom.text
    if atom.kind == "checked":
        return state.value(atom.page, atom.element) == CHECKED
    if atom.kind == "selected":
        return state.value(atom.page, atom.element) == atom.text
    if atom.kind == "answered":
        return state.answer == atom.text
    raise ValueError(atom.kind)


def outcome_reward(state: EnvState, task: Task) -> int:
    return int(all(atom_satisfied(state, a) for a in task.goal))


def declare_action(env_kind: EnvKind) -> Action:
    return Action(ActionKind.STATUS) if env_kind is EnvKind.MOBILE else Action(ActionKind.FINISH)


def back_action(env_kind: EnvKind) -> Action:
    if env_kind is EnvKind.MOBILE:
        return Action(ActionKind.NAVIGATE_BACK)
    return Action(ActionKind.GO, direction=Direction.BACK)


def type_kind(env_kind: EnvKind) -> ActionKind:
    return ActionKind.INPUT_TEXT if env_kind is EnvKind.MOBILE else ActionKind.TYPE_STRING
