"""Breadth-first shortest-path oracle over FormWorld states."""

from __future__ import annotations

from functools import lru_cache

from ..actions import Action, ActionKind, EnvKind
from ..errors import UnreachableGoal
from ..types import Task
from .model import EnvState, back_action, declare_action, outcome_reward, step, type_kind

MAX_DEPTH = 40


def oracle_moves(state: EnvState, task: Task) -> list[Action]:
    """State-changing moves considered by the search.

    Text entry is restricted to the task's goal strings; declarations are
    excluded because they end the episode.
    """
    world = state.world
    kind = world.env_kind
    page = world.pages[state.page]
    goal_strings = task.goal_strings
    moves: list[Action] = []
    for el in page.elements:
        if el.kind in ("link", "button", "checkbox"):
            moves.append(Action(ActionKind.CLICK, el.index))
        elif el.kind == "input":
            moves.extend(Action(type_kind(kind), el.index, g) for g in goal_strings)
        elif el.kind == "select" and kind is EnvKind.WEB:
            moves.extend(Action(ActionKind.SELECT, el.index, o) for o in el.options)
    if len(state.page_stack) > 1:
        moves.append(back_action(kind))
        if kind is EnvKind.MOBILE:
            moves.append(Action(ActionKind.NAVIGATE_HOME))
    return moves


def _expand(state: EnvState, task: Task):
    for a in oracle_moves(state, task):
        res = step(state, a)
        if res.changed and not res.invalid:
            yield a, res.state


@lru_cache(maxsize=200_000)
def _search(state: EnvState, task: Task) -> tuple[int, frozenset[Action]]:
    if outcome_reward(state, task):
        return 0, frozenset({declare_action(state.world.env_kind)})
    # frontier maps state key -> (state, set of first moves reaching it at this depth)
    frontier: dict[tuple, tuple[EnvState, set[Action]]] = {}
    seen = {state.key}
    for a, s2 in _expand(state, task):
        entry = frontier.setdefault(s2.key, (s2, set()))
        entry[1].add(a)
    depth = 1
    while frontier:
        seen.update(frontier)
        hits: set[Action] = set()
        for s2, firsts in frontier.values():
            if outcome_reward(s2, task):
                hits |= firsts
        if hits:
            return depth, frozenset(hits)
        if depth >= MAX_DEPTH:
            break
        nxt: dict[tuple, tuple[EnvState, set[Action]]] = {}
        for s2, firsts in frontier.values():
            for _, s3 in _expand(s2, task):
                if s3.key in seen:
                    continue
                entry = nxt.setdefault(s3.key, (s3, set()))
                entry[1].update(firsts)
        frontier = nxt
        depth += 1
    raise UnreachableGoal(f"task {task.id} unreachable from page {state.page}")


def optimal_actions(state: EnvState, task: Task) -> frozenset[Action]:
    """First actions of every shortest action sequence from ``state`` to a goal state.

    A state that already satisfies the goal yields the declaration action
    (STATUS or FINISH).
    """
    return _search(state, task)[1]


def shortest_path_length(state: EnvState, task: Task) -> int:
    return _search(state, task)[0]


def optimal_path(state: EnvState, task: Task) -> list[Action]:
    """One shortest plan, choosing the first optimal action in sorted order each step."""
    plan: list[Action] = []
    while not outcome_reward(state, task):
        a = min(optimal_actions(state, task), key=_sort_key)
        plan.append(a)
        state = step(state, a).state
    return plan


def _sort_key(a: Action):
    return (a.kind.value, -1 if a.target is None else a.target, a.payload or "",
            a.direction.value if a.direction else "")


def sort_actions(actions) -> list[Action]:
    return sorted(actions, key=_sort_key)
