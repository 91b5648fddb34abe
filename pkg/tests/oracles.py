"""Reference implementations used as test oracles.

Each one is written from the definitions alone and shares no code path with
the package beyond the environment's transition function.
"""

from __future__ import annotations

import math
from collections import deque

from crmarl.actions import Action, ActionKind, Direction, EnvKind, is_valid
from crmarl.env.model import EnvState, outcome_reward, step


def brute_force_counts(matrix, env_kind):
    """Pairwise count of canonically equal valid cells, per cell."""
    cells = [(i, j, c.action) for i, row in enumerate(matrix.cells) for j, c in enumerate(row)]
    out = []
    for i, j, a in cells:
        if not is_valid(a, env_kind):
            continue
        n = sum(1 for _, _, b in cells if is_valid(b, env_kind) and b == a)
        out.append(((i, j), a, n))
    return out


def brute_force_winner(matrix, env_kind):
    counted = brute_force_counts(matrix, env_kind)
    if not counted:
        return None
    top = max(n for _, _, n in counted)
    # earliest cell in agent-major order among the maximal ones
    return min((pos, a) for pos, a, n in counted if n == top)[1]


def ceil_threshold(x: float) -> int:
    return int(math.ceil(x - 0.5))


def dpo_closed_form(p_plus, ref_plus, p_minus, ref_minus, beta):
    z = (math.log(p_plus) - math.log(ref_plus)) - (math.log(p_minus) - math.log(ref_minus))
    return math.log1p(math.exp(-beta * z))


def all_moves(state: EnvState, goal_strings) -> list[Action]:
    """Every executable move worth trying: clicks, goal-string typing, selects, back, home."""
    world = state.world
    page = world.pages[state.page]
    mobile = world.env_kind is EnvKind.MOBILE
    moves = []
    for el in page.elements:
        moves.append(Action(ActionKind.CLICK, el.index))
        if el.kind == "input":
            kind = ActionKind.INPUT_TEXT if mobile else ActionKind.TYPE_STRING
            moves.extend(Action(kind, el.index, s) for s in goal_strings)
        if el.kind == "select":
            moves.extend(Action(ActionKind.SELECT, el.index, o) for o in el.options)
    moves.append(Action(ActionKind.NAVIGATE_BACK) if mobile else Action(ActionKind.GO, direction=Direction.BACK))
    if mobile:
        moves.append(Action(ActionKind.NAVIGATE_HOME))
    return moves


def bfs_distance(state: EnvState, task, limit: int = 30) -> int | None:
    goal_strings = [a.text for a in task.goal if a.text]
    seen = {state.key}
    frontier = deque([(state, 0)])
    while frontier:
        s, d = frontier.popleft()
        if outcome_reward(s, task):
            return d
        if d >= limit:
            continue
        for a in all_moves(s, goal_strings):
            r = step(s, a)
            if r.invalid or not r.changed or r.state.key in seen:
                continue
            seen.add(r.state.key)
            frontier.append((r.state, d + 1))
    return None


def is_optimal(state: EnvState, task, action: Action) -> bool:
    """True if ``action`` starts some shortest plan (declaring completion once the goal holds)."""
    if outcome_reward(state, task):
        return action.kind in (ActionKind.STATUS, ActionKind.FINISH)
    d = bfs_distance(state, task)
    r = step(state, action)
    if r.invalid or not r.changed or action.kind in (ActionKind.STATUS, ActionKind.FINISH):
        return False
    d2 = bfs_distance(r.state, task)
    return d is not None and d2 is not None and d2 == d - 1
