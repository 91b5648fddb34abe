"""Finite candidate sets and the feature map of the toy softmax policy.

Features are phrased in terms of abstract interaction roles (navigate,
toggle, type, choose, back, ...) rather than vocabulary-specific kinds so
weights learned in the mobile vocabulary carry over to the web vocabulary.
"""

from __future__ import annotations

import re
from functools import lru_cache

import numpy as np

from ..actions import Action, ActionKind, Direction, EnvKind
from ..env.model import back_action, declare_action, type_kind
from ..types import Observation, PrefContext

FEATURE_SCHEMA = "toy-features/1"
FEATURE_NAMES = (
    "role_nav", "role_toggle", "role_type", "role_choose",
    "role_back", "role_home", "role_declare", "role_noop",
    "overlap_nav", "overlap_toggle", "overlap_type", "overlap_choose",
    "bound_type", "bound_choose", "redundant", "page_exhausted",
    "repeat_last", "nav_visited", "off_task", "pred_agree", "own_agree",
)
F = len(FEATURE_NAMES)
FI = {name: k for k, name in enumerate(FEATURE_NAMES)}

ROLES = ("nav", "toggle", "type", "choose", "back", "home", "declare", "noop")

STOPWORDS = frozenset({
    "a", "an", "the", "in", "on", "to", "go", "enter", "check", "select", "for", "and",
    "then", "page", "open", "of", "home",
})
_QUOTED = re.compile(r"'([^']*)'")
_TOKEN = re.compile(r"[a-z0-9]+")


def noop_action(env_kind: EnvKind) -> Action:
    if env_kind is EnvKind.MOBILE:
        return Action(ActionKind.WAIT)
    return Action(ActionKind.SCROLL_PAGE, direction=Direction.DOWN)


def quoted_strings(query: str) -> tuple[str, ...]:
    out: list[str] = []
    for s in _QUOTED.findall(query):
        s = s.strip()
        if s and s not in out:
            out.append(s)
    return tuple(out)


def tokens(text: str) -> frozenset[str]:
    return frozenset(t for t in _TOKEN.findall(text.lower()) if t not in STOPWORDS)


@lru_cache(maxsize=4096)
def _query_parts(query: str) -> tuple[frozenset[str], tuple[tuple[frozenset[str], tuple[str, ...]], ...]]:
    bare = _QUOTED.sub(" ", query)
    clauses = []
    for clause in re.split(r"(?<=\.)\s+", query):
        clauses.append((tokens(_QUOTED.sub(" ", clause)), quoted_strings(clause)))
    return tokens(bare), tuple(clauses)


def candidate_set(observation: Observation, query: str, env_kind: EnvKind) -> tuple[Action, ...]:
    """Deterministically ordered, deduplicated candidate actions for an observation."""
    env_kind = EnvKind(env_kind)
    strings = quoted_strings(query)
    out: list[Action] = []
    for el in observation.elements:
        if el.kind in ("link", "button", "checkbox"):
            out.append(Action(ActionKind.CLICK, el.index))
        elif el.kind == "input":
            out.extend(Action(type_kind(env_kind), el.index, s) for s in strings)
        elif el.kind == "select" and env_kind is EnvKind.WEB:
            out.extend(Action(ActionKind.SELECT, el.index, o) for o in el.options)
    out.append(back_action(env_kind))
    if env_kind is EnvKind.MOBILE:
        out.append(Action(ActionKind.NAVIGATE_HOME))
    out.append(declare_action(env_kind))
    out.append(noop_action(env_kind))
    seen = set()
    return tuple(a for a in out if not (a in seen or seen.add(a)))


def role_of(action: Action, observation: Observation) -> str:
    k = action.kind
    if k is ActionKind.CLICK:
        el = observation.elements[action.target]
        return "toggle" if el.kind == "checkbox" else "nav"
    if k in (ActionKind.INPUT_TEXT, ActionKind.TYPE_STRING):
        return "type"
    if k is ActionKind.SELECT:
        return "choose"
    if k is ActionKind.NAVIGATE_BACK or (k is ActionKind.GO and action.direction is Direction.BACK):
        return "back"
    if k is ActionKind.NAVIGATE_HOME:
        return "home"
    if k in (ActionKind.STATUS, ActionKind.FINISH):
        return "declare"
    return "noop"


def _overlap(label_toks: frozenset[str], query_toks: frozenset[str]) -> float:
    if not label_toks:
        return 0.0
    return len(label_toks & query_toks) / len(label_toks)


def _bound(label_toks, payload: str | None, clauses) -> float:
    if not payload or not label_toks:
        return 0.0
    for ctoks, strings in clauses:
        if label_toks & ctoks and payload in strings:
            return 1.0
    return 0.0


def _redundant(action: Action, role: str, observation: Observation) -> float:
    if action.target is None:
        return 0.0
    el = observation.elements[action.target]
    if role == "type":
        return float(el.state == f'value: "{action.payload}"')
    if role == "toggle":
        return float(el.state == "checked")
    if role == "choose":
        return float(el.state == f"selected: {action.payload}")
    return 0.0


def feature_matrix(ctx: PrefContext, agent_index: int, round_: int,
                   candidates: tuple[Action, ...] | None = None) -> tuple[tuple[Action, ...], np.ndarray]:
    """Return ``(candidates, X)`` with ``X[c]`` the feature vector of candidate ``c``.

    The agent's own previous-round message feeds ``own_agree``; predecessor
    messages feed ``pred_agree``. ``round_`` is one-based.
    """
    obs = ctx.observation
    if candidates is None:
        candidates = candidate_set(obs, ctx.query, ctx.env_kind)
    qtoks, clauses = _query_parts(ctx.query)
    X = np.zeros((len(candidates), F))
    last = ctx.history[-1][1] if ctx.history else None
    visited = {p for p, _ in ctx.history}
    own = [m.action for m in ctx.messages if m.sender == agent_index]
    preds = [m.action for m in ctx.messages if m.sender != agent_index]

    roles = [role_of(a, obs) for a in candidates]
    useful_here = False
    for row, (a, role) in enumerate(zip(candidates, roles)):
        X[row, FI["role_" + role]] = 1.0
        if a.target is not None:
            ltoks = tokens(obs.elements[a.target].label)
            ov = _overlap(ltoks, qtoks)
            if role in ("nav", "toggle", "type", "choose"):
                X[row, FI["overlap_" + role]] = ov
            if role in ("type", "choose"):
                X[row, FI["bound_" + role]] = _bound(ltoks, a.payload, clauses)
            if ov == 0:
                X[row, FI["off_task"]] = 1.0
            red = _redundant(a, role, obs)
            X[row, FI["redundant"]] = red
            if role == "nav" and obs.elements[a.target].label in visited:
                X[row, FI["nav_visited"]] = 1.0
            if ov > 0 and red == 0 and not X[row, FI["nav_visited"]]:
                useful_here = True
        if last is not None and a == last:
            X[row, FI["repeat_last"]] = 1.0
        if preds:
            X[row, FI["pred_agree"]] = sum(1 for p in preds if p == a) / len(preds)
        if own and own[0] == a:
            X[row, FI["own_agree"]] = 1.0
    if not useful_here:
        for row, role in enumerate(roles):
            if role in ("back", "home"):
                X[row, FI["page_exhausted"]] = 1.0
    return candidates, X


def softmax(weights: np.ndarray, X: np.ndarray, temperature: float) -> np.ndarray:
    z = X @ weights / temperature
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def log_softmax(weights: np.ndarray, X: np.ndarray, temperature: float) -> np.ndarray:
    z = X @ weights / temperature
    zmax = z.max()
    return z - (zmax + np.log(np.exp(z - zmax).sum()))
