"""Curriculum data synthesis: basic UI knowledge, single-step instructions
and process preferences, with offline ground-truth generators."""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import numpy as np

from .actions import Action, ActionKind, render_action, validate_action
from .agents.base import Agent, AgentConfig
from .agents.gateway import ChatGateway
from .agents.prompts import fenced_json, load_template, parse_action_block, render, vocabulary_text
from .credit import Adversary, attach_rewards, restore_from_failures
from .env.generate import INPUT_VALUES
from .env.model import CHECKED, Element, EnvState, FormWorld, observe, step, type_kind
from .errors import AuthError, CrmarlError, ValidationError
from .rollout import RolloutConfig, run_episode
from .schemas import validate_record
from .types import PreferenceRecord, Task

log = logging.getLogger(__name__)

CURRICULUM_SCHEMA = "crmarl.curriculum/1"
TIERS = ("basic", "instruction", "preference")

UNDERSTANDING_QUESTIONS = (
    "What is the purpose of the current UI?",
    "What does the current UI aim to achieve?",
    "Summarize the current interface in one paragraph.",
)
RECOGNITION_QUESTIONS = (
    "What is the function of UI element X?",
    "What information does UI element X provide?",
    "What happens when click the UI element X?",
    "What action is associated with UI element X?",
)
QUESTIONS = tuple(("ui_understanding", q) for q in UNDERSTANDING_QUESTIONS) + \
    tuple(("element_recognition", q) for q in RECOGNITION_QUESTIONS)

# Scale of the original collection, kept for side-by-side reporting.
REFERENCE_COUNTS = {"basic": 88_513, "instruction": 18_041, "preference": 3_440}

ACTIONABLE = ("link", "button", "checkbox", "input", "select")


@dataclass(frozen=True)
class CurriculumRecord:
    tier: str
    subtype: str | None
    prompt: str
    source: dict[str, Any]
    backend: str
    target: str | None = None
    target_action: Action | None = None
    preference: PreferenceRecord | None = None

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.tier == "preference":
            if self.preference is None:
                raise ValueError("preference records need a preference pair")
        elif self.target is None:
            raise ValueError(f"{self.tier} records need a target")
        if self.tier == "instruction" and self.target_action is None:
            raise ValueError("instruction records need a target action")

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": CURRICULUM_SCHEMA, "tier": self.tier, "subtype": self.subtype,
            "prompt": self.prompt, "target": self.target,
            "target_action": self.target_action.to_json() if self.target_action else None,
            "preference": self.preference.to_json() if self.preference else None,
            "source": self.source, "backend": self.backend,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> CurriculumRecord:
        if d.get("schema") != CURRICULUM_SCHEMA:
            raise ValidationError("schema", f"expected {CURRICULUM_SCHEMA!r}")
        ta, pr = d.get("target_action"), d.get("preference")
        return cls(d["tier"], d.get("subtype"), d["prompt"], d["source"], d["backend"], d.get("target"),
                   Action.from_json(ta) if ta else None, PreferenceRecord.from_json(pr) if pr else None)


@dataclass
class SynthResult:
    records: list[CurriculumRecord] = field(default_factory=list)
    requested: int = 0
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)
    drops: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected += 1
        self.reasons[reason] += 1


def state_on_page(world: FormWorld, page: int) -> EnvState:
    return EnvState(world, world.path_to(page), ())


def element_ref(index: int, label: str) -> str:
    return f"[{index}] '{label}'"


# -- ground-truth answers -------------------------------------------------

def page_summary(world: FormWorld, page: int) -> str:
    pg = world.pages[page]
    by_kind: dict[str, list[Element]] = {}
    for el in pg.elements:
        by_kind.setdefault(el.kind, []).append(el)
    parts = []
    navs = by_kind.get("link", []) + [b for b in by_kind.get("button", []) if b.target_page is not None]
    if navs:
        parts.append("open " + ", ".join(world.pages[e.target_page].name for e in navs))
    if "input" in by_kind:
        parts.append("fill in " + ", ".join(e.label for e in by_kind["input"]))
    if "checkbox" in by_kind:
        parts.append("switch " + ", ".join(e.label for e in by_kind["checkbox"]))
    if "select" in by_kind:
        parts.append("choose " + ", ".join(e.label for e in by_kind["select"]))
    what = "; ".join(parts) if parts else "read static information"
    return f"This is the {pg.name} page with {len(pg.elements)} elements. From here you can {what}."


def element_answer(world: FormWorld, page: int, el: Element, question: int, state: EnvState) -> str:
    """Answer to recognition question ``question`` (0-3) from the element's metadata."""
    value = state.value(page, el.index)
    dest = world.pages[el.target_page].name if el.target_page is not None else None
    if el.kind in ("link", "button"):
        facts = (f"It is a {el.kind} that opens the {dest} page.",
                 f"It shows the label '{el.label}' and leads to the {dest} page.",
                 f"The app navigates to the {dest} page.",
                 f"Click it to open the {dest} page.")
    elif el.kind == "checkbox":
        now = "checked" if value == CHECKED else "unchecked"
        facts = (f"It turns {el.label} on or off.",
                 f"It shows whether {el.label} is enabled; it is currently {now}.",
                 f"{el.label} becomes {'unchecked' if now == 'checked' else 'checked'}.",
                 "Click it to toggle the setting.")
    elif el.kind == "input":
        facts = (f"It is a text field for {el.label}.",
                 f"It holds the {el.label}; it is currently {repr(value) if value else 'empty'}.",
                 "The field gets focus so text can be typed.",
                 "Type text into it.")
    elif el.kind == "select":
        opts = ", ".join(el.options)
        facts = (f"It picks {el.label} from a list.",
                 f"It offers the options {opts}; current choice: {value or 'none'}.",
                 "The option list opens.",
                 "Select one of its options.")
    else:
        facts = ("It is static text.",
                 f"It reads '{el.label}'.",
                 "Nothing happens; it is not interactive.",
                 "None; it cannot be interacted with.")
    return facts[question]


class KnowledgeBackend(Protocol):
    name: str

    def answer(self, world: FormWorld, page: int, element: Element | None, subtype: str, question: int,
               prompt: str) -> str: ...


class ScriptedKnowledge:
    name = "scripted"

    def answer(self, world, page, element, subtype, question, prompt) -> str:
        if subtype == "ui_understanding":
            return page_summary(world, page)
        return element_answer(world, page, element, question, state_on_page(world, page))


class RemoteKnowledge:
    name = "remote"

    def __init__(self, gateway: ChatGateway, temperature: float = 0.0):
        self.gateway = gateway
        self.temperature = temperature

    def answer(self, world, page, element, subtype, question, prompt) -> str:
        text = self.gateway.complete(prompt, self.temperature).strip()
        if not text:
            raise ValidationError("empty", "empty answer")
        return text


def gen_basic_knowledge(world: FormWorld, count: int, backend: KnowledgeBackend | None = None,
                        seed: int = 0, template_dir: str | Path | None = None) -> SynthResult:
    """Question/answer pairs about random pages and elements, one template drawn uniformly per record."""
    if count < 1:
        raise ValueError("count must be at least 1")
    backend = backend or ScriptedKnowledge()
    template = load_template("knowledge", template_dir)
    rng = np.random.default_rng([seed, 11])
    out = SynthResult(requested=count)
    for k in range(count):
        subtype, question = QUESTIONS[int(rng.integers(len(QUESTIONS)))]
        page = int(rng.integers(len(world.pages)))
        obs = observe(state_on_page(world, page))
        element = None
        q_text = question
        if subtype == "element_recognition":
            element = world.pages[page].elements[int(rng.integers(len(world.pages[page].elements)))]
            q_text = question.replace("UI element X", f"UI element {element_ref(element.index, element.label)}")
        prompt = render(template, observation=obs.render(), question=q_text)
        q_index = (UNDERSTANDING_QUESTIONS if subtype == "ui_understanding" else RECOGNITION_QUESTIONS).index(question)
        try:
            answer = backend.answer(world, page, element, subtype, q_index, prompt)
        except AuthError:
            raise
        except CrmarlError as exc:
            log.info("basic record %d skipped: %s", k, exc)
            out.reject("backend")
            continue
        out.records.append(CurriculumRecord(
            "basic", subtype, prompt,
            {"env_id": world.id, "page": world.pages[page].name, "element": element.index if element else None,
             "question": question}, backend.name, target=answer))
    return out


# -- single-step instructions ---------------------------------------------

class InstructionBackend(Protocol):
    name: str

    def propose(self, world: FormWorld, state: EnvState, element: Element, prompt: str,
                rng: np.random.Generator) -> tuple[str, Action]: ...


class ScriptedInstructions:
    """Derives the instruction and its action mechanically from the element kind."""

    name = "scripted"

    def propose(self, world, state, element, prompt, rng) -> tuple[str, Action]:
        kind = world.env_kind
        if element.kind in ("link", "button"):
            dest = world.pages[element.target_page].name
            return f"Open {dest}.", Action(ActionKind.CLICK, element.index)
        if element.kind == "checkbox":
            verb = "uncheck" if state.value(state.page, element.index) == CHECKED else "check"
            return f"{verb.capitalize()} {element.label}.", Action(ActionKind.CLICK, element.index)
        if element.kind == "input":
            text = INPUT_VALUES[int(rng.integers(len(INPUT_VALUES)))]
            return f"Enter '{text}' in {element.label}.", Action(type_kind(kind), element.index, text)
        if element.kind == "select":
            cur = state.value(state.page, element.index)
            opts = [o for o in element.options if o != cur]
            opt = opts[int(rng.integers(len(opts)))]
            return f"Select '{opt}' for {element.label}.", Action(ActionKind.SELECT, element.index, opt)
        raise ValidationError("not-actionable", element.kind)


class RemoteInstructions:
    name = "remote"

    def __init__(self, gateway: ChatGateway, temperature: float = 0.3):
        self.gateway = gateway
        self.temperature = temperature

    def propose(self, world, state, element, prompt, rng) -> tuple[str, Action]:
        text = self.gateway.complete(prompt, self.temperature, int(rng.integers(2**31 - 1)))
        data = fenced_json(text)
        instruction = data.get("instruction") if isinstance(data, dict) else None
        if not isinstance(instruction, str) or not instruction.strip():
            raise ValidationError("parse", "missing instruction")
        return instruction.strip(), parse_action_block(text, world.env_kind)


def replay_check(state: EnvState, action: Action, element: Element) -> None:
    """Raise unless ``action`` is valid, addresses ``element`` and changes the state."""
    validate_action(action, state.world.env_kind)
    if action.target != element.index:
        raise ValidationError("wrong-element", f"action addresses {action.target}, not {element.index}")
    result = step(state, action)
    if result.invalid or not result.changed:
        raise ValidationError("no-effect", f"{render_action(action)} has no effect")


def gen_instruction_knowledge(world: FormWorld, count: int, backend: InstructionBackend | None = None,
                              seed: int = 0, template_dir: str | Path | None = None) -> SynthResult:
    if count < 1:
        raise ValueError("count must be at least 1")
    backend = backend or ScriptedInstructions()
    template = load_template("instruction", template_dir)
    rng = np.random.default_rng([seed, 13])
    spots = [(p.id, el) for p in world.pages for el in p.elements if el.kind in ACTIONABLE]
    out = SynthResult(requested=count)
    for k in range(count):
        page, element = spots[int(rng.integers(len(spots)))]
        state = state_on_page(world, page)
        obs = observe(state)
        prompt = render(template, observation=obs.render(), element=element.index,
                        vocabulary=vocabulary_text(world.env_kind))
        try:
            instruction, action = backend.propose(world, state, element, prompt, rng)
            replay_check(state, action, element)
        except AuthError:
            raise
        except CrmarlError as exc:
            log.info("instruction record %d rejected: %s", k, exc)
            out.reject(getattr(exc, "code", "backend"))
            continue
        out.records.append(CurriculumRecord(
            "instruction", None, prompt + "\n\nInstruction: " + instruction,
            {"env_id": world.id, "page": world.pages[page].name, "element": element.index},
            backend.name, target=render_action(action), target_action=action))
    return out


# -- process preferences --------------------------------------------------

def gen_process_preference(suite: Sequence[tuple[FormWorld, Sequence[Task]]], count: int, ui_agent: Agent,
                           adversary: Adversary, critic, seed: int = 0, backend_name: str = "scripted",
                           max_passes: int = 20) -> SynthResult:
    """Single-agent rollouts scored by the critic and paired with adversarial negatives.

    Passes over the task list repeat until ``count`` records exist, then the
    list is truncated to ``count``. A pass that yields nothing ends the loop.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    worlds = {w.id: w for w, _ in suite}
    agent_config = getattr(ui_agent, "config", None) or AgentConfig("scripted", 0.0)
    cfg = RolloutConfig(1, 1, "fixed", 0.0, seed, suite[0][0].env_kind, (agent_config,))
    rng = np.random.default_rng([seed, 17])
    out = SynthResult(requested=count)
    drops: Counter = Counter()
    episode = 0
    for _ in range(max_passes):
        produced = 0
        for world, tasks in suite:
            for task in tasks:
                traj = run_episode(task, cfg, [ui_agent], world, episode)
                episode += 1
                scored = attach_rewards(traj, critic, world)
                batch = restore_from_failures([scored], adversary, worlds, rng)
                drops.update(batch.drop_counts())
                for rec in batch.records:
                    out.records.append(CurriculumRecord(
                        "preference", None, rec.context.observation_text,
                        {"env_id": world.id, "task_id": task.id, "step": rec.step}, backend_name,
                        preference=rec))
                produced += len(batch.records)
                if len(out.records) >= count:
                    break
            if len(out.records) >= count:
                break
        if len(out.records) >= count or produced == 0:
            break
    out.records = out.records[:count]
    out.rejected = count - len(out.records)
    if out.rejected:
        out.reasons["insufficient"] = out.rejected
    out.drops = {k: int(drops.get(k, 0)) for k in ("collision", "exhausted", "adv_failure")}
    return out


def dataset_stats(records: Sequence[CurriculumRecord], drops: dict[str, int] | None = None,
                  rejected: dict[str, int] | None = None) -> dict[str, Any]:
    """Counts per tier and subtype, schema pass rate, and the reference scale."""
    tiers = {t: 0 for t in TIERS}
    subtypes = {"ui_understanding": 0, "element_recognition": 0}
    passed = 0
    for r in records:
        tiers[r.tier] += 1
        if r.subtype in subtypes:
            subtypes[r.subtype] += 1
        passed += validate_record("curriculum", r.to_json())
    return {
        "total": len(records),
        "tiers": tiers,
        "subtypes": subtypes,
        "drops": dict(drops or {}),
        "rejected": dict(rejected or {}),
        "schema_pass_rate": passed / len(records) if records else 0.0,
        "reference_scale": dict(REFERENCE_COUNTS),
    }

