import json
from collections import Counter

import numpy as np
import pytest

from crmarl.actions import Action, ActionKind, EnvKind, validate_action
from crmarl.agents import ConstantAgent, OracleAgent
from crmarl.credit import OracleAdversary, OracleCritic
from crmarl.datasynth import (QUESTIONS, REFERENCE_COUNTS, CurriculumRecord, ScriptedInstructions, dataset_stats,
                              element_answer, gen_basic_knowledge, gen_instruction_knowledge, gen_process_preference,
                              replay_check, state_on_page)
from crmarl.env import generate_env, generate_suite, optimal_path, step
from crmarl.errors import ValidationError
from crmarl.schemas import validate_record


def world(seed=0, kind=EnvKind.WEB):
    return generate_env(seed, kind, "easy")[0].world


class FlakyKnowledge:
    name = "flaky"

    def __init__(self):
        self.calls = 0

    def answer(self, world, page, element, subtype, question, prompt):
        self.calls += 1
        if self.calls % 4 == 0:
            raise ValidationError("empty")
        return "ok"


class WrongInstructions(ScriptedInstructions):
    """Targets the wrong element on every other call."""

    def __init__(self):
        self.calls = 0

    def propose(self, world, state, element, prompt, rng):
        self.calls += 1
        text, action = super().propose(world, state, element, prompt, rng)
        if self.calls % 2:
            return text, Action(action.kind, element.index + 100, action.payload)
        return text, action


def test_seven_question_templates():
    assert len(QUESTIONS) == 7
    assert [s for s, _ in QUESTIONS].count("ui_understanding") == 3
    assert QUESTIONS[0][1] == "What is the purpose of the current UI?"


def test_link_recognition_answer_names_the_destination():
    w = world(1)
    for page in w.pages:
        for el in page.elements:
            if el.kind == "link":
                dest = w.pages[el.target_page].name
                for q in range(4):
                    assert dest in element_answer(w, page.id, el, q, state_on_page(w, page.id))


def test_template_frequencies_are_uniform_within_three_sigma():
    res = gen_basic_knowledge(world(2), 10_000, seed=0)
    counts = Counter(r.source["question"] for r in res.records)
    assert set(counts) == {q for _, q in QUESTIONS}
    p = 1 / 7
    sigma = np.sqrt(10_000 * p * (1 - p))
    for c in counts.values():
        assert abs(c - 10_000 * p) < 3 * sigma


def test_basic_count_is_exact_and_deterministic():
    a = gen_basic_knowledge(world(3), 100, seed=5)
    b = gen_basic_knowledge(world(3), 100, seed=5)
    assert len(a.records) == 100 and a.rejected == 0
    assert [r.to_json() for r in a.records] == [r.to_json() for r in b.records]
    c = gen_basic_knowledge(world(3), 100, seed=6)
    assert [r.to_json() for r in a.records] != [r.to_json() for r in c.records]


def test_backend_failures_are_skipped_and_counted():
    res = gen_basic_knowledge(world(3), 40, FlakyKnowledge(), seed=1)
    assert len(res.records) == 30 and res.rejected == 10 == res.requested - len(res.records)


def test_checkbox_instruction_is_a_click():
    w = world(4, EnvKind.MOBILE)
    res = gen_instruction_knowledge(w, 200, seed=4)
    boxes = [r for r in res.records
             if w.pages[[p.name for p in w.pages].index(r.source["page"])].elements[r.source["element"]].kind == "checkbox"]
    assert boxes
    for r in boxes:
        assert r.target_action.kind is ActionKind.CLICK and r.target_action.target == r.source["element"]
        assert "heck " in r.prompt


def test_instruction_targets_replay_in_their_source_state():
    for kind in EnvKind:
        w = world(5, kind)
        res = gen_instruction_knowledge(w, 300, seed=5)
        assert len(res.records) == 300
        names = [p.name for p in w.pages]
        for r in res.records:
            state = state_on_page(w, names.index(r.source["page"]))
            validate_action(r.target_action, kind)
            result = step(state, r.target_action)
            assert result.changed and not result.invalid


def test_rejections_are_counted_exactly():
    res = gen_instruction_knowledge(world(6), 50, WrongInstructions(), seed=6)
    assert res.rejected == 50 - len(res.records) == 25
    assert res.reasons["wrong-element"] == 25


def test_replay_check_rejects_no_op():
    w = world(7)
    state = state_on_page(w, 0)
    link = next(el for el in w.pages[0].elements if el.kind == "link")
    label = next(el for el in w.pages[0].elements if el.kind == "label")
    replay_check(state, Action(ActionKind.CLICK, link.index), link)
    with pytest.raises(ValidationError):
        replay_check(state, Action(ActionKind.CLICK, label.index), label)


def test_oracle_pipeline_pairs_every_step():
    suite = generate_suite(8, EnvKind.MOBILE, "easy", n_tasks=6)
    res = gen_process_preference(suite, 1000, OracleAgent(), OracleAdversary(), OracleCritic(), seed=8, max_passes=1)
    # every step of an oracle rollout is rewarded and the goal check ends it before any declaration
    steps = sum(len(optimal_path(w.initial_state(), t)) for w, ts in suite for t in ts)
    assert len(res.records) == steps - sum(res.drops.values())
    assert res.rejected == 1000 - len(res.records)


def test_all_wait_agent_yields_nothing():
    suite = generate_suite(9, EnvKind.MOBILE, "easy", n_tasks=4)
    res = gen_process_preference(suite, 20, ConstantAgent(Action(ActionKind.WAIT)), OracleAdversary(),
                                 OracleCritic(), seed=9)
    assert res.records == [] and res.rejected == 20 and res.reasons["insufficient"] == 20


def test_preference_count_is_met_and_records_validate():
    suite = generate_suite(10, EnvKind.WEB, "easy", n_tasks=4)
    res = gen_process_preference(suite, 20, OracleAgent(), OracleAdversary(), OracleCritic(), seed=10)
    assert len(res.records) == 20 and res.rejected == 0
    for r in res.records:
        assert validate_record("preference", r.preference.to_json())
        assert validate_record("curriculum", r.to_json())
        assert r.preference.chosen.action != r.preference.rejected.action


def test_curriculum_record_round_trip_and_invariants():
    res = gen_instruction_knowledge(world(11), 5, seed=11)
    for r in res.records:
        assert CurriculumRecord.from_json(json.loads(json.dumps(r.to_json()))) == r
    with pytest.raises(ValueError):
        CurriculumRecord("basic", "ui_understanding", "p", {}, "x")
    with pytest.raises(ValueError):
        CurriculumRecord("preference", None, "p", {}, "x")
    with pytest.raises(ValueError):
        CurriculumRecord("gossip", None, "p", {}, "x", target="t")


def test_stats():
    empty = dataset_stats([])
    assert empty["total"] == 0 and all(v == 0 for v in empty["tiers"].values())
    assert empty["reference_scale"] == {"basic": 88_513, "instruction": 18_041, "preference": 3_440}
    assert REFERENCE_COUNTS == empty["reference_scale"]
    suite = generate_suite(12, EnvKind.WEB, "easy", n_tasks=4)
    recs = (gen_basic_knowledge(world(12), 10, seed=1).records + gen_instruction_knowledge(world(12), 5, seed=1).records
            + gen_process_preference(suite, 2, OracleAgent(), OracleAdversary(), OracleCritic(), seed=1).records)
    stats = dataset_stats(recs)
    assert [stats["tiers"][t] for t in ("basic", "instruction", "preference")] == [10, 5, 2]
    assert stats["schema_pass_rate"] == 1.0
    assert sum(stats["subtypes"].values()) == 10
