import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from pathkg.corpus import Dialogue, EntityMention, EntityType, PhysicianAction, Role, Utterance
from pathkg.errors import BudgetExhausted, RoleMismatch
from pathkg.kg import KnowledgeGraph, Triplet
from pathkg.miner import KnowledgeBundle, MinerConfig
from pathkg.pathway import encode_doctor, encode_history, encode_patient
from pathkg.prompts import (
    BudgetConfig,
    PromptRecord,
    build_prompt,
    build_train_record,
    default_instruction,
    emit_trainset,
    render_prompt,
    split_target,
    turn_contexts,
)
from conftest import GOLDEN
from oracles import truncation_oracle

INSTR = "根据知识和历史回复患者。"


def _m(*names):
    return tuple(EntityMention(n, EntityType.SYMPTOM) for n in names)


def _fixture():
    history = encode_history([
        Utterance(Role.PATIENT, "我胃痛", _m("胃痛")),
        Utterance(Role.DOCTOR, "多久了", actions=(PhysicianAction.INQUIRE,)),
    ])
    current = encode_patient(Utterance(Role.PATIENT, "三天了，还腹泻", _m("腹泻")))
    bundle = KnowledgeBundle(
        direct=(Triplet("胃痛", "腹泻", "伴随"), Triplet("腹泻", "胃痛", "相关")),
        potential=((Triplet("肠炎", "腹泻", "症状"), "肠炎"), (Triplet("肠炎", "胃痛", "症状"), "肠炎")),
        potential_nodes=(("肠炎", 2),),
    )
    return history, bundle, current


def test_large_budget_keeps_everything():
    history = encode_history([Utterance(Role.PATIENT, "你好")])
    current = encode_patient(Utterance(Role.PATIENT, "胃痛", _m("胃痛")))
    rec = build_prompt(history, KnowledgeBundle(), current, BudgetConfig(10_000), instruction=INSTR)
    assert rec.input_text == render_prompt(INSTR, [], [], history.encoded_history, current)
    assert rec.input_text.startswith(INSTR) and rec.input_text.endswith(current.rendered)
    assert rec.truncated_turns == 0 and rec.knowledge_included == (0, 0)
    assert rec.budget_used == len(rec.input_text)


def test_budget_removes_exactly_the_potential_block():
    history, bundle, current = _fixture()
    no_potential = render_prompt(INSTR, bundle.direct, [], history.encoded_history, current)
    # hand check of the character count: one potential line is 11 characters plus a header
    one_potential = render_prompt(INSTR, bundle.direct, bundle.potential_triplets[:1], history.encoded_history, current)
    assert len(one_potential) - len(no_potential) == len("\n潜在知识：") + len("\n肠炎 - 症状 - 腹泻")
    rec = build_prompt(history, bundle, current, BudgetConfig(len(no_potential)), instruction=INSTR)
    assert rec.knowledge_included == (2, 0)
    assert rec.dropped_knowledge == (0, 2)
    assert rec.truncated_turns == 0
    assert rec.input_text == no_potential


def test_budget_exhausted():
    history, bundle, current = _fixture()
    floor = len(render_prompt(INSTR, [], [], [], current))
    with pytest.raises(BudgetExhausted):
        build_prompt(history, bundle, current, BudgetConfig(floor - 1), instruction=INSTR)
    rec = build_prompt(history, bundle, current, BudgetConfig(floor), instruction=INSTR)
    assert rec.truncated_turns == 2 and rec.knowledge_included == (0, 0)


def test_current_must_be_patient():
    history, bundle, _ = _fixture()
    with pytest.raises(RoleMismatch):
        build_prompt(history, bundle, encode_doctor(Utterance(Role.DOCTOR, "x")), instruction=INSTR)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 400))
def test_truncation_matches_drop_order_oracle(budget):
    history, bundle, current = _fixture()
    h = history.encoded_history

    def render(nd, np_, h0):
        return render_prompt(INSTR, bundle.direct[:nd], bundle.potential_triplets[:np_], h[h0:], current)

    cfg, text = truncation_oracle(render, len, budget, 2, 2, len(h))
    if cfg is None:
        with pytest.raises(BudgetExhausted):
            build_prompt(history, bundle, current, BudgetConfig(budget), instruction=INSTR)
        return
    rec = build_prompt(history, bundle, current, BudgetConfig(budget), instruction=INSTR)
    assert (rec.knowledge_included[0], rec.knowledge_included[1], rec.truncated_turns) == cfg
    assert rec.input_text == text and rec.budget_used <= budget


def test_target_examples():
    prompt = PromptRecord("d", 1, "in", 2, (0, 0), 0)
    gold = Utterance(Role.DOCTOR, "您好，请问有什么可以帮您？", actions=(PhysicianAction.CHITCHAT,))
    rec = build_train_record(prompt, gold)
    assert rec.target_text == "[ENTITIES] 无 [ACTIONS] 闲聊 [RESPONSE] 您好，请问有什么可以帮您？"
    assert split_target(rec.target_text) == ("无", "闲聊", gold.text)
    with pytest.raises(RoleMismatch):
        build_train_record(prompt, Utterance(Role.PATIENT, "x"))


def test_split_target_requires_order():
    assert split_target("[ACTIONS] a [ENTITIES] b [RESPONSE] c") is None
    assert split_target("plain text") is None


def test_default_instruction_lists_every_label():
    text = default_instruction()
    for label in ("闲聊", "告知", "问诊", "注意事项", "建议检查", "诊断", "开药"):
        assert label in text
    assert "$" not in text


def test_turn_contexts_use_prior_history(demo_corpus, demo_kg):
    d = demo_corpus[0]
    ctxs = list(turn_contexts(d, demo_kg))
    assert [c.turn_index for c in ctxs] == [j for j in range(1, len(d.turns), 2)]
    for c in ctxs:
        j = c.turn_index
        assert c.history == encode_history(d.turns[:j - 1])
        assert c.current == encode_patient(d.turns[j - 1])
        assert c.entities == encode_history(d.turns[:j]).cumulative_entities
        assert c.gold is d.turns[j]


def test_emit_one_record_per_doctor_turn(tmp_path):
    dlg = Dialogue("x", (
        Utterance(Role.PATIENT, "a"), Utterance(Role.DOCTOR, "b", actions=(PhysicianAction.INQUIRE,)),
        Utterance(Role.PATIENT, "c"), Utterance(Role.DOCTOR, "d", actions=(PhysicianAction.INFORM,)),
    ))
    assert emit_trainset([dlg], KnowledgeGraph(), tmp_path / "t.jsonl") == 2


def test_emit_is_deterministic_and_matches_golden(tmp_path, demo_corpus, demo_kg):
    three = demo_corpus[:3]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    n = emit_trainset(three, demo_kg, a, MinerConfig(), BudgetConfig(), seed=13, workers=1)
    emit_trainset(three, demo_kg, b, MinerConfig(), BudgetConfig(), seed=13, workers=3)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() == (GOLDEN / "trainset_3.jsonl").read_bytes()
    rows = [json.loads(line) for line in a.read_text(encoding="utf-8").splitlines()]
    assert len(rows) == n
    for r in rows:
        assert r["meta"]["seed"] == 13
        assert r["meta"]["lora"]["r"] == 8
        assert len(r["input"]) <= 1536
        assert split_target(r["target"]) is not None
