"""Prompt assembly under a token budget and supervised training records.

A prompt is laid out as instruction, knowledge (direct then potential
triplets), encoded history (oldest first) and the current patient turn.
When it does not fit, content is dropped in a fixed order: potential
triplets from the lowest rank up, direct triplets from the last, then the
oldest history turns. The instruction and current turn are never dropped.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from string import Template
from typing import Callable, Iterable, Iterator, Sequence

from .corpus import ACTION_LABELS, ACTION_LABELS_VERSION, Dialogue, PhysicianAction, Role, Utterance
from .errors import BudgetExhausted, ConfigError, RoleMismatch
from .kg import KnowledgeGraph, Triplet
from .miner import KnowledgeBundle, MinerConfig, mine
from .pathway import DialogueState, EncodedUtterance, advance, encode_patient

INSTRUCTION_VERSION = "instruction/v1"

ENTITIES = "[ENTITIES]"
ACTIONS = "[ACTIONS]"
RESPONSE = "[RESPONSE]"
NONE_MARK = "无"
ITEM_SEP = "、"

KNOWLEDGE_HEADER = "### 医学知识"
DIRECT_HEADER = "直接知识："
POTENTIAL_HEADER = "潜在知识："
HISTORY_HEADER = "### 历史对话"
CURRENT_HEADER = "### 当前患者发言"
ROLE_PREFIX = {Role.PATIENT: "患者：", Role.DOCTOR: "医生："}

# Passed through to downstream trainers; nothing here trains a model.
LORA_PASSTHROUGH = {
    "r": 8,
    "alpha": 32,
    "dropout": 0.1,
    "target_modules": ["query_key_value", "dense", "dense_h_to_4h", "dense_4h_to_h"],
}
TRAINER_PASSTHROUGH = {
    "base_model": "ChatGLM3-6B",
    "batch_size": 64,
    "epochs": 20,
    "optimizer": "AdamW",
    "lr_start": 5e-4,
    "lr_end": 5e-5,
}


def char_count(text: str) -> int:
    return len(text)


ESTIMATORS: dict[str, Callable[[str], int]] = {"chars": char_count}


@lru_cache(maxsize=None)
def default_instruction() -> str:
    raw = resources.files("pathkg").joinpath("assets/instruction_v1.txt").read_text(encoding="utf-8")
    labels = ITEM_SEP.join(ACTION_LABELS[a] for a in PhysicianAction)
    return Template(raw).substitute(action_labels=labels).strip()


@dataclass(frozen=True)
class BudgetConfig:
    max_input_tokens: int = 1536
    max_output_tokens: int = 256
    estimator: str | Callable[[str], int] = "chars"

    def __post_init__(self):
        if self.max_input_tokens <= 0 or self.max_output_tokens <= 0:
            raise ConfigError("token budgets must be positive")
        if isinstance(self.estimator, str) and self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown token estimator {self.estimator!r}")

    def count(self, text: str) -> int:
        fn = ESTIMATORS[self.estimator] if isinstance(self.estimator, str) else self.estimator
        return fn(text)

    def to_dict(self) -> dict:
        name = self.estimator if isinstance(self.estimator, str) else getattr(self.estimator, "__name__", "custom")
        return {
            "max_input_tokens": self.max_input_tokens,
            "max_output_tokens": self.max_output_tokens,
            "estimator": name,
        }


@dataclass(frozen=True)
class PromptRecord:
    dialogue_id: str
    turn_index: int
    input_text: str
    budget_used: int
    knowledge_included: tuple[int, int]
    truncated_turns: int
    dropped_knowledge: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class TrainRecord:
    input_text: str
    target_text: str


def render_prompt(
    instruction: str,
    direct: Sequence[Triplet],
    potential: Sequence[Triplet],
    history: Sequence[EncodedUtterance],
    current: EncodedUtterance,
) -> str:
    blocks = [instruction]
    if direct or potential:
        lines = [KNOWLEDGE_HEADER]
        if direct:
            lines.append(DIRECT_HEADER)
            lines.extend(t.render() for t in direct)
        if potential:
            lines.append(POTENTIAL_HEADER)
            lines.extend(t.render() for t in potential)
        blocks.append("\n".join(lines))
    if history:
        blocks.append("\n".join([HISTORY_HEADER] + [ROLE_PREFIX[h.role] + h.rendered for h in history]))
    blocks.append(f"{CURRENT_HEADER}\n{current.rendered}")
    return "\n\n".join(blocks)


def build_prompt(
    state: DialogueState,
    bundle: KnowledgeBundle,
    current: EncodedUtterance,
    cfg: BudgetConfig = BudgetConfig(),
    *,
    dialogue_id: str = "",
    turn_index: int = 0,
    instruction: str | None = None,
) -> PromptRecord:
    """Render the prompt for replying to ``current`` given the prior ``state``."""
    if current.role is not Role.PATIENT:
        raise RoleMismatch("the current utterance must be a patient encoding")
    instruction = default_instruction() if instruction is None else instruction
    direct = list(bundle.direct)
    potential = bundle.potential_triplets
    history = list(state.encoded_history)

    floor = render_prompt(instruction, [], [], [], current)
    if cfg.count(floor) > cfg.max_input_tokens:
        raise BudgetExhausted(
            f"instruction and current turn need {cfg.count(floor)} tokens, budget is {cfg.max_input_tokens}"
        )

    n_pot, n_dir, h0 = len(potential), len(direct), 0
    while True:
        text = render_prompt(instruction, direct[:n_dir], potential[:n_pot], history[h0:], current)
        used = cfg.count(text)
        if used <= cfg.max_input_tokens:
            break
        if n_pot:
            n_pot -= 1
        elif n_dir:
            n_dir -= 1
        else:
            h0 += 1
    return PromptRecord(
        dialogue_id=dialogue_id,
        turn_index=turn_index,
        input_text=text,
        budget_used=used,
        knowledge_included=(n_dir, n_pot),
        truncated_turns=h0,
        dropped_knowledge=(len(direct) - n_dir, len(potential) - n_pot),
    )


def render_target(entities: Iterable[str], actions: Iterable[PhysicianAction], response: str) -> str:
    ents = ITEM_SEP.join(entities) or NONE_MARK
    acts = ITEM_SEP.join(ACTION_LABELS[a] for a in actions) or NONE_MARK
    return f"{ENTITIES} {ents} {ACTIONS} {acts} {RESPONSE} {response}"


def split_target(raw: str) -> tuple[str, str, str] | None:
    """Split on the three target markers; None unless all occur in order."""
    i = raw.find(ENTITIES)
    j = raw.find(ACTIONS)
    k = raw.find(RESPONSE)
    if i < 0 or j < 0 or k < 0 or not (i < j < k):
        return None
    return (
        raw[i + len(ENTITIES):j].strip(),
        raw[j + len(ACTIONS):k].strip(),
        raw[k + len(RESPONSE):].strip(),
    )


def build_train_record(prompt: PromptRecord, gold: Utterance) -> TrainRecord:
    if gold.role is not Role.DOCTOR:
        raise RoleMismatch("training targets are doctor utterances")
    return TrainRecord(prompt.input_text, render_target(gold.entity_names, gold.actions, gold.text))


@dataclass(frozen=True)
class TurnContext:
    """Everything known when the doctor's turn ``turn_index`` is to be produced."""

    dialogue_id: str
    turn_index: int
    history: DialogueState
    current: EncodedUtterance
    entities: tuple[str, ...]
    bundle: KnowledgeBundle
    gold: Utterance


def turn_contexts(d: Dialogue, kg: KnowledgeGraph, miner_cfg: MinerConfig = MinerConfig()) -> Iterator[TurnContext]:
    """One context per doctor turn that follows a patient turn."""
    state = DialogueState()
    before_last = state
    for j, u in enumerate(d.turns):
        if u.role is Role.DOCTOR and j > 0 and d.turns[j - 1].role is Role.PATIENT:
            yield TurnContext(
                dialogue_id=d.id,
                turn_index=j,
                history=before_last,
                current=encode_patient(d.turns[j - 1]),
                entities=state.cumulative_entities,
                bundle=mine(kg, state.cumulative_entities, miner_cfg),
                gold=u,
            )
        before_last = state
        state = advance(state, u)


def prompt_for(ctx: TurnContext, budget: BudgetConfig, instruction: str | None = None) -> PromptRecord:
    return build_prompt(
        ctx.history, ctx.bundle, ctx.current, budget,
        dialogue_id=ctx.dialogue_id, turn_index=ctx.turn_index, instruction=instruction,
    )


def trainset_meta(miner_cfg: MinerConfig, budget: BudgetConfig, seed: int | None) -> dict:
    return {
        "miner": miner_cfg.to_dict(),
        "budget": budget.to_dict(),
        "lora": LORA_PASSTHROUGH,
        "trainer": TRAINER_PASSTHROUGH,
        "templates": {"instruction": INSTRUCTION_VERSION, "action_labels": ACTION_LABELS_VERSION},
        "seed": seed,
    }


def _dialogue_records(d, kg, miner_cfg, budget, instruction, base_meta) -> list[str]:
    lines = []
    for ctx in turn_contexts(d, kg, miner_cfg):
        rec = build_train_record(prompt_for(ctx, budget, instruction), ctx.gold)
        meta = {"dialogue_id": d.id, "turn": ctx.turn_index, "split": d.split.value, **base_meta}
        lines.append(json.dumps({"input": rec.input_text, "target": rec.target_text, "meta": meta},
                                ensure_ascii=False, sort_keys=True))
    return lines


def emit_trainset(
    corpus: Sequence[Dialogue],
    kg: KnowledgeGraph,
    out: str | Path,
    miner_cfg: MinerConfig = MinerConfig(),
    budget: BudgetConfig = BudgetConfig(),
    *,
    seed: int | None = None,
    instruction: str | None = None,
    workers: int = 1,
) -> int:
    """Write one JSONL training record per answerable doctor turn; returns the count."""
    base_meta = trainset_meta(miner_cfg, budget, seed)
    count = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool, open(out, "w", encoding="utf-8") as f:
        for lines in pool.map(
            lambda d: _dialogue_records(d, kg, miner_cfg, budget, instruction, base_meta), corpus
        ):
            for line in lines:
                f.write(line + "\n")
            count += len(lines)
    return count
