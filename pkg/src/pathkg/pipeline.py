"""Corpus-level stages wired from the per-turn primitives."""

from __future__ import annotations

from typing import Sequence

from .corpus import Dialogue, Lexicon, annotate_entities, eligible_eval_turns
from .gateway import Backend, EndpointConfig, GenerationRequest, ParseMode, RequestPool, parse_structured
from .kg import KnowledgeGraph
from .metrics import EvalReport, aggregate, score_sample
from .miner import MinerConfig
from .pathway import encode_history
from .prompts import BudgetConfig, prompt_for, turn_contexts
from .records import Prediction


def mine_corpus(corpus: Sequence[Dialogue], kg: KnowledgeGraph, cfg: MinerConfig = MinerConfig()) -> list[dict]:
    rows = []
    for d in corpus:
        for ctx in turn_contexts(d, kg, cfg):
            rows.append({"dialogue_id": d.id, "turn": ctx.turn_index, **ctx.bundle.to_json()})
    return rows


def encode_corpus(corpus: Sequence[Dialogue]) -> list[dict]:
    rows = []
    for d in corpus:
        state = encode_history(d.turns)
        rows.append({
            "dialogue_id": d.id,
            "cumulative_entities": list(state.cumulative_entities),
            "turns": [
                {"role": e.role.value, "rendered": e.rendered, "entities": list(e.entities_used),
                 "actions": [a.value for a in e.actions_used]}
                for e in state.encoded_history
            ],
        })
    return rows


def generate_predictions(
    corpus: Sequence[Dialogue],
    kg: KnowledgeGraph,
    lex: Lexicon | None,
    endpoint: EndpointConfig = EndpointConfig(),
    miner_cfg: MinerConfig = MinerConfig(),
    budget: BudgetConfig = BudgetConfig(),
    seed: int = 0,
    backend: Backend | None = None,
) -> list[Prediction]:
    """One prediction per answerable doctor turn, in corpus order."""
    prompts = [prompt_for(ctx, budget) for d in corpus for ctx in turn_contexts(d, kg, miner_cfg)]
    requests = [
        GenerationRequest(p.input_text, budget.max_output_tokens, endpoint.temperature, seed) for p in prompts
    ]
    raws = RequestPool.from_config(endpoint, backend).run(requests)
    out = []
    for p, raw in zip(prompts, raws):
        parsed = parse_structured(raw, lex)
        strict = parsed.parse_mode is ParseMode.STRICT
        out.append(Prediction(
            dialogue_id=p.dialogue_id,
            turn=p.turn_index,
            response=parsed.response_text,
            entities=parsed.predicted_entities if strict else None,
            extra={
                "actions": [a.value for a in parsed.predicted_actions],
                "parse_mode": parsed.parse_mode.value,
                "raw": raw,
            },
        ))
    return out


def evaluate_predictions(
    predictions: Sequence[Prediction],
    corpus: Sequence[Dialogue],
    lex: Lexicon | None,
    rouge_l_beta: float = 1.0,
) -> EvalReport:
    """Score predictions on eligible doctor turns only.

    Predictions without an ``entities`` list are annotated from their text.
    Eligible turns lacking a prediction are listed as missing.
    """
    by_key = {(p.dialogue_id, p.turn): p for p in predictions}
    samples, missing = [], []
    for d in corpus:
        for j in eligible_eval_turns(d):
            p = by_key.get((d.id, j))
            if p is None:
                missing.append((d.id, j))
                continue
            if p.entities is not None:
                pred_ents = [lex.lookup(e) or e for e in p.entities] if lex is not None else list(p.entities)
            else:
                pred_ents = [m.canonical for m in annotate_entities(p.response, lex)] if lex is not None else []
            samples.append(score_sample(
                d.id, j, p.response, d.turns[j].text, d.turns[j].entity_names, pred_ents, rouge_l_beta
            ))
    return aggregate(samples, missing)
