"""LLM-as-judge scoring of hallucination and consistency (both 0-10)."""

from __future__ import annotations

import json
import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Callable, Sequence

from .corpus import Dialogue, Role, Utterance, eligible_eval_turns
from .errors import BudgetExhausted, ConfigError, JudgeError
from .gateway import Backend, EndpointConfig, GenerationRequest, RequestPool, generate, make_backend
from .prompts import BudgetConfig
from .records import Prediction

JUDGE_TEMPLATE_VERSION = "judge/v1"
NO_HISTORY = "(no prior turns)"
_RETRY_SUFFIX = "\n\nReturn ONLY the JSON object described above, with integer scores from 0 to 10."
_SPEAKER = {Role.PATIENT: "Patient", Role.DOCTOR: "Physician"}


@lru_cache(maxsize=None)
def _template() -> Template:
    raw = resources.files("pathkg").joinpath("assets/judge_v1.txt").read_text(encoding="utf-8")
    return Template(raw)


@dataclass(frozen=True)
class JudgeConfig:
    sample_size: int = 500
    seed: int = 0
    endpoint: EndpointConfig = field(default_factory=lambda: EndpointConfig(kind="mock-judge"))
    max_retries: int = 1
    budget: BudgetConfig = field(default_factory=BudgetConfig)

    def __post_init__(self):
        if self.sample_size <= 0:
            raise ConfigError("judge sample_size must be positive")
        if self.max_retries < 0:
            raise ConfigError("judge max_retries must be >= 0")


@dataclass(frozen=True)
class JudgeVerdict:
    hallucination: int
    consistency: int
    reasoning: str
    valid: bool
    raw: str = ""

    def to_json(self) -> dict:
        return {"hallucination": self.hallucination, "consistency": self.consistency,
                "reasoning": self.reasoning, "valid": self.valid, "raw": self.raw}


def _render(history: Sequence[Utterance], generated: str, gold: str) -> str:
    lines = "\n".join(f"{_SPEAKER[u.role]}: {u.text}" for u in history) or NO_HISTORY
    return _template().substitute(history=lines, generated=generated, gold=gold).strip()


def build_judge_prompt(
    history: Sequence[Utterance], generated: str, gold: str, budget: BudgetConfig | None = None
) -> str:
    """Fill the judge template; with ``budget`` the oldest turns are dropped until it fits."""
    history = list(history)
    text = _render(history, generated, gold)
    if budget is None:
        return text
    start = 0
    while budget.count(text) > budget.max_input_tokens:
        if start >= len(history):
            raise BudgetExhausted("judge prompt exceeds the budget even without history")
        start += 1
        text = _render(history[start:], generated, gold)
    return text


_FENCE = re.compile(r"^```(?:json)?\s*(.*?)\s*```$", re.S)


def parse_verdict(raw: str) -> JudgeVerdict:
    text = raw.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1)
    invalid = JudgeVerdict(0, 0, "", False, raw)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return invalid
    if not isinstance(obj, dict):
        return invalid
    scores = []
    for key in ("hallucination", "consistency"):
        v = obj.get(key)
        if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 10:
            return invalid
        scores.append(v)
    reasoning = obj.get("reasoning", "")
    if not isinstance(reasoning, str):
        return invalid
    return JudgeVerdict(scores[0], scores[1], reasoning, True, raw)


def judge_one(
    prompt: str,
    cfg: JudgeConfig,
    backend: Backend | None = None,
    call: Callable[[GenerationRequest], str] | None = None,
) -> JudgeVerdict:
    """Score one prompt; unparseable output is retried ``max_retries`` times, then marked invalid."""
    if call is None:
        backend = backend if backend is not None else make_backend(cfg.endpoint)
        ep = cfg.endpoint

        def call(req):
            return generate(req, backend, ep.max_attempts, ep.base_delay)

    verdict = None
    for attempt in range(cfg.max_retries + 1):
        text = prompt if attempt == 0 else prompt + _RETRY_SUFFIX
        req = GenerationRequest(text, cfg.budget.max_output_tokens, cfg.endpoint.temperature, cfg.seed)
        verdict = parse_verdict(call(req))
        if verdict.valid:
            return verdict
    return verdict


@dataclass(frozen=True)
class JudgeSummary:
    mean_hallucination: float
    mean_consistency: float
    invalid_count: int
    sampled: tuple[tuple[str, int], ...]
    verdicts: tuple[JudgeVerdict, ...]

    def to_json(self) -> dict:
        return {
            "mean_hallucination": round(self.mean_hallucination, 2),
            "mean_consistency": round(self.mean_consistency, 2),
            "invalid_count": self.invalid_count,
            "valid_count": len(self.verdicts) - self.invalid_count,
            "sample_count": len(self.sampled),
        }


def judge_population(predictions: Sequence[Prediction], corpus: Sequence[Dialogue]):
    """Eligible (dialogue, turn, prediction) triples in corpus order."""
    by_key = {(p.dialogue_id, p.turn): p for p in predictions}
    out = []
    for d in corpus:
        for j in eligible_eval_turns(d):
            p = by_key.get((d.id, j))
            if p is not None:
                out.append((d, j, p))
    return out


def sample_indices(n: int, k: int, seed: int) -> list[int]:
    if k >= n:
        return list(range(n))
    return sorted(random.Random(seed).sample(range(n), k))


def judge_run(
    predictions: Sequence[Prediction],
    corpus: Sequence[Dialogue],
    cfg: JudgeConfig = JudgeConfig(),
    backend: Backend | None = None,
) -> JudgeSummary:
    population = judge_population(predictions, corpus)
    chosen = [population[i] for i in sample_indices(len(population), cfg.sample_size, cfg.seed)]
    pool = RequestPool.from_config(cfg.endpoint, backend)
    prompts = [
        build_judge_prompt(d.turns[:j], p.response, d.turns[j].text, cfg.budget) for d, j, p in chosen
    ]
    with ThreadPoolExecutor(max_workers=pool.max_in_flight) as ex:
        verdicts = list(ex.map(lambda pr: judge_one(pr, cfg, call=pool.call), prompts))
    valid = [v for v in verdicts if v.valid]
    if not valid:
        raise JudgeError("no valid judge verdicts")
    return JudgeSummary(
        mean_hallucination=math.fsum(v.hallucination for v in valid) / len(valid),
        mean_consistency=math.fsum(v.consistency for v in valid) / len(valid),
        invalid_count=len(verdicts) - len(valid),
        sampled=tuple((d.id, j) for d, j, _ in chosen),
        verdicts=tuple(verdicts),
    )
