"""Character-level BLEU/ROUGE and entity precision/recall/F1 with macro and micro averaging."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import EvalError, IneligibleSample

_CJK_RANGES = (
    (0x2E80, 0x2FDF),  # radicals
    (0x3000, 0x303F),  # CJK symbols and punctuation
    (0x3040, 0x30FF),  # kana
    (0x3100, 0x312F),
    (0x31A0, 0x31FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),  # hangul syllables
    (0xF900, 0xFAFF),
    (0xFE30, 0xFE4F),
    (0xFF00, 0xFFEF),  # full-width forms, incl. Chinese punctuation
    (0x20000, 0x3134F),
)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> list[str]:
    """One token per CJK codepoint; maximal non-CJK, non-space runs are single tokens."""
    tokens: list[str] = []
    run: list[str] = []
    for ch in text:
        if ch.isspace() or is_cjk(ch):
            if run:
                tokens.append("".join(run))
                run = []
            if not ch.isspace():
                tokens.append(ch)
        else:
            run.append(ch)
    if run:
        tokens.append("".join(run))
    return tokens


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _overlap(cand: Counter, ref: Counter) -> int:
    return sum(min(c, ref[g]) for g, c in cand.items())


def bleu_n(candidate: Sequence[str], reference: Sequence[str], n: int = 4) -> float:
    """Sentence BLEU up to order ``n``: clipped precisions, add-one smoothing above
    unigrams, uniform geometric mean, brevity penalty."""
    if n < 1:
        raise ValueError("BLEU order must be >= 1")
    if not candidate:
        return 0.0
    log_sum = 0.0
    for k in range(1, n + 1):
        cand = ngrams(candidate, k)
        matches = _overlap(cand, ngrams(reference, k))
        total = sum(cand.values())
        if k == 1:
            if matches == 0:
                return 0.0
            p = matches / total
        else:
            p = (matches + 1) / (total + 1)
        log_sum += math.log(p)
    bp = math.exp(min(0.0, 1 - len(reference) / len(candidate)))
    return bp * math.exp(log_sum / n)


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1) -> float:
    ref = ngrams(reference, n)
    cand = ngrams(candidate, n)
    if not ref or not cand:
        return 0.0
    hit = _overlap(cand, ref)
    return _f1(hit / sum(cand.values()), hit / sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str], beta: float = 1.0) -> float:
    if not reference or not candidate:
        return 0.0
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return (1 + beta**2) * p * r / (r + beta**2 * p)


@dataclass(frozen=True)
class EntityScore:
    recall: float
    precision: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "EntityScore":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        return cls(r, p, _f1(p, r), tp, fp, fn)

    def scaled(self) -> dict:
        return {"recall": _pct(self.recall), "precision": _pct(self.precision), "f1": _pct(self.f1)}


def entity_prf(gold: Iterable[str], pred: Iterable[str]) -> EntityScore:
    gold, pred = set(gold), set(pred)
    if not gold:
        raise IneligibleSample("gold entity set is empty")
    tp = len(gold & pred)
    return EntityScore.from_counts(tp, len(pred) - tp, len(gold) - tp)


METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class SampleScore:
    dialogue_id: str
    turn: int
    metrics: dict
    entity: EntityScore

    def to_json(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "turn": self.turn,
            **{k: self.metrics[k] for k in METRIC_NAMES},
            "entity": {"recall": self.entity.recall, "precision": self.entity.precision,
                       "f1": self.entity.f1, "tp": self.entity.tp, "fp": self.entity.fp,
                       "fn": self.entity.fn},
        }


def score_sample(
    dialogue_id: str,
    turn: int,
    candidate: str,
    reference: str,
    gold_entities: Iterable[str],
    pred_entities: Iterable[str],
    rouge_l_beta: float = 1.0,
) -> SampleScore:
    c, r = tokenize(candidate), tokenize(reference)
    metrics = {f"bleu{n}": bleu_n(c, r, n) for n in range(1, 5)}
    metrics["rouge1"] = rouge_n(c, r, 1)
    metrics["rouge2"] = rouge_n(c, r, 2)
    metrics["rougeL"] = rouge_l(c, r, rouge_l_beta)
    return SampleScore(dialogue_id, turn, metrics, entity_prf(gold_entities, pred_entities))


def _pct(x: float) -> float:
    return round(100 * x, 2)


@dataclass(frozen=True)
class EvalReport:
    per_sample: tuple[SampleScore, ...]
    aggregate: dict
    entity_macro: EntityScore
    entity_micro: EntityScore
    sample_count: int
    missing: tuple[tuple[str, int], ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "aggregate": {
                **{k: _pct(self.aggregate[k]) for k in METRIC_NAMES},
                "entity_macro": self.entity_macro.scaled(),
                "entity_micro": {**self.entity_micro.scaled(), "tp": self.entity_micro.tp,
                                 "fp": self.entity_micro.fp, "fn": self.entity_micro.fn},
            },
            "missing_predictions": [list(m) for m in self.missing],
            "per_sample": [s.to_json() for s in self.per_sample],
        }

    def table(self) -> str:
        m, mi = self.entity_macro, self.entity_micro
        rows = [
            ("Entity-macro Rec/Pre/F1", f"{_pct(m.recall):.2f} / {_pct(m.precision):.2f} / {_pct(m.f1):.2f}"),
            ("Entity-micro Rec/Pre/F1", f"{_pct(mi.recall):.2f} / {_pct(mi.precision):.2f} / {_pct(mi.f1):.2f}"),
            ("ROUGE-1/2/L", " / ".join(f"{_pct(self.aggregate[k]):.2f}" for k in ("rouge1", "rouge2", "rougeL"))),
            ("BLEU-1/2/3/4", " / ".join(f"{_pct(self.aggregate[f'bleu{n}']):.2f}" for n in range(1, 5))),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"samples: {self.sample_count}"]
        lines += [f"{k.ljust(width)}  {v}" for k, v in rows]
        if self.missing:
            lines.append(f"missing predictions: {len(self.missing)}")
        return "\n".join(lines) + "\n"


def aggregate(samples: Sequence[SampleScore], missing: Sequence[tuple[str, int]] = ()) -> EvalReport:
    """Macro means per-sample scores (F1 included); micro pools TP/FP/FN."""
    if not samples:
        raise EvalError("no samples to aggregate")
    n = len(samples)
    agg = {k: math.fsum(s.metrics[k] for s in samples) / n for k in METRIC_NAMES}
    macro = EntityScore(
        recall=math.fsum(s.entity.recall for s in samples) / n,
        precision=math.fsum(s.entity.precision for s in samples) / n,
        f1=math.fsum(s.entity.f1 for s in samples) / n,
    )
    micro = EntityScore.from_counts(
        sum(s.entity.tp for s in samples),
        sum(s.entity.fp for s in samples),
        sum(s.entity.fn for s in samples),
    )
    return EvalReport(tuple(samples), agg, macro, micro, n, tuple(missing))


def embedding_similarity(
    candidate: str,
    reference: str,
    embed: Callable[[str], Sequence[Sequence[float]]],
) -> float:
    """Cosine of mean-pooled embeddings from an external ``embed`` function.

    This is a plain similarity hook, not BERTScore.
    """
    def pooled(text):
        vecs = [list(v) for v in embed(text)]
        if not vecs:
            return None
        return [math.fsum(col) / len(vecs) for col in zip(*vecs)]

    a, b = pooled(candidate), pooled(reference)
    if a is None or b is None:
        return 0.0
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return math.fsum(x * y for x, y in zip(a, b)) / (na * nb)
