"""JSONL helpers and the prediction record shared by generate/evaluate/judge."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError


def dumps(obj) -> str:
    """Canonical JSON line: sorted keys, UTF-8 text kept readable."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(dumps(row) + "\n")
            n += 1
    return n


@dataclass(frozen=True)
class Prediction:
    dialogue_id: str
    turn: int
    response: str
    entities: tuple[str, ...] | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_json(cls, obj: dict) -> "Prediction":
        try:
            did, turn, response = str(obj["dialogue_id"]), int(obj["turn"]), str(obj["response"])
        except (KeyError, TypeError, ValueError):
            raise DataError(f"prediction record needs dialogue_id, turn and response: {obj!r}") from None
        ents = obj.get("entities")
        extra = {k: v for k, v in obj.items() if k not in ("dialogue_id", "turn", "response", "entities")}
        return cls(did, turn, response, tuple(ents) if ents is not None else None, extra)

    def to_json(self) -> dict:
        out = {"dialogue_id": self.dialogue_id, "turn": self.turn, "response": self.response, **self.extra}
        if self.entities is not None:
            out["entities"] = list(self.entities)
        return out


def load_predictions(path: str | Path) -> list[Prediction]:
    return [Prediction.from_json(o) for o in read_jsonl(path)]
