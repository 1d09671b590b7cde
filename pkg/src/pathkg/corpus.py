"""Corpus data model, entity lexicon and dictionary-based entity annotation.

Lexicon file: UTF-8 TSV ``surface<TAB>canonical<TAB>type``.
Corpus file: JSON lines, one dialogue per line::

    {"id": "d1", "split": "train", "turns": [
        {"role": "patient", "text": "...",
         "entities": [{"name": "胃痛", "type": "symptom", "state": "pos"}],
         "actions": ["Inquire"]}]}
"""

from __future__ import annotations

import enum
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import (
    DataError,
    DuplicateSurface,
    MalformedRow,
    PatientHasAction,
    UnknownAction,
    UnknownEntityType,
    UnknownRole,
)

KAMED_PLACEHOLDER = "The image/voice is not available for privacy concern"


def normalize_name(s: str) -> str:
    """NFC-normalize and trim; used wherever names are compared across sources."""
    return unicodedata.normalize("NFC", s).strip()


class EntityType(enum.Enum):
    DISEASE = "disease"
    SYMPTOM = "symptom"
    MEDICINE = "medicine"
    EXAMINATION = "examination"
    ATTRIBUTE = "attribute"

    @classmethod
    def parse(cls, s: str) -> "EntityType":
        try:
            return cls(s.strip().lower())
        except ValueError:
            raise UnknownEntityType(f"unknown entity type {s!r}") from None

    def __str__(self) -> str:
        return self.value


class EntityState(enum.Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"
    UNKNOWN = "unk"


class Role(enum.Enum):
    PATIENT = "patient"
    DOCTOR = "doctor"

    @classmethod
    def parse(cls, s: str) -> "Role":
        try:
            return cls(str(s).strip().lower())
        except ValueError:
            raise UnknownRole(f"unknown role {s!r}") from None


class Split(enum.Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"

    @classmethod
    def parse(cls, s: str) -> "Split":
        s = str(s).strip().lower()
        if s in ("dev", "validation", "val"):
            s = "valid"
        try:
            return cls(s)
        except ValueError:
            raise DataError(f"unknown split {s!r}") from None


class PhysicianAction(enum.Enum):
    """The seven SOAP-derived physician actions, in declaration order."""

    CHITCHAT = "Chitchat"
    INFORM = "Inform"
    INQUIRE = "Inquire"
    PROVIDE_DAILY_PRECAUTION = "ProvideDailyPrecaution"
    STATE_REQUIRED_MEDICAL_TEST = "StateRequiredMedicalTest"
    MAKE_DIAGNOSIS = "MakeDiagnosis"
    PRESCRIBE_MEDICATIONS = "PrescribeMedications"

    @property
    def label(self) -> str:
        return ACTION_LABELS[self]

    @classmethod
    def parse(cls, s: str) -> "PhysicianAction":
        key = _action_key(s)
        try:
            return _ACTION_LOOKUP[key]
        except KeyError:
            raise UnknownAction(f"unknown physician action {s!r}") from None


# Training and inference must render actions identically; bump the version on any edit.
ACTION_LABELS_VERSION = "action-labels/v1"
ACTION_LABELS: Mapping[PhysicianAction, str] = MappingProxyType(
    {
        PhysicianAction.CHITCHAT: "闲聊",
        PhysicianAction.INFORM: "告知",
        PhysicianAction.INQUIRE: "问诊",
        PhysicianAction.PROVIDE_DAILY_PRECAUTION: "注意事项",
        PhysicianAction.STATE_REQUIRED_MEDICAL_TEST: "建议检查",
        PhysicianAction.MAKE_DIAGNOSIS: "诊断",
        PhysicianAction.PRESCRIBE_MEDICATIONS: "开药",
    }
)


def _action_key(s: str) -> str:
    return "".join(ch for ch in str(s).strip().lower() if ch not in " _-")


_ACTION_LOOKUP: dict[str, PhysicianAction] = {}
for _a in PhysicianAction:
    _ACTION_LOOKUP[_action_key(_a.value)] = _a
    _ACTION_LOOKUP[_action_key(_a.name)] = _a
    _ACTION_LOOKUP[_a.label] = _a
_ACTION_LOOKUP["statearequiredmedicaltest"] = PhysicianAction.STATE_REQUIRED_MEDICAL_TEST
_ACTION_LOOKUP["makeadiagnosis"] = PhysicianAction.MAKE_DIAGNOSIS
del _a


@dataclass(frozen=True)
class EntityMention:
    canonical: str
    etype: EntityType
    state: EntityState | None = None

    def __post_init__(self):
        if not self.canonical:
            raise DataError("entity mention with empty canonical name")


@dataclass(frozen=True)
class Utterance:
    role: Role
    text: str
    entities: tuple[EntityMention, ...] = ()
    actions: tuple[PhysicianAction, ...] = ()

    def __post_init__(self):
        if self.role is Role.PATIENT and self.actions:
            raise PatientHasAction("patient utterance carries physician actions")
        names = [e.canonical for e in self.entities]
        if len(names) != len(set(names)):
            raise DataError("duplicate canonical entity within one utterance")

    @property
    def entity_names(self) -> list[str]:
        return [e.canonical for e in self.entities]


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Utterance, ...]
    split: Split = Split.TRAIN

    def __post_init__(self):
        if not self.turns:
            raise DataError(f"dialogue {self.id!r} has no turns")
        for i, u in enumerate(self.turns):
            expected = Role.PATIENT if i % 2 == 0 else Role.DOCTOR
            if u.role is not expected:
                raise DataError(f"dialogue {self.id!r}: turn {i} breaks patient/doctor alternation")


class _Trie:
    __slots__ = ("root",)
    _END = ""  # surfaces are non-empty, so the empty key is free as a terminal marker

    def __init__(self, words: Iterable[str]):
        self.root: dict = {}
        for w in words:
            node = self.root
            for ch in w:
                node = node.setdefault(ch, {})
            node[self._END] = w

    def longest_at(self, text: str, start: int) -> str | None:
        node = self.root
        best = None
        for i in range(start, len(text)):
            node = node.get(text[i])
            if node is None:
                break
            if self._END in node:
                best = node[self._END]
        return best


@dataclass(frozen=True)
class Lexicon:
    """Surface form -> (canonical name, entity type)."""

    entries: Mapping[str, tuple[str, EntityType]] = field(default_factory=dict)
    _trie: _Trie = field(init=False, repr=False, compare=False)
    _types: Mapping[str, EntityType] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        types: dict[str, EntityType] = {}
        for surface, (canonical, etype) in self.entries.items():
            if not surface:
                raise DataError("empty surface form in lexicon")
            prev = types.setdefault(canonical, etype)
            if prev is not etype:
                raise DataError(f"canonical {canonical!r} has conflicting types {prev} and {etype}")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        object.__setattr__(self, "_types", MappingProxyType(types))
        object.__setattr__(self, "_trie", _Trie(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def canonicals(self) -> frozenset[str]:
        return frozenset(self._types)

    def type_of(self, canonical: str) -> EntityType | None:
        return self._types.get(canonical)

    def lookup(self, name: str) -> str | None:
        """Canonical name for an exact canonical or surface string, else None."""
        name = normalize_name(name)
        if name in self._types:
            return name
        hit = self.entries.get(name)
        return hit[0] if hit else None


def load_lexicon(path: str | Path) -> Lexicon:
    entries: dict[str, tuple[str, EntityType]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise MalformedRow(lineno)
            surface, canonical, etype = (normalize_name(c) for c in cols)
            if not surface or not canonical:
                raise MalformedRow(lineno, "empty field")
            if surface in entries:
                raise DuplicateSurface(f"line {lineno}: duplicate surface {surface!r}")
            entries[surface] = (canonical, EntityType.parse(etype))
    return Lexicon(entries)


def find_entity_spans(text: str, lex: Lexicon) -> list[tuple[int, int, str]]:
    """Leftmost-longest dictionary matches as ``(start, end, surface)``; non-overlapping."""
    spans = []
    i = 0
    n = len(text)
    while i < n:
        hit = lex._trie.longest_at(text, i)
        if hit is None:
            i += 1
        else:
            spans.append((i, i + len(hit), hit))
            i += len(hit)
    return spans


def annotate_entities(text: str, lex: Lexicon) -> list[EntityMention]:
    seen: set[str] = set()
    out = []
    for _, _, surface in find_entity_spans(text, lex):
        canonical, etype = lex.entries[surface]
        if canonical not in seen:
            seen.add(canonical)
            out.append(EntityMention(canonical, etype))
    return out


def _parse_gold_entity(obj) -> EntityMention:
    if not isinstance(obj, dict) or "name" not in obj:
        raise DataError(f"malformed entity annotation {obj!r}")
    state = obj.get("state")
    return EntityMention(
        canonical=normalize_name(str(obj["name"])),
        etype=EntityType.parse(str(obj.get("type", ""))),
        state=EntityState(state) if state is not None else None,
    )


def _dedup(mentions: Iterable[EntityMention]) -> tuple[EntityMention, ...]:
    seen: set[str] = set()
    out = []
    for m in mentions:
        if m.canonical not in seen:
            seen.add(m.canonical)
            out.append(m)
    return tuple(out)


def _merge_same_role(turns: list[Utterance]) -> list[Utterance]:
    merged: list[Utterance] = []
    for u in turns:
        if merged and merged[-1].role is u.role:
            prev = merged[-1]
            text = " ".join(t for t in (prev.text, u.text) if t)
            actions = tuple(dict.fromkeys(prev.actions + u.actions))
            merged[-1] = Utterance(prev.role, text, _dedup(prev.entities + u.entities), actions)
        else:
            merged.append(u)
    # alternation starts with the patient; a leading doctor greeting has no inquiry to answer
    while merged and merged[0].role is Role.DOCTOR:
        merged.pop(0)
    return merged


def parse_dialogue(record: dict, lex: Lexicon | None, respect_gold: bool = True) -> Dialogue:
    if not isinstance(record, dict) or "turns" not in record:
        raise DataError("dialogue record must be an object with a 'turns' list")
    turns = []
    for t in record["turns"]:
        role = Role.parse(t.get("role", ""))
        text = normalize_name(str(t.get("text", "")))
        actions = tuple(PhysicianAction.parse(a) for a in t.get("actions") or ())
        if role is Role.PATIENT and actions:
            raise PatientHasAction(f"dialogue {record.get('id')!r}: patient turn carries actions")
        if respect_gold and t.get("entities") is not None:
            entities = _dedup(_parse_gold_entity(e) for e in t["entities"])
        else:
            entities = tuple(annotate_entities(text, lex)) if lex is not None else ()
        if not (respect_gold and "actions" in t):
            actions = ()
        turns.append(Utterance(role, text, entities, tuple(dict.fromkeys(actions))))
    turns = _merge_same_role(turns)
    return Dialogue(
        id=str(record.get("id", "")),
        turns=tuple(turns),
        split=Split.parse(record.get("split", "train")),
    )


def load_corpus(path: str | Path, lex: Lexicon | None, respect_gold: bool = True) -> list[Dialogue]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            out.append(parse_dialogue(record, lex, respect_gold))
    return out


def dialogue_to_record(d: Dialogue) -> dict:
    turns = []
    for u in d.turns:
        ents = []
        for e in u.entities:
            ent = {"name": e.canonical, "type": e.etype.value}
            if e.state is not None:
                ent["state"] = e.state.value
            ents.append(ent)
        turn = {"role": u.role.value, "text": u.text, "entities": ents}
        if u.role is Role.DOCTOR:
            turn["actions"] = [a.value for a in u.actions]
        turns.append(turn)
    return {"id": d.id, "split": d.split.value, "turns": turns}


def dump_corpus(dialogues: Iterable[Dialogue], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in dialogues:
            f.write(json.dumps(dialogue_to_record(d), ensure_ascii=False) + "\n")


def filter_kamed_multimodal(
    dialogues: list[Dialogue], placeholder: str = KAMED_PLACEHOLDER
) -> tuple[list[Dialogue], int]:
    """Drop dialogues in which any turn contains the multimodal placeholder."""
    kept = [d for d in dialogues if not any(placeholder in u.text for u in d.turns)]
    return kept, len(dialogues) - len(kept)


def eligible_eval_turns(d: Dialogue) -> list[int]:
    """Doctor turns with at least one gold entity and a preceding patient turn."""
    out = []
    seen_patient = False
    for i, u in enumerate(d.turns):
        if u.role is Role.PATIENT:
            seen_patient = True
        elif u.entities and seen_patient:
            out.append(i)
    return out
