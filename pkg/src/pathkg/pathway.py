"""Clinical pathway encoding of utterances.

Patient turns render as ``[ENT] e1、e2 [TXT] text`` and doctor turns as
``[ENT] ... [ACT] a1、a2 [TXT] text``; empty segments are left out.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import ACTION_LABELS, PhysicianAction, Role, Utterance
from .errors import DataError, RoleMismatch, UnknownAction

ENT = "[ENT]"
ACT = "[ACT]"
TXT = "[TXT]"
SEP = "、"


@dataclass(frozen=True)
class EncodedUtterance:
    role: Role
    rendered: str
    entities_used: tuple[str, ...] = ()
    actions_used: tuple[PhysicianAction, ...] = ()


def _render(entities, actions, text: str) -> str:
    parts = []
    if entities:
        parts.append(f"{ENT} {SEP.join(entities)}")
    if actions:
        parts.append(f"{ACT} {SEP.join(ACTION_LABELS[a] for a in actions)}")
    parts.append(f"{TXT} {text}")
    return " ".join(parts)


def encode_patient(u: Utterance) -> EncodedUtterance:
    if u.role is not Role.PATIENT:
        raise RoleMismatch("encode_patient expects a patient utterance")
    names = tuple(u.entity_names)
    return EncodedUtterance(Role.PATIENT, _render(names, (), u.text), names)


def encode_doctor(u: Utterance) -> EncodedUtterance:
    if u.role is not Role.DOCTOR:
        raise RoleMismatch("encode_doctor expects a doctor utterance")
    for a in u.actions:
        if a not in ACTION_LABELS:
            raise UnknownAction(f"no label for action {a!r}")
    names = tuple(u.entity_names)
    return EncodedUtterance(Role.DOCTOR, _render(names, u.actions, u.text), names, tuple(u.actions))


def encode(u: Utterance) -> EncodedUtterance:
    return encode_patient(u) if u.role is Role.PATIENT else encode_doctor(u)


def parse_encoded(rendered: str) -> tuple[list[str], list[PhysicianAction], str]:
    """Inverse of the encoders: recover (entities, actions, text)."""
    head, marker, text = rendered.partition(f"{TXT} ")
    if not marker:
        raise DataError(f"not an encoded utterance: {rendered[:40]!r}")
    head = head.rstrip()
    entities: list[str] = []
    actions: list[PhysicianAction] = []
    if head.startswith(ENT):
        ent_part, _, act_part = head[len(ENT):].partition(f" {ACT} ")
        entities = [e for e in ent_part.strip().split(SEP) if e]
        if act_part:
            actions = [PhysicianAction.parse(a) for a in act_part.strip().split(SEP)]
    elif head.startswith(ACT):
        actions = [PhysicianAction.parse(a) for a in head[len(ACT):].strip().split(SEP)]
    elif head:
        raise DataError(f"unexpected prefix in encoded utterance: {head!r}")
    return entities, actions, text


@dataclass(frozen=True)
class DialogueState:
    """Immutable snapshot of the encoded history and the cumulative entity set."""

    cumulative_entities: tuple[str, ...] = ()
    encoded_history: tuple[EncodedUtterance, ...] = ()

    def advance(self, u: Utterance) -> "DialogueState":
        return advance(self, u)


def advance(state: DialogueState, u: Utterance) -> DialogueState:
    enc = encode(u)
    cumulative = tuple(dict.fromkeys(state.cumulative_entities + enc.entities_used))
    return DialogueState(cumulative, state.encoded_history + (enc,))


def encode_history(turns) -> DialogueState:
    state = DialogueState()
    for u in turns:
        state = advance(state, u)
    return state
