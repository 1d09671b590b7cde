"""Directed triplet store with bidirectional adjacency, queried undirected."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

from .corpus import normalize_name
from .errors import DataError, MalformedRow

OUT = "out"
IN = "in"


class Triplet(NamedTuple):
    head: str
    tail: str
    relation: str

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.head, self.relation, self.tail)

    def render(self) -> str:
        return f"{self.head} - {self.relation} - {self.tail}"

    def as_list(self) -> list[str]:
        return [self.head, self.relation, self.tail]


class AdjacencyEntry(NamedTuple):
    neighbor: str
    relation: str
    direction: str  # OUT when the owning node is the head


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def sort_triplets(ts: Iterable[Triplet]) -> list[Triplet]:
    return sorted(ts, key=lambda t: t.sort_key)


@dataclass(frozen=True)
class KnowledgeGraph:
    """Graph G = (nodes, triplets). Build with :meth:`from_triplets` or :func:`load_kg`."""

    triplets: frozenset[Triplet] = frozenset()
    nodes: frozenset[str] = field(init=False)
    adjacency: dict[str, tuple[AdjacencyEntry, ...]] = field(init=False, repr=False, compare=False)
    _incident: dict[str, tuple[Triplet, ...]] = field(init=False, repr=False, compare=False)
    _pairs: dict[tuple[str, str], tuple[Triplet, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for t in self.triplets:
            if not (t.head and t.tail and t.relation):
                raise DataError(f"triplet with empty field: {t!r}")
        adjacency: dict[str, list[AdjacencyEntry]] = {}
        incident: dict[str, list[Triplet]] = {}
        pairs: dict[tuple[str, str], list[Triplet]] = {}
        for t in sort_triplets(self.triplets):
            adjacency.setdefault(t.head, []).append(AdjacencyEntry(t.tail, t.relation, OUT))
            adjacency.setdefault(t.tail, []).append(AdjacencyEntry(t.head, t.relation, IN))
            incident.setdefault(t.head, []).append(t)
            if t.tail != t.head:
                incident.setdefault(t.tail, []).append(t)
            pairs.setdefault(_pair_key(t.head, t.tail), []).append(t)
        object.__setattr__(self, "nodes", frozenset(adjacency))
        object.__setattr__(self, "adjacency", {k: tuple(v) for k, v in adjacency.items()})
        object.__setattr__(self, "_incident", {k: tuple(v) for k, v in incident.items()})
        object.__setattr__(self, "_pairs", {k: tuple(v) for k, v in pairs.items()})

    @classmethod
    def from_triplets(cls, triplets: Iterable[tuple[str, str, str] | Triplet]) -> "KnowledgeGraph":
        """Build from ``Triplet`` objects or ``(head, relation, tail)`` tuples."""
        ts = set()
        for t in triplets:
            if not isinstance(t, Triplet):
                h, r, tl = t
                t = Triplet(normalize_name(h), normalize_name(tl), normalize_name(r))
            ts.add(t)
        return cls(frozenset(ts))

    def incident(self, node: str) -> tuple[Triplet, ...]:
        """Triplets with ``node`` as head or tail, in (head, relation, tail) order."""
        return self._incident.get(node, ())

    def relation_histogram(self) -> Counter:
        return Counter(t.relation for t in self.triplets)

    def stats(self) -> dict:
        hist = self.relation_histogram()
        return {
            "nodes": len(self.nodes),
            "triplets": len(self.triplets),
            "relations": {r: hist[r] for r in sorted(hist)},
        }


def load_kg(path: str | Path) -> KnowledgeGraph:
    """Read ``head<TAB>relation<TAB>tail`` rows; duplicate rows collapse."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise MalformedRow(lineno)
            head, rel, tail = (normalize_name(c) for c in cols)
            if not (head and rel and tail):
                raise MalformedRow(lineno, "empty field")
            rows.append(Triplet(head, tail, rel))
    return KnowledgeGraph(frozenset(rows))


def triplets_between(g: KnowledgeGraph, a: str, b: str) -> set[Triplet]:
    return set(g._pairs.get(_pair_key(normalize_name(a), normalize_name(b)), ()))


@dataclass(frozen=True)
class NeighborhoodView:
    seed_entities: frozenset[str]
    nodes: frozenset[str]
    triplets: frozenset[Triplet]

    @property
    def relations(self) -> Counter:
        """Relation instances R_E, counted by relation name."""
        return Counter(t.relation for t in self.triplets)


def neighborhood(g: KnowledgeGraph, seeds: Iterable[str]) -> NeighborhoodView:
    seeds = frozenset(normalize_name(s) for s in seeds)
    ts: set[Triplet] = set()
    for s in seeds:
        ts.update(g.incident(s))
    nodes = frozenset(n for t in ts for n in (t.head, t.tail))
    return NeighborhoodView(seeds, nodes, frozenset(ts))
