"""Direct and potential knowledge mining over a knowledge graph.

Direct knowledge is every triplet joining two distinct mentioned entities.
Potential knowledge picks the unmentioned neighbours that are linked most
often to the mentioned set, then pulls the triplets tying them to it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .corpus import normalize_name
from .kg import KnowledgeGraph, Triplet, neighborhood, sort_triplets, triplets_between


@dataclass(frozen=True)
class MinerConfig:
    top_n: int = 5
    max_triplets_direct: int = 30
    max_triplets_potential: int = 20

    def __post_init__(self):
        if min(self.top_n, self.max_triplets_direct, self.max_triplets_potential) < 0:
            raise ValueError("miner settings must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class KnowledgeBundle:
    direct: tuple[Triplet, ...] = ()
    potential: tuple[tuple[Triplet, str], ...] = ()
    potential_nodes: tuple[tuple[str, int], ...] = field(default=())

    @property
    def potential_triplets(self) -> list[Triplet]:
        return [t for t, _ in self.potential]

    def to_json(self) -> dict:
        return {
            "direct": [t.as_list() for t in self.direct],
            "potential": [t.as_list() + [via] for t, via in self.potential],
            "nodes": [[name, score] for name, score in self.potential_nodes],
        }


def _entity_set(entities: Iterable[str]) -> frozenset[str]:
    return frozenset(normalize_name(e) for e in entities)


def mine_direct(
    g: KnowledgeGraph, entities: Iterable[str], limit: int | None = None
) -> list[Triplet]:
    ents = _entity_set(entities)
    found = set()
    for e in ents:
        for t in g.incident(e):
            # pairs of distinct entities only; self-loops are not a relation between two mentions
            if t.head != t.tail and t.head in ents and t.tail in ents:
                found.add(t)
    out = sort_triplets(found)
    return out if limit is None else out[:limit]


def entity_pair_freq(g: KnowledgeGraph, k: str, e: str) -> int:
    return len(triplets_between(g, k, e))


def rank_potential_nodes(g: KnowledgeGraph, entities: Iterable[str]) -> list[tuple[str, int]]:
    """Every candidate node with positive score, best first.

    Order: higher frequency sum, then more distinct connected entities,
    then node name.
    """
    ents = _entity_set(entities)
    score: dict[str, int] = {}
    linked: dict[str, set[str]] = {}
    for e in ents:
        for t in g.incident(e):
            k = t.tail if t.head == e else t.head
            if k in ents:
                continue
            score[k] = score.get(k, 0) + 1
            linked.setdefault(k, set()).add(e)
    ranked = sorted(score, key=lambda k: (-score[k], -len(linked[k]), k))
    return [(k, score[k]) for k in ranked if score[k] > 0]


def mine_potential_nodes(
    g: KnowledgeGraph, entities: Iterable[str], cfg: MinerConfig = MinerConfig()
) -> list[tuple[str, int]]:
    if cfg.top_n == 0:
        return []
    return rank_potential_nodes(g, entities)[: cfg.top_n]


def mine_potential_triplets(
    g: KnowledgeGraph,
    entities: Iterable[str],
    potential: Sequence[str | tuple[str, int]],
    limit: int | None = None,
) -> list[tuple[Triplet, str]]:
    ents = _entity_set(entities)
    if not ents:
        return []
    out = []
    seen: set[Triplet] = set()
    for item in potential:
        k = item if isinstance(item, str) else item[0]
        if k in ents:
            continue
        hits = [t for t in g.incident(k) if (t.tail if t.head == k else t.head) in ents]
        for t in sort_triplets(hits):
            if t not in seen:
                seen.add(t)
                out.append((t, k))
    return out if limit is None else out[:limit]


def mine(g: KnowledgeGraph, entities: Iterable[str], cfg: MinerConfig = MinerConfig()) -> KnowledgeBundle:
    ents = _entity_set(entities)
    if not ents:
        return KnowledgeBundle()
    direct = mine_direct(g, ents, cfg.max_triplets_direct)
    nodes = mine_potential_nodes(g, ents, cfg)
    # a triplet joining a non-entity to an entity can never be direct knowledge,
    # so filtering against ``direct`` is a guard rather than a live rule
    direct_set = set(direct)
    potential = [
        (t, via)
        for t, via in mine_potential_triplets(g, ents, nodes)
        if t not in direct_set
    ][: cfg.max_triplets_potential]
    return KnowledgeBundle(tuple(direct), tuple(potential), tuple(nodes))
