"""Brute-force reference implementations used only by the tests.

They work straight off flat lists (no adjacency index, no Counter, no DP) so
they share no code path with the package.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations


def direct_oracle(triplets, entities):
    """Full scan: keep a triplet when its two ends are distinct mentioned entities."""
    ents = set(entities)
    hits = {tuple(t) for t in triplets if t[0] in ents and t[2] in ents and t[0] != t[2]}
    return sorted(hits, key=lambda t: (t[0], t[1], t[2]))


def pair_freq_oracle(triplets, k, e):
    if k == e:
        return 0
    return sum(1 for h, _, t in triplets if (h == k and t == e) or (h == e and t == k))


def potential_ranking_oracle(triplets, entities):
    ents = set(entities)
    nodes = set()
    for h, _, t in triplets:
        nodes.add(h)
        nodes.add(t)
    rows = []
    for k in nodes:
        if k in ents:
            continue
        freqs = [pair_freq_oracle(triplets, k, e) for e in ents]
        score = sum(freqs)
        if score > 0:
            rows.append((k, score, sum(1 for f in freqs if f > 0)))
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    return [(k, s) for k, s, _ in rows]


def potential_ranking_scan(triplets, entities):
    """Same ranking as :func:`potential_ranking_oracle`, accumulated in one pass over the triplet list."""
    ents = set(entities)
    score, linked = {}, {}
    for h, _, t in set(map(tuple, triplets)):
        for k, e in ((h, t), (t, h)):
            if e in ents and k not in ents:
                score[k] = score.get(k, 0) + 1
                linked.setdefault(k, set()).add(e)
    order = sorted(score, key=lambda k: (-score[k], -len(linked[k]), k))
    return [(k, score[k]) for k in order]


def potential_triplets_oracle(triplets, entities, nodes):
    ents = set(entities)
    out = []
    for k in nodes:
        if k in ents:
            continue
        mine = sorted(
            {tuple(t) for t in triplets if (t[0] == k and t[2] in ents) or (t[2] == k and t[0] in ents)},
            key=lambda t: (t[0], t[1], t[2]),
        )
        for t in mine:
            if t not in [o[0] for o in out]:
                out.append((t, k))
    return out


def _grams(seq, n):
    return [tuple(seq[i:i + n]) for i in range(len(seq) - n + 1)]


def clipped_overlap(cand, ref, n):
    c, r = _grams(cand, n), _grams(ref, n)
    distinct = []
    for g in c:
        if g not in distinct:
            distinct.append(g)
    return sum(min(c.count(g), r.count(g)) for g in distinct), len(c), len(r)


def bleu_oracle(cand, ref, n):
    if not cand:
        return 0.0
    precisions = []
    for k in range(1, n + 1):
        hit, total, _ = clipped_overlap(cand, ref, k)
        if k == 1:
            if hit == 0:
                return 0.0
            precisions.append(Fraction(hit, total))
        else:
            precisions.append(Fraction(hit + 1, total + 1))
    geo = math.prod(float(p) ** (1.0 / n) for p in precisions)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * geo


def _f1(p, r):
    return 0.0 if p + r == 0 else float(2 * p * r / (p + r))


def rouge_n_oracle(cand, ref, n):
    hit, nc, nr = clipped_overlap(cand, ref, n)
    if nc == 0 or nr == 0:
        return 0.0
    return _f1(Fraction(hit, nc), Fraction(hit, nr))


def _is_subsequence(sub, seq):
    it = iter(seq)
    return all(any(x == y for y in it) for x in sub)


def lcs_oracle(a, b):
    """Longest common subsequence by enumerating index subsets of the shorter side."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for size in range(len(short), 0, -1):
        for idx in combinations(range(len(short)), size):
            if _is_subsequence([short[i] for i in idx], long_):
                return size
    return 0


def rouge_l_oracle(cand, ref):
    if not cand or not ref:
        return 0.0
    lcs = lcs_oracle(cand, ref)
    return _f1(Fraction(lcs, len(cand)), Fraction(lcs, len(ref)))


def truncation_configs(n_direct, n_potential, n_history):
    """Every (direct kept, potential kept, history dropped) in drop order, no-drop first."""
    for p in range(n_potential, -1, -1):
        yield n_direct, p, 0
    for d in range(n_direct - 1, -1, -1):
        yield d, 0, 0
    for h in range(1, n_history + 1):
        yield 0, 0, h


def truncation_oracle(render, count, budget, n_direct, n_potential, n_history):
    """First configuration in drop order whose rendering fits, with that rendering."""
    for cfg in truncation_configs(n_direct, n_potential, n_history):
        text = render(*cfg)
        if count(text) <= budget:
            return cfg, text
    return None, None
