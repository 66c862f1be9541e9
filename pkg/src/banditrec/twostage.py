"""Two-stage topic-then-item recommendation under a scoring budget.

Stage one scores every topic, seeds one slot per recommendation position
with the top-scored topics, and round-robins the remaining high-score
topics into slots until each slot holds at least ``p`` candidate items.
Stage two scores (a budget share of) each slot's items and picks the best.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class BudgetExceededError(RuntimeError):
    """Raised when an iteration tries to score beyond its budget."""


class BudgetLedger:
    """Counts acquisition-score evaluations within one iteration."""

    def __init__(self, b: int):
        if b < 1:
            raise ValueError(f"budget must be >= 1, got {b}")
        self.b = int(b)
        self.spent = 0

    def reset(self) -> None:
        self.spent = 0

    def spend(self, n: int = 1) -> None:
        if self.spent + n > self.b:
            raise BudgetExceededError(f"budget {self.b} exceeded: {self.spent} + {n}")
        self.spent += n

    @property
    def remaining(self) -> int:
        return self.b - self.spent


class TopicCatalog:
    """Topic list plus the (non-empty) item set behind each topic."""

    def __init__(self, items_by_topic: dict):
        if not items_by_topic:
            raise ValueError("catalog must contain at least one topic")
        self.items_by_topic = {}
        self.member_sets = {}
        for topic in sorted(items_by_topic):
            items = sorted(set(items_by_topic[topic]))
            if not items:
                raise ValueError(f"topic {topic!r} has no items")
            self.items_by_topic[topic] = items
            self.member_sets[topic] = set(items)
        self.topics = sorted(self.items_by_topic)

    @property
    def n_topics(self) -> int:
        return len(self.topics)

    def all_items(self) -> list:
        out = set()
        for items in self.items_by_topic.values():
            out.update(items)
        return sorted(out)

    def size(self, topic) -> int:
        return len(self.items_by_topic[topic])

    @classmethod
    def from_jsonl(cls, path) -> "TopicCatalog":
        items_by_topic = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                items_by_topic.setdefault(rec["topic"], []).extend(rec["items"])
        return cls(items_by_topic)

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for topic in self.topics:
                fh.write(json.dumps({"topic": topic, "items": self.items_by_topic[topic]}) + "\n")


@dataclass
class SlotSets:
    """Ordered topic lists, one per recommendation slot; the first element
    of slot j is the j-th highest-scored topic."""

    slots: list = field(default_factory=list)
    min_size: int = 1

    def item_count(self, catalog: TopicCatalog, j: int) -> int:
        return sum(catalog.size(v) for v in self.slots[j])


def sort_by_score(arm_ids, scores) -> list:
    """Arm ids sorted by score non-increasing, ties broken by ascending id."""
    order = sorted(range(len(arm_ids)), key=lambda k: (-float(scores[k]), arm_ids[k]))
    return [arm_ids[k] for k in order]


def dynamic_reconstruct(l_st: list, sets: SlotSets, catalog: TopicCatalog, p: int) -> SlotSets:
    """Round-robin the sorted remaining topics into slots whose candidate
    item mass is still below ``p``; stops when every slot reaches ``p``
    items or the topic list is exhausted."""
    m = len(sets.slots)
    l_st = list(l_st)
    counts = [sets.item_count(catalog, j) for j in range(m)]
    while l_st and any(c < p for c in counts):
        for j in range(m):
            if not l_st:
                break
            if counts[j] < p:
                topic = l_st.pop(0)
                sets.slots[j].append(topic)
                counts[j] += catalog.size(topic)
    return sets


def stage_one(
    catalog: TopicCatalog,
    topic_score_fn,
    m: int,
    p: int,
    ledger: BudgetLedger,
    reconstruct: bool = True,
) -> SlotSets:
    """Score all topics, seed m slots with the top-m, then expand via
    dynamic reconstruction. With ``reconstruct=False`` (the top-topic-only
    ablation) every slot holds just the single top-scored topic instead.

    ``topic_score_fn(topic_ids) -> scores`` is charged one budget unit per
    topic scored.
    """
    q = catalog.n_topics
    if q < m:
        raise ValueError(f"need at least m={m} topics, catalog has {q}")
    if ledger.remaining < q:
        raise BudgetExceededError(f"stage one needs {q} evaluations, {ledger.remaining} left")
    ledger.spend(q)
    scores = topic_score_fn(catalog.topics)
    ranked = sort_by_score(catalog.topics, scores)
    if not reconstruct:
        return SlotSets(slots=[[ranked[0]] for _ in range(m)], min_size=p)
    sets = SlotSets(slots=[[v] for v in ranked[:m]], min_size=p)
    dynamic_reconstruct(ranked[m:], sets, catalog, p)
    return sets


def stage_two(
    sets: SlotSets,
    catalog: TopicCatalog,
    item_score_fn,
    ledger: BudgetLedger,
    rng: np.random.Generator,
    share: int,
    pad_pool: list | None = None,
) -> list:
    """Pick one item per slot by scored argmax under the per-slot budget share.

    Returns a list of (item_id, attributed_topic, score) triples, the items
    pairwise distinct across slots. ``pad_pool`` (top-topic ablation) tops
    small candidate sets up to the share with uniformly sampled items from
    the pool so both modes evaluate equally many candidates.
    """
    if share < 1:
        raise ValueError(f"per-slot budget share must be >= 1, got {share}")
    picked: list = []
    taken: set = set()
    for j, slot_topics in enumerate(sets.slots):
        candidates = set()
        for v in slot_topics:
            candidates.update(catalog.items_by_topic[v])
        candidates -= taken
        candidates = sorted(candidates)
        if len(candidates) > share:
            idx = rng.choice(len(candidates), size=share, replace=False)
            candidates = sorted(candidates[k] for k in idx)
        elif pad_pool is not None and len(candidates) < share:
            pool = sorted(set(pad_pool) - set(candidates) - taken)
            n_pad = min(share - len(candidates), len(pool))
            if n_pad:
                idx = rng.choice(len(pool), size=n_pad, replace=False)
                candidates = sorted(candidates + [pool[k] for k in idx])
        if not candidates:
            raise ValueError(f"slot {j} has no candidates left; catalog too small for m")
        ledger.spend(len(candidates))
        scores = item_score_fn(candidates)
        best = sort_by_score(candidates, scores)[0]
        topic = next((v for v in slot_topics if best in catalog.member_sets[v]), slot_topics[0])
        picked.append((best, topic, float(scores[candidates.index(best)])))
        taken.add(best)
    return picked


def recommend_one_stage(
    all_items: list,
    item_score_fn,
    m: int,
    ledger: BudgetLedger,
    rng: np.random.Generator,
) -> list:
    """Uniformly subsample min(b, all) candidates, score them, return the
    top-m (item, score) pairs by score with deterministic tie-breaking."""
    if len(all_items) < m:
        raise ValueError(f"need at least m={m} items, got {len(all_items)}")
    n = min(ledger.remaining, len(all_items))
    if n < m:
        raise BudgetExceededError(f"budget leaves {n} candidates, need m={m}")
    if n < len(all_items):
        idx = rng.choice(len(all_items), size=n, replace=False)
        candidates = sorted(all_items[k] for k in idx)
    else:
        candidates = list(all_items)
    ledger.spend(len(candidates))
    scores = item_score_fn(candidates)
    by_score = {item: float(scores[k]) for k, item in enumerate(candidates)}
    return [(item, by_score[item]) for item in sort_by_score(candidates, scores)[:m]]
