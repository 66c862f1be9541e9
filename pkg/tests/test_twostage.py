import numpy as np
import pytest

from banditrec.twostage import (
    BudgetExceededError,
    BudgetLedger,
    SlotSets,
    TopicCatalog,
    dynamic_reconstruct,
    recommend_one_stage,
    sort_by_score,
    stage_one,
    stage_two,
)


def catalog_with_sizes(sizes):
    items_by_topic = {}
    counter = 0
    for k, n in enumerate(sizes):
        items_by_topic[f"t{k+1}"] = [f"i{counter + j:04d}" for j in range(n)]
        counter += n
    return TopicCatalog(items_by_topic)


def fixed_scores(mapping):
    return lambda ids: np.array([mapping[t] for t in ids])


# -- ledger ------------------------------------------------------------------


def test_ledger_counts_and_caps():
    ledger = BudgetLedger(10)
    ledger.spend(4)
    ledger.spend(6)
    assert ledger.spent == 10
    with pytest.raises(BudgetExceededError):
        ledger.spend(1)
    ledger.reset()
    assert ledger.spent == 0


# -- catalog -------------------------------------------------------------------


def test_catalog_rejects_empty_topic():
    with pytest.raises(ValueError):
        TopicCatalog({"t": []})


def test_catalog_roundtrip(tmp_path):
    cat = catalog_with_sizes([2, 3])
    path = tmp_path / "cat.jsonl"
    cat.to_jsonl(path)
    again = TopicCatalog.from_jsonl(path)
    assert again.items_by_topic == cat.items_by_topic


# -- sorting ----------------------------------------------------------------------


def test_sort_by_score_tie_breaks_by_id():
    assert sort_by_score(["b", "a", "c"], [1.0, 1.0, 2.0]) == ["c", "a", "b"]


# -- dynamic reconstruction ----------------------------------------------------------


def test_reconstruct_five_topic_hand_trace():
    # scores (.9,.8,.7,.6,.5) and sizes (1,1,1,1,10), m=2, p=3:
    # S1={t1}, S2={t2}; round-robin adds t3 to S1, t4 to S2, then t5 to S1
    # (now 12 >= 3); S2 still short but the list is empty.
    cat = catalog_with_sizes([1, 1, 1, 1, 10])
    sets = SlotSets(slots=[["t1"], ["t2"]], min_size=3)
    dynamic_reconstruct(["t3", "t4", "t5"], sets, cat, p=3)
    assert sets.slots == [["t1", "t3", "t5"], ["t2", "t4"]]


def test_reconstruct_noop_when_slots_already_full():
    cat = catalog_with_sizes([5, 5, 5])
    sets = SlotSets(slots=[["t1"], ["t2"]], min_size=3)
    dynamic_reconstruct(["t3"], sets, cat, p=3)
    assert sets.slots == [["t1"], ["t2"]]


def test_reconstruct_single_slot_absorbs_everything_in_order():
    cat = catalog_with_sizes([2, 2, 2, 2])
    sets = SlotSets(slots=[["t2"]], min_size=10**9)
    dynamic_reconstruct(["t4", "t1", "t3"], sets, cat, p=10**9)
    assert sets.slots == [["t2", "t4", "t1", "t3"]]


def test_reconstruct_higher_scored_topics_placed_first():
    cat = catalog_with_sizes([1, 1, 1, 1, 1, 1])
    sets = SlotSets(slots=[["t1"], ["t2"], ["t3"]], min_size=2)
    remaining = ["t4", "t5", "t6"]
    dynamic_reconstruct(list(remaining), sets, cat, p=2)
    placed = [t for slot in sets.slots for t in slot[1:]]
    assert placed == remaining  # round-robin pops strictly in score order


# -- stage one ----------------------------------------------------------------------


def test_stage_one_q_equals_m():
    cat = catalog_with_sizes([1, 2])
    ledger = BudgetLedger(100)
    sets = stage_one(cat, fixed_scores({"t1": 0.2, "t2": 0.9}), m=2, p=5, ledger=ledger)
    assert sets.slots == [["t2"], ["t1"]]
    assert ledger.spent == 2


def test_stage_one_p_one_keeps_singletons():
    cat = catalog_with_sizes([3, 3, 3])
    sets = stage_one(cat, fixed_scores({"t1": 0.3, "t2": 0.2, "t3": 0.1}), m=2, p=1, ledger=BudgetLedger(50))
    assert sets.slots == [["t1"], ["t2"]]


def test_stage_one_full_trace_through_reconstruction():
    cat = catalog_with_sizes([1, 1, 1, 1, 10])
    scores = {"t1": 0.9, "t2": 0.8, "t3": 0.7, "t4": 0.6, "t5": 0.5}
    sets = stage_one(cat, fixed_scores(scores), m=2, p=3, ledger=BudgetLedger(100))
    assert sets.slots == [["t1", "t3", "t5"], ["t2", "t4"]]


def test_stage_one_score_ties_break_by_topic_id():
    cat = catalog_with_sizes([1, 1, 1])
    sets = stage_one(cat, fixed_scores({"t1": 0.5, "t2": 0.5, "t3": 0.5}), m=3, p=1, ledger=BudgetLedger(10))
    assert sets.slots == [["t1"], ["t2"], ["t3"]]


def test_stage_one_requires_enough_topics():
    cat = catalog_with_sizes([1, 1])
    with pytest.raises(ValueError):
        stage_one(cat, fixed_scores({"t1": 1, "t2": 1}), m=3, p=1, ledger=BudgetLedger(10))


def test_stage_one_requires_budget_for_all_topics():
    cat = catalog_with_sizes([1, 1, 1])
    with pytest.raises(BudgetExceededError):
        stage_one(cat, fixed_scores({"t1": 1, "t2": 1, "t3": 1}), m=2, p=1, ledger=BudgetLedger(2))


# -- stage two ---------------------------------------------------------------------


def id_scores(ids):
    # deterministic per-item scores: higher suffix scores higher
    return np.array([int(i[1:]) for i in ids], dtype=float)


def test_stage_two_single_candidate_slots():
    cat = catalog_with_sizes([1, 1])
    sets = SlotSets(slots=[["t1"], ["t2"]])
    ledger = BudgetLedger(100)
    picked = stage_two(sets, cat, id_scores, ledger, np.random.default_rng(0), share=10)
    assert [p[0] for p in picked] == ["i0000", "i0001"]
    assert ledger.spent == 2


def test_stage_two_greedy_reduction_with_ties():
    cat = catalog_with_sizes([3])
    sets = SlotSets(slots=[["t1"]])
    flat = lambda ids: np.zeros(len(ids))
    picked = stage_two(sets, cat, flat, BudgetLedger(10), np.random.default_rng(0), share=5)
    assert picked[0][0] == "i0000"  # tie-break by lowest item id


def test_stage_two_budget_share_subsampling():
    # ledger-count oracle: exactly `share` candidates scored for a 25-item slot
    cat = catalog_with_sizes([25])
    sets = SlotSets(slots=[["t1"]])
    ledger = BudgetLedger(1000)
    stage_two(sets, cat, id_scores, ledger, np.random.default_rng(4), share=10)
    assert ledger.spent == 10


def test_stage_two_items_distinct_across_slots():
    cat = catalog_with_sizes([4])
    sets = SlotSets(slots=[["t1"], ["t1"], ["t1"]])  # same topic in all slots
    picked = stage_two(sets, cat, id_scores, BudgetLedger(100), np.random.default_rng(0), share=10)
    items = [p[0] for p in picked]
    assert len(set(items)) == 3


def test_stage_two_empty_slot_raises():
    cat = catalog_with_sizes([1])
    sets = SlotSets(slots=[["t1"], ["t1"]])
    with pytest.raises(ValueError):
        stage_two(sets, cat, id_scores, BudgetLedger(100), np.random.default_rng(0), share=10)


def test_stage_two_padding_tops_up_candidates():
    cat = catalog_with_sizes([2, 30])
    sets = SlotSets(slots=[["t1"]])
    pool = cat.all_items()
    ledger = BudgetLedger(100)
    stage_two(sets, cat, id_scores, ledger, np.random.default_rng(1), share=10, pad_pool=pool)
    assert ledger.spent == 10  # 2 own items + 8 random fills


def test_stage_two_attribution_prefers_first_containing_topic():
    cat = TopicCatalog({"tA": ["i1", "i2"], "tB": ["i2", "i3"]})
    sets = SlotSets(slots=[["tB", "tA"]])
    score = fixed_scores({"i1": 0.0, "i2": 5.0, "i3": 1.0})
    picked = stage_two(sets, cat, score, BudgetLedger(10), np.random.default_rng(0), share=5)
    assert picked[0][:2] == ("i2", "tB")


# -- one-stage -----------------------------------------------------------------------


def test_one_stage_scores_all_items_when_budget_allows():
    items = [f"i{k}" for k in range(20)]
    ledger = BudgetLedger(50)
    recs = recommend_one_stage(items, id_scores, 3, ledger, np.random.default_rng(0))
    assert ledger.spent == 20
    assert [r[0] for r in recs] == ["i19", "i18", "i17"]


def test_one_stage_budget_limits_candidates():
    # ledger-count oracle: exactly min(b, n) evaluations
    items = [f"i{k}" for k in range(100)]
    ledger = BudgetLedger(30)
    recommend_one_stage(items, id_scores, 5, ledger, np.random.default_rng(0))
    assert ledger.spent == 30


def test_one_stage_m_equals_candidates():
    items = ["i3", "i1", "i2"]
    recs = recommend_one_stage(items, lambda ids: np.zeros(len(ids)), 3, BudgetLedger(10), np.random.default_rng(0))
    assert sorted(r[0] for r in recs) == ["i1", "i2", "i3"]


def test_one_stage_too_few_items():
    with pytest.raises(ValueError):
        recommend_one_stage(["i1"], id_scores, 2, BudgetLedger(10), np.random.default_rng(0))


def test_one_stage_deterministic_under_seed():
    items = [f"i{k}" for k in range(50)]
    runs = []
    for _ in range(2):
        ledger = BudgetLedger(20)
        rng = np.random.default_rng(99)
        runs.append(recommend_one_stage(items, id_scores, 4, ledger, rng))
    assert runs[0] == runs[1]
