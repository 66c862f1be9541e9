import csv
import json

import numpy as np
import pytest

from banditrec.harness import (
    ExperimentConfig,
    TrialResult,
    build_world,
    emit_report,
    reload_report,
    run_experiment,
    run_trial,
    summarize,
)

TINY_WORLD = {
    "type": "synthetic",
    "n_topics": 4,
    "items_per_topic": 15,
    "n_users": 20,
    "dim": 8,
    "cluster_sharpness": 4.0,
}


def tiny_config(**kw):
    base = dict(
        trials=2, iterations=30, rec_size=2, n_users=8, budget=40,
        cadence_item=10, cadence_topic=5, world=dict(TINY_WORLD), seed=3,
    )
    base.update(kw)
    return ExperimentConfig(**base)


# -- config ------------------------------------------------------------------


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        tiny_config(rec_size=0)
    with pytest.raises(ValueError):
        tiny_config(budget=1, rec_size=5)
    with pytest.raises(ValueError):
        tiny_config(mode="three-stage")
    with pytest.raises(ValueError):
        tiny_config(policy="mystery")


def test_config_file_roundtrip(tmp_path):
    cfg = tiny_config(policy="s_galm_ucb")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = ExperimentConfig.from_file(path)
    assert again == cfg


def test_config_file_unknown_key(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"trails": 3}))
    with pytest.raises(ValueError):
        ExperimentConfig.from_file(path)


def test_two_stage_requires_budget_above_topics():
    cfg = tiny_config(mode="two-stage", budget=4, rec_size=2)
    world = build_world(cfg)
    with pytest.raises(ValueError):
        run_trial(cfg, world, 0)


# -- determinism and trial structure ----------------------------------------------


def test_trial_deterministic_under_seed():
    cfg = tiny_config(policy="s_galm_ucb")
    world = build_world(cfg)
    r1 = run_trial(cfg, world, 0)
    r2 = run_trial(cfg, world, 0)
    assert np.array_equal(r1.rewards, r2.rewards)
    assert [(x.item, x.reward) for x in r1.records] == [(x.item, x.reward) for x in r2.records]


def test_trial_zero_reward_world():
    # a world where no pair crosses the threshold and flips are off
    cfg = tiny_config(trials=1, iterations=5, rec_size=1, flip_prob=0.0, policy="random")
    world = build_world(cfg)
    world.model.threshold = 1.1  # nothing reaches it
    world.model.flip_prob = 0.0
    res = run_trial(cfg, world, 0)
    assert np.all(res.rewards == 0)


def test_trials_use_independent_streams():
    cfg = tiny_config(policy="random")
    world = build_world(cfg)
    a = run_trial(cfg, world, 0)
    b = run_trial(cfg, world, 1)
    assert not np.array_equal(a.rewards, b.rewards)


def test_experiment_summary_permutation_invariant():
    cfg = tiny_config(policy="s_gblm_ucb", trials=3)
    world = build_world(cfg)
    forward = [run_trial(cfg, world, t) for t in range(3)]
    backward = [run_trial(cfg, world, t) for t in (2, 1, 0)]
    s1 = summarize(cfg, forward)
    s2 = summarize(cfg, sorted(backward, key=lambda r: r.trial))
    assert s1 == s2


def test_summary_single_trial_std_zero():
    cfg = tiny_config(trials=1)
    world = build_world(cfg)
    summary, _ = run_experiment(cfg, world)
    assert summary.std_cum_ctr == 0.0
    assert summary.std_cum_reward == 0.0


def test_summary_identical_trials_std_zero():
    cfg = tiny_config()
    world = build_world(cfg)
    res = run_trial(cfg, world, 0)
    clones = [TrialResult(k, res.rewards.copy(), [], 0) for k in range(5)]
    summary = summarize(cfg, clones)
    assert summary.std_cum_ctr == 0.0


def test_summary_mean_matches_individual_reruns():
    # rerun-and-average oracle
    cfg = tiny_config(trials=4, policy="greedy")
    world = build_world(cfg)
    summary, _ = run_experiment(cfg, world)
    finals = [float(run_trial(cfg, world, t).cum_ctr(cfg.rec_size)[-1]) for t in range(4)]
    assert summary.mean_cum_ctr == pytest.approx(float(np.mean(finals)))


def test_reward_ctr_identity():
    cfg = tiny_config(policy="dropout_ucb", trials=1)
    world = build_world(cfg)
    res = run_trial(cfg, world, 0)
    m = cfg.rec_size
    assert np.allclose(m * res.cum_ctr(m), np.cumsum(res.rewards))
    assert np.all((0 <= res.ctr(m)) & (res.ctr(m) <= 1))


def test_budget_never_exceeded_and_rewards_bounded():
    for mode in ("one-stage", "two-stage"):
        cfg = tiny_config(mode=mode, policy="s_galm_ucb", trials=1)
        world = build_world(cfg)
        res = run_trial(cfg, world, 0)
        assert res.max_spent <= cfg.budget
        assert np.all(res.rewards <= cfg.rec_size)


def test_recommendations_distinct_within_iteration():
    cfg = tiny_config(mode="two-stage", policy="random", trials=1, rec_size=3, budget=60)
    world = build_world(cfg)
    res = run_trial(cfg, world, 0)
    by_iter = {}
    for rec in res.records:
        by_iter.setdefault(rec.iteration, []).append(rec.item)
    for items in by_iter.values():
        assert len(items) == len(set(items))


def test_cohort_larger_than_world_rejected():
    cfg = tiny_config(n_users=10_000)
    world = build_world(cfg)
    with pytest.raises(ValueError):
        run_trial(cfg, world, 0)


def test_files_world_optional_topic_vectors(tmp_path):
    from banditrec import io as brio
    from banditrec.twostage import TopicCatalog

    cfg = tiny_config(trials=1, iterations=4, mode="two-stage", policy="greedy", n_users=4)
    world = build_world(cfg)
    paths = {
        "catalog": tmp_path / "cat.jsonl",
        "embeddings": tmp_path / "emb.jsonl",
        "simulator": tmp_path / "sim.json",
        "topics": tmp_path / "topics.jsonl",
    }
    world.catalog.to_jsonl(paths["catalog"])
    brio.write_embeddings(world.item_table, paths["embeddings"])
    brio.write_simulator(world.model, paths["simulator"])
    dim = len(next(iter(world.item_table.values())))
    topic_vecs = {t: np.full(dim, 0.25) for t in world.catalog.topics}
    brio.write_embeddings(topic_vecs, paths["topics"])

    cfg_files = tiny_config(
        trials=1, iterations=4, mode="two-stage", policy="greedy", n_users=4,
        world={
            "type": "files",
            "catalog": str(paths["catalog"]),
            "embeddings": str(paths["embeddings"]),
            "simulator": str(paths["simulator"]),
            "topic_embeddings": str(paths["topics"]),
        },
    )
    bundle = build_world(cfg_files)
    assert bundle.topic_table is not None
    assert np.allclose(bundle.topic_table[world.catalog.topics[0]], 0.25)
    res = run_trial(cfg_files, bundle, 0)
    assert len(res.rewards) == 4


# -- reports ----------------------------------------------------------------------


def test_emit_report_files_roundtrip(tmp_path):
    cfg = tiny_config(trials=2, policy="glm_ucb")
    world = build_world(cfg)
    summary, results = run_experiment(cfg, world)
    paths = emit_report(summary, results, cfg, tmp_path)

    with open(paths["summary"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["policy"] == "glm_ucb"
    assert float(rows[0]["mean"]) == summary.mean_cum_ctr
    assert float(rows[0]["std"]) == summary.std_cum_ctr

    cfg2, summary2, results2 = reload_report(tmp_path)
    assert cfg2 == cfg
    assert summary2.mean_cum_ctr == pytest.approx(summary.mean_cum_ctr)
    assert summary2.std_cum_ctr == pytest.approx(summary.std_cum_ctr)
    for r1, r2 in zip(results, results2):
        assert np.array_equal(r1.rewards, r2.rewards)


def test_emit_report_empty_stream_headers_only(tmp_path):
    cfg = tiny_config()
    paths = emit_report(None, [], cfg, tmp_path)
    assert open(paths["summary"]).read().strip() == "policy,mode,n_users,m,mean,std"
    assert open(paths["curves"]).read().strip() == "trial,iteration,reward,ctr,cum_ctr"


def test_report_curves_identity(tmp_path):
    cfg = tiny_config(trials=1, policy="random")
    world = build_world(cfg)
    summary, results = run_experiment(cfg, world)
    emit_report(summary, results, cfg, tmp_path)
    with open(tmp_path / "curves.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        assert float(row["ctr"]) == pytest.approx(int(row["reward"]) / cfg.rec_size)


# -- journal / replay support -------------------------------------------------------


def test_journal_contains_batches_when_enabled():
    cfg = tiny_config(trials=1, mode="two-stage", policy="s_galm_ucb")
    world = build_world(cfg)
    res = run_trial(cfg, world, 0, keep_journal=True)
    assert res.journal is not None and len(res.journal) == cfg.iterations
    entry = res.journal[0]
    assert len(entry["items"]) == cfg.rec_size
    assert len(entry["topics"]) == cfg.rec_size
