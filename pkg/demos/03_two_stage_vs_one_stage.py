"""Show when the topic-then-item hierarchy pays off, and when it cannot.

World A hides a few sparse high-quality topics among many dead ones, so
focusing the scoring budget through a topic stage helps a learning policy;
a random policy gets *worse* in two-stage mode because committing to random
topics beats sampling the whole space only if the topics were chosen well.

World B has a long tail of tiny good topics: the dynamic slot
reconstruction (merge topics until each slot holds enough candidate items)
clearly beats recommending from the single top topic padded with random
items.
"""

from banditrec.harness import ExperimentConfig, build_world, run_experiment

WORLD_A = {
    "type": "synthetic", "n_topics": 40, "items_per_topic": 100,
    "n_users": 100, "dim": 9, "cluster_sharpness": 4.0,
    "topic_imbalance": 0.7, "topic_quality_gain": 2.2, "good_topic_count": 5,
    "popularity_scale": 1.0, "base_offset": 2.4, "popularity_affinity": 1.5,
}
WORLD_B = {
    "type": "synthetic", "n_topics": 60, "items_per_topic": 80,
    "n_users": 100, "dim": 9, "cluster_sharpness": 4.0,
    "topic_imbalance": 2.2, "topic_quality_gain": -1.2,
    "popularity_scale": 0.5, "base_offset": 1.2, "popularity_affinity": 0.5,
    "exposure_bias": -1.5,
}
BASE = dict(trials=2, iterations=600, rec_size=5, n_users=100, budget=150,
            min_topic_size=25, seed=11)

print("== A: one stage vs two stage ==")
world = build_world(ExperimentConfig(**BASE, world=WORLD_A, policy="random"))
for policy in ("random", "s_galm_ucb"):
    row = [f"{policy:<12}"]
    for mode in ("one-stage", "two-stage"):
        cfg = ExperimentConfig(**BASE, world=WORLD_A, policy=policy, mode=mode)
        summary, _ = run_experiment(cfg, world)
        row.append(f"{mode}: {summary.mean_cum_ctr:7.1f}")
    print("  ".join(row))

print("\n== B: dynamic slot reconstruction vs top-topic-only ==")
world = build_world(ExperimentConfig(**BASE, world=WORLD_B, policy="random"))
for policy in ("dropout_ucb", "s_galm_ucb", "s_gblm_ucb"):
    row = [f"{policy:<12}"]
    for reconstruct, label in ((True, "dynamic"), (False, "top-only")):
        cfg = ExperimentConfig(**BASE, world=WORLD_B, policy=policy,
                               mode="two-stage", reconstruct=reconstruct)
        summary, _ = run_experiment(cfg, world)
        row.append(f"{label}: {summary.mean_cum_ctr:7.1f}")
    print("  ".join(row))
