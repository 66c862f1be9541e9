"""Race the acquisition policies on one seeded synthetic world.

Every policy sees the same world, the same user arrivals and the same
scoring budget; the cumulative CTR after N iterations is the score.
Expect the shared UCB policies at the top, the disjoint GLM in the middle
(it must learn each user separately) and random at the bottom.
"""

import time

from banditrec.harness import ExperimentConfig, build_world, run_experiment

WORLD = {
    "type": "synthetic", "n_topics": 8, "items_per_topic": 100,
    "n_users": 50, "dim": 9, "cluster_sharpness": 4.0,
}
BASE = dict(trials=3, iterations=500, rec_size=5, n_users=50, budget=200,
            world=WORLD, seed=1)

world = build_world(ExperimentConfig(**BASE, policy="random"))
print(f"world: {len(world.item_table)} items, {len(world.users)} users, "
      f"threshold {world.model.threshold:.3f}\n")
print(f"{'policy':<14} {'cum CTR':>9} {'+-':>6} {'secs':>6}")
for policy in ("random", "greedy", "glm_ucb", "n_glm_ucb", "dropout_ucb", "s_galm_ucb", "s_gblm_ucb"):
    cfg = ExperimentConfig(**BASE, policy=policy)
    t0 = time.time()
    summary, _ = run_experiment(cfg, world)
    print(f"{policy:<14} {summary.mean_cum_ctr:>9.1f} {summary.std_cum_ctr:>6.1f} {time.time() - t0:>6.1f}")
