"""Experiment runner: seeded trials, the iteration loop, metrics, reports.

A run executes T independent trials against one world. Each trial samples a
user cohort, resets all policy state, and iterates: draw a user, recommend m
items under the scoring budget, query the oracle, update the generalised
linear state every iteration and the neural towers at their cadences.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from banditrec.encoders import TwoTowerEncoder, bias_augment
from banditrec.policies import (
    AdditiveSharedUcbPolicy,
    BilinearSharedUcbPolicy,
    DisjointGlmUcbPolicy,
    DropoutUcbPolicy,
    Feedback,
    GreedyPolicy,
    POLICY_NAMES,
    RandomPolicy,
    RAW_CONTEXT_POLICIES,
)
from banditrec.simulator import SyntheticWorld, gen_synthetic_world
from banditrec.twostage import (
    BudgetLedger,
    TopicCatalog,
    recommend_one_stage,
    stage_one,
    stage_two,
)
from banditrec import io as brio


@dataclass
class ExperimentConfig:
    """Run settings; field names double as the config-file keys."""

    trials: int = 5
    iterations: int = 2000
    rec_size: int = 5
    n_users: int = 100
    budget: int = 500
    beta: float = 0.1
    gamma: float = 0.5
    min_topic_size: int = 25
    lr_glm: float = 0.01
    lr_bilinear: float = 0.001
    lr_encoder: float = 0.01
    cadence_item: int = 100
    cadence_topic: int = 50
    mc_samples: int = 5
    dropout_rate: float = 0.2
    flip_prob: float = 0.1
    history_cap: int = 50
    pretrain_frac: float = 0.1
    pretrain_epochs: int = 5
    mode: str = "one-stage"
    policy: str = "random"
    topic_policy: str | None = None  # defaults to `policy`
    reconstruct: bool = True
    topic_init: str = "centroid"  # or "random"
    seed_cohort_history: bool = True
    seed: int = 0
    world: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rec_size < 1:
            raise ValueError("rec_size must be >= 1")
        if self.budget < self.rec_size:
            raise ValueError("budget must be >= rec_size")
        if self.iterations < 1 or self.trials < 1:
            raise ValueError("iterations and trials must be >= 1")
        if self.mode not in ("one-stage", "two-stage"):
            raise ValueError(f"mode must be one-stage or two-stage, got {self.mode!r}")
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICY_NAMES}")
        if self.topic_policy is not None and self.topic_policy not in POLICY_NAMES:
            raise ValueError(f"unknown topic policy {self.topic_policy!r}")
        if self.topic_init not in ("centroid", "random"):
            raise ValueError(f"topic_init must be centroid or random, got {self.topic_init!r}")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class InteractionRecord:
    """One recommendation outcome in the experiment log."""

    trial: int
    iteration: int
    user: str
    slot: int
    topic: str | None
    item: str
    reward: int
    score: float


@dataclass
class TrialResult:
    trial: int
    rewards: np.ndarray  # reward per iteration, each in 0..m
    records: list
    max_spent: int
    journal: list | None = None  # per-iteration feedback batches when enabled
    policies: dict | None = None  # final policy objects, kept with the journal

    def ctr(self, m: int) -> np.ndarray:
        return self.rewards / m

    def cum_ctr(self, m: int) -> np.ndarray:
        return np.cumsum(self.rewards / m)


@dataclass
class ExperimentSummary:
    policy: str
    mode: str
    n_users: int
    rec_size: int
    trials: int
    iterations: int
    mean_cum_ctr: float
    std_cum_ctr: float
    mean_cum_reward: float
    std_cum_reward: float
    per_trial_cum_ctr: list


@dataclass
class WorldBundle:
    """Everything run_trial needs, whatever the source."""

    model: object
    catalog: TopicCatalog
    item_table: dict
    users: list
    logs: list
    topic_table: dict | None = None  # optional initial topic vectors


def build_world(config: ExperimentConfig) -> WorldBundle:
    desc = dict(config.world)
    kind = desc.pop("type", "synthetic")
    if kind == "synthetic":
        desc.setdefault("seed", config.seed)
        desc.setdefault("flip_prob", config.flip_prob)
        world: SyntheticWorld = gen_synthetic_world(**desc)
        return WorldBundle(world.model, world.catalog, world.item_table, world.users, world.logs)
    if kind == "files":
        model = brio.read_simulator(desc["simulator"])
        table = brio.read_embeddings(desc["embeddings"])
        brio.validate_catalog(desc["catalog"])
        catalog = TopicCatalog.from_jsonl(desc["catalog"])
        known = set(table) & set(model.item_vecs)
        filtered = {
            t: [i for i in items if i in known]
            for t, items in catalog.items_by_topic.items()
        }
        filtered = {t: items for t, items in filtered.items() if items}
        if not filtered:
            raise ValueError("no catalog items are covered by both embeddings and simulator")
        catalog = TopicCatalog(filtered)
        keep = set(catalog.all_items())
        table = {i: v for i, v in table.items() if i in keep}
        logs = brio.read_logs(desc["logs"]) if desc.get("logs") else []
        logs = [r for r in logs if r.item in keep and r.user in model.user_vecs]
        topic_table = None
        if desc.get("topic_embeddings"):
            topic_table = brio.read_embeddings(desc["topic_embeddings"])
        return WorldBundle(model, catalog, table, model.users, logs, topic_table)
    raise ValueError(f"unknown world type {kind!r}")


def make_policy(name: str, *, encoder: TwoTowerEncoder, config: ExperimentConfig, rng, kind: str):
    d = encoder.dim
    if name == "random":
        return RandomPolicy(rng)
    if name == "greedy":
        return GreedyPolicy()
    if name in ("glm_ucb", "n_glm_ucb"):
        return DisjointGlmUcbPolicy(d, config.lr_glm)
    if name == "dropout_ucb":
        return DropoutUcbPolicy(encoder, rng, kind=kind)
    if name == "s_galm_ucb":
        return AdditiveSharedUcbPolicy(d, d, config.gamma, config.lr_glm)
    if name == "s_gblm_ucb":
        return BilinearSharedUcbPolicy(d, d, config.lr_bilinear)
    raise ValueError(f"unknown policy {name!r}")


def _pretrain(encoder: TwoTowerEncoder, logs, cohort: set, config: ExperimentConfig, rng) -> None:
    """Warm the encoder on a fraction of logged feedback, excluding the
    trial cohort so their interests stay unknown."""
    usable = [r for r in logs if r.user not in cohort]
    if not usable or config.pretrain_frac <= 0:
        return
    n = max(1, int(round(config.pretrain_frac * len(usable))))
    idx = sorted(rng.choice(len(usable), size=min(n, len(usable)), replace=False))
    sample = [usable[k] for k in idx]
    for rec in sample:
        encoder.register_user(rec.user)
        if rec.label:
            encoder.record_click(rec.user, rec.item)
    batch = [(r.user, r.item, r.label) for r in sample]
    for _ in range(config.pretrain_epochs):
        encoder.train(batch)


def run_trial(
    config: ExperimentConfig,
    world: WorldBundle,
    trial_index: int,
    keep_journal: bool = False,
) -> TrialResult:
    seed_seq = np.random.SeedSequence(entropy=config.seed, spawn_key=(trial_index,))
    cohort_rng, user_rng, policy_rng, oracle_rng, sample_rng, enc_rng = (
        np.random.default_rng(s) for s in seed_seq.spawn(6)
    )

    if config.n_users > len(world.users):
        raise ValueError(f"cohort of {config.n_users} exceeds world's {len(world.users)} users")
    cohort = sorted(
        world.users[k] for k in cohort_rng.choice(len(world.users), size=config.n_users, replace=False)
    )

    topic_table = world.topic_table
    if topic_table is None and config.topic_init == "centroid":
        # stand-in for a pretrained topic tower: a topic starts at the mean
        # of its members' base features and trains from there
        topic_table = {
            t: np.mean([world.item_table[i] for i in world.catalog.items_by_topic[t]], axis=0)
            for t in world.catalog.topics
        }
    encoder = TwoTowerEncoder(
        world.item_table,
        dropout_rate=config.dropout_rate,
        mc_samples=config.mc_samples,
        history_cap=config.history_cap,
        learning_rate=config.lr_encoder,
        topic_ids=world.catalog.topics,
        topic_table=topic_table,
        rng=enc_rng,
    )
    for u in cohort:
        encoder.register_user(u)
    if config.seed_cohort_history:
        # cohort users keep their logged click history for inference even
        # though their samples are excluded from pretraining
        cohort_set = set(cohort)
        for rec in world.logs:
            if rec.label and rec.user in cohort_set:
                encoder.record_click(rec.user, rec.item)
    _pretrain(encoder, world.logs, set(cohort), config, enc_rng)

    two_stage = config.mode == "two-stage"
    q = world.catalog.n_topics
    if two_stage and config.budget < q + config.rec_size:
        raise ValueError(
            f"two-stage mode needs budget > n_topics (budget {config.budget}, topics {q}, m {config.rec_size})"
        )

    item_policy = make_policy(config.policy, encoder=encoder, config=config, rng=policy_rng, kind="item")
    topic_policy = None
    if two_stage:
        topic_name = config.topic_policy or config.policy
        topic_policy = make_policy(topic_name, encoder=encoder, config=config, rng=policy_rng, kind="topic")

    all_items = world.catalog.all_items()
    raw_contexts = config.policy in RAW_CONTEXT_POLICIES
    raw_matrix = None
    if raw_contexts:
        raw_matrix = np.array([bias_augment(world.item_table[i]) for i in all_items])
        raw_row = {i: k for k, i in enumerate(all_items)}

    ledger = BudgetLedger(config.budget)
    share = (config.budget - q) // config.rec_size if two_stage else None
    rewards = np.zeros(config.iterations)
    records: list = []
    journal: list | None = [] if keep_journal else None
    max_spent = 0

    for t in range(config.iterations):
        u = cohort[user_rng.integers(len(cohort))]
        ledger.reset()
        z = encoder.encode_user(u)

        def item_contexts(ids):
            if raw_contexts:
                return raw_matrix[[raw_row[i] for i in ids]]
            return encoder.encode_items(ids)

        def item_score_fn(ids):
            return item_policy.score_batch(u, ids, item_contexts(ids), z, config.beta)

        if two_stage:
            def topic_score_fn(ids):
                T = np.array([encoder.topic_vector(v) for v in ids])
                return topic_policy.score_batch(u, ids, T, z, config.beta)

            sets = stage_one(
                world.catalog, topic_score_fn, config.rec_size, config.min_topic_size,
                ledger, reconstruct=config.reconstruct,
            )
            picked = stage_two(
                sets, world.catalog, item_score_fn, ledger, sample_rng, share,
                pad_pool=None if config.reconstruct else all_items,
            )
        else:
            picked = [(item, None, score) for item, score in
                      recommend_one_stage(all_items, item_score_fn, config.rec_size, ledger, sample_rng)]

        assert ledger.spent <= config.budget
        max_spent = max(max_spent, ledger.spent)

        rec_items = [item for item, _, _ in picked]
        y = world.model.oracle(u, rec_items, oracle_rng)
        rewards[t] = int(y.sum())

        item_batch = [
            Feedback(u, item, item_contexts([item])[0], z, float(yk))
            for (item, _, _), yk in zip(picked, y)
        ]
        topic_batch = []
        if two_stage:
            topic_batch = [
                Feedback(u, topic, encoder.topic_vector(topic), z, float(yk))
                for (_, topic, _), yk in zip(picked, y)
            ]
        for (item, _, _), yk in zip(picked, y):
            if yk:
                encoder.record_click(u, item)
        item_policy.update(item_batch)
        if two_stage:
            topic_policy.update(topic_batch)

        for slot, ((item, topic, score), yk) in enumerate(zip(picked, y)):
            records.append(InteractionRecord(trial_index, t, u, slot, topic, item, int(yk), score))
        if journal is not None:
            journal.append({"iteration": t, "items": item_batch, "topics": topic_batch})

        if (t + 1) % config.cadence_item == 0:
            window = records[-config.cadence_item * config.rec_size:]
            encoder.train([(r.user, r.item, r.reward) for r in window])
        if two_stage and (t + 1) % config.cadence_topic == 0:
            window = records[-config.cadence_topic * config.rec_size:]
            encoder.train_topics([(r.user, r.topic, r.reward) for r in window], enc_rng)

    policies = None
    if keep_journal:
        policies = {"item": item_policy, "topic": topic_policy}
    return TrialResult(trial_index, rewards, records, max_spent, journal, policies)


def summarize(config: ExperimentConfig, results: list) -> ExperimentSummary:
    m = config.rec_size
    finals_ctr = np.array([float(r.cum_ctr(m)[-1]) for r in results])
    finals_reward = np.array([float(np.cumsum(r.rewards)[-1]) for r in results])
    std = lambda a: float(np.std(a, ddof=1)) if len(a) > 1 else 0.0
    return ExperimentSummary(
        policy=config.policy,
        mode=config.mode,
        n_users=config.n_users,
        rec_size=m,
        trials=len(results),
        iterations=config.iterations,
        mean_cum_ctr=float(finals_ctr.mean()),
        std_cum_ctr=std(finals_ctr),
        mean_cum_reward=float(finals_reward.mean()),
        std_cum_reward=std(finals_reward),
        per_trial_cum_ctr=[float(v) for v in finals_ctr],
    )


def run_experiment(config: ExperimentConfig, world: WorldBundle | None = None, keep_journal: bool = False):
    """Execute T independent trials and aggregate. Returns (summary, results)."""
    if world is None:
        world = build_world(config)
    results = [run_trial(config, world, t, keep_journal=keep_journal) for t in range(config.trials)]
    return summarize(config, results), results


# -- reports -------------------------------------------------------------------


def emit_report(summary: ExperimentSummary, results: list, config: ExperimentConfig, out_dir) -> dict:
    """Write summary.csv, curves.csv and a config echo; returns the paths.

    Floats are written with repr so a re-parse recovers identical values.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "summary": os.path.join(out_dir, "summary.csv"),
        "curves": os.path.join(out_dir, "curves.csv"),
        "config": os.path.join(out_dir, "config.json"),
    }
    with open(paths["summary"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "mode", "n_users", "m", "mean", "std"])
        if summary is not None:
            w.writerow(
                [summary.policy, summary.mode, summary.n_users, summary.rec_size,
                 repr(summary.mean_cum_ctr), repr(summary.std_cum_ctr)]
            )
    with open(paths["curves"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "iteration", "reward", "ctr", "cum_ctr"])
        for r in results:
            cum = r.cum_ctr(config.rec_size)
            for t in range(len(r.rewards)):
                w.writerow([r.trial, t, int(r.rewards[t]), repr(float(r.rewards[t]) / config.rec_size), repr(float(cum[t]))])
    with open(paths["config"], "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")
    return paths


def reload_report(in_dir):
    """Re-read curves.csv + config.json and recompute the summary."""
    config = ExperimentConfig.from_file(os.path.join(in_dir, "config.json"))
    per_trial: dict = {}
    with open(os.path.join(in_dir, "curves.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            per_trial.setdefault(int(row["trial"]), []).append((int(row["iteration"]), int(row["reward"])))
    results = []
    for trial in sorted(per_trial):
        rows = sorted(per_trial[trial])
        rewards = np.array([reward for _, reward in rows], dtype=float)
        results.append(TrialResult(trial, rewards, records=[], max_spent=0))
    if not results:
        return config, None, []
    return config, summarize(config, results), results
