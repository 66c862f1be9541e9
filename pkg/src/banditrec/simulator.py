"""Ground-truth user-choice simulator and its debiased training pipeline.

The simulator scores a (user, item) pair by a latent-vector dot product
passed through the logistic function, thresholds the probability into a
deterministic binary reward, and flips it with small probability to model
preference noise. Training from logged feedback reweights the binary
cross-entropy by inverse exposure propensities, self-normalised per sample
group (Hajek weighting), to undo logger selection bias.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from banditrec.glm import sigmoid
from banditrec.twostage import TopicCatalog

logger = logging.getLogger(__name__)


@dataclass
class LoggedInteraction:
    impression: str
    user: str
    item: str
    label: int


@dataclass
class GroundTruthModel:
    """Latent-factor click model with a fixed decision threshold."""

    user_vecs: dict
    item_vecs: dict
    threshold: float | None = None
    flip_prob: float = 0.1

    def click_prob(self, user, item) -> float:
        if user not in self.user_vecs:
            raise KeyError(f"unknown user id: {user!r}")
        if item not in self.item_vecs:
            raise KeyError(f"unknown item id: {item!r}")
        return sigmoid(float(np.dot(self.user_vecs[user], self.item_vecs[item])))

    def threshold_reward(self, user, item) -> int:
        if self.threshold is None:
            raise ValueError("threshold not set; run select_threshold first")
        return int(self.click_prob(user, item) >= self.threshold)

    def oracle(self, user, rec_items, rng: np.random.Generator) -> np.ndarray:
        """Binary feedback for a recommended set: thresholded click
        probabilities, each independently flipped with flip_prob."""
        if len(rec_items) == 0:
            raise ValueError("recommendation set must be non-empty")
        y = np.array([self.threshold_reward(user, i) for i in rec_items])
        flips = rng.random(len(y)) < self.flip_prob
        return np.where(flips, 1 - y, y)

    @property
    def users(self) -> list:
        return sorted(self.user_vecs)

    @property
    def items(self) -> list:
        return sorted(self.item_vecs)


# -- propensities and debiased training -------------------------------------


def estimate_propensity(logs) -> dict:
    """Empirical exposure propensity per logged (user, item) pair:
    the fraction of the user's impressions that contained the item."""
    if not logs:
        raise ValueError("logs must be non-empty")
    user_imps: dict = {}
    pair_imps: dict = {}
    for rec in logs:
        user_imps.setdefault(rec.user, set()).add(rec.impression)
        pair_imps.setdefault((rec.user, rec.item), set()).add(rec.impression)
    return {
        pair: len(imps) / len(user_imps[pair[0]])
        for pair, imps in pair_imps.items()
    }


def hajek_weighted_bce(bce_terms, propensities) -> float:
    """Self-normalised inverse-propensity mean of BCE terms:
    sum(bce/p) / sum(1/p). Invariant to rescaling all propensities."""
    bce_terms = np.asarray(bce_terms, dtype=float)
    w = 1.0 / np.asarray(propensities, dtype=float)
    return float(np.sum(w * bce_terms) / np.sum(w))


def build_training_groups(logs, K: int, rng: np.random.Generator):
    """Pair each positive with K negatives from the same impression.

    Returns (groups, fallback_count): each group is a list of
    (user, item, label) rows. Impressions short on negatives sample with
    replacement; impressions with zero negatives fall back to one uniformly
    sampled global negative and the group is marked weightless (weight 1).
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    by_impression: dict = {}
    all_items = sorted({rec.item for rec in logs})
    for rec in logs:
        by_impression.setdefault(rec.impression, []).append(rec)
    groups = []
    fallback = 0
    for imp in sorted(by_impression):
        rows = by_impression[imp]
        negatives = sorted({r.item for r in rows if not r.label})
        for rec in rows:
            if not rec.label:
                continue
            if negatives:
                replace = len(negatives) < K
                idx = rng.choice(len(negatives), size=K, replace=replace)
                group = [(rec.user, rec.item, 1, False)]
                group += [(rec.user, negatives[k], 0, False) for k in idx]
            else:
                pool = [i for i in all_items if i != rec.item] or [rec.item]
                neg = pool[rng.integers(len(pool))]
                group = [(rec.user, rec.item, 1, True), (rec.user, neg, 0, True)]
                fallback += 1
            groups.append(group)
    if fallback:
        logger.info("debiased training: %d impression(s) had no negatives; used global fallback", fallback)
    return groups, fallback


def train_simulator_debiased(
    logs,
    propensities: dict,
    K: int,
    *,
    dim: int = 8,
    epochs: int = 200,
    learning_rate: float = 0.5,
    seed: int = 0,
    flip_prob: float = 0.1,
) -> GroundTruthModel:
    """Fit user/item vectors by gradient descent on the Hajek-debiased BCE.

    Each positive sample and its K sampled negatives form a group whose BCE
    terms are weighted by inverse propensity and normalised by the group's
    weight sum. The returned model has no threshold yet."""
    if not logs:
        raise ValueError("logs must be non-empty")
    rng = np.random.default_rng(seed)
    groups, _ = build_training_groups(logs, K, rng)
    if not groups:
        raise ValueError("no positive samples in logs; nothing to train on")

    users = sorted({rec.user for rec in logs})
    items = sorted({rec.item for rec in logs})
    u_row = {u: k for k, u in enumerate(users)}
    i_row = {i: k for k, i in enumerate(items)}
    U = rng.normal(scale=0.1, size=(len(users), dim))
    V = rng.normal(scale=0.1, size=(len(items), dim))

    u_idx, i_idx, y, w = [], [], [], []
    for group in groups:
        weights = np.array(
            [1.0 if unweighted else 1.0 / propensities[(user, item)] for user, item, _, unweighted in group]
        )
        weights /= weights.sum()
        for (user, item, label, _), wk in zip(group, weights):
            u_idx.append(u_row[user])
            i_idx.append(i_row[item])
            y.append(float(label))
            w.append(wk)
    u_idx = np.array(u_idx)
    i_idx = np.array(i_idx)
    y = np.array(y)
    w = np.array(w) / len(groups)

    for _ in range(epochs):
        scores = np.einsum("nd,nd->n", U[u_idx], V[i_idx])
        err = w * (sigmoid(scores) - y)
        gU = np.zeros_like(U)
        gV = np.zeros_like(V)
        np.add.at(gU, u_idx, err[:, None] * V[i_idx])
        np.add.at(gV, i_idx, err[:, None] * U[u_idx])
        U -= learning_rate * gU
        V -= learning_rate * gV

    return GroundTruthModel(
        user_vecs={u: U[k].copy() for u, k in u_row.items()},
        item_vecs={i: V[k].copy() for i, k in i_row.items()},
        threshold=None,
        flip_prob=flip_prob,
    )


# -- threshold selection -----------------------------------------------------


def best_f1_threshold(preds, labels) -> float:
    """Threshold over predicted probabilities maximising the f-score of the
    rule (pred >= threshold); candidates are the distinct predicted values,
    ties broken toward the smaller threshold."""
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if preds.shape != labels.shape or preds.ndim != 1 or len(preds) == 0:
        raise ValueError("preds and labels must be equal-length 1-d arrays")
    total_pos = int(labels.sum())
    if total_pos == 0 or total_pos == len(labels):
        raise ValueError("threshold selection needs both classes present")
    order = np.argsort(-preds, kind="stable")
    sp = preds[order]
    cum_tp = np.cumsum(labels[order])
    best_f1, best_thr = -1.0, None
    k = 0
    n = len(sp)
    while k < n:
        # advance to the last index sharing this predicted value
        j = k
        while j + 1 < n and sp[j + 1] == sp[k]:
            j += 1
        tp = int(cum_tp[j])
        pred_pos = j + 1
        precision = tp / pred_pos
        recall = tp / total_pos
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        if f1 >= best_f1:  # iterating in descending threshold order
            best_f1, best_thr = f1, float(sp[k])
        k = j + 1
    return best_thr


def select_threshold(model: GroundTruthModel, validation_logs) -> float:
    """Scan thresholds over the model's predicted probabilities on the
    validation set and return the f-score maximiser."""
    if not validation_logs:
        raise ValueError("validation logs must be non-empty")
    preds = np.array([model.click_prob(r.user, r.item) for r in validation_logs])
    labels = np.array([r.label for r in validation_logs])
    return best_f1_threshold(preds, labels)


# -- synthetic world ----------------------------------------------------------


@dataclass
class SyntheticWorld:
    """Everything a desk-scale experiment needs: the ground-truth model, the
    topic catalog, biased pretraining logs, and the encoder feature table."""

    model: GroundTruthModel
    catalog: TopicCatalog
    logs: list
    item_table: dict
    users: list = field(default_factory=list)
    seed: int = 0


def gen_synthetic_world(
    seed: int,
    n_topics: int,
    items_per_topic: int,
    n_users: int,
    dim: int,
    cluster_sharpness: float,
    *,
    flip_prob: float = 0.1,
    topic_imbalance: float = 0.0,
    n_pref_topics: int = 2,
    item_noise: float = 0.2,
    popularity_scale: float = 0.8,
    popularity_affinity: float = 0.35,
    base_offset: float = 0.5,
    topic_quality_gain: float = 0.5,
    good_topic_count: int = 0,
    exposure_bias: float = 0.5,
    impressions_per_user: int = 20,
    items_per_impression: int = 5,
) -> SyntheticWorld:
    """Build a clustered-topic world with per-item global quality variation.

    Geometry (last two coordinates are structural):
      items  = [topic centroid + noise, quality, 1]
      users  = sharpness * [unit mix of preferred centroids, affinity, -offset]

    so all click probabilities collapse to 0.5 at sharpness 0. With
    ``topic_imbalance > 0`` topic sizes follow a power law and larger topics
    get higher mean item quality; the emitted logs overexpose large topics,
    giving debiasing tests a biased logger.
    """
    if min(n_topics, items_per_topic, n_users, dim) < 1:
        raise ValueError("all world counts must be >= 1")
    if dim < 4:
        raise ValueError(f"dim must be >= 4 (feature block plus quality and offset), got {dim}")
    if n_pref_topics > n_topics:
        raise ValueError("n_pref_topics cannot exceed n_topics")
    rng = np.random.default_rng(seed)
    d_feat = dim - 2

    centroids = rng.normal(size=(n_topics, d_feat))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    # topic sizes: equal, or power-law decaying with rank
    if topic_imbalance > 0:
        weights = (np.arange(1, n_topics + 1)) ** (-float(topic_imbalance))
        sizes = np.maximum(1, np.round(weights / weights.sum() * n_topics * items_per_topic)).astype(int)
    else:
        sizes = np.full(n_topics, items_per_topic)
    # per-topic quality centers: either a plateau of `good_topic_count`
    # high-quality large topics above a uniform tail, or smoothly tied to
    # (log) topic size
    if good_topic_count > 0:
        quality_centers = np.full(n_topics, -0.5 * topic_quality_gain)
        quality_centers[:good_topic_count] = 0.5 * topic_quality_gain
    else:
        log_sizes = np.log(sizes.astype(float))
        spread = log_sizes.std()
        quality_centers = (
            topic_quality_gain * (log_sizes - log_sizes.mean()) / spread if spread > 0 else np.zeros(n_topics)
        )

    item_vecs: dict = {}
    item_table: dict = {}
    items_by_topic: dict = {}
    topic_of: dict = {}
    counter = 0
    for k in range(n_topics):
        topic = f"t{k:02d}"
        ids = []
        for _ in range(sizes[k]):
            item = f"i{counter:05d}"
            counter += 1
            feat = centroids[k] + item_noise * rng.normal(size=d_feat)
            quality = quality_centers[k] + popularity_scale * rng.normal()
            vec = np.concatenate([feat, [quality, 1.0]])
            item_vecs[item] = vec
            item_table[item] = vec[:-1].copy()
            topic_of[item] = topic
            ids.append(item)
        items_by_topic[topic] = ids
    catalog = TopicCatalog(items_by_topic)

    user_vecs: dict = {}
    for k in range(n_users):
        user = f"u{k:04d}"
        pref = rng.choice(n_topics, size=n_pref_topics, replace=False)
        mix = centroids[pref].mean(axis=0)
        norm = np.linalg.norm(mix)
        if norm > 0:
            mix = mix / norm
        user_vecs[user] = cluster_sharpness * np.concatenate(
            [mix, [popularity_affinity, -base_offset]]
        )
    users = sorted(user_vecs)

    model = GroundTruthModel(user_vecs, item_vecs, threshold=None, flip_prob=flip_prob)

    # biased logs: large topics are overexposed relative to item-uniform
    exp_w = sizes.astype(float) ** (1.0 + exposure_bias)
    exp_w /= exp_w.sum()
    topic_ids = catalog.topics
    logs: list = []
    for user in users:
        for n in range(impressions_per_user):
            imp = f"{user}_imp{n:03d}"
            shown: set = set()
            while len(shown) < min(items_per_impression, len(item_vecs)):
                topic = topic_ids[rng.choice(n_topics, p=exp_w)]
                members = catalog.items_by_topic[topic]
                shown.add(members[rng.integers(len(members))])
            for item in sorted(shown):
                p = model.click_prob(user, item)
                logs.append(LoggedInteraction(imp, user, item, int(rng.random() < p)))

    labels = {rec.label for rec in logs}
    if labels == {0, 1}:
        model.threshold = select_threshold(model, logs)
    else:
        logger.warning("synthetic logs are single-class; falling back to threshold 0.5")
        model.threshold = 0.5

    return SyntheticWorld(model=model, catalog=catalog, logs=logs, item_table=item_table, users=users, seed=seed)
