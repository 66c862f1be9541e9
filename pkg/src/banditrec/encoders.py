"""Two-tower user/item encoders at desk scale.

Items carry fixed base vectors which a trainable square projection maps to
item embeddings; users are the mean of their clicked items' embeddings.
Every emitted embedding is bias-augmented (final component exactly 1).
Monte-Carlo dropout on item components provides stochastic inference for
uncertainty estimates.
"""

from __future__ import annotations

import numpy as np

from banditrec.glm import sigmoid


def bias_augment(vec) -> np.ndarray:
    """Append the bias slot (a trailing 1.0) to a raw feature vector."""
    vec = np.asarray(vec, dtype=float).ravel()
    return np.concatenate([vec, [1.0]])


class TwoTowerEncoder:
    """Trainable dot-product encoder over a fixed item feature table.

    Parameters
    ----------
    item_table : mapping of item id to base feature vector (all the same
        length; the bias slot is appended internally, so embeddings have
        dimension ``len(vec) + 1``).
    topic_table : optional mapping of topic id to base feature vector; any
        topic ids passed in ``topic_ids`` without a table entry get a random
        initial vector drawn from ``rng``.
    """

    def __init__(
        self,
        item_table: dict,
        *,
        dropout_rate: float = 0.0,
        mc_samples: int = 5,
        history_cap: int = 50,
        learning_rate: float = 0.01,
        topic_ids=None,
        topic_table: dict | None = None,
        rng: np.random.Generator | None = None,
    ):
        if not item_table:
            raise ValueError("item_table must not be empty")
        if not (0.0 <= dropout_rate < 1.0):
            raise ValueError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        if mc_samples < 1:
            raise ValueError(f"mc_samples must be >= 1, got {mc_samples}")

        self.item_ids = sorted(item_table)
        self._row = {item: k for k, item in enumerate(self.item_ids)}
        self._base = np.array([np.asarray(item_table[i], dtype=float) for i in self.item_ids])
        if self._base.ndim != 2:
            raise ValueError("item vectors must all have the same length")
        self.feat_dim = self._base.shape[1]
        self.dim = self.feat_dim + 1

        self.projection = np.eye(self.feat_dim)
        self.dropout_rate = float(dropout_rate)
        self.mc_samples = int(mc_samples)
        self.history_cap = int(history_cap)
        self.learning_rate = float(learning_rate)
        self.user_history: dict = {}

        self.topic_vecs: dict = {}
        topic_table = topic_table or {}
        rng = rng if rng is not None else np.random.default_rng(0)
        for t in sorted(topic_ids or topic_table):
            if t in topic_table:
                v = np.asarray(topic_table[t], dtype=float)
                if v.shape != (self.feat_dim,):
                    raise ValueError(f"topic vector for {t!r} has wrong length")
                self.topic_vecs[t] = v.copy()
            else:
                self.topic_vecs[t] = rng.normal(scale=0.1, size=self.feat_dim)

        self._encoded = self._base @ self.projection.T

    # -- user registry -----------------------------------------------------

    def register_user(self, user_id) -> None:
        self.user_history.setdefault(user_id, [])

    def record_click(self, user_id, item_id) -> None:
        """Append a clicked item to the user's history, keeping the newest H."""
        if item_id not in self._row:
            raise KeyError(f"unknown item id: {item_id!r}")
        hist = self.user_history.setdefault(user_id, [])
        hist.append(item_id)
        if len(hist) > self.history_cap:
            del hist[: len(hist) - self.history_cap]

    # -- encoding ----------------------------------------------------------

    def _dropout(self, pre_bias: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.dropout_rate == 0.0:
            return pre_bias
        keep = rng.random(pre_bias.shape) >= self.dropout_rate
        return pre_bias * keep / (1.0 - self.dropout_rate)

    def encode_item(self, item_id, stochastic: bool = False, rng=None) -> np.ndarray:
        if item_id not in self._row:
            raise KeyError(f"unknown item id: {item_id!r}")
        pre = self._encoded[self._row[item_id]].copy()
        if stochastic:
            pre = self._dropout(pre, self._require_rng(rng))
        return np.concatenate([pre, [1.0]])

    def encode_items(self, item_ids, stochastic: bool = False, rng=None) -> np.ndarray:
        """Encode a batch of items into an (n, dim) matrix; masks are drawn
        independently per item when stochastic."""
        rows = [self._row[i] if i in self._row else self._raise_item(i) for i in item_ids]
        pre = self._encoded[rows]
        if stochastic:
            pre = self._dropout(pre, self._require_rng(rng))
        return np.hstack([pre, np.ones((len(rows), 1))])

    def _raise_item(self, item_id):
        raise KeyError(f"unknown item id: {item_id!r}")

    @staticmethod
    def _require_rng(rng):
        if rng is None:
            raise ValueError("stochastic encoding requires an rng")
        return rng

    def _history_pre_bias(self, user_id, stochastic: bool, rng) -> np.ndarray:
        if user_id not in self.user_history:
            raise KeyError(f"unknown user id: {user_id!r}")
        hist = self.user_history[user_id]
        if not hist:
            return np.zeros(self.feat_dim)
        pre = self._encoded[[self._row[i] for i in hist]]
        if stochastic:
            pre = self._dropout(pre, self._require_rng(rng))
        return pre.mean(axis=0)

    def encode_user(self, user_id, stochastic: bool = False, rng=None) -> np.ndarray:
        """Mean of the user's clicked-item embeddings, bias slot appended.
        Users with no history map to the zero vector with bias 1."""
        return np.concatenate([self._history_pre_bias(user_id, stochastic, rng), [1.0]])

    def topic_vector(self, topic_id) -> np.ndarray:
        if topic_id not in self.topic_vecs:
            raise KeyError(f"unknown topic id: {topic_id!r}")
        return np.concatenate([self.topic_vecs[topic_id], [1.0]])

    # -- prediction --------------------------------------------------------

    def predict_click(self, user_id, item_id, stochastic: bool = False, rng=None) -> float:
        z = self.encode_user(user_id, stochastic, rng)
        x = self.encode_item(item_id, stochastic, rng)
        return float(z @ x)

    def score_topic(self, user_id, topic_id, stochastic: bool = False, rng=None) -> float:
        z = self.encode_user(user_id, stochastic, rng)
        return float(z @ self.topic_vector(topic_id))

    def mc_dropout_stats(self, user_id, arm_id, rng, kind: str = "item"):
        """Sample mc_samples stochastic predictions; return their mean and
        population standard deviation."""
        if self.mc_samples < 2:
            raise ValueError("mc_dropout_stats requires mc_samples >= 2")
        if kind == "item":
            arm = lambda: self.encode_item(arm_id, stochastic=True, rng=rng)
        elif kind == "topic":
            arm = lambda: self.topic_vector(arm_id)
        else:
            raise ValueError(f"unknown arm kind: {kind!r}")
        preds = np.empty(self.mc_samples)
        for s in range(self.mc_samples):
            z = self.encode_user(user_id, stochastic=True, rng=rng)
            preds[s] = z @ arm()
        return float(preds.mean()), float(preds.std())

    def mc_predict_batch(self, user_id, arm_ids, rng, kind: str = "item") -> np.ndarray:
        """(n_arms, mc_samples) stochastic predictions for a candidate batch.

        One stochastic user embedding is drawn per sample and shared across
        the batch; item-side masks are independent per (arm, sample).
        """
        if self.mc_samples < 2:
            raise ValueError("mc_predict_batch requires mc_samples >= 2")
        n = len(arm_ids)
        if kind == "item":
            rows = [self._row[i] if i in self._row else self._raise_item(i) for i in arm_ids]
            base = self._encoded[rows]
        elif kind == "topic":
            base = np.array([self.topic_vecs[t] for t in arm_ids])
        else:
            raise ValueError(f"unknown arm kind: {kind!r}")
        preds = np.empty((n, self.mc_samples))
        for s in range(self.mc_samples):
            z = self._history_pre_bias(user_id, stochastic=True, rng=rng)
            arm_pre = self._dropout(base, rng) if kind == "item" else base
            preds[:, s] = arm_pre @ z + 1.0
        return preds

    # -- training ----------------------------------------------------------

    def train(self, batch) -> float:
        """One full-batch gradient step on the click BCE, updating the
        projection only. Returns the pre-step loss."""
        if len(batch) == 0:
            raise ValueError("train requires a non-empty batch")
        B = np.empty((len(batch), self.feat_dim))
        H = np.empty((len(batch), self.feat_dim))
        y = np.empty(len(batch))
        for k, (user_id, item_id, label) in enumerate(batch):
            if item_id not in self._row:
                self._raise_item(item_id)
            B[k] = self._base[self._row[item_id]]
            H[k] = self._history_base_mean(user_id)
            y[k] = label
        P = self.projection
        logits = np.einsum("nd,nd->n", B @ P.T, H @ P.T) + 1.0
        p = sigmoid(logits)
        loss = self._bce(p, y)
        if not np.isfinite(loss):
            raise ValueError("non-finite encoder loss; update skipped")
        e = (p - y) / len(batch)
        inner = B.T @ (e[:, None] * H)
        grad = P @ (inner + inner.T)
        self.projection = P - self.learning_rate * grad
        self._encoded = self._base @ self.projection.T
        return loss

    def _history_base_mean(self, user_id) -> np.ndarray:
        if user_id not in self.user_history:
            raise KeyError(f"unknown user id: {user_id!r}")
        hist = self.user_history[user_id]
        if not hist:
            return np.zeros(self.feat_dim)
        return self._base[[self._row[i] for i in hist]].mean(axis=0)

    def train_topics(self, batch, rng: np.random.Generator) -> float:
        """Gradient step on topic-click BCE over the batch's positives, each
        paired 1:1 with a uniformly sampled topic the user did not click.
        Updates topic vectors only; returns the pre-step loss."""
        if len(batch) == 0:
            raise ValueError("train_topics requires a non-empty batch")
        clicked = {}
        for user_id, topic_id, label in batch:
            if topic_id not in self.topic_vecs:
                raise KeyError(f"unknown topic id: {topic_id!r}")
            if label:
                clicked.setdefault(user_id, set()).add(topic_id)
        all_topics = sorted(self.topic_vecs)
        pairs = []
        for user_id, topic_id, label in batch:
            if not label:
                continue
            pairs.append((user_id, topic_id, 1.0))
            pool = [t for t in all_topics if t not in clicked.get(user_id, ())]
            if pool:
                pairs.append((user_id, pool[rng.integers(len(pool))], 0.0))
        if not pairs:
            return 0.0
        grads = {t: np.zeros(self.feat_dim) for t in {t for _, t, _ in pairs}}
        losses = np.empty(len(pairs))
        for k, (user_id, topic_id, label) in enumerate(pairs):
            z = self._history_pre_bias(user_id, stochastic=False, rng=None)
            logit = float(z @ self.topic_vecs[topic_id]) + 1.0
            p = sigmoid(logit)
            losses[k] = self._bce(np.array(p), np.array(label))
            grads[topic_id] += (p - label) * z / len(pairs)
        loss = float(losses.mean())
        if not np.isfinite(loss):
            raise ValueError("non-finite topic loss; update skipped")
        for t, g in grads.items():
            self.topic_vecs[t] = self.topic_vecs[t] - self.learning_rate * g
        return loss

    @staticmethod
    def _bce(p, y) -> float:
        p = np.clip(p, 1e-12, 1.0 - 1e-12)
        return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))
