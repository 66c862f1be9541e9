"""Acquisition policies and their per-policy state/update rules.

Every policy exposes ``score`` for a single (user, arm) context and
``score_batch`` for a candidate matrix, plus ``update`` consuming the
iteration's feedback. UCB scores take the form

    predicted reward + beta * predicted uncertainty,

with beta = 0 reducing each policy to its greedy exploitation term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from banditrec.encoders import TwoTowerEncoder
from banditrec.glm import DesignState, GlmCoefficients, sigmoid

POLICY_NAMES = (
    "random",
    "greedy",
    "glm_ucb",
    "n_glm_ucb",
    "dropout_ucb",
    "s_galm_ucb",
    "s_gblm_ucb",
)

# Policies whose item contexts come straight from the feature table rather
# than the encoder ("n_"-prefixed names and the neural policies use the
# encoder output).
RAW_CONTEXT_POLICIES = ("glm_ucb",)


@dataclass
class AcquisitionContext:
    """One (user, arm) scoring request."""

    x: np.ndarray  # arm embedding, bias-augmented
    z: np.ndarray  # user embedding, bias-augmented
    user_id: object
    arm_id: object
    beta: float = 0.0


@dataclass
class Feedback:
    """One observed impression used for policy updates."""

    user_id: object
    arm_id: object
    x: np.ndarray
    z: np.ndarray
    y: float


def vec_outer(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Column-major stacking of the outer product x z^T.

    Entry x_i * z_j lands at flat index i + j*len(x); a consistent ordering
    is required because the shared design matrix lives in this flat space.
    """
    return np.outer(x, z).ravel(order="F")


def vec_outer_batch(X: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Row k is vec_outer(X[k], z); shape (n, d1*d2)."""
    return np.einsum("j,ni->nji", z, X).reshape(X.shape[0], -1)


class Policy:
    """Base interface; scoring is read-only, updates are exclusive."""

    def score(self, ctx: AcquisitionContext) -> float:
        raise NotImplementedError

    def score_batch(self, user_id, arm_ids, X, z, beta: float) -> np.ndarray:
        return np.array(
            [self.score(AcquisitionContext(X[k], z, user_id, a, beta)) for k, a in enumerate(arm_ids)]
        )

    def update(self, batch: list) -> None:
        pass


class RandomPolicy(Policy):
    """Uniform(0,1) score per candidate; argmax is a uniform choice."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def score(self, ctx: AcquisitionContext) -> float:
        return float(self.rng.random())

    def score_batch(self, user_id, arm_ids, X, z, beta: float) -> np.ndarray:
        return self.rng.random(len(arm_ids))


class GreedyPolicy(Policy):
    """Deterministic two-tower prediction, no exploration term."""

    def score(self, ctx: AcquisitionContext) -> float:
        return float(ctx.x @ ctx.z)

    def score_batch(self, user_id, arm_ids, X, z, beta: float) -> np.ndarray:
        return np.asarray(X) @ np.asarray(z)


class DropoutUcbPolicy(Policy):
    """Monte-Carlo-dropout UCB: mean of stochastic predictions plus beta
    times their standard deviation."""

    def __init__(self, encoder: TwoTowerEncoder, rng: np.random.Generator, kind: str = "item"):
        self.encoder = encoder
        self.rng = rng
        self.kind = kind

    def score(self, ctx: AcquisitionContext) -> float:
        mean, std = self.encoder.mc_dropout_stats(ctx.user_id, ctx.arm_id, self.rng, kind=self.kind)
        return mean + ctx.beta * std

    def score_batch(self, user_id, arm_ids, X, z, beta: float) -> np.ndarray:
        preds = self.encoder.mc_predict_batch(user_id, arm_ids, self.rng, kind=self.kind)
        return preds.mean(axis=1) + beta * preds.std(axis=1)


class DisjointGlmUcbPolicy(Policy):
    """Per-user logistic UCB; a user's coefficients and design state change
    only from that user's feedback. Unseen users score with fresh state
    (zero coefficients, identity design)."""

    def __init__(self, dim: int, learning_rate: float = 0.01):
        self.dim = int(dim)
        self.learning_rate = float(learning_rate)
        self.states: dict = {}

    def _state(self, user_id):
        if user_id not in self.states:
            self.states[user_id] = (GlmCoefficients(self.dim, self.learning_rate), DesignState(self.dim))
        return self.states[user_id]

    def score(self, ctx: AcquisitionContext) -> float:
        if ctx.user_id in self.states:
            coef, design = self.states[ctx.user_id]
            return coef.predict(ctx.x) + ctx.beta * design.mahalanobis(ctx.x)
        x = np.asarray(ctx.x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"context has shape {x.shape}, expected ({self.dim},)")
        return sigmoid(0.0) + ctx.beta * float(np.linalg.norm(x))

    def score_batch(self, user_id, arm_ids, X, z, beta: float) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if user_id in self.states:
            coef, design = self.states[user_id]
            return sigmoid(X @ coef.theta) + beta * design.mahalanobis_batch(X)
        return sigmoid(np.zeros(len(arm_ids))) + beta * np.linalg.norm(X, axis=1)

    def update(self, batch: list) -> None:
        by_user: dict = {}
        for fb in batch:
            by_user.setdefault(fb.user_id, []).append(fb)
        for user_id, rows in by_user.items():
            coef, design = self._state(user_id)
            for fb in rows:
                design.absorb(fb.x)
            coef.step([(fb.x, fb.y) for fb in rows])


class AdditiveSharedUcbPolicy(Policy):
    """Shared generalised-additive UCB.

    A single item-side coefficient vector and a single user-side coefficient
    vector are shared by everyone; uncertainty splits into a per-user design
    over item contexts and a per-arm design over user contexts, mixed by
    gamma. Fresh design states are the identity.
    """

    def __init__(self, d1: int, d2: int, gamma: float = 0.5, learning_rate: float = 0.01):
        if not (0.0 <= gamma <= 1.0):
            raise ValueError(f"gamma must be in [0, 1], got {gamma}")
        self.d1 = int(d1)
        self.d2 = int(d2)
        self.gamma = float(gamma)
        self.theta_x = GlmCoefficients(self.d1, learning_rate)
        self.theta_z = GlmCoefficients(self.d2, learning_rate)
        self.A_x: dict = {}  # user id -> design over item contexts shown to them
        self.A_z: dict = {}  # arm id -> design over user contexts it was shown to

    def _unc_x(self, user_id, x: np.ndarray) -> float:
        if user_id in self.A_x:
            return self.A_x[user_id].mahalanobis(x)
        return float(np.linalg.norm(x))

    def _unc_z(self, arm_id, z: np.ndarray) -> float:
        if arm_id in self.A_z:
            return self.A_z[arm_id].mahalanobis(z)
        return float(np.linalg.norm(z))

    def exploit(self, x: np.ndarray, z: np.ndarray) -> float:
        g = self.gamma
        return sigmoid(g * float(x @ self.theta_x.theta) + (1.0 - g) * float(self.theta_z.theta @ z))

    def score(self, ctx: AcquisitionContext) -> float:
        g = self.gamma
        unc = g * self._unc_x(ctx.user_id, ctx.x) + (1.0 - g) * self._unc_z(ctx.arm_id, ctx.z)
        return self.exploit(ctx.x, ctx.z) + ctx.beta * unc

    def score_batch(self, user_id, arm_ids, X, z, beta: float) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        z = np.asarray(z, dtype=float)
        g = self.gamma
        exploit = sigmoid(g * (X @ self.theta_x.theta) + (1.0 - g) * float(self.theta_z.theta @ z))
        if user_id in self.A_x:
            unc_x = self.A_x[user_id].mahalanobis_batch(X)
        else:
            unc_x = np.linalg.norm(X, axis=1)
        z_norm = float(np.linalg.norm(z))
        unc_z = np.array(
            [self.A_z[a].mahalanobis(z) if a in self.A_z else z_norm for a in arm_ids]
        )
        return exploit + beta * (g * unc_x + (1.0 - g) * unc_z)

    def update(self, batch: list) -> None:
        if not batch:
            return
        g = self.gamma
        for fb in batch:
            self.A_x.setdefault(fb.user_id, DesignState(self.d1)).absorb(fb.x)
            self.A_z.setdefault(fb.arm_id, DesignState(self.d2)).absorb(fb.z)
        self.theta_x.step([(g * fb.x, fb.y) for fb in batch])
        self.theta_z.step([((1.0 - g) * fb.z, fb.y) for fb in batch])


class BilinearSharedUcbPolicy(Policy):
    """Shared generalised-bilinear UCB.

    One coefficient matrix is shared by all (user, arm) pairs; uncertainty
    is the Mahalanobis width of vec(x z^T) under a single design state over
    the flattened pair space, so x^T Theta z == <vec(x z^T), vec(Theta)>.
    """

    def __init__(self, d1: int, d2: int, learning_rate: float = 0.001):
        self.d1 = int(d1)
        self.d2 = int(d2)
        self.learning_rate = float(learning_rate)
        self.Theta = np.zeros((self.d1, self.d2))
        self.W = DesignState(self.d1 * self.d2)

    def exploit(self, x: np.ndarray, z: np.ndarray) -> float:
        return sigmoid(float(x @ self.Theta @ z))

    def score(self, ctx: AcquisitionContext) -> float:
        x = np.asarray(ctx.x, dtype=float)
        z = np.asarray(ctx.z, dtype=float)
        if x.shape != (self.d1,) or z.shape != (self.d2,):
            raise ValueError(f"context dims {x.shape}/{z.shape}, expected ({self.d1},)/({self.d2},)")
        return self.exploit(x, z) + ctx.beta * self.W.mahalanobis(vec_outer(x, z))

    def score_batch(self, user_id, arm_ids, X, z, beta: float) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        z = np.asarray(z, dtype=float)
        exploit = sigmoid((X @ self.Theta) @ z)
        if beta == 0.0:
            return exploit
        V = vec_outer_batch(X, z)
        return exploit + beta * self.W.mahalanobis_batch(V)

    def update(self, batch: list) -> None:
        if not batch:
            return
        grad = np.zeros_like(self.Theta)
        for fb in batch:
            self.W.absorb(vec_outer(fb.x, fb.z))
            grad += (self.exploit(fb.x, fb.z) - fb.y) * np.outer(fb.x, fb.z)
        if not np.all(np.isfinite(grad)):
            raise ValueError("non-finite gradient; bilinear update rejected")
        self.Theta = self.Theta - self.learning_rate * grad
