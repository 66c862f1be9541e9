"""Generalised-linear numerical kernel.

Incremental design matrices with a cached rank-one-updated inverse, the
Mahalanobis norms that drive UCB exploration widths, and logistic-loss
gradient steps for shared or per-entity coefficient vectors.
"""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

# Cached-inverse symmetry drift beyond this triggers a direct re-inversion.
_SYMMETRY_TOL = 1e-6


def sigmoid(v):
    """Numerically stable logistic function, elementwise on arrays.

    Uses exp(min(v, 0)) / (1 + exp(-|v|)), which never overflows and
    saturates cleanly to 0/1 at floating-point limits.
    """
    v = np.asarray(v, dtype=float)
    out = np.exp(np.minimum(v, 0.0)) / (1.0 + np.exp(-np.abs(v)))
    if out.ndim == 0:
        return float(out)
    return out


class DesignState:
    """Positive-definite matrix M = I + sum of c c^T with a cached inverse.

    The inverse is maintained by rank-one (Sherman-Morrison) updates so
    scoring stays O(d^2) per query. If the cached inverse drifts from
    symmetry it is recomputed from M directly and ``resync_count`` is
    incremented.

    Single-writer value: concurrent reads between updates are safe, there
    is no internal locking.
    """

    __slots__ = ("dim", "M", "Minv", "n_obs", "resync_count")

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self.M = np.eye(self.dim)
        self.Minv = np.eye(self.dim)
        self.n_obs = 0
        self.resync_count = 0

    def _check_dim(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.dim,):
            raise ValueError(f"context has shape {c.shape}, expected ({self.dim},)")
        return c

    def absorb(self, c) -> "DesignState":
        """Add the outer product c c^T to M and update the cached inverse."""
        c = self._check_dim(c)
        self.M += np.outer(c, c)
        u = self.Minv @ c
        denom = 1.0 + float(c @ u)
        self.Minv -= np.outer(u, u) / denom
        self.n_obs += 1
        drift = float(np.max(np.abs(self.Minv - self.Minv.T)))
        if drift > _SYMMETRY_TOL:
            self.Minv = np.linalg.inv(self.M)
            self.resync_count += 1
            logger.debug("design inverse resynced (drift %.3g, count %d)", drift, self.resync_count)
        return self

    def mahalanobis(self, c) -> float:
        """sqrt(c^T M^{-1} c), the confidence-ellipsoid width along c."""
        c = self._check_dim(c)
        q = float(c @ self.Minv @ c)
        return float(np.sqrt(max(q, 0.0)))

    def mahalanobis_batch(self, C: np.ndarray) -> np.ndarray:
        """Row-wise mahalanobis for an (n, dim) matrix of contexts."""
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[1] != self.dim:
            raise ValueError(f"context batch has shape {C.shape}, expected (n, {self.dim})")
        q = np.einsum("ni,ni->n", C @ self.Minv, C)
        return np.sqrt(np.maximum(q, 0.0))

    def copy(self) -> "DesignState":
        out = DesignState(self.dim)
        out.M = self.M.copy()
        out.Minv = self.Minv.copy()
        out.n_obs = self.n_obs
        out.resync_count = self.resync_count
        return out


class GlmCoefficients:
    """Coefficient vector for a logistic-link GLM, fitted by gradient steps."""

    __slots__ = ("theta", "learning_rate")

    def __init__(self, dim: int, learning_rate: float = 0.01):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {learning_rate}")
        self.theta = np.zeros(int(dim))
        self.learning_rate = float(learning_rate)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def predict(self, c) -> float:
        """P(y=1 | c) under the current coefficients."""
        c = np.asarray(c, dtype=float)
        if c.shape != self.theta.shape:
            raise ValueError(f"context has shape {c.shape}, expected {self.theta.shape}")
        return sigmoid(float(c @ self.theta))

    def step(self, batch) -> "GlmCoefficients":
        """One gradient step on the summed binary cross-entropy of the batch.

        ``batch`` is a sequence of (context, label) pairs; labels may be
        fractional (used by probe tests). A non-finite gradient leaves the
        state unchanged and raises.
        """
        if len(batch) == 0:
            raise ValueError("glm step requires a non-empty batch")
        grad = np.zeros_like(self.theta)
        with np.errstate(invalid="ignore"):
            for c, y in batch:
                c = np.asarray(c, dtype=float)
                if c.shape != self.theta.shape:
                    raise ValueError(f"context has shape {c.shape}, expected {self.theta.shape}")
                grad += (sigmoid(float(c @ self.theta)) - float(y)) * c
        if not np.all(np.isfinite(grad)):
            raise ValueError("non-finite gradient; step rejected")
        self.theta = self.theta - self.learning_rate * grad
        return self

    def copy(self) -> "GlmCoefficients":
        out = GlmCoefficients(self.dim, self.learning_rate)
        out.theta = self.theta.copy()
        return out


def bce_loss(logits, labels) -> float:
    """Mean binary cross-entropy of raw scores against 0/1 labels."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=float)
    p = np.clip(sigmoid(logits), 1e-12, 1.0 - 1e-12)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))
