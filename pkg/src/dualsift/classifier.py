"""Small MLP classifier used by the toy semi-supervised loop.

Exposes both logits and the last hidden activations; the latter play the
role of the feature embedding when scoring with a live model.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoints import load_flat_params, save_flat_params
from .seeding import rng_from

_CHECKPOINT_TAG = "toyclassifier"
_PROB_CLAMP = 1e-7


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ToyClassifier:
    w1: np.ndarray  # (D, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, K)
    b2: np.ndarray  # (K,)

    @classmethod
    def initialize(cls, input_dim: int, hidden: int, num_classes: int, seed: int = 0) -> "ToyClassifier":
        rng = rng_from(seed)
        lim1 = 1.0 / np.sqrt(input_dim)
        lim2 = 1.0 / np.sqrt(hidden)
        return cls(
            w1=rng.uniform(-lim1, lim1, size=(input_dim, hidden)),
            b1=rng.uniform(-lim1, lim1, size=hidden),
            w2=rng.uniform(-lim2, lim2, size=(hidden, num_classes)),
            b2=rng.uniform(-lim2, lim2, size=num_classes),
        )

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[1]

    def copy(self) -> "ToyClassifier":
        return ToyClassifier(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (logits, hidden activations) for a (n, D) batch."""
        z1 = np.asarray(x, dtype=np.float64) @ self.w1 + self.b1
        h = np.maximum(z1, 0.0)
        return h @ self.w2 + self.b2, h

    def probs(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x)
        return softmax_rows(logits)


def mixed_loss_and_grads(
    clf: ToyClassifier,
    x_labeled: np.ndarray, targets: np.ndarray,
    x_unlabeled: np.ndarray, guesses: np.ndarray,
    lambda_u: float, lambda_r: float,
):
    """Total loss and analytic gradients for one mixed batch.

    Loss = cross-entropy on the labeled group + lambda_u * mean squared
    error on the unlabeled group + lambda_r * KL(uniform || mean batch
    prediction). Either group may be empty.
    """
    nc, nu = x_labeled.shape[0], x_unlabeled.shape[0]
    n_all = nc + nu
    if n_all == 0:
        raise ValueError("both batch groups are empty")
    if nc and nu:
        x = np.vstack([x_labeled, x_unlabeled]).astype(np.float64)
    elif nc:
        x = np.asarray(x_labeled, dtype=np.float64)
    else:
        x = np.asarray(x_unlabeled, dtype=np.float64)
    z1 = x @ clf.w1 + clf.b1
    h = np.maximum(z1, 0.0)
    logits = h @ clf.w2 + clf.b2
    p = softmax_rows(logits)
    k = clf.num_classes

    loss = 0.0
    dlogits = np.zeros_like(p)
    # gradient of terms that act through the probabilities
    gp = np.zeros_like(p)

    if nc:
        pc = np.clip(p[:nc], _PROB_CLAMP, None)
        loss += float(-(targets * np.log(pc)).sum() / nc)
        dlogits[:nc] += (p[:nc] - targets) / nc
    if nu:
        diff = p[nc:] - guesses
        loss += lambda_u * float((diff * diff).sum() / nu)
        gp[nc:] += lambda_u * 2.0 * diff / nu
    if lambda_r:
        mean_pred = p.mean(axis=0)
        clipped = np.clip(mean_pred, _PROB_CLAMP, None)
        uniform = 1.0 / k
        loss += lambda_r * float((uniform * (np.log(uniform) - np.log(clipped))).sum())
        gp += lambda_r * (-uniform / clipped) / n_all

    # softmax Jacobian-vector product, per row
    dlogits += p * (gp - (gp * p).sum(axis=1, keepdims=True))

    dz1 = (dlogits @ clf.w2.T) * (z1 > 0)
    grads = {
        "w2": h.T @ dlogits,
        "b2": dlogits.sum(axis=0),
        "w1": x.T @ dz1,
        "b1": dz1.sum(axis=0),
    }
    return loss, grads


def apply_sgd_step(clf: ToyClassifier, grads: dict, lr: float) -> None:
    clf.w1 -= lr * grads["w1"]
    clf.b1 -= lr * grads["b1"]
    clf.w2 -= lr * grads["w2"]
    clf.b2 -= lr * grads["b2"]


def save_classifier_checkpoint(clf: ToyClassifier, path: str | Path) -> None:
    save_flat_params(path, _CHECKPOINT_TAG,
                     (clf.input_dim, clf.hidden, clf.num_classes),
                     [clf.w1, clf.b1, clf.w2, clf.b2])


def load_classifier_checkpoint(path: str | Path) -> ToyClassifier:
    def shapes_of(dims):
        if len(dims) != 3:
            raise ValueError(f"bad classifier checkpoint dims {dims}")
        d, h, k = dims
        return [(d, h), (h,), (h, k), (k,)]

    _, arrays = load_flat_params(path, _CHECKPOINT_TAG, shapes_of)
    return ToyClassifier(*arrays)
