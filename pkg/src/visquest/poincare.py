"""Hyperbolic word embeddings in the open unit ball.

Taxonomy edges are embedded by minimizing a softmax ranking loss over
hyperbolic distances: each (child, parent) pair should be closer than the
child is to sampled negative words. Updates are Riemannian: the Euclidean
gradient is rescaled by (1 - ||theta||^2)^2 / 4 and iterates are retracted
inside the ball.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DomainError, NotFoundError
from .taxonomy import Taxonomy

EPS_BALL = 1e-5
# Retraction lands slightly inside 1 - EPS_BALL so the ball invariant stays
# strict under floating-point rounding.
_RETRACT_NORM = 1.0 - EPS_BALL - 1e-9


def _check_in_ball(vec: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if np.linalg.norm(v) >= 1.0:
        raise DomainError(f"{name} must lie strictly inside the unit ball")
    return v


def poincare_distance(u: np.ndarray, v: np.ndarray) -> float:
    """d(u,v) = arcosh(1 + 2|u-v|^2 / ((1-|u|^2)(1-|v|^2)))."""
    u = _check_in_ball(u, "u")
    v = _check_in_ball(v, "v")
    alpha = 1.0 - u @ u
    beta = 1.0 - v @ v
    sq = u - v
    gamma = 1.0 + 2.0 * (sq @ sq) / (alpha * beta)
    return float(np.arccosh(gamma))


def _distance_and_grads(u: np.ndarray, v: np.ndarray):
    """Distance plus Euclidean gradients wrt u and v."""
    alpha = 1.0 - u @ u
    beta = 1.0 - v @ v
    diff = u - v
    sqdist = diff @ diff
    gamma = 1.0 + 2.0 * sqdist / (alpha * beta)
    dist = np.arccosh(gamma)
    denom = max(np.sqrt(gamma * gamma - 1.0), 1e-15)
    uu, vv, uv = u @ u, v @ v, u @ v
    grad_u = (4.0 / (beta * denom)) * (((vv - 2.0 * uv + 1.0) / alpha**2) * u - v / alpha)
    grad_v = (4.0 / (alpha * denom)) * (((uu - 2.0 * uv + 1.0) / beta**2) * v - u / beta)
    return dist, grad_u, grad_v


def edge_loss(u: np.ndarray, v: np.ndarray, negatives: list) -> float:
    """-log softmax of -d(u, v) against the negatives."""
    dists = np.array([poincare_distance(u, v)] +
                     [poincare_distance(u, n) for n in negatives])
    shifted = -dists - (-dists).max()
    return float(dists[0] + (-dists).max() + np.log(np.exp(shifted).sum()))


def edge_loss_grads(u: np.ndarray, v: np.ndarray, negatives: list):
    """Loss and Euclidean gradients wrt u, v, and every negative."""
    pairs = [v] + list(negatives)
    dists = np.empty(len(pairs))
    grads_u = []
    grads_x = []
    for i, x in enumerate(pairs):
        d, gu, gx = _distance_and_grads(u, x)
        dists[i] = d
        grads_u.append(gu)
        grads_x.append(gx)
    neg = -dists
    shift = neg.max()
    weights = np.exp(neg - shift)
    weights /= weights.sum()           # softmax over -d
    loss = dists[0] + shift + np.log(np.exp(neg - shift).sum())
    # coefficient of d_i in the loss: 1 - w_0 for the true pair, -w_i otherwise
    coeff = -weights
    coeff[0] += 1.0
    grad_u = np.zeros_like(u)
    grad_pairs = []
    for i in range(len(pairs)):
        grad_u += coeff[i] * grads_u[i]
        grad_pairs.append(coeff[i] * grads_x[i])
    return float(loss), grad_u, grad_pairs[0], grad_pairs[1:]


def gradient_check(u: np.ndarray, v: np.ndarray, negatives: list, h: float = 1e-5) -> float:
    """Max relative error of analytic gradients vs central differences."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    negatives = [np.asarray(n, dtype=np.float64) for n in negatives]
    _, grad_u, grad_v, grad_negs = edge_loss_grads(u, v, negatives)

    def loss_at(vectors):
        return edge_loss(vectors[0], vectors[1], vectors[2:])

    vectors = [u, v] + negatives
    analytic = [grad_u, grad_v] + grad_negs
    worst = 0.0
    for vi, grad in zip(range(len(vectors)), analytic):
        for d in range(vectors[vi].shape[0]):
            bumped = [x.copy() for x in vectors]
            bumped[vi][d] += h
            up = loss_at(bumped)
            bumped[vi][d] -= 2 * h
            down = loss_at(bumped)
            fd = (up - down) / (2 * h)
            err = abs(grad[d] - fd) / max(1e-8, abs(grad[d]) + abs(fd))
            worst = max(worst, err)
    return worst


@dataclass
class EmbeddingConfig:
    dim: int = 10
    epochs: int = 200
    lr: float = 0.3
    n_neg: int = 10
    seed: int = 0
    burn_in_epochs: int = 10

    def validate(self):
        if self.dim < 2:
            raise ConfigError("embedding dimension must be >= 2")
        if self.epochs < 1 or self.lr <= 0 or self.n_neg < 1:
            raise ConfigError("epochs, lr, and n_neg must be positive")


@dataclass
class PoincareEmbedding:
    dim: int
    vectors: dict
    meta: dict = field(default_factory=dict)

    def __contains__(self, word: str) -> bool:
        return word in self.vectors


def embed(embedding: PoincareEmbedding, word: str) -> np.ndarray:
    if word not in embedding.vectors:
        raise NotFoundError(f"word {word!r} not in embedding")
    return embedding.vectors[word].copy()


def _retract(vec: np.ndarray) -> None:
    norm = np.linalg.norm(vec)
    if norm >= 1.0 - EPS_BALL:
        vec *= _RETRACT_NORM / norm


def train_embeddings(taxonomy: Taxonomy, config: EmbeddingConfig | None = None) -> PoincareEmbedding:
    """Riemannian SGD over hypernym edges; deterministic for a fixed seed."""
    config = config or EmbeddingConfig()
    config.validate()
    words = taxonomy.words
    if len(words) < 3:
        raise ConfigError("need at least three words to sample negatives")
    index = {w: i for i, w in enumerate(words)}
    edges = [(index[c], index[p]) for c, p in taxonomy.edges()]
    if not edges:
        raise ConfigError("taxonomy has no edges to train on")

    rng = np.random.default_rng(config.seed)
    theta = rng.uniform(-0.001, 0.001, size=(len(words), config.dim))
    all_idx = np.arange(len(words))
    loss_history = []
    for epoch in range(config.epochs):
        lr = config.lr / 10.0 if epoch < config.burn_in_epochs else config.lr
        order = rng.permutation(len(edges))
        epoch_loss = 0.0
        for e in order:
            child, parent = edges[e]
            candidates = all_idx[(all_idx != child) & (all_idx != parent)]
            n_samp = min(config.n_neg, candidates.shape[0])
            negs = rng.choice(candidates, size=n_samp, replace=False)
            loss, g_u, g_v, g_negs = edge_loss_grads(
                theta[child], theta[parent], [theta[n] for n in negs])
            epoch_loss += loss
            for idx, grad in [(child, g_u), (parent, g_v)] + list(zip(negs, g_negs)):
                scale = (1.0 - theta[idx] @ theta[idx]) ** 2 / 4.0
                theta[idx] -= lr * scale * grad
                _retract(theta[idx])
        loss_history.append(epoch_loss / len(edges))

    vectors = {w: theta[index[w]].copy() for w in words}
    meta = {"dim": config.dim, "epochs": config.epochs, "lr": config.lr,
            "n_neg": config.n_neg, "seed": config.seed,
            "burn_in_epochs": config.burn_in_epochs,
            "loss_history": loss_history}
    return PoincareEmbedding(dim=config.dim, vectors=vectors, meta=meta)


def save_embedding(embedding: PoincareEmbedding, path) -> None:
    payload = {
        "dim": embedding.dim,
        "words": {w: [float(x) for x in vec] for w, vec in embedding.vectors.items()},
        "meta": embedding.meta,
    }
    Path(path).write_text(json.dumps(payload))


def load_embedding(path) -> PoincareEmbedding:
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"embedding file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"bad embedding file {path}: {exc}")
    vectors = {w: np.array(v, dtype=np.float64) for w, v in payload["words"].items()}
    return PoincareEmbedding(dim=int(payload["dim"]), vectors=vectors,
                             meta=payload.get("meta", {}))
