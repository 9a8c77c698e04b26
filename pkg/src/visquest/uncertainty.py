"""Known/unknown classification from softmax output.

The primary rule flags a distribution as unknown when its entropy (bits) is
at or above a threshold; least-confident and margin rules are provided as
baselines. A small multinomial logistic classifier over HSV color
histograms stands in for a pretrained backbone so the pipeline runs
end to end on synthetic data.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError, InvalidInputError
from .images import ensure_image
from .regions import Region

FEATURE_DIM = 96  # 32 bins per HSV channel
_PROB_TOL = 1e-6


@dataclass(frozen=True)
class SoftmaxDistribution:
    labels: tuple
    p: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.p, dtype=np.float64)
        object.__setattr__(self, "p", probs)
        if len(self.labels) != probs.shape[0] or probs.ndim != 1:
            raise InvalidInputError("labels and probabilities must align")
        if probs.shape[0] < 2:
            raise InvalidInputError("need at least two classes")
        if not np.isfinite(probs).all() or (probs < 0).any():
            raise InvalidInputError("probabilities must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > _PROB_TOL:
            raise InvalidInputError(f"probabilities sum to {probs.sum():.8f}, not 1")

    @property
    def k(self) -> int:
        return self.p.shape[0]

    def argmax_label(self) -> str:
        return self.labels[int(np.argmax(self.p))]

    def top_labels(self, k: int) -> list:
        """The k most probable labels; probability ties keep label order."""
        order = sorted(range(self.k), key=lambda j: (-self.p[j], j))
        return [self.labels[j] for j in order[:k]]


@dataclass(frozen=True)
class UnknownVerdict:
    label: str | None       # argmax label when known, None when unknown
    statistic: float
    method: str

    @property
    def is_unknown(self) -> bool:
        return self.label is None


def entropy(dist: SoftmaxDistribution) -> float:
    """Shannon entropy in bits, with 0*log(0) taken as 0."""
    p = dist.p
    terms = np.where(p > 0.0, p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
    return float(-terms.sum())


def classify_entropy(dist: SoftmaxDistribution, threshold_bits: float) -> UnknownVerdict:
    """Unknown iff entropy >= threshold (boundary counts as unknown)."""
    e = entropy(dist)
    label = None if e >= threshold_bits else dist.argmax_label()
    return UnknownVerdict(label=label, statistic=e, method="entropy")


def classify_least_confident(dist: SoftmaxDistribution, threshold_p: float) -> UnknownVerdict:
    """Unknown iff the top probability is strictly below the threshold."""
    top = float(dist.p.max())
    label = None if top < threshold_p else dist.argmax_label()
    return UnknownVerdict(label=label, statistic=top, method="least_confident")


def classify_margin(dist: SoftmaxDistribution, threshold_m: float) -> UnknownVerdict:
    """Unknown iff the gap between the two top probabilities is below threshold."""
    top2 = np.sort(dist.p)[-2:]
    margin = float(top2[1] - top2[0])
    label = None if margin < threshold_m else dist.argmax_label()
    return UnknownVerdict(label=label, statistic=margin, method="margin")


METHODS = {
    "entropy": classify_entropy,
    "least_confident": classify_least_confident,
    "margin": classify_margin,
}

# Statistic extraction and the direction of the unknown rule per method:
# "high" means unknown when statistic >= threshold, "low" means < threshold.
_METHOD_STATS = {
    "entropy": (lambda d: entropy(d), "high"),
    "least_confident": (lambda d: float(d.p.max()), "low"),
    "margin": (lambda d: float(np.sort(d.p)[-1] - np.sort(d.p)[-2]), "low"),
}


@dataclass(frozen=True)
class FMeasureResult:
    f: float
    tp: int
    fp: int
    fn: int
    degenerate: bool = False


def f_measure(outcomes: list) -> FMeasureResult:
    """F = 2TP / (2TP + FP + FN) over (truth, verdict) pairs.

    Truth is a class label for known data or None for unknown data.
    TP: known data assigned its correct class. FP: known data assigned a
    wrong class or called unknown. FN: unknown data called known.
    """
    tp = fp = fn = 0
    for truth, verdict in outcomes:
        if truth is None:
            if not verdict.is_unknown:
                fn += 1
        else:
            if not verdict.is_unknown and verdict.label == truth:
                tp += 1
            else:
                fp += 1
    denom = 2 * tp + fp + fn
    if denom == 0:
        return FMeasureResult(f=0.0, tp=0, fp=0, fn=0, degenerate=True)
    return FMeasureResult(f=2 * tp / denom, tp=tp, fp=fp, fn=fn)


@dataclass(frozen=True)
class CalibrationResult:
    method: str
    threshold: float
    f_mean: float
    f_stderr: float
    fold_scores: tuple


def calibrate_threshold(method: str, known_val: list, unknown_val: list,
                        folds: int = 5, grid_points: int = 200) -> CalibrationResult:
    """Pick the threshold maximizing mean F across cross-validation folds.

    known_val holds (distribution, true_label) pairs, unknown_val bare
    distributions. Folds are assigned round-robin by index, so the split is
    deterministic. The grid spans the observed statistic range.
    """
    if not known_val or not unknown_val:
        raise InvalidInputError("validation sets must be nonempty")
    if folds < 2:
        raise InvalidInputError("need at least two folds")
    if method not in _METHOD_STATS:
        raise InvalidInputError(f"unknown method {method!r}")
    stat_fn, direction = _METHOD_STATS[method]

    known_stats = np.array([stat_fn(d) for d, _ in known_val])
    known_correct = np.array([d.argmax_label() == lbl for d, lbl in known_val])
    unknown_stats = np.array([stat_fn(d) for d in unknown_val])
    known_folds = np.arange(len(known_val)) % folds
    unknown_folds = np.arange(len(unknown_val)) % folds

    lo = min(known_stats.min(), unknown_stats.min())
    hi = max(known_stats.max(), unknown_stats.max())
    grid = np.linspace(lo, hi + 1e-12, grid_points)

    fold_f = np.zeros((folds, grid_points))
    for f in range(folds):
        ks = known_stats[known_folds == f]
        kc = known_correct[known_folds == f]
        us = unknown_stats[unknown_folds == f]
        if direction == "high":
            pred_unknown_known = ks[:, None] >= grid[None, :]
            pred_unknown_unknown = us[:, None] >= grid[None, :]
        else:
            pred_unknown_known = ks[:, None] < grid[None, :]
            pred_unknown_unknown = us[:, None] < grid[None, :]
        tp = (~pred_unknown_known & kc[:, None]).sum(axis=0)
        fp = (pred_unknown_known | ~kc[:, None]).sum(axis=0)
        fn = (~pred_unknown_unknown).sum(axis=0)
        denom = 2 * tp + fp + fn
        fold_f[f] = np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)

    mean_f = fold_f.mean(axis=0)
    best = int(np.argmax(mean_f))  # first (lowest) threshold on ties
    scores = fold_f[:, best]
    stderr = float(scores.std(ddof=1) / np.sqrt(folds)) if folds > 1 else 0.0
    return CalibrationResult(method=method, threshold=float(grid[best]),
                             f_mean=float(mean_f[best]), f_stderr=stderr,
                             fold_scores=tuple(float(s) for s in scores))


def extract_features(image: np.ndarray, region: Region | None = None) -> np.ndarray:
    """96-dim HSV histogram (32 bins per channel), L1-normalized."""
    img = ensure_image(image)
    if region is not None:
        h, w = img.shape[:2]
        if region.x_br > w or region.y_br > h:
            raise InvalidInputError(f"region {region.as_tuple()} outside image {w}x{h}")
        img = img[region.y_tl:region.y_br, region.x_tl:region.x_br]
    hsv = np.asarray(PILImage.fromarray(img, mode="RGB").convert("HSV"))
    feat = np.empty(FEATURE_DIM, dtype=np.float64)
    for c in range(3):
        bins = (hsv[:, :, c].astype(np.int64) * 32) // 256
        feat[c * 32:(c + 1) * 32] = np.bincount(bins.ravel(), minlength=32)
    return feat / feat.sum()


@dataclass
class ClassifierConfig:
    epochs: int = 200
    lr: float = 5.0
    l2: float = 0.0
    seed: int = 0


@dataclass
class ClassifierModel:
    weights: np.ndarray   # (K, D)
    bias: np.ndarray      # (K,)
    labels: tuple
    meta: dict = field(default_factory=dict)


def train_toy_classifier(data: list, config: ClassifierConfig | None = None) -> ClassifierModel:
    """Full-batch gradient descent on multinomial logistic regression.

    Samples are canonicalized (sorted by label, then feature bytes) before
    training, so any permutation of the same data yields a bit-identical
    model.
    """
    config = config or ClassifierConfig()
    if not data:
        raise InvalidInputError("training data is empty")
    labels = sorted({lbl for _, lbl in data})
    if len(labels) < 2:
        raise InvalidInputError("need at least two classes")
    ordered = sorted(data, key=lambda item: (item[1], np.asarray(item[0], dtype=np.float64).tobytes()))
    x = np.array([np.asarray(f, dtype=np.float64) for f, _ in ordered])
    index = {lbl: j for j, lbl in enumerate(labels)}
    y = np.zeros((len(ordered), len(labels)))
    for i, (_, lbl) in enumerate(ordered):
        y[i, index[lbl]] = 1.0

    n, d = x.shape
    k = len(labels)
    w = np.zeros((k, d))
    b = np.zeros(k)
    for _ in range(config.epochs):
        logits = x @ w.T + b
        logits -= logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        p = expl / expl.sum(axis=1, keepdims=True)
        err = (p - y) / n
        w -= config.lr * (err.T @ x + config.l2 * w)
        b -= config.lr * err.sum(axis=0)
    meta = {"epochs": config.epochs, "lr": config.lr, "l2": config.l2,
            "seed": config.seed, "samples": n}
    return ClassifierModel(weights=w, bias=b, labels=tuple(labels), meta=meta)


def predict(model: ClassifierModel, feature: np.ndarray) -> SoftmaxDistribution:
    logits = model.weights @ np.asarray(feature, dtype=np.float64) + model.bias
    logits -= logits.max()
    expl = np.exp(logits)
    return SoftmaxDistribution(labels=model.labels, p=expl / expl.sum())


def save_classifier(model: ClassifierModel, path) -> None:
    np.savez(path, weights=model.weights, bias=model.bias,
             labels=np.array(model.labels, dtype=object),
             meta=json.dumps(model.meta))


def load_classifier(path) -> ClassifierModel:
    try:
        archive = np.load(path, allow_pickle=True)
    except FileNotFoundError:
        raise DataError(f"classifier model not found: {path}")
    return ClassifierModel(weights=archive["weights"], bias=archive["bias"],
                           labels=tuple(archive["labels"].tolist()),
                           meta=json.loads(str(archive["meta"])))


@dataclass(frozen=True)
class TimingReport:
    method: str
    mean_s: float
    stderr_s: float
    repetitions: int
    images: int


def time_classification(dists: list, method: str, threshold: float = 0.5,
                        repetitions: int = 5) -> TimingReport:
    """Mean and standard error of per-image classification wall time."""
    if not dists:
        raise InvalidInputError("need at least one distribution")
    classify = METHODS[method]
    per_image = []
    for _ in range(repetitions):
        start = time.perf_counter()
        for dist in dists:
            classify(dist, threshold)
        per_image.append((time.perf_counter() - start) / len(dists))
    arr = np.array(per_image)
    stderr = float(arr.std(ddof=1) / np.sqrt(repetitions)) if repetitions > 1 else 0.0
    return TimingReport(method=method, mean_s=float(arr.mean()), stderr_s=stderr,
                        repetitions=repetitions, images=len(dists))


def load_distributions_jsonl(path) -> list:
    """Read distributions from JSON lines: {"id", "p", "labels"}."""
    records = []
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise DataError(f"distribution file not found: {path}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            dist = SoftmaxDistribution(labels=tuple(obj["labels"]),
                                       p=np.array(obj["p"], dtype=np.float64))
            records.append((obj["id"], dist))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"bad distribution record on line {lineno}: {exc}")
    return records
