"""Seeded synthetic data: scenes, models, and benchmark features.

The toy world has a three-level taxonomy. Five leaf classes are trained as
known, three are held out as unknown, and each class renders as a rectangle
with a shallow horizontal hue gradient on a gray background. The gradient
matters: it spreads each class over several hue-histogram bins, and each
held-out class sits between two known classes in hue, so its probability
mass splits across exactly the classes whose common hypernym is the right
target word.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidInputError
from .poincare import EmbeddingConfig, PoincareEmbedding, train_embeddings
from .qgen import DecoderConfig, DecoderParams, encode, tokenize, train_decoder
from .regions import Region
from .taxonomy import Taxonomy
from .uncertainty import (ClassifierConfig, ClassifierModel, extract_features,
                          train_toy_classifier)

EDGES = (
    ("animal", "entity"), ("vehicle", "entity"), ("fruit", "entity"),
    ("dog", "animal"), ("cat", "animal"), ("bird", "animal"),
    ("car", "vehicle"), ("truck", "vehicle"), ("boat", "vehicle"),
    ("apple", "fruit"), ("banana", "fruit"),
)

KNOWN_CLASSES = ("dog", "cat", "car", "truck", "apple")
UNKNOWN_CLASSES = ("bird", "boat", "banana")

# Base hue per class, fraction of the hue circle. Unknowns lie between two
# knowns (bird between dog and cat, boat between car and truck); banana
# overlaps only apple, so its second-best class is some non-fruit and the
# common hypernym falls back to the root.
HUES = {
    "dog": 0.11, "cat": 0.20, "bird": 0.155,
    "car": 0.55, "truck": 0.64, "boat": 0.595,
    "apple": 0.83, "banana": 0.89,
}
HUE_SPAN = 0.06
SATURATION = 191    # 0.75 in 8-bit
VALUE = 217         # 0.85 in 8-bit
BACKGROUND = 128

# Expected lowest common hypernym of the top-2 predicted classes.
EXPECTED_WORD = {"bird": "animal", "boat": "vehicle", "banana": "entity"}


def toy_taxonomy() -> Taxonomy:
    return Taxonomy(edges=list(EDGES))


def class_patch(label: str, height: int, width: int, jitter: float = 0.0) -> np.ndarray:
    """Rectangle with a horizontal hue gradient centred on the class hue."""
    if label not in HUES:
        raise InvalidInputError(f"no color defined for class {label!r}")
    base = HUES[label] + jitter
    cols = np.linspace(base - HUE_SPAN / 2, base + HUE_SPAN / 2, width)
    hsv = np.empty((height, width, 3), dtype=np.uint8)
    hsv[:, :, 0] = np.clip(np.round(cols * 255), 0, 255).astype(np.uint8)[None, :]
    hsv[:, :, 1] = SATURATION
    hsv[:, :, 2] = VALUE
    return np.asarray(PILImage.fromarray(hsv, mode="HSV").convert("RGB"))


@dataclass
class SceneObject:
    region: Region
    label: str
    is_unknown: bool


@dataclass
class Scene:
    image: np.ndarray
    image_id: str
    objects: list
    expected_word: str | None
    seed: int

    @property
    def unknown_region(self) -> Region | None:
        for obj in self.objects:
            if obj.is_unknown:
                return obj.region
        return None


def make_scene(seed: int, known_label: str | None = None,
               unknown_label: str | None = None, size: int = 128) -> Scene:
    """One known-class object plus one held-out object on a flat background.

    Pass unknown_label="" for a scene of two known objects (the no-unknown
    case). Everything is drawn from the seed, so scenes are reproducible.
    """
    rng = np.random.default_rng(seed)
    if known_label is None:
        known_label = KNOWN_CLASSES[int(rng.integers(len(KNOWN_CLASSES)))]
    known_only = unknown_label == ""
    if known_only:
        others = [c for c in KNOWN_CLASSES if c != known_label]
        second_label = others[int(rng.integers(len(others)))]
    elif unknown_label is None:
        second_label = UNKNOWN_CLASSES[int(rng.integers(len(UNKNOWN_CLASSES)))]
    else:
        second_label = unknown_label

    image = np.full((size, size, 3), BACKGROUND, dtype=np.uint8)
    half = size // 2
    boxes = []
    for side in range(2):
        w = int(rng.integers(30, 45))
        h = int(rng.integers(30, 45))
        x_lo = 6 if side == 0 else half + 4
        x_hi = (half - 4 - w) if side == 0 else (size - 6 - w)
        x = int(rng.integers(x_lo, max(x_lo + 1, x_hi)))
        y = int(rng.integers(6, size - 6 - h))
        boxes.append(Region(x, y, x + w, y + h))
    swap = bool(rng.integers(2))
    labels = [known_label, second_label]
    if swap:
        boxes = boxes[::-1]

    objects = []
    for lbl, box in zip(labels, boxes):
        jitter = float(rng.uniform(-0.01, 0.01))
        patch = class_patch(lbl, box.y_br - box.y_tl, box.x_br - box.x_tl, jitter)
        image[box.y_tl:box.y_br, box.x_tl:box.x_br] = patch
        objects.append(SceneObject(region=box, label=lbl,
                                   is_unknown=(lbl == second_label and not known_only)))
    expected = None if known_only else EXPECTED_WORD.get(second_label)
    return Scene(image=image, image_id=f"scene-{seed:05d}", objects=objects,
                 expected_word=expected, seed=seed)


def make_scenes(n: int, seed: int = 0, **kwargs) -> list:
    return [make_scene(seed + i, **kwargs) for i in range(n)]


def training_crops(n_per_class: int = 40, seed: int = 0) -> list:
    """(feature, label) pairs of bare class patches for classifier training."""
    rng = np.random.default_rng(seed)
    data = []
    for label in KNOWN_CLASSES:
        for _ in range(n_per_class):
            w = int(rng.integers(30, 45))
            h = int(rng.integers(30, 45))
            jitter = float(rng.uniform(-0.01, 0.01))
            patch = class_patch(label, h, w, jitter)
            data.append((extract_features(patch), label))
    return data


def train_scene_classifier(n_per_class: int = 40, seed: int = 0,
                           config: ClassifierConfig | None = None) -> ClassifierModel:
    config = config or ClassifierConfig(epochs=300, lr=5.0, seed=seed)
    return train_toy_classifier(training_crops(n_per_class, seed), config)


def scene_corpus(scenes, embedding: PoincareEmbedding) -> list:
    """Decoder training entries (f, sigma(v), tokens) from labeled scenes."""
    corpus = []
    for scene in scenes:
        region = scene.unknown_region
        if region is None or scene.expected_word is None:
            continue
        f = encode(scene.image, region, extract_features)
        sigma_v = embedding.vectors[scene.expected_word]
        tokens = tokenize(f"what is this {scene.expected_word} ?")
        corpus.append((f, sigma_v, tokens))
    return corpus


def train_scene_embedding(seed: int = 0, dim: int = 10,
                          epochs: int = 300) -> PoincareEmbedding:
    config = EmbeddingConfig(dim=dim, epochs=epochs, seed=seed)
    return train_embeddings(toy_taxonomy(), config)


def train_scene_decoder(scenes, embedding: PoincareEmbedding, seed: int = 0,
                        steps: int = 1200) -> DecoderParams:
    corpus = scene_corpus(scenes, embedding)
    config = DecoderConfig(steps=steps, seed=seed)
    return train_decoder(corpus, config)


@dataclass
class OpenSetBenchmark:
    known_labels: tuple
    train: list            # (feature, label) pairs
    known_eval: list       # (feature, true label) pairs
    unknown_eval: list     # bare features


def gaussian_benchmark(seed: int = 0, n_per_class: int = 200,
                       dim: int = 16, noise: float = 0.02,
                       train_frac: float = 0.6) -> OpenSetBenchmark:
    """Histogram-like Gaussian classes: 5 known, 3 held-out unknown.

    Unknown class means sit at midpoints and the centroid of the known
    means, which is where a linear classifier is genuinely uncertain; far
    outliers would instead get confident extrapolated logits.
    """
    rng = np.random.default_rng(seed)
    means = np.abs(rng.normal(0.0, 1.0, size=(5, dim))) + 0.05
    means /= means.sum(axis=1, keepdims=True)
    unknown_means = np.stack([
        (means[0] + means[1]) / 2,
        (means[2] + means[3]) / 2,
        means.mean(axis=0),
    ])

    def draw(mean):
        sample = mean + rng.normal(0.0, noise, size=dim)
        sample = np.clip(sample, 1e-6, None)
        return sample / sample.sum()

    labels = tuple(f"class-{j}" for j in range(5))
    n_train = int(n_per_class * train_frac)
    train, known_eval = [], []
    for j, label in enumerate(labels):
        for i in range(n_per_class):
            sample = draw(means[j])
            if i < n_train:
                train.append((sample, label))
            else:
                known_eval.append((sample, label))
    unknown_eval = [draw(unknown_means[j % 3])
                    for j in range(3) for _ in range(n_per_class)]
    return OpenSetBenchmark(known_labels=labels, train=train,
                            known_eval=known_eval, unknown_eval=unknown_eval)


def build_demo_bundle(out_dir, seed: int = 0, n_scenes: int = 8,
                      train_scenes: int = 60, decoder_steps: int = 1200) -> dict:
    """Train all models on synthetic data and write a ready-to-serve bundle.

    The bundle holds the taxonomy, classifier, embedding, decoder, a
    handful of scene images (two of them all-known, which should yield no
    question), the decoder's training corpus, and a config file pointing at
    everything. Returns the paths keyed by role.
    """
    from pathlib import Path

    from .corpus import CorpusEntry, save_corpus
    from .images import save_image
    from .poincare import save_embedding
    from .qgen import save_decoder
    from .taxonomy import save_taxonomy

    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)

    taxonomy = toy_taxonomy()
    classifier = train_scene_classifier(seed=seed)
    embedding = train_scene_embedding(seed=seed)
    training = make_scenes(train_scenes, seed=seed + 500)
    decoder = train_scene_decoder(training, embedding, seed=seed,
                                  steps=decoder_steps)

    paths = {
        "taxonomy": out / "taxonomy.tsv",
        "classifier": out / "classifier.npz",
        "embedding": out / "embedding.json",
        "decoder": out / "decoder.npz",
        "corpus": out / "corpus.jsonl",
        "config": out / "config.toml",
        "images": out / "images",
        "kb": out / "kb.json",
    }
    save_taxonomy(taxonomy, paths["taxonomy"])
    from .uncertainty import save_classifier
    save_classifier(classifier, paths["classifier"])
    save_embedding(embedding, paths["embedding"])
    save_decoder(decoder, paths["decoder"])

    entries = []
    for scene in training:
        region = scene.unknown_region
        if region is None:
            continue
        entries.append(CorpusEntry(
            image=scene.image_id, region=region.as_tuple(),
            target_word=scene.expected_word,
            question=f"what is this {scene.expected_word} ?"))
    save_corpus(entries, paths["corpus"])

    demo = make_scenes(max(n_scenes - 2, 1), seed=seed + 1000)
    demo += make_scenes(2, seed=seed + 2000, unknown_label="")
    for scene in demo:
        save_image(scene.image, paths["images"] / f"{scene.image_id}.png")

    config_text = "\n".join([
        "[proposals]",
        "scale_k = 600.0",
        "min_size = 10",
        "max_proposals = 100",
        "nms_iou = 0.5",
        "",
        "[uncertainty]",
        'method = "entropy"',
        "threshold = 1.0",
        "",
        "[target]",
        "k = 2",
        "",
        "[generation]",
        'generation_mode = "greedy"',
        "beam_width = 3",
        "max_len = 20",
        "",
        "[models]",
        f'classifier_path = "{paths["classifier"].resolve()}"',
        f'decoder_path = "{paths["decoder"].resolve()}"',
        f'embedding_path = "{paths["embedding"].resolve()}"',
        f'taxonomy_path = "{paths["taxonomy"].resolve()}"',
        "",
        "[pipeline]",
        "min_salient_frac = 0.2",
        "dedup_cosine = 0.95",
        f"seed = {seed}",
        "",
    ])
    paths["config"].write_text(config_text)
    return {key: str(value) for key, value in paths.items()}
