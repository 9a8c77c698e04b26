"""The full question pipeline and the knowledge base it feeds.

One pass over an image: saliency mask, region proposals on the masked
image, non-maximum suppression, open-set classification of each proposal,
selection of the most salient unknown region, target-word lookup in the
taxonomy, and question generation conditioned on the word's embedding.
Answers collected later land back in the knowledge base, whose answered
exemplars suppress repeat questions about the same thing.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (ConfigError, ConflictError, DataError, InvalidInputError,
                     NotFoundError)
from .images import ensure_image
from .poincare import PoincareEmbedding, embed, load_embedding
from .qgen import (DecoderParams, QuestionRecord, encode, generate_question,
                   load_decoder, template_question)
from .regions import ProposalConfig, Region, nms, selective_search
from .saliency import (compute_saliency, load_external_map, mask_image,
                       otsu_threshold, region_saliency)
from .taxonomy import Taxonomy, load_taxonomy, select_target_word
from .uncertainty import (METHODS, ClassifierModel, extract_features,
                          load_classifier, predict)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class PipelineConfig:
    scale_k: float = 600.0
    min_size: int = 10
    max_proposals: int = 100
    nms_iou: float = 0.5
    saliency_source: str = "border"     # "border" or a grayscale map path
    method: str = "entropy"
    threshold: float = 1.0
    k: int = 2
    generation_mode: str = "greedy"     # greedy | beam | template
    beam_width: int = 3
    max_len: int = 20
    min_salient_frac: float = 0.2
    dedup_cosine: float = 0.95
    seed: int = 0
    classifier_path: str | None = None
    decoder_path: str | None = None
    embedding_path: str | None = None
    taxonomy_path: str | None = None

    def validate(self) -> "PipelineConfig":
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.method not in METHODS:
            raise ConfigError(f"unknown uncertainty method {self.method!r}")
        if self.generation_mode not in ("greedy", "beam", "template"):
            raise ConfigError(f"unknown generation mode {self.generation_mode!r}")
        if not 0.0 <= self.min_salient_frac <= 1.0:
            raise ConfigError("min_salient_frac must be in [0, 1]")
        for name in ("classifier_path", "decoder_path", "embedding_path",
                     "taxonomy_path"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{name} does not exist: {value}")
        return self


_CONFIG_SECTIONS = {
    "proposals": ("scale_k", "min_size", "max_proposals", "nms_iou"),
    "saliency": ("saliency_source",),
    "uncertainty": ("method", "threshold"),
    "target": ("k",),
    "generation": ("generation_mode", "beam_width", "max_len"),
    "models": ("classifier_path", "decoder_path", "embedding_path",
               "taxonomy_path"),
    "pipeline": ("min_salient_frac", "dedup_cosine", "seed"),
}


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}")
    kwargs = {}
    for section, keys in _CONFIG_SECTIONS.items():
        body = raw.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        for key, value in body.items():
            if key not in keys:
                raise ConfigError(f"unknown config key {section}.{key}")
            kwargs[key] = value
    return PipelineConfig(**kwargs).validate()


def override_config(config: PipelineConfig, **overrides) -> PipelineConfig:
    """Apply non-None overrides (CLI flags beat file values)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **changes).validate() if changes else config


@dataclass
class PipelineModels:
    classifier: ClassifierModel
    taxonomy: Taxonomy
    embedding: PoincareEmbedding | None = None
    decoder: DecoderParams | None = None


def load_models(config: PipelineConfig) -> PipelineModels:
    if config.classifier_path is None or config.taxonomy_path is None:
        raise ConfigError("classifier_path and taxonomy_path are required")
    classifier = load_classifier(config.classifier_path)
    taxonomy = load_taxonomy(config.taxonomy_path)
    embedding = load_embedding(config.embedding_path) if config.embedding_path else None
    decoder = load_decoder(config.decoder_path) if config.decoder_path else None
    if config.generation_mode != "template" and decoder is None:
        raise ConfigError("generation mode needs decoder_path (or use template)")
    return PipelineModels(classifier=classifier, taxonomy=taxonomy,
                          embedding=embedding, decoder=decoder)


@dataclass
class KBRecord:
    record_id: str
    image_id: str
    region: tuple
    target_word: str
    question: str
    tokens: list
    mode: str
    created: float
    feature: list | None = None
    answer: str | None = None
    no_answer: bool = False
    rating: int | None = None
    answered_at: float | None = None

    @property
    def resolved(self) -> bool:
        return self.answer is not None or self.no_answer

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id, "image_id": self.image_id,
            "region": list(self.region), "target_word": self.target_word,
            "question": self.question, "tokens": list(self.tokens),
            "mode": self.mode, "created": self.created,
            "feature": self.feature, "answer": self.answer,
            "no_answer": self.no_answer, "rating": self.rating,
            "answered_at": self.answered_at,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "KBRecord":
        return cls(record_id=obj["record_id"], image_id=obj["image_id"],
                   region=tuple(obj["region"]), target_word=obj["target_word"],
                   question=obj["question"], tokens=list(obj["tokens"]),
                   mode=obj["mode"], created=obj["created"],
                   feature=obj.get("feature"), answer=obj.get("answer"),
                   no_answer=obj.get("no_answer", False),
                   rating=obj.get("rating"),
                   answered_at=obj.get("answered_at"))


@dataclass
class KnowledgeBase:
    known: list
    records: list = field(default_factory=list)
    version: int = 1

    def record(self, record_id: str) -> KBRecord:
        for rec in self.records:
            if rec.record_id == record_id:
                return rec
        raise NotFoundError(f"no record {record_id!r}")

    def pending(self) -> list:
        return [rec for rec in self.records if not rec.resolved]

    def next_record_id(self, image_id: str) -> str:
        n = sum(1 for rec in self.records if rec.image_id == image_id)
        return f"{image_id}-{n}"

    def to_dict(self) -> dict:
        return {"known": list(self.known),
                "records": [rec.to_dict() for rec in self.records],
                "version": self.version}

    @classmethod
    def from_dict(cls, obj: dict) -> "KnowledgeBase":
        return cls(known=list(obj["known"]),
                   records=[KBRecord.from_dict(r) for r in obj["records"]],
                   version=obj.get("version", 1))


def new_kb(known_classes) -> KnowledgeBase:
    return KnowledgeBase(known=sorted(known_classes))


def load_kb(path) -> KnowledgeBase:
    try:
        return KnowledgeBase.from_dict(json.loads(Path(path).read_text()))
    except FileNotFoundError:
        raise DataError(f"knowledge base not found: {path}")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"bad knowledge base {path}: {exc}")


def save_kb(kb: KnowledgeBase, path) -> None:
    """Atomic replace-on-write so a crash never leaves a half-written KB."""
    path = Path(path)
    payload = json.dumps(kb.to_dict(), indent=1)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=".kb-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom) if denom > 0 else 0.0


def run_pipeline(image: np.ndarray, config: PipelineConfig,
                 models: PipelineModels, kb: KnowledgeBase,
                 image_id: str = "image") -> QuestionRecord | None:
    """One image in, one question (or None) out; appends a pending KB record.

    Deterministic for a fixed (image, config, kb state): saliency, the
    proposal cascade, and greedy or beam decoding involve no randomness at
    inference time.
    """
    img = ensure_image(image)
    if config.saliency_source == "border":
        sal = compute_saliency(img)
    else:
        sal = load_external_map(config.saliency_source, img)
    theta = otsu_threshold(sal).theta
    masked = mask_image(img, sal, theta)
    proposals = selective_search(masked, ProposalConfig(
        scale_k=config.scale_k, min_size=config.min_size,
        max_proposals=config.max_proposals))
    kept = nms(proposals, config.nms_iou)

    candidates = []
    for region in kept:
        score = region_saliency(region, sal, theta)
        if score.s_region == 0 or score.s_salient / score.s_region < config.min_salient_frac:
            continue
        feature = extract_features(img, region)
        dist = predict(models.classifier, feature)
        verdict = METHODS[config.method](dist, config.threshold)
        if verdict.is_unknown:
            candidates.append((region, score, feature, dist))
    if not candidates:
        return None
    candidates.sort(key=lambda c: (-c[1].i_region, -c[1].s_region, c[0].x_tl))

    exemplars = [(rec.feature, rec.target_word) for rec in kb.records
                 if rec.resolved and rec.feature is not None]
    chosen = None
    for region, score, feature, dist in candidates:
        word = select_target_word(dist, config.k, models.taxonomy).word
        duplicate = any(ex_word == word and _cosine(feature, ex_feat) > config.dedup_cosine
                        for ex_feat, ex_word in exemplars)
        if not duplicate:
            chosen = (region, feature, word)
            break
    if chosen is None:
        return None
    region, feature, word = chosen

    if config.generation_mode == "template":
        record = template_question(word, image_id=image_id, region=region)
    else:
        if models.decoder is None or models.embedding is None:
            raise ConfigError("decoder and embedding are required for generation")
        sigma_v = embed(models.embedding, word)
        f = encode(img, region, extract_features)
        record = generate_question(models.decoder, f, sigma_v,
                                   mode=config.generation_mode,
                                   beam_width=config.beam_width,
                                   max_len=config.max_len,
                                   image_id=image_id, region=region,
                                   target_word=word)
    kb.records.append(KBRecord(
        record_id=kb.next_record_id(image_id), image_id=image_id,
        region=region.as_tuple(), target_word=word, question=record.text,
        tokens=list(record.tokens), mode=record.mode, created=time.time(),
        feature=[float(x) for x in feature]))
    return record


def run_batch(images, config: PipelineConfig, models: PipelineModels,
              kb: KnowledgeBase) -> tuple:
    """Process (image_id, image) pairs; per-image failures do not abort.

    Returns (list of (image_id, QuestionRecord | None), list of
    (image_id, error message)).
    """
    results = []
    failures = []
    for image_id, image in images:
        try:
            results.append((image_id, run_pipeline(image, config, models, kb,
                                                   image_id=image_id)))
        except Exception as exc:   # noqa: BLE001 - batch isolation contract
            failures.append((image_id, f"{type(exc).__name__}: {exc}"))
    return results, failures


def ingest_answer(kb: KnowledgeBase, record_id: str, answer: str | None = None,
                  no_answer: bool = False, rating: int | None = None) -> KBRecord:
    """Resolve a pending record with an answer or a do-not-understand."""
    if (answer is None) == (not no_answer):
        raise InvalidInputError("provide exactly one of answer or no_answer")
    if answer is not None and not answer.strip():
        raise InvalidInputError("answer text must hold something")
    if rating is not None and not (isinstance(rating, int) and 1 <= rating <= 5):
        raise InvalidInputError("rating must be an integer in 1..5")
    rec = kb.record(record_id)
    if rec.resolved:
        raise ConflictError(f"record {record_id!r} already answered")
    rec.answer = answer.strip() if answer is not None else None
    rec.no_answer = no_answer
    rec.rating = rating
    rec.answered_at = time.time()
    return rec


@dataclass(frozen=True)
class AcquisitionStats:
    total: int
    answered: int
    no_answer: int
    successful: int

    def to_dict(self) -> dict:
        return {"total": self.total, "answered": self.answered,
                "no_answer": self.no_answer, "successful": self.successful}


def acquisition_stats(kb: KnowledgeBase, taxonomy: Taxonomy | None = None) -> AcquisitionStats:
    """Counts over the KB; successful = novel answer with rating >= 4.

    An answer counts as successful when it is neither a known class nor a
    hypernym of any known class (so naming a broader category the
    classifier already covers does not count as new knowledge).
    """
    excluded = set()
    for label in kb.known:
        excluded.add(label.lower())
        if taxonomy is not None and label in taxonomy:
            excluded.update(w.lower() for w in taxonomy.ancestor_set(label))
    answered = no_answer = successful = 0
    for rec in kb.records:
        if rec.no_answer:
            no_answer += 1
        elif rec.answer is not None:
            answered += 1
            novel = rec.answer.lower().strip() not in excluded
            if novel and rec.rating is not None and rec.rating >= 4:
                successful += 1
    return AcquisitionStats(total=len(kb.records), answered=answered,
                            no_answer=no_answer, successful=successful)
