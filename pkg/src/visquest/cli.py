"""Command-line entry points.

Every subcommand reads an optional TOML config (flags win over file
values), prints JSON on stdout, and exits nonzero with a one-line
``error:<code> <detail>`` on stderr when something fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import metrics, pipeline, poincare, qgen, synthetic
from .errors import ConfigError, DataError, InvalidInputError, VisquestError
from .images import load_image, save_grayscale_png
from .regions import ProposalConfig, Region, nms, proposals_payload, selective_search
from .saliency import compute_saliency, mask_image, otsu_threshold
from .taxonomy import load_taxonomy, select_target_word
from .uncertainty import (METHODS, calibrate_threshold, extract_features,
                          load_classifier, load_distributions_jsonl, predict,
                          time_classification, train_toy_classifier)


def _print(obj) -> None:
    print(json.dumps(obj))


def _load_config(args) -> pipeline.PipelineConfig:
    config = pipeline.load_config(args.config) if args.config else pipeline.PipelineConfig()
    overrides = {}
    for name in ("scale_k", "min_size", "max_proposals", "nms_iou", "method",
                 "threshold", "k", "generation_mode", "beam_width", "max_len",
                 "min_salient_frac", "seed"):
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    return pipeline.override_config(config, **overrides)


def _region_arg(values) -> Region | None:
    if values is None:
        return None
    return Region(*values)


def cmd_propose(args) -> int:
    config = _load_config(args)
    image = load_image(args.image)
    if args.mask:
        sal = compute_saliency(image)
        image_for_proposals = mask_image(image, sal, otsu_threshold(sal).theta)
    else:
        image_for_proposals = image
    regions = selective_search(image_for_proposals, ProposalConfig(
        scale_k=config.scale_k, min_size=config.min_size,
        max_proposals=config.max_proposals))
    regions = nms(regions, config.nms_iou)
    _print(proposals_payload(Path(args.image).stem, regions))
    return 0


def cmd_saliency(args) -> int:
    image = load_image(args.image)
    sal = compute_saliency(image)
    result = otsu_threshold(sal)
    if args.out:
        save_grayscale_png(sal, args.out)
    _print({"image": Path(args.image).stem, "theta": result.theta,
            "degenerate": result.degenerate,
            "map": args.out if args.out else None})
    return 0


def cmd_classify(args) -> int:
    config = _load_config(args)
    if args.dists:
        records = load_distributions_jsonl(args.dists)
    elif args.image and args.classifier:
        model = load_classifier(args.classifier)
        image = load_image(args.image)
        feature = extract_features(image, _region_arg(args.region))
        records = [(Path(args.image).stem, predict(model, feature))]
    else:
        raise InvalidInputError("need --dists, or --image with --classifier")
    classify = METHODS[config.method]
    for rec_id, dist in records:
        verdict = classify(dist, config.threshold)
        _print({"id": rec_id, "label": verdict.label,
                "unknown": verdict.is_unknown, "statistic": verdict.statistic,
                "method": verdict.method})
    return 0


def cmd_target_word(args) -> int:
    config = _load_config(args)
    taxonomy = load_taxonomy(args.taxonomy)
    for rec_id, dist in load_distributions_jsonl(args.dists):
        word = select_target_word(dist, config.k, taxonomy)
        _print({"id": rec_id, "word": word.word, "depth": word.depth,
                "sources": list(word.source_labels), "k": word.k})
    return 0


def cmd_train_embeddings(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    config = poincare.EmbeddingConfig(
        dim=args.dim, epochs=args.epochs, lr=args.lr, n_neg=args.n_neg,
        seed=args.seed if args.seed is not None else 0)
    embedding = poincare.train_embeddings(taxonomy, config)
    poincare.save_embedding(embedding, args.out)
    _print({"out": args.out, "words": len(embedding.vectors),
            "dim": embedding.dim,
            "final_loss": embedding.meta["loss_history"][-1]})
    return 0


def cmd_train_qgen(args) -> int:
    entries = corpus_mod.load_corpus(args.corpus)
    if not entries:
        raise DataError("corpus is empty")
    embedding = poincare.load_embedding(args.embedding)
    image_dir = Path(args.images)
    data = []
    for entry in entries:
        image = load_image(image_dir / f"{entry.image}.png")
        f = qgen.encode(image, Region(*entry.region), extract_features)
        sigma_v = poincare.embed(embedding, entry.target_word)
        data.append((f, sigma_v, qgen.tokenize(entry.question)))
    config = qgen.DecoderConfig(
        hidden=args.hidden, steps=args.steps, lr=args.lr,
        batch_size=args.batch_size,
        seed=args.seed if args.seed is not None else 0)
    params = qgen.train_decoder(data, config)
    qgen.save_decoder(params, args.out)
    _print({"out": args.out, "pairs": len(data),
            "vocab": len(params.vocab),
            "final_ce": qgen.per_token_ce(params, data)})
    return 0


def cmd_ask(args) -> int:
    config = _load_config(args)
    models = pipeline.load_models(config)
    if args.kb and Path(args.kb).exists():
        kb = pipeline.load_kb(args.kb)
    else:
        kb = pipeline.new_kb(models.classifier.labels)
    image = load_image(args.image)
    record = pipeline.run_pipeline(image, config, models, kb,
                                   image_id=Path(args.image).stem)
    if args.kb and record is not None:
        pipeline.save_kb(kb, args.kb)
    _print(record.to_dict() if record is not None else {"question": None})
    return 0


def cmd_evaluate(args) -> int:
    candidates = corpus_mod.load_corpus(args.candidates)
    references = corpus_mod.load_corpus(args.references)
    by_key = {}
    for entry in references:
        by_key.setdefault((entry.image, entry.region), []).append(
            qgen.tokenize(entry.question))
    pairs = []
    for entry in candidates:
        refs = by_key.get((entry.image, entry.region))
        if not refs:
            raise DataError(f"no reference for {entry.image} {entry.region}")
        pairs.append((qgen.tokenize(entry.question), refs))
    _print(metrics.evaluate_pairs(pairs).to_dict())
    return 0


def cmd_bench_unknown(args) -> int:
    seed = args.seed if args.seed is not None else 0
    bench = synthetic.gaussian_benchmark(seed=seed, n_per_class=args.n_per_class)
    model = train_toy_classifier(bench.train)
    known_val = [(predict(model, f), lbl) for f, lbl in bench.known_eval]
    unknown_val = [predict(model, f) for f in bench.unknown_eval]
    report = {}
    for method in ("entropy", "least_confident"):
        cal = calibrate_threshold(method, known_val, unknown_val)
        report[method] = {"threshold": cal.threshold, "f_mean": cal.f_mean,
                          "f_stderr": cal.f_stderr,
                          "folds": list(cal.fold_scores)}
    rng = np.random.default_rng(seed)
    big = rng.dirichlet(np.ones(args.timing_k), size=100)
    from .uncertainty import SoftmaxDistribution
    labels = tuple(f"c{j}" for j in range(args.timing_k))
    dists = [SoftmaxDistribution(labels=labels, p=row) for row in big]
    timing = {}
    for method in ("entropy", "least_confident"):
        t = time_classification(dists, method)
        timing[method] = {"mean_s": t.mean_s, "stderr_s": t.stderr_s,
                          "repetitions": t.repetitions, "images": t.images}
    report["timing"] = timing
    _print(report)
    return 0


def cmd_filter_corpus(args) -> int:
    entries = corpus_mod.load_corpus(args.input)
    kept = corpus_mod.filter_corpus(entries, cap=args.cap)
    corpus_mod.save_corpus(kept, args.output)
    _print({"in": len(entries), "kept": len(kept), "out": args.output})
    return 0


def cmd_demo_data(args) -> int:
    paths = synthetic.build_demo_bundle(
        args.out, seed=args.seed if args.seed is not None else 0,
        n_scenes=args.n_scenes)
    _print(paths)
    return 0


def cmd_serve(args) -> int:
    from .server import create_app, serve

    config = _load_config(args)
    models = pipeline.load_models(config)
    if Path(args.kb).exists():
        kb = pipeline.load_kb(args.kb)
    else:
        kb = pipeline.new_kb(models.classifier.labels)
    image_dir = Path(args.images)
    if not image_dir.is_dir():
        raise ConfigError(f"image directory not found: {image_dir}")
    images = {p.stem: load_image(p) for p in sorted(image_dir.glob("*.png"))}
    if not images:
        raise ConfigError(f"no .png images under {image_dir}")
    static = args.ui if args.ui and Path(args.ui).is_dir() else None
    app = create_app(config, models, kb, args.kb, images, static_dir=static)
    serve(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visquest",
        description="unknown-object question pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, default=None)
        return p

    p = add("propose", cmd_propose, help="region proposals for an image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", action="store_true",
                   help="apply the saliency mask before proposing")
    p.add_argument("--scale-k", dest="scale_k", type=float)
    p.add_argument("--min-size", dest="min_size", type=int)
    p.add_argument("--max-proposals", dest="max_proposals", type=int)
    p.add_argument("--nms-iou", dest="nms_iou", type=float)

    p = add("saliency", cmd_saliency, help="saliency map and Otsu threshold")
    p.add_argument("--image", required=True)
    p.add_argument("--out", help="write the map as a grayscale PNG")

    p = add("classify", cmd_classify, help="open-set verdicts")
    p.add_argument("--dists", help="JSONL of {id, p, labels}")
    p.add_argument("--image")
    p.add_argument("--classifier")
    p.add_argument("--region", type=int, nargs=4,
                   metavar=("X_TL", "Y_TL", "X_BR", "Y_BR"))
    p.add_argument("--method", choices=sorted(METHODS))
    p.add_argument("--threshold", type=float)

    p = add("target-word", cmd_target_word, help="lowest common hypernym of top-k")
    p.add_argument("--dists", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--k", type=int)

    p = add("train-embeddings", cmd_train_embeddings, help="hyperbolic embeddings")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--n-neg", dest="n_neg", type=int, default=10)

    p = add("train-qgen", cmd_train_qgen, help="train the question decoder")
    p.add_argument("--corpus", required=True)
    p.add_argument("--images", required=True, help="directory of <image>.png")
    p.add_argument("--embedding", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)

    p = add("ask", cmd_ask, help="one image in, one question out")
    p.add_argument("--image", required=True)
    p.add_argument("--kb", help="knowledge base JSON to update")
    p.add_argument("--method", choices=sorted(METHODS))
    p.add_argument("--threshold", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--generation-mode", dest="generation_mode",
                   choices=("greedy", "beam", "template"))

    p = add("evaluate", cmd_evaluate, help="BLEU/METEOR over a corpus")
    p.add_argument("--candidates", required=True)
    p.add_argument("--references", required=True)

    p = add("bench-unknown", cmd_bench_unknown,
            help="open-set F-measure and timing benchmark")
    p.add_argument("--n-per-class", dest="n_per_class", type=int, default=200)
    p.add_argument("--timing-k", dest="timing_k", type=int, default=1000)

    p = add("filter-corpus", cmd_filter_corpus, help="corpus cleanup rules")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--cap", type=int, default=corpus_mod.DEFAULT_CAP)

    p = add("demo-data", cmd_demo_data, help="build a synthetic model bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--n-scenes", dest="n_scenes", type=int, default=8)

    p = add("serve", cmd_serve, help="run the answer-collection service")
    p.add_argument("--kb", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--ui", help="static directory for the browser UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except VisquestError as exc:
        print(f"error:{exc.code} {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
