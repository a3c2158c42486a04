"""Command-line front end: synth, train, predict, evaluate, zeroshot, gradcheck."""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from miembed import __version__, kernels
from miembed.bags import read_bags_jsonl, write_bags_jsonl
from miembed.embedding import init_model, load_model, save_model
from miembed.inference import predict, read_predictions_jsonl, write_predictions_jsonl
from miembed.losses import LossConfig
from miembed.manifest import manifest_path_for, write_manifest
from miembed.metrics import (
    evaluate_annotations,
    map_at_k,
    render_report,
    report_to_dict,
    upper_bound_assignments,
)
from miembed.semantic_space import load_label_space, read_label_file, write_label_file
from miembed.synth import SynthConfig, generate
from miembed.trainer import (
    NonGenericPointError,
    TrainConfig,
    finite_difference_check,
    known_positives,
    train,
    write_history_jsonl,
)

CLI_LOSS_KINDS = {"rank": "whole_image_ranking", "mie": "mie", "mie-warp": "mie_rank_weighted"}

GRADCHECK_TOLERANCE = 1e-4


def _load_space(path):
    return load_label_space(read_label_file(path))


def _loss_config(args) -> LossConfig:
    return LossConfig(
        kind=CLI_LOSS_KINDS[args.loss],
        margin=args.margin,
        negative_cap=args.negative_cap,
        exclude_positives_from_rank=getattr(args, "rank_excludes_positives", False),
    )


def cmd_train(args) -> int:
    space = _load_space(args.labels)
    bags = read_bags_jsonl(args.bags)
    config = TrainConfig(
        loss=_loss_config(args),
        epochs=args.epochs,
        batch_size=args.batch_size,
        momentum=args.momentum,
        initial_lr=args.lr,
        lr_step_epochs=args.lr_step,
        lr_gamma=args.lr_gamma,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )
    model, history = train(bags, space, config)
    for rec in history.records:
        print(
            f"epoch {rec.epoch}: mean batch loss {rec.mean_batch_loss:.6f} "
            f"(lr {rec.learning_rate:g}, {rec.seconds:.2f}s)",
            file=sys.stderr,
        )
    save_model(model, args.out)
    history_path = args.history or f"{args.out}.history.jsonl"
    write_history_jsonl(history, history_path)
    write_manifest(
        manifest_path_for(args.out),
        "train",
        {
            "loss": args.loss,
            "margin": args.margin,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "lr_step": args.lr_step,
            "lr_gamma": args.lr_gamma,
            "momentum": args.momentum,
            "weight_decay": args.weight_decay,
            "negative_cap": args.negative_cap,
            "rank_excludes_positives": args.rank_excludes_positives,
            "history": history_path,
            "out": args.out,
            "jobs": args.jobs,
        },
        {"labels": args.labels, "bags": args.bags},
        args.seed,
    )
    return 0


def _predict_many(model, bag_list, space, k, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda bag: predict(model, bag, space, k), bag_list))
    return [predict(model, bag, space, k) for bag in bag_list]


def cmd_predict(args) -> int:
    model = load_model(args.model)
    space = _load_space(args.labels)
    bag_list = read_bags_jsonl(args.bags)
    lists = _predict_many(model, bag_list, space, args.k, args.jobs)
    write_predictions_jsonl(args.out, lists)
    write_manifest(
        manifest_path_for(args.out),
        "predict",
        {"k": args.k, "out": args.out, "jobs": args.jobs},
        {"model": args.model, "labels": args.labels, "bags": args.bags},
        None,
    )
    return 0


def cmd_evaluate(args) -> int:
    truth_bags = read_bags_jsonl(args.truth_bags)
    truths = {bag.bag_id: set(bag.labels) for bag in truth_bags}
    if args.labels:
        vocabulary = [name for name, _ in read_label_file(args.labels)]
    else:
        observed = set()
        for labels in truths.values():
            observed |= labels
        vocabulary = sorted(observed)

    if args.upper_bound:
        predictions = upper_bound_assignments(truths, vocabulary, args.k, args.seed)
        inputs = {"truth_bags": args.truth_bags}
    else:
        if not args.predictions:
            raise ValueError("--predictions is required unless --upper-bound is given")
        predictions = {}
        for plist in read_predictions_jsonl(args.predictions):
            labels = [e.label for e in plist.entries]
            if len(labels) < args.k:
                raise ValueError(
                    f"bag {plist.bag_id!r} has {len(labels)} predictions, fewer than k={args.k}"
                )
            predictions[plist.bag_id] = labels[: args.k]
        inputs = {"predictions": args.predictions, "truth_bags": args.truth_bags}
        if not vocabulary and predictions:
            vocabulary = sorted({n for labels in predictions.values() for n in labels})

    report = evaluate_annotations(predictions, truths, vocabulary, args.k)
    print(render_report(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if args.labels:
            inputs["labels"] = args.labels
        write_manifest(
            manifest_path_for(args.out),
            "evaluate",
            {"k": args.k, "upper_bound": args.upper_bound, "out": args.out},
            inputs,
            args.seed,
        )
    return 0


def cmd_zeroshot(args) -> int:
    model = load_model(args.model)
    unseen = _load_space(args.unseen_labels)
    bag_list = read_bags_jsonl(args.bags)
    lists = _predict_many(model, bag_list, unseen, args.k, args.jobs)
    write_predictions_jsonl(args.out, lists)
    if args.map:
        truths = {}
        for bag in bag_list:
            if len(bag.labels) != 1:
                raise ValueError(
                    f"--map needs single-label bags; bag {bag.bag_id!r} has "
                    f"{len(bag.labels)} labels"
                )
            truths[bag.bag_id] = next(iter(bag.labels))
        rankings = {pl.bag_id: [e.label for e in pl.entries] for pl in lists}
        score = map_at_k(rankings, truths, args.k)
        print(f"MAP@{args.k} = {score:.2f}")
    write_manifest(
        manifest_path_for(args.out),
        "zeroshot",
        {"k": args.k, "map": args.map, "out": args.out, "jobs": args.jobs},
        {"model": args.model, "unseen_labels": args.unseen_labels, "bags": args.bags},
        None,
    )
    return 0


def cmd_synth(args) -> int:
    config = SynthConfig(
        vocab_size=args.vocab_size,
        semantic_dim=args.semantic_dim,
        feature_dim=args.feature_dim,
        labels_per_bag_range=(args.min_labels_per_bag, args.max_labels_per_bag),
        num_bags=args.num_bags,
        distractor_instances=args.distractors,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        num_heldout=args.heldout,
    )
    result = generate(config)
    os.makedirs(args.out_dir, exist_ok=True)
    labels_path = os.path.join(args.out_dir, "labels.tsv")
    train_path = os.path.join(args.out_dir, "train_bags.jsonl")
    heldout_path = os.path.join(args.out_dir, "heldout_bags.jsonl")
    write_label_file(labels_path, result.space)
    write_bags_jsonl(train_path, result.train_bags)
    write_bags_jsonl(heldout_path, result.heldout_bags)
    write_manifest(
        os.path.join(args.out_dir, "manifest.json"),
        "synth",
        {
            "vocab_size": args.vocab_size,
            "semantic_dim": args.semantic_dim,
            "feature_dim": args.feature_dim,
            "min_labels_per_bag": args.min_labels_per_bag,
            "max_labels_per_bag": args.max_labels_per_bag,
            "num_bags": args.num_bags,
            "distractors": args.distractors,
            "noise_sigma": args.noise_sigma,
            "heldout": args.heldout,
            "out_dir": args.out_dir,
        },
        {},
        args.seed,
    )
    print(
        f"wrote {len(result.train_bags)} train / {len(result.heldout_bags)} held-out bags "
        f"to {args.out_dir}",
        file=sys.stderr,
    )
    return 0


def cmd_gradcheck(args) -> int:
    space = _load_space(args.labels)
    bag_list = read_bags_jsonl(args.bags)
    if not bag_list:
        raise ValueError(f"{args.bags}: no bags to check against")
    config = LossConfig(kind=CLI_LOSS_KINDS[args.loss], margin=args.margin)
    rng = np.random.default_rng(args.seed)
    # reject points whose boundary gaps are comparable to the probe radius
    genericity_tol = max(1e-6, 50.0 * args.step)
    feature_dim = bag_list[0].feature_dim

    worst = 0.0
    for _ in range(args.samples):
        for _attempt in range(100):
            bag = bag_list[int(rng.integers(len(bag_list)))]
            positives = known_positives(bag, space)
            if not positives:
                raise ValueError(
                    f"bag {bag.bag_id!r} has no ground-truth label in the vocabulary"
                )
            model = init_model(feature_dim, space.dim, rng)
            try:
                err = finite_difference_check(
                    model,
                    bag,
                    space,
                    positives,
                    config,
                    step=args.step,
                    genericity_tol=genericity_tol,
                    rng=rng,
                )
            except NonGenericPointError:
                continue
            break
        else:
            raise ValueError("could not find a generic point after 100 attempts")
        worst = max(worst, err)

    print(f"gradcheck {args.loss}: max relative error {worst:.3e} over {args.samples} points")
    if worst > GRADCHECK_TOLERANCE:
        print(
            f"error: gradient check failed ({worst:.3e} > {GRADCHECK_TOLERANCE:g})",
            file=sys.stderr,
        )
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miembed",
        description="Multi-instance visual-semantic embedding toolkit "
        f"(v{__version__}, kernel backend: {kernels.backend_name()})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an embedding model")
    p.add_argument("--labels", required=True)
    p.add_argument("--bags", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss", choices=sorted(CLI_LOSS_KINDS), default="mie-warp")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--lr-step", type=int, default=10)
    p.add_argument("--lr-gamma", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0005)
    p.add_argument("--negative-cap", type=int, default=None)
    p.add_argument("--rank-excludes-positives", action="store_true")
    p.add_argument("--history", default=None, help="history path (default: OUT.history.jsonl)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1,
                   help="worker cap; weight updates are sequential, so training runs one worker")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="annotate bags with top-k labels")
    p.add_argument("--model", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--bags", required=True)
    p.add_argument("--k", type=int, required=True, help="labels per image (3 and 5 are typical)")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against truth bags")
    p.add_argument("--predictions", default=None)
    p.add_argument("--truth-bags", required=True)
    p.add_argument("--k", type=int, required=True, help="labels per image (3 and 5 are typical)")
    p.add_argument("--labels", default=None, help="label file fixing the vocabulary")
    p.add_argument("--upper-bound", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the report JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("zeroshot", help="predict over an unseen vocabulary")
    p.add_argument("--model", required=True)
    p.add_argument("--unseen-labels", required=True)
    p.add_argument("--bags", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--map", action="store_true", help="report MAP@k from single-label bags")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_zeroshot)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--vocab-size", type=int, default=12)
    p.add_argument("--semantic-dim", type=int, default=8)
    p.add_argument("--feature-dim", type=int, default=32)
    p.add_argument("--min-labels-per-bag", type=int, default=2)
    p.add_argument("--max-labels-per-bag", type=int, default=3)
    p.add_argument("--num-bags", type=int, default=1000)
    p.add_argument("--distractors", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--heldout", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check of loss gradients")
    p.add_argument("--labels", required=True)
    p.add_argument("--bags", required=True)
    p.add_argument("--loss", choices=sorted(CLI_LOSS_KINDS), default="mie-warp")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
