"""Command-line front end.

Subcommands: generate, train, eval, gradcheck, embed-dump, ablate, bench.
Every output artifact echoes the resolved configuration it was produced with.

Exit codes: 0 ok, 2 config error, 3 data/generation error, 4 training fault,
5 evaluation fault.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .config import EvalConfig, RunConfig, TrainConfig, load_run_config
from .errors import (
    ConfigError,
    DataError,
    DatasetParseError,
    GenerationError,
    TrilocError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAIN = 4
EXIT_EVAL = 5


def _fail_code(exc: Exception, domain: int) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DatasetParseError, DataError, GenerationError)):
        return EXIT_DATA
    return domain


def _load_config(path) -> RunConfig:
    if path is None:
        raise ConfigError("--config is required")
    return load_run_config(path)


def _load_scenes(path):
    from .scenegen.dataset_io import read_dataset

    scenes = read_dataset(path)
    if not scenes:
        raise DataError(f"dataset {path} is empty")
    return scenes


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    from .scenegen.dataset_io import write_dataset
    from .scenegen.world import generate_world

    run_cfg = _load_config(args.config)
    world_cfg = run_cfg.world
    if args.seed is not None:
        world_cfg = dataclasses.replace(world_cfg, seed=args.seed)
    scenes = generate_world(world_cfg)
    write_dataset(scenes, args.out)

    counts = {split: 0 for split in ("train", "val", "test")}
    for scene in scenes:
        counts[scene.split] += 1
    meta = {
        "config": dataclasses.replace(run_cfg, world=world_cfg).to_dict(),
        "scenes": len(scenes),
        "split_counts": counts,
    }
    _write_json(str(args.out) + ".meta.json", meta)
    print(f"wrote {len(scenes)} scenes to {args.out} "
          f"(train={counts['train']} val={counts['val']} "
          f"test={counts['test']})")
    return EXIT_OK


def _train_config_from_args(args) -> TrainConfig:
    cfg = _load_config(args.config).train
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.pool is not None:
        overrides["pool"] = args.pool
    if args.no_uv:
        overrides["use_uv"] = False
    return cfg.replace(**overrides) if overrides else cfg


def cmd_train(args) -> int:
    from .train import run_training

    cfg = _train_config_from_args(args)
    scenes = _load_scenes(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "training_log.jsonl"
    log_path.write_text("")  # start a fresh log per run

    def progress(record):
        parts = [f"{record['stage']:>10}", f"epoch {record['epoch']:>3}",
                 f"lr {record['lr']:.2e}", f"loss {record['loss']:.4f}"]
        if "val_avg_r1" in record:
            parts.append(f"val R@1 {record['val_avg_r1']:.3f}")
        print("  ".join(parts))

    ckpt_it, ckpt_ip, ckpt_scene = run_training(
        scenes, cfg, stage=args.stage, no_pretrain=args.no_pretrain,
        log_path=log_path, progress=progress,
    )
    for name, ckpt in (("instance_it", ckpt_it), ("instance_ip", ckpt_ip),
                       ("scene", ckpt_scene)):
        if ckpt is not None:
            ckpt.save(out_dir / f"{name}.ckpt")
            print(f"saved {out_dir / (name + '.ckpt')}")
    return EXIT_OK


def _eval_config_from_args(args, base: EvalConfig = None) -> EvalConfig:
    cfg = base if base is not None else EvalConfig()
    overrides = {}
    if args.d is not None:
        overrides["d"] = args.d
    if args.ks is not None:
        overrides["ks"] = tuple(int(k) for k in args.ks.split(","))
    if args.hints is not None:
        overrides["hints"] = args.hints
    if args.split is not None:
        overrides["split"] = args.split
    return cfg.replace(**overrides) if overrides else cfg


def cmd_eval(args) -> int:
    from .retrieval import run_task_matrix
    from .scenegen.world import split_scenes
    from .train import Checkpoint, average_cross_r1

    ev = _eval_config_from_args(args)
    ckpt = Checkpoint.load(args.checkpoint)
    scenes = split_scenes(_load_scenes(args.dataset), ev.split)
    if not scenes:
        raise DataError(f"split {ev.split!r} is empty")
    reports = run_task_matrix(ckpt, scenes, d=ev.d, ks=ev.ks, hints=ev.hints,
                              hint_seed=ev.hint_seed)
    payload = {
        "eval_config": ev.to_dict(),
        "train_config": ckpt.config.to_dict(),
        "checkpoint": {"stage": ckpt.stage, "epoch": ckpt.epoch},
        "reports": {task: rep.to_dict() for task, rep in reports.items()},
        "average_cross_r1": average_cross_r1(reports),
    }
    _write_json(args.out, payload)
    for task, rep in reports.items():
        recalls = "  ".join(f"R@{k}={v:.3f}" for k, v in
                            sorted(rep.recalls.items()))
        print(f"{task}: {recalls}")
    print(f"average cross-modal R@1: {payload['average_cross_r1']:.3f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .train import gradient_audit

    report = gradient_audit(seed=args.seed,
                            max_entries_per_param=args.max_entries)
    worst_path = max(report, key=report.get)
    worst = report[worst_path]
    for path in sorted(report, key=report.get, reverse=True)[: args.show]:
        print(f"{report[path]:.3e}  {path}")
    print(f"worst relative error: {worst:.3e} at {worst_path} "
          f"({len(report)} parameters)")
    if worst >= args.tol:
        print(f"FAIL: exceeds tolerance {args.tol}", file=sys.stderr)
        return EXIT_TRAIN
    print(f"PASS: all below {args.tol}")
    return EXIT_OK


def cmd_embed_dump(args) -> int:
    from .retrieval import dump_embeddings
    from .scenegen.world import split_scenes
    from .train import Checkpoint

    ckpt = Checkpoint.load(args.checkpoint)
    scenes = _load_scenes(args.dataset)
    if args.split is not None:
        scenes = split_scenes(scenes, args.split)
    rows = dump_embeddings(ckpt, scenes, args.out, hints=args.hints)
    print(f"wrote {rows} embedding rows to {args.out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .retrieval import run_task_matrix
    from .scenegen.world import split_scenes
    from .train import (
        average_cross_r1,
        pretrain_instance_models,
        train_scene_model,
    )

    run_cfg = _load_config(args.config)
    base = run_cfg.train
    ev = run_cfg.eval
    scenes = _load_scenes(args.dataset)
    test = split_scenes(scenes, "test")
    alphas = [float(a) for a in args.alphas.split(",")]
    for alpha in alphas:
        if not (0.0 <= alpha <= 1.0):
            raise ConfigError(f"alpha {alpha} outside [0,1]")

    pretrained = pretrain_instance_models(scenes, base)
    table = []
    for alpha in alphas:
        cfg = base.replace(alpha=alpha)
        ckpt = train_scene_model(scenes, cfg, pretrained)
        reports = run_task_matrix(ckpt, test, d=ev.d, ks=ev.ks,
                                  hints=ev.hints, hint_seed=ev.hint_seed)
        row = {
            "alpha": alpha,
            "average_cross_r1": average_cross_r1(reports),
            "per_task": {t: rep.to_dict()["recalls"]
                         for t, rep in reports.items()},
        }
        table.append(row)
        print(f"alpha={alpha:.1f}  avg cross R@1={row['average_cross_r1']:.3f}")

    payload = {"config": run_cfg.to_dict(), "sweep": table}
    _write_json(args.out, payload)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import format_results, run_benchmark

    backends = ("compiled",) if args.compiled_only else ("python", "compiled")
    results = run_benchmark(scale=args.scale, backends=backends)
    print(format_results(results))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triloc",
        description="Tri-modal place recognition sandbox: synthetic data, "
                    "two-stage contrastive training, retrieval evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_generate, domain=EXIT_DATA)

    p = sub.add_parser("train", help="train instance and/or scene models")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage", choices=("instance", "scene", "both"),
                   default="both")
    p.add_argument("--no-pretrain", action="store_true",
                   help="scene stage starts from fresh branches")
    p.add_argument("--pool", choices=("sap", "max"), default=None,
                   help="scene pooling (max = ablation)")
    p.add_argument("--no-uv", action="store_true",
                   help="drop UV encoders and position phrases")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train, domain=EXIT_TRAIN)

    p = sub.add_parser("eval", help="run the retrieval task matrix")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--ks", default=None, help="comma-separated ranks")
    p.add_argument("--hints", type=int, default=None)
    p.add_argument("--split", choices=("train", "val", "test"), default=None)
    p.set_defaults(fn=cmd_eval, domain=EXIT_EVAL)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-entries", type=int, default=24,
                   help="sampled entries per parameter (0 = all)")
    p.add_argument("--show", type=int, default=5)
    p.set_defaults(fn=cmd_gradcheck, domain=EXIT_TRAIN)

    p = sub.add_parser("embed-dump", help="dump descriptors to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default=None)
    p.add_argument("--hints", type=int, default=None)
    p.set_defaults(fn=cmd_embed_dump, domain=EXIT_EVAL)

    p = sub.add_parser("ablate", help="alpha sweep for the scene loss")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alphas", default="0.1,0.3,0.5,0.7,0.9")
    p.set_defaults(fn=cmd_ablate, domain=EXIT_TRAIN)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--compiled-only", action="store_true")
    p.set_defaults(fn=cmd_bench, domain=EXIT_TRAIN)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_entries", None) == 0:
        args.max_entries = None
    try:
        return args.fn(args)
    except TrilocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _fail_code(exc, args.domain)


if __name__ == "__main__":
    sys.exit(main())
