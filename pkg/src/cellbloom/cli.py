"""Command-line entry point wiring the pipeline end to end.

Every artifact-emitting subcommand writes a run_config.json next to its
outputs recording the exact parameters used. Usage errors exit with code 2
(argparse), runtime failures print one `error: ...` line and exit 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentationSpec
from .cytoclass import CellTypeClassifier, ClassifierConfig, evaluate, train_classifier, write_report
from .harness import run_experiment
from .imaging import load_image, save_image
from .ingest import ingest_cells, ingest_flowers
from .labels import CellClass, ClassPairMap, FlowerClass
from .manifest import DatasetManifest, oversample_training, split_manifest
from .synthetic import SyntheticDomainSpec, generate_synthetic_domains
from .transfer import (
    DiscriminatorSpec,
    GeneratorSpec,
    IdentityTransfer,
    TransferCheckpoint,
    TransferConfig,
    train_pair,
)

log = logging.getLogger("cellbloom")


def _write_run_config(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    params = {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items() if k != "func"}
    doc = {"command": command, "version": __version__, "params": params}
    (out_dir / "run_config.json").write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated numbers (train,test,val)")
    return parts[0], parts[1], parts[2]


def _load_pairing(path: str | None) -> ClassPairMap:
    if path is None:
        return ClassPairMap()
    return ClassPairMap.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_checkpoints(root: Path, identity: bool = False) -> dict[CellClass, object]:
    if identity:
        return {c: IdentityTransfer() for c in CellClass}
    checkpoints: dict[CellClass, object] = {}
    for c in CellClass:
        ckpt_dir = root / c.name
        if (ckpt_dir / "config.json").exists():
            checkpoints[c] = TransferCheckpoint.load(ckpt_dir)
    if not checkpoints:
        raise FileNotFoundError(f"no checkpoints found under {root}")
    return checkpoints


# ---------- subcommand handlers ----------


def cmd_ingest_cells(args) -> int:
    out = Path(args.out)
    manifest = ingest_cells(
        args.annotations, args.image_root, out, patch_size=args.patch_size, seed=args.seed
    )
    manifest.save(out / "cells.manifest.jsonl")
    _write_run_config(out, "ingest-cells", args)
    print(out / "cells.manifest.jsonl")
    return 0


def cmd_ingest_flowers(args) -> int:
    out = Path(args.out)
    aliases = None
    if args.aliases:
        raw = json.loads(Path(args.aliases).read_text(encoding="utf-8"))
        aliases = {k: FlowerClass.from_name(v) for k, v in raw.items()}
    manifest = ingest_flowers(args.image_root, aliases=aliases, seed=args.seed)
    out.mkdir(parents=True, exist_ok=True)
    manifest.save(out / "flowers.manifest.jsonl")
    _write_run_config(out, "ingest-flowers", args)
    print(out / "flowers.manifest.jsonl")
    return 0


def cmd_split(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    result = split_manifest(manifest, args.ratios, seed=args.seed)
    result.save(args.out)
    _write_run_config(Path(args.out).parent, "split", args)
    for split in ("train", "test", "val"):
        log.info("%s census: %s", split, result.split_census(split))
    print(args.out)
    return 0


def cmd_oversample(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    result = oversample_training(manifest, floor_count=args.floor, seed=args.seed)
    result.save(args.out)
    _write_run_config(Path(args.out).parent, "oversample", args)
    log.info("train census after oversampling: %s", result.split_census("train"))
    print(args.out)
    return 0


def cmd_synth_data(args) -> int:
    out = Path(args.out)
    spec = SyntheticDomainSpec(
        per_class=args.per_class, image_size=args.size, noise_sigma=args.noise, seed=args.seed
    )
    cells, flowers = generate_synthetic_domains(spec, out)
    cells.save(out / "cells.manifest.jsonl")
    flowers.save(out / "flowers.manifest.jsonl")
    _write_run_config(out, "synth-data", args)
    print(out)
    return 0


def cmd_train_transfer(args) -> int:
    cell_class = CellClass.from_name(args.pair)
    pairing = _load_pairing(args.pairing)
    flower_class = pairing.to_flower(cell_class)
    cells = DatasetManifest.load(args.cells).subset(class_label=cell_class)
    flowers = DatasetManifest.load(args.flowers).subset(class_label=flower_class)
    cfg = TransferConfig(
        pair=(cell_class, flower_class),
        epochs=args.epochs,
        image_size=args.image_size,
        batch_size=args.batch_size,
        lr=args.lr,
        lambda_cycle=args.lambda_cycle,
        lambda_identity=args.lambda_identity,
        pool_capacity=args.pool,
        generator=GeneratorSpec(base_width=args.width, n_blocks=args.blocks),
        discriminator=DiscriminatorSpec(base_width=args.disc_width or args.width, n_down=args.disc_layers),
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
    )
    out = Path(args.out) / cell_class.name
    ckpt = train_pair(cfg, cells, flowers, out, resume_from=args.resume)
    _write_run_config(out, "train-transfer", args)
    log.info("trained %s<->%s to epoch %d", cell_class.name, flower_class.name, ckpt.epoch)
    print(out)
    return 0


def cmd_transform(args) -> int:
    ckpt = TransferCheckpoint.load(args.checkpoint)
    manifest = DatasetManifest.load(args.manifest)
    direction = {"cell2flower": "ab", "flower2cell": "ba"}[args.direction]
    reverse = "ba" if direction == "ab" else "ab"
    out = Path(args.out)
    for rec in manifest.records:
        img = load_image(rec.path, size=ckpt.cfg.image_size)
        fake = ckpt.transform(img, direction)
        save_image(fake, out / "fake" / f"{rec.id}.png")
        if args.triplets:
            save_image(img, out / "original" / f"{rec.id}.png")
            save_image(ckpt.transform(fake, reverse), out / "reconstructed" / f"{rec.id}.png")
    _write_run_config(out, "transform", args)
    print(out)
    return 0


def cmd_train_classifier(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    cfg = ClassifierConfig(
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        image_size=args.image_size,
        pretrained_init=args.pretrained,
        seed=args.seed,
        augmentation=None if args.no_augment else AugmentationSpec(),
    )
    model = train_classifier(manifest, cfg)
    out = Path(args.out)
    model.save(out)
    _write_run_config(out, "train-classifier", args)
    print(out)
    return 0


def cmd_evaluate(args) -> int:
    model = CellTypeClassifier.load(args.model)
    manifest = DatasetManifest.load(args.manifest)
    if args.split:
        manifest = manifest.subset(split=args.split)
    result = evaluate(model, manifest)
    out = Path(args.out)
    write_report(result, args.tag, out)
    _write_run_config(out, "evaluate", args)
    log.info("%s: overall=%.4f macro=%.4f", args.tag, result.overall_accuracy, result.macro_accuracy)
    print(out / f"evaluation_{args.tag}.json")
    return 0


def cmd_run_experiment(args) -> int:
    cells = DatasetManifest.load(args.cells)
    checkpoints = _load_checkpoints(Path(args.checkpoints), identity=args.identity)
    model = CellTypeClassifier.load(args.model)
    out = Path(args.out)
    report = run_experiment(cells, checkpoints, model, out)
    if args.heatmaps:
        from .cytoclass import ConfusionMatrix
        from .harness import save_cm_heatmap

        for tag, counts in (("real", report.cm_real), ("reconstructed", report.cm_reconstructed)):
            save_cm_heatmap(ConfusionMatrix(counts=np.array(counts)), out / f"confusion_{tag}.png")
    _write_run_config(out, "run-experiment", args)
    print(out / "report.json")
    return 0


def cmd_make_tasks(args) -> int:
    from .bloomserve import create_tasks

    cells = DatasetManifest.load(args.cells)
    if args.split:
        cells = cells.subset(split=args.split)
    checkpoints = _load_checkpoints(Path(args.checkpoints), identity=args.identity)
    pairing = _load_pairing(args.pairing)
    store = create_tasks(
        cells, checkpoints, args.out, pair_map=pairing, required_annotations=args.required
    )
    _write_run_config(Path(args.out), "make-tasks", args)
    log.info("store ready: %s", store.progress())
    print(args.out)
    return 0


def cmd_serve(args) -> int:
    from .bloomserve.server import serve

    serve(args.data_dir, port=args.port, host=args.host, static_dir=args.static)
    return 0


def cmd_export_labels(args) -> int:
    from .bloomserve import AnnotationStore

    store = AnnotationStore(args.data_dir)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(store.export_jsonl(), encoding="utf-8")
    print(out)
    return 0


# ---------- parser ----------


def build_parser() -> tuple[argparse.ArgumentParser, argparse._SubParsersAction]:
    parser = argparse.ArgumentParser(
        prog="cellbloom",
        description="cell/flower translation, transfer validation, and gamified annotation",
    )
    parser.add_argument("--config", help="JSON file with default values for any flag")
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-cells", help="crop annotated cells into patches and build a manifest")
    p.add_argument("--annotations", required=True, help="JSON list of {slide,x,y,w,h,label}")
    p.add_argument("--image-root", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest_cells)

    p = sub.add_parser("ingest-flowers", help="index a class-per-directory flower collection")
    p.add_argument("--image-root", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--aliases", help="JSON file mapping directory names to flower classes")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest_flowers)

    p = sub.add_parser("split", help="assign stratified train/test/val splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", type=_parse_ratios, default=(0.8, 0.1, 0.1), help="train,test,val")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("oversample", help="oversample under-represented training classes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--floor", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oversample)

    p = sub.add_parser("synth-data", help="generate the synthetic two-domain fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--noise", type=float, default=0.04)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train-transfer", help="train one class pair's translation model")
    p.add_argument("--pair", required=True, choices=[c.name for c in CellClass],
                   help="cell class; the flower side comes from the pairing")
    p.add_argument("--cells", required=True)
    p.add_argument("--flowers", required=True)
    p.add_argument("--out", required=True, help="checkpoint root; the pair gets a subdirectory")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--lambda-cycle", type=float, default=10.0)
    p.add_argument("--lambda-identity", type=float, default=0.0)
    p.add_argument("--pool", type=int, default=50)
    p.add_argument("--width", type=int, default=64, help="generator base width")
    p.add_argument("--blocks", type=int, default=6, help="generator residual blocks")
    p.add_argument("--disc-width", type=int, default=None)
    p.add_argument("--disc-layers", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--resume", help="checkpoint directory to continue from")
    p.add_argument("--pairing", help="JSON file with a custom cell->flower pairing")
    p.set_defaults(func=cmd_train_transfer)

    p = sub.add_parser("transform", help="run a checkpoint over a manifest, optionally dumping triplets")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--direction", choices=["cell2flower", "flower2cell"], default="cell2flower")
    p.add_argument("--out", required=True)
    p.add_argument("--triplets", action="store_true", help="also dump original and reconstructed images")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("train-classifier", help="train the 7-class cell-type classifier")
    p.add_argument("--manifest", required=True, help="cell manifest with splits (oversampled)")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--pretrained", action="store_true", help="general-image pretrained init (needs download)")
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("evaluate", help="evaluate a classifier on a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None, help="restrict to one split (e.g. test)")
    p.add_argument("--tag", default="real")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-experiment", help="real vs reconstructed evaluation and report")
    p.add_argument("--cells", required=True)
    p.add_argument("--checkpoints", required=True, help="root with one checkpoint dir per cell class")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--identity", action="store_true", help="identity routing control (no models)")
    p.add_argument("--heatmaps", action="store_true", help="also emit flat PNG heatmaps of the CMs")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("make-tasks", help="create annotation tasks from labeled cells")
    p.add_argument("--cells", required=True)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--out", required=True, help="service data directory")
    p.add_argument("--required", type=int, default=3)
    p.add_argument("--split", default=None)
    p.add_argument("--identity", action="store_true")
    p.add_argument("--pairing", help="JSON file with a custom cell->flower pairing")
    p.set_defaults(func=cmd_make_tasks)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="static client bundle to serve at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-labels", help="export crowd labels as a manifest")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_labels)

    return parser, sub


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)

    parser, sub = build_parser()
    if known.config:
        doc = json.loads(Path(known.config).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            parser.error(f"--config {known.config}: expected a JSON object")
        doc = {k: v for k, v in doc.items() if k not in ("func", "command", "config")}
        parser.set_defaults(**doc)
        for subparser in sub.choices.values():
            subparser.set_defaults(**doc)

    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
