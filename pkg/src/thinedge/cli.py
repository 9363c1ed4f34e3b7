"""Command-line driver: gen, train, extract, eval, sweep.

Exit codes: 0 success, 2 usage/input error, 3 numeric failure. The last
stdout line of every command is a ``key=value`` summary.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics
from .classifier import TrainConfig, load_model, save_model, train
from .errors import DegenerateError, FormatError, ParseError, SpecError, ThinEdgeError
from .pipeline import (
    RunConfig,
    analyze_cloud,
    cache_name,
    default_threads,
    extract_edges,
    read_descriptors,
    write_descriptors,
)
from .pointcloud import (
    THIN_WALLED_THRESHOLD,
    PointCloud,
    label_ground_truth,
    read_cloud,
    read_gt,
    write_cloud,
    write_gt,
)
from .synth import ShapeSpec, generate, read_spec

log = logging.getLogger("thinedge")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(ThinEdgeError):
    pass


def _summary(**kv) -> None:
    print(" ".join(f"{k}={metrics.format_value(v)}" for k, v in kv.items()))


def _run_config(args) -> RunConfig:
    return RunConfig(
        k=args.k,
        bandwidth=args.bandwidth,
        samples=args.samples,
        mu=args.mu,
        ransac_tol=args.ransac_tol,
        ransac_iterations=args.ransac_iterations,
        ransac_seed=args.ransac_seed,
        threshold=args.threshold,
        threads=args.threads,
    )


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    d = RunConfig()
    p.add_argument("--k", type=int, default=d.k, help="neighbours per point")
    p.add_argument("--bandwidth", type=int, default=d.bandwidth, help="SH bandwidth B")
    p.add_argument("--samples", type=int, default=d.samples, help="curve samples M")
    p.add_argument("--mu", type=float, default=d.mu)
    p.add_argument("--ransac-tol", type=float, default=d.ransac_tol)
    p.add_argument("--ransac-iterations", type=int, default=d.ransac_iterations)
    p.add_argument("--ransac-seed", type=int, default=d.ransac_seed)
    p.add_argument("--threshold", type=float, default=d.threshold, help="edge probability cut")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $STAR_EDGE_THREADS or CPU count)")


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    spec = read_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cloud, gt = generate(spec)
    labeled = label_ground_truth(cloud, gt, args.gt_threshold)
    write_cloud(cloud, out / f"cloud.{args.format}")
    write_gt(gt, out / "gt.xyz")
    write_cloud(labeled, out / f"labeled.{args.format}")
    print(f"wrote {len(cloud)} points ({int(labeled.labels.sum())} edge) to {out}")
    _summary(points=len(cloud), edge_points=int(labeled.labels.sum()),
             gt_vertices=len(gt.vertices), out_dir=str(out))
    return EXIT_OK


def _training_set(train_dir: Path, cfg: RunConfig, cache_dir: Path | None):
    xs, ys = [], []
    files = sorted(p for p in train_dir.iterdir() if p.suffix.lower() in (".xyz", ".ply", ".desc"))
    for path in files:
        if path.suffix == ".desc":
            x, y = read_descriptors(path, cfg.bandwidth)
            if y is None:
                raise UsageError(f"{path}: descriptor file has no label column")
            log.info("using descriptor batch %s", path)
        else:
            cloud = read_cloud(path)
            if cloud.labels is None:
                log.warning("skipping unlabeled cloud %s", path)
                continue
            cached = cache_dir / cache_name(cloud, cfg.k, cfg.bandwidth, cfg.samples) if cache_dir else None
            if cached is not None and cached.exists():
                log.info("descriptor cache hit: %s", cached)
                x, y = read_descriptors(cached, cfg.bandwidth)
            else:
                t0 = time.perf_counter()
                a = analyze_cloud(cloud, cfg.k, cfg.bandwidth, cfg.samples, cfg.ransac_tol,
                                  cfg.ransac_iterations, cfg.ransac_seed, cfg.threads)
                log.info("descriptors computed for %s in %.2f s", path, time.perf_counter() - t0)
                keep = ~a.degenerate
                x, y = a.descriptors[keep], cloud.labels[keep]
                if cached is not None:
                    cache_dir.mkdir(parents=True, exist_ok=True)
                    write_descriptors(cached, x, y)
        xs.append(x)
        ys.append(y)
    if not xs:
        raise UsageError(f"no labeled clouds or descriptor files in {train_dir}")
    return np.vstack(xs), np.concatenate(ys)


def cmd_train(args) -> int:
    cfg = _run_config(args)
    train_dir = Path(args.train_dir)
    if not train_dir.is_dir():
        raise UsageError(f"{train_dir} is not a directory")
    cache_dir = None if args.no_cache else Path(args.cache_dir or train_dir / ".desc_cache")
    x, y = _training_set(train_dir, cfg, cache_dir)
    if len(np.unique(y)) < 2:
        raise UsageError("training data contains a single class")
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                       learning_rate=args.learning_rate, seed=args.seed)
    model = train(x, y, tcfg)
    model.meta.update(k=cfg.k, samples=cfg.samples)
    save_model(model, args.model_out)
    _summary(samples=len(x), edge_fraction=float(np.mean(y)), epochs=tcfg.epochs,
             train_accuracy=model.meta["train_accuracy"], model=args.model_out)
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _run_config(args)
    model_path = Path(args.model)
    if not model_path.exists():
        raise UsageError(f"model file {model_path} not found")
    model = load_model(model_path)
    if model.bandwidth != cfg.bandwidth:
        log.info("using model bandwidth %d", model.bandwidth)
        cfg = replace(cfg, bandwidth=model.bandwidth)
    cloud = read_cloud(args.cloud)
    if len(cloud) == 0:
        raise UsageError(f"{args.cloud} contains no points")
    result = extract_edges(cloud, model, cfg, refine=not args.no_refine)
    write_cloud(result.edges, args.out)
    labeled_out = args.labeled_out or str(Path(args.out).with_name(Path(args.out).stem + "_labeled.xyz"))
    write_cloud(PointCloud(cloud.points, result.labels), labeled_out)
    _summary(points=len(cloud), edges=len(result.edge_indices),
             degenerate=int(result.degenerate.sum()), refined=not args.no_refine,
             **{f"t_{k}": round(v, 3) for k, v in result.timings.items()}, out=args.out)
    return EXIT_OK


def _write_csv(rows, path, append) -> None:
    path = Path(path)
    if append and path.exists() and path.stat().st_size:
        with path.open("a") as fh:
            fh.write(metrics.to_csv(rows, header=False))
    else:
        path.write_text(metrics.to_csv(rows))


def cmd_eval(args) -> int:
    pred = read_cloud(args.pred)
    gt = read_gt(args.gt)
    meta = dict(shape=args.shape, noise=args.noise, resolution=args.resolution,
                bandwidth=args.bandwidth)
    if args.pred_labels or args.true_labels:
        if not (args.pred_labels and args.true_labels):
            raise UsageError("--pred-labels and --true-labels go together")
        pl, tl = read_cloud(args.pred_labels).labels, read_cloud(args.true_labels).labels
        if pl is None or tl is None:
            raise UsageError("label files must carry a label column")
        report = metrics.classification_metrics(pl, tl, **meta)
    else:
        report = metrics.EvalReport(meta=meta)
    try:
        report.ecd = metrics.ecd(pred, gt, root=args.root)
    except metrics.UndefinedMetricError as exc:
        log.warning("%s", exc)
        report.ecd = None
    row = report.row()
    sys.stdout.write(metrics.to_csv([row]))
    if args.csv:
        _write_csv([row], args.csv, args.append)
    _summary(ecd=report.ecd, recall=report.recall, precision=report.precision,
             f1=report.f1, accuracy=report.accuracy)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    model = load_model(args.model)
    cfg = replace(cfg, bandwidth=model.bandwidth)
    base = read_spec(args.spec) if args.spec else ShapeSpec("plate", thickness=3.0)
    reports = []
    for noise in args.noise:
        for res in args.resolution:
            spec = replace(base, noise_sigma=noise, resolution=res)
            cloud, gt = generate(spec)
            cloud = label_ground_truth(cloud, gt, args.gt_threshold)
            result = extract_edges(cloud, model, cfg, refine=not args.no_refine)
            rep = metrics.classification_metrics(
                result.labels, cloud.labels, shape=spec.kind, noise=noise, resolution=res,
                bandwidth=cfg.bandwidth)
            try:
                rep.ecd = metrics.ecd(result.edges, gt, root=args.root)
            except metrics.UndefinedMetricError:
                rep.ecd = None
            log.info("noise=%g resolution=%g ecd=%s", noise, res, rep.ecd)
            reports.append(rep)
    table = metrics.sweep_report(reports)
    sys.stdout.write(table)
    if args.out:
        Path(args.out).write_text(table)
    _summary(runs=len(reports), out=args.out or "-")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinedge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic thin-walled shape")
    p.add_argument("spec", help="key = value shape spec file")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=None, help="override the seed from the shape file")
    p.add_argument("--gt-threshold", type=float, default=THIN_WALLED_THRESHOLD)
    p.add_argument("--format", choices=("xyz", "ply"), default="xyz")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the edge classifier on labeled clouds")
    p.add_argument("train_dir")
    p.add_argument("model_out")
    d = TrainConfig()
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--no-cache", action="store_true")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="detect and refine edge points")
    p.add_argument("cloud")
    p.add_argument("model")
    p.add_argument("out", help="edge-only output cloud")
    p.add_argument("--labeled-out", default=None, help="full cloud with predicted labels")
    p.add_argument("--no-refine", action="store_true")
    _add_run_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="ECD and classification metrics as CSV")
    p.add_argument("pred", help="predicted edge cloud")
    p.add_argument("gt", help="ground-truth polylines (gt.xyz)")
    p.add_argument("--pred-labels", default=None, help="cloud with predicted labels")
    p.add_argument("--true-labels", default=None, help="cloud with ground-truth labels")
    p.add_argument("--csv", default=None)
    p.add_argument("--append", action="store_true")
    p.add_argument("--root", action="store_true", help="report sqrt of ECD (RMS variant)")
    p.add_argument("--shape", default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--resolution", type=float, default=None)
    p.add_argument("--bandwidth", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="noise x resolution robustness grid")
    p.add_argument("model")
    p.add_argument("--spec", default=None, help="base shape spec (default: 20x20x3 plate)")
    p.add_argument("--noise", type=float, nargs="+", default=[0.001])
    p.add_argument("--resolution", type=float, nargs="+", default=[0.5])
    p.add_argument("--gt-threshold", type=float, default=THIN_WALLED_THRESHOLD)
    p.add_argument("--out", default=None)
    p.add_argument("--root", action="store_true")
    p.add_argument("--no-refine", action="store_true")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "threads", "unset") is None:
        args.threads = default_threads()
    try:
        return args.func(args)
    except (ArithmeticError, np.linalg.LinAlgError, DegenerateError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        _summary(status="numeric-error")
        return EXIT_NUMERIC
    except (OSError, ValueError, SpecError, ParseError, FormatError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _summary(status="input-error")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
