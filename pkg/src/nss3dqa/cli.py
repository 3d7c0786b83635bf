"""Command-line interface for the 3D quality assessment pipeline.

Subcommands: extract, train, predict, evaluate, cv, sweep, synth.
Exit codes: 0 success, 1 input error, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import evaluation, nss, regression, synth
from .errors import ConvergenceError, Nss3dqaError
from .model_io import load_model
from .nss import ExtractionConfig

log = logging.getLogger("nss3dqa")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGENCE = 2


def _thread_count(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("NSS3DQA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring invalid NSS3DQA_THREADS=%r", env)
    return 1


def _extraction_config(args):
    return ExtractionConfig(
        knn_k=args.knn,
        entropy_bins=args.entropy_bins,
        curvature_radius_frac=args.curvature_radius_frac,
        include_self=args.include_self,
    )


def _add_extraction_args(parser):
    parser.add_argument("--knn", type=int, default=10,
                        help="neighborhood size for point clouds")
    parser.add_argument("--entropy-bins", type=int, default=256)
    parser.add_argument("--curvature-radius-frac", type=float, default=0.01,
                        help="curvature region radius as a fraction of the "
                             "bounding-box diagonal")
    parser.add_argument("--include-self", action="store_true",
                        help="include the query point in its own neighborhood")
    parser.add_argument("--threads", type=int, default=None,
                        help="extraction thread count "
                             "(default: NSS3DQA_THREADS or 1)")


def _add_svr_args(parser):
    parser.add_argument("--svr-c", type=float, default=1.0, dest="svr_c")
    parser.add_argument("--svr-epsilon", type=float, default=0.1)
    parser.add_argument("--svr-gamma", default="scale",
                        help='"scale" or a positive number')
    parser.add_argument("--mos-scale", type=float, default=1.0,
                        help="MOS divisor used during training (10, 100, or 1)")


def _svr_params(args):
    gamma = args.svr_gamma
    if gamma != "scale":
        gamma = float(gamma)
    return {"C": args.svr_c, "epsilon": args.svr_epsilon, "gamma": gamma}


def _extract_batch(paths, config, threads):
    """Extract feature vectors for all paths.

    Returns (results, timings_ms, errors); results align with paths.
    """
    results = [None] * len(paths)
    timings = [None] * len(paths)
    errors = []

    def work(i):
        t0 = time.perf_counter()
        model = load_model(paths[i])
        vec = nss.assemble_features(model, config)
        return i, vec, (time.perf_counter() - t0) * 1000.0

    indices = range(len(paths))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(work, i): i for i in indices}
            for fut, i in futures.items():
                try:
                    _, vec, ms = fut.result()
                    results[i] = vec
                    timings[i] = ms
                except (OSError, Nss3dqaError, ValueError) as exc:
                    errors.append((paths[i], str(exc)))
    else:
        for i in indices:
            try:
                _, vec, ms = work(i)
                results[i] = vec
                timings[i] = ms
            except (OSError, Nss3dqaError, ValueError) as exc:
                errors.append((paths[i], str(exc)))
    for path, ms in zip(paths, timings):
        if ms is not None:
            log.info("extracted %s in %.1f ms", path, ms)
    return results, timings, errors


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def cmd_extract(args):
    config = _extraction_config(args)
    results, timings, errors = _extract_batch(args.inputs, config,
                                              _thread_count(args))
    if errors:
        for path, msg in errors:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return EXIT_INPUT
    rows = list(zip(args.inputs, results))
    out = _open_out(args.output)
    try:
        nss.write_features_csv(rows, out)
    finally:
        if out is not sys.stdout:
            out.close()
    valid = [t for t in timings if t is not None]
    if valid:
        log.info("average extraction time: %.1f ms over %d models",
                 float(np.mean(valid)), len(valid))
    return EXIT_OK


def _load_manifest(path, mos_scale):
    with open(path, "r", encoding="utf-8") as fh:
        return evaluation.read_manifest(fh, mos_scale=mos_scale)


def _features_for_manifest(manifest, args):
    """Feature matrix aligned with the manifest rows.

    Uses --features CSV when given, extracting from the model files
    otherwise.  Returns (X, mean_extraction_ms_or_None).
    """
    if getattr(args, "features", None):
        with open(args.features, "r", encoding="utf-8") as fh:
            table = dict(nss.read_features_csv(fh))
        vecs = []
        for row in manifest.rows:
            if row.path not in table:
                raise ValueError(f"no features for {row.path!r} in "
                                 f"{args.features}")
            vecs.append(table[row.path])
        mean_ms = None
    else:
        config = _extraction_config(args)
        vecs, timings, errors = _extract_batch(manifest.paths(), config,
                                               _thread_count(args))
        if errors:
            raise ValueError("; ".join(f"{p}: {m}" for p, m in errors))
        mean_ms = float(np.mean([t for t in timings if t is not None]))
    kinds = {v.kind for v in vecs}
    if len(kinds) > 1:
        raise ValueError("manifest mixes point clouds and meshes; feature "
                         "dimensionality would be inconsistent")
    return np.stack([v.values for v in vecs]), mean_ms


def cmd_train(args):
    manifest = _load_manifest(args.manifest, args.mos_scale)
    X, _ = _features_for_manifest(manifest, args)
    y = manifest.mos() / manifest.mos_scale
    model = regression.train_svr(X, y, mos_scale=manifest.mos_scale,
                                 **_svr_params(args))
    regression.save_model(model, args.output)
    log.info("trained on %d rows, %d support vectors -> %s",
             len(y), len(model.dual_coefs), args.output)
    return EXIT_OK


def cmd_predict(args):
    model = regression.load_model(args.model)
    config = _extraction_config(args)
    results, _, errors = _extract_batch(args.inputs, config,
                                        _thread_count(args))
    if errors:
        for path, msg in errors:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return EXIT_INPUT
    out = _open_out(args.output)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["path", "score"])
        for path, vec in zip(args.inputs, results):
            writer.writerow([path, repr(regression.predict(model, vec.values))])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_evaluate(args):
    manifest = _load_manifest(args.manifest, args.mos_scale)
    with open(args.scores, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["path", "score"]:
            raise ValueError("scores CSV must have header 'path,score'")
        scores = {rec[0]: float(rec[1]) for rec in reader if rec}
    preds = []
    for row in manifest.rows:
        if row.path not in scores:
            raise ValueError(f"no score for {row.path!r}")
        preds.append(scores[row.path])
    metrics = evaluation.correlations(np.asarray(preds), manifest.mos())
    _emit_json(metrics.to_dict(), args.output)
    return EXIT_OK


def _emit_json(doc, output, table=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        if table:
            print(table)
    else:
        print(text)
        if table:
            print(table, file=sys.stderr)


def cmd_cv(args):
    manifest = _load_manifest(args.manifest, args.mos_scale)
    X, mean_ms = _features_for_manifest(manifest, args)
    report = evaluation.run_cv(manifest, X, svr_params=_svr_params(args))
    report.extraction_ms_mean = mean_ms
    _emit_json(report.to_dict(), args.output,
               table=report.to_table() if args.table else None)
    return EXIT_OK


def cmd_sweep(args):
    manifest = _load_manifest(args.manifest, args.mos_scale)
    X, _ = _features_for_manifest(manifest, args)
    fractions = [float(f) for f in args.fractions.split(",")]
    results = evaluation.data_sensitivity_sweep(
        manifest, X, fractions=fractions, svr_params=_svr_params(args),
        seed=args.seed)
    doc = {"fractions": [r.to_dict() for _, r in results]}
    _emit_json(doc, args.output)
    return EXIT_OK


def cmd_synth(args):
    manifest = synth.build_synthetic_benchmark(
        args.out_dir, groups=args.groups, count=args.count,
        levels=args.levels, seed=args.seed)
    log.info("wrote %d models and manifest.csv under %s",
             len(manifest.rows), args.out_dir)
    print(os.path.join(args.out_dir, "manifest.csv"))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nss3dqa",
        description="No-reference quality assessment for colored 3D models")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract feature CSV from models")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", default=None)
    _add_extraction_args(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train an SVR from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", default=None,
                   help="precomputed feature CSV (skips extraction)")
    p.add_argument("-o", "--output", required=True)
    _add_extraction_args(p)
    _add_svr_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score models with a trained SVR")
    p.add_argument("--model", required=True)
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", default=None)
    _add_extraction_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="correlate scores against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scores", required=True, help="CSV with header path,score")
    p.add_argument("--mos-scale", type=float, default=1.0)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="leave-one-content-out cross-validation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", default=None)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--table", action="store_true",
                   help="also print an aligned text table")
    _add_extraction_args(p)
    _add_svr_args(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="training-fraction sensitivity sweep")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", default=None)
    p.add_argument("--fractions", default="0.2,0.4,0.6,0.8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)
    _add_extraction_args(p)
    _add_svr_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic benchmark corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--groups", type=int, default=5)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (OSError, ValueError, Nss3dqaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
