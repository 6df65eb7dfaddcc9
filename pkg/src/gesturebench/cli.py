"""Command-line surface: synth, normalize, classify, evaluate, bench and
kernel-bench subcommands.

Diagnostics go to stderr; data goes to files or stdout. Exit code 0 means
zero hard errors, 1 means at least one, 2 is a usage error.
"""

import argparse
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from . import classify as classify_mod
from . import dataset as dataset_mod
from . import kernels, masks, synth
from .errors import GestureBenchError
from .matching import CombineWeights
from .params import ConfigError, Params, load_config


def _fail(message):
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_params(args):
    if getattr(args, "config", None):
        return load_config(args.config)
    return Params()


def _weights(params):
    return CombineWeights(alpha=params.alpha, beta=params.beta)


def _default_threads():
    env = os.environ.get("GESTUREBENCH_THREADS", "").strip()
    if env:
        try:
            value = int(env)
            if value >= 1:
                return value
        except ValueError:
            pass
        print(f"warning: ignoring bad GESTUREBENCH_THREADS={env!r}",
              file=sys.stderr)
    return 1


def _parse_methods(text):
    return [classify_mod.parse_method(tok) for tok in text.split(",") if tok]


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args):
    cfg = synth.SynthConfig(classes=args.classes, per_class=args.per_class,
                            seed=args.seed,
                            jitter_rotation_deg=args.jitter_rotation,
                            jitter_scale=args.jitter_scale,
                            boundary_noise=args.noise)
    manifest = synth.generate(cfg, args.out)
    print(f"wrote {cfg.classes * cfg.per_class} masks, manifest {manifest}",
          file=sys.stderr)
    return 0


def cmd_normalize(args):
    params = _load_params(args)
    in_dir = Path(args.in_dir)
    paths = sorted(in_dir.glob("*.pgm"))
    if not paths:
        return _fail(f"no inputs: no .pgm files in {in_dir}")
    try:
        wrists = masks.load_wrist_annotations(args.wrist_csv)
    except (GestureBenchError, OSError) as exc:
        return _fail(str(exc))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = masks.NormalizationConfig(target_width=params.target_width)

    failures = []
    log_rows = []
    processed = {}
    for path in paths:
        image_id = path.stem
        try:
            if image_id not in wrists:
                raise GestureBenchError(f"{image_id}: no wrist annotation")
            mask = masks.load_mask(path)
            norm = masks.normalize(mask, wrists[image_id], cfg,
                                   source_id=image_id)
            out_path = out_dir / f"{image_id}.pgm"
            masks.save_mask(norm, out_path)
            processed[image_id] = out_path
            log_rows.append((image_id, norm.rotation_applied,
                             norm.scale_applied))
        except (GestureBenchError, OSError) as exc:
            failures.append(f"{path.name}: {exc}")

    with open(out_dir / "normalize_log.csv", "w", encoding="utf-8") as fh:
        fh.write("id,rotation_applied,scale_applied\n")
        for image_id, rot, scale in log_rows:
            fh.write(f"{image_id},{rot:.6f},{scale:.6f}\n")

    if args.manifest:
        rows = []
        for image_id, label, _ in dataset_mod.read_manifest(args.manifest):
            if image_id in processed:
                rows.append((image_id, label, processed[image_id].name))
        dataset_mod.write_manifest(rows, out_dir / "manifest.csv")

    print(f"normalized {len(log_rows)}/{len(paths)} masks into {out_dir}",
          file=sys.stderr)
    for line in failures:
        print(f"failed: {line}", file=sys.stderr)
    return 1 if failures else 0


def cmd_classify(args):
    params = _load_params(args)
    method = classify_mod.parse_method(args.method)
    features = classify_mod.bundle_features_for([method])
    gallery_items = dataset_mod.bundle_dataset(
        dataset_mod.load_normalized(args.gallery, params), params,
        threads=args.threads, features=features)
    gallery = classify_mod.Gallery.build(
        [(it.label, it.bundle) for it in gallery_items])
    probes = dataset_mod.bundle_dataset(
        dataset_mod.load_normalized(args.probes, params), params,
        threads=args.threads, features=features, partial=True)
    results = classify_mod.classify_batch(probes, gallery, method,
                                          threads=args.threads,
                                          weights=_weights(params))
    classify_mod.write_results_csv(results, args.out)
    errors = [r for r in results if isinstance(r, classify_mod.ProbeError)]
    ok = len(results) - len(errors)
    print(f"classified {ok}/{len(results)} probes -> {args.out}",
          file=sys.stderr)
    for err in errors:
        print(f"failed: {err.probe_id}: {err.error}", file=sys.stderr)
    return 1 if errors else 0


def cmd_evaluate(args):
    params = _load_params(args)
    methods = _parse_methods(args.methods)
    features = classify_mod.bundle_features_for(methods)
    data = dataset_mod.bundle_dataset(
        dataset_mod.load_normalized(args.manifest, params), params,
        threads=args.threads, features=features)
    reports = []
    for method in methods:
        reports.append(classify_mod.evaluate(
            data, method, g=args.g, repeats=args.repeats, seed=args.seed,
            threads=args.threads, weights=_weights(params)))
    classify_mod.write_crc_csv(reports, args.out)

    # rank 1..4 summary, one method per row
    top = min(4, len(reports[0].cr_mean))
    header = "method  " + "  ".join(f"rank{r} CR+-sigma" for r in range(1, top + 1))
    print(header)
    for rep in reports:
        cells = "  ".join(
            f"{rep.cr_mean[r]:6.2f} +- {rep.cr_sigma[r]:5.2f}"
            for r in range(top))
        print(f"{rep.method.value:>6}  {cells}")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_bench(args):
    params = _load_params(args)
    methods = _parse_methods(args.methods)
    threads_list = [int(t) for t in args.threads_list.split(",") if t]
    data = dataset_mod.load_normalized(args.manifest, params)
    records = bench_mod.run_bench(data, methods, g=args.g,
                                  threads_list=threads_list,
                                  repetitions=args.repetitions,
                                  seed=args.seed, params=params,
                                  weights=_weights(params),
                                  jsonl_path=args.jsonl)
    bench_mod.emit_bench_table(records, args.out)
    for r in sorted(records, key=lambda r: (r.g, r.method.value, r.threads)):
        flag = " superlinear" if bench_mod.superlinear_flag(r) else ""
        print(f"{r.method.value:>6} g={r.g} T={r.threads}: "
              f"tau={r.tau:.3f}s S={r.speedup:.2f} E={r.efficiency:.2f}{flag}",
              file=sys.stderr)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_kernel_bench(args):
    rows = bench_mod.kernel_bench(repeats=args.repeats)
    if args.out:
        bench_mod.write_kernel_bench_csv(rows, args.out)
    print(f"active backend: {kernels.BACKEND}")
    for row in rows:
        print(f"{row['kernel']:>18} {row['backend']:>9}: "
              f"{row['seconds_per_call'] * 1e6:10.1f} us/call "
              f"({row['speedup_vs_python']:.1f}x vs python)")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="gesturebench",
        description="Hand-shape classification engine and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic hand dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=15)
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--jitter-rotation", type=float, default=6.0,
                   help="instance rotation jitter, +- degrees")
    p.add_argument("--jitter-scale", type=float, default=0.05,
                   help="instance scale jitter, +- fraction")
    p.add_argument("--noise", type=float, default=0.04,
                   help="shape noise amplitude (wobble, finger jitter)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("normalize", help="normalize raw masks")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--wrist-csv", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest", help="input manifest; rewritten for the "
                                      "normalized files")
    p.add_argument("--config", help="key=value parameter overrides")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("classify", help="classify probes against a gallery")
    p.add_argument("--gallery", required=True, help="gallery manifest")
    p.add_argument("--probes", required=True, help="probe manifest")
    p.add_argument("--method", required=True,
                   choices=[m.value for m in classify_mod.Method])
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--config")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="gallery/probe CRC evaluation")
    p.add_argument("--manifest", required=True, help="normalized manifest")
    p.add_argument("--methods", default="scdt",
                   help="comma-separated method ids")
    p.add_argument("--g", type=int, default=1, help="gallery images per class")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", required=True, help="CRC CSV path")
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="speedup/efficiency benchmark")
    p.add_argument("--manifest", required=True, help="normalized manifest")
    p.add_argument("--methods", default="scdt")
    p.add_argument("--g", type=int, default=3)
    p.add_argument("--threads-list", default="1,2",
                   help="comma-separated thread counts; must include 1")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="bench CSV path")
    p.add_argument("--jsonl", help="optional per-run JSONL audit log")
    p.add_argument("--config")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("kernel-bench",
                       help="compare compiled vs pure-Python kernels")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--out", help="optional CSV path")
    p.set_defaults(func=cmd_kernel_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.exit(2, f"error: {exc}\n")
    except (GestureBenchError, OSError, ValueError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
