"""Command-line front end: gen / prune / eval / compare.

Machine-readable JSON goes to stdout (and, where applicable, to files under
--out); human-oriented progress lines go to stderr. Exit codes: 0 success,
2 usage problems, 3 file/format problems, 4 numerical failures. On any
failure a single JSON line {"error": kind, "message": ...} is printed to
stderr.

Reports are byte-reproducible for a fixed seed: timing fields are written
as 0.0 unless --timing is passed, keys are sorted, and the numerical core
pins BLAS thread pools, so reruns (even under different OPENBLAS/OMP
thread-count environments) produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import pipeline
from .errors import (
    CompressionError,
    DegenerateInputError,
    FactorizationError,
    FormatError,
    SingularMatrixError,
    UnsupportedError,
    ValidationError,
    WriteError,
)
from .pipeline import SkipPolicy, parse_pattern
from .solver import DEFAULT_DAMP_FRAC, DEFAULT_LAZY_BLOCK, DEFAULT_MASK_BLOCK, PruneConfig
from .tensor_io import load_manifest, read_tensor

_NUMERICAL = (DegenerateInputError, SingularMatrixError, FactorizationError)


class _Parser(argparse.ArgumentParser):
    """argparse with machine-parsable usage failures (single JSON line)."""

    def error(self, message):
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(2)


def _emit(report: dict, out_file: str | None) -> None:
    text = json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
    sys.stdout.write(text)
    if out_file:
        with open(out_file, "w", encoding="utf-8") as fh:
            fh.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _add_prune_flags(p, require_mode: bool) -> None:
    p.add_argument("--sparsity", type=float, default=None, help="unstructured sparsity in [0,1)")
    p.add_argument("--pattern", default=None, help="semi-structured pattern, e.g. 2:4")
    p.add_argument("--blocksize", type=int, default=None, help=f"lazy update block (default {DEFAULT_LAZY_BLOCK})")
    p.add_argument("--mask-block", type=int, default=None, help=f"mask selection block (default {DEFAULT_MASK_BLOCK})")
    p.add_argument("--damp", type=float, default=DEFAULT_DAMP_FRAC, help="dampening fraction of the mean Hessian diagonal")
    p.add_argument("--bits", type=int, default=None, help="fuse quantization to this many bits (2-8)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip", default=None, help="comma-separated layer names to leave dense")
    p.add_argument("--skip-fraction", default=None, help="front|middle|back:<fraction> of linear layers to leave dense")
    p.add_argument("--calib", default=None, help="override the manifest's calibration tensor")
    p.add_argument("--out", default=None)
    p.set_defaults(_require_mode=require_mode)


def _build_config(parser, args, default_sparsity=None) -> PruneConfig:
    if args.sparsity is not None and args.pattern is not None:
        parser.error("--sparsity and --pattern are mutually exclusive")
    sparsity = args.sparsity
    pattern = None
    if args.pattern is not None:
        if args.mask_block is not None:
            parser.error("--mask-block cannot be combined with --pattern (it is fixed to m)")
        try:
            pattern = parse_pattern(args.pattern)
        except ValidationError as exc:
            parser.error(str(exc))
    if sparsity is None and pattern is None:
        if args._require_mode:
            parser.error("one of --sparsity or --pattern is required")
        sparsity = default_sparsity
    cfg = PruneConfig(
        sparsity=sparsity,
        pattern=pattern,
        lazy_block=args.blocksize if args.blocksize is not None else DEFAULT_LAZY_BLOCK,
        mask_block=args.mask_block if args.mask_block is not None else DEFAULT_MASK_BLOCK,
        damp_frac=args.damp,
        quant_bits=args.bits,
        seed=args.seed,
    )
    try:
        cfg.validate()
    except ValidationError as exc:
        parser.error(str(exc))
    return cfg


def _build_skip_policy(parser, args) -> SkipPolicy | None:
    names = tuple(n for n in (args.skip or "").split(",") if n)
    fraction = None
    if args.skip_fraction:
        head, sep, tail = args.skip_fraction.partition(":")
        if not sep:
            parser.error("--skip-fraction must look like front|middle|back:<fraction>")
        try:
            fraction = (head, float(tail))
        except ValueError:
            parser.error(f"bad skip fraction {tail!r}")
        if head not in ("front", "middle", "back") or not (0.0 <= fraction[1] <= 1.0):
            parser.error("--skip-fraction must look like front|middle|back:<fraction in [0,1]>")
    if not names and fraction is None:
        return None
    return SkipPolicy(names=names, fraction=fraction)


def _load_model(args):
    manifest = load_manifest(args.model)
    if getattr(args, "calib", None):
        manifest = replace(manifest, calibration=os.path.abspath(args.calib))
    return manifest


def _cmd_gen(parser, args) -> int:
    dims = [int(x) for x in args.dims.split(",") if x]
    if len(dims) < 2:
        parser.error("--dims needs at least two comma-separated sizes")
    path, manifest = pipeline.gen_synthetic(
        dims,
        args.out,
        nonlinearity=args.nonlinearity,
        n_samples=args.samples,
        mixing=not args.no_mixing,
        seed=args.seed,
    )
    report = {
        "manifest": path,
        "layers": [l.name for l in manifest.layers],
        "config": {
            "dims": dims,
            "nonlinearity": args.nonlinearity,
            "n_samples": args.samples if args.samples is not None else 8 * dims[0],
            "mixing": not args.no_mixing,
            "seed": args.seed,
        },
    }
    _say(f"wrote synthetic model ({'x'.join(map(str, dims))}) to {args.out}")
    _emit(report, None)
    return 0


def _cmd_prune(parser, args) -> int:
    cfg = _build_config(parser, args)
    policy = _build_skip_policy(parser, args)
    manifest = _load_model(args)
    out_dir = args.out or os.path.join(os.path.dirname(os.path.abspath(args.model)), "pruned")
    _, _, report = pipeline.run_sequential(
        manifest,
        cfg,
        skip_policy=policy,
        out_dir=out_dir,
        use_dense_activations=args.dense_activations,
        oracle_ratio=args.oracle_ratio,
        force_oracle=args.force_oracle,
        timing=args.timing,
    )
    for row in report["layers"]:
        _say(
            f"{row['name']}: mode={row['mode']} sparsity={row['sparsity']:.4f} "
            f"layer_error={row['layer_error']:.6g}"
        )
    _say(f"model relative error {report['model']['relative_error']:.6g}; wrote {out_dir}")
    _emit(report, os.path.join(out_dir, "report.json"))
    return 0


def _cmd_eval(parser, args) -> int:
    manifest = _load_model(args)
    pruned = load_manifest(args.pruned)
    compressed = pipeline.load_weights(pruned)
    if args.eval_data:
        X_eval = read_tensor(args.eval_data)
    else:
        X_eval = pipeline.eval_inputs(manifest, PruneConfig(sparsity=0.0, seed=args.seed))
    metrics = pipeline.evaluate_model(manifest, compressed, X_eval)
    report = {
        "model": metrics,
        "config": {
            "model": os.path.abspath(args.model),
            "pruned": os.path.abspath(args.pruned),
            "eval_data": os.path.abspath(args.eval_data) if args.eval_data else None,
            "seed": args.seed,
        },
    }
    _say(f"mse {metrics['mse']:.6g}, relative error {metrics['relative_error']:.6g}")
    _emit(report, args.out)
    return 0


def _cmd_compare(parser, args) -> int:
    cfg = _build_config(parser, args, default_sparsity=0.5)
    policy = _build_skip_policy(parser, args)
    manifest = _load_model(args)
    report = pipeline.compare_methods(manifest, cfg, bits=args.bits, skip_policy=policy)
    for arm, data in sorted(report["arms"].items()):
        _say(f"{arm}: relative error {data['model']['relative_error']:.6g}")
    _emit(report, args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="obsprune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic model bundle")
    g.add_argument("--dims", required=True, help="comma-separated layer widths, e.g. 8,16,16,8")
    g.add_argument("--nonlinearity", default="relu", choices=("relu", "gelu", "identity"))
    g.add_argument("--samples", type=int, default=None, help="calibration samples (default 8x input dim)")
    g.add_argument("--no-mixing", action="store_true", help="skip the correlating mixer")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    p = sub.add_parser("prune", help="compress a model sequentially")
    p.add_argument("--model", required=True, help="manifest JSON path")
    _add_prune_flags(p, require_mode=True)
    p.add_argument("--oracle-ratio", action="store_true", help="report exact-reconstruction ratios (small layers)")
    p.add_argument("--force-oracle", action="store_true", help="lift the oracle size guard")
    p.add_argument("--dense-activations", action="store_true", help="build Hessians from dense activations (ablation)")
    p.add_argument("--timing", action="store_true", help="include wall-clock timings (breaks byte-reproducibility)")
    p.set_defaults(func=_cmd_prune)

    e = sub.add_parser("eval", help="evaluate a compressed model against its dense reference")
    e.add_argument("--model", required=True, help="dense manifest JSON path")
    e.add_argument("--pruned", required=True, help="compressed manifest JSON path")
    e.add_argument("--eval-data", default=None, help="NPY tensor of held-out inputs")
    e.add_argument("--calib", default=None, help=argparse.SUPPRESS)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=_cmd_eval)

    c = sub.add_parser("compare", help="solver vs magnitude vs RTN vs solver+quant")
    c.add_argument("--model", required=True)
    _add_prune_flags(c, require_mode=False)
    c.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except _NUMERICAL as exc:
        print(json.dumps({"error": "numerical", "message": str(exc)}), file=sys.stderr)
        return 4
    except (FormatError, UnsupportedError, ValidationError, WriteError) as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 3
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 3
    except CompressionError as exc:
        print(json.dumps({"error": "error", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
