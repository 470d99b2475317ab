"""Command-line entry point: ``encoder-di <subcommand> [flags]``.

Exit codes: 0 on success (whatever the verdict), 2 for bad flags or
inconsistent inputs, 3 for I/O failures. Reports are JSON with three keys:
``manifest`` (subcommand, resolved parameters digest, inputs, seed, version),
the subcommand's result, and ``timing``, which holds the only fields that
may differ between identical runs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from . import __version__
from .entropy import kl_entropy, kl_joint_entropy, mi_score, prepare_for_mi
from .errors import EncoderDIError, IoFailure
from .gmm import GmmFitConfig
from .inference import run_dataset_inference
from .obfuscate import KINDS, PAD_MODES, ObfuscationSpec, apply_obfuscation
from .repio import read_representations, write_representations
from .similarity import pair_histogram, similarity_report, write_histogram_csv
from .synth import MAP_KINDS, SyntheticWorldConfig, generate_world

log = logging.getLogger("encoder_di")

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3


class UsageError(Exception):
    """A flag value that parses but is out of range."""


def _file_digest(path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def _manifest(subcommand: str, params: dict, inputs: list, seed) -> dict:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return {
        "subcommand": subcommand,
        "config_digest": hashlib.sha256(canonical.encode()).hexdigest(),
        "params": params,
        "inputs": [{"path": str(p), "sha256": _file_digest(p)} for p in inputs],
        "seed": seed,
        "version": __version__,
    }


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {out}: {exc.strerror or exc}") from exc


def _finite(x: float) -> float | None:
    # JSON has no infinities; degenerate statistics are reported as null
    return float(x) if np.isfinite(x) else None


def _blas_threads(requested: int) -> int:
    # OpenBLAS crashes when raised above the pool size it was loaded with, so only ever lower it
    loaded = [lib["num_threads"] for lib in threadpool_info() if lib.get("user_api") == "blas"]
    return min([requested, *loaded])


# ----------------------------------------------------------------- subcommands


def cmd_synth_gen(args) -> dict:
    if not 0 < args.rho <= 1:
        raise UsageError("--rho must lie in (0, 1]")
    if args.steal_noise < 0:
        raise UsageError("--steal-noise must be >= 0")
    for flag in ("dim", "clusters"):
        if getattr(args, flag) < 1:
            raise UsageError(f"--{flag} must be >= 1")
    for flag in ("n_p1", "n_p2", "n_n"):
        if getattr(args, flag) < 2:
            raise UsageError(f"--{flag.replace('_', '-')} must be >= 2")
    config = SyntheticWorldConfig(dim=args.dim, n_clusters=args.clusters, n_p1=args.n_p1, n_p2=args.n_p2,
                                  n_n=args.n_n, gap_rho=args.rho, steal_noise=args.steal_noise,
                                  steal_map=args.steal_map, seed=args.seed)
    world = generate_world(config)
    written = world.save(args.out)
    params = {f: getattr(config, f) for f in config.__dataclass_fields__}
    return {
        "manifest": _manifest("synth-gen", params, [], args.seed),
        "world": {"directory": str(args.out),
                  "files": [{"file": p.name, "sha256": _file_digest(p)} for p in written]},
    }


def cmd_infer(args) -> dict:
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.k is not None and args.k < 1:
        raise UsageError("--k must be >= 1")
    p1, p2, n = (read_representations(p) for p in (args.p1, args.p2, args.n))
    cov = {"diag": "diagonal", "full": "full", None: None}[args.cov]
    config = GmmFitConfig.for_dim(p2.dim, k=args.k, covariance_kind=cov, seed=args.seed,
                                  max_iters=args.max_iters, n_init=args.n_init)
    label = args.label if args.label is not None else p2.encoder_label
    verdict = run_dataset_inference(p1, p2, n, config, args.alpha, standardize=args.standardize,
                                    normalize=not args.no_normalize, label=label)
    params = {"alpha": args.alpha, "k": config.k, "covariance_kind": config.covariance_kind,
              "max_iters": config.max_iters, "rel_tol": config.rel_tol, "reg_floor": config.reg_floor,
              "n_init": config.n_init, "standardize": args.standardize,
              "normalize": not args.no_normalize, "label": label}
    body = verdict.to_dict()
    body["t"] = _finite(body["t"])
    return {"manifest": _manifest("infer", params, [args.p1, args.p2, args.n], args.seed),
            "verdict": body}


def cmd_similarity(args) -> dict:
    if args.hist_bins < 1:
        raise UsageError("--hist-bins must be >= 1")
    a, b = read_representations(args.a), read_representations(args.b)
    report = similarity_report(a, b, raw=args.raw)
    body = report.to_dict()
    if args.hist_out:
        edges, counts = pair_histogram(np.abs(report.per_pair_cosine), args.hist_bins, (0.0, 1.0))
        write_histogram_csv(edges, counts, args.hist_out)
        body["histogram"] = {"path": str(args.hist_out), "n_bins": args.hist_bins}
    params = {"raw": args.raw, "hist_bins": args.hist_bins}
    return {"manifest": _manifest("similarity", params, [args.a, args.b], None), "similarity": body}


def _entropy_dict(est) -> dict:
    return {"value": est.value, "n_points": est.n_points, "dim": est.dim, "n_clamped": est.n_clamped}


def cmd_entropy(args) -> dict:
    if args.baseline and not args.b:
        raise UsageError("--baseline needs --b")
    paths = [p for p in (args.a, args.b, args.baseline) if p]
    sets = [read_representations(p) for p in paths]
    prep = (lambda r: r.data) if args.raw else prepare_for_mi
    threads = args.threads
    body = {}
    if args.baseline:
        score = mi_score(sets[0], sets[1], sets[2], raw=args.raw, threads=threads)
        body["mi_score"] = {"i_raw": score.i_raw, "i_min": score.i_min, "i_max": score.i_max, "s": score.s}
    else:
        arrays = [prep(s) for s in sets]
        body["entropy_a"] = _entropy_dict(kl_entropy(arrays[0], threads))
        if len(arrays) > 1:
            h_b = kl_entropy(arrays[1], threads)
            h_ab = kl_joint_entropy(arrays[0], arrays[1], threads)
            body["entropy_b"] = _entropy_dict(h_b)
            body["joint_entropy"] = _entropy_dict(h_ab)
            body["mutual_information"] = body["entropy_a"]["value"] + h_b.value - h_ab.value
    params = {"raw": args.raw, "mode": "mi_score" if args.baseline else ("mi" if args.b else "entropy")}
    return {"manifest": _manifest("entropy", params, paths, None), "entropy": body}


def cmd_obfuscate(args) -> dict:
    reps = read_representations(args.input)
    if args.kind == "pad" and (args.pad_dim is None or args.pad_dim <= reps.dim):
        raise UsageError(f"--pad-dim must exceed the input dimension ({reps.dim})")
    if args.kind == "transform" and args.scale == 0:
        raise UsageError("--scale must be non-zero")
    spec = ObfuscationSpec(args.kind, args.seed, args.pad_dim or 0, args.pad_mode, args.scale, args.offset)
    out = apply_obfuscation(reps, spec)
    write_representations(out, args.out)
    params = {"kind": spec.kind, "pad_target_dim": spec.pad_target_dim, "pad_mode": spec.pad_mode,
              "scale": spec.scale, "offset": spec.offset}
    return {"manifest": _manifest("obfuscate", params, [args.input], args.seed),
            "obfuscation": {"output": str(args.out), "sha256": _file_digest(args.out),
                            "n_rows": out.n_rows, "dim": out.dim}}


# ---------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="encoder-di", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="cap on worker threads (default: $ENCODER_DI_THREADS or 1)")
    common.add_argument("--format", choices=["json"], default="json")
    common.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth-gen", parents=[common], help="write a synthetic encoder world")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--rho", type=float, default=0.9, help="membership gap factor in (0, 1]")
    p.add_argument("--steal-noise", type=float, default=0.1)
    p.add_argument("--steal-map", choices=MAP_KINDS, default="orthogonal")
    p.add_argument("--n-p1", type=int, default=2000)
    p.add_argument("--n-p2", type=int, default=2000)
    p.add_argument("--n-n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--report", default=None, help="report path (default: stdout)")
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("infer", parents=[common], help="dataset inference on one suspect")
    p.add_argument("--p1", required=True, help="suspect representations of private split P1")
    p.add_argument("--p2", required=True, help="suspect representations of private split P2")
    p.add_argument("--n", required=True, help="suspect representations of held-out data")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--cov", choices=["diag", "full"], default=None)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--n-init", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--label", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("similarity", parents=[common], help="cosine / l2 / lp similarity scores")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--raw", action="store_true", help="skip row centering and normalization")
    p.add_argument("--hist-bins", type=int, default=20)
    p.add_argument("--hist-out", default=None, help="CSV path for the |cosine| histogram")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("entropy", parents=[common], help="entropy, mutual information, MI score")
    p.add_argument("--a", required=True)
    p.add_argument("--b", default=None)
    p.add_argument("--baseline", default=None, help="random-encoder representations for the MI score")
    p.add_argument("--raw", action="store_true", help="skip column pruning, centering and normalization")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("obfuscate", parents=[common], help="shuffle / pad / transform representations")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pad-dim", type=int, default=None)
    p.add_argument("--pad-mode", choices=PAD_MODES, default="append")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output REPR path")
    p.add_argument("--report", default=None, help="report path (default: stdout)")
    p.set_defaults(func=cmd_obfuscate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads
    if threads is None:
        try:
            threads = int(os.environ.get("ENCODER_DI_THREADS", "1"))
        except ValueError:
            parser.error("ENCODER_DI_THREADS must be an integer")
    if threads < 1:
        parser.error("--threads must be >= 1")
    args.threads = threads

    start = time.perf_counter()
    try:
        with threadpool_limits(limits=_blas_threads(threads), user_api="blas"):
            report = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except IoFailure as exc:
        print(f"encoder-di: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EncoderDIError as exc:
        print(f"encoder-di: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report["timing"] = {"wall_seconds": time.perf_counter() - start, "threads": threads}
    out = args.report if args.subcommand in ("synth-gen", "obfuscate") else args.out
    try:
        _emit(report, out)
    except IoFailure as exc:
        print(f"encoder-di: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
