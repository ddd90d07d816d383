"""Command-line interface.

Exit codes: 0 success, 2 unreadable/invalid input or config, 3 degenerate
registration (too few frames after downsampling, zero lumen area, or no
anchors under ``--strict``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import EngineConfig
from .errors import (
    CoregError,
    DegenerateVessel,
    InvalidConfig,
    LengthMismatch,
    NoAnchors,
    PullbackError,
    TooFewFrames,
)
from .metrics import compare, three_way
from .pipeline import load_result, register
from .pullback import Modality, parse_pullback, write_pullback
from .synth import SynthConfig, generate_pair, ground_truth_json

log = logging.getLogger("coreg")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3


def write_csv(path, matrix) -> None:
    """Row-major CSV, 9 significant digits."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(f"{v:.9g}" for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_config(path):
    return EngineConfig.load(path) if path else EngineConfig()


def _register_one(ivus_file, oct_file, cfg, out, strict=False, timing=False,
                  dump_d=None, dump_c=None, dump_r=None) -> int:
    try:
        ivus = parse_pullback(ivus_file, Modality.IVUS)
        oct = parse_pullback(oct_file, Modality.OCT)
    except (CoregError, OSError, ValueError) as e:
        log.error("%s", e)
        return EXIT_INPUT
    try:
        result = register(ivus, oct, cfg, strict=strict)
    except (NoAnchors, TooFewFrames, DegenerateVessel) as e:
        log.error("degenerate registration: %s", e)
        return EXIT_DEGENERATE
    except PullbackError as e:
        log.error("%s", e)
        return EXIT_INPUT

    log.info("registered %s / %s in %.1f ms", ivus_file, oct_file, result.wall_clock_ms)
    d = result.to_dict()
    if timing:
        d["wall_clock_ms"] = result.wall_clock_ms
    Path(out).write_text(json.dumps(d, indent=1) + "\n", encoding="utf-8")
    if dump_d:
        write_csv(dump_d, result.D)
    if dump_c:
        write_csv(dump_c, result.C)
    if dump_r:
        write_csv(dump_r, result.R.values if result.R is not None else np.zeros((0, 180)))
    return EXIT_OK


def cmd_register(args) -> int:
    try:
        cfg = _load_config(args.config)
    except InvalidConfig as e:
        log.error("%s", e)
        return EXIT_INPUT
    return _register_one(args.ivus, args.oct, cfg, args.out, args.strict, args.timing,
                         args.dump_d, args.dump_c, args.dump_r)


def _batch_job(job):
    return _register_one(*job)


def cmd_batch(args) -> int:
    try:
        cfg = _load_config(args.config)
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        jobs = [(m["ivus"], m["oct"], cfg, m["out"], args.strict, False) for m in manifest]
    except (InvalidConfig, OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        log.error("bad batch manifest or config: %s", e)
        return EXIT_INPUT
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_batch_job, jobs))
    else:
        codes = [_batch_job(j) for j in jobs]
    return max(codes, default=EXIT_OK)


def cmd_simulate(args) -> int:
    try:
        cfg = SynthConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        ivus, oct, truth = generate_pair(cfg)
    except InvalidConfig as e:
        log.error("invalid simulation config: %s", e)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pullback(ivus, out / "ivus.ndjson")
    write_pullback(oct, out / "oct.ndjson")
    (out / "ground_truth.json").write_text(ground_truth_json(truth), encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        results = [load_result(p) for p in args.results]
        if len(results) == 2:
            report = {"a_vs_b": compare(*results).to_dict()}
        else:
            cfg = _load_config(args.config)
            seed = cfg.bootstrap_seed if args.seed is None else args.seed
            report = three_way(*results, resamples=cfg.bootstrap_resamples, seed=seed)
    except (OSError, ValueError, LengthMismatch, InvalidConfig) as e:
        log.error("cannot evaluate: %s", e)
        return EXIT_INPUT
    text = json.dumps(report, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dump_matrices(args) -> int:
    if not (args.dump_d or args.dump_c or args.dump_r):
        log.error("nothing to dump: pass --dump-d, --dump-c and/or --dump-r")
        return EXIT_INPUT
    try:
        cfg = _load_config(args.config)
        ivus = parse_pullback(args.ivus, Modality.IVUS)
        oct = parse_pullback(args.oct, Modality.OCT)
    except (CoregError, OSError, ValueError) as e:
        log.error("%s", e)
        return EXIT_INPUT
    try:
        result = register(ivus, oct, cfg, strict=args.strict)
    except (NoAnchors, TooFewFrames, DegenerateVessel) as e:
        log.error("degenerate registration: %s", e)
        return EXIT_DEGENERATE
    if args.dump_d:
        write_csv(args.dump_d, result.D)
    if args.dump_c:
        write_csv(args.dump_c, result.C)
    if args.dump_r:
        write_csv(args.dump_r, result.R.values if result.R is not None else np.zeros((0, 180)))
    return EXIT_OK


def _add_dumps(p):
    p.add_argument("--dump-d", metavar="CSV", help="write the DTW distance matrix")
    p.add_argument("--dump-c", metavar="CSV", help="write the DTW cumulative cost matrix")
    p.add_argument("--dump-r", metavar="CSV", help="write the rotation cost matrix")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coreg", description="IVUS/OCT pullback co-registration")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="register one IVUS/OCT pair")
    p.add_argument("ivus")
    p.add_argument("oct")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="fail with exit 3 when no anchors are found")
    p.add_argument("--timing", action="store_true", help="add wall_clock_ms to the result file")
    _add_dumps(p)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("batch", help="register the pairs listed in a JSON manifest")
    p.add_argument("manifest", help='JSON list of {"ivus": ..., "oct": ..., "out": ...}')
    p.add_argument("--config")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("simulate", help="generate a synthetic pair with ground truth")
    p.add_argument("config", help="synthetic vessel config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="agreement between two or three results")
    p.add_argument("results", nargs="+", help="result or ground-truth files; with three, the first is the model")
    p.add_argument("--out")
    p.add_argument("--config", help="engine config supplying bootstrap settings")
    p.add_argument("--seed", type=int, help="bootstrap seed")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dump-matrices", help="write D, C and R as CSV")
    p.add_argument("ivus")
    p.add_argument("oct")
    p.add_argument("--config")
    p.add_argument("--strict", action="store_true")
    _add_dumps(p)
    p.set_defaults(func=cmd_dump_matrices)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "evaluate" and len(args.results) not in (2, 3):
        parser.error("evaluate takes two or three result files")
    return args.func(args)
