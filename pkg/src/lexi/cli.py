"""``lexi`` command-line entry point.

Exit status: 0 on success, 1 for usage errors (bad flags, unreadable paths),
2 for data errors (corrupt or malformed input).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bf16 import read_bf16, split_array, write_bf16
from .codebook import EncoderConfig, build_layer_codebook, run_histogram
from .codec import encode_layer
from .container import compress_weights_file, decompress_weights_file
from .estimators import CODECS, ExponentProfiler, LexiCodec
from .exceptions import LexiError
from .synth import DISTRIBUTIONS, generate_bf16
from .timing import MODES, LinkModel, codebook_latency, load_trace, simulate_trace

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return vals


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    return p


def _emit(obj, report: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False)
    if report:
        Path(report).write_text(text + "\n")
    else:
        print(text)


def _encoder_config(args) -> EncoderConfig:
    return EncoderConfig(lanes=args.lanes, cache_depth=args.depth, sample_size=args.sample)


def cmd_profile(args):
    src = _input(args.input)
    prof = ExponentProfiler().fit(read_bf16(src))
    out = prof.report_.to_dict()
    out["exponent_histogram"] = prof.exponent_histogram_.tolist()
    out["config"] = {"command": "profile", "input": str(src)}
    _emit(out, args.report)


def cmd_compress(args):
    src = _input(args.input)
    stats = compress_weights_file(src, args.output)
    stats["config"] = {"command": "compress", "input": str(src), "output": args.output}
    _emit(stats, args.report)


def cmd_decompress(args):
    src = _input(args.input)
    n = decompress_weights_file(src, args.output)
    _emit({"value_count": n, "config": {"command": "decompress", "input": str(src), "output": args.output}},
          args.report)


def cmd_encode_stream(args):
    src = _input(args.input)
    cfg = _encoder_config(args)
    words = read_bf16(src)
    if words.size == 0:
        raise LexiError("input stream is empty")
    built = build_layer_codebook(split_array(words)[1], cfg, layer_id=src.stem)
    enc = encode_layer(words, built.codebook)
    flit_path = args.flits or str(src.with_suffix(".flits"))
    Path(flit_path).write_bytes(enc.to_bytes())
    stats = dict(enc.stats)
    stats["cycles"] = built.cycles.to_dict()
    stats["codebook"] = {f"{e:#04x}": cw.bits() for e, cw in sorted(built.codebook.entries.items())}
    stats["escape"] = built.codebook.escape.bits()
    stats["flit_dump"] = flit_path
    stats["config"] = {"command": "encode-stream", "input": str(src), "lanes": cfg.lanes,
                       "depth": cfg.cache_depth, "sample": cfg.sample_size}
    _emit(stats, args.report)


def cmd_bench(args):
    src = _input(args.input)
    words = read_bf16(src)
    if words.size == 0:
        raise LexiError("input stream is empty")
    if args.codec == "lexi":
        codec = LexiCodec(offline=True).fit(words)
        blob = codec.container_bytes(words)
        r = codec.compression_ratios(words)
        r["total_cr"] = 2 * words.size / len(blob)
        r["bytes_out"] = len(blob)
    else:
        r = CODECS[args.codec]().fit(words).compression_ratios(words)
    _emit({
        "codec": args.codec,
        "exponentCR": r["exponent_cr"],
        "totalCR": r["total_cr"],
        "bytesIn": r["bytes_in"],
        "bytesOut": r["bytes_out"],
        "config": {"command": "bench", "input": str(src)},
    }, args.report)


def sweep_rows(exponents, lanes, depths, sample_size=None):
    ex = np.asarray(exponents).ravel()
    if sample_size:
        ex = ex[:sample_size]
    rows = []
    for m in lanes:
        for d in depths:
            cfg = EncoderConfig(lanes=m, cache_depth=d, sample_size=max(1, ex.size))
            h = run_histogram(ex, cfg)
            lat = codebook_latency(cfg, sample=ex)
            rows.append({
                "lanes": m, "depth": d, "hitRate": h.lane_hit_rate,
                "histogramCycles": h.histogram_cycles, "arbiterStallCycles": h.arbiter_stall_cycles,
                "codebookNs": lat["total_ns"], "cacheBytes": m * d,
            })
    return rows


def cmd_sweep(args):
    src = _input(args.input)
    exps = split_array(read_bf16(src))[1]
    if exps.size == 0:
        raise LexiError("input stream is empty")
    rows = sweep_rows(exps, args.lanes, args.depth, args.sample)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_simulate(args):
    trace_path = _input(args.trace)
    trace = load_trace(trace_path)
    cfg = _encoder_config(args)
    rep = simulate_trace(trace, args.mode, exponent_cr=args.cr, link=LinkModel(), cfg=cfg,
                         framing=not args.no_framing)
    out = rep.to_dict()
    out["config"]["command"] = "simulate"
    out["config"]["trace"] = str(trace_path)
    _emit(out, args.report)


def cmd_gen(args):
    kw = {}
    if args.entropy is not None:
        kw["entropy"] = args.entropy
    elif args.param is not None:
        kw["param"] = args.param
    words = generate_bf16(args.distribution, args.distinct, args.count, args.seed, **kw)
    write_bf16(args.output, words)
    _emit({"output": args.output, "count": args.count,
           "config": {"command": "gen", "distribution": args.distribution, "distinct": args.distinct,
                      "seed": args.seed, **kw}}, args.report)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lexi", description="Lossless BF16 exponent coding toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def encoder_flags(sp):
        sp.add_argument("--lanes", type=_positive, default=10, help="parallel histogram lanes (default 10)")
        sp.add_argument("--depth", type=_positive, default=8, help="per-lane cache entries (default 8)")
        sp.add_argument("--sample", type=_positive, default=512, help="values feeding the codebook (default 512)")

    def report_flag(sp):
        sp.add_argument("--report", help="write the JSON report here instead of stdout")

    sp = sub.add_parser("profile", help="per-field entropy and exponent histogram")
    sp.add_argument("input")
    report_flag(sp)
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("compress", help="raw .bf16 -> .lexi container")
    sp.add_argument("input")
    sp.add_argument("output")
    report_flag(sp)
    sp.set_defaults(func=cmd_compress)

    sp = sub.add_parser("decompress", help=".lexi container -> raw .bf16")
    sp.add_argument("input")
    sp.add_argument("output")
    report_flag(sp)
    sp.set_defaults(func=cmd_decompress)

    sp = sub.add_parser("encode-stream", help="encode a stream into 128-bit flits")
    encoder_flags(sp)
    sp.add_argument("--flits", help="flit dump path (default: input with .flits suffix)")
    sp.add_argument("input")
    report_flag(sp)
    sp.set_defaults(func=cmd_encode_stream)

    sp = sub.add_parser("bench", help="compression ratio of one codec")
    sp.add_argument("--codec", choices=sorted(CODECS), default="lexi")
    sp.add_argument("input")
    report_flag(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("sweep", help="lane/depth design-space sweep as CSV")
    sp.add_argument("--lanes", type=_int_list, default=[1, 2, 4, 8, 10, 16, 32])
    sp.add_argument("--depth", type=_int_list, default=[4, 8, 16])
    sp.add_argument("--sample", type=int, default=512, help="leading values to use; 0 for the whole file")
    sp.add_argument("--out", help="CSV path (default stdout)")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("simulate", help="trace-driven link latency")
    sp.add_argument("--mode", choices=MODES, default="lexi")
    sp.add_argument("--trace", required=True, help="CSV: layerId,kind,valueCount,src,dst[,dataFile]")
    sp.add_argument("--cr", type=float, default=None, help="exponent CR for records without a data file")
    sp.add_argument("--no-framing", action="store_true", help="ignore flit headers and packing loss")
    encoder_flags(sp)
    report_flag(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("gen", help="synthetic BF16 generator")
    sp.add_argument("--distribution", choices=DISTRIBUTIONS, default="zipf")
    sp.add_argument("--distinct", type=_positive, default=32)
    sp.add_argument("--count", type=_positive, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--param", type=float, help="Zipf exponent or geometric ratio")
    g.add_argument("--entropy", type=float, help="target exponent entropy in bits (solves for --param)")
    sp.add_argument("output")
    report_flag(sp)
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"lexi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LexiError, ValueError) as exc:
        print(f"lexi: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"lexi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
