"""Command line interface: ``tablekit <command> ...``.

Exit status is 0 on success, 1 when a metric gate, round-trip or self-test
fails, and 2 on bad input.  Errors go to stderr as
``tablekit:error:<kind>: <message>``.  ``TABLEKIT_THREADS`` caps the worker
processes used by ``eval`` and ``roundtrip``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .annotation import AnnotationError, load_annotation, save_annotation
from .decoder import DecodeConfig
from .geometry import GeometryError
from .metrics import STANDARD_IOUS, aggregate, evaluate_image
from .pipeline import decode_maps, roundtrip_seed
from .render import render_svg
from .report import report_to_dict, save_report
from .synthgen import SynthConfig, SynthError, generate_table, random_deformation, suite_config
from .rng import SplitMix64
from .targets import EncodingError, TargetMaps, encode_annotation

logger = logging.getLogger("tablekit")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
ALL_METRICS = ("physical", "adjacency", "teds")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    stride: int = 4
    center_threshold: float = 0.3
    vertex_threshold: float = 0.3
    detection_threshold: float = 0.9
    tau: float | None = None
    ious: tuple = STANDARD_IOUS
    metrics: tuple = ALL_METRICS
    inputs: list = field(default_factory=list)
    output: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.stride not in (1, 2, 4, 8):
            raise InputError(f"stride must be one of 1, 2, 4, 8 (got {self.stride})")
        for name in ("center_threshold", "vertex_threshold"):
            if not 0 < getattr(self, name) < 1:
                raise InputError(f"{name} must lie in (0, 1)")
        if not 0 < self.detection_threshold <= 1:
            raise InputError("detection threshold must lie in (0, 1]")
        if self.tau is not None and self.tau <= 0:
            raise InputError("tau must be > 0")
        if not self.ious or any(not 0 < t <= 1 for t in self.ious):
            raise InputError("IoU thresholds must lie in (0, 1]")
        bad = set(self.metrics) - set(ALL_METRICS)
        if bad:
            raise InputError(f"unknown metrics {sorted(bad)}")

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(self.center_threshold, self.vertex_threshold, tau=self.tau)


def worker_count() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get("TABLEKIT_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InputError(f"TABLEKIT_THREADS must be an integer (got {cap!r})") from None
    return n


def _pmap(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# --------------------------------------------------------------------------
# commands

def cmd_generate(args) -> int:
    if args.fixtures:
        root = Path(args.out)
        for i in range(args.n):
            seed = args.seed + i
            cfg, kind = suite_config(seed, merge_prob=args.merge_prob)
            a = generate_table(cfg)
            case = root / str(args.seed) / f"case{i:04d}-{kind}"
            case.mkdir(parents=True, exist_ok=True)
            save_annotation(a, case / "annotation.json")
            encode_annotation(a, args.stride).save(case / "maps.cctm")
            im = evaluate_image(a, a, name=case.name)
            (case / "expected-report.json").write_text(json.dumps(report_to_dict(aggregate([im])), indent=1) + "\n")
        print(f"wrote {args.n} fixture cases under {root / str(args.seed)}")
        return EXIT_OK

    base = SynthConfig(rows=args.rows, cols=args.cols, merge_prob=args.merge_prob, seed=args.seed)
    if args.deform != "identity":
        d = random_deformation(SplitMix64(args.seed ^ 0xDEF0), generate_table(base), args.deform)
        base = SynthConfig(base.rows, base.cols, base.merge_prob, base.cell_width, base.cell_height,
                           base.margin, d, base.seed)
    a = generate_table(base)
    if args.out:
        save_annotation(a, args.out)
    else:
        from .annotation import dumps_annotation
        print(dumps_annotation(a))
    return EXIT_OK


def cmd_encode(args) -> int:
    cfg = RunConfig(stride=args.stride)
    maps = encode_annotation(load_annotation(args.annotation), cfg.stride)
    maps.save(args.out)
    for d in maps.diagnostics:
        logger.warning(d)
    return EXIT_OK


def cmd_decode(args) -> int:
    cfg = RunConfig(stride=4, center_threshold=args.center_threshold,
                    vertex_threshold=args.vertex_threshold, tau=args.tau)
    try:
        maps = TargetMaps.load(args.maps)
    except (OSError, ValueError) as exc:
        raise InputError(f"{args.maps}: {exc}") from None
    size = (args.width, args.height) if args.width and args.height else None
    decoded = decode_maps(maps, cfg.decode_config(), size)
    for d in decoded.diagnostics:
        logger.warning(d)
    if args.out:
        save_annotation(decoded.annotation, args.out)
    else:
        from .annotation import dumps_annotation
        print(dumps_annotation(decoded.annotation))
    return EXIT_OK


def _pairs(pred: Path, gt: Path):
    if pred.is_dir() != gt.is_dir():
        raise InputError("--pred and --gt must both be files or both be directories")
    if not pred.is_dir():
        return [(gt.name, pred, gt)]
    out = []
    for g in sorted(gt.glob("*.json")):
        p = pred / g.name
        if not p.exists():
            raise InputError(f"no prediction for {g.name} in {pred}")
        out.append((g.name, p, g))
    if not out:
        raise InputError(f"no *.json ground-truth files in {gt}")
    return out


def _eval_one(job):
    name, pred, gt, ious, metrics = job
    return evaluate_image(load_annotation(pred), load_annotation(gt), ious, metrics, name)


def cmd_eval(args) -> int:
    metrics = ALL_METRICS if args.metrics == "all" else tuple(m for m in args.metrics.split(",") if m)
    cfg = RunConfig(ious=args.iou, metrics=metrics)
    jobs = [(n, p, g, cfg.ious, cfg.metrics) for n, p, g in _pairs(Path(args.pred), Path(args.gt))]
    for _, p, g, _, _ in jobs:  # validate inputs up front so errors exit 2
        load_annotation(p)
        load_annotation(g)
    rep = aggregate(_pmap(_eval_one, jobs), cfg.ious)
    doc = report_to_dict(rep)
    if args.out:
        save_report(rep, args.out)
    else:
        print(json.dumps({k: v for k, v in doc.items() if k != "images"}, indent=1))
    if args.fail_below is not None:
        scores = [v["f1"] for block in ("physical", "adjacency") for v in doc[block].values()]
        if rep.teds is not None:
            scores.append(rep.teds)
        if any(s < args.fail_below for s in scores):
            return EXIT_FAIL
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    RunConfig(stride=args.stride)
    seeds = range(args.seed, args.seed + args.n)
    verdicts = _pmap(_roundtrip_job, [(s, args.stride) for s in seeds])
    verdicts.sort(key=lambda v: v.seed)
    n_ok = sum(v.ok for v in verdicts)
    n_teds = sum(all(t == 1.0 for t in v.teds) for v in verdicts)
    if args.verbose:
        print("seed\tkind\tadjF1\tTEDS\tcorner_err\tok")
        for v in verdicts:
            print(f"{v.seed}\t{v.kind}\t{v.adjacency_f1:.4f}\t{min(v.teds, default=1.0):.4f}\t"
                  f"{v.max_corner_error:.4f}\t{'ok' if v.ok else 'FAIL ' + (v.error or '')}")
    worst = max((v.max_corner_error for v in verdicts), default=0.0)
    print(f"roundtrip: {n_ok}/{len(verdicts)} ok, {n_teds}/{len(verdicts)} TEDS=1.0, max corner error {worst:.4f} px")
    return EXIT_OK if n_ok == len(verdicts) else EXIT_FAIL


def _roundtrip_job(job):
    seed, stride = job
    return roundtrip_seed(seed, stride)


def cmd_selftest(args) -> int:
    from .selftest import run_all

    results = run_all(quick=args.quick)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_render(args) -> int:
    svg = render_svg(load_annotation(args.annotation), show_spans=not args.no_spans)
    Path(args.out).write_text(svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tablekit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize annotated tables")
    g.add_argument("--rows", type=int, default=3)
    g.add_argument("--cols", type=int, default=3)
    g.add_argument("--merge-prob", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--deform", choices=("identity", "rotation", "perspective", "curve"), default="identity")
    g.add_argument("--fixtures", action="store_true",
                   help="write a fixture corpus <out>/<seed>/<case>/{annotation.json,maps.cctm,expected-report.json}")
    g.add_argument("--n", type=int, default=10, help="number of fixture cases")
    g.add_argument("--stride", type=int, default=4)
    g.add_argument("-o", "--out")
    g.set_defaults(fn=cmd_generate)

    e = sub.add_parser("encode", help="annotation -> TargetMaps binary")
    e.add_argument("annotation")
    e.add_argument("-o", "--out", required=True)
    e.add_argument("--stride", type=int, default=4)
    e.set_defaults(fn=cmd_encode)

    d = sub.add_parser("decode", help="TargetMaps binary -> predicted annotation")
    d.add_argument("maps")
    d.add_argument("-o", "--out")
    d.add_argument("--center-threshold", type=float, default=0.3)
    d.add_argument("--vertex-threshold", type=float, default=0.3)
    d.add_argument("--tau", type=float, default=None, help="match tolerance in px (default 0.75*stride)")
    d.add_argument("--width", type=int, help="image width to record (default maps width * stride)")
    d.add_argument("--height", type=int)
    d.set_defaults(fn=cmd_decode)

    v = sub.add_parser("eval", help="score predictions against ground truth")
    v.add_argument("--pred", required=True, help="annotation file or directory")
    v.add_argument("--gt", required=True, help="annotation file or directory")
    v.add_argument("--metrics", default="all", help="all or a comma list of physical,adjacency,teds")
    v.add_argument("--iou", type=_floats, default=STANDARD_IOUS, help="IoU grid, e.g. 0.6,0.7,0.8,0.9")
    v.add_argument("--fail-below", type=float, default=None, help="exit 1 if any F1 or TEDS is below this")
    v.add_argument("-o", "--out")
    v.set_defaults(fn=cmd_eval)

    r = sub.add_parser("roundtrip", help="generate/encode/decode/parse synthetic tables and verify")
    r.add_argument("--n", type=int, default=200)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--stride", type=int, default=4)
    r.set_defaults(fn=cmd_roundtrip)

    s = sub.add_parser("selftest", help="gradient checks and oracle suites")
    s.add_argument("--quick", action="store_true")
    s.set_defaults(fn=cmd_selftest)

    w = sub.add_parser("render", help="annotation -> SVG overlay")
    w.add_argument("annotation")
    w.add_argument("-o", "--out", required=True)
    w.add_argument("--no-spans", action="store_true")
    w.set_defaults(fn=cmd_render)
    return p


def _fail(kind: str, msg) -> None:
    print(f"tablekit:error:{kind}: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="tablekit:%(levelname)s: %(message)s")
    try:
        return args.fn(args)
    except AnnotationError as exc:
        _fail("schema", exc)
    except (InputError, GeometryError, SynthError) as exc:
        _fail("input", exc)
    except EncodingError as exc:
        _fail("encode", exc)
    except (FileNotFoundError, IsADirectoryError) as exc:
        _fail("input", exc)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
