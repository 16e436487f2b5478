"""Command-line pipeline: synth, project, normals, postprocess, eval,
occlusion-stats, bench, render, selftest.

Stages exchange files (scans/labels in the SemanticKITTI wire formats,
channels and sidecars in the formats of :mod:`rangeseg.dumps`), so
predictions produced by any external model can be inserted before
``postprocess``.  Exit codes: 0 success, 1 usage error, 2 data/format error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import dumps, render
from .errors import DataError, FormatError, RangesegError
from .evaluation import ConfusionMatrix, bench as run_bench
from .normals import estimate_normals, load_channel_stats
from .pointcloud_io import (
    LabelSet,
    load_remap_table,
    read_labels,
    read_scan,
    remap_labels,
    write_labels,
    write_scan,
)
from .postprocess import (
    KnnParams,
    LabelImage,
    NlaParams,
    copy_pixel_label,
    knn_postprocess,
    nla,
)
from .projection import ProjectionConfig, RangeImage, occlusion_stats, project
from .scene import load_scene_spec, pole_before_wall_spec, synth_scene, SceneSpec


class UsageError(RangesegError):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise UsageError(f"{self.prog}: {message}")


def _projection_args(p: Parser) -> None:
    p.add_argument("--h", type=int, default=64, help="image height (rows)")
    p.add_argument("--w", type=int, default=2048, help="image width (columns)")
    p.add_argument("--fov-up", type=float, default=3.0, help="degrees above horizon")
    p.add_argument("--fov-down", type=float, default=25.0, help="degrees below horizon")


def _config_from(args) -> ProjectionConfig:
    return ProjectionConfig(
        height=args.h, width=args.w,
        fov_up=math.radians(args.fov_up), fov_down=math.radians(args.fov_down),
    )


def _read_label_image(path: str, img: RangeImage) -> LabelImage:
    labels = read_labels(Path(path).read_bytes())
    h, w = img.shape
    if len(labels) != h * w:
        raise FormatError(
            f"prediction file has {len(labels)} entries, expected {h}x{w}={h * w}"
        )
    return LabelImage(
        labels=labels.semantic.astype(np.int64).reshape(h, w),
        valid=img.valid.copy(),
    )


def build_parser() -> Parser:
    top = Parser(prog="rangeseg", description=__doc__,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="command", parser_class=Parser, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic scan + labels")
    p.add_argument("--spec", help="JSON scene spec (omit for the pole-before-wall preset)")
    p.add_argument("--preset", choices=["pole-wall", "ground"], default="pole-wall")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix (.bin/.label appended)")

    p = sub.add_parser("project", help="project a scan to range-image dumps")
    p.add_argument("--scan", required=True)
    _projection_args(p)
    p.add_argument("--out", required=True, help="output prefix for dumps + .proj sidecar")

    p = sub.add_parser("normals", help="estimate normals from projected channel dumps")
    p.add_argument("--prefix", required=True, help="prefix used by the project command")
    p.add_argument("--out", help="output prefix for n1/n2/n3 dumps (default: same prefix)")

    p = sub.add_parser("postprocess", help="assign per-point labels from a prediction image")
    p.add_argument("--method", choices=["nla", "knn", "copy"], required=True)
    p.add_argument("--range-dump", required=True, help="range channel dump from project")
    p.add_argument("--pred", required=True, help="H*W prediction image in .label format")
    p.add_argument("--proj", required=True, help=".proj sidecar from project")
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--cutoff", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", required=True, help="per-point .label output")

    p = sub.add_parser("eval", help="per-class IoU / mIoU between two .label files")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--remap", help="remap table applied to both files (default: none)")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--ignore", type=int, default=255)
    p.add_argument("--csv", help="write the per-class IoU table as CSV")
    p.add_argument("--figure", help="write a per-class IoU bar chart (PNG)")

    p = sub.add_parser("occlusion-stats", help="many-to-one statistics of a projection")
    p.add_argument("--proj", required=True)
    p.add_argument("--labels", help="optional ground-truth .label file")

    p = sub.add_parser("bench", help="latency comparison of post-processing methods")
    p.add_argument("--scan", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt")
    _projection_args(p)
    p.add_argument("--methods", default="nla,knn,copy")
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--cutoff", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--csv", required=True)
    p.add_argument("--figure", help="write a latency bar chart (PNG)")

    p = sub.add_parser("render", help="render a channel dump or label image to PPM + PNG")
    p.add_argument("--input", required=True, help="channel dump or .label image")
    p.add_argument("--kind", choices=["channel", "labels"], required=True)
    p.add_argument("--h", type=int, help="rows (labels kind only)")
    p.add_argument("--w", type=int, help="columns (labels kind only)")
    p.add_argument("--colors", help="class color table (default: bundled)")
    p.add_argument("--valid-dump", help="optional valid-channel dump for masking")
    p.add_argument("--out", required=True, help="output PPM path (PNG written alongside)")

    p = sub.add_parser("selftest", help="run the oracle differential suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scans", type=int, default=25)
    return top


def _cmd_synth(args) -> int:
    if args.spec:
        spec = load_scene_spec(Path(args.spec).read_text())
    elif args.preset == "ground":
        spec = SceneSpec()
    else:
        spec = pole_before_wall_spec()
    cloud, labels = synth_scene(spec, args.seed)
    Path(args.out + ".bin").write_bytes(write_scan(cloud))
    Path(args.out + ".label").write_bytes(write_labels(labels))
    print(f"wrote {args.out}.bin ({len(cloud)} points) and {args.out}.label")
    return 0


def _cmd_project(args) -> int:
    cloud = read_scan(Path(args.scan).read_bytes())
    config = _config_from(args)
    img, proj = project(cloud, config)
    channels = {
        "x": img.x, "y": img.y, "z": img.z,
        "range": dumps.range_channel_with_inf(img),
        "remission": img.remission,
        "valid": img.valid.astype(np.float32),
    }
    for name, data in channels.items():
        Path(f"{args.out}.{name}.dump").write_bytes(
            dumps.write_channel(data, dumps.CHANNEL_IDS[name])
        )
    Path(args.out + ".proj").write_bytes(dumps.write_sidecar(proj))
    print(
        f"projected {len(cloud)} points onto {config.height}x{config.width}; "
        f"{int(img.valid.sum())} valid pixels, "
        f"{len(cloud) - int(proj.is_owner.sum())} occluded points, "
        f"{proj.clamped_rows} pitch-clamped"
    )
    return 0


def _load_range_image(prefix: str) -> RangeImage:
    img = dumps.range_image_from_range_dump(Path(f"{prefix}.range.dump").read_bytes())
    for name, attr in (("x", "x"), ("y", "y"), ("z", "z"), ("remission", "remission")):
        data, _ = dumps.read_channel(Path(f"{prefix}.{name}.dump").read_bytes())
        setattr(img, attr, data)
    return img


def _cmd_normals(args) -> int:
    img = _load_range_image(args.prefix)
    nm = estimate_normals(img)
    out = args.out or args.prefix
    for i, name in enumerate(("n1", "n2", "n3")):
        data = np.where(nm.valid, nm.n[..., i], 0.0).astype(np.float32)
        Path(f"{out}.{name}.dump").write_bytes(
            dumps.write_channel(data, dumps.CHANNEL_IDS[name])
        )
    print(f"normals on {int(nm.valid.sum())} valid pixels -> {out}.n[123].dump")
    return 0


def _cmd_postprocess(args) -> int:
    img = dumps.range_image_from_range_dump(Path(args.range_dump).read_bytes())
    proj = dumps.read_sidecar(Path(args.proj).read_bytes())
    pred = _read_label_image(args.pred, img)
    if args.method == "nla":
        out = nla(img, pred, proj, NlaParams(kernel=args.kernel))
    elif args.method == "knn":
        out = knn_postprocess(
            img, pred, proj,
            KnnParams(kernel=args.kernel, k=args.knn_k,
                      cutoff=args.cutoff, sigma=args.sigma),
        )
    else:
        out = copy_pixel_label(pred, proj)
    result = LabelSet(
        semantic=out.astype(np.uint16),
        instance=np.zeros(len(out), dtype=np.uint16),
    )
    Path(args.out).write_bytes(write_labels(result))
    print(f"wrote {len(out)} per-point labels to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    gt = read_labels(Path(args.gt).read_bytes())
    pred = read_labels(Path(args.pred).read_bytes())
    if len(gt) != len(pred):
        raise DataError(f"gt has {len(gt)} points, pred has {len(pred)}")
    gt_sem = gt.semantic.astype(np.int64)
    pred_sem = pred.semantic.astype(np.int64)
    if args.remap:
        table = load_remap_table(Path(args.remap).read_text())
        gt_sem = remap_labels(gt, table).labels.semantic.astype(np.int64)
        pred_sem = remap_labels(pred, table).labels.semantic.astype(np.int64)
        num_classes = table.num_classes
    else:
        num_classes = args.num_classes or int(max(gt_sem.max(), pred_sem.max())) + 1
    conf = ConfusionMatrix(num_classes)
    conf.accumulate(gt_sem, np.minimum(pred_sem, num_classes - 1), args.ignore)
    per_class, miou = conf.iou()

    print(f"{'class':>6} {'IoU':>8}")
    for c, v in enumerate(per_class):
        print(f"{c:>6} {'--' if np.isnan(v) else f'{v:8.4f}'}")
    print(f"{'mIoU':>6} {miou:8.4f}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["class", "iou"])
            for c, v in enumerate(per_class):
                writer.writerow([c, "" if np.isnan(v) else f"{v:.6f}"])
            writer.writerow(["miou", f"{miou:.6f}"])
    if args.figure:
        render.save_iou_figure(args.figure, per_class, miou)
    return 0


def _cmd_occlusion_stats(args) -> int:
    proj = dumps.read_sidecar(Path(args.proj).read_bytes())
    labels = read_labels(Path(args.labels).read_bytes()) if args.labels else None
    stats = occlusion_stats(proj, labels)
    print(f"points:            {stats.num_points}")
    print(f"valid pixels:      {stats.num_valid_pixels}")
    print(f"occluded points:   {stats.occluded_count} ({stats.occluded_fraction:.4f})")
    print("multiplicity histogram (points per pixel -> pixels):")
    for mult, count in stats.multiplicity_histogram.items():
        print(f"  {mult:>4} -> {count}")
    if stats.cross_class_occluded_count is not None:
        print(
            f"occluded w/ different class than owner: "
            f"{stats.cross_class_occluded_count} "
            f"({stats.cross_class_occluded_fraction:.4f} of occluded)"
        )
    return 0


def _cmd_bench(args) -> int:
    cloud = read_scan(Path(args.scan).read_bytes())
    config = _config_from(args)
    img, _ = project(cloud, config)
    pred = _read_label_image(args.pred, img)
    gt = read_labels(Path(args.gt).read_bytes()) if args.gt else None
    rows = []
    for method in args.methods.split(","):
        report = run_bench(
            cloud, pred, gt, method.strip(), config,
            nla_params=NlaParams(kernel=args.kernel),
            knn_params=KnnParams(kernel=args.kernel, k=args.knn_k,
                                 cutoff=args.cutoff, sigma=args.sigma),
            repetitions=args.reps,
        )
        post = report.stages["postprocess"]
        rows.append({
            "method": report.method,
            "params": ";".join(f"{k}={v}" for k, v in report.params.items()),
            "postprocess_median_ms": post.median_ms,
            "postprocess_p10_ms": post.p10_ms,
            "postprocess_p90_ms": post.p90_ms,
            "projection_median_ms": report.stages["projection"].median_ms,
            "miou": "" if report.miou is None else f"{report.miou:.6f}",
        })
        print(f"{report.method:>5}: postprocess median {post.median_ms:.3f} ms "
              f"(p10 {post.p10_ms:.3f}, p90 {post.p90_ms:.3f})")
    with open(args.csv, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    if args.figure:
        render.save_bench_figure(args.figure, rows)
    return 0


def _cmd_render(args) -> int:
    out = Path(args.out)
    png = out.with_suffix(".png")
    if args.kind == "channel":
        data, _ = dumps.read_channel(Path(args.input).read_bytes())
        valid = None
        if args.valid_dump:
            vdata, _ = dumps.read_channel(Path(args.valid_dump).read_bytes())
            valid = vdata > 0.5
        out.write_bytes(dumps.write_ppm(render.channel_to_rgb(data, valid)))
        render.save_channel_figure(str(png), data, out.stem, valid)
    else:
        if not args.h or not args.w:
            raise UsageError("render --kind labels requires --h and --w")
        labels = read_labels(Path(args.input).read_bytes())
        if len(labels) != args.h * args.w:
            raise FormatError(
                f"label image has {len(labels)} entries, expected {args.h * args.w}"
            )
        grid = labels.semantic.astype(np.int64).reshape(args.h, args.w)
        colors = render.load_class_colors(
            Path(args.colors).read_text() if args.colors else None
        )
        rgb = render.labels_to_rgb(grid, colors)
        out.write_bytes(dumps.write_ppm(rgb))
        render.save_rgb_figure(str(png), rgb, out.stem)
    print(f"wrote {out} and {png}")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(seed=args.seed, num_scans=args.scans, log=print)
    return 0 if ok else 2


_COMMANDS = {
    "synth": _cmd_synth,
    "project": _cmd_project,
    "normals": _cmd_normals,
    "postprocess": _cmd_postprocess,
    "eval": _cmd_eval,
    "occlusion-stats": _cmd_occlusion_stats,
    "bench": _cmd_bench,
    "render": _cmd_render,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print("run 'rangeseg --help' for the full grammar", file=sys.stderr)
        return 1
    except (FormatError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
