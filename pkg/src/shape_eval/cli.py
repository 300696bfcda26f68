"""Command-line entry points: ingest, run, datagen, selftest, loss-check."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np


def _cmd_ingest(args) -> int:
    from . import io
    from .harness import ConventionSpec, ingest_dataset

    if args.convention == "native":
        convention = ConventionSpec()
    else:
        convention = ConventionSpec.from_dict(io.load_json(args.convention))
    manifest = ingest_dataset(args.src, convention, args.out)
    n_ok = len(manifest["instances"])
    n_err = len(manifest["errors"])
    print(f"ingested {n_ok} instances into {args.out} ({n_err} flagged)")
    for err in manifest["errors"]:
        print(f"  [flagged] {err['instance_id']}: {err['error']}")
    return 0 if n_ok else 1


def _cmd_run(args) -> int:
    from . import io
    from .harness import PredictorSpec, RunConfig, load_benchmark, run_benchmark
    from .report import write_report

    instances = load_benchmark(args.bench)
    predictor = PredictorSpec.from_dict(io.load_json(args.predictor))
    cfg = RunConfig.from_dict(io.load_json(args.config)) if args.config else RunConfig()
    report = run_benchmark(instances, predictor, cfg)
    files = write_report(report, args.report, figures=not args.no_figures)
    agg = report.aggregates
    print(f"evaluated {report.n_valid}/{len(report.rows)} instances")
    if agg is None:
        print("no instance evaluated cleanly; aggregates absent")
    else:
        fs = "  ".join(f"FS@{d:g}={v:.4f}" for d, v in agg["fs"].items())
        print(f"mean CD = {agg['cd']:.6f}  {fs}")
    for row in report.rows:
        if row.status != "ok":
            print(f"  [{row.status}] {row.instance_id}: {row.error}")
    print("wrote " + " ".join(str(v) for v in (files["csv"], files["json"], *files["figures"])))
    return 0 if report.n_valid else 1


def _cmd_datagen(args) -> int:
    from .datagen import CameraSampleConfig, generate_dataset
    from . import io

    cfg = CameraSampleConfig.from_dict(io.load_json(args.config)) if args.config else CameraSampleConfig()
    if args.seed is not None:
        cfg = CameraSampleConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    if args.image_size is not None:
        w, h = (int(v) for v in args.image_size.lower().split("x"))
        cfg = CameraSampleConfig.from_dict({**cfg.to_dict(), "image_size": [w, h]})
    mesh_files = sorted(
        str(p) for p in Path(args.mesh_dir).iterdir() if p.suffix.lower() in (".obj", ".ply")
    )
    if not mesh_files:
        print(f"no .obj/.ply meshes found in {args.mesh_dir}", file=sys.stderr)
        return 1
    crop = None
    if args.crop_size:
        w, h = (int(v) for v in args.crop_size.lower().split("x"))
        crop = (w, h)
    manifest = generate_dataset(
        mesh_files, args.out_dir, cfg, views_per_object=args.views_per_object, crop_size=crop
    )
    print(
        f"rendered {len(manifest['instances'])} samples from {len(mesh_files)} meshes "
        f"into {args.out_dir} ({len(manifest['errors'])} skipped)"
    )
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(seed=args.seed)


def _cmd_loss_check(args) -> int:
    from .core import CameraIntrinsics, DepthMap
    from .geometry import unproject
    from .losses import occupancy_bce, projection_loss_depth_intrinsics, ssimae_depth_loss

    rng = np.random.default_rng(args.seed)
    worst_fd = 0.0
    worst_affine = 0.0
    for trial in range(args.trials):
        h, w = int(rng.integers(4, 12)), int(rng.integers(4, 12))
        mask = rng.random((h, w)) < 0.8
        mask.flat[: max(2, 2)] = True
        base = rng.uniform(0.5, 4.0, (h, w))
        gt = DepthMap(base, mask)
        a, b = float(rng.uniform(0.2, 3.0)), float(rng.uniform(-5, 5))
        scaled = a * base + b
        if scaled[mask].min() <= 0:
            scaled = scaled - scaled[mask].min() + 0.1
        worst_affine = max(worst_affine, ssimae_depth_loss(DepthMap(scaled, mask), gt).value)

        k = CameraIntrinsics(
            fx=float(rng.uniform(20, 200)), fy=float(rng.uniform(20, 200)),
            cx=(w - 1) / 2, cy=(h - 1) / 2, width=w, height=h,
        )
        depth = DepthMap(rng.uniform(0.5, 4.0, (h, w)), mask)
        gt_map = unproject(DepthMap(rng.uniform(0.5, 4.0, (h, w)), mask), k)
        loss = projection_loss_depth_intrinsics(depth, k, gt_map)
        eps = 1e-5
        for name in ("fx", "fy", "cx", "cy"):
            kw = {f: getattr(k, f) for f in ("fx", "fy", "cx", "cy")}
            kp = dict(kw)
            km = dict(kw)
            kp[name] += eps
            km[name] -= eps
            plus = projection_loss_depth_intrinsics(
                depth, CameraIntrinsics(**kp, width=w, height=h), gt_map
            ).value
            minus = projection_loss_depth_intrinsics(
                depth, CameraIntrinsics(**km, width=w, height=h), gt_map
            ).value
            fd = (plus - minus) / (2 * eps)
            rel = abs(loss.gradients[name] - fd) / max(abs(fd), 1e-10)
            worst_fd = max(worst_fd, rel)

        p = rng.uniform(0.05, 0.95, 64)
        y = (rng.random(64) < 0.5).astype(float)
        bce = occupancy_bce(p, y, with_gradients=True)
        j = int(rng.integers(64))
        pp, pm = p.copy(), p.copy()
        pp[j] += 1e-6
        pm[j] -= 1e-6
        fd = (occupancy_bce(pp, y).value - occupancy_bce(pm, y).value) / 2e-6
        worst_fd = max(worst_fd, abs(bce.gradients["prob"][j] - fd) / max(abs(fd), 1e-10))

    ok = worst_fd < 1e-4 and worst_affine < 1e-9
    print(f"{args.trials} trials: max FD relative error {worst_fd:.2e}, "
          f"max affine-invariance residual {worst_affine:.2e}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shape-eval",
        description="Geometry kernels and benchmark runner for single-view shape evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a source dataset into the native benchmark format")
    p.add_argument("--src", required=True)
    p.add_argument("--convention", default="native", help="'native' or a convention-spec JSON path")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("run", help="evaluate a predictor over a benchmark directory")
    p.add_argument("--bench", required=True)
    p.add_argument("--predictor", required=True, help="predictor spec JSON")
    p.add_argument("--config", default=None, help="run config JSON (defaults embedded)")
    p.add_argument("--report", required=True, help="report path (CSV; JSON + figures beside it)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("datagen", help="render synthetic depth/mask/projection samples")
    p.add_argument("--mesh-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--views-per-object", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--image-size", default=None, help="e.g. 600x600")
    p.add_argument("--crop-size", default=None, help="e.g. 224x224 (off by default)")
    p.add_argument("--config", default=None, help="camera sample config JSON")
    p.set_defaults(fn=_cmd_datagen)

    p = sub.add_parser("selftest", help="run the oracle self-check suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_selftest)

    p = sub.add_parser("loss-check", help="finite-difference checks of the loss gradients")
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_loss_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
