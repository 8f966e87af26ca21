"""Command-line interface.

Subcommands: refine, eval, upscale-fuse, noise-study, canny, nms, crispness.
Exit codes: 0 success, 1 total failure, 2 partial failure (some manifest
entries failed but others were processed).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import pipeline
from .canny import CannyParams
from .inpaint import external_backend
from .nms import NmsParams
from .refine import RefineConfig


def _add_canny_args(p: argparse.ArgumentParser):
    p.add_argument("--canny-low-frac", type=float, default=0.05)
    p.add_argument("--canny-high-frac", type=float, default=0.15)
    p.add_argument(
        "--canny-sigmas",
        default="1.0,2.0,3.0",
        help="comma-separated blur sigmas fused by union",
    )


def _add_nms_args(p: argparse.ArgumentParser):
    p.add_argument("--orient-sigma", type=float, default=2.0)
    p.add_argument("--suppress-radius", type=int, default=1)
    p.add_argument("--boost", type=float, default=1.01)
    p.add_argument("--margin", type=int, default=0)


def _add_refine_args(p: argparse.ArgumentParser):
    p.add_argument("--eta", type=float, default=0.3)
    p.add_argument("--patch-size", type=int, default=256)
    p.add_argument("--i-max", type=int, default=10)
    p.add_argument("--neigh-radius", type=int, default=3)
    p.add_argument("--dilate-radius", type=int, default=7)
    p.add_argument("--unconfident-value", type=float, default=0.15)


def _canny_params(args) -> CannyParams:
    sigmas = tuple(float(s) for s in args.canny_sigmas.split(",") if s.strip())
    return CannyParams(args.canny_low_frac, args.canny_high_frac, sigmas)


def _nms_params(args) -> NmsParams:
    return NmsParams(args.orient_sigma, args.suppress_radius, args.boost, args.margin)


def _refine_config(args) -> RefineConfig:
    return RefineConfig(
        eta=args.eta,
        patch_size=args.patch_size,
        i_max=args.i_max,
        neigh_radius=args.neigh_radius,
        dilate_radius=args.dilate_radius,
        canny=_canny_params(args),
        unconfident_value=args.unconfident_value,
    )


def _run_config(args) -> pipeline.RunConfig:
    return pipeline.RunConfig(
        refine=_refine_config(args),
        nms=_nms_params(args),
        max_dist=getattr(args, "max_dist", pipeline.DEFAULT_MAX_DIST),
        seed=getattr(args, "seed", 0),
        parallelism=getattr(args, "parallelism", 1),
        bit_depth=getattr(args, "bit_depth", 8),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crispedge",
        description="Edge-label crispness measurement, benchmarking, and Canny-guided refinement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="refine a manifest's labels")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="output directory")
    _add_refine_args(p)
    _add_canny_args(p)
    _add_nms_args(p)
    p.add_argument("--backend-cmd", default=None, help="external inpainter command")
    p.add_argument("--backend-timeout", type=float, default=60.0)
    p.add_argument("--per-annotator", action="store_true")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)

    p = sub.add_parser("eval", help="benchmark manifest predictions")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="report path prefix (.json/.csv added)")
    p.add_argument("--nms", action="store_true", help="thin predictions before thresholding")
    p.add_argument("--save-nms", default=None, help="directory for thinned predictions")
    p.add_argument("--max-dist", type=float, default=0.0075)
    _add_refine_args(p)
    _add_canny_args(p)
    _add_nms_args(p)

    p = sub.add_parser("upscale-fuse", help="fuse detector output across scales")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--factor", type=float, default=1.5)
    p.add_argument("--detector-cmd", default=None, help="external detector command")
    p.add_argument("--detector-timeout", type=float, default=60.0)
    p.add_argument("--detector-blur", type=float, default=1.0)
    _add_canny_args(p)

    p = sub.add_parser("noise-study", help="label-noise crispness study")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="report path prefix (.json/.csv added)")
    p.add_argument("--alphas", default="0,10,20,40")
    p.add_argument("--annotators", type=int, default=5)
    p.add_argument("--fractions", default="0,0.2,0.4,0.6,0.8,0.9,1.0")
    p.add_argument("--smooth-sigma", type=float, default=4.0)
    p.add_argument("--no-refined", action="store_true", help="skip refined-label crispness")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--parallelism", type=int, default=1)
    _add_refine_args(p)
    _add_canny_args(p)
    _add_nms_args(p)

    p = sub.add_parser("canny", help="over-detected Canny map of one image")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    _add_canny_args(p)

    p = sub.add_parser("nms", help="thin one soft edge map")
    p.add_argument("edges")
    p.add_argument("--out", required=True)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    _add_nms_args(p)

    p = sub.add_parser("crispness", help="print crispness of one edge map")
    p.add_argument("edges")
    _add_nms_args(p)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "refine":
        manifest = pipeline.load_manifest(args.manifest)
        backend = (
            external_backend(args.backend_cmd, args.backend_timeout)
            if args.backend_cmd
            else None
        )
        code, summary = pipeline.cmd_refine(
            manifest, args.out, _run_config(args), backend, args.per_annotator
        )
        print(f"refined {summary['ok']}/{len(summary['entries'])} entries -> {args.out}")
        return code

    if args.command == "eval":
        manifest = pipeline.load_manifest(args.manifest)
        cfg = pipeline.RunConfig(
            refine=_refine_config(args), nms=_nms_params(args), max_dist=args.max_dist
        )
        code, report = pipeline.cmd_eval(manifest, args.out, cfg, args.nms, args.save_nms)
        print(
            f"ODS {report.ods_f:.4f} @ {report.ods_threshold:.2f} | "
            f"OIS {report.ois_f:.4f} | AC {report.average_crispness}"
        )
        return code

    if args.command == "upscale-fuse":
        if args.detector_cmd:
            def detector(img):
                return pipeline.external_detect(img, args.detector_cmd, args.detector_timeout)
        else:
            params = _canny_params(args)
            def detector(img):
                return pipeline.soft_canny_detector(img, params, args.detector_blur)
        code, _ = pipeline.cmd_upscale_fuse(args.image, args.out, detector, args.factor)
        print(f"fused map -> {args.out}")
        return code

    if args.command == "noise-study":
        manifest = pipeline.load_manifest(args.manifest)
        alphas = tuple(float(a) for a in args.alphas.split(",") if a.strip())
        fractions = tuple(float(f) for f in args.fractions.split(",") if f.strip())
        code, study = pipeline.cmd_noise_study(
            manifest,
            args.out,
            _run_config(args),
            alphas=alphas,
            k=args.annotators,
            fractions=fractions,
            refine_labels=not args.no_refined,
            smooth_sigma=args.smooth_sigma,
        )
        print(json.dumps(study["rows"], indent=2))
        return code

    if args.command == "canny":
        return pipeline.cmd_canny(args.image, args.out, _canny_params(args))

    if args.command == "nms":
        return pipeline.cmd_nms(args.edges, args.out, _nms_params(args), args.bit_depth)

    if args.command == "crispness":
        print(f"{pipeline.cmd_crispness(args.edges, _nms_params(args)):.6f}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
