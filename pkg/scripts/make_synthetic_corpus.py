#!/usr/bin/env python3
"""Generate a synthetic corpus with a manifest for the crispedge CLI.

Two corpus kinds:

* square: one dark square per image with a mid-level outline; labels are the
  clean single-blur Canny outline, elastically warped when --alpha > 0.
  Good for exercising `crispedge refine`.
* stripes: rotated checkerboards with ~6 px edge spacing; labels are the
  clean over-detected Canny maps. Good input for `crispedge noise-study`.

Example:

    python scripts/make_synthetic_corpus.py --out data/squares \\
        --kind square --count 20 --alpha 4 --seed 0
    crispedge refine data/squares/manifest.json --out data/refined
"""

import argparse
import json
from pathlib import Path

import numpy as np

from crispedge import apply_field, make_field, overdetect, save_image
from crispedge.canny import CannyParams


def square_image(rng, size=64):
    side = int(rng.integers(44, 49))
    lim = size - side - 6 + 1
    x0 = int(rng.integers(6, lim))
    y0 = int(rng.integers(6, lim))
    img = np.full((size, size), 0.75)
    img[y0 : y0 + side, x0 : x0 + side] = 0.25
    img[y0, x0 : x0 + side] = 0.5
    img[y0 + side - 1, x0 : x0 + side] = 0.5
    img[y0 : y0 + side, x0] = 0.5
    img[y0 : y0 + side, x0 + side - 1] = 0.5
    return img


def stripe_image(rng, size=128, period=6):
    rr, cc = np.mgrid[0:size, 0:size]
    ph1, ph2 = rng.uniform(0, 2 * np.pi, 2)
    ang = rng.uniform(0, np.pi)
    u = np.cos(ang) * cc + np.sin(ang) * rr
    v = -np.sin(ang) * cc + np.cos(ang) * rr
    img = 0.5 + 0.25 * np.sign(np.sin(2 * np.pi * u / period + ph1)) * np.sign(
        np.sin(2 * np.pi * v / period + ph2)
    )
    return np.clip(img, 0.0, 1.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--kind", choices=("square", "stripes"), default="square")
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--alpha", type=float, default=4.0, help="warp strength for square labels")
    ap.add_argument("--warp-smooth", type=float, default=72.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    root = Path(args.out)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(exist_ok=True)
    if args.kind == "square":
        (root / "clean").mkdir(exist_ok=True)

    entries = []
    for i in range(args.count):
        rng = np.random.default_rng(args.seed + 10_000 + i)
        if args.kind == "square":
            img = square_image(rng)
            clean = overdetect(img, CannyParams(blur_sigmas=(1.0,)))
            field = make_field(*img.shape[::-1], args.alpha, args.warp_smooth, args.seed + i)
            label = apply_field(clean, field)
            save_image(clean, root / "clean" / f"im{i:03d}.png", 8)
        else:
            img = stripe_image(rng)
            label = overdetect(img)
        save_image(img, root / "images" / f"im{i:03d}.png", 8)
        save_image(label, root / "labels" / f"im{i:03d}.png", 8)
        entries.append(
            {
                "id": f"im{i:03d}",
                "image": f"images/im{i:03d}.png",
                "labels": [f"labels/im{i:03d}.png"],
            }
        )

    (root / "manifest.json").write_text(json.dumps({"entries": entries}, indent=2))
    print(f"wrote {len(entries)} entries under {root}")


if __name__ == "__main__":
    main()
