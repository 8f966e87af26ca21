#!/usr/bin/env python3
"""Render the noise-study report (crispedge noise-study --out ...) as figures.

Produces two panels: average crispness versus warp strength, and the
clean-fraction mix curves per warp strength. Requires matplotlib.

    python scripts/plot_noise_study.py study.json --out study.png
"""

import argparse
import json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("study_json")
    ap.add_argument("--out", default="noise_study.png")
    args = ap.parse_args()

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise SystemExit("matplotlib is required: pip install crispedge[plots]") from exc

    study = json.loads(open(args.study_json).read())
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))

    alphas = [row["alpha"] for row in study["rows"]]
    ax1.plot(alphas, [row["label_ac"] for row in study["rows"]], "o-", label="labels")
    if any(row["refined_ac"] is not None for row in study["rows"]):
        ax1.plot(
            alphas,
            [row["refined_ac"] for row in study["rows"]],
            "s--",
            label="refined labels",
        )
    ax1.set_xlabel("warp strength (max offset, px)")
    ax1.set_ylabel("average crispness")
    ax1.set_title("Crispness vs label noise")
    ax1.legend()
    ax1.grid(alpha=0.3)

    by_alpha = {}
    for row in study["mix_rows"]:
        by_alpha.setdefault(row["alpha"], []).append(
            (row["fraction_clean"], row["label_ac"])
        )
    for alpha, pts in sorted(by_alpha.items()):
        pts.sort()
        ax2.plot(*zip(*pts), "o-", label=f"alpha={alpha:g}")
    ax2.set_xlabel("fraction of clean labels")
    ax2.set_ylabel("average crispness")
    ax2.set_title("Clean/noisy label mixes")
    ax2.legend()
    ax2.grid(alpha=0.3)

    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
