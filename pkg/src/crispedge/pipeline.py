"""Dataset-level commands: batch refinement, benchmarking, upscale fusion,
and the label-noise study. The CLI in crispedge.cli is a thin argument layer
over these functions.

Manifests are JSON files of the form

    {"entries": [{"id": "...", "image": "path.png",
                  "labels": ["a0.png", "a1.png"],
                  "prediction": "pred.png"}]}

with paths resolved relative to the manifest's directory. All randomized
commands take explicit seeds; outputs are byte-identical across runs and
parallelism settings.
"""

from __future__ import annotations

import dataclasses
import json
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .canny import CannyParams, overdetect
from .elastic import simulate_annotators
from .inpaint import (
    ExternalProcessError,
    ExternalTimeoutError,
    MalformedOutputError,
    scratch_root,
    geodesic_backend,
)
from .metrics import DEFAULT_MAX_DIST, DEFAULT_THRESHOLDS, crispness
from .nms import NmsParams, edge_nms
from .raster import GrayImage, EdgeMap, gaussian_blur, hadamard, load_image, resize_bilinear, save_image
from .refine import RefineConfig, refine


@dataclass(frozen=True)
class ManifestEntry:
    entry_id: str
    image: Path
    labels: tuple[Path, ...]
    prediction: Path | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]


def load_manifest(path) -> DatasetManifest:
    p = Path(path)
    doc = json.loads(p.read_text())
    root = p.parent
    entries = []
    seen = set()
    for raw in doc.get("entries", []):
        entry_id = raw["id"]
        if entry_id in seen:
            raise ValueError(f"duplicate manifest id {entry_id!r}")
        seen.add(entry_id)
        labels = tuple(root / lbl for lbl in raw.get("labels", []))
        if not labels:
            raise ValueError(f"entry {entry_id!r} has no labels")
        pred = raw.get("prediction")
        entries.append(
            ManifestEntry(
                entry_id=entry_id,
                image=root / raw["image"],
                labels=labels,
                prediction=(root / pred) if pred else None,
            )
        )
    if not entries:
        raise ValueError(f"{p}: manifest has no entries")
    return DatasetManifest(tuple(entries))


@dataclass(frozen=True)
class RunConfig:
    refine: RefineConfig = field(default_factory=RefineConfig)
    nms: NmsParams = field(default_factory=NmsParams)
    max_dist: float = DEFAULT_MAX_DIST
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    seed: int = 0
    parallelism: int = 1
    bit_depth: int = 8

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _map_entries(items, fn, parallelism: int):
    if parallelism <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=parallelism) as ex:
        return list(ex.map(fn, items))


def _load_entry_maps(entry: ManifestEntry, need_prediction: bool = False):
    img = load_image(entry.image, kind="gray")
    labels = [load_image(lbl, kind="edge") for lbl in entry.labels]
    for lbl, path in zip(labels, entry.labels):
        if lbl.shape != img.shape:
            raise ValueError(f"{path}: label shape {lbl.shape} != image {img.shape}")
    pred = None
    if need_prediction:
        if entry.prediction is None:
            raise ValueError(f"entry {entry.entry_id!r} has no prediction")
        pred = load_image(entry.prediction, kind="edge")
        if pred.shape != img.shape:
            raise ValueError(
                f"{entry.prediction}: prediction shape {pred.shape} != image {img.shape}"
            )
    return img, labels, pred


def _exit_code(n_ok: int, n_failed: int) -> int:
    if n_failed == 0:
        return 0
    return 1 if n_ok == 0 else 2


# ---------------------------------------------------------------------------
# refine
# ---------------------------------------------------------------------------


def cmd_refine(
    manifest: DatasetManifest,
    out_dir,
    cfg: RunConfig,
    backend=None,
    per_annotator: bool = False,
) -> tuple[int, dict]:
    """Refine every entry's (averaged) label; write maps, traces, summary."""
    if backend is None:
        backend = geodesic_backend
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    def run_entry(entry: ManifestEntry) -> dict:
        try:
            img, labels, _ = _load_entry_maps(entry)
            outputs = []
            traces = []
            if per_annotator:
                sources = [(f"{entry.entry_id}.a{i}", lbl) for i, lbl in enumerate(labels)]
            else:
                sources = [(entry.entry_id, np.mean(labels, axis=0))]
            for stem, label in sources:
                refined, trace = refine(img, label, cfg.refine, backend)
                out_path = out_root / f"{stem}.png"
                trace_path = out_root / f"{stem}.trace.json"
                save_image(refined, out_path, cfg.bit_depth)
                trace_path.write_text(trace.to_json())
                outputs.append(out_path.name)
                traces.append(trace_path.name)
            return {
                "id": entry.entry_id,
                "status": "ok",
                "outputs": outputs,
                "traces": traces,
            }
        except Exception as exc:
            return {"id": entry.entry_id, "status": "error", "error": str(exc)}

    results = _map_entries(manifest.entries, run_entry, cfg.parallelism)
    results.sort(key=lambda r: r["id"])
    n_ok = sum(1 for r in results if r["status"] == "ok")
    summary = {
        "config": cfg.as_dict(),
        "per_annotator": per_annotator,
        "entries": results,
        "ok": n_ok,
        "failed": len(results) - n_ok,
    }
    (out_root / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return _exit_code(n_ok, len(results) - n_ok), summary


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(
    manifest: DatasetManifest,
    out_prefix,
    cfg: RunConfig,
    apply_nms: bool = False,
    save_nms_dir=None,
) -> tuple[int, metrics.BenchmarkReport]:
    """Benchmark manifest predictions against labels; write JSON + CSV."""
    preds = {}
    gts = {}
    for entry in manifest.entries:
        img, labels, pred = _load_entry_maps(entry, need_prediction=True)
        preds[entry.entry_id] = pred
        gts[entry.entry_id] = [lbl > 0 for lbl in labels]

    report = metrics.benchmark(
        preds,
        gts,
        thresholds=cfg.thresholds,
        max_dist=cfg.max_dist,
        apply_nms=apply_nms,
        nms_params=cfg.nms,
    )
    report.config = {**cfg.as_dict(), "nms_applied": apply_nms}

    if save_nms_dir is not None:
        nms_root = Path(save_nms_dir)
        nms_root.mkdir(parents=True, exist_ok=True)
        for entry_id in sorted(preds):
            save_image(
                edge_nms(preds[entry_id], cfg.nms),
                nms_root / f"{entry_id}.png",
                16,
            )

    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".json").write_text(report.to_json())
    prefix.with_suffix(".csv").write_text(report.to_csv())
    return 0, report


# ---------------------------------------------------------------------------
# upscale fusion
# ---------------------------------------------------------------------------


def soft_canny_detector(img: GrayImage, params: CannyParams | None = None, blur_sigma: float = 1.0) -> EdgeMap:
    """Built-in soft detector: blurred over-detected Canny edges."""
    return gaussian_blur(overdetect(img, params).astype(np.float64), blur_sigma)


def external_detect(img: GrayImage, cmd, timeout: float = 60.0) -> EdgeMap:
    """Run an external detector: argv = cmd + [image.png, out.pgm]."""
    argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
    with tempfile.TemporaryDirectory(dir=scratch_root()) as tmp:
        tdir = Path(tmp)
        img_p = tdir / "image.png"
        out_p = tdir / "out.pgm"
        save_image(img, img_p, 8)
        try:
            proc = subprocess.run(
                argv + [str(img_p), str(out_p)], capture_output=True, timeout=timeout
            )
        except subprocess.TimeoutExpired as exc:
            raise ExternalTimeoutError(f"detector timed out after {timeout}s") from exc
        except OSError as exc:
            raise ExternalProcessError(f"could not launch {argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalProcessError(
                f"detector exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:500]}"
            )
        try:
            out = load_image(out_p, kind="edge")
        except (OSError, ValueError) as exc:
            raise MalformedOutputError(f"unreadable detector output: {exc}") from exc
        if out.shape != img.shape:
            raise MalformedOutputError(
                f"detector output shape {out.shape} != image {img.shape}"
            )
        return out


def upscale_fuse(img: GrayImage, detector, factor: float = 1.5) -> EdgeMap:
    """Hadamard fusion of the detector's output with its rescaled-run output.

    The image is detected once at native size and once upscaled by factor
    (that run's map is brought back to native size), and the two maps are
    multiplied: only edges present at both scales survive.
    """
    if factor <= 0:
        raise ValueError("factor must be > 0")
    h, w = img.shape
    e1 = detector(img)
    up = resize_bilinear(img, max(1, round(w * factor)), max(1, round(h * factor)))
    e2 = resize_bilinear(detector(up), w, h)
    return hadamard(e1, e2)


def cmd_upscale_fuse(image_path, out_path, detector, factor: float = 1.5) -> tuple[int, EdgeMap]:
    img = load_image(image_path, kind="gray")
    fused = upscale_fuse(img, detector, factor)
    save_image(fused, out_path, 16)
    return 0, fused


# ---------------------------------------------------------------------------
# noise study
# ---------------------------------------------------------------------------

DEFAULT_ALPHAS = (0.0, 10.0, 20.0, 40.0)
DEFAULT_FRACTIONS = (0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0)

_STUDY_NOTE = (
    "Label-level statistics: clean references are Canny maps of each image, "
    "noise is simulated by elastic warping, and no detector training is involved."
)


def cmd_noise_study(
    manifest: DatasetManifest,
    out_prefix,
    cfg: RunConfig,
    alphas=DEFAULT_ALPHAS,
    k: int = 5,
    fractions=DEFAULT_FRACTIONS,
    refine_labels: bool = True,
    smooth_sigma: float = 4.0,
) -> tuple[int, dict]:
    """Measure average crispness of elastically-noised labels per alpha,
    of their refined versions, and of clean/noisy mixes per fraction."""
    images = []
    for entry in manifest.entries:
        img, _, _ = _load_entry_maps(entry)
        images.append((entry.entry_id, img))

    def crisp_or_none(m):
        try:
            return crispness(np.asarray(m, dtype=np.float64), cfg.nms)
        except metrics.UndefinedCrispnessError:
            return None

    def mean_defined(values):
        defined = [v for v in values if v is not None]
        if not defined:
            raise metrics.UndefinedCrispnessError("no map with positive mass")
        return float(np.mean(defined))

    clean = [overdetect(img, cfg.refine.canny) for _, img in images]
    clean_crisp = [crisp_or_none(c) for c in clean]

    def noisy_for_alpha(alpha: float) -> list[EdgeMap]:
        def one(idx_mask):
            idx, mask = idx_mask
            return simulate_annotators(
                mask, alpha, k, cfg.seed + 1_000_003 * idx, smooth_sigma
            )

        return _map_entries(list(enumerate(clean)), one, cfg.parallelism)

    rows = []
    mix_rows = []
    n = len(clean)
    for a_idx, alpha in enumerate(alphas):
        noisy = noisy_for_alpha(alpha)
        noisy_crisp = _map_entries(noisy, crisp_or_none, cfg.parallelism)
        label_ac = mean_defined(noisy_crisp)

        refined_ac = None
        if refine_labels:
            def refine_one(pair):
                (_, img), lbl = pair
                refined, _ = refine(img, lbl, cfg.refine)
                return crispness(refined, cfg.nms)

            vals = _map_entries(list(zip(images, noisy)), refine_one, cfg.parallelism)
            refined_ac = float(np.mean(vals))

        rows.append({"alpha": alpha, "label_ac": label_ac, "refined_ac": refined_ac})

        # per-map crispness values are fixed, so a mix row only reselects them
        for f_idx, frac in enumerate(fractions):
            n_clean = int(round(frac * n))
            rng = np.random.default_rng(cfg.seed + 7919 * a_idx + 13 * f_idx)
            clean_ids = set(rng.permutation(n)[:n_clean].tolist())
            mixed = [
                clean_crisp[i] if i in clean_ids else noisy_crisp[i] for i in range(n)
            ]
            mix_rows.append(
                {
                    "alpha": alpha,
                    "fraction_clean": frac,
                    "label_ac": mean_defined(mixed),
                }
            )

    study = {
        "note": _STUDY_NOTE,
        "config": cfg.as_dict(),
        "annotators": k,
        "smooth_sigma": smooth_sigma,
        "alphas": list(alphas),
        "rows": rows,
        "mix_rows": mix_rows,
    }
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".json").write_text(json.dumps(study, indent=2, sort_keys=True))

    lines = ["kind,alpha,fraction_clean,label_ac,refined_ac"]
    for row in rows:
        refined = "" if row["refined_ac"] is None else repr(row["refined_ac"])
        lines.append(f"alpha,{row['alpha']},,{row['label_ac']!r},{refined}")
    for row in mix_rows:
        lines.append(
            f"mix,{row['alpha']},{row['fraction_clean']},{row['label_ac']!r},"
        )
    prefix.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    return 0, study


# ---------------------------------------------------------------------------
# single-file utilities
# ---------------------------------------------------------------------------


def cmd_canny(image_path, out_path, params: CannyParams | None = None) -> int:
    img = load_image(image_path, kind="gray")
    save_image(overdetect(img, params), out_path, 8)
    return 0


def cmd_nms(edge_path, out_path, params: NmsParams | None = None, bit_depth: int = 16) -> int:
    e = load_image(edge_path, kind="edge")
    save_image(edge_nms(e, params), out_path, bit_depth)
    return 0


def cmd_crispness(edge_path, params: NmsParams | None = None) -> float:
    return crispness(load_image(edge_path, kind="edge"), params)
