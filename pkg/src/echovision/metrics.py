"""The five depth indicators, pooled over every valid pixel.

AbsRel, SqRel, RMSE and RMSE Log (natural logarithm) measure error in
meters; the three delta accuracies count pixels whose two-way prediction/
truth ratio stays strictly below 1.25^k. Pooling treats the union of all
valid pixels as one population; a per-sample breakdown is kept alongside
for inspection.
"""

import json
import numpy as np
import torch
from dataclasses import dataclass, field, asdict

from .dataset import load_batch, MAX_DEPTH_M

DELTA_THRESHOLDS = (1.25, 1.25 ** 2, 1.25 ** 3)

METRIC_COLUMNS = ("Abs Rel", "Sq Rel", "RMSE", "RMSE Log",
                  "δ<1.25^1", "δ<1.25^2", "δ<1.25^3")


@dataclass
class MetricReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    n_pixels: int
    per_sample: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_pixels <= 0:
            raise ValueError("report over zero pixels")
        if not (0 <= self.delta1 <= self.delta2 <= self.delta3 <= 1):
            raise ValueError(
                f"delta accuracies must be nested fractions, got "
                f"({self.delta1}, {self.delta2}, {self.delta3})"
            )

    def values(self):
        return (self.abs_rel, self.sq_rel, self.rmse, self.rmse_log,
                self.delta1, self.delta2, self.delta3)

    def to_dict(self):
        return asdict(self)


def _pixel_metrics(d, dstar, thresholds):
    err = d - dstar
    ratio = np.maximum(d / dstar, dstar / d)
    return {
        "abs_rel": float(np.mean(np.abs(err) / dstar)),
        "sq_rel": float(np.mean(err ** 2 / dstar)),
        "rmse": float(np.sqrt(np.mean(err ** 2))),
        "rmse_log": float(np.sqrt(np.mean((np.log(d) - np.log(dstar)) ** 2))),
        "deltas": [float(np.mean(ratio < t)) for t in thresholds],
        "n_pixels": int(d.size),
    }


def evaluate_depth(preds, gts, masks, thresholds=DELTA_THRESHOLDS):
    """Pool the five indicators over all valid pixels of all samples.

    preds/gts/masks are matching stacks of 2-D maps (meters); masks select
    pixels with ground truth. Nonpositive depths under the mask, or a mask
    with no true pixel anywhere, are errors.
    """
    preds = np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    masks = np.asarray(masks, dtype=bool)
    if not (preds.shape == gts.shape == masks.shape):
        raise ValueError(
            f"shape mismatch: preds {preds.shape}, gts {gts.shape}, "
            f"masks {masks.shape}"
        )
    if preds.ndim == 2:
        preds, gts, masks = preds[None], gts[None], masks[None]
    if not masks.any():
        raise ValueError("no valid pixels in any mask")
    if np.any(gts[masks] <= 0) or np.any(preds[masks] <= 0):
        raise ValueError("nonpositive depth under a valid mask")

    per_sample = []
    for i in range(preds.shape[0]):
        m = masks[i]
        if m.any():
            per_sample.append(_pixel_metrics(preds[i][m], gts[i][m],
                                             thresholds))
        else:
            per_sample.append({"n_pixels": 0})

    pooled = _pixel_metrics(preds[masks], gts[masks], thresholds)
    return MetricReport(
        abs_rel=pooled["abs_rel"],
        sq_rel=pooled["sq_rel"],
        rmse=pooled["rmse"],
        rmse_log=pooled["rmse_log"],
        delta1=pooled["deltas"][0],
        delta2=pooled["deltas"][1],
        delta3=pooled["deltas"][2],
        n_pixels=pooled["n_pixels"],
        per_sample=per_sample,
    )


def predict_split(encoder, generator, manifest, split, encoding,
                  target="depth", batch_size=16):
    """Inference over a split in manifest order, no augmentation.

    Returns (preds, targets, masks) as stacked arrays in normalized units.
    """
    entries = manifest.entries_for(split)
    if not entries:
        raise ValueError(f"split {split!r} is empty")
    encoder.eval()
    generator.eval()
    preds, targets, masks = [], [], []
    with torch.no_grad():
        for start in range(0, len(entries), batch_size):
            idx = list(range(start, min(start + batch_size, len(entries))))
            batch = load_batch(manifest, split, idx, encoding, target,
                               augment=False)
            x = torch.from_numpy(batch.inputs).float()
            fake = generator(encoder(x))
            preds.append(fake.numpy()[:, 0].astype(np.float64))
            targets.append(batch.targets[:, 0])
            masks.append(batch.masks[:, 0])
    return (np.concatenate(preds), np.concatenate(targets),
            np.concatenate(masks))


def evaluate_model(encoder, generator, manifest, split, encoding,
                   target="depth", batch_size=16):
    """MetricReport in meters plus the mean masked L1 in normalized units.

    Depth maps are de-normalized by the fixed 10 m range before computing
    the indicators; grayscale runs get only the L1 (the indicators assume
    metric depth).
    """
    preds, targets, masks = predict_split(encoder, generator, manifest,
                                          split, encoding, target,
                                          batch_size=batch_size)
    n_valid = masks.sum()
    if n_valid == 0:
        raise ValueError("no valid pixels in split")
    l1 = float(np.sum(np.abs(preds - targets) * masks) / n_valid)
    if target != "depth":
        return None, l1
    report = evaluate_depth(preds * MAX_DEPTH_M, targets * MAX_DEPTH_M, masks)
    return report, l1


def format_metric_table(rows):
    """Rows of (label, MetricReport) as a fixed seven-column text table."""
    label_w = max(12, max((len(r[0]) for r in rows), default=0) + 2)
    header = "Model".ljust(label_w) + " | " + " | ".join(
        c.center(10) for c in METRIC_COLUMNS)
    lines = [header, "-" * len(header)]
    for label, report in rows:
        cells = " | ".join(f"{v:10.4f}" for v in report.values())
        lines.append(label.ljust(label_w) + " | " + cells)
    return "\n".join(lines) + "\n"


def format_l1_table(depth_rows, gray_rows):
    """Text table of L1 losses split into Gen. Only and GAN columns.

    depth_rows: (label, gen_only or None, gan or None); gray_rows:
    (label, gan). Grayscale models are adversarial by construction, so
    that section carries a single spanning column.
    """
    label_w = max(16, *(len(r[0]) + 2 for r in depth_rows + gray_rows)) \
        if depth_rows or gray_rows else 16
    head = "Arch. + Input".ljust(label_w) + " | " + "L1 Loss".center(23)
    sub = " ".ljust(label_w) + " | " + "Gen. Only".center(10) + " | " + "GAN".center(10)
    lines = [head, sub, "-" * len(sub)]

    def cell(v):
        return f"{v:10.4f}" if v is not None else "-".center(10)

    lines.append("Depth Map")
    for label, gen_only, gan in depth_rows:
        lines.append(label.ljust(label_w) + " | " + cell(gen_only)
                     + " | " + cell(gan))
    lines.append("Grayscale")
    for label, gan in gray_rows:
        lines.append(label.ljust(label_w) + " | " + f"{gan:23.4f}")
    return "\n".join(lines) + "\n"


def report_to_json(report, l1, extra=None):
    doc = {"l1_normalized": l1}
    if report is not None:
        doc["depth_metrics_m"] = report.to_dict()
    if extra:
        doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=1)
