"""Inspection artifacts: prediction grids and feature mosaics as PNG.

Everything routes through Pillow with fixed layout parameters so repeated
runs produce byte-identical files.
"""

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

MAX_TILES = 8
PAD = 2


def _to_u8(img):
    return (np.clip(img, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def _png_info(meta):
    if not meta:
        return None
    info = PngInfo()
    for k, v in sorted(meta.items()):
        info.add_text(str(k), str(v))
    return info


def _pair_grid(top_maps, bottom_maps):
    """Two-row tile grid: top row maps over bottom row maps, k columns."""
    k = min(len(top_maps), MAX_TILES)
    h, w = top_maps[0].shape
    canvas = np.full((2 * h + 3 * PAD, k * (w + PAD) + PAD), 32, dtype=np.uint8)
    for i in range(k):
        x0 = PAD + i * (w + PAD)
        canvas[PAD:PAD + h, x0:x0 + w] = _to_u8(top_maps[i])
        canvas[2 * PAD + h:2 * PAD + 2 * h, x0:x0 + w] = _to_u8(bottom_maps[i])
    return canvas


def save_prediction_grid(path, preds, targets, meta=None):
    """Targets over predictions, one column per sample."""
    canvas = _pair_grid(list(targets), list(preds))
    Image.fromarray(canvas).save(path, pnginfo=_png_info(meta))


def save_eval_mosaic(path, gts, preds, meta=None):
    """Ground truth | prediction column pairs, one row per sample."""
    k = min(len(gts), MAX_TILES)
    h, w = gts[0].shape
    canvas = np.full((k * (h + PAD) + PAD, 2 * w + 3 * PAD), 32,
                     dtype=np.uint8)
    for i in range(k):
        y0 = PAD + i * (h + PAD)
        canvas[y0:y0 + h, PAD:PAD + w] = _to_u8(gts[i])
        canvas[y0:y0 + h, 2 * PAD + w:2 * PAD + 2 * w] = _to_u8(preds[i])
    Image.fromarray(canvas).save(path, pnginfo=_png_info(meta))


def save_feature_mosaic(path, waveforms, features, meta=None, max_cols=4):
    """Waveform row over feature row, rendered as line/strip plots.

    ``waveforms`` are (2, L) windows, ``features`` the matching encoded
    arrays; only the left channel of each is drawn.
    """
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    k = min(len(waveforms), max_cols)
    fig, axes = plt.subplots(2, k, figsize=(3 * k, 4), dpi=100, squeeze=False)
    for i in range(k):
        axes[0][i].plot(waveforms[i][0], linewidth=0.4, color="black")
        axes[0][i].set_title(f"waveform {i}", fontsize=8)
        feat = features[i][0]
        if feat.ndim == 1:
            axes[1][i].plot(feat, linewidth=0.4, color="black")
        else:
            axes[1][i].imshow(feat, aspect="auto", origin="lower",
                              cmap="gray")
        axes[1][i].set_title(f"feature {i}", fontsize=8)
        for ax in (axes[0][i], axes[1][i]):
            ax.set_xticks([])
            ax.set_yticks([])
    fig.tight_layout()
    fig.canvas.draw()
    buf = np.asarray(fig.canvas.buffer_rgba())[:, :, :3].copy()
    plt.close(fig)
    Image.fromarray(buf).save(path, pnginfo=_png_info(meta))
