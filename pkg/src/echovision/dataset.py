"""Sample persistence, split bookkeeping and batch assembly.

On disk a dataset is a directory of per-sample WAV/PNG files plus a
JSON-lines manifest: a header line carrying the shared probe and recording
layout, then one entry per sample with keys id, wav, depth_png, gray_png,
split, meta. Depth PNGs store millimeters as unsigned 16-bit with 0
marking invalid pixels.
"""

import json
import numpy as np
from dataclasses import dataclass, field
from pathlib import Path
from PIL import Image

from .signal import (BinauralRecording, ChirpSource, read_wav, write_wav,
                     augment_window, add_noise, encode_gcc,
                     encode_spectrogram, next_pow2)

MANIFEST_NAME = "manifest.jsonl"
DEPTH_MM_PER_M = 1000.0
MAX_DEPTH_M = 10.0
SPLITS = ("train", "val", "test")
ENCODINGS = ("waveform", "gcc", "spectrogram")
TARGETS = ("depth", "grayscale")

# Shared per-sample layout keys lifted from sample meta into the header.
_HEADER_KEYS = ("f_start", "f_end", "chirp_duration", "sample_rate",
                "window_len", "nominal_start", "jitter_frac", "emit_index")


@dataclass
class DatasetManifest:
    root: Path
    header: dict
    entries: list

    def __post_init__(self):
        self.root = Path(self.root)
        seen = set()
        for e in self.entries:
            if e["id"] in seen:
                raise ValueError(f"duplicate sample id {e['id']}")
            seen.add(e["id"])
            if e["split"] not in SPLITS:
                raise ValueError(f"unknown split {e['split']} for {e['id']}")

    def entries_for(self, split):
        return [e for e in self.entries if e["split"] == split]

    def chirp(self):
        h = self.header
        from .signal import synthesize_chirp

        return synthesize_chirp(h["f_start"], h["f_end"],
                                h["chirp_duration"], h["sample_rate"])

    def save(self):
        path = self.root / MANIFEST_NAME
        lines = [json.dumps({"kind": "header", **self.header}, sort_keys=True)]
        for e in self.entries:
            lines.append(json.dumps(e, sort_keys=True))
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load(cls, root):
        root = Path(root)
        path = root if root.name.endswith(".jsonl") else root / MANIFEST_NAME
        root = path.parent
        lines = path.read_text().splitlines()
        if not lines:
            raise ValueError(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.pop("kind", None) != "header":
            raise ValueError(f"{path}: first line is not the header record")
        entries = [json.loads(ln) for ln in lines[1:] if ln.strip()]
        m = cls(root=root, header=header, entries=entries)
        for e in entries:
            for key in ("wav", "depth_png", "gray_png"):
                if not (root / e[key]).exists():
                    raise FileNotFoundError(
                        f"sample {e['id']}: missing file {root / e[key]}"
                    )
        return m


def save_samples(samples, root, extra_header=None):
    """Persist SceneSamples under root and return the manifest.

    Audio goes out as 2-channel float WAV (lossless), depth as 16-bit
    millimeter PNG (invalid pixels stored as 0), grayscale as 8-bit PNG.
    extra_header entries (e.g. a config hash) land in the manifest header.
    """
    if not samples:
        raise ValueError("no samples to save")
    root = Path(root)
    for sub in ("audio", "depth", "gray"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    header = {k: samples[0].meta[k] for k in _HEADER_KEYS}
    if extra_header:
        for k, v in extra_header.items():
            if k in header:
                raise ValueError(f"extra_header key {k!r} collides with layout")
            header[k] = v
    entries = []
    for s in samples:
        for k in _HEADER_KEYS:
            if s.meta[k] != header[k]:
                raise ValueError(
                    f"sample {s.meta['scene_id']} disagrees on {k}: "
                    f"{s.meta[k]} vs {header[k]}"
                )
        sid = s.meta["scene_id"]
        wav_rel = f"audio/{sid}.wav"
        depth_rel = f"depth/{sid}.png"
        gray_rel = f"gray/{sid}.png"
        write_wav(root / wav_rel, s.recording)

        mm = np.zeros(s.depth.shape, dtype=np.uint16)
        valid = s.valid_mask
        mm[valid] = np.clip(np.round(s.depth[valid] * DEPTH_MM_PER_M),
                            1, 65535).astype(np.uint16)
        Image.fromarray(mm).save(root / depth_rel)

        gray8 = np.clip(np.round(s.grayscale * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(gray8).save(root / gray_rel)

        meta = {k: v for k, v in s.meta.items() if k not in _HEADER_KEYS}
        meta["depth_unit"] = "mm"
        entries.append({
            "id": sid,
            "wav": wav_rel,
            "depth_png": depth_rel,
            "gray_png": gray_rel,
            "split": "train",
            "meta": meta,
        })
    manifest = DatasetManifest(root=root, header=header, entries=entries)
    manifest.save()
    return manifest


def split(manifest, fractions, rng_seed):
    """Reassign train/val/test disjointly and deterministically.

    Fractions must sum to 1; a nonzero fraction that would receive zero
    samples is an error.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError(f"need three nonnegative fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(manifest.entries)
    bounds = [int(round(sum(fractions[:k + 1]) * n)) for k in range(3)]
    counts = [bounds[0], bounds[1] - bounds[0], n - bounds[1]]
    for frac, count, name in zip(fractions, counts, SPLITS):
        if frac > 0 and count == 0:
            raise ValueError(
                f"{name} fraction {frac} yields zero of {n} samples"
            )
    order = np.random.default_rng(rng_seed).permutation(n)
    assignment = {}
    pos = 0
    for count, name in zip(counts, SPLITS):
        for i in order[pos:pos + count]:
            assignment[int(i)] = name
        pos += count
    entries = []
    for i, e in enumerate(manifest.entries):
        e2 = dict(e)
        e2["split"] = assignment[i]
        entries.append(e2)
    out = DatasetManifest(root=manifest.root, header=dict(manifest.header),
                          entries=entries)
    out.save()
    return out


def load_sample(manifest, entry):
    """One entry back into arrays; failures name the offending sample."""
    root = manifest.root
    try:
        rec = read_wav(root / entry["wav"])
        mm = np.asarray(Image.open(root / entry["depth_png"]), dtype=np.float64)
        gray8 = np.asarray(Image.open(root / entry["gray_png"]), dtype=np.float64)
    except Exception as exc:
        raise IOError(f"sample {entry['id']}: failed to load ({exc})") from exc
    valid = mm > 0
    depth = mm / DEPTH_MM_PER_M
    return rec, depth, gray8 / 255.0, valid


@dataclass
class Batch:
    """Model-ready arrays for one batch of samples."""

    inputs: np.ndarray
    targets: np.ndarray
    masks: np.ndarray
    encoding: str
    target: str
    ids: list = field(default_factory=list)

    def __post_init__(self):
        b = self.inputs.shape[0]
        if not (self.targets.shape[0] == self.masks.shape[0] == b):
            raise ValueError("batch dimensions disagree across fields")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target}")
        if self.encoding in ("waveform", "gcc") and self.inputs.shape[1] != 2:
            raise ValueError(
                f"{self.encoding} inputs must have 2 channels, "
                f"got {self.inputs.shape[1]}"
            )


def encoded_input_shape(manifest, encoding, spec_window=256, spec_hop=128):
    """(channels, ...) shape produced by load_batch for one sample."""
    w = int(manifest.header["window_len"])
    if encoding == "waveform":
        return (2, w)
    if encoding == "gcc":
        return (2, next_pow2(w))
    if encoding == "spectrogram":
        frames = (w - spec_window) // spec_hop + 1
        return (2, spec_window // 2 + 1, frames)
    raise ValueError(f"unknown encoding {encoding}")


def load_batch(manifest, split_name, indices, encoding, target,
               augment=False, rng_seed=0, noise_sigma2=0.1,
               spec_window=256, spec_hop=128):
    """Assemble one Batch from the given split.

    Training-time augmentation jitters the cut window and adds Gaussian
    noise before encoding; evaluation loads are bit-stable. Depth targets
    are normalized to [0,1] by the fixed 10 m range; invalid pixels carry
    mask false and a zero target.
    """
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding}")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target}")
    entries = manifest.entries_for(split_name)
    if not entries:
        raise ValueError(f"split {split_name!r} is empty")
    h = manifest.header
    chirp = manifest.chirp()
    window_len = int(h["window_len"])
    nominal = int(h["nominal_start"])
    jitter = float(h["jitter_frac"])

    inputs, targets, masks, ids = [], [], [], []
    for j, idx in enumerate(indices):
        if not 0 <= idx < len(entries):
            raise IndexError(
                f"index {idx} out of range for split {split_name!r} "
                f"of {len(entries)} samples"
            )
        entry = entries[idx]
        rec, depth, gray, valid = load_sample(manifest, entry)
        if augment:
            seeds = np.random.SeedSequence((rng_seed, j)).generate_state(3)
            rec = augment_window(rec, window_len, nominal, jitter,
                                 int(seeds[0]))
            rec = BinauralRecording(
                left=add_noise(rec.left, noise_sigma2, int(seeds[1])),
                right=add_noise(rec.right, noise_sigma2, int(seeds[2])),
                sample_rate=rec.sample_rate,
            )
        else:
            rec = augment_window(rec, window_len, nominal, 0.0, 0)

        if encoding == "waveform":
            x = np.stack([rec.left, rec.right])
        elif encoding == "gcc":
            g = encode_gcc(rec, chirp)
            x = np.stack([g.left_corr, g.right_corr])
        else:
            sp = encode_spectrogram(rec, window=spec_window, hop=spec_hop)
            x = np.stack([sp.left_mag, sp.right_mag])

        if target == "depth":
            t = np.where(valid, depth / MAX_DEPTH_M, 0.0)
            m = valid
        else:
            t = gray
            m = np.ones_like(gray, dtype=bool)

        inputs.append(x)
        targets.append(t[None])
        masks.append(m[None])
        ids.append(entry["id"])
    return Batch(
        inputs=np.stack(inputs),
        targets=np.stack(targets),
        masks=np.stack(masks),
        encoding=encoding,
        target=target,
        ids=ids,
    )
