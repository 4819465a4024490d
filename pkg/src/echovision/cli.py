"""Command-line pipeline: simulate, featurize, train, evaluate.

Every command is non-interactive, exits nonzero with a message on any
failure, and stamps its artifacts with the resolved config hash.
"""

import argparse
import sys
import numpy as np
from pathlib import Path

from .config import load_run_config, config_hash

ENCODING_LABELS = {"gcc": "GCC", "waveform": "Waveforms",
                   "spectrogram": "Spectrograms"}
ARCH_LABEL = "EchoVision"


def _label(encoding):
    return f"{ARCH_LABEL} + {ENCODING_LABELS[encoding]}"


def cmd_simulate(args):
    from .sim import generate_dataset
    from .dataset import save_samples, split

    cfg = load_run_config(args.config)
    samples = generate_dataset(args.n, cfg.sampler, args.seed)
    manifest = save_samples(samples, args.out,
                            extra_header={"config_hash": config_hash(cfg)})
    split(manifest, cfg.split_fractions, args.seed)
    print(f"wrote {len(manifest.entries)} samples under {args.out}")
    return 0


def cmd_featurize(args):
    from .archive import save_archive
    from .dataset import DatasetManifest, load_batch
    from .viz import save_feature_mosaic

    manifest = DatasetManifest.load(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    archive_path = out / f"features_{args.encoding}.zip"
    mosaic_path = out / f"features_{args.encoding}.png"
    if archive_path.exists() and not args.force:
        raise FileExistsError(
            f"{archive_path} exists; pass --force to overwrite"
        )
    arrays = {}
    ids = []
    waveforms = []
    feats = []
    for split_name in ("train", "val", "test"):
        entries = manifest.entries_for(split_name)
        for start in range(0, len(entries), 16):
            idx = list(range(start, min(start + 16, len(entries))))
            wave = load_batch(manifest, split_name, idx, "waveform", "depth",
                              augment=False)
            enc = (wave if args.encoding == "waveform" else
                   load_batch(manifest, split_name, idx, args.encoding,
                              "depth", augment=False))
            for j, sid in enumerate(enc.ids):
                arrays[sid] = enc.inputs[j].astype(np.float32)
                ids.append(sid)
                if len(waveforms) < 4:
                    waveforms.append(wave.inputs[j])
                    feats.append(enc.inputs[j])
    meta = {"encoding": args.encoding, "ids": ids,
            "config_hash": manifest.header.get("config_hash", "")}
    save_archive(archive_path, arrays, meta=meta)
    save_feature_mosaic(mosaic_path, waveforms, feats,
                        meta={"config_hash": meta["config_hash"]})
    print(f"wrote {len(ids)} {args.encoding} features to {archive_path}")
    return 0


def cmd_train(args):
    from .dataset import DatasetManifest
    from .training import train_loop

    overrides = {}
    if args.max_steps is not None:
        overrides["training.max_steps"] = args.max_steps
    if args.seed is not None:
        overrides["training.seed"] = args.seed
    cfg = load_run_config(args.config, overrides)
    manifest = DatasetManifest.load(args.data)
    state = train_loop(manifest, cfg.training, cfg.encoder, cfg.generator,
                       cfg.discriminator, args.out, resume_from=args.resume,
                       config_hash=config_hash(cfg))
    print(f"trained to step {state.step}; artifacts under {args.out}")
    return 0


def cmd_evaluate(args):
    from .dataset import DatasetManifest
    from .metrics import (evaluate_model, format_metric_table,
                          format_l1_table, report_to_json)
    from .training import load_checkpoint
    from .viz import save_eval_mosaic
    from .metrics import predict_split

    manifest = DatasetManifest.load(args.data)
    state, cfg, enc_cfg, gen_cfg, disc_cfg, shape, run_hash = (
        load_checkpoint(args.checkpoint))
    run_hash = run_hash or manifest.header.get("config_hash", "")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report, l1 = evaluate_model(state.encoder, state.generator, manifest,
                                args.split, cfg.encoding, cfg.target)
    label = _label(cfg.encoding)
    extra = {"config_hash": run_hash, "split": args.split, "label": label,
             "adversarial": cfg.adversarial, "target": cfg.target}
    (out / "report.json").write_text(report_to_json(report, l1, extra) + "\n")

    footer = f"\nconfig_hash: {run_hash}\n"
    if report is not None:
        (out / "metrics_table.txt").write_text(
            format_metric_table([(label, report)]) + footer)
    if cfg.target == "depth":
        row = ((label, None, l1) if cfg.adversarial
               else (label, l1, None))
        l1_text = format_l1_table([row], [])
    else:
        l1_text = format_l1_table([], [(label, l1)])
    (out / "l1_table.txt").write_text(l1_text + footer)

    preds, targets, _ = predict_split(state.encoder, state.generator,
                                      manifest, args.split, cfg.encoding,
                                      cfg.target)
    save_eval_mosaic(out / "predictions.png", targets, preds,
                     meta={"config_hash": run_hash})
    print(f"evaluation of {args.split} split written to {out}")
    return 0


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive count, got {value}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="echovision",
        description="Simulate binaural echoes, train and evaluate the "
                    "audio-to-depth generator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a paired synthetic dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("featurize", help="precompute an input encoding")
    p.add_argument("--data", required=True, help="dataset directory or manifest")
    p.add_argument("--encoding", required=True,
                   choices=sorted(ENCODING_LABELS))
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="run the training loop")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics and tables for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
