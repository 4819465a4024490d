"""Alternating least-squares adversarial training with L1 regression.

One step is one discriminator update followed by one joint update of the
audio encoder and generator on lambda * adversarial + L1. All randomness
(batch choice, window jitter, noise draws) is derived statelessly from
(seed, step), so a run resumed from a checkpoint continues bit-identically
to one that never stopped.
"""

import csv
import numpy as np
import torch
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .archive import save_archive, load_archive
from .dataset import load_batch, encoded_input_shape, ENCODINGS, TARGETS
from .networks import (AudioEncoderConfig, GeneratorConfig,
                       DiscriminatorConfig, AudioEncoder, Generator,
                       Discriminator)

HISTORY_FIELDS = ("step", "d_loss", "g_adv", "l1")


@dataclass
class TrainConfig:
    lambda_adv: float = 0.1
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 16
    max_steps: int = 2000
    checkpoint_every: int = 500
    sample_dump_every: int = 500
    encoding: str = "gcc"
    target: str = "depth"
    seed: int = 0
    adversarial: bool = True
    augment: bool = True
    noise_sigma2: float = 0.1

    def __post_init__(self):
        problems = []
        if self.lambda_adv < 0:
            problems.append(f"lambda_adv must be >= 0, got {self.lambda_adv}")
        if self.lr_g <= 0 or self.lr_d <= 0:
            problems.append(f"learning rates must be > 0, got "
                            f"({self.lr_g}, {self.lr_d})")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_steps < 0:
            problems.append(f"max_steps must be >= 0, got {self.max_steps}")
        if self.encoding not in ENCODINGS:
            problems.append(f"unknown encoding {self.encoding!r}")
        if self.target not in TARGETS:
            problems.append(f"unknown target {self.target!r}")
        if self.target == "grayscale" and not self.adversarial:
            problems.append("grayscale runs train adversarially only")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class TrainState:
    encoder: AudioEncoder
    generator: Generator
    discriminator: Discriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    step: int = 0
    history: list = field(default_factory=list)


def lsgan_d_loss(real_scores, fake_scores):
    """Least-squares critic loss: real toward 1, fake toward 0."""
    return (0.5 * torch.mean((real_scores - 1.0) ** 2)
            + 0.5 * torch.mean(fake_scores ** 2))


def lsgan_g_loss(fake_scores):
    """Least-squares generator loss: fake toward 1."""
    return 0.5 * torch.mean((fake_scores - 1.0) ** 2)


def masked_l1(pred, target, mask):
    """Mean absolute error over mask-true pixels only."""
    m = mask.to(pred.dtype)
    n = m.sum()
    if n.item() == 0:
        raise ValueError("masked_l1 over an all-false mask is undefined")
    return (torch.abs(pred - target) * m).sum() / n


def build_state(cfg, enc_cfg, gen_cfg, disc_cfg, input_shape):
    """Fresh models and optimizers, initialized deterministically."""
    torch.manual_seed(cfg.seed)
    encoder = AudioEncoder(enc_cfg, input_shape)
    generator = Generator(gen_cfg, enc_cfg.latent_dim)
    discriminator = Discriminator(disc_cfg)
    opt_g = torch.optim.Adam(
        list(encoder.parameters()) + list(generator.parameters()),
        lr=cfg.lr_g, betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(discriminator.parameters(),
                             lr=cfg.lr_d, betas=(cfg.beta1, cfg.beta2))
    return TrainState(encoder=encoder, generator=generator,
                      discriminator=discriminator, opt_g=opt_g, opt_d=opt_d)


def _check_finite(value, name, step):
    if not torch.isfinite(value):
        raise RuntimeError(
            f"non-finite {name} ({float(value.detach())}) at step {step}; "
            f"aborting"
        )


def batch_tensors(batch):
    x = torch.from_numpy(np.ascontiguousarray(batch.inputs)).float()
    y = torch.from_numpy(np.ascontiguousarray(batch.targets)).float()
    m = torch.from_numpy(np.ascontiguousarray(batch.masks))
    return x, y, m


def train_step(state, batch, cfg):
    """One alternating update; returns the step's loss terms."""
    x, y, m = batch_tensors(batch)
    latent = state.encoder(x)
    fake = state.generator(latent)

    d_loss_val = 0.0
    g_adv = torch.zeros(())
    if cfg.adversarial:
        real_scores = state.discriminator(y)
        fake_scores = state.discriminator(fake.detach())
        d_loss = lsgan_d_loss(real_scores, fake_scores)
        _check_finite(d_loss, "d_loss", state.step)
        state.opt_d.zero_grad()
        d_loss.backward()
        state.opt_d.step()
        d_loss_val = float(d_loss.detach())
        g_adv = lsgan_g_loss(state.discriminator(fake))
        _check_finite(g_adv, "g_adv", state.step)

    l1 = masked_l1(fake, y, m)
    _check_finite(l1, "l1", state.step)
    g_loss = cfg.lambda_adv * g_adv + l1 if cfg.adversarial else l1
    state.opt_g.zero_grad()
    g_loss.backward()
    state.opt_g.step()

    state.step += 1
    return {"step": state.step, "d_loss": d_loss_val,
            "g_adv": float(g_adv.detach()), "l1": float(l1.detach())}


def _module_arrays(prefix, module):
    return {f"{prefix}/{k}": v.detach().cpu().numpy()
            for k, v in module.state_dict().items()}


def _optimizer_arrays(prefix, opt):
    arrays = {}
    sd = opt.state_dict()
    for pid, st in sd["state"].items():
        for k, v in st.items():
            arrays[f"{prefix}/{pid}/{k}"] = (
                v.detach().cpu().numpy() if torch.is_tensor(v)
                else np.asarray(v))
    groups = []
    for g in sd["param_groups"]:
        groups.append({k: v for k, v in g.items()})
    return arrays, groups


def save_checkpoint(path, state, cfg, enc_cfg, gen_cfg, disc_cfg,
                    input_shape, config_hash=""):
    """All parameters, optimizer moments and the config echo, atomically."""
    arrays = {}
    arrays.update(_module_arrays("enc", state.encoder))
    arrays.update(_module_arrays("gen", state.generator))
    arrays.update(_module_arrays("disc", state.discriminator))
    optg_arrays, optg_groups = _optimizer_arrays("optg", state.opt_g)
    optd_arrays, optd_groups = _optimizer_arrays("optd", state.opt_d)
    arrays.update(optg_arrays)
    arrays.update(optd_arrays)
    meta = {
        "step": state.step,
        "train": asdict(cfg),
        "encoder": asdict(enc_cfg),
        "generator": asdict(gen_cfg),
        "discriminator": asdict(disc_cfg),
        "input_shape": list(input_shape),
        "optg_groups": optg_groups,
        "optd_groups": optd_groups,
        "config_hash": config_hash,
    }
    save_archive(path, arrays, meta=meta)


def _load_module(prefix, module, arrays):
    sd = {}
    for k, v in module.state_dict().items():
        arr = arrays[f"{prefix}/{k}"]
        sd[k] = torch.from_numpy(np.ascontiguousarray(arr)).to(v.dtype)
    module.load_state_dict(sd)


def _load_optimizer(prefix, opt, arrays, groups):
    state = {}
    for name, arr in arrays.items():
        parts = name.split("/")
        if parts[0] != prefix:
            continue
        pid, key = int(parts[1]), parts[2]
        entry = state.setdefault(pid, {})
        entry[key] = torch.from_numpy(np.ascontiguousarray(arr))
    opt.load_state_dict({"state": state, "param_groups": groups})


def load_checkpoint(path):
    """Rebuild a TrainState (and its configs) from a checkpoint archive."""
    arrays, meta = load_archive(path)
    cfg = TrainConfig(**meta["train"])
    enc_cfg = AudioEncoderConfig(**{k: tuple(v) if isinstance(v, list) else v
                                    for k, v in meta["encoder"].items()})
    gen_cfg = GeneratorConfig(**meta["generator"])
    disc_cfg = DiscriminatorConfig(**meta["discriminator"])
    state = build_state(cfg, enc_cfg, gen_cfg, disc_cfg,
                        tuple(meta["input_shape"]))
    _load_module("enc", state.encoder, arrays)
    _load_module("gen", state.generator, arrays)
    _load_module("disc", state.discriminator, arrays)
    _load_optimizer("optg", state.opt_g, arrays, meta["optg_groups"])
    _load_optimizer("optd", state.opt_d, arrays, meta["optd_groups"])
    state.step = int(meta["step"])
    return (state, cfg, enc_cfg, gen_cfg, disc_cfg,
            tuple(meta["input_shape"]), meta.get("config_hash", ""))


def _step_seed(seed, salt, step):
    return int(np.random.SeedSequence((seed, salt, step)).generate_state(1)[0])


def write_history_csv(path, history, config_hash=""):
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash={config_hash}\n")
        writer = csv.DictWriter(f, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in HISTORY_FIELDS})


def train_loop(manifest, cfg, enc_cfg, gen_cfg, disc_cfg, out_dir,
               resume_from=None, config_hash=""):
    """Run train_step to cfg.max_steps with checkpoints and sample dumps."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_train = len(manifest.entries_for("train"))
    if n_train == 0:
        raise ValueError("train split is empty")
    input_shape = encoded_input_shape(manifest, cfg.encoding)

    if resume_from is not None:
        max_steps = cfg.max_steps
        state, cfg, enc_cfg, gen_cfg, disc_cfg, input_shape, old_hash = (
            load_checkpoint(resume_from))
        cfg.max_steps = max_steps
        config_hash = config_hash or old_hash
    else:
        state = build_state(cfg, enc_cfg, gen_cfg, disc_cfg, input_shape)

    def checkpoint(name):
        save_checkpoint(out_dir / name, state, cfg, enc_cfg, gen_cfg,
                        disc_cfg, input_shape, config_hash=config_hash)

    state.encoder.train()
    state.generator.train()
    state.discriminator.train()
    while state.step < cfg.max_steps:
        step = state.step
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 3, step)))
        indices = rng.choice(n_train, size=cfg.batch_size,
                             replace=n_train < cfg.batch_size)
        batch = load_batch(manifest, "train", [int(i) for i in indices],
                           cfg.encoding, cfg.target, augment=cfg.augment,
                           rng_seed=_step_seed(cfg.seed, 5, step),
                           noise_sigma2=cfg.noise_sigma2)
        logs = train_step(state, batch, cfg)
        state.history.append(logs)
        done = state.step
        if cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
            checkpoint(f"checkpoint_{done:07d}.ckpt")
        if cfg.sample_dump_every and done % cfg.sample_dump_every == 0:
            from .viz import save_prediction_grid

            with torch.no_grad():
                x, y, _ = batch_tensors(batch)
                fake = state.generator(state.encoder(x))
            save_prediction_grid(out_dir / f"samples_{done:07d}.png",
                                 fake.numpy()[:, 0], y.numpy()[:, 0],
                                 meta={"config_hash": config_hash,
                                       "step": str(done)})

    checkpoint("checkpoint_final.ckpt")
    write_history_csv(out_dir / "history.csv", state.history,
                      config_hash=config_hash)
    return state
