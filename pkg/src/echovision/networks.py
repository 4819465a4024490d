"""The three networks: temporal audio encoder, dense-block image generator
with nearest-neighbor upsampling, and a patch discriminator whose convs are
spectrally normalized instead of batch-normalized.
"""

import math
import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from dataclasses import dataclass

LEAKY_SLOPE = 0.2


@dataclass
class AudioEncoderConfig:
    channels: tuple = (32, 64, 96, 128, 192, 256)
    kernels: tuple = (15, 11, 9, 7, 5, 5)
    strides: tuple = (4, 4, 4, 2, 2, 2)
    latent_dim: int = 512

    def __post_init__(self):
        if not (len(self.channels) == len(self.kernels) == len(self.strides)):
            raise ValueError("channels, kernels and strides must align")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be positive")


@dataclass
class GeneratorConfig:
    n_rrdb: int = 8
    base_channels: int = 64
    growth_channels: int = 32
    dense_layers_per_block: int = 5
    residual_scale: float = 0.2
    start_resolution: int = 8
    output_resolution: int = 128

    def __post_init__(self):
        if self.n_rrdb < 1:
            raise ValueError("n_rrdb must be >= 1")
        ratio = self.output_resolution / self.start_resolution
        n_up = math.log2(ratio) if ratio >= 1 else -1
        if n_up < 0 or 2 ** round(n_up) * self.start_resolution != self.output_resolution:
            raise ValueError(
                f"cannot reach {self.output_resolution} from "
                f"{self.start_resolution} by doubling"
            )

    @property
    def n_upsample(self):
        return int(math.log2(self.output_resolution // self.start_resolution))


@dataclass
class DiscriminatorConfig:
    n_layers: int = 3
    base_channels: int = 64
    use_spectral_norm: bool = True
    power_iterations: int = 1

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if self.power_iterations < 1:
            raise ValueError("power_iterations must be >= 1")


def l2normalize(v, eps=1e-12):
    return v / (v.norm() + eps)


def spectral_normalize(weight, u, n_iter=1):
    """Divide a weight by its power-iteration largest-singular-value estimate.

    The weight is flattened to 2-D (rows = output channels). ``n_iter``
    power steps refine the left singular vector estimate ``u``; with
    n_iter=0 the stored ``u`` is used as-is, which keeps evaluation-mode
    forwards stateless. Returns (normalized weight, updated u). The
    estimate and its pairing vector are treated as constants, so the
    gradient of sigma with respect to the weight is exactly u v^T.
    """
    w = weight.reshape(weight.shape[0], -1)
    if not torch.any(w != 0):
        raise ValueError("spectral norm of an all-zero weight is undefined")
    with torch.no_grad():
        u = l2normalize(u)
        for _ in range(n_iter):
            v = l2normalize(torch.mv(w.t(), u))
            u = l2normalize(torch.mv(w, v))
        v = l2normalize(torch.mv(w.t(), u))
    sigma = torch.dot(u, torch.mv(w, v))
    return weight / sigma, u


class SNConv2d(nn.Module):
    """Conv2d whose weight is spectrally normalized on every forward."""

    def __init__(self, in_ch, out_ch, kernel, stride, padding,
                 power_iterations=1, enabled=True):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, stride, padding)
        self.power_iterations = power_iterations
        self.enabled = enabled
        self.register_buffer("u", l2normalize(torch.randn(out_ch)))

    def forward(self, x):
        if not self.enabled:
            return self.conv(x)
        n_iter = self.power_iterations if self.training else 0
        w_bar, u_new = spectral_normalize(self.conv.weight, self.u, n_iter)
        if self.training:
            with torch.no_grad():
                self.u.copy_(u_new)
        return F.conv2d(x, w_bar, self.conv.bias, self.conv.stride,
                        self.conv.padding)


def conv1d_out_len(length, kernel, stride, padding):
    return (length + 2 * padding - kernel) // stride + 1


class AudioEncoder(nn.Module):
    """Strided 1-D conv stack mapping a 2-channel input to a latent vector.

    ``input_shape`` is the per-sample shape: (2, L) for waveform or
    correlation inputs, (2, F, T) for spectrograms, which are folded into
    2F channels over T frames.
    """

    def __init__(self, cfg, input_shape):
        super().__init__()
        self.cfg = cfg
        self.input_shape = tuple(int(s) for s in input_shape)
        if len(self.input_shape) == 2:
            in_ch, length = self.input_shape
        elif len(self.input_shape) == 3:
            in_ch = self.input_shape[0] * self.input_shape[1]
            length = self.input_shape[2]
        else:
            raise ValueError(f"unsupported input shape {input_shape}")
        self.convs = nn.ModuleList()
        self.stage_lengths = [length]
        prev = in_ch
        for ch, k, s in zip(cfg.channels, cfg.kernels, cfg.strides):
            self.convs.append(nn.Conv1d(prev, ch, k, s, padding=k // 2))
            length = conv1d_out_len(length, k, s, k // 2)
            if length < 1:
                raise ValueError(
                    f"input of length {self.stage_lengths[0]} collapses to "
                    f"nothing after stage {len(self.convs)}"
                )
            self.stage_lengths.append(length)
            prev = ch
        self.project = nn.Linear(prev * length, cfg.latent_dim)

    def forward(self, x):
        if x.dim() == 4:
            x = x.reshape(x.shape[0], -1, x.shape[-1])
        expect = (self.input_shape[0] * self.input_shape[1]
                  if len(self.input_shape) == 3 else self.input_shape[0],
                  self.stage_lengths[0])
        if tuple(x.shape[1:]) != expect:
            raise ValueError(
                f"encoder expected input {expect}, got {tuple(x.shape[1:])}"
            )
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LEAKY_SLOPE)
        return self.project(x.flatten(1))


class ResidualDenseBlock(nn.Module):
    """Densely connected convs with a scaled residual back to the input."""

    def __init__(self, channels, growth, n_layers, beta):
        super().__init__()
        self.beta = beta
        self.convs = nn.ModuleList()
        for i in range(n_layers - 1):
            self.convs.append(nn.Conv2d(channels + i * growth, growth, 3, 1, 1))
        self.convs.append(
            nn.Conv2d(channels + (n_layers - 1) * growth, channels, 3, 1, 1))

    def forward(self, x):
        feats = [x]
        for conv in self.convs[:-1]:
            feats.append(F.leaky_relu(conv(torch.cat(feats, 1)), LEAKY_SLOPE))
        out = self.convs[-1](torch.cat(feats, 1))
        return x + self.beta * out


class RRDB(nn.Module):
    """Three nested dense blocks with an outer scaled residual."""

    def __init__(self, channels, growth, n_layers, beta):
        super().__init__()
        self.beta = beta
        self.blocks = nn.ModuleList(
            ResidualDenseBlock(channels, growth, n_layers, beta)
            for _ in range(3)
        )

    def forward(self, x):
        h = x
        for block in self.blocks:
            h = block(h)
        return x + self.beta * h


class Generator(nn.Module):
    """Latent vector to single-channel image in [0, 1].

    The latent is projected to a low-resolution feature map, refined by a
    residual trunk, then repeatedly nearest-neighbor upsampled and
    convolved until the output resolution, ending in a sigmoid.
    """

    def __init__(self, cfg, latent_dim):
        super().__init__()
        self.cfg = cfg
        c = cfg.base_channels
        self.project = nn.Linear(latent_dim, c * cfg.start_resolution ** 2)
        self.trunk = nn.Sequential(*[
            RRDB(c, cfg.growth_channels, cfg.dense_layers_per_block,
                 cfg.residual_scale)
            for _ in range(cfg.n_rrdb)
        ])
        self.trunk_conv = nn.Conv2d(c, c, 3, 1, 1)
        self.up_convs = nn.ModuleList(
            nn.Conv2d(c, c, 3, 1, 1) for _ in range(cfg.n_upsample))
        self.hr_conv = nn.Conv2d(c, c, 3, 1, 1)
        self.out_conv = nn.Conv2d(c, 1, 3, 1, 1)

    def forward(self, z):
        s = self.cfg.start_resolution
        feat = self.project(z).reshape(z.shape[0], -1, s, s)
        x = feat + self.trunk_conv(self.trunk(feat))
        for conv in self.up_convs:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = F.leaky_relu(conv(x), LEAKY_SLOPE)
        x = F.leaky_relu(self.hr_conv(x), LEAKY_SLOPE)
        return torch.sigmoid(self.out_conv(x))


class Discriminator(nn.Module):
    """Fully convolutional patch critic on single-channel images.

    n_layers stride-2 convs, one stride-1 conv, then a 1-channel score
    head; kernel 4 throughout. No normalization other than the spectral
    weight normalization.
    """

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg

        def snconv(i, o, s):
            return SNConv2d(i, o, 4, s, 1,
                            power_iterations=cfg.power_iterations,
                            enabled=cfg.use_spectral_norm)

        layers = [snconv(1, cfg.base_channels, 2),
                  nn.LeakyReLU(LEAKY_SLOPE)]
        ch = cfg.base_channels
        for i in range(1, cfg.n_layers):
            nxt = cfg.base_channels * min(2 ** i, 8)
            layers += [snconv(ch, nxt, 2), nn.LeakyReLU(LEAKY_SLOPE)]
            ch = nxt
        nxt = cfg.base_channels * min(2 ** cfg.n_layers, 8)
        layers += [snconv(ch, nxt, 1), nn.LeakyReLU(LEAKY_SLOPE)]
        layers += [snconv(nxt, 1, 1)]
        self.net = nn.Sequential(*layers)

    def forward(self, img):
        if img.dim() != 4 or img.shape[1] != 1:
            raise ValueError(
                f"discriminator expected (B, 1, H, W), got {tuple(img.shape)}"
            )
        return self.net(img)


def count_parameters(module):
    return sum(p.numel() for p in module.parameters())
