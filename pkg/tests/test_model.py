"""Network architecture tests.

Spectral normalization is checked against torch.linalg SVD, the patch
critic's receptive field is measured through autograd rather than derived
from the layer list, and the dense blocks are pinned by closed forms that
hold exactly (zeroed weights, zero residual scale).
"""

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from echovision.networks import (
    AudioEncoder,
    AudioEncoderConfig,
    Discriminator,
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    ResidualDenseBlock,
    RRDB,
    SNConv2d,
    count_parameters,
    spectral_normalize,
)

torch.manual_seed(0)


# hand-derived stage lengths for the default conv stack
GCC_STAGES = [8192, 2048, 512, 128, 64, 32, 16]
WAVE_STAGES = [4410, 1103, 276, 69, 35, 18, 9]
SPEC_STAGES = [33, 9, 3, 1, 1, 1, 1]


def test_encoder_stage_lengths():
    cfg = AudioEncoderConfig()
    assert AudioEncoder(cfg, (2, 8192)).stage_lengths == GCC_STAGES
    assert AudioEncoder(cfg, (2, 4410)).stage_lengths == WAVE_STAGES
    assert AudioEncoder(cfg, (2, 129, 33)).stage_lengths == SPEC_STAGES


def test_encoder_forward_shapes():
    cfg = AudioEncoderConfig()
    enc = AudioEncoder(cfg, (2, 8192))
    out = enc(torch.randn(3, 2, 8192))
    assert out.shape == (3, 512)

    spec = AudioEncoder(cfg, (2, 129, 33))
    out = spec(torch.randn(3, 2, 129, 33))
    assert out.shape == (3, 512)
    # spectrograms are folded into channels before the conv stack
    folded = spec(torch.randn(3, 258, 33))
    assert folded.shape == (3, 512)


def test_encoder_rejects_wrong_length():
    enc = AudioEncoder(AudioEncoderConfig(), (2, 8192))
    with pytest.raises(ValueError):
        enc(torch.randn(1, 2, 4410))
    with pytest.raises(ValueError):
        enc(torch.randn(1, 3, 8192))
    with pytest.raises(ValueError):
        AudioEncoderConfig(channels=(32, 64), kernels=(15,), strides=(4, 4))


def test_rdb_wiring_matches_manual_composition():
    """Dense concatenation and the scaled residual, executed by hand."""
    torch.manual_seed(1)
    block = ResidualDenseBlock(channels=2, growth=3, n_layers=3, beta=0.2)
    x = torch.randn(2, 2, 5, 5)
    f1 = F.leaky_relu(block.convs[0](x), 0.2)
    f2 = F.leaky_relu(block.convs[1](torch.cat([x, f1], 1)), 0.2)
    out = block.convs[2](torch.cat([x, f1, f2], 1))
    np.testing.assert_array_equal(block(x).detach().numpy(),
                                  (x + 0.2 * out).detach().numpy())
    # channel growth: 2, 2+3, 2+6 inputs; the last conv returns to 2
    assert [c.in_channels for c in block.convs] == [2, 5, 8]
    assert block.convs[-1].out_channels == 2


def test_rrdb_zero_scale_is_exact_identity():
    block = RRDB(channels=4, growth=3, n_layers=3, beta=0.0)
    x = torch.randn(2, 4, 6, 6)
    np.testing.assert_array_equal(block(x).detach().numpy(), x.numpy())


def test_rrdb_zero_weights_scale_input():
    """With all conv weights and biases zero, RRDB(x) = (1 + beta) * x."""
    beta = 0.25
    block = RRDB(channels=3, growth=2, n_layers=4, beta=beta)
    with torch.no_grad():
        for p in block.parameters():
            p.zero_()
        x = torch.randn(1, 3, 4, 4)
        np.testing.assert_allclose(block(x).numpy(), (1 + beta) * x.numpy(),
                                   rtol=1e-7)


def test_generator_output_shape_and_range():
    cfg = GeneratorConfig(n_rrdb=2, base_channels=16, growth_channels=8)
    gen = Generator(cfg, latent_dim=32)
    out = gen(torch.randn(2, 32))
    assert out.shape == (2, 1, 128, 128)
    assert out.min() > 0.0 and out.max() < 1.0
    assert cfg.n_upsample == 4


def test_generator_zero_weights_give_half():
    """Sigmoid of a zero pre-activation: every pixel exactly 0.5."""
    gen = Generator(GeneratorConfig(n_rrdb=1, base_channels=8,
                                    growth_channels=4), latent_dim=16)
    with torch.no_grad():
        for p in gen.parameters():
            p.zero_()
        out = gen(torch.randn(1, 16))
    np.testing.assert_array_equal(out.numpy(), np.full((1, 1, 128, 128), 0.5,
                                                       dtype=np.float32))


def test_generator_config_validates_resolutions():
    with pytest.raises(ValueError):
        GeneratorConfig(start_resolution=8, output_resolution=100)
    with pytest.raises(ValueError):
        GeneratorConfig(start_resolution=16, output_resolution=8)
    with pytest.raises(ValueError):
        GeneratorConfig(n_rrdb=0)


def test_discriminator_score_map_shape():
    disc = Discriminator(DiscriminatorConfig())
    disc.eval()
    out = disc(torch.randn(2, 1, 128, 128))
    assert out.shape == (2, 1, 14, 14)
    with pytest.raises(ValueError):
        disc(torch.randn(2, 3, 128, 128))
    with pytest.raises(ValueError):
        disc(torch.randn(2, 128, 128))


def test_discriminator_receptive_field_is_70():
    """Autograd probe: score (7,7) sees exactly input rows/cols [33, 103)."""
    torch.manual_seed(2)
    disc = Discriminator(DiscriminatorConfig())
    disc.eval()
    x = torch.randn(1, 1, 128, 128, requires_grad=True)
    disc(x)[0, 0, 7, 7].backward()
    g = x.grad[0, 0].abs().numpy()
    rows = np.nonzero(g.sum(axis=1))[0]
    cols = np.nonzero(g.sum(axis=0))[0]
    assert rows.min() == 33 and rows.max() == 102
    assert cols.min() == 33 and cols.max() == 102
    assert len(rows) == len(cols) == 70


def test_spectral_normalize_matches_svd():
    """Power iteration converges to the true largest singular value."""
    for seed in range(10):
        torch.manual_seed(seed)
        w = torch.randn(12, 7, dtype=torch.float64) * 3.0
        u = torch.randn(12, dtype=torch.float64)
        w_bar, _ = spectral_normalize(w, u, n_iter=50)
        sigma_true = torch.linalg.svdvals(w)[0]
        np.testing.assert_allclose((w / w_bar).mean().item(),
                                   sigma_true.item(), rtol=1e-8)
        assert abs(torch.linalg.svdvals(w_bar)[0].item() - 1.0) < 1e-8


def test_spectral_normalize_applies_to_conv_kernels():
    torch.manual_seed(3)
    w = torch.randn(8, 4, 3, 3) * 2.0
    u = torch.randn(8)
    w_bar, _ = spectral_normalize(w, u, n_iter=50)
    assert w_bar.shape == w.shape
    top = torch.linalg.svdvals(w_bar.reshape(8, -1))[0].item()
    assert abs(top - 1.0) < 1e-4


def test_spectral_estimate_monotone_in_iterations():
    """Each power step can only improve the Rayleigh estimate."""
    for seed in range(5):
        torch.manual_seed(seed)
        w = torch.randn(10, 10, dtype=torch.float64)
        u0 = torch.randn(10, dtype=torch.float64)
        estimates = []
        for n_iter in range(1, 12):
            w_bar, _ = spectral_normalize(w, u0.clone(), n_iter=n_iter)
            estimates.append((w / w_bar).reshape(-1)[0].item())
        diffs = np.diff(estimates)
        assert np.all(diffs >= -1e-12)


def test_spectral_normalize_rejects_zero_weight():
    with pytest.raises(ValueError):
        spectral_normalize(torch.zeros(4, 4), torch.randn(4), 1)


def sn_fd_check(w, u, n_iter, probe, tol):
    wg = w.clone().requires_grad_()
    w_bar, _ = spectral_normalize(wg, u.clone(), n_iter=n_iter)
    (w_bar * probe).sum().backward()
    h = 1e-4
    for idx in [(0, 0), (3, 2), (5, 4)]:
        wp, wm = w.clone(), w.clone()
        wp[idx] += h
        wm[idx] -= h
        fp = (spectral_normalize(wp, u.clone(), n_iter=n_iter)[0]
              * probe).sum()
        fm = (spectral_normalize(wm, u.clone(), n_iter=n_iter)[0]
              * probe).sum()
        fd = (fp - fm).item() / (2 * h)
        rel = abs(wg.grad[idx].item() - fd) / max(abs(fd), 1e-12)
        assert rel < tol


def test_spectral_normalize_gradient_matches_finite_differences():
    """With n_iter=0 sigma is ||W^T u|| for fixed u: the u v^T gradient is
    exact. With iterations it is exact only at convergence, so the
    converged case uses a matrix with a dominant singular value."""
    torch.manual_seed(4)
    u = torch.randn(6, dtype=torch.float64)
    probe = torch.randn(6, 5, dtype=torch.float64)

    w = torch.randn(6, 5, dtype=torch.float64)
    sn_fd_check(w, u, 0, probe, tol=1e-6)

    gapped = (5.0 * torch.outer(torch.randn(6, dtype=torch.float64),
                                torch.randn(5, dtype=torch.float64))
              + 0.1 * torch.randn(6, 5, dtype=torch.float64))
    sn_fd_check(gapped, u, 50, probe, tol=1e-3)


def test_snconv_eval_mode_is_stateless():
    torch.manual_seed(5)
    conv = SNConv2d(1, 4, 4, 2, 1, power_iterations=1)
    x = torch.randn(1, 1, 16, 16)

    conv.eval()
    u_before = conv.u.clone()
    a = conv(x).detach().numpy()
    b = conv(x).detach().numpy()
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(conv.u.numpy(), u_before.numpy())

    conv.train()
    conv(x)
    assert not np.array_equal(conv.u.detach().numpy(), u_before.numpy())


def test_snconv_constrains_lipschitz_bound():
    """After u converges, the effective weight has top singular value ~1."""
    torch.manual_seed(6)
    conv = SNConv2d(2, 6, 4, 2, 1, power_iterations=1)
    with torch.no_grad():
        conv.conv.weight.mul_(7.0)  # far above unit norm
    conv.train()
    x = torch.randn(1, 2, 16, 16)
    for _ in range(50):
        conv(x)
    w = conv.conv.weight
    w_bar, _ = spectral_normalize(w, conv.u, n_iter=0)
    top = torch.linalg.svdvals(w_bar.reshape(w.shape[0], -1))[0].item()
    assert top <= 1.01
    assert top >= 0.99


def test_disabled_spectral_norm_is_plain_conv():
    torch.manual_seed(7)
    conv = SNConv2d(1, 3, 4, 2, 1, enabled=False)
    x = torch.randn(1, 1, 8, 8)
    np.testing.assert_array_equal(conv(x).detach().numpy(),
                                  conv.conv(x).detach().numpy())


def test_parameter_counts_are_deterministic():
    torch.manual_seed(8)
    a = Generator(GeneratorConfig(), latent_dim=512)
    torch.manual_seed(8)
    b = Generator(GeneratorConfig(), latent_dim=512)
    for pa, pb in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(pa.detach().numpy(),
                                      pb.detach().numpy())
    assert count_parameters(a) == count_parameters(b) > 1_000_000
