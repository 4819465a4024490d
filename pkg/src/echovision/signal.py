"""Probe-signal synthesis, GCC-PHAT features and training-time augmentations.

The emitted probe is a short linear frequency sweep. Each recorded ear is
whitened-cross-correlated against the probe (phase transform), which turns
echo arrival times into sharp correlation peaks that a network can read as
range information.
"""

import numpy as np
from dataclasses import dataclass, field
from scipy.io import wavfile

# Defaults for the probe sweep. The sweep band and window length are
# configurable everywhere; these values cover an ordinary indoor scale
# (100 ms window ~ 17 m of round trip at c = 343 m/s).
DEFAULT_SAMPLE_RATE = 44100
DEFAULT_F_START = 20.0
DEFAULT_F_END = 20000.0
DEFAULT_CHIRP_DURATION = 0.003
DEFAULT_WINDOW_LEN = 4410

# Relative floor for the PHAT denominator; spectral nulls would otherwise
# divide by ~0.
PHAT_EPS_REL = 1e-12


@dataclass
class ChirpSource:
    """The emitted sweep: reference signal for matched filtering."""

    samples: np.ndarray
    sample_rate: float
    f_start: float
    f_end: float
    duration: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        n = len(self.samples)
        if abs(self.duration * self.sample_rate - n) > 1.0:
            raise ValueError(
                f"chirp length {n} inconsistent with duration "
                f"{self.duration}s at {self.sample_rate}Hz"
            )
        if np.max(np.abs(self.samples)) > 1.0 + 1e-12:
            raise ValueError("chirp amplitude exceeds 1")
        if not (self.f_start < self.f_end <= self.sample_rate / 2):
            raise ValueError(
                f"need f_start < f_end <= Nyquist, got "
                f"({self.f_start}, {self.f_end}) at fs={self.sample_rate}"
            )


@dataclass
class BinauralRecording:
    """Two time-aligned ear waveforms sharing one sample rate."""

    left: np.ndarray
    right: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        if len(self.left) != len(self.right):
            raise ValueError(
                f"channel lengths differ: {len(self.left)} vs {len(self.right)}"
            )
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self):
        return len(self.left)


@dataclass
class GccFeature:
    """Per-ear whitened cross-correlation sequences (one value per lag)."""

    left_corr: np.ndarray
    right_corr: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if len(self.left_corr) != len(self.right_corr):
            raise ValueError("GCC channels must share length")


@dataclass
class SpectrogramFeature:
    """Per-ear STFT magnitudes, shape (freq bins, frames)."""

    left_mag: np.ndarray
    right_mag: np.ndarray
    hop: int
    window: int

    def __post_init__(self):
        if self.left_mag.shape != self.right_mag.shape:
            raise ValueError("spectrogram channels must share shape")


def synthesize_chirp(f_start=DEFAULT_F_START, f_end=DEFAULT_F_END,
                     duration=DEFAULT_CHIRP_DURATION,
                     sample_rate=DEFAULT_SAMPLE_RATE):
    """Linear frequency sweep with constant unit envelope.

    Instantaneous frequency ramps from ``f_start`` at t=0 to ``f_end`` at
    t=duration. Raises ``ValueError`` for a non-positive duration or a band
    violating Nyquist.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if not (f_start < f_end <= sample_rate / 2):
        raise ValueError(
            f"need f_start < f_end <= Nyquist, got ({f_start}, {f_end}) "
            f"at fs={sample_rate}"
        )
    n = int(round(duration * sample_rate))
    t = np.arange(n, dtype=np.float64) / sample_rate
    rate = (f_end - f_start) / duration
    phase = 2.0 * np.pi * (f_start * t + 0.5 * rate * t * t)
    return ChirpSource(np.sin(phase), sample_rate, f_start, f_end, duration)


def next_pow2(n):
    """Smallest power of two >= n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 1 << (int(n) - 1).bit_length()


def gcc_phat(x, source):
    """Whitened cross-correlation of ``x`` against the probe sweep.

    The cross-spectrum of ``x`` and the probe is normalized to unit
    magnitude per frequency bin (phase transform) and inverse-transformed,
    so each acoustic arrival shows up as a sharp peak at its lag. The
    transform length is the next power of two >= len(x); the probe is
    zero-padded to that length; the output has exactly that length.
    """
    x = np.asarray(x, dtype=np.float64)
    s = source.samples
    if len(x) < len(s):
        raise ValueError(
            f"signal shorter than probe: {len(x)} < {len(s)}"
        )
    if not np.any(x):
        raise ValueError("all-zero signal: whitening undefined")
    if not np.any(s):
        raise ValueError("all-zero probe: whitening undefined")
    n = next_pow2(len(x))
    cross = np.fft.rfft(x, n=n) * np.conj(np.fft.rfft(s, n=n))
    mag = np.abs(cross)
    denom = np.maximum(mag, PHAT_EPS_REL * mag.max())
    return np.fft.irfft(cross / denom, n=n)


def encode_gcc(rec, source):
    """Per-ear GCC-PHAT against the shared probe."""
    if rec.sample_rate != source.sample_rate:
        raise ValueError(
            f"sample rate mismatch: recording {rec.sample_rate}, "
            f"probe {source.sample_rate}"
        )
    return GccFeature(
        left_corr=gcc_phat(rec.left, source),
        right_corr=gcc_phat(rec.right, source),
        sample_rate=rec.sample_rate,
    )


def _stft_mag(x, window, hop):
    n_frames = (len(x) - window) // hop + 1
    idx = hop * np.arange(n_frames)[:, None] + np.arange(window)[None, :]
    frames = x[idx] * np.hanning(window)[None, :]
    return np.abs(np.fft.rfft(frames, axis=1)).T


def encode_spectrogram(rec, window=256, hop=128):
    """Hann-windowed STFT magnitude per ear, no padding at the edges.

    Frame count is floor((L - window) / hop) + 1.
    """
    if not (0 < hop <= window):
        raise ValueError(f"need 0 < hop <= window, got hop={hop} window={window}")
    if window > len(rec):
        raise ValueError(
            f"window {window} longer than recording {len(rec)}"
        )
    return SpectrogramFeature(
        left_mag=_stft_mag(rec.left, window, hop),
        right_mag=_stft_mag(rec.right, window, hop),
        hop=hop,
        window=window,
    )


def augment_window(rec, window_len, nominal_start, jitter_frac, rng_seed):
    """Cut a window of ``window_len`` samples with a jittered start.

    The start is nominal_start + U with U an integer drawn uniformly from
    [-jitter_frac * window_len, +jitter_frac * window_len]. The full jitter
    span must fit inside the recording.
    """
    if not (0 <= jitter_frac < 1):
        raise ValueError(f"jitter_frac must be in [0, 1), got {jitter_frac}")
    span = int(jitter_frac * window_len)
    if nominal_start - span < 0 or nominal_start + span + window_len > len(rec):
        raise ValueError(
            f"window [{nominal_start - span}, "
            f"{nominal_start + span + window_len}) exceeds recording "
            f"of {len(rec)} samples"
        )
    rng = np.random.default_rng(rng_seed)
    start = nominal_start + int(rng.integers(-span, span + 1)) if span else nominal_start
    return BinauralRecording(
        left=rec.left[start:start + window_len].copy(),
        right=rec.right[start:start + window_len].copy(),
        sample_rate=rec.sample_rate,
    )


def add_noise(x, sigma2_max, rng_seed):
    """Add zero-mean Gaussian noise with variance drawn from [0, sigma2_max)."""
    if sigma2_max < 0:
        raise ValueError("sigma2_max must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if sigma2_max == 0:
        return x.copy()
    rng = np.random.default_rng(rng_seed)
    sigma2 = rng.uniform(0.0, sigma2_max)
    return inject_noise(x, sigma2, rng)


def inject_noise(x, sigma2, rng):
    """Add i.i.d. N(0, sigma2) noise from an existing generator."""
    x = np.asarray(x, dtype=np.float64)
    if sigma2 == 0:
        return x.copy()
    return x + rng.normal(0.0, np.sqrt(sigma2), size=x.shape)


def first_echo_lag(corr, threshold=0.5, min_lag=0):
    """Lag of the earliest strong correlation peak.

    Returns the smallest lag >= min_lag whose |corr| reaches ``threshold``
    times the maximum over that range. The nearest reflector produces both
    the earliest and (after whitening) typically the strongest peak, so a
    relative threshold picks it out robustly.
    """
    mag = np.abs(np.asarray(corr))
    if min_lag >= len(mag):
        raise ValueError("min_lag beyond correlation length")
    tail = mag[min_lag:]
    hits = np.nonzero(tail >= threshold * tail.max())[0]
    return int(min_lag + hits[0])


def write_wav(path, rec):
    """Store a recording as 2-channel 32-bit float WAV."""
    data = np.stack([rec.left, rec.right], axis=1).astype(np.float32)
    wavfile.write(str(path), int(rec.sample_rate), data)


def read_wav(path):
    """Load a 2-channel float WAV back into a BinauralRecording."""
    fs, data = wavfile.read(str(path))
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected 2-channel WAV, got shape {data.shape}")
    return BinauralRecording(
        left=data[:, 0], right=data[:, 1], sample_rate=float(fs)
    )
