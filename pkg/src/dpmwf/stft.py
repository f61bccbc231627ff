"""Forward/inverse STFT with square-root Hann analysis and synthesis windows.

Conventions
-----------
* Frames are taken from a zero-padded copy of the signal: ``frame_size -
  hop_size`` zeros are prepended and enough zeros are appended so that every
  input sample is covered by the full set of overlapping analysis frames.
  The frame count is ``T = ceil((frame_size - hop_size + N) / hop_size)``,
  equivalently ``floor((N_padded - frame_size) / hop_size) + 1`` with
  ``N_padded = (T - 1) * hop_size + frame_size``.
* One-sided spectra (``F = frame_size // 2 + 1`` bins); real input is
  reconstructed through Hermitian symmetry.
* All transforms run in double precision regardless of the input dtype;
  downstream covariance products amplify rounding error otherwise.
* Energy bookkeeping: with one-sided bin weights (1 for DC/Nyquist, 2
  elsewhere), ``sum_w |X|^2 == frame_size * sum x^2`` because the squared
  analysis window satisfies constant overlap-add with unit sum.

All functions are pure and safe to call from multiple threads.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["StftConfig", "MultichannelSpectrogram", "analyze", "synthesize"]

_COLA_TOL = 1e-10


def sqrt_hann_window(frame_size):
    """Periodic square-root Hann window: ``w[n] = sin(pi * n / frame_size)``."""
    n = np.arange(frame_size)
    return np.sin(np.pi * n / frame_size)


def _ola_weight(window_sq, hop, num_frames):
    """Overlap-added squared window over ``(num_frames - 1) * hop + len(w)``."""
    frame = len(window_sq)
    out = np.zeros((num_frames - 1) * hop + frame)
    for t in range(num_frames):
        out[t * hop : t * hop + frame] += window_sq
    return out


@dataclass
class StftConfig:
    """STFT parameters; defaults give a 512/256 sqrt-Hann transform at 32 kHz."""

    frame_size: int = 512
    hop_size: int = 256
    sample_rate: int = 32000
    window: str = "sqrt-hann"

    def __post_init__(self):
        if self.window != "sqrt-hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.frame_size % 2 != 0:
            raise ValueError("frame_size must be even")
        if not 0 < self.hop_size <= self.frame_size:
            raise ValueError("hop_size must satisfy 0 < hop_size <= frame_size")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        # Constant-overlap-add check on the analysis*synthesis window product
        # over one hop period in the fully-overlapped interior.
        w2 = sqrt_hann_window(self.frame_size) ** 2
        periods = self.frame_size // self.hop_size + 1
        ola = _ola_weight(w2, self.hop_size, 2 * periods)
        interior = ola[self.frame_size : self.frame_size + self.hop_size]
        if interior.max() - interior.min() > _COLA_TOL * interior.mean():
            raise ValueError(
                f"window/hop pair violates constant overlap-add: "
                f"hop {self.hop_size} of frame {self.frame_size}"
            )

    @property
    def num_bins(self):
        return self.frame_size // 2 + 1

    @property
    def pad_left(self):
        return self.frame_size - self.hop_size

    def num_frames(self, num_samples):
        """Frame count for a signal of ``num_samples`` samples."""
        return -(-(self.pad_left + num_samples) // self.hop_size)

    def bin_frequencies(self):
        """Center frequency in Hz of each of the ``num_bins`` bins."""
        return np.arange(self.num_bins) * self.sample_rate / self.frame_size

    def frame_times(self, num_frames):
        """Center time in seconds of each analysis frame."""
        starts = np.arange(num_frames) * self.hop_size - self.pad_left
        return (starts + self.frame_size / 2) / self.sample_rate


@dataclass
class MultichannelSpectrogram:
    """T x F grid of M-dimensional complex vectors (STFT of an M-channel signal)."""

    data: np.ndarray  # (T, F, M) complex128
    config: StftConfig = field(default_factory=StftConfig)
    num_samples: int | None = None  # original length, kept for exact inversion

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise ValueError("spectrogram data must have shape (T, F, M)")
        if self.data.shape[1] != self.config.num_bins:
            raise ValueError(
                f"bin count {self.data.shape[1]} inconsistent with "
                f"frame_size {self.config.frame_size}"
            )

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def num_bins(self):
        return self.data.shape[1]

    @property
    def num_channels(self):
        return self.data.shape[2]


def _as_2d(signal):
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim == 1:
        signal = signal[np.newaxis, :]
    if signal.ndim != 2:
        raise ValueError("signal must be 1-D or (channels, samples)")
    return signal


def analyze(signal, config=None):
    """STFT of an ``(M, N)`` (or 1-D) real signal.

    Returns a :class:`MultichannelSpectrogram` with data shaped ``(T, F, M)``.
    Raises ``ValueError`` on empty or non-finite input, or when the signal is
    shorter than one frame.
    """
    if config is None:
        config = StftConfig()
    x = _as_2d(signal)
    n_ch, n_samp = x.shape
    if n_samp == 0 or n_ch == 0:
        raise ValueError("empty signal")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite samples")
    if n_samp < config.frame_size:
        raise ValueError(
            f"signal length {n_samp} shorter than one frame ({config.frame_size})"
        )

    frame, hop = config.frame_size, config.hop_size
    n_frames = config.num_frames(n_samp)
    padded_len = (n_frames - 1) * hop + frame
    padded = np.zeros((n_ch, padded_len))
    padded[:, config.pad_left : config.pad_left + n_samp] = x

    window = sqrt_hann_window(frame)
    starts = np.arange(n_frames) * hop
    # (M, T, frame) strided view of all analysis frames
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame, axis=1)[:, starts]
    spec = np.fft.rfft(frames * window, axis=2)  # (M, T, F)
    return MultichannelSpectrogram(
        data=np.ascontiguousarray(spec.transpose(1, 2, 0)),
        config=config,
        num_samples=n_samp,
    )


def synthesize(spec, num_samples=None):
    """Inverse STFT by windowed overlap-add, returning ``(M, N)`` samples.

    The overlap-added product of analysis and synthesis windows is divided
    out, so ``synthesize(analyze(x))`` reproduces ``x`` to machine precision.
    ``num_samples`` overrides the length recorded by :func:`analyze`.
    """
    if not isinstance(spec, MultichannelSpectrogram):
        raise TypeError("expected a MultichannelSpectrogram")
    config = spec.config
    frame, hop = config.frame_size, config.hop_size
    n_frames, n_bins, n_ch = spec.data.shape
    if n_frames < 1:
        raise ValueError("spectrogram has no frames")

    window = sqrt_hann_window(frame)
    frames = np.fft.irfft(spec.data.transpose(2, 0, 1), n=frame, axis=2)  # (M, T, frame)
    frames *= window

    padded_len = (n_frames - 1) * hop + frame
    out = np.zeros((n_ch, padded_len))
    for t in range(n_frames):
        out[:, t * hop : t * hop + frame] += frames[:, t]

    weight = _ola_weight(window**2, hop, n_frames)
    live = weight > 1e-12
    out[:, live] /= weight[live]
    out[:, ~live] = 0.0

    if num_samples is None:
        num_samples = spec.num_samples
    if num_samples is None:
        num_samples = padded_len - 2 * config.pad_left
    end = config.pad_left + num_samples
    if end > padded_len:
        raise ValueError(
            f"requested {num_samples} samples but spectrogram covers at most "
            f"{padded_len - config.pad_left}"
        )
    return out[:, config.pad_left : end].copy()
