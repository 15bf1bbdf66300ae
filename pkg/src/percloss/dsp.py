"""Signal plumbing shared by every objective: WAV I/O, the common STFT
grid, least-squares overlap-add synthesis, and SNR-controlled mixing.

One analysis grid serves all losses: periodic Hann window of 512 samples
(32 ms at 16 kHz) with hop 256 (50% overlap), one-sided spectrum of 257
bins. Signals are zero-padded by half a window on both sides before
analysis so the frames cover the full signal; synthesis cuts the pad off.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.io import wavfile

from ._core import EPS, SAMPLE_RATE, as_samples, as_tensor

WINDOW_LEN = 512
HOP = 256
N_BINS = WINDOW_LEN // 2 + 1
_PAD = WINDOW_LEN // 2

# periodic Hann, matches the DFT-even convention used for COLA at 50% overlap
_WINDOW = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(WINDOW_LEN) / WINDOW_LEN)
_WINDOW_T = torch.from_numpy(_WINDOW)

SNR_CAP = 120.0


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex STFT on the shared grid.

    values has shape (frames, N_BINS); n_samples records the original
    signal length so synthesis can strip the analysis padding.
    """

    values: np.ndarray
    window_len: int = WINDOW_LEN
    hop: int = HOP
    n_samples: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[1] != self.window_len // 2 + 1:
            raise ValueError(
                f"spectrogram must be (frames, {self.window_len // 2 + 1}), got {v.shape}"
            )

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def load_wav(path) -> np.ndarray:
    """Read a 16 kHz mono RIFF/WAVE file as float64 samples in [-1, 1].

    PCM-16 is normalized by 32768; float-32 passes through. Other codecs,
    other rates (no silent resampling) and empty files are rejected.
    Multichannel input keeps channel 0 with a warning, never an average.
    """
    rate, data = wavfile.read(path)
    if rate != SAMPLE_RATE:
        raise ValueError(f"{path}: sample rate {rate} Hz, expected {SAMPLE_RATE} Hz")
    if data.ndim == 2:
        warnings.warn(f"{path}: {data.shape[1]} channels, keeping channel 0")
        data = data[:, 0]
    if data.size == 0:
        raise ValueError(f"{path}: no audio samples")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype}, need PCM-16 or float-32")
    if not np.all(np.isfinite(samples)):
        raise ValueError(f"{path}: non-finite samples")
    return samples


def save_wav(path, samples, fmt: str = "float32") -> None:
    """Write samples as a 16 kHz mono WAV, float-32 by default.

    fmt="pcm16" quantizes with rounding (max error one LSB). float-32
    output is never clipped.
    """
    x = as_samples(samples)
    if fmt == "float32":
        wavfile.write(path, SAMPLE_RATE, x.astype(np.float32))
    elif fmt == "pcm16":
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(path, SAMPLE_RATE, q)
    else:
        raise ValueError(f"unsupported format {fmt!r}")


def _frame(padded: np.ndarray) -> np.ndarray:
    n_frames = 1 + (padded.size - WINDOW_LEN) // HOP
    frames = np.lib.stride_tricks.sliding_window_view(padded, WINDOW_LEN)[:: HOP]
    return frames[:n_frames]


def stft(x) -> Spectrogram:
    """Analyze a signal on the shared 512/256 periodic-Hann grid."""
    x = as_samples(x)
    if x.size < WINDOW_LEN:
        raise ValueError(f"signal of {x.size} samples is shorter than one window ({WINDOW_LEN})")
    padded = np.concatenate([np.zeros(_PAD), x, np.zeros(_PAD)])
    values = np.fft.rfft(_frame(padded) * _WINDOW, axis=1)
    return Spectrogram(values=values, n_samples=x.size)


def istft_ls(spec: Spectrogram, target_len: int | None = None) -> np.ndarray:
    """Least-squares signal estimate from a (possibly modified) STFT.

    Single synthesis pass: per-frame inverse transform, window-weighted
    overlap-add, normalized by the summed squared windows. The analysis
    padding is stripped and the result is truncated or zero-padded to
    target_len (defaults to the recorded source length).
    """
    if target_len is None:
        target_len = spec.n_samples
    if target_len is None:
        raise ValueError("target_len required for a spectrogram without n_samples")
    values = np.asarray(spec.values, dtype=np.complex128)
    m = values.shape[0]
    if m == 0:
        raise ValueError("empty spectrogram")
    frames = np.fft.irfft(values, n=spec.window_len, axis=1) * _WINDOW
    covered = (m - 1) * spec.hop + spec.window_len
    num = np.zeros(covered)
    den = np.zeros(covered)
    wsq = _WINDOW**2
    for i in range(m):
        start = i * spec.hop
        num[start : start + spec.window_len] += frames[i]
        den[start : start + spec.window_len] += wsq
    out = np.zeros(target_len)
    avail = min(target_len, covered - _PAD)
    if avail > 0:
        d = den[_PAD : _PAD + avail]
        # Hann at 50% overlap keeps the window sum bounded away from zero
        # everywhere inside the unpadded region
        if not np.all(d > 1e-12):
            raise AssertionError("degenerate overlap-add normalization inside the signal region")
        out[:avail] = num[_PAD : _PAD + avail] / d
    return out


def _stft_t(x: torch.Tensor) -> torch.Tensor:
    padded = F.pad(x.reshape(1, -1), (_PAD, _PAD)).reshape(-1)
    frames = padded.unfold(0, WINDOW_LEN, HOP)
    return torch.fft.rfft(frames * _WINDOW_T, dim=1)


def _istft_t(values: torch.Tensor, target_len: int) -> torch.Tensor:
    m = values.shape[0]
    frames = torch.fft.irfft(values, n=WINDOW_LEN, dim=1) * _WINDOW_T
    covered = (m - 1) * HOP + WINDOW_LEN
    num = F.fold(
        frames.T.unsqueeze(0),
        output_size=(1, covered),
        kernel_size=(1, WINDOW_LEN),
        stride=(1, HOP),
    ).reshape(-1)
    wsq = (_WINDOW_T**2).expand(m, WINDOW_LEN)
    den = F.fold(
        wsq.T.unsqueeze(0),
        output_size=(1, covered),
        kernel_size=(1, WINDOW_LEN),
        stride=(1, HOP),
    ).reshape(-1)
    avail = min(target_len, covered - _PAD)
    out = num[_PAD : _PAD + avail] / den[_PAD : _PAD + avail]
    if avail < target_len:
        out = F.pad(out.reshape(1, -1), (0, target_len - avail)).reshape(-1)
    return out


def snr_db(clean, estimate) -> float:
    """Plain residual SNR in dB: 10*log10(||clean||^2 / ||clean - estimate||^2).

    Unlike si_sdr this is not scale invariant; it is the raw mixing SNR
    when estimate = clean + noise. Clamped to +-120 dB.
    """
    c = as_samples(clean, "clean")
    e = as_samples(estimate, "estimate")
    if c.size != e.size:
        raise ValueError("length mismatch")
    num = float(np.dot(c, c))
    den = float(np.dot(c - e, c - e))
    value = 10.0 * np.log10(num / (den + EPS) + EPS)
    return float(np.clip(value, -SNR_CAP, SNR_CAP))


def mix_at_snr(clean, noise, snr_db: float):
    """Scale noise so the clean-to-noise energy ratio hits snr_db exactly.

    Returns (noisy, scaled_noise) with noisy = clean + scaled_noise and
    10*log10(||clean||^2 / ||scaled_noise||^2) == snr_db.
    """
    c = as_samples(clean, "clean")
    n = as_samples(noise, "noise")
    if c.size != n.size:
        raise ValueError(f"length mismatch: clean {c.size}, noise {n.size}")
    ec = float(np.dot(c, c))
    en = float(np.dot(n, n))
    if ec == 0.0:
        raise ValueError("clean signal has zero energy")
    if en == 0.0:
        raise ValueError("noise signal has zero energy")
    scale = np.sqrt(ec / (en * 10.0 ** (snr_db / 10.0)))
    scaled = scale * n
    return c + scaled, scaled
