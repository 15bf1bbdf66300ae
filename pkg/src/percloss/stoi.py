"""Differentiable STOI-style intelligibility objective.

One-third-octave band envelopes on the shared 16 kHz STFT grid (no
resampling to 10 kHz), 384 ms segments of 24 frames, clean-norm
normalization with a +15 dB clip, and a mean-removed correlation per
band and segment. The value is the plain average over valid segments
and bands; unlike standard STOI no silent-frame removal is applied.
Higher is better, 1.0 at equality.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch

from ._core import EPS, as_samples, as_tensor, check_finite, safe_root, tie_min
from .dsp import N_BINS, SAMPLE_RATE, WINDOW_LEN, Spectrogram, _stft_t, stft

N_SEGMENT = 24  # frames per segment: 384 ms at the 16 ms hop
CLIP_DB = 15.0
CLIP_FACTOR = 1.0 + 10.0 ** (-CLIP_DB / 20.0)
N_BANDS = 15
LOWEST_CENTER_HZ = 150.0


@dataclass(frozen=True)
class OctaveBands:
    """Disjoint, ordered, nonempty 1/3-octave bands as [lo, hi) bin ranges."""

    centers_hz: np.ndarray
    bin_ranges: tuple[tuple[int, int], ...]

    @property
    def n_bands(self) -> int:
        return len(self.bin_ranges)


def build_octave_bands(n_bands: int = N_BANDS,
                       lowest_center_hz: float = LOWEST_CENTER_HZ) -> OctaveBands:
    """Derive the band-to-bin mapping directly on the shared grid.

    Band edges at center*2^(+-1/6) are rounded to the nearest bin center,
    which makes adjacent bands share an edge bin index, hence disjoint
    contiguous ranges. Bands falling entirely at or above Nyquist are
    dropped with a warning.
    """
    freqs = np.arange(N_BINS) * SAMPLE_RATE / WINDOW_LEN
    centers = lowest_center_hz * 2.0 ** (np.arange(n_bands) / 3.0)
    ranges = []
    kept = []
    for j, cf in enumerate(centers):
        lo = int(np.argmin(np.abs(freqs - cf * 2.0 ** (-1.0 / 6.0))))
        hi = int(np.argmin(np.abs(freqs - cf * 2.0 ** (1.0 / 6.0))))
        if lo >= N_BINS - 1 or hi <= lo:
            warnings.warn(f"dropping 1/3-octave band at {cf:.0f} Hz outside the grid")
            continue
        ranges.append((lo, hi))
        kept.append(cf)
    if not ranges:
        raise ValueError("no usable 1/3-octave bands on this grid")
    return OctaveBands(centers_hz=np.array(kept), bin_ranges=tuple(ranges))


_DEFAULT_BANDS = build_octave_bands()


def _band_matrix_t(bands: OctaveBands) -> torch.Tensor:
    m = torch.zeros(N_BINS, bands.n_bands, dtype=torch.float64)
    for j, (lo, hi) in enumerate(bands.bin_ranges):
        m[lo:hi, j] = 1.0
    return m


def _envelope_t(x: torch.Tensor, bands: OctaveBands) -> torch.Tensor:
    spec = _stft_t(x)
    power = spec.real**2 + spec.imag**2
    return safe_root(power @ _band_matrix_t(bands), 0.5)


def _segment_d_t(env_c: torch.Tensor, env_n: torch.Tensor) -> torch.Tensor:
    """Correlations for every (segment, band); inputs are (frames, J)."""
    segs_c = env_c.T.unfold(1, N_SEGMENT, 1)  # (J, M-N+1, N)
    segs_n = env_n.T.unfold(1, N_SEGMENT, 1)
    norm_c = safe_root((segs_c**2).sum(dim=2), 0.5)
    norm_n = safe_root((segs_n**2).sum(dim=2), 0.5)
    scaled = segs_n * (norm_c / (norm_n + EPS)).unsqueeze(2)
    clipped = tie_min(scaled, CLIP_FACTOR * segs_c)
    a = segs_c - segs_c.mean(dim=2, keepdim=True)
    b = clipped - clipped.mean(dim=2, keepdim=True)
    num = (a * b).sum(dim=2)
    den = torch.sqrt(((a**2).sum(dim=2) + EPS) * ((b**2).sum(dim=2) + EPS))
    return (num / den).T  # (M-N+1, J)


def _stoi_t(clean: torch.Tensor, x_hat: torch.Tensor, bands: OctaveBands):
    if clean.shape != x_hat.shape:
        raise ValueError("clean and estimate must have equal lengths")
    env_c = check_finite("envelope/clean", _envelope_t(clean, bands))
    env_n = check_finite("envelope/estimate", _envelope_t(x_hat, bands))
    if env_c.shape[0] < N_SEGMENT:
        raise ValueError(
            f"{env_c.shape[0]} frames is below the {N_SEGMENT}-frame segment length (384 ms)"
        )
    d = check_finite("correlation", _segment_d_t(env_c, env_n))
    return d.mean(), d


def _stoi_value_t(clean: torch.Tensor, x_hat: torch.Tensor,
                  bands: OctaveBands | None = None) -> torch.Tensor:
    return _stoi_t(clean, x_hat, bands if bands is not None else _DEFAULT_BANDS)[0]


# --- public operations ---


@dataclass(frozen=True)
class StoiBreakdown:
    d_matrix: np.ndarray  # (valid segment-end frames, J), entries in [-1, 1]
    value: float
    silent_segments: int  # segments whose clean envelope is identically zero


def octave_decompose(spec, bands: OctaveBands | None = None) -> np.ndarray:
    """Band envelopes sqrt(sum |X|^2 over band bins), shape (frames, J)."""
    bands = bands if bands is not None else _DEFAULT_BANDS
    if isinstance(spec, Spectrogram):
        values = spec.values
    else:
        values = np.asarray(spec)
    power = np.abs(values) ** 2
    out = np.empty((power.shape[0], bands.n_bands))
    for j, (lo, hi) in enumerate(bands.bin_ranges):
        out[:, j] = np.sqrt(power[:, lo:hi].sum(axis=1))
    return out


def stoi_segment(clean_env, noisy_env, m: int, j: int,
                 n_segment: int = N_SEGMENT) -> float:
    """Correlation for the segment ending at frame m in band j."""
    if m < n_segment - 1:
        raise ValueError(f"frame {m} has no full {n_segment}-frame segment")
    c = np.asarray(clean_env, dtype=np.float64)[m - n_segment + 1 : m + 1, j]
    y = np.asarray(noisy_env, dtype=np.float64)[m - n_segment + 1 : m + 1, j]
    scale = np.sqrt((c**2).sum()) / (np.sqrt((y**2).sum()) + EPS)
    clipped = np.minimum(scale * y, CLIP_FACTOR * c)
    a = c - c.mean()
    b = clipped - clipped.mean()
    num = (a * b).sum()
    den = np.sqrt(((a**2).sum() + EPS) * ((b**2).sum() + EPS))
    return float(num / den)


def loss_stoi(clean, x_hat, bands: OctaveBands | None = None) -> StoiBreakdown:
    """Mean correlation over all valid segments and bands."""
    bands = bands if bands is not None else _DEFAULT_BANDS
    c = as_tensor(as_samples(clean, "clean"))
    e = as_tensor(as_samples(x_hat, "estimate"))
    with torch.no_grad():
        value, d = _stoi_t(c, e, bands)
        env_c = _envelope_t(c, bands)
        seg_energy = (env_c.T.unfold(1, N_SEGMENT, 1) ** 2).sum(dim=2)
        silent = int((seg_energy == 0.0).sum())
    return StoiBreakdown(d_matrix=d.numpy(), value=float(value), silent_segments=silent)


def loss_stoi_batch(pairs, bands: OctaveBands | None = None) -> float:
    """Mean of per-utterance values (equal utterance weight)."""
    values = [loss_stoi(c, e, bands).value for c, e in pairs]
    if not values:
        raise ValueError("empty batch")
    return float(np.mean(values))
