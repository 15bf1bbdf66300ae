"""Deterministic synthetic audio: clean-speech proxies and noise types.

Every generator is fully determined by its seed, so trend experiments
and gradient checks run without external datasets. Clean proxies are
sums of AM tones over a low-level pink bed with filtered noise bursts;
noises are white, pink, and a babble proxy built from delayed clean
proxies. All outputs are float64 at 16 kHz.
"""
from __future__ import annotations

import numpy as np

from ._core import SAMPLE_RATE

NOISE_KINDS = ("white", "pink", "babble")

_RMS_TARGET = 0.1


def _unit_rms(x: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(x**2))
    if rms == 0.0:
        raise ValueError("generated signal is silent")
    return x / rms


def _sample_count(duration_s: float) -> int:
    n = round(duration_s * SAMPLE_RATE)
    if n < 1:
        raise ValueError(f"duration {duration_s} s yields no samples")
    return n


def white_noise(duration_s: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = _sample_count(duration_s)
    return _unit_rms(rng.standard_normal(n))


def pink_noise(duration_s: float, seed: int) -> np.ndarray:
    """1/f-shaped noise via spectral weighting of white noise."""
    rng = np.random.default_rng(seed)
    n = _sample_count(duration_s)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE)
    spectrum[1:] /= np.sqrt(freqs[1:])
    spectrum[0] = 0.0
    return _unit_rms(np.fft.irfft(spectrum, n))


def clean_proxy(duration_s: float = 2.0, seed: int = 0) -> np.ndarray:
    """Speech-band proxy: 3-5 AM tones, pink bed, gated noise bursts."""
    rng = np.random.default_rng(seed)
    n = _sample_count(duration_s)
    t = np.arange(n) / SAMPLE_RATE
    x = np.zeros(n)
    for _ in range(int(rng.integers(3, 6))):
        carrier = np.exp(rng.uniform(np.log(200.0), np.log(3200.0)))
        am_rate = rng.uniform(1.5, 8.0)
        depth = rng.uniform(0.3, 0.9)
        amp = rng.uniform(0.3, 1.0)
        ph_c, ph_a = rng.uniform(0.0, 2.0 * np.pi, 2)
        x += amp * (1.0 + depth * np.sin(2.0 * np.pi * am_rate * t + ph_a)) * np.sin(
            2.0 * np.pi * carrier * t + ph_c
        )
    # broadband pink bed keeps every 1/3-octave band energized
    bed = pink_noise(duration_s, int(rng.integers(0, 2**31)))
    x = _unit_rms(x) + 0.05 * bed
    for _ in range(int(rng.integers(2, 5))):
        length = int(rng.uniform(0.1, 0.3) * SAMPLE_RATE)
        start = int(rng.integers(0, max(n - length, 1)))
        gate = np.sin(np.pi * np.arange(length) / length) ** 2
        burst = pink_noise(length / SAMPLE_RATE, int(rng.integers(0, 2**31)))
        x[start : start + length] += 0.4 * gate * burst
    return _RMS_TARGET * _unit_rms(x)


def babble_proxy(duration_s: float, seed: int) -> np.ndarray:
    """Overlapping delayed clean proxies, a crowd-murmur stand-in."""
    rng = np.random.default_rng(seed)
    n = _sample_count(duration_s)
    x = np.zeros(n)
    for _ in range(4):
        component = clean_proxy(duration_s, int(rng.integers(0, 2**31)))
        x += np.roll(component, int(rng.integers(0, n)))
    return _unit_rms(x)


def noise(kind: str, duration_s: float, seed: int) -> np.ndarray:
    if kind == "white":
        return white_noise(duration_s, seed)
    if kind == "pink":
        return pink_noise(duration_s, seed)
    if kind == "babble":
        return babble_proxy(duration_s, seed)
    raise ValueError(f"unknown noise kind {kind!r}, expected one of {NOISE_KINDS}")


def gradcheck_pair(seed: int, duration_s: float = 0.5):
    """Generic-point pair for derivative checks: a clean proxy and the
    same proxy under a small additive perturbation."""
    clean = clean_proxy(duration_s, seed)
    perturbation = white_noise(duration_s, seed + 1)
    return clean, clean + 0.05 * _RMS_TARGET * perturbation
