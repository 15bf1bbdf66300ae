"""Scale-invariant SDR: projection decomposition, per-utterance SI-SDR in
dB, and the mini-batch mean objective.

SI-SDR projects the estimate onto the clean reference and scores the
energy ratio of the projection to the projection residual, so any global
rescaling of the estimate cancels. Values are clamped to +-120 dB; the
clamp flags perfect (or orthogonal) reconstructions instead of Inf.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ._core import EPS, as_samples, as_tensor

SDR_CAP = 120.0


@dataclass(frozen=True)
class SdrDecomposition:
    """x_hat = target + e_noise + e_artif with target collinear to clean
    and e_noise collinear to the noise reference."""

    target: np.ndarray
    e_noise: np.ndarray
    e_artif: np.ndarray
    alpha: float


def decompose(clean, noise, x_hat) -> SdrDecomposition:
    """Project the estimate onto the clean and noise directions."""
    x = as_samples(clean, "clean")
    n = as_samples(noise, "noise")
    e = as_samples(x_hat, "estimate")
    if not (x.size == n.size == e.size):
        raise ValueError("length mismatch")
    ex = float(np.dot(x, x))
    en = float(np.dot(n, n))
    if ex == 0.0:
        raise ValueError("clean signal has zero energy")
    if en == 0.0:
        raise ValueError("noise signal has zero energy")
    alpha = float(np.dot(x, e)) / (ex + EPS)
    beta = float(np.dot(n, e)) / (en + EPS)
    target = alpha * x
    e_noise = beta * n
    return SdrDecomposition(
        target=target, e_noise=e_noise, e_artif=e - target - e_noise, alpha=alpha
    )


def _si_sdr_t(clean: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    alpha = (clean * x_hat).sum() / ((clean * clean).sum() + EPS)
    target = alpha * clean
    num = (target * target).sum()
    residual = target - x_hat
    den = (residual * residual).sum()
    value = 10.0 * torch.log10(num / (den + EPS) + EPS)
    return torch.clamp(value, -SDR_CAP, SDR_CAP)


def si_sdr(clean, x_hat) -> float:
    """Scale-invariant SDR in dB, clamped to [-120, 120]."""
    c = as_samples(clean, "clean")
    e = as_samples(x_hat, "estimate")
    if c.size != e.size:
        raise ValueError("length mismatch")
    if not np.any(c):
        raise ValueError("clean signal has zero energy")
    with torch.no_grad():
        return float(_si_sdr_t(as_tensor(c), as_tensor(e)))


def hit_clamp(value: float) -> bool:
    """True when an SDR value sits on the +-120 dB cap."""
    return abs(value) >= SDR_CAP


def loss_sdr(batch) -> float:
    """Mean per-utterance si_sdr over a batch of (clean, x_hat) pairs.
    Objective to maximize."""
    values = [si_sdr(c, e) for c, e in batch]
    if not values:
        raise ValueError("empty batch")
    return float(np.mean(values))
