"""Weighted combinations of the three objectives.

All combinations are objectives to maximize:

    sdr_pesq       = si_sdr + alpha * pesq_value
    sdr_stoi       = si_sdr + beta * stoi_value
    sdr_pesq_stoi  = si_sdr + alpha * pesq_value + beta * stoi_value

The perceptual terms act as regularizers on the SDR objective; weights
default to 1 and are surfaced on every CLI subcommand that scores.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .pesq import PesqTables, loss_pesq
from .sdr import si_sdr
from .stoi import loss_stoi


@dataclass(frozen=True)
class CombinationWeights:
    alpha: float = 1.0  # PESQ weight
    beta: float = 1.0  # STOI weight

    def __post_init__(self):
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def loss_sdr_pesq(clean, x_hat, alpha: float = 1.0,
                  tables: PesqTables | None = None) -> float:
    CombinationWeights(alpha=alpha)
    value = si_sdr(clean, x_hat)
    if alpha != 0.0:
        value += alpha * loss_pesq(clean, x_hat, tables).value
    return value


def loss_sdr_stoi(clean, x_hat, beta: float = 1.0) -> float:
    CombinationWeights(beta=beta)
    value = si_sdr(clean, x_hat)
    if beta != 0.0:
        value += beta * loss_stoi(clean, x_hat).value
    return value


def loss_sdr_pesq_stoi(clean, x_hat, alpha: float = 1.0, beta: float = 1.0,
                       tables: PesqTables | None = None) -> float:
    CombinationWeights(alpha=alpha, beta=beta)
    value = si_sdr(clean, x_hat)
    if alpha != 0.0:
        value += alpha * loss_pesq(clean, x_hat, tables).value
    if beta != 0.0:
        value += beta * loss_stoi(clean, x_hat).value
    return value
