"""Shared numeric conventions for every loss pipeline.

All computation runs in float64. Divisions and logs are stabilized with an
additive EPS = 1e-12; the same EPS appears in the differentiated path so
value and gradient stay consistent.
"""
from __future__ import annotations

import numpy as np
import torch

EPS = 1e-12
SAMPLE_RATE = 16000

# Floor used inside fractional powers of sums of squares. Below this the
# subgradient is taken as 0, which keeps u**p exact away from 0 and keeps
# gradients finite at fixed points where the sum vanishes identically.
_ROOT_FLOOR = 1e-36


class NonFiniteError(FloatingPointError):
    """A pipeline stage produced NaN or Inf; carries the stage name."""

    def __init__(self, stage: str):
        super().__init__(f"non-finite values produced by stage '{stage}'")
        self.stage = stage


def check_finite(stage: str, t: torch.Tensor) -> torch.Tensor:
    if not torch.isfinite(t).all():
        raise NonFiniteError(stage)
    return t


def as_samples(x, name: str = "signal") -> np.ndarray:
    """Coerce to a 1-D float64 sample array, rejecting non-finite input."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.to(torch.float64)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def safe_root(u: torch.Tensor, p: float) -> torch.Tensor:
    """u**p for u >= 0 and 0 < p < 1, with subgradient 0 at u == 0.

    The naive power has an infinite derivative at 0, which turns into NaN
    through autograd exactly at fixed points (all-zero disturbances). The
    floored branch never activates at generic points.
    """
    guarded = u.clamp_min(_ROOT_FLOOR)
    return torch.where(u > _ROOT_FLOOR, guarded**p, torch.zeros_like(u))


def tie_min(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise min routing the gradient to `a` on ties."""
    return torch.where(a <= b, a, b)


def tie_max(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise max routing the gradient to `a` on ties."""
    return torch.where(a >= b, a, b)
