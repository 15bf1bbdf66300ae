"""Oracle time-frequency masks and a per-utterance gradient-ascent mask
refiner, the desk-scale stand-in for a trained mask estimator.

The refiner parametrizes a mask as a capped logistic squash of free
parameters, initialized at mask 1 (output == noisy input), and ascends a
chosen objective through the mask -> ISTFT -> loss chain with
backtracking line control: halve the step on any objective decrease,
grow it 10% on success. Traces are monotone by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ._core import EPS, NonFiniteError, as_tensor
from .dsp import Spectrogram, _istft_t, istft_ls, mix_at_snr, stft
from .grad import _resolve
from .pesq import loss_pesq
from .sdr import si_sdr
from .stoi import loss_stoi

MASK_CAP = 2.0


def oracle_iam(clean_spec: Spectrogram, noisy_spec: Spectrogram,
               cap: float = MASK_CAP) -> np.ndarray:
    """Ideal amplitude mask |X|/|Y|, clipped to [0, cap]."""
    x = np.asarray(clean_spec.values)
    y = np.asarray(noisy_spec.values)
    if x.shape != y.shape:
        raise ValueError("spectrogram shapes differ")
    return np.clip(np.abs(x) / (np.abs(y) + EPS), 0.0, cap)


def oracle_psm(clean_spec: Spectrogram, noisy_spec: Spectrogram) -> np.ndarray:
    """Phase-sensitive mask |X|/|Y| * cos(phase difference), clipped to [0, 1]."""
    x = np.asarray(clean_spec.values)
    y = np.asarray(noisy_spec.values)
    if x.shape != y.shape:
        raise ValueError("spectrogram shapes differ")
    ratio = np.abs(x) / (np.abs(y) + EPS)
    cos_diff = np.cos(np.angle(x) - np.angle(y))
    return np.clip(ratio * cos_diff, 0.0, 1.0)


def apply_mask(noisy_spec: Spectrogram, mask) -> np.ndarray:
    """Scale the noisy spectrum by the mask (noisy phase kept) and
    synthesize with the least-squares ISTFT."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != noisy_spec.values.shape:
        raise ValueError(f"mask shape {mask.shape} != spectrogram {noisy_spec.values.shape}")
    masked = Spectrogram(
        values=noisy_spec.values * mask,
        window_len=noisy_spec.window_len,
        hop=noisy_spec.hop,
        n_samples=noisy_spec.n_samples,
    )
    return istft_ls(masked)


@dataclass(frozen=True)
class RefineStep:
    step: int
    objective: float
    si_sdr_db: float
    pesq_loss: float
    stoi_loss: float
    step_size: float


@dataclass
class RefineTrace:
    objective_name: str
    snr_db: float
    steps: list[RefineStep] = field(default_factory=list)


def _metrics(clean: np.ndarray, estimate: np.ndarray):
    return (
        si_sdr(clean, estimate),
        loss_pesq(clean, estimate).value,
        loss_stoi(clean, estimate).value,
    )


def refine(clean, noise, snr_db: float, objective: str = "sdr",
           alpha: float = 1.0, beta: float = 1.0, steps: int = 300,
           step_size: float = 1.0):
    """Gradient-ascent mask refinement of the mixture clean+noise@snr_db.

    Returns (denoised, RefineTrace). Step 0 in the trace is the noisy
    baseline (identity mask); the recorded objective never decreases.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    fn = _resolve(objective, alpha, beta)
    noisy, _ = mix_at_snr(clean, noise, snr_db)
    clean = np.asarray(clean, dtype=np.float64)
    ct = as_tensor(clean)
    spec_noisy = torch.from_numpy(stft(noisy).values)  # constant
    n_samples = noisy.size

    def forward(theta):
        mask = MASK_CAP * torch.sigmoid(theta)
        x_hat = _istft_t(spec_noisy * mask, n_samples)
        return fn(ct, x_hat), x_hat

    # sigmoid(0) = 0.5, so the capped squash starts at exactly mask 1
    theta = torch.zeros(spec_noisy.shape, dtype=torch.float64, requires_grad=True)
    value_t, x_hat_t = forward(theta)
    (ascent,) = torch.autograd.grad(value_t, theta)
    if not torch.isfinite(ascent).all():
        raise NonFiniteError("refine/gradient")
    current = float(value_t.detach())
    estimate = x_hat_t.detach().numpy()

    trace = RefineTrace(objective_name=str(objective), snr_db=float(snr_db))
    lr = float(step_size)
    trace.steps.append(RefineStep(0, current, *_metrics(clean, estimate), lr))

    for k in range(1, steps + 1):
        candidate = (theta.detach() + lr * ascent).requires_grad_(True)
        cand_value_t, cand_x_hat_t = forward(candidate)
        cand_value = float(cand_value_t.detach())
        if cand_value >= current:
            theta = candidate
            current = cand_value
            estimate = cand_x_hat_t.detach().numpy()
            (ascent,) = torch.autograd.grad(cand_value_t, candidate)
            if not torch.isfinite(ascent).all():
                raise NonFiniteError("refine/gradient")
            lr *= 1.1
        else:
            lr *= 0.5
        trace.steps.append(RefineStep(k, current, *_metrics(clean, estimate), lr))

    return estimate, trace


def oracle_report(clean, noise, snr_list, seed=None,
                  refine_objectives=("sdr",), steps: int = 300,
                  step_size: float = 1.0, alpha: float = 1.0,
                  beta: float = 1.0) -> list[dict]:
    """Metric rows for {noisy, iam, psm, refine-<objective>...} at each SNR.

    Oracle masks see the clean spectrum, so their rows are upper bounds
    on trained estimators; they support trend comparisons only. The
    steps column is 0 for mask conditions and the step budget for
    refined ones.
    """
    rows = []
    clean = np.asarray(clean, dtype=np.float64)
    spec_clean = stft(clean)

    def add_row(condition, estimate, snr, n_steps):
        sdr_db, pesq_value, stoi_value = _metrics(clean, estimate)
        rows.append({
            "condition": condition,
            "snr_db": float(snr),
            "si_sdr_db": sdr_db,
            "pesq_loss": pesq_value,
            "stoi_loss": stoi_value,
            "steps": n_steps,
            "seed": seed,
        })

    for snr in snr_list:
        noisy, _ = mix_at_snr(clean, noise, snr)
        spec_noisy = stft(noisy)
        add_row("noisy", noisy, snr, 0)
        add_row("iam", apply_mask(spec_noisy, oracle_iam(spec_clean, spec_noisy)), snr, 0)
        add_row("psm", apply_mask(spec_noisy, oracle_psm(spec_clean, spec_noisy)), snr, 0)
    for objective in refine_objectives:
        for snr in snr_list:
            denoised, _ = refine(
                clean, noise, snr, objective=objective,
                alpha=alpha, beta=beta, steps=steps, step_size=step_size,
            )
            add_row(f"refine-{objective}", denoised, snr, steps)
    return rows
