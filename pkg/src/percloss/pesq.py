"""Differentiable PESQ-style speech quality objective.

The chain follows ITU-T P.862's perceptual model on the shared STFT grid:
level alignment to a fixed band power, Bark-scale power spectrum over 49
bands, time-frequency equalization, Zwicker-law loudness, dead-zoned
disturbance, weighted frame disturbances (symmetric and asymmetric), and
two-stage aggregation to value = 4.5 - 0.1*d_sym - 0.0309*d_asym.

Deliberately not full P.862: no delay estimation, no IIR receiving
filter, no bad-interval iteration, no MOS-LQO mapping. Inputs must be
time-aligned pairs. Higher is better; the ceiling 4.5 is reached exactly
when the inputs match.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
import torch

from ._core import EPS, as_samples, as_tensor, check_finite, safe_root, tie_min
from .dsp import HOP, N_BINS, SAMPLE_RATE, WINDOW_LEN, Spectrogram, _stft_t, stft

TABLES_ENV_VAR = "PERCLOSS_PESQ_TABLES"
_DATA_FILE = "p862_wb_tables_v1.txt"

LEVEL_TARGET = 1e7
# bins whose center frequency falls inside [300, 3000] Hz on the shared grid
_BIN_HZ = SAMPLE_RATE / WINDOW_LEN
LEVEL_BAND = slice(int(np.ceil(300.0 / _BIN_HZ)), int(np.floor(3000.0 / _BIN_HZ)) + 1)

C1 = 1000.0  # equalization stabilizer, the model's own constant
GAIN_MIN, GAIN_MAX = 3e-4, 5.0
# frequency-compensation ratio bounds: tight enough that heavy additive
# noise cannot be absorbed as channel coloration (keeps quality monotone
# in SNR); ITU-T P.862 bounds the same ratio at [0.01, 100]
COMP_MIN, COMP_MAX = 0.05, 20.0
H_EXPONENT = 1.2
H_CAP = 12.0
H_FLOOR = 3.0
DEADZONE_RATIO = 0.25
AGG_WIN = 20
AGG_HOP = 10
AGG_POW = 6.0
VALUE_CEILING = 4.5
SYM_WEIGHT = 0.1
ASYM_WEIGHT = 0.0309
MIN_FRAMES = AGG_WIN

_REQUIRED_TABLES = (
    "hz_bins_per_bark_band",
    "hearing_threshold_power",
    "bark_band_width",
    "silence_threshold_clean",
    "silence_threshold_degraded",
    "loudness_scale",
    "zwicker_power",
)


@dataclass(frozen=True, eq=False)
class PesqTables:
    """Perceptual-model constants for 49 Bark bands on the 16 kHz grid."""

    band_edges: np.ndarray  # 50 start bins, monotone, spanning bins 0..256
    hearing_threshold: np.ndarray  # P_0 per band
    band_weights: np.ndarray  # Bark band widths, the disturbance weights
    silence_threshold_clean: np.ndarray
    silence_threshold_degraded: np.ndarray
    loudness_scale: np.ndarray
    zwicker_power: float
    pooling: np.ndarray  # (256, n_bands) mean-pooling matrix, derived

    @property
    def n_bands(self) -> int:
        return self.band_weights.size


class TableError(ValueError):
    pass


def _parse_table_file(text: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    payload_lines: list[str] = []
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            raise TableError(f"data before first section header: {line!r}")
        else:
            sections[current].extend(line.split())
        if current != "checksum":
            payload_lines.append(line)
    if "checksum" not in sections:
        raise TableError("missing [checksum] section")
    digest = hashlib.sha256("\n".join(payload_lines).encode()).hexdigest()
    declared = sections["checksum"]
    if len(declared) != 1 or not declared[0].startswith("sha256="):
        raise TableError("malformed checksum entry")
    if declared[0].removeprefix("sha256=") != digest:
        raise TableError(f"table checksum mismatch: computed {digest}")
    return sections


def load_tables(path=None) -> PesqTables:
    """Load and validate the perceptual constants.

    Resolution order: explicit path, the PERCLOSS_PESQ_TABLES environment
    variable, then the packaged data file. The file's checksum is always
    verified.
    """
    if path is None:
        path = os.environ.get(TABLES_ENV_VAR)
    if path is None:
        text = resources.files("percloss").joinpath(f"data/{_DATA_FILE}").read_text()
    else:
        with open(path) as f:
            text = f.read()
    sections = _parse_table_file(text)
    for name in _REQUIRED_TABLES:
        if name not in sections:
            raise TableError(f"missing table [{name}]")

    hz_bins = np.array([int(v) for v in sections["hz_bins_per_bark_band"]])
    n_bands = hz_bins.size

    def vec(name):
        vals = np.array([float(v) for v in sections[name]])
        if vals.size != n_bands:
            raise TableError(f"[{name}] has {vals.size} entries, expected {n_bands}")
        return vals

    hearing = vec("hearing_threshold_power")
    weights = vec("bark_band_width")
    sil_c = vec("silence_threshold_clean")
    sil_n = vec("silence_threshold_degraded")
    scale = vec("loudness_scale")
    zwicker = float(sections["zwicker_power"][0])

    if np.any(hz_bins < 1):
        raise TableError("band bin counts must be positive")
    edges = np.concatenate([[0], np.cumsum(hz_bins)])
    if edges[-1] != N_BINS - 1:
        raise TableError(f"bands cover {edges[-1]} bins, expected {N_BINS - 1}")
    for name, v in [("bark_band_width", weights), ("hearing_threshold_power", hearing),
                    ("silence thresholds", sil_c), ("loudness_scale", scale)]:
        if np.any(v <= 0):
            raise TableError(f"{name} entries must be positive")
    if not 0.0 < zwicker < 1.0:
        raise TableError("zwicker_power out of range")

    pooling = np.zeros((N_BINS - 1, n_bands))
    for i in range(n_bands):
        pooling[edges[i] : edges[i + 1], i] = 1.0 / hz_bins[i]

    return PesqTables(
        band_edges=edges,
        hearing_threshold=hearing,
        band_weights=weights,
        silence_threshold_clean=sil_c,
        silence_threshold_degraded=sil_n,
        loudness_scale=scale,
        zwicker_power=zwicker,
        pooling=pooling,
    )


@lru_cache(maxsize=4)
def _cached_tables(path_key):
    return load_tables(path_key if path_key else None)


def default_tables() -> PesqTables:
    return _cached_tables(os.environ.get(TABLES_ENV_VAR, ""))


class _TablesT:
    """torch views of the table arrays (zero-copy where possible)."""

    def __init__(self, tb: PesqTables):
        self.pooling = torch.from_numpy(tb.pooling)
        self.hearing = torch.from_numpy(tb.hearing_threshold)
        self.weights = torch.from_numpy(tb.band_weights)
        self.thr_clean = torch.from_numpy(tb.silence_threshold_clean)
        self.thr_deg = torch.from_numpy(tb.silence_threshold_degraded)
        self.scale = torch.from_numpy(tb.loudness_scale)
        self.zwicker = tb.zwicker_power
        self.weight_sum = self.weights.sum()


# --- differentiable pipeline stages (torch, float64) ---


def _power_t(x: torch.Tensor) -> torch.Tensor:
    spec = _stft_t(x)
    return spec.real**2 + spec.imag**2


def _band_power_t(power: torch.Tensor) -> torch.Tensor:
    return power[:, LEVEL_BAND].sum(dim=1).mean()


def _aligned_power_t(x: torch.Tensor, stage: str) -> torch.Tensor:
    power = check_finite(stage, _power_t(x))
    bp = _band_power_t(power)
    if float(bp.detach()) == 0.0:
        raise ValueError("zero energy in the 300-3000 Hz alignment band")
    return power * (LEVEL_TARGET / (bp + EPS))


def _bark_t(power: torch.Tensor, tt: _TablesT) -> torch.Tensor:
    return power[:, : N_BINS - 1] @ tt.pooling


def _equalize_t(bark_c: torch.Tensor, bark_n: torch.Tensor, tt: _TablesT):
    # indicators are constants of the forward pass; gradient flows through
    # the powers they select, never through the thresholds
    mask_c = (bark_c > tt.thr_clean).to(bark_c.dtype)
    mask_n = (bark_n > tt.thr_deg).to(bark_n.dtype)
    avg_c = (bark_c * mask_c).mean(dim=0)
    avg_n = (bark_n * mask_n).mean(dim=0)
    ratio = torch.clamp((avg_n + C1) / (avg_c + C1), COMP_MIN, COMP_MAX)
    eq_c = bark_c * ratio
    # per-frame gain compensation of the degraded path toward the
    # (frequency-compensated) clean level, clamped like the reference
    total_c = (eq_c * (eq_c > tt.thr_clean).to(eq_c.dtype)).sum(dim=1)
    total_n = (bark_n * mask_n).sum(dim=1)
    gain = torch.clamp((total_c + C1) / (total_n + C1), GAIN_MIN, GAIN_MAX)
    eq_n = bark_n * gain.unsqueeze(1)
    return eq_c, eq_n


def _loudness_t(bark: torch.Tensor, tt: _TablesT) -> torch.Tensor:
    thr = tt.hearing
    base = (thr / 0.5) ** tt.zwicker
    inner = (0.5 + 0.5 * bark / thr) ** tt.zwicker - 1.0
    audible = (bark > thr).to(bark.dtype)
    return tt.scale * base * inner * audible


def _disturbance_t(loud_c: torch.Tensor, loud_n: torch.Tensor) -> torch.Tensor:
    diff = loud_c - loud_n
    dz = DEADZONE_RATIO * tie_min(loud_c, loud_n)
    return torch.clamp_min(diff - dz, 0.0) + torch.clamp_max(diff + dz, 0.0)


def _frame_disturbances_t(d: torch.Tensor, bark_c: torch.Tensor,
                          bark_n: torch.Tensor, tt: _TablesT):
    w = tt.weights
    fd = safe_root(((w * d) ** 2).sum(dim=1) / tt.weight_sum, 0.5)
    h = ((bark_n + 50.0) / (bark_c + 50.0)) ** H_EXPONENT
    h = torch.where(h > H_CAP, torch.full_like(h, H_CAP), h)
    h = torch.where(h < H_FLOOR, torch.zeros_like(h), h)
    afd = safe_root(((w * d * h) ** 2).sum(dim=1) / tt.weight_sum, 0.5)
    return fd, afd


def _aggregate_t(fd: torch.Tensor, afd: torch.Tensor):
    m = fd.shape[0]
    if m < MIN_FRAMES:
        raise ValueError(
            f"{m} frames is below the {MIN_FRAMES}-frame aggregation minimum (~0.35 s)"
        )

    def two_stage(per_frame):
        windows = per_frame.unfold(0, AGG_WIN, AGG_HOP)  # incomplete windows drop
        psqm = safe_root((windows**AGG_POW).mean(dim=1), 1.0 / AGG_POW)
        return safe_root((psqm**2).mean(), 0.5)

    d_sym = two_stage(fd)
    d_asym = two_stage(afd)
    value = VALUE_CEILING - SYM_WEIGHT * d_sym - ASYM_WEIGHT * d_asym
    return value, d_sym, d_asym


def _pesq_t(clean: torch.Tensor, x_hat: torch.Tensor, tt: _TablesT):
    if clean.shape != x_hat.shape:
        raise ValueError("clean and estimate must have equal lengths")
    pow_c = _aligned_power_t(clean, "stft/clean")
    pow_n = _aligned_power_t(x_hat, "stft/estimate")
    bark_c = check_finite("bark", _bark_t(pow_c, tt))
    bark_n = check_finite("bark", _bark_t(pow_n, tt))
    eq_c, eq_n = _equalize_t(bark_c, bark_n, tt)
    check_finite("equalize", eq_n)
    loud_c = _loudness_t(eq_c, tt)
    loud_n = check_finite("loudness", _loudness_t(eq_n, tt))
    d = _disturbance_t(loud_c, loud_n)
    fd, afd = _frame_disturbances_t(d, bark_c, bark_n, tt)
    check_finite("frame_disturbances", afd)
    value, d_sym, d_asym = _aggregate_t(fd, afd)
    check_finite("aggregate", value)
    return value, d_sym, d_asym, fd, afd


def _pesq_value_t(clean: torch.Tensor, x_hat: torch.Tensor,
                  tables: PesqTables | None = None) -> torch.Tensor:
    tt = _TablesT(tables if tables is not None else default_tables())
    return _pesq_t(clean, x_hat, tt)[0]


# --- public operations ---


@dataclass(frozen=True)
class PesqBreakdown:
    value: float
    d_sym: float
    d_asym: float
    fd_per_frame: np.ndarray
    afd_per_frame: np.ndarray


def level_align(signal) -> np.ndarray:
    """Scale a signal so its mean 300 Hz-3 kHz band power equals 1e7."""
    x = as_samples(signal)
    power = np.abs(stft(x).values) ** 2
    bp = power[:, LEVEL_BAND].sum(axis=1).mean()
    if bp == 0.0:
        raise ValueError("zero energy in the 300-3000 Hz alignment band")
    return x * np.sqrt(LEVEL_TARGET / (bp + EPS))


def bark_spectrum(spec, tables: PesqTables | None = None) -> np.ndarray:
    """Mean |X|^2 per Bark band, (frames, 49). Accepts a Spectrogram or a
    precomputed (frames, 257) power array."""
    tb = tables if tables is not None else default_tables()
    if isinstance(spec, Spectrogram):
        power = np.abs(spec.values) ** 2
    else:
        power = np.asarray(spec, dtype=np.float64)
    if power.ndim != 2 or power.shape[1] != N_BINS:
        raise ValueError(f"expected (frames, {N_BINS}) power spectrum, got {power.shape}")
    return power[:, : N_BINS - 1] @ tb.pooling


def tf_equalize(clean_bark, noisy_bark, tables: PesqTables | None = None):
    """Frequency compensation of the clean path, per-frame gain
    compensation of the degraded path.

    The per-band compensation ratio is bounded to [COMP_MIN, COMP_MAX]
    and the per-frame gain to [GAIN_MIN, GAIN_MAX], so neither stage can
    explain away heavy additive noise.
    """
    tt = _TablesT(tables if tables is not None else default_tables())
    bc = as_tensor(np.asarray(clean_bark, dtype=np.float64))
    bn = as_tensor(np.asarray(noisy_bark, dtype=np.float64))
    if bc.shape != bn.shape:
        raise ValueError("bark spectra must have equal frame counts")
    with torch.no_grad():
        eq_c, eq_n = _equalize_t(bc, bn, tt)
    return eq_c.numpy(), eq_n.numpy()


def loudness(bark, tables: PesqTables | None = None) -> np.ndarray:
    """Zwicker-law loudness density, floored at 0 below the hearing threshold."""
    tt = _TablesT(tables if tables is not None else default_tables())
    with torch.no_grad():
        out = _loudness_t(as_tensor(np.asarray(bark, dtype=np.float64)), tt)
    return out.numpy()


def disturbance(loud_clean, loud_noisy) -> np.ndarray:
    """Dead-zoned loudness difference; the zone is 0.25*min(L_c, L_n)."""
    lc = as_tensor(np.asarray(loud_clean, dtype=np.float64))
    ln = as_tensor(np.asarray(loud_noisy, dtype=np.float64))
    with torch.no_grad():
        return _disturbance_t(lc, ln).numpy()


def frame_disturbances(d, clean_bark, noisy_bark, tables: PesqTables | None = None):
    """Width-weighted RMS disturbance per frame and its asymmetric variant."""
    tt = _TablesT(tables if tables is not None else default_tables())
    with torch.no_grad():
        fd, afd = _frame_disturbances_t(
            as_tensor(np.asarray(d, dtype=np.float64)),
            as_tensor(np.asarray(clean_bark, dtype=np.float64)),
            as_tensor(np.asarray(noisy_bark, dtype=np.float64)),
            tt,
        )
    return fd.numpy(), afd.numpy()


def aggregate(fd, afd, frame_count: int | None = None) -> PesqBreakdown:
    """Two-stage aggregation: 6-norm over 20-frame windows at hop 10,
    RMS over windows, then the affine map to the value."""
    fd = np.asarray(fd, dtype=np.float64)
    afd = np.asarray(afd, dtype=np.float64)
    if frame_count is not None and frame_count != fd.size:
        raise ValueError(f"frame_count {frame_count} does not match {fd.size} disturbances")
    with torch.no_grad():
        value, d_sym, d_asym = _aggregate_t(as_tensor(fd), as_tensor(afd))
    return PesqBreakdown(
        value=float(value), d_sym=float(d_sym), d_asym=float(d_asym),
        fd_per_frame=fd, afd_per_frame=afd,
    )


def loss_pesq(clean, x_hat, tables: PesqTables | None = None) -> PesqBreakdown:
    """Full chain on a time-aligned pair. Objective to maximize, ceiling 4.5."""
    tt = _TablesT(tables if tables is not None else default_tables())
    c = as_tensor(as_samples(clean, "clean"))
    e = as_tensor(as_samples(x_hat, "estimate"))
    with torch.no_grad():
        value, d_sym, d_asym, fd, afd = _pesq_t(c, e, tt)
    return PesqBreakdown(
        value=float(value), d_sym=float(d_sym), d_asym=float(d_asym),
        fd_per_frame=fd.numpy(), afd_per_frame=afd.numpy(),
    )


def loss_pesq_batch(pairs, tables: PesqTables | None = None) -> float:
    """Batch objective: d_sym and d_asym are averaged over utterances
    before the affine map, so this is not the mean of per-pair values."""
    breakdowns = [loss_pesq(c, e, tables) for c, e in pairs]
    if not breakdowns:
        raise ValueError("empty batch")
    d_sym = float(np.mean([b.d_sym for b in breakdowns]))
    d_asym = float(np.mean([b.d_asym for b in breakdowns]))
    return VALUE_CEILING - SYM_WEIGHT * d_sym - ASYM_WEIGHT * d_asym
