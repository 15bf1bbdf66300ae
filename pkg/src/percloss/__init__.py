"""Differentiable perceptual speech objectives.

Three scores over 16 kHz clean/estimate pairs, each smooth enough to
climb by gradient: scale-invariant SDR, a PESQ-style quality score, and
a STOI-style intelligibility score, plus weighted combinations. A small
toolkit around them covers STFT synthesis/analysis, time-frequency
masks, finite-difference gradient verification, and an oracle/refine
experiment harness. Everything runs in float64 on CPU.
"""
from ._core import EPS, NonFiniteError, SAMPLE_RATE
from .dsp import (
    HOP,
    N_BINS,
    SNR_CAP,
    WINDOW_LEN,
    Spectrogram,
    istft_ls,
    load_wav,
    mix_at_snr,
    save_wav,
    snr_db,
    stft,
)
from .grad import (
    OBJECTIVES,
    FiniteDiffReport,
    Gradient,
    finite_diff_check,
    finite_diff_scan,
    gradient,
    make_objective,
)
from .masks import (
    MASK_CAP,
    RefineStep,
    RefineTrace,
    apply_mask,
    oracle_iam,
    oracle_psm,
    oracle_report,
    refine,
)
from .multitask import (
    CombinationWeights,
    loss_sdr_pesq,
    loss_sdr_pesq_stoi,
    loss_sdr_stoi,
)
from .pesq import (
    TABLES_ENV_VAR,
    PesqBreakdown,
    PesqTables,
    TableError,
    aggregate,
    bark_spectrum,
    default_tables,
    disturbance,
    frame_disturbances,
    level_align,
    load_tables,
    loss_pesq,
    loss_pesq_batch,
    loudness,
    tf_equalize,
)
from .sdr import SDR_CAP, SdrDecomposition, decompose, hit_clamp, loss_sdr, si_sdr
from .stoi import (
    OctaveBands,
    StoiBreakdown,
    build_octave_bands,
    loss_stoi,
    loss_stoi_batch,
    octave_decompose,
    stoi_segment,
)
from .synth import (
    NOISE_KINDS,
    babble_proxy,
    clean_proxy,
    gradcheck_pair,
    noise,
    pink_noise,
    white_noise,
)

__version__ = "0.1.0"

__all__ = [
    "EPS",
    "HOP",
    "MASK_CAP",
    "N_BINS",
    "NOISE_KINDS",
    "OBJECTIVES",
    "SAMPLE_RATE",
    "SDR_CAP",
    "SNR_CAP",
    "TABLES_ENV_VAR",
    "WINDOW_LEN",
    "CombinationWeights",
    "FiniteDiffReport",
    "Gradient",
    "NonFiniteError",
    "OctaveBands",
    "PesqBreakdown",
    "PesqTables",
    "RefineStep",
    "RefineTrace",
    "SdrDecomposition",
    "Spectrogram",
    "StoiBreakdown",
    "TableError",
    "aggregate",
    "apply_mask",
    "babble_proxy",
    "bark_spectrum",
    "build_octave_bands",
    "clean_proxy",
    "decompose",
    "default_tables",
    "disturbance",
    "finite_diff_check",
    "finite_diff_scan",
    "frame_disturbances",
    "gradcheck_pair",
    "gradient",
    "hit_clamp",
    "istft_ls",
    "level_align",
    "load_tables",
    "load_wav",
    "loss_pesq",
    "loss_pesq_batch",
    "loss_sdr",
    "loss_sdr_pesq",
    "loss_sdr_pesq_stoi",
    "loss_sdr_stoi",
    "loss_stoi",
    "loss_stoi_batch",
    "loudness",
    "make_objective",
    "mix_at_snr",
    "noise",
    "octave_decompose",
    "oracle_iam",
    "oracle_psm",
    "oracle_report",
    "pink_noise",
    "refine",
    "save_wav",
    "si_sdr",
    "snr_db",
    "stft",
    "stoi_segment",
    "tf_equalize",
    "white_noise",
]
