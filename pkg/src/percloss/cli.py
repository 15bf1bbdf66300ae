"""Command-line surface: score pairs, mix at an SNR, verify gradients,
and run the oracle/refine experiment grid.

Exit codes: 0 success, 1 runtime or check failure, 2 usage error.
Console numbers print with 6 significant digits; JSON keeps full
precision. A fixed --seed makes every output byte-identical across runs.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from ._core import NonFiniteError
from .dsp import load_wav, mix_at_snr, save_wav, snr_db
from .grad import OBJECTIVES, finite_diff_scan
from .masks import oracle_report
from .multitask import loss_sdr_pesq, loss_sdr_pesq_stoi, loss_sdr_stoi
from .pesq import TABLES_ENV_VAR, TableError, loss_pesq
from .sdr import hit_clamp, si_sdr
from .stoi import loss_stoi
from .synth import NOISE_KINDS, clean_proxy, gradcheck_pair, noise

GRADCHECK_TOLERANCE = 1e-4
_REFINE_OBJECTIVES = ("sdr", "sdr-pesq", "sdr-pesq-stoi")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _load_pair(clean_path, degraded_path):
    clean = load_wav(clean_path)
    degraded = load_wav(degraded_path)
    if clean.size != degraded.size:
        shorter = min(clean.size, degraded.size)
        print(
            f"warning: length mismatch ({clean.size} vs {degraded.size} samples), "
            f"truncating both to {shorter}",
            file=sys.stderr,
        )
        clean, degraded = clean[:shorter], degraded[:shorter]
    return clean, degraded


def _cmd_score(args) -> int:
    clean, degraded = _load_pair(args.clean, args.degraded)
    pesq = loss_pesq(clean, degraded)
    stoi = loss_stoi(clean, degraded)
    sdr = si_sdr(clean, degraded)
    report = {
        "snr_db": snr_db(clean, degraded),
        "si_sdr_db": sdr,
        "si_sdr_clamped": hit_clamp(sdr),
        "pesq_loss": pesq.value,
        "pesq_d_sym": pesq.d_sym,
        "pesq_d_asym": pesq.d_asym,
        "stoi_loss": stoi.value,
        "sdr_pesq": loss_sdr_pesq(clean, degraded, args.alpha),
        "sdr_stoi": loss_sdr_stoi(clean, degraded, args.beta),
        "sdr_pesq_stoi": loss_sdr_pesq_stoi(clean, degraded, args.alpha, args.beta),
        "alpha": args.alpha,
        "beta": args.beta,
    }
    if args.format == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        clamp_note = " [clamped]" if report["si_sdr_clamped"] else ""
        print(f"snr_db         {_fmt(report['snr_db'])}")
        print(f"si_sdr_db      {_fmt(report['si_sdr_db'])}{clamp_note}")
        print(
            f"pesq_loss      {_fmt(report['pesq_loss'])} "
            f"(d_sym {_fmt(report['pesq_d_sym'])}, d_asym {_fmt(report['pesq_d_asym'])})"
        )
        print(f"stoi_loss      {_fmt(report['stoi_loss'])}")
        print(f"sdr_pesq       {_fmt(report['sdr_pesq'])} (alpha {_fmt(args.alpha)})")
        print(f"sdr_stoi       {_fmt(report['sdr_stoi'])} (beta {_fmt(args.beta)})")
        print(f"sdr_pesq_stoi  {_fmt(report['sdr_pesq_stoi'])}")
    return 0


def _cmd_mix(args) -> int:
    clean = load_wav(args.clean)
    nse = load_wav(args.noise)
    if clean.size != nse.size:
        shorter = min(clean.size, nse.size)
        print(
            f"warning: length mismatch ({clean.size} vs {nse.size} samples), "
            f"truncating both to {shorter}",
            file=sys.stderr,
        )
        clean, nse = clean[:shorter], nse[:shorter]
    noisy, _ = mix_at_snr(clean, nse, args.snr)
    peak = float(np.abs(noisy).max())
    if peak > 1.0:
        print(
            f"warning: peak amplitude {_fmt(peak)} exceeds 1, writing unclipped float-32",
            file=sys.stderr,
        )
    save_wav(args.out, noisy)
    print(f"wrote {args.out} ({noisy.size} samples at {_fmt(args.snr)} dB SNR)")
    return 0


def _cmd_gradcheck(args) -> int:
    clean, x_hat = gradcheck_pair(args.seed)
    report = finite_diff_scan(
        args.loss, x_hat, clean,
        n_coords=args.coords, step=args.step,
        rng=np.random.default_rng(args.seed),
        alpha=args.alpha, beta=args.beta,
    )
    passed = report.max_rel_error < GRADCHECK_TOLERANCE
    print(f"loss           {args.loss}")
    print(f"seed           {args.seed}")
    print(f"coordinates    {report.coords.size}")
    print(f"worst_coord    {report.worst_coord}")
    print(f"max_rel_error  {_fmt(report.max_rel_error)}")
    print(f"{'PASS' if passed else 'FAIL'} (tolerance {_fmt(GRADCHECK_TOLERANCE)})")
    return 0 if passed else 1


def _write_rows_csv(path: Path, rows) -> None:
    columns = ("condition", "snr_db", "si_sdr_db", "pesq_loss", "stoi_loss", "steps", "seed")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                row["condition"],
                _fmt(row["snr_db"]),
                _fmt(row["si_sdr_db"]),
                _fmt(row["pesq_loss"]),
                _fmt(row["stoi_loss"]),
                row["steps"],
                row["seed"],
            ])


def _cmd_experiment(args) -> int:
    snrs = [float(s) for s in args.snr.split(",")]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    clean = clean_proxy(args.duration, args.seed)
    noise_sig = noise(args.noise, args.duration, args.seed + 1)

    rows = oracle_report(
        clean, noise_sig, snrs, seed=args.seed,
        refine_objectives=_REFINE_OBJECTIVES,
        steps=args.steps, step_size=args.step_size,
        alpha=args.alpha, beta=args.beta,
    )
    for row in rows:
        print(f"[{row['condition']} @ {row['snr_db']:+g} dB] "
              f"si_sdr {_fmt(row['si_sdr_db'])} pesq {_fmt(row['pesq_loss'])} "
              f"stoi {_fmt(row['stoi_loss'])}")

    by_key = {(r["condition"], r["snr_db"]): r for r in rows}

    def per_snr(cond, metric):
        return {f"{s:+g}": by_key[(cond, s)][metric] for s in snrs}

    psm_vs_iam = {
        f"{s:+g}": by_key[("psm", s)]["si_sdr_db"] >= by_key[("iam", s)]["si_sdr_db"]
        for s in snrs
    }
    pesq_reg = {
        f"{s:+g}": by_key[("refine-sdr-pesq", s)]["pesq_loss"]
        > by_key[("refine-sdr", s)]["pesq_loss"]
        for s in snrs
    }
    trends = {
        "psm_si_sdr_ge_iam": {"per_snr": psm_vs_iam, "pass": all(psm_vs_iam.values())},
        "sdr_pesq_improves_pesq_over_sdr": {"per_snr": pesq_reg, "pass": all(pesq_reg.values())},
    }
    if 0.0 in snrs:
        gain = (by_key[("refine-sdr", 0.0)]["si_sdr_db"]
                - by_key[("noisy", 0.0)]["si_sdr_db"])
        trends["refine_sdr_gain_at_0db"] = {"gain_db": gain, "pass": gain >= 5.0}

    summary = {
        "note": "oracle mask rows upper-bound trained estimators; compare directions, not levels",
        "config": {
            "snr_db": snrs, "steps": args.steps, "step_size": args.step_size,
            "seed": args.seed, "alpha": args.alpha, "beta": args.beta,
            "noise": args.noise, "duration_s": args.duration,
        },
        "oracle_conditions": {
            "si_sdr_db": {c: per_snr(c, "si_sdr_db") for c in ("noisy", "iam", "psm")},
        },
        "trends": trends,
    }

    if args.format == "csv":
        _write_rows_csv(out_dir / "report.csv", rows)
        report_path = out_dir / "report.csv"
    else:
        report_path = out_dir / "report.json"
        with open(report_path, "w") as f:
            json.dump(rows, f, indent=2, sort_keys=True)
            f.write("\n")
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {report_path} and {summary_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percloss",
        description="Perceptual speech objectives: SI-SDR, PESQ-style, STOI-style.",
        epilog=f"The {TABLES_ENV_VAR} environment variable overrides the "
               "perceptual-constant table file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a clean/degraded WAV pair")
    p.add_argument("clean")
    p.add_argument("degraded")
    p.add_argument("--alpha", type=float, default=1.0, help="PESQ weight (default 1.0)")
    p.add_argument("--beta", type=float, default=1.0, help="STOI weight (default 1.0)")
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="output format (default text)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("mix", help="mix clean and noise WAVs at an SNR")
    p.add_argument("clean")
    p.add_argument("noise")
    p.add_argument("--snr", type=float, required=True, help="target SNR in dB")
    p.add_argument("--out", required=True, help="output WAV path")
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("gradcheck", help="finite-difference check of one objective")
    p.add_argument("--loss", choices=OBJECTIVES, required=True)
    p.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    p.add_argument("--coords", type=int, default=64,
                   help="checked coordinates (default 64)")
    p.add_argument("--step", type=float, default=1e-6,
                   help="central-difference step (default 1e-6)")
    p.add_argument("--alpha", type=float, default=1.0, help="PESQ weight (default 1.0)")
    p.add_argument("--beta", type=float, default=1.0, help="STOI weight (default 1.0)")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("experiment", help="oracle masks + refiners over an SNR grid")
    p.add_argument("--snr", default="-10,-5,0,5,10,15",
                   help="comma-separated SNR list in dB; write --snr=-10,0,10 "
                        "when the first value is negative (default -10,-5,0,5,10,15)")
    p.add_argument("--steps", type=int, default=300,
                   help="refiner step budget (default 300)")
    p.add_argument("--step-size", type=float, default=1.0, dest="step_size",
                   help="initial refiner step size (default 1.0)")
    p.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    p.add_argument("--alpha", type=float, default=1.0, help="PESQ weight (default 1.0)")
    p.add_argument("--beta", type=float, default=1.0, help="STOI weight (default 1.0)")
    p.add_argument("--noise", choices=NOISE_KINDS, default="white",
                   help="noise type (default white)")
    p.add_argument("--duration", type=float, default=2.0,
                   help="utterance length in seconds (default 2.0)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="row-report format (default csv); summary is always JSON")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, TableError, NonFiniteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
