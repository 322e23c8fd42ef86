"""``declip`` command-line tool.

Subcommands: ``clip``, ``declip``, ``metrics``, ``bench``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .bench import run_phase_transition, snr_db, tau_for_isnr
from .config import ConfigError, bench_config, frame_plan, load_config, solver_config, to_ini
from .framing import FramePlan, declip_audio
from .signal_model import clip
from .wavio import PCM16_STEP, WavAudio, file_digest, read_wav, write_wav

log = logging.getLogger("declip")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
REPORT_SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def _dump_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n", encoding="utf-8")


@dataclass
class RunManifest:
    subcommand: str
    config: Dict
    params: Dict = field(default_factory=dict)
    outputs: Dict = field(default_factory=dict)
    seed: Optional[int] = None
    version: str = __version__
    inputs: Dict[str, str] = field(default_factory=dict)
    argv: List[str] = field(default_factory=list)
    runtime_s: Optional[float] = None

    def write(self, path: Path) -> None:
        _dump_json(
            path,
            {
                "subcommand": self.subcommand,
                "tool": "declip",
                "version": self.version,
                "seed": self.seed,
                "config": self.config,
                "config_ini": to_ini(self.config),
                "params": self.params,
                "outputs": self.outputs,
                "inputs": self.inputs,
                "argv": self.argv,
                "runtime_s": self.runtime_s,
            },
        )


def _threads(arg: Optional[int]) -> int:
    if arg is not None:
        n = arg
    elif os.environ.get("DECLIP_THREADS"):
        try:
            n = int(os.environ["DECLIP_THREADS"])
        except ValueError:
            raise UsageError("DECLIP_THREADS must be an integer") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _manifest_path(args, default: Optional[Path]) -> Optional[Path]:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    return default


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def cmd_clip(args) -> int:
    t0 = time.perf_counter()
    audio = read_wav(args.input)
    out = np.empty_like(audio.samples)
    taus = []
    for c, x in enumerate(audio.samples):
        if args.tau is not None:
            tau = args.tau
        else:
            if not np.any(x):
                raise ValueError(f"channel {c} is silent; cannot target an iSNR")
            tau = tau_for_isnr(x, args.isnr_db, args.tol_db)
        out[c] = clip(x, tau).samples
        taus.append(tau)
    result = WavAudio(audio.sample_rate, out, audio.bit_depth)
    write_wav(args.output, result)
    # report against what was actually written (PCM rounding included)
    written = read_wav(args.output).samples
    for c, tau in enumerate(taus):
        x = audio.samples[c]
        value = snr_db(x, written[c]) if np.any(x) else math.inf
        print(f"channel {c}: tau={tau:.6g} isnr_db={value:.6f}")
    m = RunManifest(
        "clip",
        {},
        params={"tau": args.tau, "isnr_db": args.isnr_db, "tol_db": args.tol_db, "taus": taus},
        outputs={"wav": str(args.output)},
        inputs={str(args.input): file_digest(args.input)},
        argv=sys.argv[1:],
        runtime_s=time.perf_counter() - t0,
    )
    m.write(_manifest_path(args, _sibling(Path(args.output), ".manifest.json")))
    return EXIT_OK


def cmd_declip(args) -> int:
    t0 = time.perf_counter()
    resolved = load_config(args.config)
    f = resolved["framing"]
    if args.frame is not None:
        f["frame_len"] = args.frame
    if args.hop is not None:
        f["hop"] = args.hop
    if args.dict is not None:
        f["dict"] = args.dict
    if args.eps_mask is not None:
        f["eps_mask"] = args.eps_mask
    if args.replace_reliable:
        f["replace_reliable"] = True
    cfg = solver_config(resolved, adaptive=True)
    plan: FramePlan = frame_plan(resolved)
    threads = _threads(args.threads)

    audio = read_wav(args.input)
    eps = f["eps_mask"]
    if eps is None:
        eps = PCM16_STEP if audio.bit_depth == "pcm16" else 0.0
    reference = read_wav(args.reference) if args.reference else None
    if reference is not None and reference.samples.shape != audio.samples.shape:
        raise UsageError("reference and input differ in length or channel count")

    out = np.empty_like(audio.samples)
    channels = []
    for c, x in enumerate(audio.samples):
        y, frames = declip_audio(
            x, args.tau, f["dict"], cfg, plan,
            eps_mask=eps, replace_reliable=f["replace_reliable"], workers=threads,
        )
        out[c] = y.samples
        channels.append({"channel": c, "frames": [fr.to_dict() for fr in frames]})

    depth = audio.bit_depth if args.format == "same" else args.format
    write_wav(args.output, WavAudio(audio.sample_rate, out, depth))
    runtime = time.perf_counter() - t0
    if reference is not None:
        # score what was written, quantisation included
        out = read_wav(args.output).samples
        for c, entry in enumerate(channels):
            ref = reference.samples[c]
            entry["isnr_db"] = snr_db(ref, audio.samples[c])
            entry["osnr_db"] = snr_db(ref, out[c])
            entry["gain_db"] = entry["osnr_db"] - entry["isnr_db"]

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tau": args.tau,
        "eps_mask": eps,
        "sample_rate": audio.sample_rate,
        "duration_s": audio.duration,
        "runtime_s": runtime,
        "runtime_ratio": runtime / audio.duration if audio.duration else None,
        "isnr_db": None,
        "osnr_db": None,
        "gain_db": None,
        "channels": channels,
    }
    if reference is not None:
        ref = reference.samples.ravel()
        report["isnr_db"] = snr_db(ref, audio.samples.ravel())
        report["osnr_db"] = snr_db(ref, out.ravel())
        report["gain_db"] = report["osnr_db"] - report["isnr_db"]
        print(
            f"isnr_db={report['isnr_db']:.4f} osnr_db={report['osnr_db']:.4f} "
            f"gain_db={report['gain_db']:.4f}"
        )
    if args.report:
        _dump_json(Path(args.report), report)
    inputs = {str(args.input): file_digest(args.input)}
    if args.reference:
        inputs[str(args.reference)] = file_digest(args.reference)
    RunManifest(
        "declip",
        resolved,
        params={"tau": args.tau, "format": args.format, "eps_mask": eps, "threads": threads},
        outputs={"wav": str(args.output), "report": args.report},
        inputs=inputs,
        argv=sys.argv[1:],
        runtime_s=runtime,
    ).write(_manifest_path(args, _sibling(Path(args.output), ".manifest.json")))
    print(f"runtime_s={runtime:.3f} runtime_ratio={report['runtime_ratio']:.3f}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    a = read_wav(args.original)
    b = read_wav(args.processed)
    if a.samples.shape != b.samples.shape:
        raise UsageError(
            f"shape mismatch: {a.channels}x{a.n_frames} vs {b.channels}x{b.n_frames}"
        )
    values = {}
    for c in range(a.channels):
        values[f"channel_{c}"] = v = snr_db(a.samples[c], b.samples[c])
        print(f"channel {c}: {v:.6f}" if math.isfinite(v) else f"channel {c}: inf")
    overall = snr_db(a.samples.ravel(), b.samples.ravel())
    values["overall"] = overall
    print(f"overall: {overall:.6f}" if math.isfinite(overall) else "overall: inf")
    RunManifest(
        "metrics",
        {},
        outputs={"snr_db": values},
        inputs={str(p): file_digest(p) for p in (args.original, args.processed)},
        argv=sys.argv[1:],
    ).write(_manifest_path(args, _sibling(Path(args.processed), ".metrics.manifest.json")))
    return EXIT_OK


def _solver_csv_path(out: Path, solver: str, first: bool) -> Path:
    if first:
        return out
    return out.with_name(f"{out.stem}.{solver}{out.suffix or '.csv'}")


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    resolved = load_config(args.config)
    if args.seed is not None:
        resolved["bench"]["seed"] = args.seed
    cfg = bench_config(resolved)
    threads = _threads(args.threads)
    out = Path(args.out)
    solvers = resolved["bench"]["solvers"]
    written = {}
    runtimes = {}
    for i, name in enumerate(solvers):
        ts = time.perf_counter()
        result = run_phase_transition(cfg, name, workers=threads)
        runtimes[name] = time.perf_counter() - ts
        path = _solver_csv_path(out, name, i == 0)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.to_csv(include_runtime=args.record_runtime))
        written[name] = str(path)
        log.info("%s: wrote %s (%.1fs)", name, path, runtimes[name])
        print(f"{name}: {path}")
    RunManifest(
        "bench",
        resolved,
        params={"threads": threads, "record_runtime": args.record_runtime,
                "solver_runtime_s": runtimes},
        outputs=written,
        seed=cfg.seed,
        argv=sys.argv[1:],
        runtime_s=time.perf_counter() - t0,
    ).write(_manifest_path(args, _sibling(out, ".manifest.json")))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="declip", description="Sparse declipping with consistent IHT.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("clip", help="hard-clip a WAV file")
    c.add_argument("input")
    c.add_argument("output")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--tau", type=float, help="clipping level in full-scale units")
    g.add_argument("--isnr-db", type=float, help="target input SNR per channel")
    c.add_argument("--tol-db", type=float, default=0.1)
    c.add_argument("--manifest")
    c.set_defaults(func=cmd_clip)

    d = sub.add_parser("declip", help="restore a clipped WAV file")
    d.add_argument("input")
    d.add_argument("output")
    d.add_argument("--tau", type=float, required=True)
    d.add_argument("--frame", type=int)
    d.add_argument("--hop", type=int)
    d.add_argument("--dict", choices=("orthonormal_dct", "redundant_dct"))
    d.add_argument("--eps-mask", type=float, help="default: one LSB for 16-bit input, else 0")
    d.add_argument("--replace-reliable", action="store_true")
    d.add_argument("--config")
    d.add_argument("--report")
    d.add_argument("--reference", help="unclipped original, for iSNR/oSNR in the report")
    d.add_argument("--format", choices=("same", "pcm16", "float32"), default="same")
    d.add_argument("--threads", type=int)
    d.add_argument("--manifest")
    d.set_defaults(func=cmd_declip)

    m = sub.add_parser("metrics", help="SNR of a processed file against an original")
    m.add_argument("original")
    m.add_argument("processed")
    m.add_argument("--manifest")
    m.set_defaults(func=cmd_metrics)

    b = sub.add_parser("bench", help="phase-transition benchmark on synthetic sparse signals")
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--threads", type=int)
    b.add_argument("--record-runtime", action="store_true",
                   help="write measured runtimes to the CSV (breaks byte reproducibility)")
    b.add_argument("--manifest")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"declip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"declip: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"declip: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
