"""``hosdetect`` command line.

Exit codes of ``analyze``: 0 no hard-limit nonlinearity, 10 unilateral,
11 bilateral, 2 any error.  The first axis (in the order given by
``--axis``) with a detection decides the code.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, detect, hos, io, synth, vscsim
from .dq import DqSignal
from .errors import ConfigError, HosDetectError
from .hardlimit import HardLimitSpec, LimitKind, SineInput

EXIT_NONE, EXIT_UNILATERAL, EXIT_BILATERAL, EXIT_ERROR = 0, 10, 11, 2
_EXIT = {
    detect.Classification.NONE: EXIT_NONE,
    detect.Classification.UNILATERAL: EXIT_UNILATERAL,
    detect.Classification.BILATERAL: EXIT_BILATERAL,
}

log = logging.getLogger("hosdetect")


def _setup_logging() -> None:
    level = os.environ.get("HOSDETECT_LOG", "WARNING").upper()
    if level.isdigit():
        lvl = int(level)
    else:
        lvl = getattr(logging, level, logging.WARNING)
    logging.basicConfig(level=lvl, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _axes(text: str) -> tuple[str, ...]:
    axes = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = [a for a in axes if a not in ("d", "q")]
    if bad or not axes:
        raise argparse.ArgumentTypeError(f"axes must be drawn from d,q; got {text!r}")
    return axes


def _add_record_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("record", help="CSV waveform record")
    p.add_argument("--fs", type=float, help="override the sample rate in the header (Hz)")
    p.add_argument("--nominal-freq", type=float, help="fundamental for the dq transform (Hz)")
    p.add_argument("--segments", type=int, help="number of segments M")
    p.add_argument("--seglen", type=int, help="segment length N")
    p.add_argument("--window", choices=("hann", "rect"), default="hann")
    p.add_argument("--sigma", type=float, default=0.001, help="spectral floor factor")
    p.add_argument("--max-tri-bin", type=int, help="highest bin kept in the trispectrum")
    p.add_argument("--axis", type=_axes, default=("d", "q"), help="comma list of axes, e.g. d,q")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hosdetect", description="Hard-limit detection from waveform records.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="classify the record and write a JSON report")
    _add_record_flags(pa)
    pa.add_argument("--threshold", type=float, default=0.3, help="coherence peak threshold")
    pa.add_argument("--dump-spectra", metavar="DIR", help="also write spectrum grids here")
    pa.add_argument("--out", help="report path (default: stdout)")
    pa.add_argument("--strict", action="store_true", help="fail on inconsistent evidence")

    ps = sub.add_parser("spectrum", help="write power and coherence grids only")
    _add_record_flags(ps)
    ps.add_argument("--out", required=True, metavar="DIR", help="output directory")

    pg = sub.add_parser("gen", help="generate a synthetic record")
    gsub = pg.add_subparsers(dest="generator", required=True)

    gt = gsub.add_parser("tones", help="sum of phase-noisy tones")
    gt.add_argument("--f", default="0.6381,0.8345,coupled",
                    help="comma list of Hz values; 'coupled' adds f1+f2")
    gt.add_argument("--phases", help="comma list of phases (rad), one per tone")
    gt.add_argument("--random-coupled", action="store_true",
                    help="redraw the coupled tone phase every segment")
    gt.add_argument("--fs", type=float, default=5.0)
    gt.add_argument("--length", type=int, default=8192)
    gt.add_argument("--seglen", type=int, default=128, help="segment length for phase redraws")
    gt.add_argument("--noise-db", type=float, default=-20.0)

    gc = gsub.add_parser("clipped", help="clipped sine")
    gc.add_argument("--kind", choices=[k.value for k in LimitKind], required=True)
    gc.add_argument("--eta", type=float, default=2.0, help="saturation level A/a")
    gc.add_argument("--f", type=float, default=33.8)
    gc.add_argument("--fs", type=float, default=1000.0)
    gc.add_argument("--length", type=int, default=32768)
    gc.add_argument("--amplitude", type=float, default=1.0)
    gc.add_argument("--noise-db", type=float, default=-40.0)

    gs = gsub.add_parser("simulate", help="run the VSC loop simulator")
    gs.add_argument("--preset", choices=sorted(vscsim.PRESETS), default="case2-reduced")
    gs.add_argument("--fs", type=float, default=1000.0, help="output sample rate")
    gs.add_argument("--t-start", type=float, default=4.0, help="discard output before this time")
    gs.add_argument("--format", choices=("dq", "abc"), default="dq")
    gs.add_argument("--noise-db", type=float, default=-60.0,
                    help="measurement noise relative to the operating current")
    gs.add_argument("--no-limit", action="store_true", help="remove the limiter (diverges)")

    for p in (gt, gc, gs):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="record path (default: stdout)")
    return ap


# --- helpers -------------------------------------------------------------------


def _load(args) -> io.Record:
    path = Path(args.record)
    if not path.is_file():
        raise ConfigError(f"no such record file: {path}", step="parse")
    return io.read_record(path, nominal_freq=args.nominal_freq, fs=args.fs)


def _seg_config(x: np.ndarray, dt: float, args) -> hos.SegmentConfig:
    kw = dict(window=args.window, sigma_floor=args.sigma, max_tri_bin=args.max_tri_bin)
    if args.seglen is None and args.segments is None:
        x = np.asarray(x, dtype=float)
        return hos.default_segment_config(x - x.mean(), dt, **kw)
    N = args.seglen
    if N is None:
        N = len(x) // args.segments
    M = args.segments if args.segments is not None else len(x) // N
    return hos.SegmentConfig(M=M, N=N, **kw)


def _channels(rec: io.Record, axes) -> tuple[DqSignal, dict]:
    dq = detect.to_dq(rec)
    return dq, {a: dq.axis(a) for a in axes}


def _dump(dirpath: Path, axis: str, spec: hos.SpectrumSet) -> None:
    dirpath.mkdir(parents=True, exist_ok=True)
    io.write_series(dirpath / f"power_{axis}.csv", spec.freqs(), spec.power, "power")
    if spec.bic is not None:
        io.write_grid(dirpath / f"bicoherence_{axis}.csv", spec.bic.values, spec.df)
    if spec.tric is not None:
        io.write_cube(dirpath / f"tricoherence_{axis}.csv", spec.tric.values, spec.df)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------------


def cmd_analyze(args) -> int:
    rec = _load(args)
    dq, chans = _channels(rec, args.axis)
    det = detect.DetectionConfig(sigma_b=args.threshold)
    scale = max(float(np.sqrt(np.mean(dq.axis(a) ** 2))) for a in ("d", "q"))
    reports = []
    for axis, x in chans.items():
        seg = _seg_config(x, dq.dt, args)
        reports.append(detect.analyze_channel(x, dq.dt, seg, det, axis,
                                              keep_spectra=bool(args.dump_spectra), ref_scale=scale))
        if args.strict:
            detect.classify(reports[-1].bic_peaks, reports[-1].tric_peaks, cfg=det, strict=True)
    if args.dump_spectra:
        for r in reports:
            if r.spectra is not None:
                _dump(Path(args.dump_spectra), r.axis, r.spectra)
    config = {
        "detection": asdict(det),
        "segments": {r.axis: r.segment_config.to_dict() for r in reports},
        "axes": list(args.axis),
        "sample_rate_hz": 1.0 / dq.dt,
        "nominal_freq_hz": dq.omega / (2 * math.pi),
        "theta0": dq.theta0,
    }
    doc = io.build_report(reports, config, io.digest(args.record), __version__)
    _emit(io.dumps_report(doc), args.out)
    for r in reports:
        if r.classification is not detect.Classification.NONE:
            return _EXIT[r.classification]
    return EXIT_NONE


def cmd_spectrum(args) -> int:
    rec = _load(args)
    dq, chans = _channels(rec, args.axis)
    out = Path(args.out)
    for axis, x in chans.items():
        x = np.asarray(x, dtype=float)
        if not np.sqrt(np.mean((x - x.mean()) ** 2)) > 1e-9 * max(np.sqrt(np.mean(x * x)), 1e-300):
            log.info("axis %s is constant; skipped", axis)
            continue
        seg = _seg_config(x, dq.dt, args)
        spec = hos.compute_spectra(x - x.mean(), seg, dq.dt)
        _dump(out, axis, spec)
    return EXIT_NONE


def _parse_tones(args) -> synth.ToneSpec:
    freqs: list[float] = []
    coupled = False
    for tok in args.f.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if tok == "coupled":
            if len(freqs) < 2:
                raise ConfigError("'coupled' needs two frequencies before it")
            coupled = True
            continue
        freqs.append(float(tok))
    if coupled:
        freqs.append(freqs[0] + freqs[1])
    phases = [0.0] * len(freqs)
    if args.phases:
        given = [float(v) for v in args.phases.split(",")]
        if len(given) != len(freqs):
            raise ConfigError(f"{len(given)} phases for {len(freqs)} tones")
        phases = given
    tones = []
    for k, (f, ph) in enumerate(zip(freqs, phases)):
        rand = args.random_coupled and coupled and k == len(freqs) - 1
        mode = synth.PhaseMode.PER_SEGMENT_RANDOM if rand else synth.PhaseMode.FIXED
        tones.append(synth.Tone(f, phase=ph, mode=mode))
    return synth.ToneSpec(tones, args.fs, args.length, noise_db=args.noise_db,
                          segment_length=args.seglen)


def _dq_record(x: np.ndarray, fs: float, nominal: float, meta: dict) -> DqSignal:
    return DqSignal(xd=x, xq=np.zeros_like(x), x0=np.zeros_like(x),
                    omega=2 * math.pi * nominal, dt=1.0 / fs, meta=meta)


def cmd_gen(args) -> int:
    if args.generator == "tones":
        spec = _parse_tones(args)
        x = synth.gen_tones(spec, seed=args.seed)
        rec = _dq_record(x, args.fs, 50.0, {})
    elif args.generator == "clipped":
        if not args.eta >= 1:
            raise ConfigError(f"eta must be >= 1, got {args.eta}")
        A = args.amplitude
        lim = HardLimitSpec(LimitKind(args.kind), a=A / args.eta)
        x = synth.gen_clipped_sine(SineInput(A=A, f=args.f), lim, args.fs, args.length,
                                   seed=args.seed, noise_db=args.noise_db)
        rec = _dq_record(x, args.fs, 50.0, {})
    else:
        spec, events, duration = vscsim.PRESETS[args.preset](limited=not args.no_limit)
        res = vscsim.simulate(spec, duration, events, fs_out=args.fs).window(args.t_start)
        if args.format == "abc":
            rec = res.three_phase(noise_rel_db=args.noise_db, seed=args.seed)
        else:
            rng = np.random.default_rng(args.seed)
            sd = abs(spec.operating_point()["id0"]) * math.sqrt(10 ** (args.noise_db / 10))
            xd = res["id"] + rng.normal(0.0, sd, len(res))
            xq = res["iq"] + rng.normal(0.0, sd, len(res))
            rec = DqSignal(xd=xd, xq=xq, x0=np.zeros(len(res)), omega=spec.omega0,
                           dt=res.dt, meta={})
    _emit(io.format_record(rec, seed=args.seed), args.out)
    return EXIT_NONE


COMMANDS = {"analyze": cmd_analyze, "spectrum": cmd_spectrum, "gen": cmd_gen}


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_NONE
    try:
        return COMMANDS[args.command](args)
    except HosDetectError as exc:
        print(f"hosdetect: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"hosdetect: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
