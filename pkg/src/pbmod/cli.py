"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or file-format error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .iqfile import MAGIC, IqFileError, SampleFormat, read_iq_file, write_iq_file
from .mapper import (
    LEVEL_CODE_SCALE,
    OCTANT_LEVELS,
    Scheme,
    SymbolMapper,
    codes_to_levels,
    decode_octants,
    decode_oqpsk_rails,
    level_codes,
    split_rails,
)
from .modulator import configure, modulate
from .pulseshape import COEFF_FRAC_BITS, ROLLOFFS, FilterBank, gen_rc_coeffs, gen_rrc_coeffs, quantize_mantissas

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def _alpha_from(args) -> float | None:
    if getattr(args, "alpha_index", None) is not None:
        return ROLLOFFS[args.alpha_index]
    return getattr(args, "alpha", None)


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def read_bits(source: str, bits_per_byte: int | None = None) -> np.ndarray:
    """Load payload bits from a file, or draw ``N`` random bits for ``random:N``."""
    if source.startswith("random:"):
        try:
            n = int(source.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad random bit count in {source!r}") from None
        if n < 0:
            raise UsageError("random bit count must be non-negative")
        seed = int(os.environ.get("PBM_SEED", "0"))
        return np.random.default_rng(seed).integers(0, 2, n, dtype=np.uint8)
    try:
        raw = Path(source).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {source}: {exc.strerror}") from None
    if bits_per_byte == 8:
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    text = b"".join(raw.split())
    bad = set(text) - {ord("0"), ord("1")}
    if bad:
        raise DataError(f"{source}: expected ASCII 0/1 characters, found {sorted(chr(c) for c in bad)[:5]}")
    return np.frombuffer(text, dtype=np.uint8) - ord("0")


def _write_csv(path: str | None, header: list[str], rows) -> None:
    fh, close = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# coeffs


def cmd_coeffs(args) -> int:
    alpha = _alpha_from(args)
    if alpha is None:
        raise UsageError("one of --alpha-index or --alpha is required")
    gen = gen_rrc_coeffs if args.shape == "rrc" else gen_rc_coeffs
    try:
        real = gen(alpha, args.taps, args.sps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "real":
        _write_csv(args.out, ["tap_index", "real_value"], ((n, repr(float(v))) for n, v in enumerate(real)))
    elif args.format == "fixed":
        mant = quantize_mantissas(real)
        _write_csv(
            args.out,
            ["tap_index", "real_value", "quantized_mantissa", "frac_bits"],
            ((n, repr(float(v)), int(m), COEFF_FRAC_BITS) for n, (v, m) in enumerate(zip(real, mant))),
        )
    else:
        if args.taps % args.sps:
            raise UsageError(f"--taps {args.taps} must be a multiple of --sps {args.sps} for LUT output")
        bank = FilterBank.design(alpha, args.taps, args.sps, args.shape)
        luts = bank.plane_luts()
        rows = (
            (p, b, a, int(luts[p, b, a]))
            for p in range(luts.shape[0])
            for b in range(luts.shape[1])
            for a in range(luts.shape[2])
        )
        _write_csv(args.out, ["phase", "bit_plane", "address", "value"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# modulate


def _suffixed(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}{path.suffix}")


def cmd_modulate(args) -> int:
    scheme = Scheme.from_name(args.mod)
    bits = read_bits(args.input, args.bits_per_byte)
    if bits.size % 2:
        raise DataError(f"odd number of input bits ({bits.size}); symbols take bit pairs, pad the input to an even length")
    cfg = configure(int(scheme), args.flt)
    out = Path(args.out)
    if args.raw_levels:
        if args.emit != "rails":
            raise UsageError("--raw-levels only applies to --emit rails")
        i_bits, q_bits = split_rails(bits)
        i_lv, q_lv = SymbolMapper(scheme).map_rails(i_bits, q_bits)
        codes = np.column_stack([level_codes(i_lv), level_codes(q_lv)])
        write_iq_file(out, cfg.mod_sel, cfg.flt_sel, SampleFormat.SYMBOL_CODES, codes)
        print(f"wrote {len(codes)} symbol codes to {out}")
        return EXIT_OK
    stream = modulate(bits, cfg)
    if args.emit == "both":
        targets = [(_suffixed(out, "rails"), "rails"), (_suffixed(out, "if"), "if")]
    else:
        targets = [(out, args.emit)]
    for path, kind in targets:
        if kind == "rails":
            write_iq_file(path, cfg.mod_sel, cfg.flt_sel, SampleFormat.RAILS, np.column_stack([stream.irail, stream.qrail]))
        else:
            write_iq_file(path, cfg.mod_sel, cfg.flt_sel, SampleFormat.IF, stream.finalout)
        print(f"wrote {len(stream)} {kind} samples to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _load_coefficients(path: Path) -> np.ndarray:
    try:
        rows = list(csv.DictReader(io.StringIO(path.read_text())))
    except UnicodeDecodeError:
        raise DataError(f"{path} is neither a PBM1 file nor a coefficient CSV") from None
    if not rows:
        raise DataError(f"{path}: no coefficient rows")
    col = "quantized_mantissa" if "quantized_mantissa" in rows[0] else "real_value"
    if col not in rows[0]:
        raise DataError(f"{path}: expected a real_value or quantized_mantissa column")
    try:
        return np.array([float(r[col]) for r in rows])
    except (TypeError, ValueError):
        raise DataError(f"{path}: non-numeric {col} entry") from None


def _symbol_code_bits(data: np.ndarray, scheme: Scheme) -> np.ndarray:
    lv = np.column_stack([codes_to_levels(data[:, 0]), codes_to_levels(data[:, 1])])
    if scheme == Scheme.OQPSK:
        return decode_oqpsk_rails(lv[:, 0], lv[:, 1])
    lookup = {(int(i), int(q)): k for k, (i, q) in enumerate(OCTANT_LEVELS)}
    try:
        octs = np.array([lookup[(int(i), int(q))] for i, q in lv], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"symbol {exc.args[0]} is not a constellation point") from None
    return decode_octants(octs, scheme)


def cmd_analyze(args) -> int:
    path = Path(args.input)
    try:
        raw_head = path.read_bytes()[:4]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None

    if raw_head != MAGIC:
        if args.report != "spectrum":
            raise DataError(f"{path}: not a PBM1 file (bad magic)")
        alpha = _alpha_from(args)
        if alpha is None:
            raise UsageError("--alpha or --alpha-index is required to analyse a coefficient file")
        coeffs = _load_coefficients(path)
        rep = analysis.magnitude_response(coeffs, max(analysis.DFT_SIZE, 8 * coeffs.size), alpha=alpha, sps=args.sps)
        _write_csv(args.out or str(path.with_suffix(".spectrum.csv")), ["frequency", "magnitude_db"],
                   ((repr(float(f)), repr(float(d))) for f, d in zip(rep.frequencies, rep.magnitude_db)))
        print(f"stopband_peak_db: {rep.stopband_peak_db:.2f}")
        return EXIT_OK

    header, data = read_iq_file(path)
    cfg = configure(header.mod_sel, header.flt_sel)
    fmt = header.sample_format
    out = args.out or str(path.with_suffix(f".{args.report}.csv"))

    if args.report == "spectrum":
        if fmt == SampleFormat.SYMBOL_CODES:
            raise DataError("spectrum needs sample data, not symbol codes")
        samples = data if fmt == SampleFormat.IF else data[:, 0] + 1j * data[:, 1]
        if len(samples) < args.segment_length:
            raise DataError(f"need at least {args.segment_length} samples for the spectrum")
        rep = analysis.psd(samples, args.segment_length)
        _write_csv(out, ["frequency", "magnitude_db"],
                   ((repr(float(f)), repr(float(d))) for f, d in zip(rep.frequencies, rep.magnitude_db)))
        line = f"peak_frequency: {rep.peak_frequency:.6f} centroid: {rep.centroid:.6f}"
        if fmt == SampleFormat.IF:
            line += f" out_of_band_peak_db: {analysis.if_out_of_band_db(rep, cfg.alpha, cfg.sps):.2f}"
        print(line)
        return EXIT_OK

    if args.report == "constellation":
        if fmt == SampleFormat.SYMBOL_CODES:
            pts = data.astype(float) / LEVEL_CODE_SCALE
            ideal = analysis.ideal_points(cfg.scheme)
            idx, dist = analysis.nearest_ideal(pts, ideal)
            cap = analysis.ConstellationCapture(pts, ideal, idx, float(dist.max()) if len(pts) else 0.0)
        else:
            stream = data if fmt == SampleFormat.IF else (data[:, 0], data[:, 1])
            cap = analysis.capture_constellation(stream, cfg, args.timing_offset, args.points,
                                                 use_if=fmt == SampleFormat.IF)
        _write_csv(out, ["i", "q"], ((repr(float(i)), repr(float(q))) for i, q in cap.points))
        print(f"clusters: {cap.clusters} max_deviation: {cap.max_deviation:.6f}")
        return EXIT_OK

    # loopback
    if fmt == SampleFormat.SYMBOL_CODES:
        bits = _symbol_code_bits(data, cfg.scheme)
    else:
        stream = data if fmt == SampleFormat.IF else (data[:, 0], data[:, 1])
        bits = analysis.demodulate(stream, cfg, args.timing_offset)
    mismatches = None
    if args.ref:
        ref = read_bits(args.ref)
        n = min(len(ref), len(bits))
        mismatches = int(np.count_nonzero(ref[:n] != bits[:n])) + abs(len(ref) - len(bits))
    elif fmt != SampleFormat.SYMBOL_CODES:
        # no reference: re-modulate the decisions and compare sample for sample
        again = modulate(bits, cfg)
        mine = again.finalout if fmt == SampleFormat.IF else np.column_stack([again.irail, again.qrail])
        if mine.shape != data.shape:
            mismatches = max(len(mine), len(data))
        else:
            mismatches = int(np.count_nonzero(np.any((mine != data).reshape(len(data), -1), axis=1)))
    _write_csv(out, ["bit"], ((int(b),) for b in bits))
    line = f"recovered_bits: {len(bits)}"
    if mismatches is not None:
        line += f" mismatches: {mismatches}"
    print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbmod", description="Programmable QPSK-family baseband modulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("coeffs", help="dump pulse-shaping coefficients or DA tables")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha-index", type=int, choices=range(4), help="FLT_SEL value (0.22, 0.35, 0.5, 0.9)")
    g.add_argument("--alpha", type=float, help="explicit roll-off factor")
    p.add_argument("--taps", type=int, default=32)
    p.add_argument("--sps", type=int, default=4)
    p.add_argument("--shape", choices=("rrc", "rc"), default="rrc")
    p.add_argument("--format", choices=("real", "fixed", "lut"), default="fixed")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("modulate", help="modulate a bit file into a PBM1 sample file")
    p.add_argument("--mod", required=True, choices=("qpsk", "dqpsk", "pi4dqpsk", "oqpsk"))
    p.add_argument("--flt", type=int, required=True, choices=range(4))
    p.add_argument("--in", dest="input", required=True, help="bit file, or random:N (seeded by PBM_SEED)")
    p.add_argument("--out", required=True)
    p.add_argument("--emit", choices=("rails", "if", "both"), default="if")
    p.add_argument("--bits-per-byte", type=int, choices=(8,), help="read raw bytes, MSB first, instead of ASCII 0/1")
    p.add_argument("--raw-levels", action="store_true", help="write 3-bit mapped symbol codes instead of samples")
    p.set_defaults(func=cmd_modulate)

    p = sub.add_parser("analyze", help="constellation, spectrum or loopback report for a sample file")
    p.add_argument("--in", dest="input", required=True, help="PBM1 file, or a coefficient CSV for --report spectrum")
    p.add_argument("--report", required=True, choices=("constellation", "spectrum", "loopback"))
    p.add_argument("--out", help="report CSV (default: next to the input)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha-index", type=int, choices=range(4))
    g.add_argument("--alpha", type=float)
    p.add_argument("--sps", type=int, default=4)
    p.add_argument("--ref", help="reference bit file for loopback bit mismatches")
    p.add_argument("--timing-offset", type=int, default=0)
    p.add_argument("--points", type=int, default=analysis.CAPTURE_POINTS)
    p.add_argument("--segment-length", type=int, default=256)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pbmod: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IqFileError, ValueError, OSError) as exc:
        print(f"pbmod: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
