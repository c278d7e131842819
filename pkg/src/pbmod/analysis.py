"""Verification instruments: filter spectra, ISI, constellations, PSD and a loopback demodulator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .mapper import (
    LEVEL_CODE_SCALE,
    OCTANT_LEVELS,
    LEVEL_AMPLITUDES,
    Scheme,
    decode_octants,
    decode_oqpsk_rails,
)
from .modulator import FLUSH_SYMBOLS, OQPSK_Q_DELAY, IfStream, ModConfig

DFT_SIZE = 8192
CAPTURE_POINTS = 512
GUARD_SYMBOLS = 8


@dataclass
class SpectrumReport:
    frequencies: np.ndarray  # cycles/sample
    magnitude_db: np.ndarray  # relative to peak
    stopband_peak_db: float | None = None

    @property
    def peak_frequency(self) -> float:
        return float(self.frequencies[np.argmax(self.magnitude_db)])

    @property
    def centroid(self) -> float:
        """Power-weighted mean frequency."""
        power = 10.0 ** (self.magnitude_db / 10.0)
        return float(np.sum(self.frequencies * power) / np.sum(power))


def _to_db(mag: np.ndarray, power: bool = False) -> np.ndarray:
    peak = np.max(mag)
    with np.errstate(divide="ignore"):
        db = (10.0 if power else 20.0) * np.log10(mag / peak)
    return np.minimum(db, 0.0)


def magnitude_response(coeffs, n_points: int = DFT_SIZE, *, alpha: float, sps: int = 4) -> SpectrumReport:
    """Zero-padded DFT magnitude of ``coeffs`` in dB re. peak.

    The stopband starts at (1 + alpha) / (2 * sps) cycles/sample, the
    raised-cosine band edge for a pulse sampled ``sps`` times per symbol.
    """
    h = np.asarray(coeffs, dtype=float)
    if h.size == 0:
        raise ValueError("coefficient sequence is empty")
    if not np.any(h):
        raise ValueError("all-zero coefficients have no defined response")
    if n_points < 8 * h.size:
        raise ValueError(f"n_points={n_points} is below 8 x taps ({8 * h.size})")
    mag = np.abs(np.fft.rfft(h, n_points))
    freqs = np.fft.rfftfreq(n_points)
    db = _to_db(mag)
    edge = (1.0 + alpha) / (2.0 * sps)
    stop = freqs > edge
    sb = float(db[stop].max()) if stop.any() else float("-inf")
    return SpectrumReport(freqs, db, sb)


def isi_residual(coeffs, sps: int = 4) -> float:
    """Worst symbol-spaced sample of the self-convolution, relative to its peak."""
    h = np.asarray(coeffs, dtype=float)
    r = np.convolve(h, h)
    center = int(np.argmax(np.abs(r)))
    taps = r[center % sps :: sps]
    off = np.delete(taps, center // sps)
    if off.size == 0:
        return 0.0
    return float(np.max(np.abs(off)) / abs(r[center]))


def ideal_points(scheme: Scheme) -> np.ndarray:
    """Ideal constellation of ``scheme`` as (n, 2) real pairs, ordered by phase."""
    scheme = Scheme(scheme)
    if scheme == Scheme.PI4_DQPSK:
        octs = range(8)
    elif scheme == Scheme.OQPSK:
        octs = (1, 3, 5, 7)
    else:
        octs = (0, 2, 4, 6)
    amps = np.array(LEVEL_AMPLITUDES)
    return np.array([amps[OCTANT_LEVELS[k] + 2] for k in octs])


def _ideal_octants(scheme: Scheme) -> np.ndarray:
    scheme = Scheme(scheme)
    if scheme == Scheme.PI4_DQPSK:
        return np.arange(8)
    if scheme == Scheme.OQPSK:
        return np.array([1, 3, 5, 7])
    return np.array([0, 2, 4, 6])


@dataclass
class ConstellationCapture:
    points: np.ndarray  # (n, 2) I, Q
    ideal_set: np.ndarray  # (m, 2)
    nearest: np.ndarray  # index into ideal_set per point
    max_deviation: float

    @property
    def clusters(self) -> int:
        return int(np.unique(self.nearest).size)

    def cluster_centers(self) -> np.ndarray:
        return np.array([self.points[self.nearest == k].mean(axis=0) for k in np.unique(self.nearest)])


def nearest_ideal(points: np.ndarray, ideal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = np.linalg.norm(points[:, None, :] - ideal[None, :, :], axis=2)
    # argmin returns the first minimum: ties go to the lower index
    idx = np.argmin(d, axis=1)
    return idx, d[np.arange(len(points)), idx]


def downmix_fs4(finalout: np.ndarray, start_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Undo the fs/4 mixer: multiply by twice the conjugate mux pattern.

    The image at fs/2 that this leaves behind is removed by the matched
    filter.
    """
    x = np.asarray(finalout, dtype=float)
    phase = (start_index + np.arange(len(x))) % 4
    i = 2.0 * x * np.select([phase == 0, phase == 2], [1.0, -1.0], 0.0)
    q = 2.0 * x * np.select([phase == 1, phase == 3], [1.0, -1.0], 0.0)
    return i, q


def _rails(stream, *, use_if: bool) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(stream, IfStream):
        if use_if:
            return downmix_fs4(stream.finalout, stream.sample_index)
        return stream.irail.astype(float), stream.qrail.astype(float)
    if isinstance(stream, np.ndarray) and stream.ndim == 1:
        # bare IF samples, carrier phase 0 at index 0
        return downmix_fs4(stream)
    i, q = stream
    return np.asarray(i, dtype=float), np.asarray(q, dtype=float)


def matched_samples(
    irail,
    qrail,
    config: ModConfig,
    timing_offset: int = 0,
    *,
    pulse=None,
    code_scale: float | None = None,
) -> np.ndarray:
    """Matched-filter the rails and sample every symbol; returns (n_symbols, 2).

    Rail samples are normalised so that a unit-level symbol maps to 1.0.
    The decision instant of symbol m is ``sps*m + taps - 1`` samples into the
    matched output (two half-sample-offset group delays add up to a whole
    sample); OQPSK Q is read half a symbol later.

    By default the rails are assumed to carry 3-bit level codes shaped by the
    bank's integer taps.  Pass ``pulse`` (the transmit taps) and
    ``code_scale`` (rail value of a unit level per unit tap) to analyse rails
    built some other way, e.g. a floating-point reference.
    """
    bank = config.bank
    h = bank.mantissas.astype(float) if pulse is None else np.asarray(pulse, dtype=float)
    if code_scale is None:
        code_scale = LEVEL_CODE_SCALE * 2.0 ** (-bank.out_shift)
    sps = bank.sps
    n_sym = len(irail) // sps - FLUSH_SYMBOLS
    if n_sym <= 0:
        return np.zeros((0, 2))
    gain = code_scale * float(h @ h)
    zi = np.convolve(irail, h) / gain
    zq = np.convolve(qrail, h) / gain
    base = sps * np.arange(n_sym) + h.size - 1 + timing_offset
    q_lag = OQPSK_Q_DELAY if config.scheme == Scheme.OQPSK else 0
    if base.min() < 0 or base.max() + q_lag >= len(zi):
        raise ValueError("timing offset moves decision instants outside the stream")
    return np.column_stack([zi[base], zq[base + q_lag]])


def capture_constellation(
    stream,
    config: ModConfig,
    timing_offset: int = 0,
    n_points: int = CAPTURE_POINTS,
    guard: int = GUARD_SYMBOLS,
    use_if: bool = False,
    **matched_kw,
) -> ConstellationCapture:
    """Symbol-instant points from the tapped rails (or the down-mixed IF).

    The first and last ``guard`` symbols are dropped; up to ``n_points`` of the
    rest are returned.  Extra keywords go to :func:`matched_samples`.
    """
    irail, qrail = _rails(stream, use_if=use_if)
    pts = matched_samples(irail, qrail, config, timing_offset, **matched_kw)
    if len(pts) < 2 * guard + 1:
        raise ValueError(f"stream holds {len(pts)} symbols; need more than {2 * guard} to skip the filter transients")
    pts = pts[guard : len(pts) - guard][:n_points]
    ideal = ideal_points(config.scheme)
    idx, dist = nearest_ideal(pts, ideal)
    return ConstellationCapture(pts, ideal, idx, float(dist.max()))


def demodulate(stream, config: ModConfig, timing_offset: int = 0) -> np.ndarray:
    """Loopback receiver: down-mix, matched filter, hard decisions, differential decode.

    ``stream`` may be an :class:`IfStream` (its FINALOUT is used), a bare
    1-D array of IF samples, or an ``(irail, qrail)`` pair.
    """
    irail, qrail = _rails(stream, use_if=True)
    pts = matched_samples(irail, qrail, config, timing_offset)
    if len(pts) == 0:
        return np.zeros(0, dtype=np.uint8)
    scheme = config.scheme
    if scheme == Scheme.OQPSK:
        tie = np.flatnonzero(np.any(np.abs(pts) < 1e-9, axis=1))
        if tie.size:
            raise ValueError(f"ambiguous decision at symbol {int(tie[0])}")
        return decode_oqpsk_rails(np.sign(pts[:, 0]), np.sign(pts[:, 1]))
    ideal = ideal_points(scheme)
    d = np.linalg.norm(pts[:, None, :] - ideal[None, :, :], axis=2)
    order = np.sort(d, axis=1)
    tie = np.flatnonzero(order[:, 1] - order[:, 0] < 1e-9)
    if tie.size:
        raise ValueError(f"ambiguous decision at symbol {int(tie[0])}")
    octants = _ideal_octants(scheme)[np.argmin(d, axis=1)]
    return decode_octants(octants, scheme)


def psd(samples, segment_length: int = 256) -> SpectrumReport:
    """Averaged periodogram (Hann, 50 % overlap), peak-normalised dB."""
    x = np.asarray(samples)
    if x.size < segment_length:
        raise ValueError(f"need at least {segment_length} samples, got {x.size}")
    complex_input = np.iscomplexobj(x)
    freqs, pxx = signal.welch(
        x.astype(complex if complex_input else float),
        fs=1.0,
        window="hann",
        nperseg=segment_length,
        noverlap=segment_length // 2,
        detrend=False,
        return_onesided=not complex_input,
        scaling="spectrum",
    )
    if complex_input:
        freqs = np.fft.fftshift(freqs)
        pxx = np.fft.fftshift(pxx)
    return SpectrumReport(freqs, _to_db(pxx, power=True))


def if_out_of_band_db(report: SpectrumReport, alpha: float, sps: int = 4) -> float:
    """Peak PSD level outside the occupied band around the fs/4 carrier."""
    half_bw = (1.0 + alpha) / (2.0 * sps)
    outside = np.abs(report.frequencies - 0.25) > half_bw
    return float(report.magnitude_db[outside].max()) if outside.any() else float("-inf")
