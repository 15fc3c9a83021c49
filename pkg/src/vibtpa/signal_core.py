"""Spectral estimation primitives.

Welch-averaged auto/cross spectra, the H1 FRF estimator with coherence,
apparent mass from hammer data, and a zero-phase high-pass filter. These are
the building blocks that turn raw recordings into the frequency-domain factors
of a transfer-path chain.

Invalid frequency bins are carried as NaN in ``Spectrum.values``; the
``valid`` property of spectra and FRFs is simply ``np.isfinite(values)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import signal

from .errors import (
    IncompatibleChannelsError,
    InsufficientDataError,
    InsufficientExcitationError,
    InvalidConfigurationError,
)

ROLES = ("engine_side", "body_side", "target", "hammer_force", "tacho")
MOUNTS = ("RH", "LH", "REAR")
DIRECTIONS = ("X", "Y", "Z")
WINDOWS = ("hann", "force_exponential")

#: Excitation bins below this fraction of the peak autospectrum are masked.
EPS_POWER = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real signal with its channel metadata."""

    samples: np.ndarray
    sample_rate: float
    channel_id: str
    role: str
    mount: Optional[str] = None
    direction: Optional[str] = None
    unit: str = ""

    def __post_init__(self):
        samples = _frozen(self.samples)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidConfigurationError(
                f"channel {self.channel_id!r}: samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise InvalidConfigurationError(
                f"channel {self.channel_id!r}: samples contain non-finite values")
        if not self.sample_rate > 0:
            raise InvalidConfigurationError(
                f"channel {self.channel_id!r}: sample_rate must be positive")
        if self.role not in ROLES:
            raise InvalidConfigurationError(
                f"channel {self.channel_id!r}: unknown role {self.role!r}")
        if self.role in ("engine_side", "body_side") and (
                self.mount is None or self.direction is None):
            raise InvalidConfigurationError(
                f"channel {self.channel_id!r}: role {self.role} requires mount and direction")
        if self.mount is not None and self.mount not in MOUNTS:
            raise InvalidConfigurationError(
                f"channel {self.channel_id!r}: unknown mount {self.mount!r}")
        if self.direction is not None and self.direction not in DIRECTIONS:
            raise InvalidConfigurationError(
                f"channel {self.channel_id!r}: unknown direction {self.direction!r}")

    def __len__(self):
        return self.samples.size

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples) -> "TimeSeries":
        return replace(self, samples=samples)


@dataclass(frozen=True)
class Spectrum:
    """Complex quantity on a uniform frequency grid.

    Bins that could not be estimated hold NaN; every other value is finite.
    """

    freqs: np.ndarray
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        freqs = _frozen(self.freqs)
        values = _frozen(self.values, complex)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)
        if freqs.ndim != 1 or freqs.shape != values.shape:
            raise InvalidConfigurationError("freqs and values must be 1-D and equally long")
        if freqs.size > 1:
            steps = np.diff(freqs)
            if not np.all(steps > 0):
                raise InvalidConfigurationError("frequency grid must be strictly increasing")
            df = (freqs[-1] - freqs[0]) / (freqs.size - 1)
            if np.max(np.abs(steps - df)) > 1e-9 * max(abs(df), np.max(np.abs(freqs))):
                raise InvalidConfigurationError("frequency grid must be uniform")
        bad = ~np.isfinite(values) & ~np.isnan(values)
        if np.any(bad):
            raise InvalidConfigurationError("spectrum values must be finite or NaN (invalid)")

    def __len__(self):
        return self.freqs.size

    @property
    def df(self) -> float:
        if self.freqs.size < 2:
            return float("nan")
        return (self.freqs[-1] - self.freqs[0]) / (self.freqs.size - 1)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)


@dataclass(frozen=True)
class CoherentFrf:
    """FRF estimate with its ordinary coherence and averaging count."""

    frf: Spectrum
    coherence: np.ndarray
    n_averages: int
    mount: Optional[str] = None
    direction: Optional[str] = None

    def __post_init__(self):
        coh = _frozen(self.coherence)
        object.__setattr__(self, "coherence", coh)
        if coh.shape != self.frf.freqs.shape:
            raise InvalidConfigurationError("coherence must share the FRF grid")
        if np.any((coh < 0) | (coh > 1)):
            raise InvalidConfigurationError("coherence must lie in [0, 1]")
        if self.n_averages < 1:
            raise InvalidConfigurationError("n_averages must be >= 1")

    @property
    def freqs(self) -> np.ndarray:
        return self.frf.freqs

    @property
    def values(self) -> np.ndarray:
        return self.frf.values

    @property
    def valid(self) -> np.ndarray:
        return self.frf.valid


@dataclass(frozen=True)
class SpectralConfig:
    """Settings shared by all spectral estimates.

    ``coh_threshold`` masks FRF bins with low coherence. For the
    ``force_exponential`` window the excitation channel is gated to the first
    ``force_window_fraction`` of each segment and both channels get an
    exponential decay reaching ``exp_decay_end`` at the segment end; segments
    never overlap in that mode, one impact per segment. The decay adds
    apparent damping (the estimate becomes H(sigma + i*omega)), so it is off
    by default; 4 s records at 0.25 Hz already hold the full ring-down.
    """

    df: float = 0.25
    f_max: float = 800.0
    highpass_cutoff: float = 7.0
    window: str = "hann"
    overlap_fraction: float = 0.5
    coh_threshold: float = 0.7
    force_window_fraction: float = 0.05
    exp_decay_end: float = 1.0

    def __post_init__(self):
        if not self.df > 0:
            raise InvalidConfigurationError("df must be positive")
        if not self.highpass_cutoff >= 0:
            raise InvalidConfigurationError("highpass_cutoff must be >= 0")
        if not self.f_max > self.highpass_cutoff:
            raise InvalidConfigurationError("f_max must exceed highpass_cutoff")
        if self.window not in WINDOWS:
            raise InvalidConfigurationError(f"unknown window {self.window!r}")
        if not 0 <= self.overlap_fraction < 1:
            raise InvalidConfigurationError("overlap_fraction must be in [0, 1)")
        if not 0 <= self.coh_threshold <= 1:
            raise InvalidConfigurationError("coh_threshold must be in [0, 1]")
        if not 0 < self.force_window_fraction <= 1:
            raise InvalidConfigurationError("force_window_fraction must be in (0, 1]")
        if not 0 < self.exp_decay_end <= 1:
            raise InvalidConfigurationError("exp_decay_end must be in (0, 1]")


def highpass(ts: TimeSeries, cutoff: float, order: int = 8) -> TimeSeries:
    """Zero-phase Butterworth high-pass filter.

    Forward-backward filtering squares the magnitude response, so an 8th
    order design gives about 48 dB at ``cutoff/2`` and is flat to well under
    0.01 dB from ``2*cutoff`` upwards.
    """
    nyq = ts.sample_rate / 2
    if not 0 < cutoff < nyq:
        raise InvalidConfigurationError(
            f"high-pass cutoff {cutoff} Hz must lie in (0, {nyq}) Hz")
    sos = signal.butter(order, cutoff, btype="highpass", fs=ts.sample_rate, output="sos")
    return ts.with_samples(signal.sosfiltfilt(sos, ts.samples))


def segment_length(sample_rate: float, df: float) -> int:
    return int(round(sample_rate / df))


def _windows(cfg: SpectralConfig, nperseg: int, sample_rate: float):
    if cfg.window == "hann":
        w = signal.get_window("hann", nperseg)
        return w, w
    t = np.arange(nperseg) / sample_rate
    tau = (nperseg / sample_rate) / np.log(1.0 / cfg.exp_decay_end) if cfg.exp_decay_end < 1 else np.inf
    w_exp = np.exp(-t / tau)
    gate = np.zeros(nperseg)
    gate[: max(1, int(round(cfg.force_window_fraction * nperseg)))] = 1.0
    return gate * w_exp, w_exp


def _check_pair(x: TimeSeries, y: TimeSeries):
    if x.sample_rate != y.sample_rate:
        raise IncompatibleChannelsError(
            f"sample rates differ: {x.channel_id}={x.sample_rate}, {y.channel_id}={y.sample_rate}")
    if len(x) != len(y):
        raise IncompatibleChannelsError(
            f"record lengths differ: {x.channel_id}={len(x)}, {y.channel_id}={len(y)}")


def _cross_spectra(x: TimeSeries, y: TimeSeries, cfg: SpectralConfig):
    """Welch estimates (freqs, Sxx, Syy, Sxy, n_averages) on the cfg grid.

    Spectra are one-sided densities. When ``y`` is ``x`` under a shared window
    the same FFT array is reused so that Sxy and Sxx are bit-identical.
    """
    _check_pair(x, y)
    fs = x.sample_rate
    nperseg = segment_length(fs, cfg.df)
    n = len(x)
    if nperseg < 2 or n < nperseg:
        raise InsufficientDataError(
            f"record of {n} samples is shorter than one {nperseg}-sample segment "
            f"(df={cfg.df} Hz at {fs} Hz)")
    if cfg.window == "force_exponential":
        step = nperseg
    else:
        step = nperseg - int(np.floor(cfg.overlap_fraction * nperseg))
    starts = np.arange(0, n - nperseg + 1, step)
    idx = starts[:, None] + np.arange(nperseg)[None, :]

    wx, wy = _windows(cfg, nperseg, fs)
    same = y is x and cfg.window == "hann"
    X = np.fft.rfft(x.samples[idx] * wx, axis=1)
    Y = X if same else np.fft.rfft(y.samples[idx] * wy, axis=1)

    k_max = min(int(np.floor(cfg.f_max * nperseg / fs + 1e-9)), nperseg // 2)
    X = X[:, : k_max + 1]
    Y = X if same else Y[:, : k_max + 1]

    scale = np.full(k_max + 1, 2.0 / (fs * np.sqrt(np.sum(wx**2) * np.sum(wy**2))))
    scale[0] /= 2
    if nperseg % 2 == 0 and k_max == nperseg // 2:
        scale[-1] /= 2
    Pxx = np.mean(X.real**2 + X.imag**2, axis=0)
    Pyy = Pxx if same else np.mean(Y.real**2 + Y.imag**2, axis=0)
    Pxy = Pxx.astype(complex) if same else np.mean(np.conj(X) * Y, axis=0)
    freqs = np.arange(k_max + 1) * (fs / nperseg)
    return freqs, Pxx * scale, Pyy * scale, Pxy * scale, starts.size


def welch_cross_spectrum(x: TimeSeries, y: TimeSeries, cfg: SpectralConfig) -> Spectrum:
    """Welch-averaged cross spectrum S_xy on the grid [0, f_max] with spacing df."""
    freqs, Sxx, _, Sxy, _ = _cross_spectra(x, y, cfg)
    if y is x:
        Sxy = Sxx.astype(complex)
    return Spectrum(freqs, Sxy, unit=f"({x.unit})*({y.unit})/Hz")


def _divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # component-wise so that x/x is exactly 1+0j
    return num.real / den + 1j * (num.imag / den)


def frf_h1(excitation: TimeSeries, response: TimeSeries, cfg: SpectralConfig) -> CoherentFrf:
    """H1 estimate S_xy/S_xx with ordinary coherence.

    Bins are invalid (NaN) where the excitation autospectrum is below
    ``EPS_POWER`` times its peak, where coherence is below
    ``cfg.coh_threshold``, and at DC whenever a high-pass is configured.

    Raises
    ------
    InsufficientExcitationError
        If no bin carries usable excitation power.
    """
    freqs, Sxx, Syy, Sxy, n_avg = _cross_spectra(excitation, response, cfg)
    peak = np.max(Sxx)
    powered = Sxx > EPS_POWER * peak if peak > 0 else np.zeros(Sxx.shape, bool)
    if not np.any(powered):
        raise InsufficientExcitationError(
            f"excitation {excitation.channel_id!r} carries no power on the analysis grid")

    with np.errstate(divide="ignore", invalid="ignore"):
        H = _divide(Sxy, Sxx)
        coh = (Sxy.real**2 + Sxy.imag**2) / (Sxx * Syy)
    coh = np.where(powered & np.isfinite(coh), coh, 0.0)
    coh = np.clip(coh, 0.0, 1.0)

    valid = powered & (coh >= cfg.coh_threshold)
    if cfg.highpass_cutoff > 0:
        valid[0] = False
    H = np.where(valid, H, np.nan + 1j * np.nan)
    return CoherentFrf(
        Spectrum(freqs, H, unit=f"({response.unit})/({excitation.unit})"),
        coh,
        n_avg,
        mount=response.mount or excitation.mount,
        direction=response.direction or excitation.direction,
    )


def apparent_mass(force: TimeSeries, accel: TimeSeries, cfg: SpectralConfig) -> CoherentFrf:
    """Driving-point apparent mass F/a in kg from a hammer test.

    The accelerance a/F is estimated with H1 (force as the clean reference)
    and inverted bin by bin; bins where |a/F| is negligible are invalid.
    """
    if force.role != "hammer_force":
        raise IncompatibleChannelsError(
            f"{force.channel_id!r} has role {force.role}, expected hammer_force")
    if accel.role != "body_side":
        raise IncompatibleChannelsError(
            f"{accel.channel_id!r} has role {accel.role}, expected body_side")
    if force.mount is not None and force.mount != accel.mount:
        raise IncompatibleChannelsError(
            f"force at {force.mount} and acceleration at {accel.mount} are not co-located")

    acc = frf_h1(force, accel, cfg)
    H = acc.values
    mag = np.abs(H)
    floor = EPS_POWER * np.nanmax(mag) if np.any(acc.valid) else np.inf
    ok = acc.valid & (mag > floor)
    if not np.any(ok):
        raise InsufficientExcitationError(
            f"no valid accelerance bins for {accel.channel_id!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        M = np.where(ok, 1.0 / H, np.nan + 1j * np.nan)
    return CoherentFrf(
        Spectrum(acc.freqs, M, unit="kg"),
        acc.coherence,
        acc.n_averages,
        mount=accel.mount,
        direction=accel.direction,
    )


def sample_spectrum(spec: Spectrum, f) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a spectrum at arbitrary frequencies.

    Real and imaginary parts are interpolated linearly between the two
    neighbouring grid bins; the result is valid only where both neighbours are
    valid. Frequencies outside the grid are invalid.

    Returns
    -------
    values : complex ndarray (NaN where invalid)
    valid : bool ndarray
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    out = np.full(f.shape, np.nan + 1j * np.nan)
    ok = np.zeros(f.shape, bool)
    n = len(spec)
    if n == 0:
        return out, ok
    if n == 1:
        hit = np.isclose(f, spec.freqs[0], rtol=0, atol=1e-12)
        ok = hit & spec.valid[0]
        out[ok] = spec.values[0]
        return out, ok

    df = spec.df
    pos = (f - spec.freqs[0]) / df
    j = np.floor(pos).astype(int)
    frac = pos - j
    on_last = (j == n - 1) & (frac < 1e-9)
    j = np.where(on_last, n - 2, j)
    frac = np.where(on_last, 1.0, frac)
    inside = (j >= 0) & (j <= n - 2) & np.isfinite(pos)
    jj = np.clip(j, 0, n - 2)
    v = spec.values
    lo, hi = v[jj], v[jj + 1]
    ok = inside & np.isfinite(lo) & np.isfinite(hi)
    re = (1 - frac) * lo.real + frac * hi.real
    im = (1 - frac) * lo.imag + frac * hi.imag
    out[ok] = re[ok] + 1j * im[ok]
    return out, ok
