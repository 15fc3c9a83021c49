"""Run-up order tracking and per-order mount transmissibility.

The tracker is a short-time DFT that follows the crank angle: the signal is
demodulated by ``exp(-i * order * theta(t))``, then averaged under a Hann
window spanning ``2 / bandwidth_orders`` revolutions. The window's main lobe
therefore has a half-width of ``bandwidth_orders`` orders. ``theta`` is
integrated from an rpm trace (phase 0 at the start of the record) or, for a
pulse tacho, interpolated through the smoothed pulse edges (phase 0 at the
first edge).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.signal import savgol_filter

from .errors import (
    CorruptTachoError,
    IncompatibleChannelsError,
    InvalidConfigurationError,
    OutOfBandError,
)
from .signal_core import TimeSeries, _frozen

MAX_RPM_JUMP = 500.0
#: Engine-side bins below this fraction of the track maximum are masked.
EPS_AMP = 1e-6


def order_frequency(order, rpm):
    """Frequency in Hz of engine order ``order`` at ``rpm`` rev/min."""
    # rpm/60 first so that order_frequency(o, 60) == o exactly
    return np.multiply(order, np.divide(rpm, 60.0))


@dataclass(frozen=True)
class RpmProfile:
    """Engine speed versus time, optionally with the crank angle at the same
    instants (pulse tachos); without it the angle is integrated from rpm."""

    time: np.ndarray
    rpm: np.ndarray
    angle: Optional[np.ndarray] = None

    def __post_init__(self):
        t = _frozen(self.time)
        r = _frozen(self.rpm)
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "rpm", r)
        if t.ndim != 1 or t.shape != r.shape or t.size == 0:
            raise InvalidConfigurationError("time and rpm must be equally long 1-D arrays")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise CorruptTachoError("profile time must be strictly increasing")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise CorruptTachoError("engine speed must be positive and finite everywhere")
        if self.angle is not None:
            a = _frozen(self.angle)
            object.__setattr__(self, "angle", a)
            if a.shape != t.shape or t.size < 2:
                raise InvalidConfigurationError("angle must match time and hold at least 2 points")

    def rpm_at(self, t) -> np.ndarray:
        return np.interp(t, self.time, self.rpm)

    def crank_angle(self, t) -> np.ndarray:
        """Crank angle in radians at sample times ``t``."""
        t = np.asarray(t, dtype=float)
        if self.angle is not None:
            return CubicSpline(self.time, self.angle, extrapolate=True)(t)
        omega = 2 * np.pi * self.rpm_at(t) / 60.0
        return cumulative_trapezoid(omega, t, initial=0.0)


@dataclass(frozen=True)
class OrderTrack:
    order: float
    rpm_grid: np.ndarray
    amplitude: np.ndarray
    valid: np.ndarray
    unit: str = ""
    mount: Optional[str] = None
    direction: Optional[str] = None
    channel_id: Optional[str] = None

    def __post_init__(self):
        grid = _frozen(self.rpm_grid)
        amp = _frozen(self.amplitude, complex)
        valid = _frozen(self.valid, bool)
        object.__setattr__(self, "rpm_grid", grid)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "valid", valid)
        if not self.order > 0:
            raise InvalidConfigurationError("order must be positive")
        if not (grid.shape == amp.shape == valid.shape) or grid.ndim != 1:
            raise InvalidConfigurationError("rpm_grid, amplitude and valid must be equally long")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise InvalidConfigurationError("rpm_grid must be strictly increasing")

    @property
    def freqs(self) -> np.ndarray:
        return order_frequency(self.order, self.rpm_grid)


@dataclass(frozen=True)
class OrderTransmissibility:
    order: float
    mount: Optional[str]
    direction: Optional[str]
    rpm_grid: np.ndarray
    ratio: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        grid = _frozen(self.rpm_grid)
        ratio = _frozen(self.ratio, complex)
        valid = _frozen(self.valid, bool)
        object.__setattr__(self, "rpm_grid", grid)
        object.__setattr__(self, "ratio", ratio)
        object.__setattr__(self, "valid", valid)
        if not (grid.shape == ratio.shape == valid.shape):
            raise InvalidConfigurationError("rpm_grid, ratio and valid must be equally long")
        if np.any(valid & ~np.isfinite(ratio)):
            raise InvalidConfigurationError("valid transmissibility bins must be finite")

    @property
    def freqs(self) -> np.ndarray:
        return order_frequency(self.order, self.rpm_grid)


def _check_monotone_speed(rpm: np.ndarray, what: str):
    if not np.all(np.isfinite(rpm)) or np.any(rpm <= 0):
        raise CorruptTachoError(f"{what}: non-positive or non-finite engine speed")
    if rpm.size > 1:
        jump = np.max(np.abs(np.diff(rpm)))
        if jump > MAX_RPM_JUMP:
            raise CorruptTachoError(f"{what}: speed jumps by {jump:.0f} rpm between samples")


def _moving_median(t: np.ndarray, x: np.ndarray, width: float) -> np.ndarray:
    lo = np.searchsorted(t, t - width / 2, side="left")
    hi = np.searchsorted(t, t + width / 2, side="right")
    return np.array([np.median(x[a:b]) for a, b in zip(lo, hi)])


def _regular_edges(edges: np.ndarray, pulse_rate: np.ndarray) -> np.ndarray:
    """Edge times with missing pulses filled in and spurious edges dropped,
    judged against the local median pulse rate."""
    dt = np.diff(edges)
    count = np.rint(dt * pulse_rate).astype(int)
    out = [edges[:1]]
    last = edges[0]
    for e, n in zip(edges[1:], count):
        if n <= 0:
            continue  # extra edge inside one pulse period
        out.append(last + (e - last) * np.arange(1, n + 1) / n)
        last = e
    return np.concatenate(out)


def rpm_profile_from_tacho(tacho: TimeSeries, pulses_per_rev: float = 1.0,
                           smoothing: float = 0.5) -> RpmProfile:
    """Engine speed profile from a tacho channel.

    A channel whose unit is ``rpm`` is taken as an already scaled speed trace
    and passed through. Anything else is treated as a pulse train: rising
    edges through the mid level are located with sub-sample interpolation,
    the local pulse rate is taken from a moving median of the inter-pulse
    intervals ``smoothing`` seconds wide and used to fill missing pulses and
    drop spurious ones. The regularised edge times are then smoothed against
    the pulse count (Savitzky-Golay over the same span, whose derivative gives
    the speed) and a cubic spline of angle versus time gives the crank angle.
    """
    if tacho.role != "tacho":
        raise IncompatibleChannelsError(f"{tacho.channel_id!r} is not a tacho channel")
    t = tacho.time
    x = tacho.samples
    if tacho.unit.lower() in ("rpm", "1/min", "rev/min"):
        _check_monotone_speed(x, tacho.channel_id)
        return RpmProfile(t, x)

    if not pulses_per_rev > 0:
        raise InvalidConfigurationError("pulses_per_rev must be positive")
    thr = 0.5 * (np.max(x) + np.min(x))
    i = np.flatnonzero((x[:-1] < thr) & (x[1:] >= thr))
    if i.size < 8:
        raise CorruptTachoError(f"{tacho.channel_id}: fewer than 8 tacho pulses found")
    frac = (thr - x[i]) / (x[i + 1] - x[i])
    edges = (i + frac) / tacho.sample_rate
    mid = 0.5 * (edges[1:] + edges[:-1])
    rate = _moving_median(mid, 1.0 / np.diff(edges), smoothing)
    _check_monotone_speed(60.0 * rate / pulses_per_rev, tacho.channel_id)
    edges = _regular_edges(edges, rate)

    win = int(round(smoothing * np.median(rate)))
    win = max(5, win + (win + 1) % 2)
    if edges.size <= win:
        win = edges.size - 1 + edges.size % 2
    period = savgol_filter(edges, win, 3, deriv=1)  # seconds per pulse
    edges = savgol_filter(edges, win, 3)
    if np.any(np.diff(edges) <= 0) or np.any(period <= 0):
        raise CorruptTachoError(f"{tacho.channel_id}: tacho edges are not increasing")
    angle = 2 * np.pi * np.arange(edges.size) / pulses_per_rev
    rpm = 60.0 / (pulses_per_rev * period)
    _check_monotone_speed(rpm, tacho.channel_id)
    return RpmProfile(edges, rpm, angle)


def rpm_grid_for(profile: RpmProfile, rpm_step: float) -> np.ndarray:
    """Uniform rpm grid at multiples of ``rpm_step`` inside the profile's range."""
    if not rpm_step > 0:
        raise InvalidConfigurationError("rpm_step must be positive")
    lo = np.ceil(np.min(profile.rpm) / rpm_step - 1e-9)
    hi = np.floor(np.max(profile.rpm) / rpm_step + 1e-9)
    if hi < lo:
        return np.array([float(np.min(profile.rpm))])
    return np.arange(lo, hi + 1) * rpm_step


def check_order_band(order: float, max_rpm: float, sample_rate: float):
    nyq = sample_rate / 2
    if order_frequency(order, max_rpm) >= nyq:
        limit = 60.0 * nyq / order
        raise OutOfBandError(
            f"order {order:g} exceeds the Nyquist frequency {nyq:g} Hz above "
            f"{limit:.1f} rpm (sweep reaches {max_rpm:.1f} rpm)")


def _center_times(profile: RpmProfile, grid: np.ndarray, rpm_step: float) -> np.ndarray:
    r, t = profile.rpm, profile.time
    d = np.diff(r)
    if r.size > 1 and (np.all(d > 0) or np.all(d < 0)):
        order = np.argsort(r)
        tc = np.interp(grid, r[order], t[order], left=np.nan, right=np.nan)
        return tc
    tc = np.full(grid.shape, np.nan)
    for k, rk in enumerate(grid):
        sel = np.abs(r - rk) <= rpm_step / 2
        if np.any(sel):
            tc[k] = np.mean(t[sel])
    return tc


def extract_order(signal: TimeSeries, profile: RpmProfile, order: float,
                  rpm_step: float = 25.0, bandwidth_orders: float = 0.5) -> OrderTrack:
    """Complex amplitude of one engine order versus rpm.

    For each grid rpm the record is demodulated at the order's crank phase and
    averaged under a Hann window of ``2 / bandwidth_orders`` revolutions
    centred where the profile passes that rpm. Bins whose window does not fit
    inside the record, or that hold less than one cycle of the order, are
    invalid.
    """
    if not order > 0:
        raise InvalidConfigurationError("order must be positive")
    if not bandwidth_orders > 0:
        raise InvalidConfigurationError("bandwidth_orders must be positive")
    fs = signal.sample_rate
    check_order_band(order, float(np.max(profile.rpm)), fs)

    grid = rpm_grid_for(profile, rpm_step)
    t = signal.time
    theta = profile.crank_angle(t)
    z = signal.samples * np.exp(-1j * order * theta)

    centers = _center_times(profile, grid, rpm_step)
    amp = np.zeros(grid.shape, complex)
    valid = np.zeros(grid.shape, bool)
    n = len(signal)
    for k, (rk, tk) in enumerate(zip(grid, centers)):
        if not np.isfinite(tk):
            continue
        span = 2.0 * 60.0 / (bandwidth_orders * rk)
        if span * order_frequency(order, rk) < 1.0:
            continue
        half = int(round(span * fs / 2))
        c = int(round(tk * fs))
        if c - half < 0 or c + half >= n or half < 1:
            continue
        w = np.hanning(2 * half + 3)[1:-1]
        amp[k] = 2.0 * np.dot(w, z[c - half: c + half + 1]) / np.sum(w)
        valid[k] = True
    return OrderTrack(order, grid, amp, valid, unit=signal.unit, mount=signal.mount,
                      direction=signal.direction, channel_id=signal.channel_id)


def transmissibility_from_tracks(engine: OrderTrack, body: OrderTrack) -> OrderTransmissibility:
    """Body/engine amplitude ratio of two tracks of the same order."""
    if engine.order != body.order:
        raise IncompatibleChannelsError(
            f"tracks are of different orders ({engine.order} vs {body.order})")
    if engine.rpm_grid.shape != body.rpm_grid.shape or not np.array_equal(
            engine.rpm_grid, body.rpm_grid):
        raise IncompatibleChannelsError("engine and body tracks are on different rpm grids")
    for attr in ("mount", "direction"):
        a, b = getattr(engine, attr), getattr(body, attr)
        if a is not None and b is not None and a != b:
            raise IncompatibleChannelsError(f"engine and body channels differ in {attr}: {a} vs {b}")

    mag = np.abs(engine.amplitude)
    both = engine.valid & body.valid
    ref = np.max(mag[both]) if np.any(both) else 0.0
    ok = both & (mag > EPS_AMP * ref) & (mag > 0)
    ratio = np.full(engine.amplitude.shape, np.nan + 1j * np.nan)
    e, b = engine.amplitude[ok], body.amplitude[ok]
    # b * conj(e) / |e|^2 so that identical tracks give exactly 1 + 0j
    den = e.real * e.real + e.imag * e.imag
    ratio[ok] = ((b.real * e.real + b.imag * e.imag) / den
                 + 1j * ((b.imag * e.real - b.real * e.imag) / den))
    return OrderTransmissibility(engine.order, engine.mount or body.mount,
                                 engine.direction or body.direction,
                                 engine.rpm_grid, ratio, ok)


def order_transmissibility(engine: TimeSeries, body: TimeSeries, profile: RpmProfile,
                           order: float, rpm_step: float = 25.0,
                           bandwidth_orders: float = 0.5) -> OrderTransmissibility:
    """Mount transmissibility a_body/a_engine at one engine order over a run-up."""
    if engine.role != "engine_side":
        raise IncompatibleChannelsError(f"{engine.channel_id!r} is not an engine_side channel")
    if body.role != "body_side":
        raise IncompatibleChannelsError(f"{body.channel_id!r} is not a body_side channel")
    if (engine.mount, engine.direction) != (body.mount, body.direction):
        raise IncompatibleChannelsError(
            f"engine channel {engine.mount}-{engine.direction} does not match "
            f"body channel {body.mount}-{body.direction}")
    if engine.sample_rate != body.sample_rate or len(engine) != len(body):
        raise IncompatibleChannelsError("engine and body records differ in rate or length")
    e = extract_order(engine, profile, order, rpm_step, bandwidth_orders)
    b = extract_order(body, profile, order, rpm_step, bandwidth_orders)
    return transmissibility_from_tracks(e, b)
