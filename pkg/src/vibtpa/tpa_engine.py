"""Multilevel transfer-path chains, target synthesis and path ranking.

Each path is one (mount, direction) pair. Its contribution at the target is
the engine-side order amplitude pushed through three measured factors::

    y_i = a_engine * (a_body / a_engine) * (F_body / a_body) * (a_target / F_body)

i.e. mount transmissibility, body apparent mass and body FRF. The target
response is the complex sum of all path contributions. Frequency-domain
factors are evaluated at the order frequency ``order * rpm / 60`` by linear
interpolation of real and imaginary parts (see ``sample_spectrum``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    EmptyResultError,
    IncompatibleChannelsError,
    IncompatibleGridsError,
    InvalidConfigurationError,
    MissingOrderError,
)
from .order_tracking import OrderTrack, OrderTransmissibility, order_frequency
from .signal_core import DIRECTIONS, MOUNTS, CoherentFrf, Spectrum, _frozen, sample_spectrum

NAN = np.nan + 1j * np.nan


class PathId(NamedTuple):
    mount: str
    direction: str

    def __str__(self):
        return f"{self.mount}-{self.direction}"

    @classmethod
    def parse(cls, text: str) -> "PathId":
        mount, _, direction = text.partition("-")
        if mount not in MOUNTS or direction not in DIRECTIONS:
            raise InvalidConfigurationError(f"not a path id: {text!r}")
        return cls(mount, direction)


ALL = "ALL"


def _sort_key(path: PathId):
    mi = MOUNTS.index(path.mount) if path.mount in MOUNTS else len(MOUNTS)
    return (mi, DIRECTIONS.index(path.direction))


def build_paths(mounts: Sequence[str]) -> list[PathId]:
    """All (mount, direction) paths, in the given mount order then X, Y, Z."""
    mounts = list(mounts)
    if not mounts:
        raise InvalidConfigurationError("at least one mount is required")
    if len(set(mounts)) != len(mounts):
        raise InvalidConfigurationError(f"duplicate mounts in {mounts}")
    for m in mounts:
        if m not in MOUNTS:
            raise InvalidConfigurationError(f"unknown mount {m!r}")
    return [PathId(m, d) for m in mounts for d in DIRECTIONS]


@dataclass(frozen=True)
class PathChain:
    path: PathId
    transmissibility: dict
    apparent_mass: CoherentFrf
    body_frf: CoherentFrf

    def __post_init__(self):
        am, bf = self.apparent_mass, self.body_frf
        if am.freqs.shape != bf.freqs.shape or not np.allclose(am.freqs, bf.freqs, rtol=1e-12, atol=0):
            raise IncompatibleGridsError(
                f"path {self.path}: apparent mass and body FRF are on different grids")
        for name, frf in (("apparent mass", am), ("body FRF", bf)):
            if frf.mount is not None and frf.mount != self.path.mount:
                raise IncompatibleChannelsError(
                    f"path {self.path}: {name} belongs to mount {frf.mount}")
            if frf.direction is not None and frf.direction != self.path.direction:
                raise IncompatibleChannelsError(
                    f"path {self.path}: {name} belongs to direction {frf.direction}")
        for order, tr in self.transmissibility.items():
            if tr.mount is not None and tr.mount != self.path.mount:
                raise IncompatibleChannelsError(
                    f"path {self.path}: order {order} transmissibility belongs to mount {tr.mount}")


@dataclass(frozen=True)
class Contribution:
    path: Union[PathId, str]
    order: float
    rpm_grid: np.ndarray
    value: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        grid = _frozen(self.rpm_grid)
        value = _frozen(self.value, complex)
        valid = _frozen(self.valid, bool)
        object.__setattr__(self, "rpm_grid", grid)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "valid", valid)
        if not (grid.shape == value.shape == valid.shape):
            raise InvalidConfigurationError("rpm_grid, value and valid must be equally long")
        if np.any(valid & ~np.isfinite(value)):
            raise InvalidConfigurationError("valid contribution bins must be finite")

    def scaled(self, alpha) -> "Contribution":
        return Contribution(self.path, self.order, self.rpm_grid, self.value * alpha, self.valid)


@dataclass(frozen=True)
class RankingEntry:
    key: str
    rms_level: float
    share: float


@dataclass(frozen=True)
class RankingTable:
    entries: tuple
    rpm_range: tuple
    group_by: str

    def as_dict(self) -> dict:
        return {
            "group_by": self.group_by,
            "rpm_range": [float(self.rpm_range[0]), float(self.rpm_range[1])],
            "entries": [
                {"rank": i + 1, "key": e.key, "rms_level": e.rms_level, "share": e.share}
                for i, e in enumerate(self.entries)
            ],
        }


def _same_grid(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and np.array_equal(a, b)


def interface_force(apparent_mass: CoherentFrf, body_accel_track: OrderTrack) -> OrderTrack:
    """Interface force track F = M_app(f) * a_body at the order frequency."""
    tr = body_accel_track
    m, ok = sample_spectrum(apparent_mass.frf, tr.freqs)
    valid = ok & tr.valid
    force = np.where(valid, m * tr.amplitude, 0.0)
    return OrderTrack(tr.order, tr.rpm_grid, force, valid, unit="N",
                      mount=tr.mount, direction=tr.direction, channel_id=tr.channel_id)


def chain_factors(engine_track: OrderTrack, chain: PathChain):
    """The four per-bin factors (a_engine, T, M_app, H_body) and their joint mask."""
    order = engine_track.order
    if order not in chain.transmissibility:
        raise MissingOrderError(
            f"path {chain.path} has no transmissibility for order {order:g}")
    for attr in ("mount", "direction"):
        v = getattr(engine_track, attr)
        if v is not None and v != getattr(chain.path, attr):
            raise IncompatibleChannelsError(
                f"engine track {attr} {v} does not match path {chain.path}")
    tr = chain.transmissibility[order]
    if not _same_grid(tr.rpm_grid, engine_track.rpm_grid):
        raise IncompatibleGridsError(
            f"path {chain.path}: engine track and transmissibility are on different rpm grids")
    f = order_frequency(order, engine_track.rpm_grid)
    m, m_ok = sample_spectrum(chain.apparent_mass.frf, f)
    h, h_ok = sample_spectrum(chain.body_frf.frf, f)
    valid = engine_track.valid & tr.valid & m_ok & h_ok
    return engine_track.amplitude, tr.ratio, m, h, valid


def path_contribution(engine_track: OrderTrack, chain: PathChain) -> Contribution:
    """Target-point contribution of one path at one engine order."""
    a, t, m, h, valid = chain_factors(engine_track, chain)
    with np.errstate(invalid="ignore"):
        y = a * t * m * h
    y = np.where(valid, y, 0.0)
    return Contribution(chain.path, engine_track.order, engine_track.rpm_grid, y, valid)


def synthesize_target(contributions: Sequence[Contribution], strict: bool = True) -> Contribution:
    """Complex sum of path contributions (all at one order, one rpm grid).

    In strict mode a bin is valid only if every summand is valid there; in
    lenient mode invalid summands count as zero and a bin needs one valid
    summand.
    """
    contributions = list(contributions)
    if not contributions:
        raise InvalidConfigurationError("no contributions to synthesize")
    first = contributions[0]
    for c in contributions[1:]:
        if c.order != first.order:
            raise IncompatibleGridsError(
                f"contributions mix orders {first.order:g} and {c.order:g}")
        if not _same_grid(c.rpm_grid, first.rpm_grid):
            raise IncompatibleGridsError("contributions are on different rpm grids")
    total = np.zeros(first.rpm_grid.shape, complex)
    for c in contributions:
        total = total + np.where(c.valid, c.value, 0.0)
    masks = np.array([c.valid for c in contributions])
    valid = masks.all(axis=0) if strict else masks.any(axis=0)
    total = np.where(valid, total, 0.0)
    return Contribution(ALL, first.order, first.rpm_grid, total, valid)


def _check_order_set(totals: Sequence[Contribution]):
    if not totals:
        raise InvalidConfigurationError("no per-order totals given")
    grid = totals[0].rpm_grid
    for c in totals[1:]:
        if not _same_grid(c.rpm_grid, grid):
            raise IncompatibleGridsError("per-order totals are on different rpm grids")
    return grid


def overall_level_curve(per_order_totals: Sequence[Contribution]):
    """Overall RMS level across orders, sqrt(sum |y_o|^2 / 2), at every rpm.

    Returns ``(rpm_grid, level, valid)``; a bin is valid when all orders are.
    """
    grid = _check_order_set(per_order_totals)
    energy = np.zeros(grid.shape)
    valid = np.ones(grid.shape, bool)
    for c in per_order_totals:
        energy += np.abs(np.where(c.valid, c.value, 0.0)) ** 2 / 2
        valid &= c.valid
    return grid, np.sqrt(energy), valid


def overall_level(per_order_totals: Sequence[Contribution], rpm: float) -> float:
    """Overall RMS level at the grid bin nearest ``rpm`` (NaN if invalid)."""
    grid, level, valid = overall_level_curve(per_order_totals)
    k = int(np.argmin(np.abs(grid - rpm)))
    return float(level[k]) if valid[k] else float("nan")


def dynamic_stiffness(transmissibility: OrderTransmissibility, apparent_mass: CoherentFrf,
                      omega_squared_scaling: bool = False) -> Spectrum:
    """Mount dynamic stiffness T * M_app on the order-mapped frequency axis.

    The plain product has units of kg. With ``omega_squared_scaling`` it is
    multiplied by (2*pi*f)^2 to give N/m.
    """
    tr = transmissibility
    f = tr.freqs
    m, m_ok = sample_spectrum(apparent_mass.frf, f)
    valid = tr.valid & m_ok
    if not np.any(valid):
        raise EmptyResultError(
            f"no overlap between valid transmissibility and apparent mass "
            f"(order {tr.order:g}, {tr.mount}-{tr.direction})")
    with np.errstate(invalid="ignore"):
        k = tr.ratio * m
        if omega_squared_scaling:
            k = k * (2 * np.pi * f) ** 2
    k = np.where(valid, k, NAN)
    return Spectrum(f, k, unit="N/m" if omega_squared_scaling else "kg")


def _group_key(path, group_by: str) -> str:
    if group_by == "mount":
        return path.mount
    return str(path)


def _key_order(key: str, group_by: str):
    if group_by == "mount":
        return (MOUNTS.index(key) if key in MOUNTS else len(MOUNTS), 0)
    return _sort_key(PathId.parse(key))


def rank_paths(contributions: Sequence[Contribution], rpm_range, group_by: str = "mount") -> RankingTable:
    """Rank paths or mounts by contribution energy over an rpm range.

    Energy per group is the sum over orders and in-range valid bins of
    ``|y|^2 / 2``; the reported level is ``sqrt(energy / n_bins)`` with
    ``n_bins`` the number of grid bins in range, and the share is the
    group's fraction of the total energy (all zero when nothing is excited).
    Ties are broken by mount order RH, LH, REAR then X, Y, Z.
    """
    if group_by not in ("mount", "path"):
        raise InvalidConfigurationError(f"group_by must be 'mount' or 'path', not {group_by!r}")
    contributions = list(contributions)
    if not contributions:
        raise InvalidConfigurationError("no contributions to rank")
    lo, hi = float(rpm_range[0]), float(rpm_range[1])
    grid = contributions[0].rpm_grid
    for c in contributions[1:]:
        if not _same_grid(c.rpm_grid, grid):
            raise IncompatibleGridsError("contributions are on different rpm grids")
    in_range = (grid >= lo - 1e-9) & (grid <= hi + 1e-9)
    n_bins = int(np.count_nonzero(in_range))
    if hi < lo or n_bins == 0:
        raise InvalidConfigurationError(f"rpm range {lo:g}-{hi:g} contains no grid bins")

    energy: dict[str, float] = {}
    for c in contributions:
        if c.path == ALL:
            raise InvalidConfigurationError("cannot rank an aggregated contribution")
        key = _group_key(c.path, group_by)
        sel = in_range & c.valid
        energy[key] = energy.get(key, 0.0) + float(np.sum(np.abs(c.value[sel]) ** 2) / 2)

    total = sum(energy.values())
    entries = [
        RankingEntry(key, float(np.sqrt(e / n_bins)), e / total if total > 0 else 0.0)
        for key, e in energy.items()
    ]
    entries.sort(key=lambda e: (-e.rms_level, _key_order(e.key, group_by)))
    return RankingTable(tuple(entries), (lo, hi), group_by)
