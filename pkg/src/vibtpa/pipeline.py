"""End-to-end multilevel TPA on a dataset: impacts -> FRFs, run-up -> orders,
chains -> contributions -> totals, ranking and mount stiffness."""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import dataio
from .dataio import Dataset
from .errors import EmptyResultError, InvalidConfigurationError, MissingInputError, TpaError
from .order_tracking import (
    check_order_band,
    extract_order,
    rpm_profile_from_tacho,
    transmissibility_from_tracks,
)
from .signal_core import SpectralConfig, apparent_mass, frf_h1, highpass
from .tpa_engine import (
    PathChain,
    build_paths,
    dynamic_stiffness,
    interface_force,
    overall_level_curve,
    path_contribution,
    rank_paths,
    synthesize_target,
)

log = logging.getLogger(__name__)

MIN_IMPACTS = 5


@dataclass(frozen=True)
class PipelineConfig:
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    orders: tuple = (2.0, 4.0, 6.0)
    rpm_step: float = 25.0
    rpm_range: Optional[tuple] = None
    bandwidth_orders: float = 0.5
    strict: bool = True
    highpass_impacts: bool = False
    omega_squared_scaling: bool = False

    def __post_init__(self):
        if not self.orders or any(not o > 0 for o in self.orders):
            raise InvalidConfigurationError("orders must be a non-empty list of positive numbers")
        if not self.rpm_step > 0:
            raise InvalidConfigurationError("rpm_step must be positive")
        if self.rpm_range is not None and not self.rpm_range[0] < self.rpm_range[1]:
            raise InvalidConfigurationError("rpm_range must be (low, high) with low < high")

    @property
    def impact_spectral(self) -> SpectralConfig:
        return replace(self.spectral, window="force_exponential", overlap_fraction=0.0)


@dataclass
class PipelineResult:
    config: PipelineConfig
    paths: list
    rpm_grid: np.ndarray
    apparent_mass: dict = field(default_factory=dict)
    body_frf: dict = field(default_factory=dict)
    engine_tracks: dict = field(default_factory=dict)
    body_tracks: dict = field(default_factory=dict)
    transmissibility: dict = field(default_factory=dict)
    interface_forces: dict = field(default_factory=dict)
    contributions: dict = field(default_factory=dict)
    totals: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)
    stiffness: dict = field(default_factory=dict)
    ranking_mount: object = None
    ranking_path: object = None

    def overall_level(self):
        return overall_level_curve([self.totals[o] for o in self.config.orders])

    def measured_level(self):
        """Overall level of the tracked target channel (rpm, level, valid)."""
        if not self.measured:
            return None
        energy = np.zeros(self.rpm_grid.shape)
        valid = np.ones(self.rpm_grid.shape, bool)
        for o in self.config.orders:
            tr = self.measured[o]
            energy += np.abs(tr.amplitude) ** 2 / 2
            valid &= tr.valid
        return self.rpm_grid, np.sqrt(energy), valid

    def mount_levels(self):
        """Per-mount overall level vs rpm (RMS over directions and orders)."""
        out = {}
        for p in self.paths:
            e = out.setdefault(p.mount, np.zeros(self.rpm_grid.shape))
            for o in self.config.orders:
                c = self.contributions[(p, o)]
                e += np.abs(np.where(c.valid, c.value, 0.0)) ** 2 / 2
        return {m: np.sqrt(e) for m, e in out.items()}


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except TpaError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def check_inputs(dataset: Dataset, config: PipelineConfig):
    """Fail fast on missing channels and out-of-band orders."""
    run = dataset.runup()
    tacho = run.require("tacho")
    mounts = dataset.mounts()
    if not mounts:
        raise MissingInputError("run-up recording has no engine_side channels")
    paths = build_paths(mounts)
    for p in paths:
        run.require("engine_side", p.mount, p.direction)
        run.require("body_side", p.mount, p.direction)
        rec = dataset.impact(p.mount, p.direction)
        rec.require("hammer_force")
        rec.require("body_side", p.mount, p.direction)
        rec.require("target")
    if tacho.unit == "rpm":
        max_rpm = float(np.max(tacho.samples))
        for o in config.orders:
            check_order_band(o, max_rpm, dataset.sample_rate)
    return paths


def _profile(dataset: Dataset, config: PipelineConfig):
    run = dataset.runup()
    tacho = run.require("tacho")
    ppr = float(dataset.channel_info.get(tacho.channel_id, {}).get("pulses_per_rev", 1.0))
    profile = rpm_profile_from_tacho(tacho, pulses_per_rev=ppr)
    for o in config.orders:
        check_order_band(o, float(np.max(profile.rpm)), dataset.sample_rate)
    return profile


def impact_frfs(dataset: Dataset, paths, config: PipelineConfig):
    """Apparent mass and body FRF per path from the impact recordings."""
    cfg = config.impact_spectral
    am, bf = {}, {}
    for p in paths:
        rec = dataset.impact(p.mount, p.direction)
        force = rec.require("hammer_force")
        body = rec.require("body_side", p.mount, p.direction)
        tgt = rec.require("target")
        if config.highpass_impacts and config.spectral.highpass_cutoff > 0:
            fc = config.spectral.highpass_cutoff
            force, body, tgt = (highpass(x, fc) for x in (force, body, tgt))
        log.info("impact FRFs for %s", p)
        am[p] = apparent_mass(force, body, cfg)
        if am[p].n_averages < MIN_IMPACTS:
            log.warning("%s: only %d impact segments averaged (recommended >= %d)",
                        p, am[p].n_averages, MIN_IMPACTS)
        h = frf_h1(force, tgt, cfg)
        bf[p] = replace(h, mount=p.mount, direction=p.direction)
    return am, bf


def order_tracks(dataset: Dataset, paths, config: PipelineConfig, profile=None):
    """Engine/body order tracks and transmissibility per (path, order), plus
    the tracked target channel per order when the run-up has one."""
    run = dataset.runup()
    profile = profile or _profile(dataset, config)
    fc = config.spectral.highpass_cutoff

    def prep(ts):
        return highpass(ts, fc) if fc > 0 else ts

    def track(ts, o):
        return extract_order(ts, profile, o, config.rpm_step, config.bandwidth_orders)

    eng_t, bod_t, trans, measured = {}, {}, {}, {}
    for p in paths:
        eng = prep(run.require("engine_side", p.mount, p.direction))
        bod = prep(run.require("body_side", p.mount, p.direction))
        for o in config.orders:
            e, b = track(eng, o), track(bod, o)
            eng_t[(p, o)], bod_t[(p, o)] = e, b
            trans[(p, o)] = transmissibility_from_tracks(e, b)
    tgt = run.find("target")
    if tgt is not None:
        tgt = prep(tgt)
        for o in config.orders:
            measured[o] = track(tgt, o)
    return eng_t, bod_t, trans, measured


def run_pipeline(dataset: Dataset, config: Optional[PipelineConfig] = None) -> PipelineResult:
    config = config or PipelineConfig()
    with _stage("inputs"):
        paths = check_inputs(dataset, config)
    with _stage("rpm profile"):
        profile = _profile(dataset, config)
    with _stage("impact FRFs"):
        am, bf = impact_frfs(dataset, paths, config)

    result = PipelineResult(config, paths, np.array([]), am, bf)
    with _stage("order tracking"):
        (result.engine_tracks, result.body_tracks, result.transmissibility,
         result.measured) = order_tracks(dataset, paths, config, profile)
    result.rpm_grid = result.engine_tracks[(paths[0], config.orders[0])].rpm_grid

    with _stage("path chains"):
        for p in paths:
            chain = PathChain(p, {o: result.transmissibility[(p, o)] for o in config.orders},
                              am[p], bf[p])
            for o in config.orders:
                result.contributions[(p, o)] = path_contribution(result.engine_tracks[(p, o)], chain)
                result.interface_forces[(p, o)] = interface_force(am[p], result.body_tracks[(p, o)])
                try:
                    result.stiffness[(p, o)] = dynamic_stiffness(
                        result.transmissibility[(p, o)], am[p], config.omega_squared_scaling)
                except EmptyResultError:
                    log.warning("no valid stiffness bins for %s order %g", p, o)

    with _stage("synthesis"):
        for o in config.orders:
            result.totals[o] = synthesize_target(
                [result.contributions[(p, o)] for p in paths], strict=config.strict)

    with _stage("ranking"):
        rng = config.rpm_range or (float(result.rpm_grid[0]), float(result.rpm_grid[-1]))
        contribs = [result.contributions[(p, o)] for p in paths for o in config.orders]
        result.ranking_mount = rank_paths(contribs, rng, "mount")
        result.ranking_path = rank_paths(contribs, rng, "path")
    return result


def _tag(order: float) -> str:
    return f"o{order:g}".replace(".", "p")


def write_results(result: PipelineResult, outdir, parts=("all",)) -> Path:
    """Write the result bundle; file names and float formatting are fixed so
    identical inputs give byte-identical files."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    want = lambda part: "all" in parts or part in parts  # noqa: E731
    orders = result.config.orders

    if want("frf"):
        d = outdir / "frf"
        d.mkdir(exist_ok=True)
        for p in result.paths:
            am, bf = result.apparent_mass[p], result.body_frf[p]
            dataio.write_spectrum(am.frf, d / f"apparent_mass_{p}.csv", am.coherence)
            dataio.write_spectrum(bf.frf, d / f"body_frf_{p}.csv", bf.coherence)
    if want("transmissibility"):
        d = outdir / "transmissibility"
        d.mkdir(exist_ok=True)
        for p in result.paths:
            for o in orders:
                tr = result.transmissibility[(p, o)]
                dataio.write_rpm_series(tr.rpm_grid, tr.ratio, tr.valid, d / f"T_{p}_{_tag(o)}.csv")
    if want("contributions"):
        d = outdir / "contributions"
        d.mkdir(exist_ok=True)
        for p in result.paths:
            for o in orders:
                c = result.contributions[(p, o)]
                dataio.write_rpm_series(c.rpm_grid, c.value, c.valid, d / f"y_{p}_{_tag(o)}.csv")
        for o in orders:
            c = result.totals[o]
            dataio.write_rpm_series(c.rpm_grid, c.value, c.valid, d / f"total_{_tag(o)}.csv")
        _write_levels(result, outdir / "levels_by_mount.csv")
    if want("stiffness"):
        d = outdir / "stiffness"
        d.mkdir(exist_ok=True)
        for (p, o), k in sorted(result.stiffness.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
            dataio.write_spectrum(k, d / f"K_{p}_{_tag(o)}.csv")
    if want("ranking"):
        dataio.write_json({"by_mount": result.ranking_mount.as_dict(),
                           "by_path": result.ranking_path.as_dict()},
                          outdir / "ranking.json")
    return outdir


def _write_levels(result: PipelineResult, path):
    grid, total, valid = result.overall_level()
    cols = {"rpm": grid}
    for m, lvl in result.mount_levels().items():
        cols[m] = lvl
    cols["simulated_total"] = total
    cols["valid"] = valid.astype(int)
    meas = result.measured_level()
    if meas is not None:
        cols["measured_total"] = meas[1]
        cols["measured_valid"] = meas[2].astype(int)
    dataio.write_table(cols, path)
