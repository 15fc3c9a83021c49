"""Synthetic engine / mount / body vehicle with exact ground truth.

The model is built in the frequency domain so every chain factor is known in
closed form:

* engine-side acceleration per path: order force table / engine mass, times a
  per-mount lever factor;
* mount: complex stiffness ``k(f) (1 + i eta)``;
* body: per attachment a rigid term plus modal sum for the driving-point
  accelerance (its inverse is the apparent mass) and for the transfer
  accelerance to the target point.

With ``Kd = -k*/omega^2`` (the mount stiffness expressed in kg) the body-side
acceleration follows from ``a_body = T a_engine`` with
``T = Kd / (M_app + Kd)``; the interface force is ``M_app a_body`` and the
path's target contribution ``H_body M_app T a_engine``.

Run-ups are synthesised as phase-continuous order tracks referenced to the
analytic crank angle of a linear speed ramp; impacts as half-sine force pulses
filtered through the body accelerances by FFT.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .dataio import Dataset, Recording
from .errors import InvalidConfigurationError, OutOfBandError
from .order_tracking import order_frequency
from .signal_core import DIRECTIONS, MOUNTS, TimeSeries
from .tpa_engine import PathId, build_paths

ACCEL = "m/s^2"


@dataclass(frozen=True)
class MountModel:
    """Mount with per-direction stiffness, loss factor and optional k(f) shape.

    ``table_freq``/``table_scale`` give a piecewise-linear multiplier on the
    static stiffness (held constant outside the table).
    """

    mount: str
    stiffness: dict
    loss_factor: dict
    table_freq: tuple = ()
    table_scale: tuple = ()
    kind: str = "rubber"

    def __post_init__(self):
        if self.mount not in MOUNTS:
            raise InvalidConfigurationError(f"unknown mount {self.mount!r}")
        for d in DIRECTIONS:
            if not self.stiffness.get(d, 0) > 0:
                raise InvalidConfigurationError(f"mount {self.mount}: stiffness {d} must be > 0")
            if not self.loss_factor.get(d, -1) >= 0:
                raise InvalidConfigurationError(f"mount {self.mount}: loss factor {d} must be >= 0")
        if len(self.table_freq) != len(self.table_scale):
            raise InvalidConfigurationError(f"mount {self.mount}: k(f) table columns differ in length")
        if any(s <= 0 for s in self.table_scale):
            raise InvalidConfigurationError(f"mount {self.mount}: k(f) table must be positive")

    def complex_stiffness(self, direction: str, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        k = self.stiffness[direction] * np.ones_like(f)
        if self.table_freq:
            k = k * np.interp(f, self.table_freq, self.table_scale)
        return k * (1 + 1j * self.loss_factor[direction])

    def scaled(self, factor: float) -> "MountModel":
        return replace(self, stiffness={d: k * factor for d, k in self.stiffness.items()})


@dataclass(frozen=True)
class Mode:
    fn: float
    zeta: float
    dp: float = 0.0
    tgt: float = 0.0

    def __post_init__(self):
        if not self.fn > 0:
            raise InvalidConfigurationError("natural frequency must be positive")
        if not 0 < self.zeta < 1:
            raise InvalidConfigurationError("damping ratio must lie in (0, 1)")


def _modal_term(f, mode: Mode, residue: float, zeta_scale=1.0):
    w = 2 * np.pi * np.asarray(f, dtype=float)
    wn = 2 * np.pi * mode.fn
    zeta = mode.zeta * zeta_scale
    return -(w**2) * residue / (wn**2 - w**2 + 2j * zeta * wn * w)


@dataclass(frozen=True)
class BodyAttachment:
    """Body seen from one mount attachment point in one direction.

    ``m0`` is the rigid apparent mass at the driving point and
    ``target_gain`` the rigid-body transfer accelerance to the target; mode
    residues ``dp`` and ``tgt`` are in 1/kg.
    """

    m0: float
    target_gain: float
    modes: tuple = ()

    def __post_init__(self):
        if not self.m0 > 0:
            raise InvalidConfigurationError("rigid mass must be positive")
        fns = [m.fn for m in self.modes]
        if len(set(fns)) != len(fns):
            raise InvalidConfigurationError("natural frequencies must be distinct per attachment")

    def driving_point(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        a = np.full(f.shape, 1.0 / self.m0, dtype=complex)
        for mode in self.modes:
            if mode.dp:
                a = a + _modal_term(f, mode, mode.dp)
        return a

    def transfer(self, f, zeta_scale=1.0) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        a = np.full(f.shape, self.target_gain, dtype=complex)
        for mode in self.modes:
            if mode.tgt:
                a = a + _modal_term(f, mode, mode.tgt, zeta_scale)
        return a


@dataclass(frozen=True)
class BodyModel:
    attachments: dict
    target: str = "P3"


@dataclass(frozen=True)
class OrderForce:
    """Engine excitation of one order: amplitude table vs rpm per direction."""

    rpm: tuple
    amplitude: dict
    phase_deg: dict

    def force(self, direction: str, rpm) -> np.ndarray:
        amp = np.interp(rpm, self.rpm, self.amplitude[direction])
        return amp * np.exp(1j * np.radians(self.phase_deg[direction]))


@dataclass(frozen=True)
class EngineSource:
    mass: dict
    lever: dict
    orders: dict

    def accel(self, path: PathId, order: float, rpm) -> np.ndarray:
        mag, phase = self.lever[path.mount][path.direction]
        gain = mag * np.exp(1j * np.radians(phase)) / self.mass[path.direction]
        return self.orders[order].force(path.direction, rpm) * gain


@dataclass(frozen=True)
class ImpactSettings:
    n_impacts: int = 5
    record_length: float = 4.0
    pulse_width: float = 1e-3
    peak_force: float = 1000.0
    pre_trigger: float = 0.01
    jitter: float = 0.02
    noise: float = 0.0

    def __post_init__(self):
        if self.n_impacts < 1:
            raise InvalidConfigurationError("n_impacts must be >= 1")
        if not 0 < self.peak_force <= 5000.0:
            raise InvalidConfigurationError("hammer peak force must be in (0, 5000] N")
        if not self.pulse_width > 0:
            raise InvalidConfigurationError("pulse width must be positive")
        if self.pre_trigger + self.jitter + self.pulse_width >= self.record_length:
            raise InvalidConfigurationError("impact does not fit in its record")


@dataclass(frozen=True)
class Scenario:
    """A complete synthetic vehicle and test campaign."""

    engine: EngineSource
    mounts: dict
    body: BodyModel
    rpm_start: float = 1000.0
    rpm_end: float = 6000.0
    duration: float = 60.0
    sample_rate: float = 8192.0
    noise: float = 0.0
    seed: int = 0
    nonlinearity: float = 0.0
    impact: ImpactSettings = field(default_factory=ImpactSettings)
    tacho: str = "rpm"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidConfigurationError("sweep duration must be positive")
        if not 0 < self.rpm_start < self.rpm_end:
            raise InvalidConfigurationError("sweep must run up: 0 < rpm_start < rpm_end")
        if not self.noise >= 0:
            raise InvalidConfigurationError("noise level must be >= 0")
        if not self.nonlinearity >= 0:
            raise InvalidConfigurationError("nonlinearity coefficient must be >= 0")
        if self.tacho not in ("rpm", "pulse"):
            raise InvalidConfigurationError("tacho must be 'rpm' or 'pulse'")
        for p in self.paths():
            if p not in self.body.attachments:
                raise InvalidConfigurationError(f"body model lacks attachment {p}")

    # -- geometry of the sweep --------------------------------------------
    @property
    def orders(self) -> list:
        return sorted(self.engine.orders)

    def paths(self) -> list:
        return build_paths([m for m in MOUNTS if m in self.mounts])

    def rpm_at(self, t):
        t = np.asarray(t, dtype=float)
        return self.rpm_start + (self.rpm_end - self.rpm_start) * t / self.duration

    def crank_angle(self, t):
        t = np.asarray(t, dtype=float)
        slope = (self.rpm_end - self.rpm_start) / self.duration
        return 2 * np.pi / 60.0 * (self.rpm_start * t + 0.5 * slope * t**2)

    # -- closed-form chain factors ----------------------------------------
    def mount_stiffness(self, path: PathId, f):
        return self.mounts[path.mount].complex_stiffness(path.direction, f)

    def apparent_mass(self, path: PathId, f):
        return 1.0 / self.body.attachments[path].driving_point(f)

    def body_frf(self, path: PathId, f, zeta_scale=1.0):
        return self.body.attachments[path].transfer(f, zeta_scale)

    def transmissibility(self, path: PathId, f):
        f = np.asarray(f, dtype=float)
        kd = -self.mount_stiffness(path, f) / (2 * np.pi * f) ** 2
        m = self.apparent_mass(path, f)
        return kd / (m + kd)

    def path_factors(self, path: PathId, order: float, rpm, zeta_scale=1.0) -> dict:
        """All chain quantities of one path/order at the given speeds."""
        rpm = np.asarray(rpm, dtype=float)
        f = order_frequency(order, rpm)
        a_e = self.engine.accel(path, order, rpm)
        T = self.transmissibility(path, f)
        M = self.apparent_mass(path, f)
        H = self.body_frf(path, f, zeta_scale)
        a_b = T * a_e
        force = M * a_b
        return {"freq": f, "engine": a_e, "T": T, "M": M, "H": H, "body": a_b,
                "force": force, "contribution": H * force}

    def zeta_scale(self, rpm):
        """Damping multiplier on target-path modes, 1 + c * v_rms(rpm)."""
        rpm = np.asarray(rpm, dtype=float)
        if self.nonlinearity == 0:
            return np.ones_like(rpm)
        energy = np.zeros_like(rpm)
        for o in self.orders:
            y = sum(self.path_factors(p, o, rpm)["contribution"] for p in self.paths())
            w = 2 * np.pi * order_frequency(o, rpm)
            energy += np.abs(y) ** 2 / (2 * w**2)
        return 1.0 + self.nonlinearity * np.sqrt(energy)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "rpm_start": self.rpm_start, "rpm_end": self.rpm_end, "duration": self.duration,
            "sample_rate": self.sample_rate, "noise": self.noise, "seed": self.seed,
            "nonlinearity": self.nonlinearity, "tacho": self.tacho, "metadata": self.metadata,
            "impact": asdict(self.impact),
            "engine": {
                "mass": self.engine.mass,
                "lever": {m: {d: list(v) for d, v in dd.items()} for m, dd in self.engine.lever.items()},
                "orders": [
                    {"order": o, "rpm": list(of.rpm),
                     "amplitude": {d: list(v) for d, v in of.amplitude.items()},
                     "phase_deg": of.phase_deg}
                    for o, of in sorted(self.engine.orders.items())
                ],
            },
            "mounts": [
                {"mount": m.mount, "kind": m.kind, "stiffness": m.stiffness,
                 "loss_factor": m.loss_factor, "table_freq": list(m.table_freq),
                 "table_scale": list(m.table_scale)}
                for m in (self.mounts[k] for k in MOUNTS if k in self.mounts)
            ],
            "body": {
                "target": self.body.target,
                "attachments": [
                    {"path": str(p), "m0": a.m0, "target_gain": a.target_gain,
                     "modes": [asdict(md) for md in a.modes]}
                    for p, a in sorted(self.body.attachments.items(),
                                       key=lambda kv: (MOUNTS.index(kv[0].mount),
                                                       DIRECTIONS.index(kv[0].direction)))
                ],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            eng = d["engine"]
            engine = EngineSource(
                mass={k: float(v) for k, v in eng["mass"].items()},
                lever={m: {k: tuple(v) for k, v in dd.items()} for m, dd in eng["lever"].items()},
                orders={
                    float(o["order"]): OrderForce(tuple(o["rpm"]),
                                                  {k: tuple(v) for k, v in o["amplitude"].items()},
                                                  dict(o["phase_deg"]))
                    for o in eng["orders"]
                },
            )
            mounts = {
                m["mount"]: MountModel(m["mount"], dict(m["stiffness"]), dict(m["loss_factor"]),
                                       tuple(m.get("table_freq", ())),
                                       tuple(m.get("table_scale", ())), m.get("kind", "rubber"))
                for m in d["mounts"]
            }
            attachments = {
                PathId.parse(a["path"]): BodyAttachment(
                    a["m0"], a["target_gain"], tuple(Mode(**md) for md in a["modes"]))
                for a in d["body"]["attachments"]
            }
            body = BodyModel(attachments, d["body"].get("target", "P3"))
            return cls(engine, mounts, body, d["rpm_start"], d["rpm_end"], d["duration"],
                       d["sample_rate"], d.get("noise", 0.0), d.get("seed", 0),
                       d.get("nonlinearity", 0.0), ImpactSettings(**d.get("impact", {})),
                       d.get("tacho", "rpm"), dict(d.get("metadata", {})))
        except (KeyError, TypeError) as exc:
            raise InvalidConfigurationError(f"malformed scenario description: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_scenario(scenario: Scenario, path):
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")


def default_scenario(**overrides) -> Scenario:
    """The bundled default vehicle (fixtures/default_scenario.json)."""
    text = resources.files("vibtpa").joinpath("fixtures/default_scenario.json").read_text("utf-8")
    return replace(Scenario.from_dict(json.loads(text)), **overrides)


def nonlinear_damping_variant(scenario: Scenario, coefficient: float) -> Scenario:
    """Scenario whose target-path modal damping grows with response velocity."""
    if not coefficient >= 0:
        raise InvalidConfigurationError("coefficient must be >= 0")
    return replace(scenario, nonlinearity=float(coefficient))


def stiff_mount_variant(scenario: Scenario, mount: str, factor: float = 4.0) -> Scenario:
    """Scenario with every direction of one mount stiffened by ``factor``."""
    mounts = dict(scenario.mounts)
    mounts[mount] = mounts[mount].scaled(factor)
    return replace(scenario, mounts=mounts)


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruth:
    """Exact chain quantities on an rpm grid, keyed by (PathId, order)."""

    rpm_grid: np.ndarray
    orders: tuple
    paths: tuple
    factors: dict

    def contribution(self, path, order):
        return self.factors[(path, order)]["contribution"]

    def target(self, order):
        return sum(self.factors[(p, order)]["contribution"] for p in self.paths)

    def overall_level(self):
        return np.sqrt(sum(np.abs(self.target(o)) ** 2 / 2 for o in self.orders))


def ground_truth(scenario: Scenario, rpm_grid) -> GroundTruth:
    rpm_grid = np.asarray(rpm_grid, dtype=float)
    zs = scenario.zeta_scale(rpm_grid)
    factors = {}
    for o in scenario.orders:
        for p in scenario.paths():
            factors[(p, o)] = scenario.path_factors(p, o, rpm_grid, zs)
    return GroundTruth(rpm_grid, tuple(scenario.orders), tuple(scenario.paths()), factors)


def analysis_grid(scenario: Scenario, rpm_step: float = 25.0) -> np.ndarray:
    lo = np.ceil(scenario.rpm_start / rpm_step - 1e-9)
    hi = np.floor(scenario.rpm_end / rpm_step + 1e-9)
    return np.arange(lo, hi + 1) * rpm_step


# ---------------------------------------------------------------------------
# run-up
# ---------------------------------------------------------------------------

def _check_band(scenario: Scenario):
    nyq = scenario.sample_rate / 2
    for o in scenario.orders:
        if order_frequency(o, scenario.rpm_end) >= nyq:
            raise OutOfBandError(
                f"order {o:g} reaches {order_frequency(o, scenario.rpm_end):g} Hz at "
                f"{scenario.rpm_end:g} rpm, above the Nyquist frequency {nyq:g} Hz")


def _add_noise(samples: np.ndarray, level: float, rng) -> np.ndarray:
    if level == 0:
        return samples
    rms = np.sqrt(np.mean(samples**2))
    return samples + level * rms * rng.standard_normal(samples.size)


def _tacho_channel(scenario: Scenario, t: np.ndarray) -> TimeSeries:
    if scenario.tacho == "rpm":
        return TimeSeries(scenario.rpm_at(t), scenario.sample_rate, "tacho", "tacho", unit="rpm")
    # 1 pulse/rev square wave, high for the first quarter revolution
    frac = np.mod(scenario.crank_angle(t) / (2 * np.pi), 1.0)
    pulses = np.where(frac < 0.25, 5.0, 0.0)
    return TimeSeries(pulses, scenario.sample_rate, "tacho", "tacho", unit="pulse")


def simulate_runup(scenario: Scenario, rpm_step: float = 25.0):
    """Synthesise a run-up recording and its ground truth.

    Channels: ``<M>_<D>_engine`` and ``<M>_<D>_body`` for every path, ``target``
    and ``tacho``. Noise (a fraction of each channel's RMS) is added last from
    a generator seeded with ``scenario.seed``.

    Returns
    -------
    recording : Recording
    truth : GroundTruth on the default analysis rpm grid
    """
    _check_band(scenario)
    fs = scenario.sample_rate
    n = int(round(scenario.duration * fs))
    t = np.arange(n) / fs
    rpm = scenario.rpm_at(t)
    theta = scenario.crank_angle(t)
    zs = scenario.zeta_scale(rpm) if scenario.nonlinearity else 1.0

    engine = {p: np.zeros(n) for p in scenario.paths()}
    body = {p: np.zeros(n) for p in scenario.paths()}
    target = np.zeros(n)
    for o in scenario.orders:
        carrier = np.exp(1j * o * theta)
        for p in scenario.paths():
            fac = scenario.path_factors(p, o, rpm, zs)
            engine[p] += (fac["engine"] * carrier).real
            body[p] += (fac["body"] * carrier).real
            target += (fac["contribution"] * carrier).real

    rng = np.random.default_rng(scenario.seed)
    channels = {}
    for p in scenario.paths():
        for side, store in (("engine", engine), ("body", body)):
            cid = f"{p.mount}_{p.direction}_{side}"
            x = _add_noise(store[p], scenario.noise, rng)
            channels[cid] = TimeSeries(x, fs, cid, f"{side}_side", p.mount, p.direction, ACCEL)
    channels["target"] = TimeSeries(_add_noise(target, scenario.noise, rng), fs, "target",
                                    "target", unit=ACCEL)
    channels["tacho"] = _tacho_channel(scenario, t)
    meta = {"gear": "3", "load": "full"}
    meta.update(scenario.metadata)
    rec = Recording("runup", "runup", channels, meta)
    return rec, ground_truth(scenario, analysis_grid(scenario, rpm_step))


def contribution_signal(scenario: Scenario, path: PathId) -> np.ndarray:
    """Noise-free time-domain target contribution of one path."""
    fs = scenario.sample_rate
    n = int(round(scenario.duration * fs))
    t = np.arange(n) / fs
    rpm = scenario.rpm_at(t)
    theta = scenario.crank_angle(t)
    zs = scenario.zeta_scale(rpm) if scenario.nonlinearity else 1.0
    y = np.zeros(n)
    for o in scenario.orders:
        y += (scenario.path_factors(path, o, rpm, zs)["contribution"] * np.exp(1j * o * theta)).real
    return y


# ---------------------------------------------------------------------------
# impact
# ---------------------------------------------------------------------------

def half_sine_pulse(t, t0: float, width: float, peak: float) -> np.ndarray:
    tau = np.asarray(t, dtype=float) - t0
    return np.where((tau >= 0) & (tau <= width), peak * np.sin(np.pi * tau / width), 0.0)


@dataclass(frozen=True)
class ImpactTruth:
    path: PathId
    apparent_mass: object
    body_frf: object
    impact_times: np.ndarray


def simulate_impact(scenario: Scenario, mount: str, direction: str):
    """Hammer test at the body side of one mount.

    ``n_impacts`` half-sine pulses, one per ``record_length`` block, each
    starting ``pre_trigger`` plus a random jitter into its block. Responses
    are the force filtered through the closed-form driving-point and transfer
    accelerances (linear damping, as a low-level hammer test sees it).

    Returns
    -------
    recording : Recording with hammer_force, body_side and target channels
    truth : ImpactTruth whose ``apparent_mass``/``body_frf`` are callables of f
    """
    path = PathId(mount, direction)
    if path not in scenario.paths():
        raise InvalidConfigurationError(f"scenario has no path {path}")
    imp = scenario.impact
    fs = scenario.sample_rate
    n_blk = int(round(imp.record_length * fs))
    n = n_blk * imp.n_impacts
    t = np.arange(n) / fs
    idx = scenario.paths().index(path)
    rng = np.random.default_rng([scenario.seed, 1 + idx])
    starts = np.arange(imp.n_impacts) * imp.record_length + imp.pre_trigger \
        + imp.jitter * rng.random(imp.n_impacts)
    force = np.zeros(n)
    for t0 in starts:
        force += half_sine_pulse(t, t0, imp.pulse_width, imp.peak_force)

    nfft = 2 * n
    F = np.fft.rfft(force, nfft)
    f = np.fft.rfftfreq(nfft, 1 / fs)
    att = scenario.body.attachments[path]
    a_body = np.fft.irfft(F * att.driving_point(f), nfft)[:n]
    a_tgt = np.fft.irfft(F * att.transfer(f), nfft)[:n]
    a_body = _add_noise(a_body, imp.noise, rng)
    a_tgt = _add_noise(a_tgt, imp.noise, rng)

    pre = f"impact_{mount}_{direction}"
    channels = {
        f"{pre}_force": TimeSeries(force, fs, f"{pre}_force", "hammer_force", mount, direction, "N"),
        f"{pre}_body": TimeSeries(a_body, fs, f"{pre}_body", "body_side", mount, direction, ACCEL),
        f"{pre}_target": TimeSeries(a_tgt, fs, f"{pre}_target", "target", unit=ACCEL),
    }
    rec = Recording(pre, "impact", channels,
                    {"mount": mount, "direction": direction, "n_impacts": imp.n_impacts})
    truth = ImpactTruth(path, lambda fr: scenario.apparent_mass(path, fr),
                        lambda fr: scenario.body_frf(path, fr), starts)
    return rec, truth


def simulate_dataset(scenario: Scenario, impacts: bool = True, rpm_step: float = 25.0):
    """Run-up plus one impact recording per path, packaged as a Dataset."""
    run, truth = simulate_runup(scenario, rpm_step)
    recordings = {run.name: run}
    if impacts:
        for p in scenario.paths():
            rec, _ = simulate_impact(scenario, p.mount, p.direction)
            recordings[rec.name] = rec
    return Dataset(scenario.sample_rate, recordings), truth
