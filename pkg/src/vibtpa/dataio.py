"""Datasets on disk: JSON manifest + CSV channel recordings, and result export.

Manifest layout::

    {
      "format": "vibtpa-manifest/1",
      "sample_rate": 8192.0,
      "channels": [
        {"id": "RH_X_engine", "role": "engine_side", "mount": "RH", "direction": "X",
         "unit": "m/s^2", "file": "runup.csv", "column": "RH_X_engine"},
        ...
      ],
      "recordings": [
        {"name": "runup", "kind": "runup", "files": ["runup.csv"],
         "metadata": {"gear": "3", "load": "full"}},
        {"name": "impact_RH_X", "kind": "impact", "files": ["impact_RH_X.csv"],
         "metadata": {"mount": "RH", "direction": "X"}}
      ]
    }

Recording CSVs have a header row, ``time_s`` in the first column and one
column per channel. Floats are written with 17 significant digits so every
value survives a write/read cycle exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .errors import (
    BadColumnError,
    DuplicateChannelError,
    InvalidConfigurationError,
    MissingFileError,
    MissingInputError,
    SchemaViolationError,
    UnitMismatchError,
)
from .signal_core import DIRECTIONS, MOUNTS, ROLES, Spectrum, TimeSeries

FORMAT = "vibtpa-manifest/1"
FLOAT_FMT = "%.17g"
KINDS = ("runup", "impact")

ACCEL_UNITS = ("m/s^2", "m/s2", "m/s²")
UNITS_BY_ROLE = {
    "engine_side": ACCEL_UNITS,
    "body_side": ACCEL_UNITS,
    "target": ACCEL_UNITS,
    "hammer_force": ("N",),
    "tacho": ("rpm", "pulse", "V"),
}


@dataclass(frozen=True)
class Recording:
    name: str
    kind: str
    channels: dict
    metadata: dict = field(default_factory=dict)

    def find(self, role: str, mount: Optional[str] = None,
             direction: Optional[str] = None) -> Optional[TimeSeries]:
        for ts in self.channels.values():
            if ts.role != role:
                continue
            if mount is not None and ts.mount != mount:
                continue
            if direction is not None and ts.direction != direction:
                continue
            return ts
        return None

    def require(self, role, mount=None, direction=None) -> TimeSeries:
        ts = self.find(role, mount, direction)
        if ts is None:
            where = "-".join(x for x in (mount, direction) if x)
            raise MissingInputError(
                f"recording {self.name!r} has no {role} channel" + (f" at {where}" if where else ""))
        return ts


@dataclass(frozen=True)
class Dataset:
    sample_rate: float
    recordings: dict
    channel_info: dict = field(default_factory=dict)

    def runup(self) -> Recording:
        runs = [r for r in self.recordings.values() if r.kind == "runup"]
        if not runs:
            raise MissingInputError("dataset contains no run-up recording")
        return runs[0]

    def impact(self, mount: str, direction: str) -> Recording:
        for r in self.recordings.values():
            if r.kind != "impact":
                continue
            md = r.metadata
            if md.get("mount") == mount and md.get("direction") == direction:
                return r
            if "mount" not in md and r.find("body_side", mount, direction) is not None:
                return r
        raise MissingInputError(f"dataset has no impact recording for {mount}-{direction}")

    def mounts(self) -> list[str]:
        run = self.runup()
        present = {ts.mount for ts in run.channels.values() if ts.role == "engine_side"}
        return [m for m in MOUNTS if m in present]


# ---------------------------------------------------------------------------
# manifest validation and loading
# ---------------------------------------------------------------------------

def _schema(cond, msg):
    if not cond:
        raise SchemaViolationError(msg)


def validate_manifest(manifest: dict):
    """Structural checks that do not touch the data files."""
    _schema(isinstance(manifest, dict), "manifest must be a JSON object")
    for key in ("sample_rate", "channels", "recordings"):
        _schema(key in manifest, f"manifest lacks required key {key!r}")
    fs = manifest["sample_rate"]
    _schema(isinstance(fs, (int, float)) and fs > 0, "sample_rate must be a positive number")
    _schema(isinstance(manifest["channels"], list), "channels must be a list")
    _schema(isinstance(manifest["recordings"], list), "recordings must be a list")

    seen = set()
    for i, ch in enumerate(manifest["channels"]):
        _schema(isinstance(ch, dict), f"channel #{i} must be an object")
        for key in ("id", "role", "unit", "file", "column"):
            _schema(key in ch, f"channel #{i} ({ch.get('id', '?')}) lacks {key!r}")
        cid = ch["id"]
        if cid in seen:
            raise DuplicateChannelError(f"duplicate channel id {cid!r}")
        seen.add(cid)
        role = ch["role"]
        _schema(role in ROLES, f"channel {cid!r}: unknown role {role!r}")
        if role in ("engine_side", "body_side"):
            _schema(ch.get("mount") is not None,
                    f"channel {cid!r}: role {role} requires a mount")
            _schema(ch.get("direction") is not None,
                    f"channel {cid!r}: role {role} requires a direction")
        if ch.get("mount") is not None:
            _schema(ch["mount"] in MOUNTS, f"channel {cid!r}: unknown mount {ch['mount']!r}")
        if ch.get("direction") is not None:
            _schema(ch["direction"] in DIRECTIONS,
                    f"channel {cid!r}: unknown direction {ch['direction']!r}")
        if ch["unit"] not in UNITS_BY_ROLE[role]:
            raise UnitMismatchError(
                f"channel {cid!r}: unit {ch['unit']!r} is not valid for role {role} "
                f"(expected one of {', '.join(UNITS_BY_ROLE[role])})")

    owner = {}
    names = set()
    for i, rec in enumerate(manifest["recordings"]):
        _schema(isinstance(rec, dict), f"recording #{i} must be an object")
        for key in ("name", "kind", "files"):
            _schema(key in rec, f"recording #{i} lacks {key!r}")
        _schema(rec["kind"] in KINDS, f"recording {rec['name']!r}: kind must be runup or impact")
        _schema(rec["name"] not in names, f"duplicate recording name {rec['name']!r}")
        names.add(rec["name"])
        for f in rec["files"]:
            _schema(f not in owner, f"file {f!r} belongs to recordings {owner.get(f)!r} and {rec['name']!r}")
            owner[f] = rec["name"]
    for ch in manifest["channels"]:
        _schema(ch["file"] in owner,
                f"channel {ch['id']!r}: file {ch['file']!r} is not part of any recording")


def _read_csv(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise MissingFileError(f"data file not found: {path}")
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise BadColumnError(f"cannot parse {path}: {exc}") from exc


def load_dataset(manifest_path) -> Dataset:
    """Load and validate a dataset described by a JSON manifest."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFileError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"{manifest_path}: not valid JSON ({exc})") from exc
    validate_manifest(manifest)
    base = manifest_path.parent
    fs = float(manifest["sample_rate"])

    frames: dict[str, pd.DataFrame] = {}
    for rec in manifest["recordings"]:
        for f in rec["files"]:
            df = _read_csv(base / f)
            if df.columns[0] != "time_s":
                raise BadColumnError(f"{base / f}: first column must be 'time_s', found {df.columns[0]!r}")
            t = df["time_s"].to_numpy(float)
            if t.size > 1 and not math.isclose(t[1] - t[0], 1.0 / fs, rel_tol=1e-6):
                raise SchemaViolationError(
                    f"{base / f}: time step {t[1] - t[0]:g} s does not match sample_rate {fs:g} Hz")
            frames[f] = df

    by_file: dict[str, dict] = {f: {} for f in frames}
    info = {}
    for ch in manifest["channels"]:
        df = frames[ch["file"]]
        col = ch["column"]
        if col not in df.columns:
            raise BadColumnError(f"channel {ch['id']!r}: column {col!r} not found in {ch['file']}")
        values = df[col].to_numpy()
        if values.dtype.kind not in "fiu" or not np.all(np.isfinite(values.astype(float))):
            raise BadColumnError(f"channel {ch['id']!r}: column {col!r} in {ch['file']} is not finite numeric data")
        ts = TimeSeries(values.astype(float), fs, ch["id"], ch["role"], ch.get("mount"),
                        ch.get("direction"), ch["unit"])
        by_file[ch["file"]][ch["id"]] = ts
        info[ch["id"]] = {k: v for k, v in ch.items() if k not in ("id",)}

    recordings = {}
    for rec in manifest["recordings"]:
        channels = {}
        for f in rec["files"]:
            channels.update(by_file[f])
        recordings[rec["name"]] = Recording(rec["name"], rec["kind"], channels,
                                            dict(rec.get("metadata", {})))
    return Dataset(fs, recordings, info)


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def _write_frame(df: pd.DataFrame, path: Path):
    df.to_csv(path, index=False, float_format=FLOAT_FMT, lineterminator="\n")


def write_dataset(dataset: Dataset, outdir, channel_extras: Optional[dict] = None) -> Path:
    """Write a dataset as manifest.json plus one CSV per recording.

    Returns the manifest path.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    channel_extras = channel_extras or {}
    channels, recordings = [], []
    for rec in dataset.recordings.values():
        fname = f"{rec.name}.csv"
        n = max(len(ts) for ts in rec.channels.values())
        cols = {"time_s": np.arange(n) / dataset.sample_rate}
        for cid, ts in rec.channels.items():
            if len(ts) != n:
                raise InvalidConfigurationError(f"recording {rec.name!r}: channels differ in length")
            cols[cid] = ts.samples
            entry = {"id": cid, "role": ts.role}
            if ts.mount is not None:
                entry["mount"] = ts.mount
            if ts.direction is not None:
                entry["direction"] = ts.direction
            entry.update({"unit": ts.unit, "file": fname, "column": cid})
            entry.update(channel_extras.get(cid, {}))
            channels.append(entry)
        _write_frame(pd.DataFrame(cols), outdir / fname)
        recordings.append({"name": rec.name, "kind": rec.kind, "files": [fname],
                           "metadata": rec.metadata})
    manifest = {"format": FORMAT, "sample_rate": dataset.sample_rate,
                "channels": channels, "recordings": recordings}
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _complex_columns(values: np.ndarray, valid: np.ndarray) -> dict:
    v = np.asarray(values, complex)
    with np.errstate(invalid="ignore"):
        return {
            "real": v.real,
            "imag": v.imag,
            "magnitude": np.abs(v),
            "phase_deg": np.degrees(np.angle(v)),
            "valid": np.asarray(valid, bool).astype(int),
        }


def write_spectrum(spec: Spectrum, path, coherence=None):
    """Spectrum CSV: freq_hz, real, imag, magnitude, phase_deg, valid[, coherence]."""
    cols = {"freq_hz": spec.freqs, **_complex_columns(spec.values, spec.valid)}
    if coherence is not None:
        cols["coherence"] = np.asarray(coherence, float)
    _write_frame(pd.DataFrame(cols), Path(path))


def read_spectrum(path):
    """Inverse of :func:`write_spectrum`; returns ``(Spectrum, coherence or None)``."""
    df = _read_csv(Path(path))
    for col in ("freq_hz", "real", "imag", "valid"):
        if col not in df.columns:
            raise BadColumnError(f"{path}: missing column {col!r}")
    values = df["real"].to_numpy(float) + 1j * df["imag"].to_numpy(float)
    values[df["valid"].to_numpy() == 0] = np.nan + 1j * np.nan
    coh = df["coherence"].to_numpy(float) if "coherence" in df.columns else None
    return Spectrum(df["freq_hz"].to_numpy(float), values), coh


def write_rpm_series(rpm_grid, values, valid, path):
    """Order track / transmissibility / contribution CSV indexed by rpm."""
    cols = {"rpm": np.asarray(rpm_grid, float), **_complex_columns(values, valid)}
    _write_frame(pd.DataFrame(cols), Path(path))


def read_rpm_series(path):
    """Returns ``(rpm_grid, values, valid)`` as written by :func:`write_rpm_series`."""
    df = _read_csv(Path(path))
    for col in ("rpm", "real", "imag", "valid"):
        if col not in df.columns:
            raise BadColumnError(f"{path}: missing column {col!r}")
    values = df["real"].to_numpy(float) + 1j * df["imag"].to_numpy(float)
    return df["rpm"].to_numpy(float), values, df["valid"].to_numpy() != 0


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_table(columns: dict, path):
    _write_frame(pd.DataFrame(columns), Path(path))
