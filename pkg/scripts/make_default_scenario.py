"""Regenerate src/vibtpa/fixtures/default_scenario.json.

The constants below are illustrative engineering values for a small
transverse 4-cylinder installation, not measurements: a hydraulic RH mount
with a damped stiffness bump, rubber LH/REAR mounts softening slightly with
frequency, and a heavy body whose floor modes dominate the transfer to the
target point.

Lever phases are picked so the nine paths interfere only partially at the
target (the summed response never falls below ~10% of the summed path
magnitudes); a near-perfect cancellation would turn 1e-4 estimator errors
into large relative errors on the total.
"""

import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "vibtpa" / "fixtures" / "default_scenario.json"

MOUNTS = ("RH", "LH", "REAR")
DIRS = ("X", "Y", "Z")
RPM_TABLE = [1000, 2000, 3000, 4000, 5000, 6000]

# order -> (base amplitude at 3000 rpm per direction [N], phase per direction [deg])
ORDER_FORCES = {
    2.0: ({"X": 250.0, "Y": 120.0, "Z": 400.0}, {"X": 0.0, "Y": 40.0, "Z": -30.0}),
    4.0: ({"X": 70.0, "Y": 40.0, "Z": 110.0}, {"X": 60.0, "Y": -20.0, "Z": 15.0}),
    6.0: ({"X": 25.0, "Y": 15.0, "Z": 40.0}, {"X": -45.0, "Y": 80.0, "Z": 10.0}),
}

LEVER = {
    "RH": {"X": [1.0, 0.0], "Y": [0.9, 10.0], "Z": [1.1, -5.0]},
    "LH": {"X": [1.0, 30.0], "Y": [0.85, 15.0], "Z": [1.05, 20.0]},
    "REAR": {"X": [0.8, 50.0], "Y": [1.0, -20.0], "Z": [0.7, 40.0]},
}

FLOOR_MODES = [(48.0, 0.05), (95.0, 0.05), (180.0, 0.045), (360.0, 0.05), (550.0, 0.055)]


def rounded(x, digits=4):
    return float(f"{x:.{digits}g}")


def mounts():
    f = np.arange(0.0, 1001.0, 10.0)
    bump = 1.0 + 0.4 / (1.0 + ((f - 70.0) / 12.0) ** 2)
    return [
        {"mount": "RH", "kind": "hydraulic",
         "stiffness": {"X": 1.6e5, "Y": 1.4e5, "Z": 2.0e5},
         "loss_factor": {"X": 0.2, "Y": 0.2, "Z": 0.25},
         "table_freq": f.tolist(), "table_scale": [rounded(b) for b in bump]},
        {"mount": "LH", "kind": "rubber",
         "stiffness": {"X": 1.8e5, "Y": 1.5e5, "Z": 2.2e5},
         "loss_factor": {"X": 0.1, "Y": 0.1, "Z": 0.1},
         "table_freq": [0.0, 1000.0], "table_scale": [1.0, 0.8]},
        {"mount": "REAR", "kind": "rubber",
         "stiffness": {"X": 1.3e5, "Y": 1.0e5, "Z": 1.6e5},
         "loss_factor": {"X": 0.12, "Y": 0.12, "Z": 0.12},
         "table_freq": [0.0, 1000.0], "table_scale": [1.0, 0.85]},
    ]


def attachments():
    out = []
    for i, m in enumerate(MOUNTS):
        for j, d in enumerate(DIRS):
            k = 3 * i + j
            modes = [
                {"fn": 72.0 + 4.0 * k, "zeta": 0.06, "dp": rounded(1 / (1400.0 + 50 * k)), "tgt": 0.0},
                {"fn": 260.0 + 9.0 * k, "zeta": 0.06, "dp": rounded(1 / (1300.0 + 40 * k)), "tgt": 0.0},
            ]
            for r, (fn, zeta) in enumerate(FLOOR_MODES):
                sign = 1.0 if (k + r) % 3 else -1.0
                modes.append({"fn": fn, "zeta": zeta, "dp": 0.0,
                              "tgt": rounded(sign / (500.0 + 60.0 * ((k * 7 + r * 3) % 9)))})
            out.append({"path": f"{m}-{d}", "m0": 380.0 + 10.0 * k,
                        "target_gain": rounded((1.0 if k % 2 else -1.0) / (2500.0 + 100 * k)),
                        "modes": modes})
    return out


def main():
    scenario = {
        "rpm_start": 1000.0, "rpm_end": 6000.0, "duration": 60.0, "sample_rate": 8192.0,
        "noise": 0.0, "seed": 20121226, "nonlinearity": 0.0, "tacho": "rpm",
        "metadata": {"gear": "3", "load": "full", "engine": "4-cylinder 1.7 L"},
        "impact": {"n_impacts": 5, "record_length": 4.0, "pulse_width": 0.001,
                   "peak_force": 1000.0, "pre_trigger": 0.01, "jitter": 0.02, "noise": 0.0},
        "engine": {
            "mass": {"X": 160.0, "Y": 160.0, "Z": 140.0},
            "lever": LEVER,
            "orders": [
                {"order": o, "rpm": RPM_TABLE,
                 "amplitude": {d: [rounded(amp[d] * (r / 3000.0) ** 2) for r in RPM_TABLE] for d in DIRS},
                 "phase_deg": ph}
                for o, (amp, ph) in ORDER_FORCES.items()
            ],
        },
        "mounts": mounts(),
        "body": {"target": "P3", "attachments": attachments()},
    }
    OUT.write_text(json.dumps(scenario, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
