"""Command-line entry point: ``vibtpa <command> ...`` (or ``python3 -m vibtpa``).

Exit status: 0 on success, 1 for input errors (bad manifest, missing
channels, invalid options), 2 for computation errors (no excitation, empty
results).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import dataio
from .errors import ComputationError, InputError, InvalidConfigurationError
from .pipeline import (
    PipelineConfig,
    _tag,
    check_inputs,
    impact_frfs,
    order_tracks,
    run_pipeline,
    write_results,
)
from .signal_core import MOUNTS, SpectralConfig
from .synth_model import (
    default_scenario,
    load_scenario,
    nonlinear_damping_variant,
    save_scenario,
    simulate_dataset,
    stiff_mount_variant,
)
from .tpa_engine import ALL, PathId, build_paths

log = logging.getLogger("vibtpa")

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _range(text: str) -> tuple:
    vals = _floats(text.replace(":", ","))
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected LOW,HIGH, got {text!r}")
    return vals


def _analysis_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("analysis")
    g.add_argument("--df", type=float, default=0.25, help="FRF resolution [Hz] (default 0.25)")
    g.add_argument("--fmax", type=float, default=800.0, help="FRF upper frequency [Hz] (default 800)")
    g.add_argument("--highpass", type=float, default=7.0,
                   help="high-pass cutoff [Hz] for run-up channels, 0 disables (default 7)")
    g.add_argument("--orders", type=_floats, default=(2.0, 4.0, 6.0),
                   help="engine orders, comma separated (default 2,4,6)")
    g.add_argument("--coh-threshold", type=float, default=0.7,
                   help="minimum coherence for a valid FRF bin (default 0.7)")
    g.add_argument("--rpm-step", type=float, default=25.0, help="rpm grid step (default 25)")
    g.add_argument("--rpm-range", type=_range, default=None, metavar="LOW,HIGH",
                   help="rpm range for ranking (default: whole sweep)")
    g.add_argument("--bandwidth-orders", type=float, default=0.5,
                   help="order tracker bandwidth in orders (default 0.5)")
    return p


def _config(args) -> PipelineConfig:
    spectral = SpectralConfig(df=args.df, f_max=args.fmax, highpass_cutoff=args.highpass,
                              coh_threshold=args.coh_threshold)
    return PipelineConfig(spectral=spectral, orders=tuple(args.orders), rpm_step=args.rpm_step,
                          rpm_range=args.rpm_range, bandwidth_orders=args.bandwidth_orders,
                          omega_squared_scaling=getattr(args, "omega2", False))


def _paths(dataset, selector: str):
    paths = build_paths(dataset.mounts())
    if selector.upper() == ALL:
        return paths
    p = PathId.parse(selector)
    if p not in paths:
        raise InvalidConfigurationError(f"path {p} not present in dataset")
    return [p]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario) if args.scenario else default_scenario()
    overrides = {k: getattr(args, k) for k in ("duration", "sample_rate", "noise", "seed", "tacho")
                 if getattr(args, k) is not None}
    if overrides:
        sc = type(sc).from_dict({**sc.to_dict(), **overrides})
    for mount in args.stiff or ():
        sc = stiff_mount_variant(sc, mount, args.stiff_factor)
    if args.nonlinear:
        sc = nonlinear_damping_variant(sc, args.nonlinear)

    out = Path(args.out)
    dataset, truth = simulate_dataset(sc, impacts=not args.no_impacts, rpm_step=args.rpm_step)
    extras = {"tacho": {"pulses_per_rev": 1}} if sc.tacho == "pulse" else None
    manifest = dataio.write_dataset(dataset, out, extras)
    save_scenario(sc, out / "scenario.json")

    d = out / "truth"
    d.mkdir(exist_ok=True)
    for (p, o), fac in sorted(truth.factors.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        dataio.write_rpm_series(truth.rpm_grid, fac["contribution"], [True] * truth.rpm_grid.size,
                                d / f"y_{p}_{_tag(o)}.csv")
    cols = {"rpm": truth.rpm_grid}
    for o in truth.orders:
        dataio.write_rpm_series(truth.rpm_grid, truth.target(o), [True] * truth.rpm_grid.size,
                                d / f"total_{_tag(o)}.csv")
    cols["overall_level"] = truth.overall_level()
    dataio.write_table(cols, d / "overall_level.csv")
    print(f"wrote {manifest}")
    return EXIT_OK


def cmd_frf(args) -> int:
    ds = dataio.load_dataset(args.manifest)
    cfg = _config(args)
    am, bf = impact_frfs(ds, _paths(ds, args.path), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p, h in bf.items():
        dataio.write_spectrum(h.frf, out / f"body_frf_{p}.csv", h.coherence)
        print(f"{p}: {int(h.valid.sum())} valid bins, {h.n_averages} averages")
    return EXIT_OK


def cmd_apparent_mass(args) -> int:
    ds = dataio.load_dataset(args.manifest)
    cfg = _config(args)
    am, _ = impact_frfs(ds, _paths(ds, args.path), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p, m in am.items():
        dataio.write_spectrum(m.frf, out / f"apparent_mass_{p}.csv", m.coherence)
        print(f"{p}: {int(m.valid.sum())} valid bins, {m.n_averages} averages")
    return EXIT_OK


def cmd_transmissibility(args) -> int:
    ds = dataio.load_dataset(args.manifest)
    cfg = _config(args)
    paths = _paths(ds, args.path)
    _, _, trans, _ = order_tracks(ds, paths, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p in paths:
        for o in cfg.orders:
            tr = trans[(p, o)]
            dataio.write_rpm_series(tr.rpm_grid, tr.ratio, tr.valid, out / f"T_{p}_{_tag(o)}.csv")
    print(f"wrote {len(paths) * len(cfg.orders)} transmissibility curves to {out}")
    return EXIT_OK


def _full(args, parts) -> int:
    ds = dataio.load_dataset(args.manifest)
    cfg = _config(args)
    check_inputs(ds, cfg)
    result = run_pipeline(ds, cfg)
    write_results(result, args.out, parts)
    if "ranking" in parts or "all" in parts:
        table = result.ranking_path if getattr(args, "group_by", "mount") == "path" else result.ranking_mount
        lo, hi = table.rpm_range
        print(f"ranking by {table.group_by} over {lo:g}-{hi:g} rpm")
        for i, e in enumerate(table.entries, 1):
            print(f"  {i}. {e.key:<7s} rms {e.rms_level:.4g} m/s^2  share {e.share:.3f}")
    if "contributions" in parts or "all" in parts:
        grid, sim, valid = result.overall_level()
        meas = result.measured_level()
        if meas is not None:
            ok = valid & meas[2]
            if ok.any():
                err = abs(sim[ok] - meas[1][ok]) / meas[1][ok]
                print(f"synthesized vs tracked target: max level error {err.max():.3%} "
                      f"over {int(ok.sum())} bins")
    print(f"wrote results to {args.out}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    return _full(args, ("contributions",))


def cmd_rank(args) -> int:
    return _full(args, ("ranking",))


def cmd_stiffness(args) -> int:
    return _full(args, ("stiffness",))


def cmd_pipeline(args) -> int:
    return _full(args, ("all",))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibtpa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    flags = _analysis_flags()

    s = sub.add_parser("simulate", help="write a synthetic dataset with ground truth")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--scenario", help="scenario JSON (default: bundled vehicle)")
    s.add_argument("--stiff", action="append", choices=MOUNTS, help="stiffen a mount (repeatable)")
    s.add_argument("--stiff-factor", type=float, default=4.0)
    s.add_argument("--nonlinear", type=float, default=0.0, metavar="C",
                   help="velocity-dependent damping coefficient [s/m]")
    s.add_argument("--duration", type=float)
    s.add_argument("--sample-rate", type=float)
    s.add_argument("--noise", type=float, help="additive noise as a fraction of channel RMS")
    s.add_argument("--seed", type=int)
    s.add_argument("--tacho", choices=("rpm", "pulse"))
    s.add_argument("--no-impacts", action="store_true", help="run-up recording only")
    s.add_argument("--rpm-step", type=float, default=25.0, help="ground-truth rpm grid step")
    s.set_defaults(func=cmd_simulate)

    def analysis(name, func, help_, path_opt=False):
        a = sub.add_parser(name, parents=[flags], help=help_)
        a.add_argument("manifest", help="dataset manifest.json")
        a.add_argument("--out", required=True, help="output directory")
        if path_opt:
            a.add_argument("--path", default=ALL, help="path such as RH-X, or ALL (default)")
        a.set_defaults(func=func)
        return a

    analysis("frf", cmd_frf, "body FRFs (hammer to target) per path", path_opt=True)
    analysis("apparent-mass", cmd_apparent_mass, "driving-point apparent mass per path", path_opt=True)
    analysis("transmissibility", cmd_transmissibility, "order transmissibility per path", path_opt=True)
    analysis("synthesize", cmd_synthesize, "path contributions, totals and level-vs-rpm CSV")
    r = analysis("rank", cmd_rank, "rank mounts/paths by contribution energy")
    r.add_argument("--group-by", choices=("mount", "path"), default="mount")
    k = analysis("stiffness", cmd_stiffness, "mount dynamic stiffness T * M_app")
    k.add_argument("--omega2", action="store_true", help="scale by (2 pi f)^2 to give N/m")
    analysis("pipeline", cmd_pipeline, "full analysis, all outputs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; those are input errors here
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
