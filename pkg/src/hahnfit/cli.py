"""Command-line front end: basis construction, series fitting, sliding-window
anomaly detection over SP3 directories, decay tables and synthetic data.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure,
4 an event exceeded the --fail-on-severity threshold.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import HahnParams, decay_bound, hahn_value_log, log_norm_sq, summand_profile
from .basis import (
    BasisCache,
    DegenerateLattice,
    Lattice,
    NonConvergence,
    build_basis,
    save_basis,
)
from .conditioning import basis_gram_condition, monomial_condition_estimate
from .detect import (
    DetectorConfig,
    WindowTooNoisy,
    sliding_analysis,
    write_events_csv,
    write_events_jsonl,
)
from .fitting import DataSeries, detrend, write_fit_csv, write_fit_sidecar
from .sp3 import Sp3Error, assemble_span, assemble_window, find_sp3_files, parse_sp3
from .synth import (
    InjectedAnomaly,
    jump_series,
    outlier_series,
    synth_orbit,
    write_ground_truth,
    write_orbit_csv,
    write_sp3_corpus,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_SEVERITY = 4

log = logging.getLogger("hahnfit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); remap to our code
        raise UsageError(message)


@dataclass
class RunManifest:
    subcommand: str
    arguments: dict
    inputs: list[str]
    outputs: list[str]
    package_version: str
    python_version: str
    started_utc: str
    duration_s: float


def _write_manifest(path: Path, manifest: RunManifest) -> None:
    with open(path, "w") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest_for(args: argparse.Namespace, started: float,
                  inputs: list[str], outputs: list[str]) -> RunManifest:
    arguments = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in ("func", "subcommand") and not callable(v)
    }
    return RunManifest(
        subcommand=args.subcommand,
        arguments=arguments,
        inputs=sorted(inputs),
        outputs=sorted(outputs),
        package_version=__version__,
        python_version=sys.version.split()[0],
        started_utc=datetime.utcfromtimestamp(started).isoformat() + "Z",
        duration_s=round(time.time() - started, 3),
    )


def _load_lattice_file(path: Path) -> Lattice:
    points = [float(line) for line in path.read_text().split()]
    return Lattice.from_points(points)


def cmd_basis(args: argparse.Namespace) -> int:
    started = time.time()
    if (args.points is None) == (args.lattice_file is None):
        raise UsageError("exactly one of --points / --lattice-file is required")
    if args.points is not None:
        lattice = Lattice.equidistant(args.points)
        inputs = []
    else:
        lattice = _load_lattice_file(Path(args.lattice_file))
        inputs = [str(args.lattice_file)]
    basis = build_basis(lattice, args.degree, args.tol)
    out = Path(args.out)
    save_basis(basis, out)
    print(f"points={basis.n_points} degree={basis.max_degree} kind={basis.lattice.kind}")
    print(f"achieved_orth_err={basis.achieved_orth_err:.6e}")
    if args.show_conditioning:
        for pts, deg in ((11, 10), (31, 30)):
            cond = monomial_condition_estimate(pts, deg)
            print(f"monomial design condition, {pts} points, degrees 0..{deg}: {cond:.3e}")
        print(f"orthogonal basis gram condition: {basis_gram_condition(basis.values):.12f}")
    _write_manifest(
        out.parent / (out.name + ".manifest.json"),
        _manifest_for(args, started, inputs, [str(out)]),
    )
    return EXIT_OK


def _read_series_csv(path: Path) -> DataSeries:
    ts, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("t", "t_seconds", "time"):
                continue
            ts.append(float(row[0]))
            vs.append(float(row[1]))
    if len(ts) < 2:
        raise Sp3Error(f"{path}: not enough rows for a series")
    return DataSeries(Lattice.from_points(ts), np.array(vs))


def cmd_fit(args: argparse.Namespace) -> int:
    started = time.time()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.data is not None:
        series = _read_series_csv(Path(args.data))
        inputs = [str(args.data)]
        label = Path(args.data).stem
    else:
        for flag in ("sp3_dir", "satellite", "coordinate", "start", "days"):
            if getattr(args, flag) is None:
                raise UsageError("--data or the full SP3 selection "
                                 "(--sp3-dir --satellite --coordinate --start --days) is required")
        paths = find_sp3_files(args.sp3_dir, args.pattern)
        if not paths:
            raise UsageError(f"no SP3 files matching {args.pattern!r} in {args.sp3_dir}")
        files = [parse_sp3(p) for p in paths]
        sat_series, lattice = assemble_window(
            files, args.satellite, args.coordinate,
            datetime.fromisoformat(args.start), args.days,
        )
        series = DataSeries(lattice, sat_series.values, unit="km")
        inputs = [str(p) for p in paths]
        label = f"{args.satellite}-{args.coordinate}"
    if not 0 <= args.degree <= series.lattice.upper_index:
        raise UsageError(
            f"degree {args.degree} out of range for {series.lattice.n_points} points"
        )
    basis = BasisCache().get(series.lattice, args.degree, args.tol)
    fit = detrend(basis, series, args.degree)
    csv_path = write_fit_csv(outdir / f"fit-{label}.csv", series, fit)
    json_path = write_fit_sidecar(
        outdir / f"fit-{label}.json", series, fit,
        extra={"achieved_orth_err": basis.achieved_orth_err},
    )
    print(f"wrote {csv_path} and {json_path}")
    _write_manifest(
        outdir / "manifest.json",
        _manifest_for(args, started, inputs, [str(csv_path), str(json_path)]),
    )
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    started = time.time()
    paths = find_sp3_files(args.sp3_dir, args.pattern)
    if not paths:
        raise UsageError(f"no SP3 files matching {args.pattern!r} in {args.sp3_dir}")
    files = [parse_sp3(p) for p in paths]
    for f in files:
        for issue in f.issues:
            log.warning("%s:%d: %s", f.path, issue.line_no, issue.reason)

    all_sats = sorted({rec.satellite for f in files for rec in f.records})
    satellites = args.satellite if args.satellite else all_sats
    unknown = set(satellites) - set(all_sats)
    if unknown:
        raise Sp3Error(f"satellites not in corpus: {sorted(unknown)}")
    coordinates = ["X", "Y", "Z"] if args.coordinate == "all" else [args.coordinate]

    first = min(rec.epoch for f in files for rec in f.records)
    last = max(rec.epoch for f in files for rec in f.records)
    n_epochs = int(round((last - first).total_seconds() / 900.0)) + 1

    config = DetectorConfig(
        window_points=args.window,
        degree=args.degree,
        step_points=args.step,
        spike_threshold_factor=args.threshold,
        boundary_mask_points=args.mask,
        orth_tol=args.tol,
    )
    cache = BasisCache()

    def job(sat: str, coord: str):
        series, _ = assemble_span(
            files, sat, coord, first, n_epochs,
            max_gap_fraction=config.max_gap_fraction,
        )
        return sliding_analysis(series, config, cache)

    jobs = [(sat, coord) for sat in satellites for coord in coordinates]
    events = []
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            for evs in pool.map(lambda sc: job(*sc), jobs):
                events.extend(evs)
    else:
        for sat, coord in jobs:
            events.extend(job(sat, coord))
    events.sort(key=lambda e: (e.epoch, e.satellite, e.coordinate, e.kind))

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if args.format in ("jsonl", "both"):
        outputs.append(str(write_events_jsonl(events, outdir / "events.jsonl")))
    if args.format in ("csv", "both"):
        outputs.append(str(write_events_csv(events, outdir / "events.csv")))
    _write_manifest(
        outdir / "manifest.json",
        _manifest_for(args, started, [str(p) for p in paths], outputs),
    )
    print(f"{len(events)} event(s) written to {outdir}")
    for e in events:
        print(f"  {e.epoch.isoformat()} {e.satellite} {e.coordinate} {e.kind} "
              f"{e.magnitude_km:.6g} km")
    if args.fail_on_severity is not None and any(
        e.magnitude_km >= args.fail_on_severity for e in events
    ):
        return EXIT_SEVERITY
    return EXIT_OK


def _parse_m_range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(text)]


def cmd_decay(args: argparse.Namespace) -> int:
    started = time.time()
    params = HahnParams(N=args.upper, n=args.degree)
    ms = _parse_m_range(args.m_range)
    out = Path(args.out)
    ln10 = math.log(10.0)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "k_peak", "abs_value", "bound"])
        for m in ms:
            profile = summand_profile(args.upper, args.degree, m)
            sign, lq = hahn_value_log(params, float(m))
            absval = 0.0 if sign == 0 else math.exp(lq - 0.5 * log_norm_sq(params))
            bound = repr(decay_bound(args.upper, args.degree, m)) if m >= 1 else ""
            writer.writerow([m, profile.peak_index, repr(absval), bound])
    outputs = [str(out)]
    if args.dump_values is not None:
        dump = Path(args.dump_values)
        x_max = args.x_max if args.x_max is not None else float(args.upper)
        n_steps = int(round(x_max / args.x_step))
        with open(dump, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "log10_abs_value"])
            for i in range(n_steps + 1):
                x = i * args.x_step
                sign, lq = hahn_value_log(params, x)
                l10 = -math.inf if sign == 0 else (lq - 0.5 * log_norm_sq(params)) / ln10
                writer.writerow([repr(x), repr(l10)])
        outputs.append(str(dump))
    if args.profile_out is not None:
        m = args.profile_m if args.profile_m is not None else ms[-1]
        profile = summand_profile(args.upper, args.degree, m)
        with open(args.profile_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "value", "log10_abs_value"])
            for k, (v, lv) in enumerate(zip(profile.values, profile.log_abs_values)):
                writer.writerow([k, repr(float(v)), repr(float(lv / ln10))])
        outputs.append(str(args.profile_out))
    print(f"wrote {', '.join(outputs)}")
    _write_manifest(
        out.parent / (out.name + ".manifest.json"),
        _manifest_for(args, started, [], outputs),
    )
    return EXIT_OK


def _parse_injection(text: str) -> InjectedAnomaly:
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError(f"bad --inject {text!r}; expected kind:coordinate:index:magnitude_km")
    return InjectedAnomaly(
        kind=parts[0], coordinate=parts[1], epoch_index=int(parts[2]),
        magnitude_km=float(parts[3]),
    )


def cmd_synth(args: argparse.Namespace) -> int:
    started = time.time()
    outputs = []
    if args.kind in ("jump", "outlier"):
        maker = jump_series if args.kind == "jump" else outlier_series
        series = maker(args.points, args.at, args.magnitude)
        out = Path(args.out)
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "value"])
            for t, v in zip(series.lattice.points, series.values):
                writer.writerow([repr(float(t)), repr(float(v))])
        outputs.append(str(out))
        manifest_path = out.parent / (out.name + ".manifest.json")
    else:
        anomalies = tuple(_parse_injection(t) for t in args.inject)
        orbit = synth_orbit(
            args.days,
            args.seed,
            amplitude_km=args.amplitude_km,
            round_mm=not args.no_round_mm,
            anomalies=anomalies,
        )
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.format == "sp3":
            outputs.extend(str(p) for p in write_sp3_corpus(orbit, outdir))
        else:
            outputs.append(str(write_orbit_csv(orbit, outdir / "orbit.csv")))
        outputs.append(str(write_ground_truth(orbit, outdir / "ground_truth.json")))
        manifest_path = outdir / "manifest.json"
    print(f"wrote {len(outputs)} file(s)")
    _write_manifest(manifest_path, _manifest_for(args, started, [], outputs))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="hahnfit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hahnfit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("basis", help="build and cache an orthonormal basis")
    p.add_argument("--points", type=int, help="number of equidistant lattice points")
    p.add_argument("--lattice-file", help="text file with one abscissa per line")
    p.add_argument("--degree", type=int, required=True, help="maximal degree")
    p.add_argument("--tol", type=float, default=None, help="orthogonalization tolerance")
    p.add_argument("--out", required=True, help="cache file to write")
    p.add_argument("--show-conditioning", action="store_true",
                   help="print monomial vs orthogonal condition diagnostics")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("fit", help="detrend a series and write fit/residue data")
    p.add_argument("--data", help="CSV with columns t,value")
    p.add_argument("--sp3-dir", help="directory of SP3 files")
    p.add_argument("--pattern", default="*.sp3")
    p.add_argument("--satellite")
    p.add_argument("--coordinate", choices=["X", "Y", "Z"])
    p.add_argument("--start", help="window start epoch, ISO format")
    p.add_argument("--days", type=int)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", help="sliding-window anomaly detection over SP3 files")
    p.add_argument("--sp3-dir", required=True)
    p.add_argument("--pattern", default="*.sp3")
    p.add_argument("--satellite", action="append",
                   help="satellite id filter; repeatable, default all")
    p.add_argument("--coordinate", choices=["X", "Y", "Z", "all"], default="all")
    p.add_argument("--window", type=int, default=384)
    p.add_argument("--degree", type=int, default=200)
    p.add_argument("--step", type=int, default=96)
    p.add_argument("--mask", type=int, default=8)
    p.add_argument("--threshold", type=float, default=6.0)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=["csv", "jsonl", "both"], default="both")
    p.add_argument("--fail-on-severity", type=float, default=None,
                   help="exit 4 if any event magnitude (km) reaches this")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("decay", help="endpoint decay table and value dumps")
    p.add_argument("--upper", type=int, required=True, help="lattice upper index")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--m-range", default="1:10", help="m or lo:hi")
    p.add_argument("--out", required=True, help="table CSV")
    p.add_argument("--dump-values", help="CSV of log10 |value| on a fine x grid")
    p.add_argument("--x-step", type=float, default=0.5)
    p.add_argument("--x-max", type=float, default=None)
    p.add_argument("--profile-m", type=int, default=None)
    p.add_argument("--profile-out", help="CSV of the summand profile for one m")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("synth", help="generate synthetic datasets")
    p.add_argument("--kind", choices=["jump", "outlier", "orbit"], required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--at", type=int, default=40)
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--days", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude-km", type=float, default=2.6e4)
    p.add_argument("--no-round-mm", action="store_true")
    p.add_argument("--inject", action="append", default=[],
                   help="kind:coordinate:index:magnitude_km; repeatable")
    p.add_argument("--format", choices=["csv", "sp3"], default="csv")
    p.add_argument("--out", required=True, help="output file (jump/outlier) or directory (orbit)")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (Sp3Error, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonConvergence, DegenerateLattice, WindowTooNoisy, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
