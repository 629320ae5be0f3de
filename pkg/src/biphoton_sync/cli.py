"""Command-line front end.

Subcommands: simulate a scenario into record files, correlate two record
files into a histogram and peak report, solve the synchronization protocol
from swap-state measurements, track the offset over time, and sweep one
config key across values.

Exit codes: 0 ok, 2 usage, 3 validation, 4 decode, 5 no peak, 6 fit failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .channel import SwapState, propagation_delay, route
from .config import config_digest, load_config, override_key, scenario_from_dict
from .correlate import cross_correlate, find_peaks, peak_center, track_offset
from .errors import (
    BiphotonSyncError,
    DecodeError,
    FitError,
    NoPeakError,
    UsageError,
    ValidationError,
)
from .protocol import (
    Estimate,
    MeasurementResult,
    SyncSolution,
    delta_minus,
    solution_csv,
    solution_report,
    solve_dispersion,
    solve_multi_r2,
    solve_r1,
    solve_t0,
    solve_t0_symmetric,
)
from .simulate import simulate_run
from .timetags import encode_stream, read_stream

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_DECODE = 4
EXIT_NO_PEAK = 5
EXIT_FIT = 6


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biphoton-sync",
        description="Simulate and analyze photon-pair clock synchronization runs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate record files from a scenario config")
    p_sim.add_argument("config", help="TOML scenario file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--slabs", type=int, default=1, help="parallel generation slabs")

    p_corr = sub.add_parser("correlate", help="histogram t1-t2 for two record files")
    p_corr.add_argument("file1")
    p_corr.add_argument("file2")
    p_corr.add_argument("--bin-ps", type=float, default=3.0)
    p_corr.add_argument("--window-ns", type=float, default=50.0, help="half window, ns")
    p_corr.add_argument("--center-ps", type=float, default=0.0, help="window center, ps")
    p_corr.add_argument("--csv", help="write histogram CSV here")
    p_corr.add_argument("--min-prominence", type=float, default=0.05)

    p_solve = sub.add_parser("solve", help="solve dispersion / path length / clock offset")
    p_solve.add_argument("--m0", nargs=2, metavar=("D1", "D2"), help="plate-0 record files")
    p_solve.add_argument("--m45", nargs=2, metavar=("D1", "D2"), help="plate-45 record files")
    p_solve.add_argument("--r2-km", type=float, help="known laboratory path length")
    p_solve.add_argument("--r1-km", type=float, help="known remote path length")
    p_solve.add_argument("--d-ps-per-km", type=float, help="known fiber dispersion")
    p_solve.add_argument("--inv-u-s", type=float, help="signal inverse group velocity, ps/km")
    p_solve.add_argument("--inv-u-i", type=float, help="idler inverse group velocity, ps/km")
    p_solve.add_argument("--bin-ps", type=float, default=3.0)
    p_solve.add_argument("--window-ns", type=float, default=50.0)
    p_solve.add_argument("--center-ps", type=float, default=0.0)
    p_solve.add_argument("--csv", help="write the solution as a CSV row here")
    p_solve.add_argument(
        "--multi",
        help="CSV of (r2_km, delta_t_minus_ps, sigma_ps) points for the joint solve",
    )

    p_track = sub.add_parser("track", help="peak-center time series over sliding windows")
    p_track.add_argument("file1")
    p_track.add_argument("file2")
    p_track.add_argument("--window-s", type=float, required=True)
    p_track.add_argument("--stride-s", type=float, required=True)
    p_track.add_argument("--bin-ps", type=float, default=3.0)
    p_track.add_argument("--window-ns", type=float, default=50.0)
    p_track.add_argument("--center-ps", type=float, default=0.0)
    p_track.add_argument("--csv", help="write the series here instead of stdout")

    p_sweep = sub.add_parser("sweep", help="vary one config key and aggregate measurements")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--key", required=True, help="dotted config key, e.g. fiber2.length_km")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", required=True, help="output CSV path")
    p_sweep.add_argument("--bin-ps", type=float, default=3.0)
    p_sweep.add_argument("--window-ns", type=float, default=1000.0)
    p_sweep.add_argument("--slabs", type=int, default=1)
    return parser


def _window(center_ps: float, half_ns: float) -> tuple[float, float]:
    half_ps = half_ns * 1000.0
    return (center_ps - half_ps, center_ps + half_ps)


def cmd_simulate(args) -> int:
    text = Path(args.config).read_text()
    scenario = scenario_from_dict(load_config(args.config))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    s1, s2 = simulate_run(scenario, slabs=args.slabs)
    swap = "plate0" if scenario.swap_state is SwapState.PLATE0 else "plate45"
    f1 = out / f"d1_{swap}.bptt"
    f2 = out / f"d2_{swap}.bptt"
    f1.write_bytes(encode_stream(s1))
    f2.write_bytes(encode_stream(s2))
    manifest = {
        "config_sha256": config_digest(text),
        "scenario_digest": scenario.digest(),
        "rng_seed": scenario.rng_seed,
        "swap_state": swap,
        "files": [f1.name, f2.name],
        "tags_d1": len(s1),
        "tags_d2": len(s2),
    }
    (out / f"manifest_{swap}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {f1} ({len(s1)} tags), {f2} ({len(s2)} tags)")
    return EXIT_OK


def cmd_correlate(args) -> int:
    s1 = read_stream(args.file1)
    s2 = read_stream(args.file2)
    hist = cross_correlate(
        s1, s2, bin_width_ps=args.bin_ps, window_ps=_window(args.center_ps, args.window_ns)
    )
    if args.csv:
        _write_histogram_csv(hist, args.csv)
    peaks = find_peaks(hist, min_prominence=args.min_prominence)
    print(f"coincidences: {hist.coincidences}")
    print(f"peaks: {len(peaks)}")
    for i, peak in enumerate(peaks, 1):
        est = peak_center(hist, peak)
        print(
            f"peak {i}: center {est.center_ps:.3f} ps  sigma {est.sigma_ps:.3f} ps  "
            f"height {peak.height:.1f}  fwhm {peak.fwhm_ps:.3f} ps  "
            f"area_fraction {peak.area_fraction:.4f}"
        )
    return EXIT_OK


def _write_histogram_csv(hist, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_center_ps", "counts"])
        for center, count in zip(hist.bin_centers_ps(), hist.counts):
            writer.writerow([f"{center:.6f}", int(count)])


def _measurement(file1, file2, expected: SwapState, r2_km, args) -> MeasurementResult:
    s1 = read_stream(file1)
    s2 = read_stream(file2)
    if s1.swap_state is not expected or s2.swap_state is not expected:
        raise UsageError(
            f"files {file1}, {file2} are not {expected.name} recordings"
        )
    return MeasurementResult.from_streams(
        s1,
        s2,
        r2_km,
        bin_width_ps=args.bin_ps,
        window_ps=_window(args.center_ps, args.window_ns),
    )


def cmd_solve(args) -> int:
    if args.multi:
        points = _read_multi_points(args.multi)
        joint = solve_multi_r2(points)
        solution = SyncSolution(dispersion_ps_per_km=joint.dispersion_ps_per_km, r1_km=joint.r1_km)
        print(solution_report(solution))
        if args.csv:
            Path(args.csv).write_text(solution_csv(solution))
        return EXIT_OK

    if not args.m0 or not args.m45:
        raise UsageError("solve needs --m0 and --m45 record files (or --multi)")
    if args.r2_km is None:
        raise UsageError("solve needs --r2-km")
    if (args.r1_km is None) == (args.d_ps_per_km is None):
        raise UsageError("give exactly one of --r1-km or --d-ps-per-km")

    m0 = _measurement(args.m0[0], args.m0[1], SwapState.PLATE0, args.r2_km, args)
    m45 = _measurement(args.m45[0], args.m45[1], SwapState.PLATE45, args.r2_km, args)
    delta = delta_minus(m0, m45)

    r1_unphysical = False
    if args.r1_km is not None:
        dispersion = solve_dispersion(delta, args.r1_km, args.r2_km)
        r1 = Estimate(args.r1_km, 0.0)
    else:
        dispersion = Estimate(args.d_ps_per_km, 0.0)
        solved = solve_r1(delta, dispersion, args.r2_km)
        r1 = Estimate(solved.value_km, solved.sigma_km)
        r1_unphysical = solved.unphysical

    t0 = None
    if args.inv_u_s is not None and args.inv_u_i is not None:
        t0 = solve_t0(m0, args.inv_u_s, args.inv_u_i, r1.value, args.r2_km)
    t0_symmetric = None
    if abs(r1.value - args.r2_km) <= 1e-9 * max(1.0, abs(args.r2_km)):
        t0_symmetric = solve_t0_symmetric(m0, m45, r1_km=r1.value, r2_km=args.r2_km)

    print(f"swap0_delta_t_ps: {m0.delta_t_ps:.3f}")
    print(f"swap0_sigma_ps: {m0.sigma_ps:.3f}")
    print(f"swap45_delta_t_ps: {m45.delta_t_ps:.3f}")
    print(f"swap45_sigma_ps: {m45.sigma_ps:.3f}")
    print(f"delta_t_minus_ps: {delta.value:.3f}")
    print(f"delta_t_minus_sigma_ps: {delta.sigma:.3f}")
    solution = SyncSolution(
        dispersion_ps_per_km=dispersion,
        r1_km=r1,
        r1_unphysical=r1_unphysical,
        t0_ps=t0,
        t0_symmetric_ps=t0_symmetric,
    )
    print(solution_report(solution))
    if args.csv:
        Path(args.csv).write_text(solution_csv(solution))
    return EXIT_OK


def _read_multi_points(path) -> list[tuple[float, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"r2_km", "delta_t_minus_ps", "sigma_ps"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(
                f"{path} must have columns r2_km, delta_t_minus_ps, sigma_ps"
            )
        points = []
        for row in reader:
            points.append(
                (float(row["r2_km"]), float(row["delta_t_minus_ps"]), float(row["sigma_ps"]))
            )
    return points


def cmd_track(args) -> int:
    s1 = read_stream(args.file1)
    s2 = read_stream(args.file2)
    series = track_offset(
        s1,
        s2,
        window_length_s=args.window_s,
        stride_s=args.stride_s,
        bin_width_ps=args.bin_ps,
        corr_window_ps=_window(args.center_ps, args.window_ns),
    )
    rows = [
        (f"{point.window_start_s:.6f}", "" if point.center_ps is None else f"{point.center_ps:.3f}")
        for point in series
    ]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window_start_s", "peak_center_ps"])
            writer.writerows(rows)
        gaps = sum(1 for _, c in rows if not c)
        print(f"wrote {len(rows)} windows ({gaps} gaps) to {args.csv}")
    else:
        print("window_start_s,peak_center_ps")
        for start, center in rows:
            print(f"{start},{center}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = load_config(args.config)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise UsageError("--values must list at least one value")
    out_rows = []
    for raw in values:
        try:
            value = float(raw)
        except ValueError:
            value = raw
        base_doc = override_key(doc, args.key, value)
        per_swap = {}
        for swap_name in ("plate0", "plate45"):
            scenario = scenario_from_dict(override_key(base_doc, "swap_state", swap_name))
            s1, s2 = simulate_run(scenario, slabs=args.slabs)
            routing = route(scenario.swap_state)
            expected = propagation_delay(scenario.fiber1, routing.d1) - propagation_delay(
                scenario.fiber2, routing.d2
            )
            m = MeasurementResult.from_streams(
                s1,
                s2,
                scenario.fiber2.length_km,
                bin_width_ps=args.bin_ps,
                window_ps=_window(expected, args.window_ns),
            )
            per_swap[swap_name] = m
        delta = delta_minus(per_swap["plate0"], per_swap["plate45"])
        out_rows.append(
            {
                "key": args.key,
                "value": raw,
                "r2_km": per_swap["plate0"].r2_km,
                "delta_t_plate0_ps": per_swap["plate0"].delta_t_ps,
                "sigma_plate0_ps": per_swap["plate0"].sigma_ps,
                "delta_t_plate45_ps": per_swap["plate45"].delta_t_ps,
                "sigma_plate45_ps": per_swap["plate45"].sigma_ps,
                "delta_t_minus_ps": delta.value,
                "sigma_ps": delta.sigma,
            }
        )
        print(f"{args.key}={raw}: delta_t_minus = {delta.value:.3f} +/- {delta.sigma:.3f} ps")
    fieldnames = list(out_rows[0].keys())
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in out_rows:
            writer.writerow(row)
    print(f"wrote {len(out_rows)} rows to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "correlate": cmd_correlate,
    "solve": cmd_solve,
    "track": cmd_track,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DecodeError as exc:
        print(f"decode error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except NoPeakError as exc:
        print(f"no peak: {exc}", file=sys.stderr)
        return EXIT_NO_PEAK
    except FitError as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (ValidationError, BiphotonSyncError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
