"""Command-line workflows: generate, fit, eval, plan, simulate, sweep,
calibrate, report.

Every command that writes artifacts drops a run manifest beside them so a
rerun with equal inputs can be verified byte-for-byte (timestamps are
excluded from hashed content).  Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys

from . import __version__
from .berth import build_initial_plan, plan_from_json, plan_to_json, validate_plan
from .ingest import (
    InvalidConfig,
    ais_to_csv,
    generate_traffic,
    parse_kv_config,
    synth_config_from_kv,
)
from .pipeline import (
    arrivals_from_csv,
    arrivals_to_csv,
    build_samples,
    voyages_from_csv,
    voyages_to_csv,
    weather_from_csv,
    weather_to_csv,
)
from .sim import (
    WITH_PREDICTION,
    WITHOUT_PREDICTION,
    calibrate,
    calibration_from_kv,
    calibration_to_kv,
    config_from_calibration,
    initial_plan_for,
    punctuality_stats,
    revenue_analysis,
    run_simulation,
    sweep,
    waiting_time_report,
)

DEFAULT_CALIBRATION_PATH = os.path.join(
    os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
    "configs", "calibrated_sim.kv")


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(out_dir, args, config_paths, seeds, artifacts):
    manifest = {
        "command": " ".join(args),
        "config_hashes": {os.path.basename(p): _sha256(p) for p in config_paths},
        "seeds": list(seeds),
        "artifacts": sorted(os.path.basename(a) for a in artifacts),
        "tool_version": __version__,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _rows_to_csv(rows, header, out=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[h] for h in header])
    text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    return text


def _render(rows, header, fmt):
    if fmt == "json":
        return json.dumps(rows, sort_keys=True, indent=2) + "\n"
    return _rows_to_csv(rows, header)


def _finish_run(out_dir, argv, config_paths, seeds, files):
    """Write named artifacts plus the run manifest, or stream to stdout.

    ``files`` maps artifact filename -> text.  Every output directory gets
    exactly one manifest.json.
    """
    if not out_dir:
        for text in files.values():
            sys.stdout.write(text)
        return
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        paths.append(path)
    write_manifest(out_dir, argv, config_paths, seeds, paths)


def _load_calibration(path):
    if path and os.path.exists(path):
        return calibration_from_kv(parse_kv_config(path))
    return calibration_from_kv({})


def _parse_rates(text):
    # "5..30:5" or comma list of percentages
    if ".." in text:
        span, _, step = text.partition(":")
        lo, _, hi = span.partition("..")
        step = int(step or "5")
        return [r / 100.0 for r in range(int(lo), int(hi) + 1, step)]
    return [float(x) / 100.0 for x in text.split(",")]


# -- subcommand handlers --------------------------------------------------------


def cmd_generate(args, argv):
    if not os.path.exists(args.config):
        print(f"usage error: config file not found: {args.config}", file=sys.stderr)
        return 2
    kv = parse_kv_config(args.config)
    if args.seed is not None:
        kv["seed"] = str(args.seed)
    cfg = synth_config_from_kv(kv)
    voyages, weather, records, arrivals = generate_traffic(cfg)
    os.makedirs(args.out, exist_ok=True)
    artifacts = [
        os.path.join(args.out, "ais.csv"),
        os.path.join(args.out, "voyages.csv"),
        os.path.join(args.out, "weather.csv"),
        os.path.join(args.out, "arrivals.csv"),
    ]
    ais_to_csv(records, artifacts[0])
    voyages_to_csv(voyages, artifacts[1])
    weather_to_csv(weather, artifacts[2])
    arrivals_to_csv(arrivals, artifacts[3])
    artifacts.append(write_manifest(args.out, argv, [args.config],
                                    [cfg.seed], artifacts))
    print(f"wrote {len(artifacts)} files to {args.out}")
    return 0


def _load_dataset(data_dir):
    from .ingest import parse_ais_csv
    voyages = voyages_from_csv(os.path.join(data_dir, "voyages.csv"))
    records = parse_ais_csv(os.path.join(data_dir, "ais.csv"))
    weather = weather_from_csv(os.path.join(data_dir, "weather.csv"))
    arrivals = arrivals_from_csv(os.path.join(data_dir, "arrivals.csv"))
    return voyages, records, weather, arrivals


def cmd_fit(args, argv):
    from .eta import PREDICTORS, RidgeEtaPredictor
    if args.predictor not in PREDICTORS:
        print(f"unknown predictor {args.predictor!r}; available: "
              f"{', '.join(sorted(PREDICTORS))}", file=sys.stderr)
        return 1
    voyages, records, weather, arrivals = _load_dataset(args.data)
    samples = build_samples(voyages, records, weather, arrivals)
    predictor = PREDICTORS[args.predictor]()
    predictor.fit(samples)
    os.makedirs(args.out, exist_ok=True)
    artifacts = []
    if isinstance(predictor, RidgeEtaPredictor):
        blob_path = os.path.join(args.out, f"{args.predictor}.json")
        with open(blob_path, "w") as fh:
            fh.write(predictor.to_json() + "\n")
        artifacts.append(blob_path)
    artifacts.append(write_manifest(args.out, argv, [], [], artifacts))
    print(f"fitted {args.predictor} on {len(samples)} samples")
    return 0


def cmd_eval(args, argv):
    from .eta import PREDICTORS, RidgeEtaPredictor, evaluate
    voyages, records, weather, arrivals = _load_dataset(args.data)
    samples = build_samples(voyages, records, weather, arrivals)
    if not samples:
        print("no evaluation samples in data dir", file=sys.stderr)
        return 1
    names = [args.predictor] if args.predictor else sorted(PREDICTORS)
    reports = []
    for name in names:
        if name not in PREDICTORS:
            print(f"unknown predictor {name!r}; available: "
                  f"{', '.join(sorted(PREDICTORS))}", file=sys.stderr)
            return 1
        predictor = PREDICTORS[name]()
        if isinstance(predictor, RidgeEtaPredictor):
            blob = os.path.join(args.data, f"{name}.json")
            if args.model:
                blob = args.model
                if os.path.isdir(blob):     # a fit run directory
                    blob = os.path.join(blob, f"{name}.json")
            if os.path.exists(blob):
                with open(blob) as fh:
                    predictor = RidgeEtaPredictor.from_json(fh.read())
            else:
                predictor.fit(samples)
        actuals = [label.remaining_minutes for _, label in samples]
        preds = [max(0.0, predictor.predict(x)) for x, _ in samples]
        reports.append(evaluate(preds, actuals, predictor_id=name))
    for r in reports:
        print(r.to_json_row())
    if args.out:
        text = "".join(r.to_json_row() + "\n" for r in reports)
        _finish_run(args.out, argv, [], [], {"metrics.jsonl": text})
    return 0


def cmd_plan(args, argv):
    if args.plan_action == "validate":
        path = args.plan_file
        if os.path.isdir(path):
            path = os.path.join(path, "plan.json")
        with open(path) as fh:
            plan = plan_from_json(fh.read())
        problems = validate_plan(plan)
        if problems:
            for p in problems:
                print(f"INVALID: {p}")
            return 1
        print(f"plan version {plan.plan_version}: "
              f"{len(plan.assignments)} assignments, all invariants hold")
        return 0
    # build
    voyages, _, _, _ = _load_dataset(args.data)
    from .berth import Berth
    berths = tuple(Berth(f"B{k}", 4) for k in range(args.berths))
    plan = build_initial_plan(voyages, berths, args.crane_pool,
                              3600.0 / args.seconds_per_van)
    _finish_run(args.out, argv, [], [], {"plan.json": plan_to_json(plan)})
    return 0


def cmd_simulate(args, argv):
    cal = _load_calibration(args.calibration)
    strategy = WITH_PREDICTION if args.with_prediction else WITHOUT_PREDICTION
    cfg = config_from_calibration(cal, args.seed, args.rate / 100.0, strategy)
    report = run_simulation(cfg, initial_plan_for(cfg))
    configs = [args.calibration] if os.path.exists(args.calibration) else []
    _finish_run(args.out, argv, configs, [args.seed],
                {"report.json": report.to_json() + "\n"})
    return 0


def cmd_sweep(args, argv):
    cal = _load_calibration(args.calibration)
    rates = _parse_rates(args.rates)
    seeds = list(range(args.seeds))
    rows = sweep(rates, seeds,
                 n_vessels=int(cal["n_vessels"]),
                 van_count=int(cal["van_count"]),
                 horizon_hours=cal["horizon_hours"],
                 handling_seconds_per_van=cal["handling_seconds_per_van"])
    header = ["rta_rate", "strategy", "mean_throughput_vans_per_crane_hour",
              "mean_seconds_per_van", "mean_punctuality_minutes",
              "mean_total_waiting_minutes", "n_seeds"]
    configs = [args.calibration] if os.path.exists(args.calibration) else []
    _finish_run(args.out, argv, configs, seeds,
                {f"sweep.{args.format}": _render(rows, header, args.format)})
    return 0


def cmd_calibrate(args, argv):
    result = calibrate(seeds=range(args.seeds))
    _finish_run(args.out, argv, [], list(range(args.seeds)),
                {"calibration.kv": calibration_to_kv(result)})
    return 0 if result["within_tolerance"] else 1


def _waiting_svg(report):
    """Minimal deterministic SVG bar chart of per-vessel waiting times."""
    rows = report["per_vessel"]
    bar_h, gap, left, width = 12, 4, 70, 640
    max_wait = max([max(r["waiting_without"], r["waiting_with"]) for r in rows] + [1.0])
    height = 40 + len(rows) * 2 * (bar_h + gap)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             '<text x="10" y="20" font-size="14">Anchorage waiting minutes: '
             'without (dark) vs with (light) ETA prediction</text>']
    y = 34
    for r in rows:
        for value, color in ((r["waiting_without"], "#444466"),
                             (r["waiting_with"], "#88aadd")):
            w = (width - left - 10) * value / max_wait
            parts.append(f'<text x="4" y="{y + bar_h - 2}" font-size="9">'
                         f'{r["vessel_id"]}</text>')
            parts.append(f'<rect x="{left}" y="{y}" width="{w:.2f}" '
                         f'height="{bar_h}" fill="{color}"/>')
            y += bar_h + gap
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_report(args, argv):
    if args.report_kind == "revenue":
        rows = revenue_analysis(args.without_thr, args.with_thr,
                                range(1, args.cranes + 1),
                                value_per_van=args.value_per_van)
        header = ["cranes", "daily_vans_without", "daily_vans_with",
                  "day_difference", "year_difference", "additional_revenue"]
        _finish_run(args.out, argv, [], [],
                    {f"revenue.{args.format}": _render(rows, header,
                                                       args.format)})
        return 0

    cal = _load_calibration(args.calibration)
    rate = args.rate / 100.0
    reports = {}
    for strategy in (WITHOUT_PREDICTION, WITH_PREDICTION):
        reports[strategy] = []
        for seed in range(args.seeds):
            cfg = config_from_calibration(cal, seed, rate, strategy)
            reports[strategy].append(run_simulation(cfg, initial_plan_for(cfg)))

    if args.report_kind == "punctuality":
        rows = []
        for strategy, reps in reports.items():
            devs = [r.punctuality_mean for r in reps]
            stats = punctuality_stats(devs)
            rows.append({"strategy": strategy, "mean": stats["mean"],
                         "median": stats["median"], "std": stats["std"],
                         "n_seeds": len(reps)})
        base = rows[0]["mean"]
        reduction = 0.0 if base == 0 else 100.0 * (base - rows[1]["mean"]) / base
        rows.append({"strategy": "mean-reduction-percent", "mean": reduction,
                     "median": "", "std": "", "n_seeds": args.seeds})
        header = ["strategy", "mean", "median", "std", "n_seeds"]
        configs = [args.calibration] if os.path.exists(args.calibration) else []
        _finish_run(args.out, argv, configs, list(range(args.seeds)),
                    {f"punctuality.{args.format}": _render(rows, header,
                                                           args.format)})
        print(f"mean punctuality deviation reduction: {reduction:.1f}%")
        return 0

    if args.report_kind == "waiting":
        # aggregate per vessel over seeds, then compare strategies
        agg = {}
        for strategy, reps in reports.items():
            waits = {}
            for r in reps:
                for vid, minutes in r.anchorage_waiting_minutes.items():
                    waits[vid] = waits.get(vid, 0.0) + minutes
            agg[strategy] = waits
        comparison = waiting_time_report(agg[WITHOUT_PREDICTION],
                                         agg[WITH_PREDICTION])
        header = ["vessel_id", "waiting_without", "waiting_with",
                  "reduction_minutes"]
        configs = [args.calibration] if os.path.exists(args.calibration) else []
        _finish_run(args.out, argv, configs, list(range(args.seeds)),
                    {f"waiting.{args.format}": _render(comparison["per_vessel"],
                                                       header, args.format),
                     "waiting.svg": _waiting_svg(comparison)})
        print(f"total waiting: without={comparison['total_without']:.1f} min, "
              f"with={comparison['total_with']:.1f} min "
              f"({comparison['reduction_percent']:.1f}% reduction)")
        return 0
    return 2


# -- parser ---------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="portsim",
                                description="Port logistics simulation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=None):
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    g = sub.add_parser("generate", help="synthesize traffic/weather data files")
    g.add_argument("--config", required=True)
    common(g)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit an ETA predictor on generated data")
    f.add_argument("--data", required=True)
    f.add_argument("--predictor", default="ridge-tensor")
    common(f)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="evaluate predictors, print metric rows")
    e.add_argument("--data", required=True)
    e.add_argument("--predictor", default=None)
    e.add_argument("--model", default=None, help="fitted predictor blob")
    common(e)
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plan", help="build or validate berth plans")
    plsub = pl.add_subparsers(dest="plan_action", required=True)
    plb = plsub.add_parser("build")
    plb.add_argument("--data", required=True)
    plb.add_argument("--berths", type=int, default=2)
    plb.add_argument("--crane-pool", type=int, default=15)
    plb.add_argument("--seconds-per-van", type=float, default=129.0)
    common(plb)
    plb.set_defaults(func=cmd_plan)
    plv = plsub.add_parser("validate")
    plv.add_argument("plan_file")
    common(plv)
    plv.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", help="run one seeded simulation")
    s.add_argument("--rate", type=float, default=30.0, help="RTA rate percent")
    s.add_argument("--with-prediction", action="store_true")
    s.add_argument("--calibration", default=DEFAULT_CALIBRATION_PATH)
    common(s, seed_default=0)
    s.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="rate sweep over seeds, both strategies")
    sw.add_argument("--rates", default="5..30:5")
    sw.add_argument("--seeds", type=int, default=30)
    sw.add_argument("--calibration", default=DEFAULT_CALIBRATION_PATH)
    common(sw)
    sw.set_defaults(func=cmd_sweep)

    c = sub.add_parser("calibrate", help="grid-search simulation calibration")
    c.add_argument("--seeds", type=int, default=8)
    common(c)
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("report", help="revenue / punctuality / waiting tables")
    rsub = r.add_subparsers(dest="report_kind", required=True)
    rr = rsub.add_parser("revenue")
    rr.add_argument("--without", dest="without_thr", type=float, required=True)
    rr.add_argument("--with", dest="with_thr", type=float, required=True)
    rr.add_argument("--cranes", type=int, default=15)
    rr.add_argument("--value-per-van", type=float, default=70.0)
    common(rr)
    rr.set_defaults(func=cmd_report)
    for kind in ("punctuality", "waiting"):
        rk = rsub.add_parser(kind)
        rk.add_argument("--seeds", type=int, default=30)
        rk.add_argument("--rate", type=float, default=30.0)
        rk.add_argument("--calibration", default=DEFAULT_CALIBRATION_PATH)
        common(rk)
        rk.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, ["portsim", *argv])
    except InvalidConfig as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:                      # runtime failure contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
