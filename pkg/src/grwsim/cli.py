"""Command-line front end: experiments, state analysis, sweeps, plots.

Exit status: 0 when every check passed, 1 when checks failed, 2 for usage or
configuration errors.  Every emitted file embeds the effective configuration
(threshold, rate amplification, seed), so no unreproducible artifact leaves
the tool.  An optional JSON config file mirrors the flags; explicit flags
win.  GRWSIM_OUTPUT_DIR sets the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from . import experiments as xp
from . import svgplot
from .errors import GrwSimError
from .massdensity import analyze_state, degree_of, indeterminacy_report
from .states import MassObservablePartition, WaveFunction, state_from_json


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grwsim",
        description="Spontaneous-collapse mass-density simulator",
    )
    parser.add_argument("--version", action="version", version=f"grwsim {__version__}")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file of default option values (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--output-dir", type=Path,
                       default=os.environ.get("GRWSIM_OUTPUT_DIR", "."))
        p.add_argument("--formats", default="json",
                       help="comma-separated subset of json,csv,svg,txt")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--eta", type=float, default=None,
                       help="accessibility threshold override")
        p.add_argument("--lambda-amplification", type=float, default=None,
                       help="collapse-rate amplification factor")

    p_exp = sub.add_parser("experiment", help="run a named scenario")
    p_exp.add_argument("name", choices=sorted(xp.EXPERIMENTS))
    add_common(p_exp)
    p_exp.add_argument("--n", type=int, default=None,
                       help="primary count of the scenario (particles, marbles, seeds...)")
    p_exp.add_argument("--in-weight", type=float, default=0.99)
    p_exp.add_argument("--separation", type=float, default=None)
    p_exp.add_argument("--alpha-length", type=float, default=1.0)
    p_exp.add_argument("--etas", default="0.05,0.1,0.3,0.5",
                       help="threshold grid for the sweep scenario")
    p_exp.add_argument("--state-kind", choices=["superposition", "product"],
                       default="superposition")
    p_exp.add_argument("--sourcing", choices=["mean-field", "post-collapse"],
                       default="mean-field")
    p_exp.add_argument("--mode", choices=["jumps", "csl"], default="jumps")
    p_exp.add_argument("--p", type=float, default=0.5, dest="p_left")
    p_exp.add_argument("--n-list", default="1,10,100")
    p_exp.add_argument("--parallelism", type=int, default=1)

    p_an = sub.add_parser("analyze", help="mass-density analysis of a state JSON file")
    p_an.add_argument("state", type=Path)
    add_common(p_an)

    p_sw = sub.add_parser("sweep-threshold", help="classify the suite over a threshold grid")
    add_common(p_sw)
    p_sw.add_argument("--etas", default="0.05,0.1,0.3,0.5")
    p_sw.add_argument("--n", type=int, default=1000)

    p_en = sub.add_parser("ensemble", help="branch-selection ensemble (Born statistics)")
    add_common(p_en)
    p_en.add_argument("--p", type=float, default=0.5, dest="p_left")
    p_en.add_argument("--n", type=int, default=10000)
    p_en.add_argument("--mode", choices=["jumps", "csl"], default="jumps")
    p_en.add_argument("--parallelism", type=int, default=1)

    p_pl = sub.add_parser("plot", help="emit SVG plots from a report JSON (pure post-processing)")
    p_pl.add_argument("report", type=Path)
    p_pl.add_argument("--output-dir", type=Path,
                      default=os.environ.get("GRWSIM_OUTPUT_DIR", "."))
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    probe, _ = parser.parse_known_args(argv)
    config = getattr(probe, "config", None)
    if config is not None:
        doc = json.loads(Path(config).read_text())
        if not isinstance(doc, dict):
            raise GrwSimError("config file must hold a JSON object")
        parser.set_defaults(**{k.replace("-", "_"): v for k, v in doc.items()})
    return parser.parse_args(argv)


def _run_experiment(args) -> xp.ExperimentReport:
    name = args.name
    eta = args.eta
    if name == "superposition-vs-product":
        kwargs = {"n_particles": args.n or 1000, "seed": args.seed}
        if eta is not None:
            kwargs["eta"] = eta
        return xp.run_superposition_vs_product(**kwargs)
    if name == "tails-demo":
        kwargs = {"separation": args.separation, "alpha_length": args.alpha_length,
                  "seed": args.seed}
        if eta is not None:
            kwargs["eta"] = eta
        return xp.run_tails_demo(**kwargs)
    if name == "counting-anomaly":
        kwargs = {"n_marbles": args.n or 100, "in_weight": args.in_weight,
                  "seed": args.seed}
        if eta is not None:
            kwargs["eta"] = eta
        return xp.run_counting_anomaly(**kwargs)
    if name == "threshold-sweep":
        grid = [float(e) for e in args.etas.split(",") if e]
        return xp.run_threshold_sweep(grid, n_particles=args.n or 1000, seed=args.seed)
    if name == "deflection":
        return xp.run_test_particle_deflection(
            state_kind=args.state_kind, sourcing=args.sourcing,
            n_seeds=args.n or 10000, seed=args.seed)
    if name == "rate-scaling":
        n_list = [int(n) for n in args.n_list.split(",") if n]
        params = xp.desk_parameters(
            lambda_amplification=args.lambda_amplification or 1e16)
        return xp.run_collapse_rate_scaling(
            n_list=n_list, ensemble_size=args.n or 10000, params=params,
            master_seed=args.seed, parallelism_hint=args.parallelism)
    if name == "born-statistics":
        return xp.run_born_statistics(
            p_left=args.p_left, n_trajectories=args.n or 10000, mode=args.mode,
            master_seed=args.seed, parallelism_hint=args.parallelism)
    raise GrwSimError(f"unknown experiment {name!r}")


def _emit_report(report: xp.ExperimentReport, outdir: Path, formats: set[str]) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.spec.name}-{report.spec.seed}"
    if "json" in formats:
        report.write_json(outdir / f"{stem}.json")
    if "txt" in formats:
        report.write_text(outdir / f"{stem}.txt")
    if "csv" in formats:
        with open(outdir / f"{stem}-checks.csv", "w") as fh:
            fh.write(f"# config {json.dumps(report.spec.parameters, sort_keys=True)}\n")
            fh.write(f"# seed {report.spec.seed}\n")
            fh.write("quantity,comparator,target,tolerance,measured,passed\n")
            for c in report.checks:
                fh.write(f"{c.quantity},{c.comparator},{c.target!r},"
                         f"{c.tolerance!r},{c.measured!r},{int(c.passed)}\n")
    if "svg" in formats:
        _plot_report(report.to_json(), outdir)
    print(report.to_text())


def _plot_report(doc: dict, outdir: Path) -> list[Path]:
    """Emit whatever plots the report's measured keys support."""
    outdir.mkdir(parents=True, exist_ok=True)
    name = doc["spec"]["name"]
    seed = doc["spec"]["seed"]
    measured = doc["measured"]
    written = []

    def out(suffix):
        p = outdir / f"{name}-{seed}-{suffix}.svg"
        written.append(p)
        return p

    if "density_profile" in measured:
        xs = measured["density_profile"]["positions"]
        ys = measured["density_profile"]["density"]
        svgplot.line_chart(out("density"), {"mass density": (xs, ys)},
                           title=f"{name}: post-jump mass density",
                           x_label="position", y_label="density")
    if "ratio_superposition" in measured:
        labels = ["A (superposed)", "B (superposed)", "A (split)", "B (split)"]
        values = measured["ratio_superposition"] + measured["ratio_product"]
        svgplot.bar_chart(out("ratios"), labels, values,
                          title=f"{name}: accessibility ratio per region",
                          y_label="ratio")
    if "suite_ratios" in measured:
        labels, values = [], []
        for state, ratios in measured["suite_ratios"].items():
            for region, r in ratios.items():
                labels.append(f"{state}:{region}")
                values.append(min(r, 15.0))
        svgplot.bar_chart(out("suite"), labels, values,
                          title=f"{name}: suite ratios (clipped at 15)",
                          y_label="ratio")
    if "joint_ladder" in measured:
        items = sorted(measured["joint_ladder"].items(), key=lambda kv: int(kv[0]))
        svgplot.line_chart(out("joint"),
                           {"all-in probability": ([int(k) for k, _ in items],
                                                   [v for _, v in items])},
                           title=f"{name}: joint all-in probability vs count",
                           x_label="number of objects", y_label="probability")
    if "per_n" in measured:
        ns, means, expected = [], [], []
        for k, entry in sorted(measured["per_n"].items(), key=lambda kv: int(kv[0])):
            if entry.get("expected_mean") is not None:
                ns.append(int(k))
                means.append(entry["mean_first_jump"])
                expected.append(entry["expected_mean"])
        if ns:
            svgplot.line_chart(out("scaling"),
                               {"measured": (ns, means), "1/(N rate)": (ns, expected)},
                               title=f"{name}: first-jump time vs particle number",
                               x_label="N", y_label="mean first-jump time")
    if "selected_left_frequency" in measured:
        svgplot.bar_chart(out("frequency"),
                          ["selected left", "target"],
                          [measured["selected_left_frequency"],
                           doc["spec"]["parameters"].get("p_left", 0.5)],
                          title=f"{name}: branch-selection frequency",
                          y_label="frequency")
    if "toward_A_frequency" in measured:
        svgplot.bar_chart(out("deflection"),
                          ["toward A", "target"],
                          [measured["toward_A_frequency"], 0.5],
                          title=f"{name}: deflection direction frequency",
                          y_label="frequency")
    return written


def _cmd_analyze(args) -> int:
    doc = json.loads(Path(args.state).read_text())
    state = state_from_json(doc)
    eta = args.eta if args.eta is not None else 0.1
    field = analyze_state(state, eta)
    if isinstance(state, WaveFunction):
        partition = MassObservablePartition.per_cell(state.grid)
    else:
        partition = MassObservablePartition.per_region(state)
    profile = degree_of(state, partition)
    verdict = indeterminacy_report(profile, eta)

    print(f"state: {doc.get('kind')}   eta: {eta}   total mass: {field.total_mass!r}")
    print(f"{'label':>10} {'center':>12} {'mean':>14} {'variance':>14} "
          f"{'ratio':>12} {'accessible':>10}")
    for i, label in enumerate(field.labels):
        r = field.ratio[i]
        ratio_s = "undefined" if not np.isfinite(r) else f"{r:.6g}"
        print(f"{label:>10} {field.positions[i]:>12.6g} {field.mean_density[i]:>14.6g} "
              f"{field.variance[i]:>14.6g} {ratio_s:>12} {str(bool(field.accessible[i])):>10}")
    print("degree profile:")
    for label, d in profile.entries:
        if d > 0 or len(profile.entries) <= 8:
            print(f"  {label}: {d:.6g}")
    print(f"classification: {verdict.classification} "
          f"(margin {verdict.degree_margin})")

    outdir = Path(args.output_dir)
    formats = {f.strip() for f in args.formats.split(",") if f.strip()}
    if formats - {"json"} or "json" in formats:
        outdir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.state).stem
        if "json" in formats:
            payload = field.to_json()
            payload["config"] = {"eta": eta, "seed": args.seed, "source": str(args.state)}
            (outdir / f"{stem}-field.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True))
        if "csv" in formats:
            csv_path = outdir / f"{stem}-field.csv"
            field.write_csv(csv_path)
            body = csv_path.read_text()
            csv_path.write_text(f"# eta={eta} seed={args.seed} source={args.state}\n" + body)
    return 0


def _cmd_ensemble(args) -> int:
    report = xp.run_born_statistics(
        p_left=args.p_left, n_trajectories=args.n, mode=args.mode,
        master_seed=args.seed, parallelism_hint=args.parallelism)
    formats = {f.strip() for f in args.formats.split(",") if f.strip()}
    _emit_report(report, Path(args.output_dir), formats)
    return 0 if report.all_passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    except (GrwSimError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2

    try:
        if args.command == "experiment":
            report = _run_experiment(args)
            formats = {f.strip() for f in args.formats.split(",") if f.strip()}
            _emit_report(report, Path(args.output_dir), formats)
            return 0 if report.all_passed else 1
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "sweep-threshold":
            grid = [float(e) for e in args.etas.split(",") if e]
            report = xp.run_threshold_sweep(grid, n_particles=args.n, seed=args.seed)
            formats = {f.strip() for f in args.formats.split(",") if f.strip()}
            _emit_report(report, Path(args.output_dir), formats)
            return 0 if report.all_passed else 1
        if args.command == "ensemble":
            return _cmd_ensemble(args)
        if args.command == "plot":
            doc = json.loads(Path(args.report).read_text())
            written = _plot_report(doc, Path(args.output_dir))
            for p in written:
                print(f"wrote {p}")
            return 0
    except GrwSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
