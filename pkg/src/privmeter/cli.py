"""Command-line front end.

Subcommands walk the pipeline in order: generate a synthetic world,
run a measurement campaign against it, re-derive or extend the
network-wide inferences, score coverage, and render tables and plots
from a report.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

from privmeter.events import generate_ground_truth
from privmeter.harness import (
    DeploymentConfig, RunReport, ScheduleError, load_schedule, run_campaign,
    sample_deployment, sample_schedule, save_schedule,
)
from privmeter.inference import (
    Estimate, PowerLawModel, extrapolate_by_fraction, fit_guard_model,
    mc_unique_extrapolate,
)

EXIT_OK = 0
EXIT_SCHEDULE = 2
EXIT_COVERAGE = 3


def _load_config(path: str) -> DeploymentConfig:
    with open(path, encoding="utf-8") as f:
        return DeploymentConfig.from_json(f.read())


def _load_report(path: str) -> RunReport:
    with open(path, encoding="utf-8") as f:
        return RunReport.from_json(f.read())


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
        if not text.endswith("\n"):
            f.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    if args.write_default_config:
        os.makedirs(args.write_default_config, exist_ok=True)
        cfg_path = os.path.join(args.write_default_config, "deployment.json")
        sched_path = os.path.join(args.write_default_config, "schedule.json")
        _write(cfg_path, sample_deployment().to_json())
        save_schedule(sample_schedule(), sched_path)
        print(f"wrote {cfg_path} and {sched_path}")
        return EXIT_OK
    if not (args.config and args.out):
        print("generate needs --config and --out (or --write-default-config)",
              file=sys.stderr)
        return 1
    config = _load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(
            config, seed=args.seed,
            truth_config=dataclasses.replace(config.truth_config,
                                             rng_seed=args.seed))
    os.makedirs(args.out, exist_ok=True)
    trace, truth = generate_ground_truth(config.truth_config)
    trace_path = os.path.join(args.out, "trace.jsonl")
    truth_path = os.path.join(args.out, "truth.json")
    trace.write_jsonl(trace_path)
    _write(truth_path, truth.to_json())
    counts = trace.counts_by_kind()
    total = sum(counts.values())
    print(f"wrote {trace_path} ({total} events) and {truth_path}")
    for kind in sorted(counts):
        print(f"  {kind}: {counts[kind]}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load_config(args.config)
    rounds = load_schedule(args.schedule)
    try:
        report = run_campaign(config, rounds)
    except ScheduleError as err:
        print("schedule rejected:", file=sys.stderr)
        for v in err.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_SCHEDULE
    _write(args.out, report.to_json())
    cov = report.coverage
    frac = "n/a" if cov["fraction"] is None else f"{cov['fraction']:.3f}"
    print(f"wrote {args.out}: {len(report.rounds)} rounds, coverage "
          f"{cov['covered']}/{cov['scored']} ({frac})")
    return EXIT_OK


def _recheck_network(report: RunReport) -> list:
    """Re-derive fraction-scaled network estimates from published locals."""
    rows = []
    for rr in report.rounds:
        for e in rr.entries:
            if e.local is None or e.network is None or e.fraction in (None, 0):
                continue
            if e.network.method != "extrapolate_by_fraction":
                continue
            redo = extrapolate_by_fraction(e.local, e.fraction)
            rows.append({
                "round_id": rr.round_id, "statistic": e.statistic,
                "sub": e.sub, "point": redo.point, "ci95": list(redo.ci95),
                "matches_report": bool(
                    abs(redo.point - e.network.point) <= 1e-9 * max(1.0, abs(redo.point))
                    and abs(redo.lo - e.network.lo) <= 1e-6
                    and abs(redo.hi - e.network.hi) <= 1e-6)})
    return rows


def _parse_float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_infer(args) -> int:
    report = _load_report(args.report)
    out = {"network_check": _recheck_network(report)}

    if args.guard_measurements:
        with open(args.guard_measurements, encoding="utf-8") as f:
            spec = json.load(f)
        fits = fit_guard_model(
            [(float(v), float(w)) for v, w in spec["measurements"]],
            g_candidates=tuple(spec.get("g_candidates", (3, 4, 5))),
            p_range=tuple(spec.get("p_range", (0, 50_000))),
            b=spec.get("b"),
            n_noise_total=int(spec.get("n_noise_total", 0)),
            extra_sd=spec.get("extra_sd", 0.0),
            network_cap=spec.get("network_cap"),
            p_points=int(spec.get("p_points", 200)))
        out["guard_fit"] = {
            str(g): ({"feasible": False} if not fit.feasible else
                     {"feasible": True, "p_range": list(fit.p_range),
                      "n_range": list(fit.n_range)})
            for g, fit in fits.items()}

    if args.mc_local is not None:
        if not (args.mc_alphas and args.mc_populations and args.mc_fraction):
            print("mc inference needs --mc-alphas, --mc-populations and "
                  "--mc-fraction", file=sys.stderr)
            return 1
        lo, hi, step = (int(x) for x in args.mc_populations.split(":"))
        models = [PowerLawModel(alpha=a, population=n, universe=args.mc_universe)
                  for a in _parse_float_list(args.mc_alphas)
                  for n in range(lo, hi + 1, step)]
        local = Estimate(point=args.mc_local,
                         ci95=(args.mc_local, args.mc_local), scope="local",
                         method="observed")
        est = mc_unique_extrapolate(local, args.mc_fraction, models,
                                    seed=args.seed)
        out["mc_unique"] = {"point": est.point, "ci95": list(est.ci95),
                            "method": est.method, "note": est.note}

    text = json.dumps(out, sort_keys=True, indent=2)
    if args.out:
        _write(args.out, text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_score(args) -> int:
    report = _load_report(args.report)
    noted = 0
    for rr in report.rounds:
        ent = list(rr.entries)
        n_cov = sum(1 for e in ent if e.covered)
        n_scored = sum(1 for e in ent if e.covered is not None)
        print(f"{rr.round_id} ({rr.protocol}): {n_cov}/{n_scored} covered")
        for e in ent:
            if e.note:
                noted += 1
                label = f"{e.statistic}.{e.sub}" if e.sub else e.statistic
                print(f"  note {label}: {e.note}")
    cov = report.coverage
    frac = cov["fraction"]
    print(f"total: {cov['covered']}/{cov['scored']} covered"
          + ("" if frac is None else f" ({frac:.3f})")
          + (f", {noted} notes" if noted else ""))
    if frac is not None and frac < args.min_coverage:
        print(f"coverage {frac:.3f} below required {args.min_coverage:.3f}",
              file=sys.stderr)
        return EXIT_COVERAGE
    return EXIT_OK


def _write_csv(report: RunReport, path: str) -> None:
    cols = ["round_id", "statistic", "sub", "protocol", "truth",
            "local_point", "local_lo", "local_hi",
            "network_point", "network_lo", "network_hi",
            "fraction", "covered", "note"]
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for rr in report.rounds:
            for e in rr.entries:
                loc = e.local or Estimate(0.0, (0.0, 0.0), "local")
                net = e.network or Estimate(0.0, (0.0, 0.0), "network")
                w.writerow([
                    rr.round_id, e.statistic, e.sub, e.protocol,
                    "" if e.truth is None else e.truth,
                    *(("", "", "") if e.local is None
                      else (loc.point, loc.lo, loc.hi)),
                    *(("", "", "") if e.network is None
                      else (net.point, net.lo, net.hi)),
                    "" if e.fraction is None else e.fraction,
                    "" if e.covered is None else int(e.covered),
                    e.note])


def _render_plots(report: RunReport, out_dir: str) -> list:
    try:
        import matplotlib
    except ImportError:
        return []
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    # family bar chart: truth vs estimate for multi-counter statistics
    fam = {}
    for rr in report.rounds:
        for e in rr.entries:
            if e.protocol == "privcount" and e.truth is not None \
                    and e.network is not None:
                fam.setdefault(e.statistic, []).append(e)
    fam = {k: v for k, v in fam.items() if len(v) > 1}
    if fam:
        fig, axes = plt.subplots(1, len(fam), figsize=(6 * len(fam), 4),
                                 squeeze=False)
        for ax, (stat, entries) in zip(axes[0], sorted(fam.items())):
            labels = [e.sub for e in entries]
            x = range(len(entries))
            ax.bar([i - 0.2 for i in x], [e.truth for e in entries],
                   width=0.4, label="truth")
            ax.bar([i + 0.2 for i in x], [e.network.point for e in entries],
                   width=0.4, label="estimate",
                   yerr=[[max(0.0, e.network.point - e.network.lo) for e in entries],
                         [max(0.0, e.network.hi - e.network.point) for e in entries]],
                   capsize=3)
            ax.set_xticks(list(x), labels, rotation=30, ha="right")
            ax.set_title(stat)
            ax.legend()
        fig.tight_layout()
        p = os.path.join(out_dir, "counter_families.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)

    # set-statistic intervals against truth
    psc = [e for rr in report.rounds for e in rr.entries
           if e.protocol == "psc" and e.truth is not None and e.network]
    if psc:
        fig, ax = plt.subplots(figsize=(7, 4))
        y = range(len(psc))
        ax.errorbar([e.network.point for e in psc], list(y),
                    xerr=[[max(0.0, e.network.point - e.network.lo) for e in psc],
                          [max(0.0, e.network.hi - e.network.point) for e in psc]],
                    fmt="o", capsize=3, label="estimate")
        ax.scatter([e.truth for e in psc], list(y), marker="x", color="k",
                   label="truth", zorder=3)
        ax.set_yticks(list(y), [e.statistic for e in psc])
        ax.set_xscale("log")
        ax.set_xlabel("count")
        ax.legend()
        fig.tight_layout()
        p = os.path.join(out_dir, "set_statistics.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)

    # rendezvous outcome shares when a round published them
    shares = None
    for rr in report.rounds:
        shares = rr.extras.get("outcome_shares") or shares
    if shares:
        fig, ax = plt.subplots(figsize=(5, 4))
        names = sorted(shares)
        ax.bar(names, [shares[n] for n in names])
        ax.set_ylabel("share of rendezvous outcomes")
        fig.tight_layout()
        p = os.path.join(out_dir, "rend_outcomes.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)
    return written


def cmd_report(args) -> int:
    report = _load_report(args.report)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "entries.csv")
    _write_csv(report, csv_path)
    print(f"wrote {csv_path}")
    if not args.no_plots:
        written = _render_plots(report, args.out)
        for p in written:
            print(f"wrote {p}")
        if not written:
            print("plots skipped (matplotlib unavailable or nothing to draw)")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="privmeter",
        description="Privacy-preserving network measurement, simulated end "
                    "to end against known ground truth.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic trace and its truth")
    g.add_argument("--config", help="deployment config JSON")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int, default=None,
                   help="override both world and protocol seeds")
    g.add_argument("--write-default-config", metavar="DIR",
                   help="write a sample deployment and schedule, then exit")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="execute a measurement campaign")
    r.add_argument("--config", required=True)
    r.add_argument("--schedule", required=True)
    r.add_argument("--out", required=True, help="report JSON path")
    r.set_defaults(func=cmd_run)

    i = sub.add_parser("infer", help="re-derive or extend network inferences")
    i.add_argument("--report", required=True)
    i.add_argument("--out", help="write JSON here instead of stdout")
    i.add_argument("--guard-measurements", metavar="JSON",
                   help="two-subset guard-model fit input")
    i.add_argument("--mc-local", type=float, default=None,
                   help="local unique count for power-law extrapolation")
    i.add_argument("--mc-fraction", type=float, default=None)
    i.add_argument("--mc-alphas", help="comma-separated exponents")
    i.add_argument("--mc-populations", metavar="LO:HI:STEP",
                   help="candidate population grid")
    i.add_argument("--mc-universe", type=int, default=10 ** 6)
    i.add_argument("--seed", type=int, default=0)
    i.set_defaults(func=cmd_infer)

    s = sub.add_parser("score", help="print coverage and flag regressions")
    s.add_argument("--report", required=True)
    s.add_argument("--min-coverage", type=float, default=0.0)
    s.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="render CSV and plots from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
