"""Command-line entry point: ``lcc <subcommand> --config FILE --out DIR``.

Exit status is 0 on success, 1 when the config is invalid (nothing is
written), 2 when the analysis itself fails.  The pipeline is deterministic;
``--seed`` is accepted for interface compatibility and ignored.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import controllability, plotting, region_scanner, simulator, string_stability
from .car_following import linearize
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .errors import LccError
from .system_builder import build

log = logging.getLogger("lcc")

SUBCOMMANDS = ("equilibrium", "linearize", "build", "ctrb", "ss-check", "scan", "simulate", "reproduce")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _gains(cfg: ScenarioConfig):
    return linearize(cfg.driver_params(), cfg.equilibrium_point())


# subcommands ---------------------------------------------------------------

def cmd_equilibrium(cfg, out: Path, args):
    eq = cfg.equilibrium_point()
    _write_json(out / "equilibrium.json", {"s_star": eq.s_star, "v_star": eq.v_star})


def cmd_linearize(cfg, out: Path, args):
    eq = cfg.equilibrium_point()
    g = linearize(cfg.driver_params(), eq)
    _write_json(out / "linearization.json", {
        "s_star": eq.s_star,
        "v_star": eq.v_star,
        "alpha1": g.alpha1,
        "alpha2": g.alpha2,
        "alpha3": g.alpha3,
        "condition_value": controllability.fd_condition(g),
    })


def cmd_build(cfg, out: Path, args):
    (out / "state_space.json").write_text(build(cfg.lcc_topology(), _gains(cfg)).to_json() + "\n")


def cmd_ctrb(cfg, out: Path, args):
    report = controllability.analyze(build(cfg.lcc_topology(), _gains(cfg)))
    _write_json(out / "ctrb.json", report.to_dict())
    return report


def cmd_ss_check(cfg, out: Path, args):
    topo, g, fb, grid = cfg.lcc_topology(), _gains(cfg), cfg.feedback_gains(), cfg.grid()
    verdict = string_stability.string_stability_verdict(topo, g, fb, grid)
    _write_json(out / "verdict.json", verdict.to_dict())
    omegas, mag2 = string_stability.magnitude_curve(topo, g, fb, grid)
    with open(out / "magnitude.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "magnitude_sq"])
        for om, m in zip(omegas, mag2):
            w.writerow([f"{om:.10g}", f"{m:.10g}"])
    plotting.plot_magnitude({cfg.name or "Gamma": (omegas, mag2)}, out / "magnitude.svg")
    return verdict, (omegas, mag2)


def cmd_scan(cfg, out: Path, args):
    chart = region_scanner.scan(cfg.scan_spec(_gains(cfg)), threads=args.threads)
    chart.write_csv(out / "chart.csv")
    plotting.plot_chart(chart, out / "chart.svg", title=cfg.name)
    _write_json(out / "chart_summary.json", {
        "x_gain": chart.x_gain.label,
        "y_gain": chart.y_gain.label,
        "counts": chart.counts,
        "notes": {f"{iy},{ix}": msg for (iy, ix), msg in chart.notes.items()},
    })
    return chart


def cmd_simulate(cfg, out: Path, args):
    sim = cfg.simulation
    result = simulator.simulate(
        cfg.driver_params(), cfg.lcc_topology(), cfg.feedback_gains(), cfg.equilibrium_point(),
        cfg.perturbation_signal(), sim.horizon, sim.dt, sim.mode,
    )
    result.write_csv(out / "trajectory.csv")
    plotting.plot_velocity_profile(result, out / "velocity.svg", title=cfg.name)
    return result


# reproduce -----------------------------------------------------------------

def bundled_config(name: str) -> ScenarioConfig:
    return parse_config(resources.files("lcc.configs").joinpath(f"{name}.json").read_text())


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("lcc.configs").iterdir() if p.name.endswith(".json"))


def _with_steps(cfg: ScenarioConfig, steps):
    if not steps or cfg.scan is None:
        return cfg
    scan = cfg.scan.model_copy(update={
        "x_range": (cfg.scan.x_range[0], cfg.scan.x_range[1], steps),
        "y_range": (cfg.scan.y_range[0], cfg.scan.y_range[1], steps),
    })
    return cfg.model_copy(update={"scan": scan})


def cmd_reproduce(cfg, out: Path, args):
    """Run every bundled scenario and summarize the claims they check."""
    summary = {}
    sub = lambda name: _mkdir(out / name)  # noqa: E731

    hdv = bundled_config("platoon_hdv_only")
    g = _gains(hdv)
    peak, w_peak = string_stability.hdv_peak(g, hdv.grid())
    summary["hdv_local"] = {"peak_magnitude": peak, "peak_omega": w_peak, "string_unstable": peak > 1.0}

    ctrb = {}
    for name in ("ctrb_free_driving", "ctrb_car_following", "ctrb_general"):
        c = bundled_config(name)
        report = cmd_ctrb(c, sub(name), args)
        a22, b2 = controllability.behind_subsystem(build(c.lcc_topology(), _gains(c)))
        ctrb[name] = {
            "behind_subsystem_verdict": controllability.pbh_test(a22, b2).verdict,
            "condition_value": report.condition_value,
            "kalman_rank": report.kalman_rank,
            "state_dim": report.state_dim,
            "verdict": report.verdict,
            "uncontrollable_state_rows": report.uncontrollable_state_rows,
        }
    summary["controllability"] = ctrb

    charts = {}
    for name in bundled_names():
        if name.startswith("scan_"):
            c = _with_steps(bundled_config(name), args.scan_steps)
            log.info("scanning %s", name)
            charts[name] = cmd_scan(c, sub(name), args)
    base = {k: v for k, v in charts.items() if "_fixed_" not in k}
    summary["scan_counts"] = {k: v.counts for k, v in base.items()}
    summary["behind_exceeds_ahead"] = {
        f"behind_{b}_vs_ahead_{a}": charts[f"scan_behind_{b}"].counts["string_stable"]
        > charts[f"scan_ahead_{a}"].counts["string_stable"]
        for b in (1, 2) for a in (1, 2)
    }
    deltas = {}
    for fix in (1, 2):
        for a in (1, 2):
            name = f"scan_ahead_{a}_fixed_{fix}"
            delta = region_scanner.region_delta(charts[f"scan_ahead_{a}"], charts[name])
            deltas[f"ahead_{a}_fixed_{fix}"] = delta.to_dict()
            plotting.plot_chart_delta(charts[f"scan_ahead_{a}"], charts[name], out / name / "delta.svg",
                                      title=f"mu[{fix}]=k[{fix}]=-1")
    summary["fixed_behind_deltas"] = deltas

    curves, platoon = {}, {}
    for name, label in (("platoon_hdv_only", "HDV only"), ("platoon_case_a", "Case A"),
                        ("platoon_case_b", "Case B"), ("platoon_case_c", "Case C")):
        c = bundled_config(name)
        d = sub(name)
        verdict, curve = cmd_ss_check(c, d, args)
        result = cmd_simulate(c, d, args)
        curves[label] = curve
        platoon[name] = {
            "string_stable": verdict.string_stable,
            "peak_magnitude": verdict.peak_magnitude,
            "follower_peak_deviation": result.peak_deviation(c.lcc_topology().followers),
        }
    plotting.plot_magnitude(curves, out / "platoon_magnitude.svg")
    summary["platoon_cases"] = platoon
    _write_json(out / "summary.json", summary)
    return summary


def _mkdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "linearize": cmd_linearize,
    "build": cmd_build,
    "ctrb": cmd_ctrb,
    "ss-check": cmd_ss_check,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "reproduce": cmd_reproduce,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcc", description="Leading cruise control analysis of mixed traffic strings.")
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = subs.add_parser(name)
        p.add_argument("--config", "--spec", dest="config", required=(name != "reproduce"),
                       help="scenario JSON file")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--threads", type=int, default=None, help="worker processes for scan")
        p.add_argument("--seed", type=int, default=None, help="ignored; the pipeline is deterministic")
        if name == "reproduce":
            p.add_argument("--scan-steps", type=int, default=None,
                           help="override the 201x201 chart resolution (for quick runs)")
    return parser


def run(subcommand: str, config_path, output_dir, threads=None, scan_steps=None) -> int:
    args = argparse.Namespace(threads=threads, scan_steps=scan_steps)
    try:
        cfg = load_config(config_path) if config_path is not None else None
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[subcommand](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except LccError as exc:
        print(f"analysis error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return run(args.command, args.config, args.out, args.threads, getattr(args, "scan_steps", None))


if __name__ == "__main__":
    sys.exit(main())
