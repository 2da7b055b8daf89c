"""Command-line entry points: scenario runs, stiffness fits, stream replay."""

from __future__ import annotations

import argparse
import json
import sys

from .gait_signals import EventDetector, WindowAssembler, read_replay_csv
from .harness import MetricsReport, ScenarioConfig, run_scenario
from .profile import GaussianParams, ProfileEstimator
from .tendon import identify_stiffness, load_calibration_csv


def _add_run_parser(sub) -> None:
    p = sub.add_parser("run", help="run one closed-loop scenario")
    p.add_argument("--activity", choices=["lw", "lr", "ra", "rd"], default="lw")
    p.add_argument("--scenario", choices=["steady", "perturb", "speed-ramp"],
                   default="steady")
    p.add_argument("--strides", type=int, default=60)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--amp", type=float, default=0.15,
                   help="assistance amplitude as a fraction of body weight")
    p.add_argument("--bw-n", type=float, default=700.0,
                   help="body weight in newtons")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None,
                   help="JSON file with controller/plant/template overrides")


def _run(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
    cfg = ScenarioConfig(
        activity=args.activity, scenario=args.scenario,
        n_strides=args.strides, seed=args.seed, amp_fraction=args.amp,
        body_weight=args.bw_n, output_dir=args.out,
        controller=overrides.get("controller", {}),
        plant=overrides.get("plant", {}),
        template=overrides.get("template", {}),
    )
    report = run_scenario(cfg)
    _print_report(report)
    return 1 if report.aborted else 0


def _print_report(report: MetricsReport) -> None:
    agg = report.aggregate
    print(f"activity={report.config['activity']} "
          f"scenario={report.config['scenario']} "
          f"strides={report.config['n_strides']} seed={report.config['seed']}")
    if report.aborted:
        print("SAFETY ABORT latched during the run")
    conv = report.convergence_stride
    print(f"convergence_stride={conv}")
    def fmt(m, s):
        if agg[m] is None:
            return "n/a"
        sd = agg[s]
        return f"{agg[m]:.4f} +/- {sd:.4f}" if sd is not None else f"{agg[m]:.4f}"
    print(f"rmse_pct          {fmt('rmse_pct_mean', 'rmse_pct_sd')}")
    print(f"pearson_shank     {fmt('pearson_shank_mean', 'pearson_shank_sd')}")
    print(f"pearson_time      {fmt('pearson_time_mean', 'pearson_time_sd')}")
    print(f"swing_max_force_n {fmt('swing_max_force_mean', 'swing_max_force_sd')}")
    print(f"stance_ratio_mean {agg['stance_ratio_mean']}")


def _fit_stiffness(args) -> int:
    fit = identify_stiffness(load_calibration_csv(args.csv))
    print(f"k_all={fit.k_all:.6f} N/mm  r_squared={fit.r_squared:.6f}")
    return 0


def _replay(args) -> int:
    detector = EventDetector()
    assembler = WindowAssembler()
    estimator = ProfileEstimator(GaussianParams(
        args.amp_n, 15.0, 10.0, 5.0, -20.0, 25.0))
    strides = 0
    for sample in read_replay_csv(args.csv):
        ev = detector.update(sample)
        window = assembler.process(sample, ev)
        if window is not None:
            estimator.update_from_window(window)
            p = estimator.params
            print(f"stride {strides}: mu={p.mu:.3f} sigma1={p.sigma1:.3f} "
                  f"sigma2={p.sigma2:.3f} fc={p.theta_fc:.3f} fo={p.theta_fo:.3f}")
            strides += 1
    print(f"{strides} strides estimated")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shankexo",
        description="Shank-angle-based exoskeleton control, simulated")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)
    p_fit = sub.add_parser("fit-stiffness",
                           help="least-squares stiffness from a force/deflection CSV")
    p_fit.add_argument("csv")
    p_rep = sub.add_parser("replay",
                           help="run the estimation pipeline over a recorded stream")
    p_rep.add_argument("csv")
    p_rep.add_argument("--amp-n", type=float, default=105.0)
    args = parser.parse_args(argv)
    if args.command == "run":
        return _run(args)
    if args.command == "fit-stiffness":
        return _fit_stiffness(args)
    return _replay(args)


if __name__ == "__main__":
    sys.exit(main())
