"""main.py
Primary entry point for pnkit.
"""
import sys
import json

import wandb

import numpy as np

from utils.errors import PNKitError, ConfigError
from utils.utils import save_report, init_wandb, dumps
from utils.parser import parse_args
from utils.data import read_points_csv, sample_chart_points
from models.verify import RunConfig, run_suite, spectrum_dump, groupoid_cli


def verify(args):
    """Runs the suite; exit code 0 when every check passes, 1 otherwise."""
    config = RunConfig.from_args(args)
    run = init_wandb(args, job_type="verify")
    print(f"Verifying Gr({config.k},{config.n}), scale {config.scale}, {config.samples} points, seed {config.seed}")
    report = run_suite(config, progress=not args.no_progress)
    if report.calibration is not None:
        print(f"Calibration: c = {report.calibration['c']:.9g}, kappa = {report.calibration['kappa']:.9g}")
        wandb.config.update({"calibration": report.calibration}, allow_val_change=True)
    failed = [r.name for r in report.results if not r.passed]
    print(f"{len(report.results) - len(failed)}/{len(report.results)} checks passed in {report.wall_time:.1f}s")
    if failed:
        print(f"Failed: {', '.join(failed)}")
    if args.out:
        save_report(report, args.out)
    else:
        print(dumps(report.to_json()))
    wandb.log({"pass": int(report.passed), "wall_time": report.wall_time})
    run.finish()
    return 0 if report.passed else 1


def spectrum(args):
    config = RunConfig.from_args(args)
    run = init_wandb(args, job_type="spectrum")
    if args.points:
        points = read_points_csv(args.points, config.spec)
    else:
        points = sample_chart_points(config.spec, config.samples, np.random.default_rng(config.seed))
    df = spectrum_dump(config, points, progress=not args.no_progress)
    df.to_csv(args.out, index=False)
    print(f"Wrote {len(df)} rows to {args.out}, max match distance {df['match_distance'].max():.3e}")
    wandb.log({"spectrum/table": wandb.Table(dataframe=df),
               "spectrum/max_match_distance": float(df["match_distance"].max())})
    run.finish()
    return 0


def groupoid(args):
    try:
        payload = json.loads(args.json)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid --json: {e}")
    print(dumps(groupoid_cli(args.subcommand, payload)))
    return 0


COMMANDS = {"verify": verify, "spectrum": spectrum, "groupoid": groupoid}


def main(argv=None):
    args = parse_args(argv)
    try:
        if getattr(args, "module_test", "") == "sampler":
            print("\nTESTING SAMPLER")
            from utils.data import test_sampler
            test_sampler(args)
            return 0
        elif getattr(args, "module_test", "") == "calibration":
            print("\nTESTING CALIBRATION")
            from models.hermitian import test_calibration
            test_calibration(args)
            return 0
        return COMMANDS[args.command](args)
    except PNKitError as e:
        print(json.dumps(e.to_json()))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
