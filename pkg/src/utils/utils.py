"""General utilities
"""

import os
import json

import wandb

import numpy as np

VERSION = "pnkit 0.3.0"

DEFAULT_T = (-3.0, -1.0, 0.0, 1.0)
DEFAULT_SAMPLES = 100
DEFAULT_NESTED_POINTS = 20
DEFAULT_TRIALS = 10000

DEFAULT_TOLERANCES = {
    "schouten": 1e-5,
    "torsion": 1e-6,
    "grad": 1e-5,
    "inv": 1e-6,
    "np": 1e-9,
    "spectrum": 1e-6,
    "interlacing": 1e-9,
    "fixed_point": 1e-9,
    "kks": 1e-5,
    "shift": 1e-10,
    "groupoid": 1e-12,
    "cocycle_target": 1e-8,
    "negative": 1e-2,
    "geometry": 1e-9,
    "fd_order": 0.1,
}

MAX_WITNESSES = 3


class ResidualMeter(object):
    """Tracks the worst residual of a check and up to MAX_WITNESSES failing points"""
    def __init__(self, tolerance):
        self.tolerance = tolerance
        self.reset()

    def reset(self):
        self.val = 0.0
        self.max = 0.0
        self.count = 0
        self.witnesses = []

    def update(self, val, witness=None, n=1):
        val = float(val)
        self.val = val
        self.count += n
        # nan compares false everywhere, keep it visible
        if np.isnan(val) or val > self.max:
            self.max = np.inf if np.isnan(val) else val
        if (np.isnan(val) or val > self.tolerance) and witness is not None \
                and len(self.witnesses) < MAX_WITNESSES:
            self.witnesses.append(list(witness))

    @property
    def passed(self):
        return self.max <= self.tolerance


def relative(value, *norms):
    """value / max(1, prod norms)"""
    return float(value) / max(1.0, float(np.prod(norms)))


def to_jsonable(obj):
    """Recursively converts numpy scalars / arrays and non-finite floats for json."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        obj = float(obj)
        if np.isnan(obj):
            return "nan"
        if np.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    return obj


def dumps(obj):
    """Stable json: sorted keys, numpy values converted."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2)


def save_report(report, path):
    """Writes a report (anything with to_json) to path.
    Params:
    - report: VerificationReport
    - path (str): output file, parent directories are created
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write(dumps(report.to_json()) + "\n")
    print(f"Saved report to {path}")


def init_wandb(args, job_type):
    """Starts a wandb run for the command, disabled unless asked for."""
    os.environ['WANDB_MODE'] = args.wandb_mode
    os.environ['WANDB_SILENT'] = 'true'
    run = wandb.init(entity=args.wandb_entity or None,
                     project=args.wandb_project or "pnkit",
                     group=args.experiment_name or None,
                     job_type=job_type,
                     mode=args.wandb_mode,
                     save_code=args.wandb_mode != "disabled")
    wandb.config.update({k: v for k, v in vars(args).items() if k != "func"}, allow_val_change=True)
    return run


def log_result(result):
    """Per-check residual and pass flag to the active run."""
    if wandb.run is None:
        return
    wandb.log({
        f"{result.name}/max_residual": result.max_residual,
        f"{result.name}/tolerance": result.tolerance,
        f"{result.name}/points": result.points_evaluated,
        f"{result.name}/pass": int(result.passed)})
