"""Parse command line arguments.
"""

import sys
import argparse

from utils.utils import DEFAULT_SAMPLES, DEFAULT_NESTED_POINTS, DEFAULT_TRIALS


def _add_model_args(parser):
    # model config
    parser.add_argument("--manifold",
                        type=str,
                        choices=["cpn", "grass"],
                        default="cpn",
                        help="CP^{n-1} (k = 1) or the Grassmannian Gr(k,n)")
    parser.add_argument("--n",
                        type=int,
                        default=2,
                        help="matrix size n")
    parser.add_argument("--k",
                        type=int,
                        default=None,
                        help="rank k of rho (1 for cpn)")
    parser.add_argument("--scale",
                        type=float,
                        default=1.0,
                        help="multiplier on rho")
    parser.add_argument("--pin-c",
                        type=float,
                        default=None,
                        help="r-matrix constant c, skips calibration")
    parser.add_argument("--pin-kappa",
                        type=float,
                        default=None,
                        help="GT constant kappa")

    # sampling config
    parser.add_argument("--samples",
                        type=int,
                        default=DEFAULT_SAMPLES,
                        help="number of sampled chart points")
    parser.add_argument("--seed",
                        type=int,
                        default=0,
                        help="random seed (64-bit unsigned)")

    # check config
    parser.add_argument("--t",
                        type=str,
                        default="",
                        help="comma separated pencil parameters, default -3,-1,0,1")
    parser.add_argument("--fd-step",
                        type=float,
                        default=1e-5,
                        help="finite-difference step")
    parser.add_argument("--fd-scheme",
                        type=str,
                        choices=["central-2", "central-4"],
                        default="central-2",
                        help="finite-difference stencil")
    parser.add_argument("--tol",
                        type=str,
                        action="append",
                        default=[],
                        help="tolerance override NAME=VALUE, repeatable")
    parser.add_argument("--checks",
                        type=str,
                        default="",
                        help="comma separated check names, default all")
    parser.add_argument("--nested-points",
                        type=int,
                        default=DEFAULT_NESTED_POINTS,
                        help="points used by the second-derivative checks")
    parser.add_argument("--trials",
                        type=int,
                        default=DEFAULT_TRIALS,
                        help="randomized groupoid trials per pencil parameter")


def _add_wandb_args(parser):
    # wandb config
    parser.add_argument("--wandb-mode",
                        type=str,
                        choices=["disabled", "offline", "online"],
                        default="disabled",
                        help="wandb mode")
    parser.add_argument("--wandb-entity",
                        type=str,
                        default="",
                        help="wandb entity")
    parser.add_argument("--wandb-project",
                        type=str,
                        default="pnkit",
                        help="wandb project name")
    parser.add_argument("--experiment-name",
                        type=str,
                        default="",
                        help="wandb experiment name")

    # debug
    parser.add_argument("--module-test",
                        type=str,
                        default="",
                        help="test module (sampler, calibration)")
    parser.add_argument("--no-progress",
                        action="store_true",
                        help="hide progress bars")


def parse_args(argv=None):
    """Command line argument parser.
    Params:
    - argv (list): arguments, defaults to sys.argv[1:]
    Returns:
        args: argparse.Namespace object containing the parsed arguments.
    """
    parser = argparse.ArgumentParser(
        prog="pnkit",
        description="Poisson-Nijenhuis structures on CP^n and Gr(k,n): verification suite")
    subparsers = parser.add_subparsers(dest="command")

    verify = subparsers.add_parser("verify", help="run the verification suite")
    _add_model_args(verify)
    verify.add_argument("--out",
                        type=str,
                        default="",
                        help="report json path")
    _add_wandb_args(verify)

    spectrum = subparsers.add_parser("spectrum", help="tabulate GT values and N eigenvalues")
    _add_model_args(spectrum)
    spectrum.add_argument("--points",
                          type=str,
                          default="",
                          help="points csv, sampled when empty")
    spectrum.add_argument("--out",
                          type=str,
                          default="spectrum.csv",
                          help="output csv path")
    _add_wandb_args(spectrum)

    groupoid = subparsers.add_parser("groupoid", help="groupoid structure maps on json input")
    groupoid.add_argument("subcommand",
                          type=str,
                          choices=["compose", "member", "target", "pair-map"],
                          help="operation")
    groupoid.add_argument("--json",
                          type=str,
                          required=True,
                          help="json arguments")

    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    if args.command is None:
        parser.error("a command is required (verify, spectrum, groupoid)")
    return args
