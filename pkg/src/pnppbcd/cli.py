"""Command-line surface: scene synthesis, detection, evaluation.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (unreadable or
malformed files, invalid scene parameters).  All outputs are deterministic
for a fixed seed; the seed may also come from the ``PNPPBCD_SEED``
environment variable, with the ``--seed`` flag taking precedence.
"""

from __future__ import annotations

import argparse
import os
import sys

from .detect import anomaly_scores, roc_auc
from .hsio import (
    HsiFormatError,
    load_hsi,
    load_mask,
    read_scores_csv,
    save_hsi,
    save_mask,
    write_history_csv,
    write_roc_csv,
    write_scores_csv,
)
from .penalties import relaxed_lp
from .solver import SolverConfig, run
from .synth import SyntheticSpec, synth_scene

_SEED_ENV = "PNPPBCD_SEED"


class _Parser(argparse.ArgumentParser):
    """argparse terminates with status 2 on usage errors; this tool uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_dims(text):
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"dims must look like 50x50x30, got {text!r}")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be integers, got {text!r}")
    return dims


def _default_seed():
    raw = os.environ.get(_SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise HsiFormatError(f"{_SEED_ENV} must be an integer, got {raw!r}")


def build_parser():
    parser = _Parser(prog="pnppbcd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("--dims", type=_parse_dims, required=True)
    p_synth.add_argument("--rank", type=int, required=True)
    p_synth.add_argument("--anomalies", type=int, default=20)
    p_synth.add_argument("--magnitude", type=float, default=0.8)
    p_synth.add_argument("--noise", type=float, default=0.03)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--truth", required=True)

    p_detect = sub.add_parser("detect", help="run detection on a scene file")
    p_detect.add_argument("--in", dest="in_path", required=True)
    p_detect.add_argument("--rank", type=int, required=True)
    p_detect.add_argument("--out", required=True)
    p_detect.add_argument("--history", required=True)
    p_detect.add_argument("--delta", type=float, default=0.25)
    p_detect.add_argument("--tau", type=float, default=1.0)
    p_detect.add_argument("--alpha-sparse", type=float, default=0.01)
    p_detect.add_argument("--alpha-basis", type=float, default=0.01)
    p_detect.add_argument("--alpha-coeff", type=float, default=0.01)
    p_detect.add_argument("--p", type=float, default=0.1)
    p_detect.add_argument("--eps", type=float, default=1e-5)
    p_detect.add_argument("--a", type=float, default=0.2)
    p_detect.add_argument("--b", type=float, default=0.4)
    p_detect.add_argument("--gamma", type=float, default=0.99)
    p_detect.add_argument("--tol", type=float, default=1e-3)
    p_detect.add_argument("--max-iter", type=int, default=500)

    p_eval = sub.add_parser("eval", help="score a detection against ground truth")
    p_eval.add_argument("--scores", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--roc", required=True)
    return parser


def _cmd_synth(args):
    seed = args.seed if args.seed is not None else _default_seed()
    spec = SyntheticSpec(
        dims=args.dims,
        rank=args.rank,
        anomaly_count=args.anomalies,
        anomaly_magnitude=args.magnitude,
        noise_level=args.noise,
        seed=seed,
    )
    observed, truth, _ = synth_scene(spec)
    save_hsi(args.out, observed)
    save_mask(args.truth, truth)
    return 0


def _cmd_detect(args):
    scene = load_hsi(args.in_path)
    cfg = SolverConfig(
        rank=args.rank,
        delta=args.delta,
        tau=args.tau,
        alpha_sparse=args.alpha_sparse,
        alpha_basis=args.alpha_basis,
        alpha_coeff=args.alpha_coeff,
        penalty=relaxed_lp(args.p, args.eps),
        gamma=args.gamma,
        range_scale=args.a,
        range_offset=args.b,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    state, history = run(scene, cfg)
    write_scores_csv(args.out, anomaly_scores(state.sparse))
    write_history_csv(args.history, history)
    return 0


def _cmd_eval(args):
    scores = read_scores_csv(args.scores)
    truth = load_mask(args.truth)
    if scores.shape != truth.shape:
        raise HsiFormatError(
            f"scores shape {scores.shape} does not match truth shape {truth.shape}"
        )
    roc = roc_auc(scores, truth)
    write_roc_csv(args.roc, roc)
    print(f"AUC={roc.auc:.17g}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"synth": _cmd_synth, "detect": _cmd_detect, "eval": _cmd_eval}
    try:
        return handlers[args.command](args)
    except (HsiFormatError, OSError, ValueError) as exc:
        print(f"pnppbcd: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
