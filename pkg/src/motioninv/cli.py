"""Command-line entry point: ``motioninv {extract,eval,plot,synth}``.

Exit codes: 0 success, 2 I/O problem, 3 invalid input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import MotionInvError, NumericalError
from .features import DEFAULT_VISION_DIM, FeatureSet
from .invariants import read_invariants_csv, trajectory_invariants, write_arm_csv, write_invariants_csv
from .metrics import write_report
from .pose_io import DEFAULT_COLUMN_MAP, ColumnMap, GestureTimeline, parse_kinematics, parse_transcript, write_transcript
from .screw import write_screws_csv
from .striction import write_striction_csv

log = logging.getLogger("motioninv")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3, 4
OUTPUT_ROOT_ENV = "MOTIONINV_OUTPUT_ROOT"


def output_dir(arg, default_name):
    """``--out`` if given, else ``$MOTIONINV_OUTPUT_ROOT/<default_name>``, else ``./<default_name>``."""
    if arg:
        out = Path(arg)
    else:
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _column_map(args):
    return ColumnMap.from_file(args.column_map) if args.column_map else DEFAULT_COLUMN_MAP


# --- commands ---------------------------------------------------------------------

def cmd_extract(args):
    src = Path(args.kinematics)
    if not src.exists():
        raise FileNotFoundError(f"no such file: {src}")
    out = output_dir(args.out, src.stem)
    left, right = parse_kinematics(src, _column_map(args), args.sample_period)
    series = {}
    for traj in (left, right):
        arm = traj.arm_id
        inv = trajectory_invariants(traj, args.samples)
        series[arm] = inv
        write_arm_csv(out / f"{src.stem}_{arm}_invariants.csv", inv)
        write_screws_csv(out / f"{src.stem}_{arm}_screws.csv", inv.screws)
        if inv.curve is not None:
            write_striction_csv(out / f"{src.stem}_{arm}_striction.csv", inv.curve)
        if not np.all(np.isfinite(inv.per_frame_kappa)) or not np.all(np.isfinite(inv.per_frame_tau)):
            raise NumericalError(f"{arm} arm: non-finite invariants")
        if inv.degenerate:
            log.warning("%s arm: motion too degenerate for a striction curve; invariants set to 0", arm)
    write_invariants_csv(out / f"{src.stem}_invariants.csv", series["left"], series["right"])
    print(f"wrote invariants for {len(left)} frames to {out}")
    return EXIT_OK


def cmd_eval(args):
    from .pipeline import load_dataset, run_louo
    from .plotting import plot_report, plot_ribbons

    root = Path(args.dataset)
    if not root.exists():
        raise FileNotFoundError(f"no such dataset directory: {root}")
    fset = FeatureSet.parse(args.features)
    out = output_dir(args.out, f"eval_{fset.flag.replace(',', '')}_{args.profile}_seed{args.seed}")
    vision = False if args.no_vision else "auto"
    trials = load_dataset(root, _column_map(args), vision, args.synthetic_vision, args.vision_dim, args.seed)
    results = run_louo(trials, fset, args.profile, args.seed, oracle=args.oracle, jobs=args.jobs,
                       use_vision=not args.no_vision)
    scores = [s for r in results for s in r.scores]
    label = f"{fset.label} profile={args.profile} seed={args.seed}" + (" oracle" if args.oracle else "")
    (am, asd), (em, esd) = write_report(out / "report.csv", scores, label)
    plot_report(scores, out / "report.svg", fset.label)
    pred_dir = out / "predictions"
    pred_dir.mkdir(exist_ok=True)
    by_id = {t.trial_id: t for t in trials}
    for r in results:
        if r.history is not None:
            r.history.write_csv(out / f"metrics_fold{r.index}_{r.user}.csv")
        for tid, labels in r.predictions.items():
            write_transcript(pred_dir / f"{tid}.txt", GestureTimeline(labels))
            if args.figures:
                t = by_id[tid]
                kl = trajectory_invariants(t.left).per_frame_kappa
                kr = trajectory_invariants(t.right).per_frame_kappa
                plot_ribbons(labels, t.timeline, kl, kr, pred_dir / f"{tid}.svg", title=tid)
    print(f"{fset.label}: accuracy {am:.1f} ± {asd:.1f}, edit {em:.1f} ± {esd:.1f} over {len(results)} folds")
    print(f"report: {out / 'report.csv'}")
    return EXIT_OK


def cmd_plot(args):
    from .plotting import plot_ribbons

    inv_path = Path(args.kappa)
    for p in (args.pred, args.gt, inv_path):
        if not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
    inv = read_invariants_csv(inv_path)
    T = len(inv["kappa_left"])
    pred = parse_transcript(args.pred, T)
    gt = parse_transcript(args.gt, T)
    out = Path(args.out) if args.out else output_dir(None, "figures") / f"{Path(args.gt).stem}.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    plot_ribbons(pred, gt, inv["kappa_left"], inv["kappa_right"], out, title=Path(args.gt).stem)
    print(f"figure: {out}")
    return EXIT_OK


def cmd_synth(args):
    from .pose_io import write_kinematics
    from .synth import gen_helix_trajectory, make_toy_benchmark, write_dataset

    if args.kind == "toy":
        out = output_dir(args.out, "toy_dataset")
        trials = make_toy_benchmark(seed=args.seed, n_trials=args.trials, n_frames=args.frames, n_users=args.users)
        write_dataset(trials, out)
        print(f"wrote {len(trials)} trials to {out}")
    else:
        out = output_dir(args.out, "helix")
        left = gen_helix_trajectory(args.a, args.b, args.frames, args.dtheta, arm="left")
        right = gen_helix_trajectory(args.a, args.b, args.frames, args.dtheta, arm="right")
        path = out / f"helix_a{args.a:g}_b{args.b:g}.txt"
        write_kinematics(path, left, right)
        print(f"wrote {path} (kappa* {left.meta['kappa_star']:.6g}, tau* {left.meta['tau_star']:.6g})")
    return EXIT_OK


# --- parser -------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="motioninv", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="per-arm curvature/torsion from a kinematics file")
    p.add_argument("kinematics")
    p.add_argument("--out", help="output directory")
    p.add_argument("--column-map", help="file of 'key = offset' lines overriding the column layout")
    p.add_argument("--samples", type=int, default=None, help="arc-length samples M (default: one per screw)")
    p.add_argument("--sample-period", type=float, default=1 / 30)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="leave-one-user-out recognition on a dataset directory")
    p.add_argument("dataset")
    p.add_argument("--features", default="p,k,t", help="p | p,q | p,k,t | p,q,k,t")
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--column-map")
    p.add_argument("--synthetic-vision", action="store_true", help="seeded stand-ins for missing vision files")
    p.add_argument("--vision-dim", type=int, default=DEFAULT_VISION_DIM)
    p.add_argument("--no-vision", action="store_true", help="drop the vision node")
    p.add_argument("--oracle", action="store_true", help="use ground truth as predictions (pipeline check)")
    p.add_argument("--jobs", type=int, default=1, help="folds run in parallel processes")
    p.add_argument("--figures", action="store_true", help="also draw one ribbon figure per trial")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="prediction/ground-truth ribbons over curvature traces")
    p.add_argument("--pred", required=True, help="predicted transcript")
    p.add_argument("--gt", required=True, help="ground-truth transcript")
    p.add_argument("--kappa", required=True, help="two-arm invariants CSV from 'extract'")
    p.add_argument("--out", help="SVG path")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="write synthetic data")
    p.add_argument("kind", choices=("toy", "helix"))
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=6)
    p.add_argument("--users", type=int, default=3)
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--a", type=float, default=1.0, help="helix radius")
    p.add_argument("--b", type=float, default=0.5, help="helix pitch parameter")
    p.add_argument("--dtheta", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FloatingPointError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MotionInvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
