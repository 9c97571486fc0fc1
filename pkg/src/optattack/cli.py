"""Command line interface: ``optattack {attack,verify,ground-truth,gen-model}``."""
import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import harness, synthetic
from .boundary import SearchParams
from .data import load_dataset, save_dataset
from .errors import ConfigError, OptAttackError
from .models import save_model
from .oracle import load_model
from .rgf import RgfConfig
from .verification import GroundTruthMethod, ground_truth

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


def _rgf_from_args(args):
    return RgfConfig(
        beta=args.beta,
        q=args.q,
        query_budget=args.budget,
        max_iterations=args.max_iterations,
        distance_params=SearchParams(tolerance=args.tolerance, relative=True),
        n_init_tries=args.n_init_tries,
    )


def cmd_attack(args):
    cfg = harness.ExperimentConfig(
        model_path=args.model,
        dataset_path=args.dataset,
        mode=args.mode,
        n_examples=args.n,
        rgf=_rgf_from_args(args),
        seed=args.seed,
        out_dir=args.out,
        workers=args.workers,
        skip_header=args.skip_header,
        trace_cap=args.trace_cap,
        resume=args.resume,
    )
    report = harness.run_experiment(cfg)
    avg = "n/a" if report.avg_l2 is None else f"{report.avg_l2:.6f}"
    print(f"examples={report.n_records} success_rate={report.success_rate:.3f} "
          f"avg_l2={avg} avg_queries={report.avg_queries:.1f} -> {cfg.report_dir()}")
    return harness.status_exit_code(report)


def _selection(args, oracle, dataset):
    chosen = harness.select_examples(dataset, oracle, args.n, args.seed)
    out = []
    for index, rec in chosen:
        target = harness.assign_target(rec, args.mode, oracle.n_classes)
        out.append((index, rec, harness.build_predicate(rec.label, target), target))
    return out


def cmd_ground_truth(args):
    oracle = load_model(args.model)
    dataset = load_dataset(args.dataset, oracle.n_classes, oracle.dim, args.skip_header)
    records = []
    for index, rec, pred, target in _selection(args, oracle, dataset):
        try:
            gt = ground_truth(oracle, rec.x, pred, args.n_directions,
                              allow_high_dim=args.allow_high_dim)
            x_star = None
            if gt.argmin_direction is not None:
                x_star = (rec.x + gt.min_distortion * gt.argmin_direction).tolist()
            records.append(harness.AttackRecord(
                index, rec.label, target, float(gt.min_distortion), 0, 0, gt.method.value,
                True, x_star))
        except OptAttackError as exc:
            logging.warning("example %d: %s", index, exc)
            records.append(harness.AttackRecord(index, rec.label, target, None, 0, 0,
                                                "no_adversarial", False))
    report = harness.summarize(records, {"model": args.model, "dataset": args.dataset,
                                         "mode": args.mode, "n_examples": args.n, "seed": args.seed})
    out = Path(args.out or harness.ExperimentConfig(args.model, args.dataset).report_dir())
    harness.emit_report(report, records, out, prefix="ground_truth_")
    for r in records:
        d = "n/a" if r.distortion is None else f"{r.distortion:.6f}"
        print(f"index={r.index} label={r.original_label} min_distortion={d} method={r.status}")
    return EXIT_OK if report.n_success == report.n_records else EXIT_PARTIAL


def cmd_verify(args):
    """Re-check a report: adversariality, recorded distortion, and the gap to ground truth."""
    oracle = load_model(args.model).uncounted()
    dataset = load_dataset(args.dataset, oracle.n_classes, oracle.dim, args.skip_header)
    report_dir = Path(args.report)
    records = harness.load_records(report_dir / harness.RECORDS_FILE)
    checks = []
    all_ok = True
    for r in records:
        rec = dataset[r.index]
        pred = harness.build_predicate(r.original_label, r.target_label)
        row = {"index": r.index, "status": r.status}
        if r.x_star is None:
            row.update(adversarial=False, ok=False)
            checks.append(row)
            all_ok = False
            continue
        x_star = np.asarray(r.x_star)
        adv = pred.holds(oracle.classify(x_star))
        dist = float(np.linalg.norm(x_star - rec.x))
        row.update(adversarial=adv, distortion=r.distortion, recomputed=dist,
                   distortion_consistent=math.isclose(dist, r.distortion, rel_tol=1e-9, abs_tol=1e-12))
        ok = adv and row["distortion_consistent"]
        if not args.no_ground_truth:
            try:
                gt = ground_truth(oracle, rec.x, pred, args.n_directions,
                                  allow_high_dim=args.allow_high_dim)
                slack = 2.0 * gt.grid_error if gt.method is GroundTruthMethod.BRUTE_FORCE else 1e-6
                row.update(ground_truth=gt.min_distortion, method=gt.method.value,
                           gap=dist - gt.min_distortion,
                           dominated=dist >= gt.min_distortion - slack)
                ok = ok and row["dominated"]
            except (OptAttackError, ValueError) as exc:
                row.update(ground_truth=None, note=str(exc))
        row["ok"] = ok
        all_ok = all_ok and ok
        checks.append(row)
    with open(report_dir / "verify.jsonl", "w") as fh:
        for row in checks:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    for row in checks:
        print(" ".join(f"{k}={v}" for k, v in row.items()))
    print(f"verified {sum(c['ok'] for c in checks)}/{len(checks)} records")
    return EXIT_OK if all_ok else EXIT_PARTIAL


def cmd_gen_model(args):
    oracle = synthetic.build(args.kind, args.dim, args.seed)
    save_model(oracle.model, args.out, oracle.bounds)
    print(f"wrote {args.kind} model (d={oracle.dim}, k={oracle.n_classes}) to {args.out}")
    if args.dataset_out:
        rng = np.random.default_rng(args.seed)
        recs = synthetic.sample_records(oracle, args.n_samples, rng, -args.extent, args.extent)
        save_dataset(recs, args.dataset_out)
        print(f"wrote {len(recs)} labelled samples to {args.dataset_out}")
    return EXIT_OK


def _add_io(p):
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--dataset", required=True, help="CSV: label, features...")
    p.add_argument("--skip-header", action="store_true", help="ignore the first CSV line")


def _add_selection(p):
    p.add_argument("--mode", default="untargeted",
                   help="untargeted | targeted-next | targeted=T")
    p.add_argument("--n", type=int, default=10, help="number of examples")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="optattack", description=__doc__, allow_abbrev=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", allow_abbrev=False, help="run attacks over sampled dataset examples")
    _add_io(p)
    _add_selection(p)
    p.add_argument("--budget", type=int, default=10_000, help="query budget per example")
    p.add_argument("--beta", type=float, default=0.005, help="smoothing parameter")
    p.add_argument("--q", type=int, default=20, help="Gaussian samples per gradient estimate")
    p.add_argument("--tolerance", type=float, default=1e-3,
                   help="relative bisection tolerance during iterations")
    p.add_argument("--max-iterations", type=int, default=100_000)
    p.add_argument("--n-init-tries", type=int, default=10)
    p.add_argument("--trace-cap", type=int, default=200)
    p.add_argument("--out", help=f"report directory (default ${harness.REPORT_DIR_ENV} or ./reports)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--resume", action="store_true", help="skip examples already in the report")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("verify", allow_abbrev=False, help="re-check an attack report")
    _add_io(p)
    p.add_argument("--report", required=True, help="directory holding records.jsonl")
    p.add_argument("--n-directions", type=int, default=720)
    p.add_argument("--no-ground-truth", action="store_true")
    p.add_argument("--allow-high-dim", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ground-truth", allow_abbrev=False, help="closed-form or brute-force minimum distortion")
    _add_io(p)
    _add_selection(p)
    p.add_argument("--n-directions", type=int, default=720)
    p.add_argument("--allow-high-dim", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("gen-model", allow_abbrev=False, help="write a built-in synthetic model file")
    p.add_argument("--kind", required=True, choices=synthetic.KINDS)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset-out", help="also write labelled samples to this CSV")
    p.add_argument("--n-samples", type=int, default=200)
    p.add_argument("--extent", type=float, default=1.0, help="samples drawn from [-extent, extent]^d")
    p.set_defaults(func=cmd_gen_model)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OptAttackError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
