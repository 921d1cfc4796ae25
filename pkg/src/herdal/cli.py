"""Command-line entry points.

Subcommands:
    run           one experiment (synthetic or imported pool)
    sweep         K x global-fraction sensitivity grid
    export-curve  aggregate a runs.csv into per-round mean/std (+ plot)
    oracle-check  brute-force oracle suite

Exit codes: 0 success, 2 configuration error, 3 budget error,
4 input-format error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import loop as loop_mod
from .acquisition import METHODS, AcquisitionConfig
from .errors import ConfigurationError, HerdalError
from .feature_pool import (StochasticFeatureProvider, SyntheticTaskSpec,
                           default_noise_scale, generate_synthetic,
                           import_features, load_replay_samples)
from .head import TrainConfig
from .kernel import KernelConfig
from .oracles import run_oracle_suite

SWEEP_K = (20, 50, 100)
SWEEP_FRACTIONS = (0.25, 0.4, 0.5)


def _parse_kv(text: str) -> dict:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigurationError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_synthetic(text: str) -> SyntheticTaskSpec:
    kv = _parse_kv(text)
    spec = SyntheticTaskSpec()
    for k, v in kv.items():
        if not hasattr(spec, k):
            raise ConfigurationError(f"unknown synthetic field {k!r}")
        cur = getattr(spec, k)
        setattr(spec, k, type(cur)(v) if not isinstance(cur, str) else v)
    spec.validate()
    return spec


def _parse_schedule(text: str) -> tuple[int, str]:
    # "switch@<round>:<method>"
    try:
        head, method = text.split(":", 1)
        if not head.startswith("switch@"):
            raise ValueError
        return int(head[len("switch@"):]), method
    except ValueError:
        raise ConfigurationError(
            f"schedule must look like switch@<round>:<method>, got {text!r}")


def _load_config_file(path) -> dict:
    """Flat key-value file mirroring CLI flags; '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"bad config line {line!r}")
            k, v = line.split("=", 1)
            values[k.strip().replace("-", "_")] = v.strip()
    return values


def _add_run_flags(p):
    p.add_argument("--pool", help="feature file to import")
    p.add_argument("--synthetic",
                   help="synthetic spec, e.g. n_images=4,image_side=16,"
                        "n_classes=3,feature_dim=2,label_geometry=voronoi")
    p.add_argument("--pool-seed", type=int, default=0,
                   help="seed for synthetic pool generation")
    p.add_argument("--method", choices=METHODS, default="edald")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--budget", type=int)
    p.add_argument("--budget-frac", type=float,
                   help="budget = max(1, round(frac * n_images))")
    p.add_argument("--K", dest="k_per_image", type=int, default=50)
    p.add_argument("--global-frac", type=float, default=0.5)
    p.add_argument("--mc-samples", type=int, default=5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--dropout-rate", type=float, default=0.5)
    p.add_argument("--noise", type=float,
                   help="gaussian provider noise scale; default 0.1 x median "
                        "feature norm; 0 = deterministic provider")
    p.add_argument("--replay", help="companion samples file (replay provider)")
    p.add_argument("--seeds", default="0",
                   help="comma-separated experiment seeds")
    p.add_argument("--schedule", help="switch@<round>:<method>")
    p.add_argument("--no-stage1", action="store_true",
                   help="score all unlabeled pixels (one-stage baseline)")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--config", help="flat key=value config file; CLI wins")
    p.add_argument("--out", required=True, help="output run directory")


def _apply_config_file(args, argv):
    if not args.config:
        return args
    values = _load_config_file(args.config)
    if "K" in values:  # the flag is --K, the attribute is k_per_image
        values["k_per_image"] = values.pop("K")
    argv_keys = {a.lstrip("-").replace("-", "_").split("=")[0]
                 for a in argv if a.startswith("--")}
    argv_keys.discard("K")
    if any(a == "--K" or a.startswith("--K=") for a in argv):
        argv_keys.add("k_per_image")
    for k, v in values.items():
        if k in argv_keys or not hasattr(args, k):
            continue  # CLI overrides file; unknown keys rejected below
        cur = getattr(args, k)
        # Flags whose default is None still need a numeric type.
        none_types = dict(budget=int, budget_frac=float, noise=float)
        if isinstance(cur, bool):
            setattr(args, k, v.lower() in ("1", "true", "yes"))
        elif cur is None:
            setattr(args, k, none_types.get(k, str)(v))
        elif isinstance(cur, str):
            setattr(args, k, v)
        else:
            setattr(args, k, type(cur)(v))
    unknown = set(values) - set(vars(args))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return args


def _build_pool(args):
    if bool(args.pool) == bool(args.synthetic):
        raise ConfigurationError("give exactly one of --pool / --synthetic")
    if args.pool:
        return import_features(args.pool)
    return generate_synthetic(_parse_synthetic(args.synthetic), args.pool_seed)


def _build_provider(args, pool):
    if args.replay:
        return StochasticFeatureProvider("replay",
                                         samples=load_replay_samples(args.replay))
    noise = args.noise if args.noise is not None else default_noise_scale(pool)
    if noise == 0:
        return StochasticFeatureProvider("deterministic")
    return StochasticFeatureProvider("gaussian", noise=noise)


def _build_round_config(args, pool):
    budget = args.budget
    if budget is None and args.budget_frac is not None:
        budget = max(1, round(args.budget_frac * len(pool.image_index)))
    schedule = _parse_schedule(args.schedule) if args.schedule else None
    return loop_mod.RoundConfig(
        rounds=args.rounds,
        budget=budget,
        k_per_image=args.k_per_image,
        global_fraction=args.global_frac,
        acquisition=AcquisitionConfig(
            method=args.method, mc_samples=args.mc_samples,
            power_beta=args.beta, dropout_rate=args.dropout_rate),
        stage1_enabled=not args.no_stage1,
        schedule=schedule,
        train=TrainConfig(hidden=args.hidden,
                          max_iterations=args.max_iterations),
        kernel=KernelConfig(),
    )


def cmd_run(args) -> int:
    args = _apply_config_file(args, args.raw_argv)
    pool = _build_pool(args)
    provider = _build_provider(args, pool)
    config = _build_round_config(args, pool)
    seeds = [int(s) for s in str(args.seeds).split(",") if s.strip()]
    result = loop_mod.run_experiment(pool, provider, config, seeds,
                                     out_dir=args.out, resume=args.resume)
    for row in result["aggregate"]:
        print("round %2d  labeled %4d  acc %.4f ± %.4f  miou %.4f ± %.4f" % (
            row["round"], row["labeled_count"],
            row["mean_pixel_accuracy"], row["std_pixel_accuracy"],
            row["mean_miou"], row["std_miou"]))
    return 0


def cmd_sweep(args) -> int:
    args = _apply_config_file(args, args.raw_argv)
    pool = _build_pool(args)
    provider = _build_provider(args, pool)
    seeds = [int(s) for s in str(args.seeds).split(",") if s.strip()]
    summary = []
    for k in SWEEP_K:
        for frac in SWEEP_FRACTIONS:
            args.k_per_image = k
            args.global_frac = frac
            config = _build_round_config(args, pool)
            sub = os.path.join(args.out, f"K{k}_frac{frac}")
            result = loop_mod.run_experiment(pool, provider, config, seeds,
                                             out_dir=sub, resume=args.resume)
            final = result["aggregate"][-1]
            summary.append((k, frac, final))
            print("K=%3d frac=%.2f  final acc %.4f ± %.4f  miou %.4f ± %.4f" % (
                k, frac, final["mean_pixel_accuracy"],
                final["std_pixel_accuracy"], final["mean_miou"],
                final["std_miou"]))
    with open(os.path.join(args.out, "sweep.csv"), "w", encoding="utf-8",
              newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "global_fraction", "mean_pixel_accuracy",
                    "std_pixel_accuracy", "mean_miou", "std_miou"])
        for k, frac, final in summary:
            w.writerow([k, frac, "%.6f" % final["mean_pixel_accuracy"],
                        "%.6f" % final["std_pixel_accuracy"],
                        "%.6f" % final["mean_miou"],
                        "%.6f" % final["std_miou"]])
    return 0


def cmd_export_curve(args) -> int:
    from .errors import FormatError

    records: dict[int, list[loop_mod.MetricsRecord]] = {}
    with open(args.input, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                set(loop_mod.CSV_COLUMNS) - set(reader.fieldnames):
            raise FormatError("input CSV missing expected columns")
        for row in reader:
            try:
                rec = loop_mod.MetricsRecord(
                    round=int(row["round"]),
                    pixel_accuracy=float(row["pixel_accuracy"]),
                    miou=float(row["miou"]),
                    per_class_iou=[],
                    labeled_count=int(row["labeled_count"]),
                    wall_time=float(row["wall_time_s"]))
            except (ValueError, KeyError) as e:
                raise FormatError(f"bad CSV row: {e}") from e
            records.setdefault(int(row["seed"]), []).append(rec)
    rows = loop_mod.aggregate_rounds(records)
    loop_mod.write_aggregate_csv(args.output, rows)
    print(f"wrote {len(rows)} aggregate rows to {args.output}")
    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        r = [row["round"] for row in rows]
        acc = [row["mean_pixel_accuracy"] for row in rows]
        std = [row["std_pixel_accuracy"] for row in rows]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.errorbar(r, acc, yerr=std, marker="o", capsize=3,
                    label="pixel accuracy")
        ax.errorbar(r, [row["mean_miou"] for row in rows],
                    yerr=[row["std_miou"] for row in rows], marker="s",
                    capsize=3, label="mIoU")
        ax.set_xlabel("round")
        ax.set_ylabel("metric")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)
        print(f"wrote plot to {args.plot}")
    return 0


def cmd_oracle_check(args) -> int:
    return 0 if run_oracle_suite(seed=args.seed) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="herdal",
                                     description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment")
    _add_run_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep",
                             help="K x global-fraction sensitivity grid")
    _add_run_flags(p_sweep)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_exp = sub.add_parser("export-curve",
                           help="aggregate runs.csv into per-round mean/std")
    p_exp.add_argument("--input", required=True, help="runs.csv path")
    p_exp.add_argument("--output", required=True, help="aggregate CSV path")
    p_exp.add_argument("--plot", help="optional plot image path")
    p_exp.set_defaults(fn=cmd_export_curve)

    p_ora = sub.add_parser("oracle-check",
                           help="run the brute-force oracle suite")
    p_ora.add_argument("--seed", type=int, default=0)
    p_ora.set_defaults(fn=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.raw_argv = argv
    try:
        return args.fn(args)
    except HerdalError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
