"""Command line entry point: ``rlpar {synth,train,eval,metrics,sweep-rho,ablation}``.

Exit codes: 0 success, 2 validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .dataio import (
    FeatureScaler, export_predictions, generate_synthetic, is_predictions_file, load_dataset,
    parse_synth_spec, read_predictions, save_dataset,
)
from .errors import ValidationError
from .experiments import parse_rho_range, run_ablation, sweep_rho
from .metrics import evaluate, format_report, summary_lines
from .schema import EXAMPLE_CONFIGS, AttributeSchema, GroupConfig, example_config_text, load_group_config
from .trainer import TrainConfig, TrainedModel, train

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("rlpar")


def _groups_for(arg: str | None, schema: AttributeSchema) -> GroupConfig:
    if arg is None:
        return GroupConfig.single(schema.L)
    if arg in EXAMPLE_CONFIGS and not Path(arg).exists():
        return load_group_config(example_config_text(arg), schema)
    path = Path(arg)
    if not path.is_file():
        raise ValidationError(f"group config not found: {path}")
    return load_group_config(path.read_text(encoding="utf-8"), schema)


def _add_train_options(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--groups", help="group config file, or one of " + ", ".join(EXAMPLE_CONFIGS))
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch", type=int, default=d.batch_size)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--eps-start", type=float, default=d.eps_start)
    p.add_argument("--eps-end", type=float, default=d.eps_end)
    p.add_argument("--replay", type=int, default=d.replay_capacity)
    p.add_argument("--target-update", type=int, default=d.target_update)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--workers", type=int, default=1, help="train groups on this many threads")
    p.add_argument("--no-figures", action="store_true")


def _config(args, **overrides) -> TrainConfig:
    kw = dict(
        epochs=args.epochs, batch_size=args.batch, gamma=args.gamma, eps_start=args.eps_start,
        eps_end=args.eps_end, replay_capacity=args.replay, target_update=args.target_update,
        lr=args.lr, seed=args.seed, workers=args.workers,
    )
    kw.update(overrides)
    return TrainConfig(**kw)


def cmd_synth(args) -> int:
    spec, n_test = parse_synth_spec(Path(args.spec).read_text(encoding="utf-8"))
    out = Path(args.out)
    tr = generate_synthetic(spec, "train")
    tr.scaler = FeatureScaler.fit(tr.features)
    save_dataset(tr, out / "train.manifest")
    print(f"wrote {out / 'train.manifest'} (N={tr.N}, F={tr.F}, L={tr.L})")
    if n_test > 0:
        te = generate_synthetic(spec, "test", n=n_test)
        te.scaler = tr.scaler
        save_dataset(te, out / "test.manifest")
        print(f"wrote {out / 'test.manifest'} (N={te.N})")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = load_dataset(args.dataset)
    groups = _groups_for(args.groups, ds.schema)
    cfg = _config(args, reward_mode=args.reward, rho_override=args.rho)
    model, report = train(ds, groups, cfg)
    out = Path(args.out)
    model.save(out)
    (out / "train.log").write_text(report.log_text())
    (out / "train.summary").write_text(report.summary_text())
    if report and not args.no_figures:
        from .plots import plot_training
        plot_training(report, out / "training.png")
    sys.stdout.write(report.log_text())
    print(f"saved {len(model.agents)} group agents to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = TrainedModel.load(args.ckpt_dir)
    ds = load_dataset(args.dataset, model.schema)
    pred = model.predict_dataset(ds)
    out = Path(args.report)
    out.mkdir(parents=True, exist_ok=True)
    export_predictions(ds, pred, out / "predictions.txt")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = evaluate(ds.labels, pred, ds.names)
    for w in caught:
        log.warning("%s", w.message)
    text = format_report(report, ds.names)
    (out / "metrics.txt").write_text(text)
    (out / "metrics.summary").write_text(summary_lines(report, ds.names))
    if not args.no_figures:
        from .plots import plot_attribute_accuracy
        plot_attribute_accuracy(report, ds.names, out / "attributes.png")
    sys.stdout.write(text)
    return EXIT_OK


def _label_matrix(path: str):
    if is_predictions_file(path):
        names, ids, labels = read_predictions(path)
        return names, ids, labels
    ds = load_dataset(path)
    return ds.names, ds.ids, ds.labels


def cmd_metrics(args) -> int:
    tnames, tids, truth = _label_matrix(args.truth)
    pnames, pids, pred = _label_matrix(args.pred)
    if tnames != pnames:
        raise ValidationError("truth and prediction attribute names differ")
    if tids != pids:
        raise ValidationError("truth and prediction sample ids differ")
    report = evaluate(truth, pred, tnames)
    text = format_report(report, tnames)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(summary_lines(report, tnames))
    return EXIT_OK


def _select_group(groups: GroupConfig, key: str) -> int:
    if key.isdigit():
        g = int(key)
        if g >= len(groups):
            raise ValidationError(f"group index {g} out of range")
        return g
    if key not in groups.names:
        raise ValidationError(f"no group named {key!r}; have {groups.names}")
    return groups.names.index(key)


def cmd_sweep(args) -> int:
    tr = load_dataset(args.train)
    te = load_dataset(args.test, tr.schema)
    groups = _groups_for(args.groups, tr.schema)
    g = _select_group(groups, args.group)
    rhos = parse_rho_range(args.rho)
    cfg = _config(args)
    result = sweep_rho(tr, te, groups.indices(g), rhos, cfg, group_name=groups.names[g])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = result.table()
    (out / "rho_sweep.tsv").write_text(table)
    if not args.no_figures:
        from .plots import plot_rho_sweep
        plot_rho_sweep(result, out / "rho_sweep.png")
    sys.stdout.write(table)
    if result.rho_one_matches_basic is not None:
        print(f"rho=1 reproduces basic reward step for step: {result.rho_one_matches_basic}")
    return EXIT_OK


def cmd_ablation(args) -> int:
    tr = load_dataset(args.train)
    te = load_dataset(args.test, tr.schema)
    groups = _groups_for(args.groups, tr.schema)
    result = run_ablation(tr, te, groups, _config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.tsv").write_text(result.table())
    if not args.no_figures:
        from .plots import plot_ablation
        plot_ablation(result, out / "ablation.png")
    sys.stdout.write(result.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlpar", description="Grouped deep Q-learning for multi-label attribute recognition.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic train/test dataset")
    p.add_argument("--spec", required=True, help="key = value synth spec file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one agent per attribute group")
    p.add_argument("--dataset", required=True, help="dataset manifest")
    p.add_argument("--reward", choices=("basic", "gor"), default="basic")
    p.add_argument("--rho", type=float, default=None, help="force this reward magnitude in gor mode")
    p.add_argument("--out", required=True, help="checkpoint directory")
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="predict a dataset and report metrics")
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--report", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("metrics", help="score a predictions file against ground truth")
    p.add_argument("--truth", required=True, help="dataset manifest or predictions file")
    p.add_argument("--pred", required=True, help="predictions file")
    p.add_argument("--out", help="write key=value summary here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep-rho", help="train one group across reward magnitudes")
    p.add_argument("--rho", default="0.05:1.0:0.05", help="start:stop:step or comma list")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--group", default="0", help="group name or index")
    p.add_argument("--out", required=True)
    _add_train_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablation", help="baseline vs grouping vs grouping + group reward")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    _add_train_options(p)
    p.set_defaults(func=cmd_ablation)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
