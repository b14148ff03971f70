"""Command-line interface.

Subcommands: generate, impute, train-local, train-central, train-fed,
evaluate, report, run-matrix. Exit codes: 0 success, 1 validation error,
2 runtime failure. FEDPROV_OUT sets the default output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .evaluation import calibration_curve, confusion_at_threshold, precision_recall_f1, roc_auc
from .fedavg import FedConfig, make_client, run_fedavg
from .harness import (
    default_experiment_config,
    emit_calibration,
    emit_report,
    experiment_config_from_dict,
    load_results,
    run_matrix,
    save_results,
)
from .impute import MiceConfig, mice_impute
from .models import (
    TrainConfig,
    flatten,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
    train_logistic,
    train_mlp,
    unflatten,
)
from .schema import (
    FL_PROVINCES,
    Standardizer,
    dataset_to_matrix,
    partition_by_province,
    read_csv,
    standardize_apply,
    standardize_fit,
    write_csv,
)
from .synth import (
    default_generator_config,
    generate_dataset,
    generator_config_from_dict,
)

logger = logging.getLogger(__name__)


def _default_out() -> str:
    return os.environ.get("FEDPROV_OUT", ".")


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc


def _generator_from_args(args) -> "GeneratorConfig":
    if args.config:
        data = _load_json(args.config)
        cfg = generator_config_from_dict(data.get("generator", data))
    else:
        cfg = default_generator_config()
    if getattr(args, "total", None):
        from .synth import default_province_profiles

        cfg = type(cfg)(
            features=cfg.features,
            missingness=cfg.missingness,
            profiles=default_province_profiles(args.total),
            risk_coeffs=cfg.risk_coeffs,
            risk_intercept=cfg.risk_intercept,
        )
    return cfg


def _cmd_generate(args) -> int:
    cfg = _generator_from_args(args)
    ds = generate_dataset(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    parts = partition_by_province(ds)
    for prov in FL_PROVINCES:
        if prov in parts:
            path = out / f"cohort_{prov}.csv"
            write_csv(parts[prov], path)
            print(f"wrote {path} ({len(parts[prov].records)} records)")
    return 0


def _cmd_impute(args) -> int:
    ds = read_csv(args.input)
    cfg = MiceConfig(n_iterations=args.iterations, noise=args.noise, seed=args.seed)
    matrix = mice_impute(ds, cfg)
    # write back as records, preserving labels and province tags; imputed
    # values are clamped into the schema's valid ranges (regression or
    # residual noise can step slightly outside them)
    from dataclasses import replace

    from .schema import FEATURE_COLUMNS, FEATURE_RANGES, OPTIONAL_COLUMNS, Dataset

    records = []
    for i, rec in enumerate(ds.records):
        fills = {}
        for name in OPTIONAL_COLUMNS:
            if getattr(rec, name) is None:
                lo, hi = FEATURE_RANGES[name]
                fills[name] = float(np.clip(matrix.x[i, FEATURE_COLUMNS.index(name)], lo, hi))
        records.append(replace(rec, **fills) if fills else rec)
    write_csv(Dataset(records=tuple(records), provenance=ds.provenance), args.out)
    print(f"wrote {args.out} ({len(records)} records, no missing values)")
    return 0


def _complete_matrix(path: str):
    ds = read_csv(path)
    try:
        return dataset_to_matrix(ds), ds
    except ValidationError:
        raise ValidationError(
            f"{path} contains missing values; run `fedprov impute` first"
        ) from None


def _train_config_from_args(args) -> TrainConfig:
    lr = args.learning_rate
    if lr is None:
        lr = 0.001 if args.family == "mlp" else 0.1
    return TrainConfig(
        learning_rate=lr,
        l1_C=args.l1_C,
        l2_alpha=args.l2_alpha,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )


def _cmd_train_single(args) -> int:
    data, _ = _complete_matrix(args.train)
    cfg = _train_config_from_args(args)
    std = standardize_fit(data)
    standardized = standardize_apply(std, data)
    if args.family == "logistic":
        model = train_logistic(standardized, cfg)
    else:
        model = train_mlp(standardized, cfg)
    save_checkpoint(args.out, flatten(model), std)
    print(f"wrote {args.out}")
    return 0


def _cmd_train_fed(args) -> int:
    data_dir = Path(args.data_dir)
    clients = []
    standardizers = {}
    index = 0
    for prov in FL_PROVINCES:
        path = data_dir / f"cohort_{prov}.csv"
        if not path.exists():
            continue
        data, _ = _complete_matrix(str(path))
        if args.downsample:
            from .evaluation import downsample_majority
            from .rng import derive_seed

            data = downsample_majority(data, derive_seed(args.seed, "downsample", prov))
        std = standardize_fit(data)
        standardizers[prov] = std
        clients.append(make_client(prov, index, standardize_apply(std, data), std, args.seed))
        index += 1
    if not clients:
        raise ValidationError(f"no cohort_<PROVINCE>.csv files found in {data_dir}")

    eval_fn = None
    if args.eval_test:
        eval_matrix, _ = _complete_matrix(args.eval_test)
        # per-client standardization needs province provenance; for the
        # round-snapshot AUC the eval set's own pooled statistics suffice
        eval_std = standardize_fit(eval_matrix)
        eval_x = standardize_apply(eval_std, eval_matrix).x

        def eval_fn(pv):
            model = unflatten(pv, pv.layout)
            return {"auc": roc_auc(predict_proba(model, eval_x), eval_matrix.y)}

    cfg = FedConfig(
        family=args.family,
        n_participants=min(args.participants, len(clients)),
        rounds=args.rounds,
        local_epochs=args.local_epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        l1_C=args.l1_C,
        l2_alpha=args.l2_alpha,
        seed=args.seed,
        eval_every=args.eval_every if args.eval_test else 0,
    )
    params, history = run_fedavg(clients, cfg, eval_fn=eval_fn)
    save_checkpoint(args.out, params, None)
    sidecar = Path(args.out).with_suffix(Path(args.out).suffix + ".standardizers.json")
    sidecar.write_text(
        json.dumps(
            {
                prov: {"mean": s.mean.tolist(), "std": s.std.tolist()}
                for prov, s in sorted(standardizers.items())
            },
            indent=2, sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    history_path = args.history or str(Path(args.out).with_suffix(".history.csv"))
    lines = ["round,selected,auc"]
    for rec in history.rounds:
        auc = "" if not rec.metrics else repr(rec.metrics.get("auc", ""))
        lines.append(f"{rec.round_no},{'|'.join(rec.selected)},{auc}")
    Path(history_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out}, {sidecar}, {history_path}")
    return 0


def _cmd_evaluate(args) -> int:
    params, embedded_std = load_checkpoint(args.checkpoint)
    test_matrix, test_ds = _complete_matrix(args.test)
    model = unflatten(params, params.layout)

    if args.standardizers:
        sidecar = _load_json(args.standardizers)
        stds = {
            prov: Standardizer(
                mean=np.asarray(block["mean"], dtype=float),
                std=np.asarray(block["std"], dtype=float),
            )
            for prov, block in sidecar.items()
        }
        provinces = np.array([rec.province for rec in test_ds.records])
        x_std = np.empty_like(test_matrix.x)
        for prov in np.unique(provinces):
            if prov not in stds:
                raise ValidationError(f"no standardizer for province {prov!r}")
            mask = provinces == prov
            x_std[mask] = (test_matrix.x[mask] - stds[prov].mean) / stds[prov].std
    elif embedded_std is not None:
        x_std = standardize_apply(embedded_std, test_matrix).x
    else:
        logger.warning("checkpoint has no standardizer; evaluating on raw features")
        x_std = test_matrix.x

    probs = predict_proba(model, x_std)
    try:
        auc = roc_auc(probs, test_matrix.y)
    except UndefinedMetricError:
        raise ValidationError("test set contains a single class; AUC undefined") from None
    row = precision_recall_f1(confusion_at_threshold(probs, test_matrix.y, args.threshold))
    payload = {
        "auc": auc, "f1": row.f1, "precision": row.precision, "recall": row.recall,
    }
    if args.format == "json":
        text = json.dumps(payload, sort_keys=True)
    else:
        text = "auc,f1,precision,recall\n" + ",".join(
            repr(payload[k]) for k in ("auc", "f1", "precision", "recall")
        )
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)

    if args.calibration:
        curve = calibration_curve(probs, test_matrix.y, n_bins=args.bins)
        lines = ["bin_lo,bin_hi,mean_pred,obs_frac,count"]
        for b in curve.bins:
            lines.append(
                f"{b.lo!r},{b.hi!r},{b.mean_pred!r},{b.obs_frac!r},{b.count}"
            )
        lines.append(f"# ece,{curve.ece!r}")
        Path(args.calibration).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.calibration}")
    return 0


def _cmd_report(args) -> int:
    table = load_results(args.results)
    formats = tuple(args.format.split(","))
    written = emit_report(table, args.out, formats)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_run_matrix(args) -> int:
    if args.config:
        cfg = experiment_config_from_dict(_load_json(args.config))
    else:
        cfg = default_experiment_config()
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seeds=(args.seed,))
    result = run_matrix(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = emit_report(result.table, out)
    written += emit_calibration(result.calibration, out)
    save_results(result, out / "results.json")
    written.append(out / "results.json")
    for path in written:
        print(f"wrote {path}")
    if result.table.failures:
        print(f"{len(result.table.failures)} cell(s) failed; see failures.txt", file=sys.stderr)
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=("logistic", "mlp"), required=True)
    p.add_argument("--learning-rate", type=float, default=None,
                   help="default: 0.1 logistic, 0.001 mlp")
    p.add_argument("--l1-C", dest="l1_C", type=float, default=1.0)
    p.add_argument("--l2-alpha", dest="l2_alpha", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedprov",
        description="Seeded simulator for cross-province federated diabetes prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write per-province synthetic cohort CSVs")
    p.add_argument("--config", help="JSON config (generator section or bare generator)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=_default_out(), help="output directory")
    p.add_argument("--total", type=int, help="rescale default province sizes to this total")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("impute", help="fill missing cells in a cohort CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--noise", action="store_true", help="stochastic residual draws")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_impute)

    for name, help_text in (
        ("train-local", "train one province's model from its CSV"),
        ("train-central", "train the pooled centralized model from a CSV"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--train", required=True, help="complete (imputed) training CSV")
        p.add_argument("--out", required=True, help="checkpoint path")
        p.add_argument("--epochs", type=int, default=200)
        _add_train_flags(p)
        p.set_defaults(func=_cmd_train_single)

    p = sub.add_parser("train-fed", help="run federated averaging over province CSVs")
    p.add_argument("--data-dir", required=True,
                   help="directory with complete cohort_<PROVINCE>.csv files")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--participants", type=int, default=2)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--local-epochs", type=int, default=1)
    p.add_argument("--downsample", action="store_true",
                   help="downsample each client's training data")
    p.add_argument("--eval-test", help="complete CSV for per-round AUC snapshots")
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--history", help="round-history CSV path")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train_fed)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a test CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True, help="complete (imputed) test CSV")
    p.add_argument("--out", help="write metrics here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--standardizers",
                   help="per-province standardizer JSON (for federated checkpoints)")
    p.add_argument("--calibration", help="also write calibration points CSV here")
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="re-emit tables from saved results.json")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=_default_out())
    p.add_argument("--format", default="csv,markdown")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run-matrix", help="run the full experiment matrix")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="override the config's seed list")
    p.add_argument("--out", default=_default_out())
    p.set_defaults(func=_cmd_run_matrix)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        logger.exception("command failed")
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
