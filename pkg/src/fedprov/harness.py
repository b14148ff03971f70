"""Experiment matrix: local / centralized / federated models, with and
without downsampling, evaluated on the pooled global test set and the
less-sampled provincial test sets.

Pipeline order per seed, per province: split first, then chained-equation
imputation of train and test independently; downsampling (training data
only) after imputation; standardizer fit on the matrix actually fed to the
trainer. Local and centralized models carry a single standardizer. The
federated model has none: each provincial chunk of a test set is
standardized with that province's own training statistics, matching what a
deployed client would do.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .evaluation import (
    MetricsRow,
    calibration_curve,
    confusion_at_threshold,
    downsample_majority,
    precision_recall_f1,
    roc_auc,
)
from .fedavg import FedConfig, make_client, run_fedavg
from .impute import MiceConfig, mice_impute
from .models import (
    ParamVector,
    TrainConfig,
    predict_proba,
    train_logistic,
    train_mlp,
    unflatten,
)
from .reference import REFERENCE_CROSS, REFERENCE_GLOBAL
from .rng import derive_seed
from .schema import (
    FL_PROVINCES,
    LabeledMatrix,
    Standardizer,
    partition_by_province,
    split_train_test,
    standardize_apply,
    standardize_fit,
)
from .synth import GeneratorConfig, default_generator_config, generate_dataset

logger = logging.getLogger(__name__)

FAMILIES = ("logistic", "mlp")
STRATEGIES = ("none", "downsample")
CROSS_SOURCES = ("AB", "ON", "CML", "FL")
CROSS_TEST_SETS = ("BC", "MB", "NS", "QC")
GLOBAL = "GLOBAL"


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """Everything run_matrix needs; flat fields keep the config file simple."""

    generator: GeneratorConfig
    families: tuple[str, ...] = FAMILIES
    strategies: tuple[str, ...] = STRATEGIES
    seeds: tuple[int, ...] = (0,)
    split_fraction: float = 0.7
    mice_iterations: int = 10
    include_local: bool = True
    # trainer hyperparameters (shared by local / centralized / federated)
    lr_learning_rate: float = 0.1
    mlp_learning_rate: float = 0.001
    l1_C: float = 1.0
    l2_alpha: float = 0.01
    batch_size: int = 200
    epochs: int = 200
    # MLP epoch budget, matched to the federated effective budget
    # (rounds * n/K ~ 29 local passes): at the 200-epoch toolkit default the
    # net memorizes desk-scale synthetic cohorts and its test AUC degrades
    # well below the federated model's
    mlp_epochs: int = 30
    # federated protocol
    fed_participants: int = 2
    fed_rounds: int = 100
    fed_local_epochs: int = 1

    def __post_init__(self) -> None:
        if not self.families:
            raise ValidationError("at least one model family required")
        if not self.strategies:
            raise ValidationError("at least one resample strategy required")
        if not self.seeds:
            raise ValidationError("at least one replication seed required")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValidationError(f"unknown families: {sorted(unknown)}")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValidationError(f"unknown strategies: {sorted(unknown)}")

    def train_config(self, family: str, seed: int) -> TrainConfig:
        lr = self.lr_learning_rate if family == "logistic" else self.mlp_learning_rate
        return TrainConfig(
            learning_rate=lr,
            l1_C=self.l1_C,
            l2_alpha=self.l2_alpha,
            batch_size=self.batch_size,
            epochs=self.epochs if family == "logistic" else self.mlp_epochs,
            seed=seed,
        )


def default_experiment_config(**overrides) -> ExperimentConfig:
    generator = overrides.pop("generator", default_generator_config())
    return ExperimentConfig(generator=generator, **overrides)


# row key: (family, source, strategy, test_set); test_set is GLOBAL or a province
RowKey = tuple[str, str, str, str]


@dataclass(slots=True)
class ReportTable:
    """Per-seed metric rows plus recorded cell failures."""

    seeds: tuple[int, ...]
    rows: dict[RowKey, list[MetricsRow]] = field(default_factory=dict)
    failures: list[tuple[str, str]] = field(default_factory=list)

    def add(self, key: RowKey, row: MetricsRow) -> None:
        self.rows.setdefault(key, []).append(row)

    def mean_row(self, key: RowKey) -> MetricsRow:
        rows = self.rows[key]
        return MetricsRow(
            auc=float(np.mean([r.auc for r in rows])),
            f1=float(np.mean([r.f1 for r in rows])),
            precision=float(np.mean([r.precision for r in rows])),
            recall=float(np.mean([r.recall for r in rows])),
        )

    def std_row(self, key: RowKey) -> MetricsRow:
        rows = self.rows[key]
        return MetricsRow(
            auc=float(np.std([r.auc for r in rows])),
            f1=float(np.std([r.f1 for r in rows])),
            precision=float(np.std([r.precision for r in rows])),
            recall=float(np.std([r.recall for r in rows])),
        )


@dataclass(slots=True)
class MatrixResult:
    table: ReportTable
    # (family, strategy, source in {CML, FL}) -> (probs, labels) on the global
    # test set of the first seed, for calibration output
    calibration: dict[tuple[str, str, str], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True, slots=True)
class _SeedData:
    """Imputed per-province matrices for one replication seed (raw space)."""

    train: dict[str, LabeledMatrix]
    test: dict[str, LabeledMatrix]

    @property
    def provinces(self) -> list[str]:
        return [p for p in FL_PROVINCES if p in self.train]


def _prepare_seed(cfg: ExperimentConfig, seed: int) -> _SeedData:
    ds = generate_dataset(cfg.generator, seed)
    parts = partition_by_province(ds)
    mice = MiceConfig(n_iterations=cfg.mice_iterations)
    train: dict[str, LabeledMatrix] = {}
    test: dict[str, LabeledMatrix] = {}
    for prov in FL_PROVINCES:
        if prov not in parts:
            continue
        tr_ds, te_ds = split_train_test(
            parts[prov], cfg.split_fraction, derive_seed(seed, "split", prov)
        )
        train[prov] = mice_impute(tr_ds, mice)
        if len(te_ds.records):
            test[prov] = mice_impute(te_ds, mice)
    if not test:
        raise ValidationError("no test data; lower the split fraction")
    return _SeedData(train=train, test=test)


def _pool(matrices: list[LabeledMatrix]) -> LabeledMatrix:
    return LabeledMatrix(
        x=np.concatenate([m.x for m in matrices]),
        y=np.concatenate([m.y for m in matrices]),
    )


def _apply_strategy(
    data: LabeledMatrix, strategy: str, seed: int
) -> LabeledMatrix:
    if strategy == "none":
        return data
    return downsample_majority(data, seed)


@dataclass(frozen=True, slots=True)
class _SingleModel:
    """A trained model that travels with its own preprocessing."""

    model: object
    standardizer: Standardizer

    def probs(self, chunks: list[tuple[str, LabeledMatrix]]) -> np.ndarray:
        pooled = _pool([m for _, m in chunks])
        return predict_proba(self.model, standardize_apply(self.standardizer, pooled).x)


@dataclass(frozen=True, slots=True)
class _FederatedModel:
    """Aggregated parameters; preprocessing stays client-side per province."""

    params: ParamVector
    standardizers: dict[str, Standardizer]

    def probs(self, chunks: list[tuple[str, LabeledMatrix]]) -> np.ndarray:
        model = unflatten(self.params, self.params.layout)
        parts = []
        for prov, matrix in chunks:
            std = self.standardizers[prov]
            parts.append(predict_proba(model, standardize_apply(std, matrix).x))
        return np.concatenate(parts)


def _train_single(
    data: LabeledMatrix, family: str, train_cfg: TrainConfig
) -> _SingleModel:
    std = standardize_fit(data)
    standardized = standardize_apply(std, data)
    if family == "logistic":
        model = train_logistic(standardized, train_cfg)
    else:
        model = train_mlp(standardized, train_cfg)
    return _SingleModel(model=model, standardizer=std)


def _train_federated(
    prep: _SeedData, cfg: ExperimentConfig, family: str, strategy: str, seed: int
) -> _FederatedModel:
    clients = []
    standardizers: dict[str, Standardizer] = {}
    for idx, prov in enumerate(prep.provinces):
        local = _apply_strategy(
            prep.train[prov], strategy, derive_seed(seed, "downsample", prov, family)
        )
        std = standardize_fit(local)
        standardizers[prov] = std
        clients.append(
            make_client(prov, idx, standardize_apply(std, local), std,
                        seed=derive_seed(seed, "fed", family, strategy))
        )
    fed_cfg = FedConfig(
        family=family,
        n_participants=min(cfg.fed_participants, len(clients)),
        rounds=cfg.fed_rounds,
        local_epochs=cfg.fed_local_epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.lr_learning_rate if family == "logistic" else cfg.mlp_learning_rate,
        l1_C=cfg.l1_C,
        l2_alpha=cfg.l2_alpha,
        seed=derive_seed(seed, "fed", family, strategy),
    )
    params, _ = run_fedavg(clients, fed_cfg)
    return _FederatedModel(params=params, standardizers=standardizers)


def _metrics(probs: np.ndarray, labels: np.ndarray) -> MetricsRow:
    counts = confusion_at_threshold(probs, labels)
    row = precision_recall_f1(counts)
    return replace(row, auc=roc_auc(probs, labels))


def run_matrix(cfg: ExperimentConfig) -> MatrixResult:
    """Run the full experiment matrix; failures abort cells, not the run."""
    table = ReportTable(seeds=tuple(cfg.seeds))
    calibration: dict[tuple[str, str, str], tuple[np.ndarray, np.ndarray]] = {}

    for seed in cfg.seeds:
        prep = _prepare_seed(cfg, seed)
        provinces = prep.provinces
        test_provinces = [p for p in provinces if p in prep.test]
        global_chunks = [(p, prep.test[p]) for p in test_provinces]
        global_labels = np.concatenate([m.y for _, m in global_chunks])

        for family in cfg.families:
            for strategy in cfg.strategies:
                cell = f"seed={seed} family={family} strategy={strategy}"
                try:
                    sources: dict[str, _SingleModel | _FederatedModel] = {}
                    if cfg.include_local:
                        for prov in provinces:
                            local = _apply_strategy(
                                prep.train[prov], strategy,
                                derive_seed(seed, "downsample", prov, family),
                            )
                            sources[prov] = _train_single(
                                local, family,
                                cfg.train_config(family, derive_seed(seed, "train", family, prov)),
                            )
                    pooled_train = _pool([prep.train[p] for p in provinces])
                    pooled_train = _apply_strategy(
                        pooled_train, strategy, derive_seed(seed, "downsample", "CML", family)
                    )
                    sources["CML"] = _train_single(
                        pooled_train, family,
                        cfg.train_config(family, derive_seed(seed, "train", family, "CML")),
                    )
                    sources["FL"] = _train_federated(prep, cfg, family, strategy, seed)

                    for name, bundle in sources.items():
                        probs = bundle.probs(global_chunks)
                        table.add((family, name, strategy, GLOBAL),
                                  _metrics(probs, global_labels))
                        if name in ("CML", "FL") and seed == cfg.seeds[0]:
                            calibration[(family, strategy, name)] = (probs, global_labels)

                    for name in CROSS_SOURCES:
                        if name not in sources:
                            continue
                        for prov in CROSS_TEST_SETS:
                            if prov not in prep.test:
                                continue
                            chunk = [(prov, prep.test[prov])]
                            probs = sources[name].probs(chunk)
                            table.add((family, name, strategy, prov),
                                      _metrics(probs, prep.test[prov].y))
                except Exception as exc:  # cell-level containment
                    logger.exception("cell failed: %s", cell)
                    table.failures.append((cell, f"{type(exc).__name__}: {exc}"))

    return MatrixResult(table=table, calibration=calibration)


# ------------------------------------------------------------------ reports


def _fmt(value: float) -> str:
    return repr(float(value))


def _global_keys(table: ReportTable, family: str) -> list[RowKey]:
    order = list(FL_PROVINCES) + ["CML", "FL"]
    keys = []
    for source in order:
        for strategy in STRATEGIES:
            key = (family, source, strategy, GLOBAL)
            if key in table.rows:
                keys.append(key)
    return keys


def _cross_keys(table: ReportTable, family: str) -> list[RowKey]:
    keys = []
    for source in CROSS_SOURCES:
        for strategy in STRATEGIES:
            for test_set in CROSS_TEST_SETS:
                key = (family, source, strategy, test_set)
                if key in table.rows:
                    keys.append(key)
    return keys


def emit_report(table: ReportTable, out_dir: str | Path, formats=("csv", "markdown")) -> list[Path]:
    """Write per-family global and cross-test tables, plus seed variance.

    CSV files carry the synthetic results only; markdown adds the published
    reference values for side-by-side reading.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    unknown = set(formats) - {"csv", "markdown"}
    if unknown:
        raise ValidationError(f"unknown report formats: {sorted(unknown)}")
    if not table.rows:
        raise ValidationError("empty report table")
    written: list[Path] = []

    families = sorted({k[0] for k in table.rows})
    for family in families:
        gkeys = _global_keys(table, family)
        ckeys = _cross_keys(table, family)

        if "csv" in formats and gkeys:
            path = out_dir / f"report_{family}_global.csv"
            lines = ["source,strategy,auc,f1,precision,recall"]
            for key in gkeys:
                mean = table.mean_row(key)
                lines.append(
                    f"{key[1]},{key[2]},{_fmt(mean.auc)},{_fmt(mean.f1)},"
                    f"{_fmt(mean.precision)},{_fmt(mean.recall)}"
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)

        if "csv" in formats and ckeys:
            path = out_dir / f"report_{family}_crosstest.csv"
            lines = ["source,strategy,test_set,auc,f1,precision,recall"]
            for key in ckeys:
                mean = table.mean_row(key)
                lines.append(
                    f"{key[1]},{key[2]},{key[3]},{_fmt(mean.auc)},{_fmt(mean.f1)},"
                    f"{_fmt(mean.precision)},{_fmt(mean.recall)}"
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)

        if "csv" in formats:
            path = out_dir / f"report_{family}_seed_variance.csv"
            lines = [
                "source,strategy,test_set,auc_mean,auc_std,f1_mean,f1_std,"
                "precision_mean,precision_std,recall_mean,recall_std"
            ]
            for key in gkeys + ckeys:
                mean, std = table.mean_row(key), table.std_row(key)
                lines.append(
                    f"{key[1]},{key[2]},{key[3]},"
                    f"{_fmt(mean.auc)},{_fmt(std.auc)},{_fmt(mean.f1)},{_fmt(std.f1)},"
                    f"{_fmt(mean.precision)},{_fmt(std.precision)},"
                    f"{_fmt(mean.recall)},{_fmt(std.recall)}"
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)

        if "markdown" in formats and gkeys:
            path = out_dir / f"report_{family}_global.md"
            lines = [
                f"# {family}: global test set",
                "",
                "Synthetic-run means over seeds "
                f"{list(table.seeds)}; reference columns show the published"
                " benchmark values (different data; qualitative comparison only).",
                "",
                "| source | strategy | auc | f1 | precision | recall |"
                " ref_auc | ref_f1 | ref_precision | ref_recall |",
                "|---|---|---|---|---|---|---|---|---|---|",
            ]
            for key in gkeys:
                mean = table.mean_row(key)
                ref = REFERENCE_GLOBAL.get((family, key[1], key[2]))
                ref_cells = (
                    " | ".join(f"{v:.4f}" for v in ref) if ref else " | ".join(["-"] * 4)
                )
                lines.append(
                    f"| {key[1]} | {key[2]} | {mean.auc:.4f} | {mean.f1:.4f} |"
                    f" {mean.precision:.4f} | {mean.recall:.4f} | {ref_cells} |"
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)

        if "markdown" in formats and ckeys:
            path = out_dir / f"report_{family}_crosstest.md"
            lines = [
                f"# {family}: less-sampled regions' test sets",
                "",
                "| source | strategy | test set | auc | f1 | ref_auc | ref_f1 |",
                "|---|---|---|---|---|---|---|",
            ]
            for key in ckeys:
                mean = table.mean_row(key)
                ref = REFERENCE_CROSS.get((family, key[1], key[2], key[3]))
                ref_cells = " | ".join(f"{v:.4f}" for v in ref) if ref else "- | -"
                lines.append(
                    f"| {key[1]} | {key[2]} | {key[3]} | {mean.auc:.4f} |"
                    f" {mean.f1:.4f} | {ref_cells} |"
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)

    if table.failures:
        path = out_dir / "failures.txt"
        path.write_text(
            "\n".join(f"{cell}: {msg}" for cell, msg in table.failures) + "\n",
            encoding="utf-8",
        )
        written.append(path)
    return written


def emit_calibration(
    calibration: dict[tuple[str, str, str], tuple[np.ndarray, np.ndarray]],
    out_dir: str | Path,
    n_bins: int = 10,
) -> list[Path]:
    """Write calibration points CSVs and deterministic SVG reliability plots."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    plt.rcParams["svg.hashsalt"] = "fedprov"

    for (family, strategy, source) in sorted(calibration):
        probs, labels = calibration[(family, strategy, source)]
        curve = calibration_curve(probs, labels, n_bins=n_bins)
        stem = f"calibration_{family}_{strategy}_{source}"

        points = out_dir / f"{stem}.csv"
        lines = ["bin_lo,bin_hi,mean_pred,obs_frac,count"]
        for b in curve.bins:
            lines.append(
                f"{_fmt(b.lo)},{_fmt(b.hi)},{_fmt(b.mean_pred)},"
                f"{_fmt(b.obs_frac)},{b.count}"
            )
        lines.append(f"# ece,{_fmt(curve.ece)}")
        points.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(points)

        occupied = [b for b in curve.bins if b.count]
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.plot([0, 1], [0, 1], linestyle="--", color="gray", label="perfect")
        ax.plot(
            [b.mean_pred for b in occupied],
            [b.obs_frac for b in occupied],
            marker="o",
            label=f"{source} ({strategy})",
        )
        ax.set_xlabel("mean predicted probability")
        ax.set_ylabel("observed positive fraction")
        ax.set_title(f"{family} {source} {strategy} (ECE {curve.ece:.3f})")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.legend(loc="upper left")
        fig.tight_layout()
        plot = out_dir / f"{stem}.svg"
        fig.savefig(plot, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(plot)
    return written


# ---------------------------------------------------- results persistence


def save_results(result: MatrixResult, path: str | Path) -> None:
    """Persist per-seed rows as JSON so reports can be re-emitted later."""
    payload = {
        "seeds": list(result.table.seeds),
        "rows": [
            {
                "family": k[0],
                "source": k[1],
                "strategy": k[2],
                "test_set": k[3],
                "per_seed": [
                    {"auc": r.auc, "f1": r.f1, "precision": r.precision, "recall": r.recall}
                    for r in rows
                ],
            }
            for k, rows in sorted(result.table.rows.items())
        ],
        "failures": [list(f) for f in result.table.failures],
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_results(path: str | Path) -> ReportTable:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        table = ReportTable(seeds=tuple(payload["seeds"]))
        for row in payload["rows"]:
            key = (row["family"], row["source"], row["strategy"], row["test_set"])
            for r in row["per_seed"]:
                table.add(key, MetricsRow(**r))
        table.failures = [tuple(f) for f in payload.get("failures", [])]
        return table
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"malformed results file {path}: {exc}") from exc


# --------------------------------------------------- experiment config I/O


def experiment_config_to_dict(cfg: ExperimentConfig) -> dict:
    from .synth import generator_config_to_dict

    return {
        "generator": generator_config_to_dict(cfg.generator),
        "experiment": {
            "families": list(cfg.families),
            "strategies": list(cfg.strategies),
            "seeds": list(cfg.seeds),
            "split_fraction": cfg.split_fraction,
            "mice_iterations": cfg.mice_iterations,
            "include_local": cfg.include_local,
            "lr_learning_rate": cfg.lr_learning_rate,
            "mlp_learning_rate": cfg.mlp_learning_rate,
            "l1_C": cfg.l1_C,
            "l2_alpha": cfg.l2_alpha,
            "batch_size": cfg.batch_size,
            "epochs": cfg.epochs,
            "mlp_epochs": cfg.mlp_epochs,
            "fed_participants": cfg.fed_participants,
            "fed_rounds": cfg.fed_rounds,
            "fed_local_epochs": cfg.fed_local_epochs,
        },
    }


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    from .synth import generator_config_from_dict

    try:
        generator = (
            generator_config_from_dict(data["generator"])
            if "generator" in data
            else default_generator_config()
        )
        exp = dict(data.get("experiment", {}))
        for key in ("families", "strategies", "seeds"):
            if key in exp:
                exp[key] = tuple(exp[key])
        return ExperimentConfig(generator=generator, **exp)
    except TypeError as exc:
        raise ValidationError(f"malformed experiment config: {exc}") from exc
