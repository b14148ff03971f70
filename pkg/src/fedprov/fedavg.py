"""Federated averaging over simulated provincial clients.

Each round: select n of the K clients uniformly at random, run E local
epochs on each (the same step rule as the family's centralized trainer),
then average the returned parameter vectors elementwise with equal weights
and broadcast. Only flat parameter vectors cross the client boundary.

Per-client RNG substreams and (for the MLP) per-client persistent Adam
state make results independent of execution order within a round, and make
a single-client run reproduce centralized training exactly.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .models import (
    AdamState,
    LogisticModel,
    TrainConfig,
    ParamVector,
    flatten,
    fresh_adam_state,
    init_params,
    lr_run_epochs,
    mlp_run_epochs,
    unflatten,
)
from .rng import substream
from .schema import LabeledMatrix, Standardizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class FedConfig:
    """Protocol parameters: participants per round, rounds, local schedule.

    learning_rate None selects the family default (0.001 for the MLP, 0.1
    for logistic regression).
    """

    family: str
    n_participants: int = 2
    rounds: int = 100
    local_epochs: int = 1
    batch_size: int = 200
    learning_rate: float | None = None
    l1_C: float = 1.0
    l2_alpha: float = 0.01
    seed: int = 0
    eval_every: int = 0  # 0 disables per-round metric snapshots
    plateau_tol: float | None = None  # optional stop: AUC gain < tol over plateau_rounds
    plateau_rounds: int = 20

    def __post_init__(self) -> None:
        if self.family not in ("logistic", "mlp"):
            raise ValidationError(f"unknown model family {self.family!r}")
        if self.n_participants < 1:
            raise ValidationError("n_participants must be >= 1")
        if self.rounds < 1:
            raise ValidationError("rounds must be >= 1")
        if self.local_epochs < 1:
            raise ValidationError("local_epochs must be >= 1")
        if self.plateau_tol is not None and self.eval_every != 1:
            raise ValidationError("plateau stop requires eval_every=1")

    def effective_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 0.001 if self.family == "mlp" else 0.1

    def local_train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.effective_learning_rate(),
            l1_C=self.l1_C,
            l2_alpha=self.l2_alpha,
            batch_size=self.batch_size,
            seed=self.seed,
        )


@dataclass(slots=True)
class ClientState:
    """One data-holding participant. Its matrix never leaves this object."""

    province: str
    index: int
    data: LabeledMatrix | None
    standardizer: Standardizer | None
    rng: np.random.Generator
    adam: AdamState | None = None

    @property
    def is_empty(self) -> bool:
        return self.data is None or self.data.n == 0


def make_client(
    province: str,
    index: int,
    data: LabeledMatrix | None,
    standardizer: Standardizer | None,
    seed: int,
) -> ClientState:
    """Client with its own shuffle substream derived from (seed, index).

    Index 0 shares its stream with the centralized trainers, which is what
    makes single-client federated runs equal centralized training.
    """
    return ClientState(
        province=province,
        index=index,
        data=data,
        standardizer=standardizer,
        rng=substream(seed, "shuffle", index),
    )


@dataclass(frozen=True, slots=True)
class RoundRecord:
    round_no: int
    selected: tuple[str, ...]
    params_checksum: str
    metrics: dict[str, float] | None = None


@dataclass(slots=True)
class RoundHistory:
    rounds: list[RoundRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rounds)


def select_participants(total: int, n: int, rng: np.random.Generator) -> list[int]:
    """Uniformly random n-subset of client indices, returned sorted."""
    if n < 1:
        raise ValidationError("must select at least one participant")
    if n > total:
        raise ValidationError(f"cannot select {n} of {total} clients")
    return sorted(int(i) for i in rng.choice(total, size=n, replace=False))


def client_update(global_params: ParamVector, client: ClientState, cfg: FedConfig) -> ParamVector:
    """Run E local epochs from the broadcast parameters; return the new vector.

    The global vector is not modified. MLP clients keep their Adam moments
    across rounds (only parameters are exchanged).
    """
    if client.is_empty:
        raise ValidationError(f"client {client.province} has no data")
    if global_params.layout.family != cfg.family:
        raise ValidationError(
            f"parameter layout {global_params.layout.family!r} does not match "
            f"configured family {cfg.family!r}"
        )
    train_cfg = cfg.local_train_config()
    if cfg.family == "logistic":
        model = unflatten(global_params, global_params.layout)
        assert isinstance(model, LogisticModel)
        w, b, _ = lr_run_epochs(
            model.w, model.b, client.data, train_cfg, client.rng, cfg.local_epochs
        )
        return flatten(LogisticModel(w=w, b=b))
    if client.adam is None:
        client.adam = fresh_adam_state(global_params.values.size)
    params, client.adam, _ = mlp_run_epochs(
        global_params, client.adam, client.data, train_cfg, client.rng, cfg.local_epochs
    )
    return params


def aggregate(updates: list[ParamVector]) -> ParamVector:
    """Elementwise arithmetic mean, summed in the order given.

    Callers pass updates in client-index order so the reduction order is
    fixed regardless of execution schedule.
    """
    if not updates:
        raise ValidationError("cannot aggregate an empty update list")
    layout = updates[0].layout
    for u in updates[1:]:
        if u.layout != layout:
            raise ValidationError("aggregation requires identical layouts")
    if all(np.array_equal(u.values, updates[0].values) for u in updates[1:]):
        # mean of identical vectors is that vector, bit for bit
        return ParamVector(values=updates[0].values.copy(), layout=layout)
    stacked = np.stack([u.values for u in updates])
    return ParamVector(values=np.add.reduce(stacked, axis=0) / len(updates), layout=layout)


def _checksum(params: ParamVector) -> str:
    return hashlib.sha256(np.ascontiguousarray(params.values, "<f8").tobytes()).hexdigest()


def run_fedavg(
    clients: list[ClientState],
    cfg: FedConfig,
    eval_fn=None,
) -> tuple[ParamVector, RoundHistory]:
    """Full protocol: init, then T rounds of select / update / average.

    eval_fn, when given, maps a ParamVector to a metrics dict; it is called
    every cfg.eval_every rounds (and drives the optional plateau stop).
    Empty clients can be selected but are skipped with a warning.
    """
    if not clients:
        raise ValidationError("at least one client required")
    if all(c.is_empty for c in clients):
        raise ValidationError("all clients are empty")
    if cfg.n_participants > len(clients):
        raise ValidationError(
            f"n_participants={cfg.n_participants} exceeds {len(clients)} clients"
        )
    if cfg.eval_every and eval_fn is None:
        raise ValidationError("eval_every set but no eval_fn given")

    by_index = sorted(clients, key=lambda c: c.index)
    params = init_params(cfg.family, cfg.seed)
    server_rng = substream(cfg.seed, "select")
    history = RoundHistory()
    auc_trace: list[float] = []

    for round_no in range(1, cfg.rounds + 1):
        chosen = select_participants(len(by_index), cfg.n_participants, server_rng)
        updates = []
        selected_names = []
        for k in chosen:
            client = by_index[k]
            selected_names.append(client.province)
            if client.is_empty:
                logger.warning(
                    "round %d: client %s has no data; excluded from average",
                    round_no, client.province,
                )
                continue
            updates.append(client_update(params, client, cfg))
        if updates:
            params = aggregate(updates)
        else:
            logger.warning("round %d: no usable updates; parameters unchanged", round_no)

        metrics = None
        if cfg.eval_every and round_no % cfg.eval_every == 0:
            metrics = eval_fn(params)
        history.rounds.append(
            RoundRecord(
                round_no=round_no,
                selected=tuple(selected_names),
                params_checksum=_checksum(params),
                metrics=metrics,
            )
        )

        if cfg.plateau_tol is not None and metrics and "auc" in metrics:
            auc_trace.append(metrics["auc"])
            window = cfg.plateau_rounds
            if len(auc_trace) > window:
                gain = max(auc_trace[-window:]) - max(auc_trace[:-window])
                if gain < cfg.plateau_tol:
                    logger.info("plateau stop at round %d", round_no)
                    break

    return params, history
