"""The two model families and their seeded trainers.

Logistic regression is trained by proximal mini-batch SGD (gradient step on
the smooth cross-entropy, then soft-thresholding of the weights), so the
same update rule serves local, centralized, and federated training. The
L1 strength C maps to a prox threshold of lr / (C * n_train), i.e. a
per-sample 1/C penalty on the mean loss.

The MLP is 14 -> 128 -> 128 -> 1 (ReLU hidden, sigmoid output), trained by
Adam on mean cross-entropy plus an L2 term alpha/(2*n_batch) * sum(w^2)
over weights (biases excluded).

Trainers are pure functions of (data, config): the parameter
initialization stream is derived from (seed, "init") and the mini-batch
shuffle stream from (seed, "shuffle", client_id). Centralized training is
client 0, which is what makes a single-client federated run reproduce
centralized training bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .numerics import sigmoid, softplus
from .rng import substream
from .schema import N_FEATURES, LabeledMatrix, Standardizer

HIDDEN = 128

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True, slots=True)
class ParamLayout:
    """Shape descriptor for a flat parameter vector.

    entries: (name, shape, penalized); penalized entries are the weight
    matrices that regularization applies to, never the biases/intercepts.
    """

    family: str
    entries: tuple[tuple[str, tuple[int, ...], bool], ...]

    @property
    def size(self) -> int:
        return sum(int(np.prod(shape)) for _, shape, _ in self.entries)

    def penalized_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        offset = 0
        for _, shape, penalized in self.entries:
            n = int(np.prod(shape))
            if penalized:
                mask[offset : offset + n] = True
            offset += n
        return mask


LR_LAYOUT = ParamLayout(
    family="logistic",
    entries=(("w", (N_FEATURES,), True), ("b", (1,), False)),
)

MLP_LAYOUT = ParamLayout(
    family="mlp",
    entries=(
        ("w1", (HIDDEN, N_FEATURES), True),
        ("b1", (HIDDEN,), False),
        ("w2", (HIDDEN, HIDDEN), True),
        ("b2", (HIDDEN,), False),
        ("w3", (1, HIDDEN), True),
        ("b3", (1,), False),
    ),
)

LAYOUTS = {"logistic": LR_LAYOUT, "mlp": MLP_LAYOUT}


@dataclass(frozen=True, slots=True)
class ParamVector:
    """Flat parameter vector plus its layout: the unit FedAvg exchanges."""

    values: np.ndarray
    layout: ParamLayout

    def __post_init__(self) -> None:
        if self.values.ndim != 1 or self.values.size != self.layout.size:
            raise ValidationError(
                f"expected {self.layout.size} values for {self.layout.family}, "
                f"got shape {self.values.shape}"
            )


@dataclass(frozen=True, slots=True)
class LogisticModel:
    w: np.ndarray
    b: float

    def __post_init__(self) -> None:
        if self.w.shape != (N_FEATURES,):
            raise ValidationError(f"w must be a {N_FEATURES}-vector")


@dataclass(frozen=True, slots=True)
class MlpModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self) -> None:
        expected = {name: shape for name, shape, _ in MLP_LAYOUT.entries}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(
                    f"{name} must have shape {shape}, got {getattr(self, name).shape}"
                )


@dataclass(frozen=True, slots=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def fresh_adam_state(size: int) -> AdamState:
    return AdamState(m=np.zeros(size), v=np.zeros(size), t=0)


@dataclass(frozen=True, slots=True)
class TrainConfig:
    """Hyperparameters shared by both trainers.

    tol=None disables the tolerance stop (used when an exact epoch count
    is required, e.g. comparing against a federated schedule).
    """

    learning_rate: float = 0.001
    l2_alpha: float = 0.01
    l1_C: float = 1.0
    batch_size: int = 200
    epochs: int = 200
    tol: float | None = 1e-4
    n_iter_no_change: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        # zero is allowed so a null federated step stays well-defined
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.l1_C <= 0:
            raise ValidationError("l1_C must be positive")


# Table-2 values for the MLP; the logistic learning rate is our choice
# (the reference solver is coordinate-based and has none).
def default_mlp_config(seed: int = 0, **overrides) -> TrainConfig:
    return TrainConfig(learning_rate=0.001, l2_alpha=0.01, seed=seed, **overrides)


def default_logistic_config(seed: int = 0, **overrides) -> TrainConfig:
    return TrainConfig(learning_rate=0.1, l1_C=1.0, seed=seed, **overrides)


def _check_finite(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValidationError("non-finite input")
    return x


def _check_batch(batch: LabeledMatrix) -> None:
    if batch.n == 0:
        raise ValidationError("empty batch")


def _check_trainable(data: LabeledMatrix) -> None:
    if data.n == 0:
        raise ValidationError("empty training set")
    if len(np.unique(data.y)) < 2:
        raise ValidationError("training data must contain both classes")


# ---------------------------------------------------------------- logistic


def lr_predict(model: LogisticModel, x: np.ndarray) -> float | np.ndarray:
    """P(y=1 | x) = sigmoid(w.x + b); accepts a single 14-vector or a matrix."""
    x = _check_finite(x)
    return sigmoid(x @ model.w + model.b)


def lr_loss_and_grad(model: LogisticModel, batch: LabeledMatrix) -> tuple[float, ParamVector]:
    """Mean binary cross-entropy and its gradient (smooth part only).

    The L1 penalty is handled by the proximal step, not here.
    """
    _check_batch(batch)
    z = batch.x @ model.w + model.b
    loss = float(np.mean(softplus(z) - batch.y * z))
    err = sigmoid(z) - batch.y
    gw = batch.x.T @ err / batch.n
    gb = float(np.mean(err))
    return loss, ParamVector(values=np.concatenate([gw, [gb]]), layout=LR_LAYOUT)


def prox_l1(p: ParamVector, threshold: float) -> ParamVector:
    """Soft-threshold the penalized entries: sign(w) * max(|w| - t, 0).

    Intercepts and biases are never thresholded.
    """
    if threshold < 0:
        raise ValidationError("threshold must be >= 0")
    mask = p.layout.penalized_mask()
    values = p.values.copy()
    w = values[mask]
    values[mask] = np.sign(w) * np.maximum(np.abs(w) - threshold, 0.0)
    return ParamVector(values=values, layout=p.layout)


def _soft_threshold(w: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(w) * np.maximum(np.abs(w) - threshold, 0.0)


def _batch_slices(n: int, batch_size: int) -> list[slice]:
    bs = min(batch_size, n)
    return [slice(s, min(s + bs, n)) for s in range(0, n, bs)]


def lr_run_epochs(
    w: np.ndarray,
    b: float,
    data: LabeledMatrix,
    cfg: TrainConfig,
    rng: np.random.Generator,
    epochs: int,
) -> tuple[np.ndarray, float, list[float]]:
    """Run proximal-SGD epochs from (w, b); returns new params + epoch losses.

    One step: w -= lr * grad, then soft-threshold with lr / (C * n). The
    rng supplies one shuffle permutation per epoch; callers that persist it
    across invocations (federated clients) continue the same stream.
    """
    w = w.copy()
    threshold = cfg.learning_rate / (cfg.l1_C * data.n)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(data.n)
        batch_losses = []
        for sl in _batch_slices(data.n, cfg.batch_size):
            idx = order[sl]
            batch = LabeledMatrix(x=data.x[idx], y=data.y[idx])
            loss, grad = lr_loss_and_grad(LogisticModel(w=w, b=b), batch)
            gw = grad.values[:-1]
            gb = grad.values[-1]
            w = _soft_threshold(w - cfg.learning_rate * gw, threshold)
            b = b - cfg.learning_rate * gb
            batch_losses.append(loss)
        losses.append(float(np.mean(batch_losses)))
    return w, b, losses


def _tolerance_stop(losses: list[float], best: float, streak: int, cfg: TrainConfig) -> tuple[float, int, bool]:
    """Update (best, streak) with this epoch's loss; True means stop now."""
    current = losses[-1]
    if cfg.tol is None:
        return min(best, current), 0, False
    if best - current < cfg.tol:
        streak += 1
    else:
        streak = 0
    best = min(best, current)
    return best, streak, streak >= cfg.n_iter_no_change


@dataclass(frozen=True, slots=True)
class TrainInfo:
    epochs_run: int
    epoch_losses: tuple[float, ...]
    adam_steps: int = 0


def train_logistic_with_info(data: LabeledMatrix, cfg: TrainConfig) -> tuple[LogisticModel, TrainInfo]:
    _check_trainable(data)
    w = np.zeros(N_FEATURES)
    b = 0.0
    rng = substream(cfg.seed, "shuffle", 0)
    best, streak = np.inf, 0
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        w, b, epoch_losses = lr_run_epochs(w, b, data, cfg, rng, 1)
        losses.extend(epoch_losses)
        best, streak, stop = _tolerance_stop(losses, best, streak, cfg)
        if stop:
            break
    return LogisticModel(w=w, b=b), TrainInfo(epochs_run=len(losses), epoch_losses=tuple(losses))


def train_logistic(data: LabeledMatrix, cfg: TrainConfig) -> LogisticModel:
    """Proximal mini-batch SGD from zero init; deterministic given cfg.seed."""
    model, _ = train_logistic_with_info(data, cfg)
    return model


# -------------------------------------------------------------------- MLP


def _mlp_views(flat: np.ndarray) -> MlpModel:
    """Reinterpret a flat vector as an MlpModel whose arrays are views."""
    parts = []
    offset = 0
    for _, shape, _ in MLP_LAYOUT.entries:
        n = int(np.prod(shape))
        parts.append(flat[offset : offset + n].reshape(shape))
        offset += n
    return MlpModel(*parts)


def init_mlp(seed: int) -> MlpModel:
    """Glorot-uniform weight init (seeded), zero biases."""
    rng = substream(seed, "init")
    arrays = []
    for name, shape, penalized in MLP_LAYOUT.entries:
        if penalized:
            fan_out, fan_in = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arrays.append(rng.uniform(-limit, limit, size=shape))
        else:
            arrays.append(np.zeros(shape))
    return MlpModel(*arrays)


def init_logistic() -> LogisticModel:
    """Zero init: exact for the convex logistic objective."""
    return LogisticModel(w=np.zeros(N_FEATURES), b=0.0)


def init_params(family: str, seed: int) -> ParamVector:
    if family == "logistic":
        return flatten(init_logistic())
    if family == "mlp":
        return flatten(init_mlp(seed))
    raise ValidationError(f"unknown model family {family!r}")


def mlp_forward(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Forward pass; returns probabilities and the activation cache for backward."""
    x = _check_finite(x)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    z1 = xb @ model.w1.T + model.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ model.w2.T + model.b2
    h2 = np.maximum(z2, 0.0)
    z3 = (h2 @ model.w3.T + model.b3).ravel()
    p = sigmoid(z3)
    cache = {"x": xb, "z1": z1, "h1": h1, "z2": z2, "h2": h2, "z3": z3}
    return (float(p[0]) if single else p), cache


def mlp_loss_and_grad(
    model: MlpModel, batch: LabeledMatrix, alpha: float = 0.01
) -> tuple[float, ParamVector]:
    """Mean BCE + alpha/(2*n_batch) * sum(weights^2), gradient by backprop.

    Biases are excluded from the penalty. alpha defaults to the benchmark
    hyperparameter value.
    """
    _check_batch(batch)
    loss, grad, _ = _mlp_loss_and_grad(model, batch.x, batch.y, alpha)
    return loss, grad


def _mlp_loss_and_grad(
    model: MlpModel, x: np.ndarray, y: np.ndarray, alpha: float
) -> tuple[float, ParamVector, np.ndarray]:
    n = x.shape[0]
    _, cache = mlp_forward(model, x)
    z3 = cache["z3"]
    p = sigmoid(z3)
    loss = float(np.mean(softplus(z3) - y * z3))
    if alpha > 0.0:
        loss += alpha / (2.0 * n) * (
            np.sum(model.w1**2) + np.sum(model.w2**2) + np.sum(model.w3**2)
        )

    dz3 = ((p - y) / n)[:, None]  # (n, 1)
    gw3 = dz3.T @ cache["h2"]
    gb3 = dz3.sum(axis=0)
    dh2 = dz3 @ model.w3
    dz2 = dh2 * (cache["z2"] > 0)
    gw2 = dz2.T @ cache["h1"]
    gb2 = dz2.sum(axis=0)
    dh1 = dz2 @ model.w2
    dz1 = dh1 * (cache["z1"] > 0)
    gw1 = dz1.T @ cache["x"]
    gb1 = dz1.sum(axis=0)
    if alpha > 0.0:
        gw1 = gw1 + (alpha / n) * model.w1
        gw2 = gw2 + (alpha / n) * model.w2
        gw3 = gw3 + (alpha / n) * model.w3
    grad = np.concatenate(
        [gw1.ravel(), gb1.ravel(), gw2.ravel(), gb2.ravel(), gw3.ravel(), gb3.ravel()]
    )
    return loss, ParamVector(values=grad, layout=MLP_LAYOUT), p


def adam_step(
    state: AdamState, grad: ParamVector, params: ParamVector, lr: float
) -> tuple[AdamState, ParamVector]:
    """One bias-corrected Adam update (beta1=0.9, beta2=0.999, eps=1e-8)."""
    if grad.layout != params.layout:
        raise ValidationError("gradient / parameter layout mismatch")
    if state.m.shape != params.values.shape:
        raise ValidationError("optimizer state / parameter shape mismatch")
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad.values
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad.values**2
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    new_values = params.values - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return AdamState(m=m, v=v, t=t), ParamVector(values=new_values, layout=params.layout)


def mlp_run_epochs(
    params: ParamVector,
    adam: AdamState,
    data: LabeledMatrix,
    cfg: TrainConfig,
    rng: np.random.Generator,
    epochs: int,
) -> tuple[ParamVector, AdamState, list[float]]:
    """Run Adam epochs from params/adam; returns updated copies + epoch losses."""
    flat = params.values.copy()
    m, v, t = adam.m.copy(), adam.v.copy(), adam.t
    model = _mlp_views(flat)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(data.n)
        batch_losses = []
        for sl in _batch_slices(data.n, cfg.batch_size):
            idx = order[sl]
            loss, grad, _ = _mlp_loss_and_grad(model, data.x[idx], data.y[idx], cfg.l2_alpha)
            t += 1
            g = grad.values
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g**2
            m_hat = m / (1.0 - ADAM_BETA1**t)
            v_hat = v / (1.0 - ADAM_BETA2**t)
            flat -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
            batch_losses.append(loss)
        losses.append(float(np.mean(batch_losses)))
    return (
        ParamVector(values=flat, layout=MLP_LAYOUT),
        AdamState(m=m, v=v, t=t),
        losses,
    )


def train_mlp_with_info(data: LabeledMatrix, cfg: TrainConfig) -> tuple[MlpModel, TrainInfo]:
    _check_trainable(data)
    params = flatten(init_mlp(cfg.seed))
    adam = fresh_adam_state(params.values.size)
    rng = substream(cfg.seed, "shuffle", 0)
    best, streak = np.inf, 0
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        params, adam, epoch_losses = mlp_run_epochs(params, adam, data, cfg, rng, 1)
        losses.extend(epoch_losses)
        best, streak, stop = _tolerance_stop(losses, best, streak, cfg)
        if stop:
            break
    model = unflatten(params, MLP_LAYOUT)
    return model, TrainInfo(
        epochs_run=len(losses), epoch_losses=tuple(losses), adam_steps=adam.t
    )


def train_mlp(data: LabeledMatrix, cfg: TrainConfig) -> MlpModel:
    """Glorot init + Adam mini-batch training; deterministic given cfg.seed."""
    model, _ = train_mlp_with_info(data, cfg)
    return model


# ------------------------------------------------------- parameter vectors


def flatten(model: LogisticModel | MlpModel) -> ParamVector:
    """Flat copy of the parameters, in documented layout order."""
    if isinstance(model, LogisticModel):
        return ParamVector(
            values=np.concatenate([model.w, [model.b]]), layout=LR_LAYOUT
        )
    if isinstance(model, MlpModel):
        parts = [getattr(model, name).ravel() for name, _, _ in MLP_LAYOUT.entries]
        return ParamVector(values=np.concatenate(parts), layout=MLP_LAYOUT)
    raise ValidationError(f"cannot flatten {type(model).__name__}")


def unflatten(pv: ParamVector, layout: ParamLayout) -> LogisticModel | MlpModel:
    """Inverse of flatten; the layout must match the vector's own layout."""
    if pv.layout != layout:
        raise ValidationError(
            f"layout mismatch: vector has {pv.layout.family}, requested {layout.family}"
        )
    if layout.family == "logistic":
        return LogisticModel(w=pv.values[:N_FEATURES].copy(), b=float(pv.values[-1]))
    arrays = []
    offset = 0
    for _, shape, _ in layout.entries:
        n = int(np.prod(shape))
        arrays.append(pv.values[offset : offset + n].reshape(shape).copy())
        offset += n
    return MlpModel(*arrays)


def predict_proba(model: LogisticModel | MlpModel, x: np.ndarray) -> np.ndarray:
    """Model-family-independent probability prediction."""
    if isinstance(model, LogisticModel):
        return np.asarray(lr_predict(model, x))
    p, _ = mlp_forward(model, x)
    return np.asarray(p)


# ------------------------------------------------------------- checkpoints

_CHECKPOINT_MAGIC = "fedprov-checkpoint"
_CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path, params: ParamVector, standardizer: Standardizer | None = None
) -> None:
    """Write a checkpoint: JSON header line, then float64 little-endian values.

    The optional standardizer travels with the model so that evaluation of
    a locally or centrally trained checkpoint is self-contained. Federated
    checkpoints carry none (each client keeps its own statistics).
    """
    header = {
        "format": _CHECKPOINT_MAGIC,
        "version": _CHECKPOINT_VERSION,
        "family": params.layout.family,
        "layout": [[name, list(shape), pen] for name, shape, pen in params.layout.entries],
        "standardizer": None
        if standardizer is None
        else {"mean": standardizer.mean.tolist(), "std": standardizer.std.tolist()},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(params.values, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[ParamVector, Standardizer | None]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: not a checkpoint file") from exc
    if header.get("format") != _CHECKPOINT_MAGIC:
        raise ValidationError(f"{path}: not a checkpoint file")
    if header.get("version") != _CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {header.get('version')}")
    family = header["family"]
    if family not in LAYOUTS:
        raise ValidationError(f"{path}: unknown model family {family!r}")
    layout = LAYOUTS[family]
    declared = [[name, list(shape), pen] for name, shape, pen in layout.entries]
    if header["layout"] != declared:
        raise ValidationError(f"{path}: layout does not match family {family!r}")
    values = np.frombuffer(blob, dtype="<f8").astype(float)
    params = ParamVector(values=values, layout=layout)
    std_block = header.get("standardizer")
    standardizer = None
    if std_block is not None:
        standardizer = Standardizer(
            mean=np.asarray(std_block["mean"], dtype=float),
            std=np.asarray(std_block["std"], dtype=float),
        )
    return params, standardizer
