"""Two-layer LSTM direction classifier with exact backpropagation through time.

Everything is plain numpy so each gradient can be audited against centered
finite differences.  Per step and layer, with x the step input, h/c the
carried short-term and cell states:

    i = sig(Wi x + Ui h + bi)      f = sig(Wf x + Uf h + bf)
    o = sig(Wo x + Uo h + bo)      g = tanh(Wg x + Ug h + bg)
    c' = f * c + i * g             h' = o * tanh(c')

The second layer consumes the first layer's h sequence, and a dense head
maps the final h of layer 2 through a sigmoid to P(next-day mid up).  Loss
is binary cross-entropy with the probability clamped to [1e-12, 1 - 1e-12].

Training is mini-batch gradient descent (plain SGD by default, Adam behind
``optimizer="adam"``), fully deterministic for a fixed seed: initialization
and the per-epoch shuffle all come from one seeded PCG64 stream, and the
returned parameters are the ones with the best validation accuracy seen.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DataError
from .market_data import (
    FeatureStats,
    N_FEATURES,
    SequenceSample,
    WINDOW_LENGTH,
    compute_feature_stats,
    standardize_samples,
)

__all__ = [
    "LstmParams",
    "LayerParams",
    "Metrics",
    "TrainConfig",
    "TrainResult",
    "backward",
    "backward_batch",
    "evaluate",
    "forward",
    "forward_batch",
    "init_params",
    "load_checkpoint",
    "loss",
    "params_to_vector",
    "save_checkpoint",
    "train",
    "vector_to_params",
]

PROB_CLAMP = 1e-12

_GATES = ("i", "f", "o", "g")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LayerParams:
    """Gate weights for one LSTM layer: w_* act on the input, u_* on h."""

    w_i: np.ndarray
    u_i: np.ndarray
    b_i: np.ndarray
    w_f: np.ndarray
    u_f: np.ndarray
    b_f: np.ndarray
    w_o: np.ndarray
    u_o: np.ndarray
    b_o: np.ndarray
    w_g: np.ndarray
    u_g: np.ndarray
    b_g: np.ndarray


@dataclass
class LstmParams:
    """Both recurrent layers plus the dense sigmoid head."""

    layer1: LayerParams
    layer2: LayerParams
    dense_w: np.ndarray
    dense_b: float

    @property
    def hidden(self) -> int:
        return self.layer1.w_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.layer1.w_i.shape[1]


def _layer_fields(layer: LayerParams) -> list[tuple[str, np.ndarray]]:
    return [(name, getattr(layer, name)) for name in (
        "w_i", "u_i", "b_i", "w_f", "u_f", "b_f",
        "w_o", "u_o", "b_o", "w_g", "u_g", "b_g",
    )]


def named_arrays(params: LstmParams) -> list[tuple[str, np.ndarray]]:
    """Flat (name, array) view; dense_b appears as a 1-element array copy."""
    out = []
    for prefix, layer in (("layer1", params.layer1), ("layer2", params.layer2)):
        out.extend((f"{prefix}.{n}", a) for n, a in _layer_fields(layer))
    out.append(("dense_w", params.dense_w))
    out.append(("dense_b", np.array([params.dense_b])))
    return out


def params_to_vector(params: LstmParams) -> np.ndarray:
    return np.concatenate([a.reshape(-1) for _, a in named_arrays(params)])


def vector_to_params(vec: np.ndarray, hidden: int, input_size: int = N_FEATURES) -> LstmParams:
    shapes = _shape_table(hidden, input_size)
    arrays = {}
    offset = 0
    for name, shape in shapes.items():
        size = int(np.prod(shape))
        arrays[name] = vec[offset : offset + size].reshape(shape).copy()
        offset += size
    if offset != len(vec):
        raise DataError(f"parameter vector has {len(vec)} entries, expected {offset}")
    return _params_from_arrays(arrays)


def _shape_table(hidden: int, input_size: int) -> dict[str, tuple[int, ...]]:
    table: dict[str, tuple[int, ...]] = {}
    for prefix, in_dim in (("layer1", input_size), ("layer2", hidden)):
        for gate in _GATES:
            table[f"{prefix}.w_{gate}"] = (hidden, in_dim)
            table[f"{prefix}.u_{gate}"] = (hidden, hidden)
            table[f"{prefix}.b_{gate}"] = (hidden,)
    table["dense_w"] = (hidden,)
    table["dense_b"] = (1,)
    return table


def _params_from_arrays(arrays: dict[str, np.ndarray]) -> LstmParams:
    def build_layer(prefix: str) -> LayerParams:
        kw = {}
        for gate in _GATES:
            kw[f"w_{gate}"] = arrays[f"{prefix}.w_{gate}"]
            kw[f"u_{gate}"] = arrays[f"{prefix}.u_{gate}"]
            kw[f"b_{gate}"] = arrays[f"{prefix}.b_{gate}"]
        return LayerParams(**kw)

    return LstmParams(
        layer1=build_layer("layer1"),
        layer2=build_layer("layer2"),
        dense_w=arrays["dense_w"],
        dense_b=float(arrays["dense_b"][0]),
    )


def init_params(hidden: int, rng: np.random.Generator, input_size: int = N_FEATURES) -> LstmParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, forget bias +1.

    Draw order is fixed (layer1 then layer2, gates i,f,o,g, w before u, then
    the dense head) so a given generator state always yields the same model.
    """
    def draw(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    arrays: dict[str, np.ndarray] = {}
    for prefix, in_dim in (("layer1", input_size), ("layer2", hidden)):
        for gate in _GATES:
            arrays[f"{prefix}.w_{gate}"] = draw((hidden, in_dim), in_dim)
            arrays[f"{prefix}.u_{gate}"] = draw((hidden, hidden), hidden)
            arrays[f"{prefix}.b_{gate}"] = (
                np.ones(hidden) if gate == "f" else np.zeros(hidden)
            )
    arrays["dense_w"] = draw((hidden,), hidden)
    arrays["dense_b"] = np.zeros(1)
    return _params_from_arrays(arrays)


@dataclass
class _StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


@dataclass
class ForwardCache:
    params: LstmParams
    steps1: list[_StepCache]
    steps2: list[_StepCache]
    probs: np.ndarray


def _layer_step(lp: LayerParams, x, h_prev, c_prev) -> _StepCache:
    gi = _sigmoid(x @ lp.w_i.T + h_prev @ lp.u_i.T + lp.b_i)
    gf = _sigmoid(x @ lp.w_f.T + h_prev @ lp.u_f.T + lp.b_f)
    go = _sigmoid(x @ lp.w_o.T + h_prev @ lp.u_o.T + lp.b_o)
    gg = np.tanh(x @ lp.w_g.T + h_prev @ lp.u_g.T + lp.b_g)
    c = gf * c_prev + gi * gg
    tanh_c = np.tanh(c)
    h = go * tanh_c
    return _StepCache(x=x, h_prev=h_prev, c_prev=c_prev, i=gi, f=gf, o=go, g=gg,
                      c=c, tanh_c=tanh_c, h=h)


def forward_batch(params: LstmParams, windows: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Probabilities for a (batch, 10, features) stack of windows."""
    windows = np.asarray(windows, dtype=np.float64)
    if (
        windows.ndim != 3
        or windows.shape[1] != WINDOW_LENGTH
        or windows.shape[2] != params.input_size
    ):
        raise DataError(
            f"windows must have shape (batch, {WINDOW_LENGTH}, {params.input_size}), "
            f"got {windows.shape}"
        )
    batch, n_steps = windows.shape[0], windows.shape[1]
    hid = params.hidden
    h1 = np.zeros((batch, hid))
    c1 = np.zeros((batch, hid))
    h2 = np.zeros((batch, hid))
    c2 = np.zeros((batch, hid))
    steps1, steps2 = [], []
    for t in range(n_steps):
        sc1 = _layer_step(params.layer1, windows[:, t, :], h1, c1)
        h1, c1 = sc1.h, sc1.c
        sc2 = _layer_step(params.layer2, h1, h2, c2)
        h2, c2 = sc2.h, sc2.c
        steps1.append(sc1)
        steps2.append(sc2)
    z = h2 @ params.dense_w + params.dense_b
    probs = _sigmoid(z)
    return probs, ForwardCache(params=params, steps1=steps1, steps2=steps2, probs=probs)


def forward(params: LstmParams, window: np.ndarray) -> tuple[float, ForwardCache]:
    """Probability of an up move for one window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise DataError(f"window must be 2-d (steps, features), got shape {window.shape}")
    probs, cache = forward_batch(params, window[None, :, :])
    return float(probs[0]), cache


def loss(prob: float, label: float) -> float:
    """Binary cross-entropy with the probability clamped away from 0 and 1."""
    p = min(max(prob, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return -(label * math.log(p) + (1.0 - label) * math.log(1.0 - p))


def _loss_vector(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))


def _zero_grads(params: LstmParams) -> LstmParams:
    arrays = {n: np.zeros_like(a) for n, a in named_arrays(params)}
    return _params_from_arrays(arrays)


def _layer_backward(lp: LayerParams, grads: LayerParams, sc: _StepCache,
                    dh: np.ndarray, dc: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    do = dh * sc.tanh_c
    dc_total = dc + dh * sc.o * (1.0 - sc.tanh_c ** 2)
    di = dc_total * sc.g
    df = dc_total * sc.c_prev
    dg = dc_total * sc.i
    dc_prev = dc_total * sc.f
    da_i = di * sc.i * (1.0 - sc.i)
    da_f = df * sc.f * (1.0 - sc.f)
    da_o = do * sc.o * (1.0 - sc.o)
    da_g = dg * (1.0 - sc.g ** 2)
    grads.w_i += da_i.T @ sc.x
    grads.u_i += da_i.T @ sc.h_prev
    grads.b_i += da_i.sum(axis=0)
    grads.w_f += da_f.T @ sc.x
    grads.u_f += da_f.T @ sc.h_prev
    grads.b_f += da_f.sum(axis=0)
    grads.w_o += da_o.T @ sc.x
    grads.u_o += da_o.T @ sc.h_prev
    grads.b_o += da_o.sum(axis=0)
    grads.w_g += da_g.T @ sc.x
    grads.u_g += da_g.T @ sc.h_prev
    grads.b_g += da_g.sum(axis=0)
    dx = da_i @ lp.w_i + da_f @ lp.w_f + da_o @ lp.w_o + da_g @ lp.w_g
    dh_prev = da_i @ lp.u_i + da_f @ lp.u_f + da_o @ lp.u_o + da_g @ lp.u_g
    return dx, dh_prev, dc_prev


def backward_batch(cache: ForwardCache, labels: np.ndarray) -> LstmParams:
    """Gradient of the summed cross-entropy over the batch.

    Summed (not averaged), so duplicating a sample doubles its contribution;
    the trainer divides by the batch size.  The dense pre-activation gradient
    is probs - labels, exact wherever the clamp is inactive.
    """
    labels = np.asarray(labels, dtype=np.float64)
    params = cache.params
    batch = cache.probs.shape[0]
    if labels.shape != (batch,):
        raise DataError(f"labels shape {labels.shape} does not match batch {batch}")
    n_steps = len(cache.steps1)
    grads = _zero_grads(params)

    dz = cache.probs - labels
    h2_final = cache.steps2[-1].h
    grads.dense_w += dz @ h2_final
    grads.dense_b += float(dz.sum())

    hid = params.hidden
    dh2 = dz[:, None] * params.dense_w[None, :]
    dc2 = np.zeros((batch, hid))
    dh1 = np.zeros((batch, hid))
    dc1 = np.zeros((batch, hid))
    for t in range(n_steps - 1, -1, -1):
        dx2, dh2, dc2 = _layer_backward(params.layer2, grads.layer2, cache.steps2[t], dh2, dc2)
        dh1 = dh1 + dx2
        _, dh1, dc1 = _layer_backward(params.layer1, grads.layer1, cache.steps1[t], dh1, dc1)
    return grads


def backward(cache: ForwardCache, label: float) -> LstmParams:
    """Gradient of the loss for a single-window cache."""
    if cache.probs.shape[0] != 1:
        raise DataError(f"single-sample backward got a batch of {cache.probs.shape[0]}")
    return backward_batch(cache, np.array([label], dtype=np.float64))


@dataclass(frozen=True)
class Metrics:
    """Confusion counts and the derived rates.

    ``precision``/``recall`` are reported as 0.0 with the matching
    ``*_defined`` flag cleared when their denominator is empty.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    precision_defined: bool
    recall_defined: bool

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "Metrics":
        for name, v in (("tp", tp), ("fp", fp), ("tn", tn), ("fn", fn)):
            if v < 0 or int(v) != v:
                raise DataError(f"{name} must be a nonnegative integer, got {v}")
        total = tp + fp + tn + fn
        if total == 0:
            raise DataError("cannot compute metrics from an empty confusion matrix")
        return cls(
            tp=tp, fp=fp, tn=tn, fn=fn,
            accuracy=(tp + tn) / total,
            precision=tp / (tp + fp) if tp + fp > 0 else 0.0,
            recall=tp / (tp + fn) if tp + fn > 0 else 0.0,
            precision_defined=tp + fp > 0,
            recall_defined=tp + fn > 0,
        )


def evaluate(params: LstmParams, samples: Sequence[SequenceSample]) -> Metrics:
    """Threshold the forward probabilities at 0.5 and count the confusion."""
    if not samples:
        raise DataError("cannot evaluate on zero samples")
    windows = np.stack([s.window for s in samples])
    labels = np.array([s.label for s in samples])
    probs, _ = forward_batch(params, windows)
    preds = probs >= 0.5
    actual = labels == 1
    return Metrics.from_counts(
        tp=int(np.sum(preds & actual)),
        fp=int(np.sum(preds & ~actual)),
        tn=int(np.sum(~preds & ~actual)),
        fn=int(np.sum(~preds & actual)),
    )


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 32
    batch: int = 8
    epochs: int = 20
    learning_rate: float = 0.05
    seed: int = 0
    split: tuple[float, float] = (0.8, 0.2)
    optimizer: str = "sgd"

    def __post_init__(self) -> None:
        if int(self.hidden) != self.hidden or self.hidden <= 0:
            raise DataError(f"hidden must be a positive integer, got {self.hidden}")
        if int(self.batch) != self.batch or self.batch <= 0:
            raise DataError(f"batch must be a positive integer, got {self.batch}")
        if int(self.epochs) != self.epochs or self.epochs <= 0:
            raise DataError(f"epochs must be a positive integer, got {self.epochs}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise DataError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise DataError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if len(self.split) != 2 or min(self.split) <= 0 or abs(sum(self.split) - 1.0) > 1e-9:
            raise DataError(f"split fractions must be positive and sum to 1, got {self.split}")
        if self.optimizer not in ("sgd", "adam"):
            raise DataError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val: Metrics
    best_val_accuracy: float


@dataclass
class TrainResult:
    params: LstmParams
    stats: FeatureStats
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0


def train(samples: Sequence[SequenceSample], config: TrainConfig) -> TrainResult:
    """Mini-batch gradient descent over a chronological train/validation split.

    The first ``split[0]`` fraction of the samples (in the given order) is
    the training set; feature statistics come from it alone and are applied
    to both splits.  Returns the parameters with the best validation
    accuracy (earliest epoch wins ties).
    """
    if not samples:
        raise DataError("cannot train on zero samples")
    n = len(samples)
    n_train = int(round(config.split[0] * n))
    n_train = min(max(n_train, 1), n - 1)
    if n < 2:
        raise DataError("need at least 2 samples to split into train and validation")
    if config.batch > n_train:
        raise DataError(f"batch size {config.batch} exceeds training-set size {n_train}")

    train_samples = list(samples[:n_train])
    val_samples = list(samples[n_train:])
    stats = compute_feature_stats(train_samples)
    train_std = standardize_samples(train_samples, stats)
    val_std = standardize_samples(val_samples, stats)

    x_train = np.stack([s.window for s in train_std])
    y_train = np.array([s.label for s in train_std], dtype=np.float64)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    params = init_params(config.hidden, rng)
    vec = params_to_vector(params)

    use_adam = config.optimizer == "adam"
    adam_m = np.zeros_like(vec)
    adam_v = np.zeros_like(vec)
    adam_b1, adam_b2, adam_eps = 0.9, 0.999, 1e-8
    adam_t = 0

    best_vec = vec.copy()
    best_acc = -1.0
    best_epoch = 0
    history: list[EpochStats] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, config.batch):
            idx = order[start : start + config.batch]
            probs, cache = forward_batch(params, x_train[idx])
            epoch_loss += float(_loss_vector(probs, y_train[idx]).sum())
            grads = backward_batch(cache, y_train[idx])
            gvec = params_to_vector(grads) / len(idx)
            if use_adam:
                adam_t += 1
                adam_m = adam_b1 * adam_m + (1 - adam_b1) * gvec
                adam_v = adam_b2 * adam_v + (1 - adam_b2) * gvec ** 2
                m_hat = adam_m / (1 - adam_b1 ** adam_t)
                v_hat = adam_v / (1 - adam_b2 ** adam_t)
                vec = vec - config.learning_rate * m_hat / (np.sqrt(v_hat) + adam_eps)
            else:
                vec = vec - config.learning_rate * gvec
            params = vector_to_params(vec, config.hidden, params.input_size)
        epoch_loss /= n_train
        if not (math.isfinite(epoch_loss) and np.all(np.isfinite(vec))):
            raise ConvergenceError(f"training diverged at epoch {epoch} (non-finite loss or weights)")
        val_metrics = evaluate(params, val_std)
        if val_metrics.accuracy > best_acc:
            best_acc = val_metrics.accuracy
            best_vec = vec.copy()
            best_epoch = epoch
        history.append(
            EpochStats(epoch=epoch, train_loss=epoch_loss, val=val_metrics,
                       best_val_accuracy=best_acc)
        )

    return TrainResult(
        params=vector_to_params(best_vec, config.hidden, params.input_size),
        stats=stats,
        history=history,
        best_epoch=best_epoch,
        best_val_accuracy=best_acc,
    )


def save_checkpoint(path, result: TrainResult, config: TrainConfig) -> None:
    """Single JSON document with config, shapes, row-major weights, and stats."""
    params = result.params
    weights = {
        name: arr.reshape(-1).tolist() for name, arr in named_arrays(params)
    }
    shapes = {name: list(arr.shape) for name, arr in named_arrays(params)}
    doc = {
        "schema": 1,
        "config": {
            "hidden": config.hidden,
            "batch": config.batch,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "split": list(config.split),
            "optimizer": config.optimizer,
        },
        "seed": config.seed,
        "epoch": result.best_epoch,
        "input_size": params.input_size,
        "shapes": shapes,
        "weights": weights,
        "feature_stats": {
            "mean": result.stats.mean.tolist(),
            "std": result.stats.std.tolist(),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> tuple[LstmParams, FeatureStats, dict]:
    """Load a checkpoint, validating every declared shape."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        hidden = int(doc["config"]["hidden"])
        input_size = int(doc["input_size"])
        shapes = doc["shapes"]
        weights = doc["weights"]
        stats = FeatureStats(
            mean=np.asarray(doc["feature_stats"]["mean"], dtype=np.float64),
            std=np.asarray(doc["feature_stats"]["std"], dtype=np.float64),
        )
    except KeyError as exc:
        raise DataError(f"checkpoint is missing field {exc}") from exc
    expected = _shape_table(hidden, input_size)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in expected.items():
        if name not in weights:
            raise DataError(f"checkpoint is missing weights for {name}")
        declared = tuple(shapes.get(name, ()))
        if declared != shape:
            raise DataError(f"checkpoint shape for {name} is {declared}, expected {shape}")
        flat = np.asarray(weights[name], dtype=np.float64)
        if flat.size != int(np.prod(shape)):
            raise DataError(f"checkpoint weights for {name} have size {flat.size}, expected {np.prod(shape)}")
        arrays[name] = flat.reshape(shape)
    params = _params_from_arrays(arrays)
    meta = {"seed": doc.get("seed"), "epoch": doc.get("epoch"), "config": doc.get("config", {})}
    return params, stats, meta
