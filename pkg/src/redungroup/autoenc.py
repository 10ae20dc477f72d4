"""Five-layer autoencoder trained by hand-rolled backprop with Adam.

Layer sizes are (M, hidden, N_z, hidden, M); hidden layers get batch
normalization followed by tanh, the output layer is linear. The decoder
weight product (bottleneck -> output) is the functional-connection matrix
consumed by the relational graph. Everything runs in double precision on
plain numpy; gradients are exact and checked against finite differences
in the test suite.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .datastore import Dataset
from .errors import TrainingDivergedError, ValidationError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9  # running = momentum * running + (1 - momentum) * batch


@dataclass
class MLPModel:
    """Parameters of the autoencoder.

    ``weights[k]`` has shape (in, out) so a forward step is ``x @ W + b``;
    batch-norm scale/shift/running stats exist for the three hidden layers
    (gap indices 0, 1, 2), the final gap has neither normalization nor
    activation.
    """

    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bn_gamma: list[np.ndarray]
    bn_shift: list[np.ndarray]
    bn_run_mean: list[np.ndarray]
    bn_run_var: list[np.ndarray]

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_latent(self) -> int:
        return self.sizes[2]

    def copy(self) -> "MLPModel":
        return copy.deepcopy(self)

    def parameter_arrays(self) -> list[tuple[str, np.ndarray]]:
        """All trainable arrays with stable names, in a fixed order."""
        out: list[tuple[str, np.ndarray]] = []
        for k in range(len(self.weights)):
            out.append((f"W{k}", self.weights[k]))
            out.append((f"b{k}", self.biases[k]))
        for k in range(len(self.bn_gamma)):
            out.append((f"gamma{k}", self.bn_gamma[k]))
            out.append((f"shift{k}", self.bn_shift[k]))
        return out

    def parameter_count(self) -> int:
        return sum(arr.size for _, arr in self.parameter_arrays())


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 100
    epochs: int = 300
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValidationError("batch_size and epochs must be >= 1")


@dataclass
class TrainReport:
    """Per-epoch losses on normalized data; train is the running minibatch
    average, test is a full eval-mode pass."""

    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        return int(np.argmin(self.test_loss))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,test_loss\n")
            for e, (tr, te) in enumerate(zip(self.train_loss, self.test_loss)):
                fh.write(f"{e},{tr:.17g},{te:.17g}\n")


@dataclass(frozen=True)
class FunctionalMatrix:
    """Product of decoder weight matrices, shape (N_z, M)."""

    w: np.ndarray

    def __post_init__(self):
        if self.w.ndim != 2:
            raise ValidationError("functional matrix must be 2-D")
        if not np.all(np.isfinite(self.w)):
            raise ValidationError("functional matrix has non-finite entries")


def init_model(n_inputs: int, n_latent: int, hidden: int = 300, seed: int = 0) -> MLPModel:
    """Symmetric scaled-uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    if not 1 <= n_latent < n_inputs:
        raise ValidationError(
            f"latent size must satisfy 1 <= N_z < M, got N_z={n_latent}, M={n_inputs}"
        )
    sizes = (n_inputs, hidden, n_latent, hidden, n_inputs)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    hidden_sizes = sizes[1:-1]
    return MLPModel(
        sizes=sizes,
        weights=weights,
        biases=biases,
        bn_gamma=[np.ones(h) for h in hidden_sizes],
        bn_shift=[np.zeros(h) for h in hidden_sizes],
        bn_run_mean=[np.zeros(h) for h in hidden_sizes],
        bn_run_var=[np.ones(h) for h in hidden_sizes],
    )


def _check_batch(model: MLPModel, batch: np.ndarray, mode: str) -> np.ndarray:
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != model.n_inputs:
        raise ValidationError(
            f"batch must be (n, {model.n_inputs}), got shape {batch.shape}"
        )
    if mode == "train" and batch.shape[0] < 2:
        raise ValidationError("train mode needs a batch of at least 2 rows")
    if mode not in ("train", "eval"):
        raise ValidationError(f"unknown mode {mode!r}")
    return batch


def forward(model: MLPModel, batch: np.ndarray, mode: str = "eval",
            update_running: bool = True) -> np.ndarray:
    """Reconstruction of the batch.

    Train mode normalizes with batch statistics and (unless disabled)
    updates the running stats with momentum 0.9; eval mode uses running
    stats and is a pure function.
    """
    x = _check_batch(model, batch, mode)
    n_gaps = len(model.weights)
    for k in range(n_gaps):
        a = x @ model.weights[k] + model.biases[k]
        if k == n_gaps - 1:
            return a
        if mode == "train":
            mu = a.mean(axis=0)
            var = a.var(axis=0)
            if update_running:
                model.bn_run_mean[k] = BN_MOMENTUM * model.bn_run_mean[k] + (1 - BN_MOMENTUM) * mu
                model.bn_run_var[k] = BN_MOMENTUM * model.bn_run_var[k] + (1 - BN_MOMENTUM) * var
        else:
            mu = model.bn_run_mean[k]
            var = model.bn_run_var[k]
        x_hat = (a - mu) / np.sqrt(var + BN_EPS)
        x = np.tanh(model.bn_gamma[k] * x_hat + model.bn_shift[k])
    raise AssertionError("unreachable")


def training_loss(model: MLPModel, batch: np.ndarray) -> float:
    """Train-mode MSE without touching running statistics (for grad checks)."""
    out = forward(model, batch, mode="train", update_running=False)
    return float(np.mean((out - batch) ** 2))


def loss_and_gradients(model: MLPModel, batch: np.ndarray,
                       update_running: bool = True) -> tuple[float, dict[str, np.ndarray]]:
    """Train-mode forward/backward for one minibatch.

    Returns the MSE reconstruction loss and gradients keyed like
    :meth:`MLPModel.parameter_arrays`.
    """
    x = _check_batch(model, batch, "train")
    n = x.shape[0]
    n_gaps = len(model.weights)

    # forward with caches
    acts = [x]  # layer inputs per gap
    caches = []  # per hidden gap: (x_hat, inv_std, tanh_out)
    h = x
    for k in range(n_gaps):
        a = h @ model.weights[k] + model.biases[k]
        if k == n_gaps - 1:
            out = a
            break
        mu = a.mean(axis=0)
        centered = a - mu
        var = np.mean(centered * centered, axis=0)
        if update_running:
            model.bn_run_mean[k] = BN_MOMENTUM * model.bn_run_mean[k] + (1 - BN_MOMENTUM) * mu
            model.bn_run_var[k] = BN_MOMENTUM * model.bn_run_var[k] + (1 - BN_MOMENTUM) * var
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        x_hat = centered * inv_std
        h = np.tanh(model.bn_gamma[k] * x_hat + model.bn_shift[k])
        acts.append(h)
        caches.append((x_hat, inv_std, h))

    diff = out - x
    loss = float(np.mean(diff**2))
    grads: dict[str, np.ndarray] = {}

    delta = 2.0 * diff / diff.size  # dL/d(out)
    for k in range(n_gaps - 1, -1, -1):
        grads[f"W{k}"] = acts[k].T @ delta
        grads[f"b{k}"] = delta.sum(axis=0)
        if k == 0:
            break
        dx = delta @ model.weights[k].T
        x_hat, inv_std, h = caches[k - 1]
        dy = dx * (1.0 - h**2)  # through tanh
        grads[f"gamma{k - 1}"] = (dy * x_hat).sum(axis=0)
        grads[f"shift{k - 1}"] = dy.sum(axis=0)
        dxhat = dy * model.bn_gamma[k - 1]
        # batch-norm backward with batch statistics
        delta = (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0) - x_hat * (dxhat * x_hat).sum(axis=0)
        )
    return loss, grads


class AdamState:
    """First/second moment accumulators for one set of named parameters.

    Updates the model arrays in place, so the parameter list can be cached
    once at construction.
    """

    def __init__(self, model: MLPModel):
        self._params = model.parameter_arrays()
        self.m = {name: np.zeros_like(arr) for name, arr in self._params}
        self.v = {name: np.zeros_like(arr) for name, arr in self._params}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], cfg: TrainConfig) -> None:
        self.t += 1
        correct1 = 1.0 - cfg.beta1**self.t
        correct2 = 1.0 - cfg.beta2**self.t
        scale = cfg.learning_rate / correct1
        root2 = np.sqrt(correct2)
        for name, arr in self._params:
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            arr -= scale * m / (np.sqrt(v) / root2 + cfg.epsilon)


def _dataset_values(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.values
    return np.asarray(data, dtype=float)


def reconstruction_loss(model: MLPModel, data) -> float:
    """Eval-mode MSE over all samples and channels."""
    values = _dataset_values(data)
    out = forward(model, values, mode="eval")
    return float(np.mean((out - values) ** 2))


def train(model: MLPModel, train_set, test_set, cfg: TrainConfig) -> tuple[MLPModel, TrainReport]:
    """Mini-batch Adam training; returns the snapshot with the lowest test loss.

    Shuffle order is fixed by cfg.seed. Trailing batches of a single row
    are dropped (batch statistics are undefined for them). Raises
    :class:`TrainingDivergedError` if any loss goes non-finite.
    """
    train_values = _dataset_values(train_set)
    test_values = _dataset_values(test_set)
    for name, ds in (("train", train_set), ("test", test_set)):
        if isinstance(ds, Dataset) and not ds.normalized:
            raise ValidationError(f"{name} set must be normalized")
    if train_values.shape[1] != model.n_inputs or test_values.shape[1] != model.n_inputs:
        raise ValidationError("dataset width does not match model input size")

    rng = np.random.default_rng(cfg.seed)
    adam = AdamState(model)
    report = TrainReport()
    best_loss = np.inf
    best_model = model.copy()

    n = train_values.shape[0]
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            if idx.size < 2:
                continue
            batch = train_values[idx]
            loss, grads = loss_and_gradients(model, batch)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            adam.step(grads, cfg)
            total += loss * idx.size
            seen += idx.size
        epoch_train = total / seen
        epoch_test = reconstruction_loss(model, test_values)
        if not np.isfinite(epoch_test):
            raise TrainingDivergedError(epoch, epoch_test)
        report.train_loss.append(epoch_train)
        report.test_loss.append(epoch_test)
        if epoch_test < best_loss:
            best_loss = epoch_test
            best_model = model.copy()
    return best_model, report


def extract_functional_matrix(model: MLPModel, fold_batchnorm: bool = False) -> FunctionalMatrix:
    """Product of the two decoder weight matrices, shape (N_z, M).

    Raw linear weights only by default; ``fold_batchnorm`` additionally
    folds the decoder hidden layer's gamma / sqrt(running var + eps)
    scaling between the two factors.
    """
    if len(model.sizes) != 5:
        raise ValidationError("functional matrix extraction expects a 5-layer model")
    w3, w4 = model.weights[2], model.weights[3]
    if fold_batchnorm:
        scale = model.bn_gamma[2] / np.sqrt(model.bn_run_var[2] + BN_EPS)
        return FunctionalMatrix(w=(w3 * scale) @ w4)
    return FunctionalMatrix(w=w3 @ w4)


def model_to_json(model: MLPModel, metadata: dict | None = None) -> str:
    doc = {
        "sizes": list(model.sizes),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "bn_gamma": [g.tolist() for g in model.bn_gamma],
        "bn_shift": [s.tolist() for s in model.bn_shift],
        "bn_run_mean": [m.tolist() for m in model.bn_run_mean],
        "bn_run_var": [v.tolist() for v in model.bn_run_var],
        "metadata": metadata or {},
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> MLPModel:
    doc = json.loads(text)
    return MLPModel(
        sizes=tuple(doc["sizes"]),
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        bn_gamma=[np.asarray(g, dtype=float) for g in doc["bn_gamma"]],
        bn_shift=[np.asarray(s, dtype=float) for s in doc["bn_shift"]],
        bn_run_mean=[np.asarray(m, dtype=float) for m in doc["bn_run_mean"]],
        bn_run_var=[np.asarray(v, dtype=float) for v in doc["bn_run_var"]],
    )
