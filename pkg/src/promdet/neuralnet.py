"""From-scratch feed-forward binary classifier with full gradient training.

Dense / ReLU / batch-norm / dropout / sigmoid layers, Adam over shuffled
mini-batches, binary cross-entropy loss. Everything runs on numpy in double
precision and is deterministic given a seed; analytic gradients are checked
against central finite differences in the test suite.

Two presets are included: a word-level net (6 dense layers, 50 epochs) and a
deeper syllable-level net (8 hidden ReLU layers, 200 epochs). Both are plain
NetConfig values, so any other layer stack works the same way.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregate import FeatureMatrix

BCE_EPS = 1e-7
BN_EPS = 1e-5
BN_MOMENTUM = 0.9
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# ---------------------------------------------------------------------------
# Layer specs and configs

@dataclass(frozen=True)
class LayerSpec:
    kind: str  # dense | relu | batchnorm | dropout | sigmoid
    units: int | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.kind == "dense":
            if self.units is None or self.units < 1:
                raise ValueError("dense layer needs units >= 1")
        elif self.kind == "dropout":
            if self.rate is None or not 0.0 <= self.rate < 1.0:
                raise ValueError("dropout rate must be in [0, 1)")
        elif self.kind not in ("relu", "batchnorm", "sigmoid"):
            raise ValueError(f"unknown layer kind {self.kind!r}")


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units=units)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def batchnorm() -> LayerSpec:
    return LayerSpec("batchnorm")


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("dropout", rate=rate)


def sigmoid() -> LayerSpec:
    return LayerSpec("sigmoid")


@dataclass(frozen=True)
class NetConfig:
    layers: tuple[LayerSpec, ...]
    input_dim: int
    epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    preset: str | None = None


def word_preset(input_dim: int, seed: int = 0, epochs: int = 50) -> NetConfig:
    """Word-level net: 6 dense layers narrowing 64 -> 1, with ReLU + batch
    norm + dropout(0.3) after the first and third, trained 50 epochs."""
    layers = (
        dense(64), relu(), batchnorm(), dropout(0.3),
        dense(32),
        dense(32), relu(), batchnorm(), dropout(0.3),
        dense(16),
        dense(8),
        dense(1), sigmoid(),
    )
    return NetConfig(layers=layers, input_dim=input_dim, epochs=epochs, seed=seed, preset="word")


def syllable_preset(input_dim: int, seed: int = 0, epochs: int = 200) -> NetConfig:
    """Syllable-level net: 8 hidden ReLU layers in a narrowing width pyramid,
    trained 200 epochs."""
    widths = (128, 128, 64, 64, 32, 32, 16, 8)
    layers = []
    for w in widths:
        layers += [dense(w), relu()]
    layers += [dense(1), sigmoid()]
    return NetConfig(layers=tuple(layers), input_dim=input_dim, epochs=epochs, seed=seed, preset="syllable")


@dataclass
class TrainReport:
    """Per-epoch training trace plus the held-out accuracy when supplied."""

    losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)
    final_accuracy: float | None = None

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["epoch", "loss", "train_acc"])
            for i, (loss, acc) in enumerate(zip(self.losses, self.accuracies), 1):
                writer.writerow([i, repr(loss), repr(acc)])


# ---------------------------------------------------------------------------
# Layers

def _stable_sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class _Dense:
    def __init__(self, in_dim: int, units: int, rng: np.random.Generator):
        self.w = rng.normal(0.0, np.sqrt(2.0 / in_dim), size=(in_dim, units))
        self.b = np.zeros(units)

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train, rng, update_stats):
        return x @ self.w + self.b, x

    def backward(self, dy, cache, train):
        x = cache
        return dy @ self.w.T, {"w": x.T @ dy, "b": dy.sum(axis=0)}


class _Relu:
    def params(self):
        return {}

    def forward(self, x, train, rng, update_stats):
        mask = x > 0  # subgradient at 0 is 0
        return x * mask, mask

    def backward(self, dy, cache, train):
        return dy * cache, {}


class _Sigmoid:
    def params(self):
        return {}

    def forward(self, x, train, rng, update_stats):
        y = _stable_sigmoid(x)
        return y, y

    def backward(self, dy, cache, train):
        y = cache
        return dy * y * (1.0 - y), {}


class _Dropout:
    def __init__(self, rate: float):
        self.rate = rate

    def params(self):
        return {}

    def forward(self, x, train, rng, update_stats):
        if not train or rng is None or self.rate == 0.0:
            return x, None  # inference (and disabled-dropout) path is the identity
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dy, cache, train):
        if cache is None:
            return dy, {}
        return dy * cache, {}


class _BatchNorm:
    def __init__(self, width: int):
        self.gamma = np.ones(width)
        self.beta = np.zeros(width)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def forward(self, x, train, rng, update_stats):
        if train:
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            if update_stats:
                self.running_mean = BN_MOMENTUM * self.running_mean + (1 - BN_MOMENTUM) * mu
                self.running_var = BN_MOMENTUM * self.running_var + (1 - BN_MOMENTUM) * var
        else:
            mu = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mu) * inv_std
        return self.gamma * xhat + self.beta, (x, mu, var, inv_std, xhat, train)

    def backward(self, dy, cache, train):
        x, mu, var, inv_std, xhat, was_train = cache
        grads = {"gamma": (dy * xhat).sum(axis=0), "beta": dy.sum(axis=0)}
        if not was_train:
            return dy * self.gamma * inv_std, grads
        n = x.shape[0]
        dxhat = dy * self.gamma
        dvar = (dxhat * (x - mu) * -0.5 * inv_std**3).sum(axis=0)
        dmu = (-dxhat * inv_std).sum(axis=0) + dvar * (-2.0 * (x - mu)).sum(axis=0) / n
        dx = dxhat * inv_std + dvar * 2.0 * (x - mu) / n + dmu / n
        return dx, grads


_LAYER_KINDS = {"dense", "relu", "batchnorm", "dropout", "sigmoid"}


class Network:
    """A built network: layer objects plus the config that produced them."""

    def __init__(self, config: NetConfig, layers: list):
        self.config = config
        self.layers = layers

    def parameter_items(self) -> list[tuple[int, str, np.ndarray]]:
        return [(i, name, arr) for i, layer in enumerate(self.layers) for name, arr in layer.params().items()]

    def forward_full(self, x, train=False, rng=None, update_stats=True):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train, rng, update_stats)
            caches.append(cache)
        return x, caches

    def backward_full(self, dy, caches, train):
        grads: dict[tuple[int, str], np.ndarray] = {}
        for i in reversed(range(len(self.layers))):
            dy, layer_grads = self.layers[i].backward(dy, caches[i], train)
            for name, g in layer_grads.items():
                grads[(i, name)] = g
        return grads


def build(config: NetConfig) -> Network:
    """Instantiate a network with He-initialized dense weights.

    The layer sequence must end in dense(1) followed by sigmoid so the output
    is a probability.
    """
    if len(config.layers) < 2 or config.layers[-1].kind != "sigmoid" or (
        config.layers[-2].kind != "dense" or config.layers[-2].units != 1
    ):
        raise ValueError("layer sequence must end with dense(1), sigmoid")
    if config.input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    seeds = np.random.SeedSequence([config.seed, 0]).spawn(len(config.layers))
    layers = []
    width = config.input_dim
    for spec, seed in zip(config.layers, seeds):
        if spec.kind == "dense":
            layers.append(_Dense(width, spec.units, np.random.default_rng(seed)))
            width = spec.units
        elif spec.kind == "relu":
            layers.append(_Relu())
        elif spec.kind == "batchnorm":
            layers.append(_BatchNorm(width))
        elif spec.kind == "dropout":
            layers.append(_Dropout(spec.rate))
        elif spec.kind == "sigmoid":
            layers.append(_Sigmoid())
    return Network(config, layers)


def forward(net: Network, batch: np.ndarray, mode: str = "infer", rng=None) -> np.ndarray:
    """Probabilities for a batch; mode "train" applies dropout (when an rng is
    given) and batch statistics, "infer" uses running statistics only."""
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.config.input_dim:
        raise ValueError(f"expected batch of width {net.config.input_dim}, got shape {batch.shape}")
    out, _ = net.forward_full(batch, train=(mode == "train"), rng=rng, update_stats=(mode == "train"))
    return out[:, 0]


def loss_bce(p: np.ndarray, y: np.ndarray) -> float:
    """Binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def _loss_bce_grad(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d(loss)/dp, zero where the clamp is active."""
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    grad = (-y / pc + (1.0 - y) / (1.0 - pc)) / len(p)
    grad[(p < BCE_EPS) | (p > 1.0 - BCE_EPS)] = 0.0
    return grad


def gradient_check(net: Network, batch: np.ndarray, labels: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in train mode with dropout disabled (rng=None) and running statistics
    frozen, so every forward pass is a pure function of the parameters. The
    denominator is floored at 1e-6: differences (eps_mach * loss / h, about
    1e-11) swamp the ratio on near-zero-gradient coordinates, so those are
    effectively compared absolutely instead.
    """
    batch = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)

    out, caches = net.forward_full(batch, train=True, rng=None, update_stats=False)
    p = out[:, 0]
    analytic = net.backward_full(_loss_bce_grad(p, labels)[:, None], caches, train=True)

    def loss_now():
        o, _ = net.forward_full(batch, train=True, rng=None, update_stats=False)
        return loss_bce(o[:, 0], labels)

    worst = 0.0
    for i, name, arr in net.parameter_items():
        ga = analytic[(i, name)]
        flat = arr.ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = loss_now()
            flat[j] = orig - h
            down = loss_now()
            flat[j] = orig
            gn = (up - down) / (2.0 * h)
            gaj = ga.ravel()[j]
            err = abs(gaj - gn) / max(abs(gaj) + abs(gn), 1e-6)
            worst = max(worst, err)
    return worst


def train(net: Network, fm, config: NetConfig | None = None, eval_fm=None) -> TrainReport:
    """Adam over shuffled mini-batches for config.epochs; deterministic by seed.

    Per-epoch loss is the sample-weighted mean of mini-batch losses; per-epoch
    accuracy is measured on the full training set in inference mode. When
    eval_fm is given, its inference accuracy is recorded as final_accuracy.
    """
    config = config or net.config
    x, y = _features_and_labels(fm)
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")

    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    dropout_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    adam_m = {key: np.zeros_like(arr) for i, name, arr in net.parameter_items() for key in [(i, name)]}
    adam_v = {key: np.zeros_like(arr) for i, name, arr in net.parameter_items() for key in [(i, name)]}
    t = 0
    report = TrainReport()
    n = len(y)

    for _ in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            out, caches = net.forward_full(xb, train=True, rng=dropout_rng, update_stats=True)
            p = out[:, 0]
            total_loss += loss_bce(p, yb) * len(idx)
            grads = net.backward_full(_loss_bce_grad(p, yb)[:, None], caches, train=True)
            t += 1
            correction = np.sqrt(1.0 - ADAM_BETA2**t) / (1.0 - ADAM_BETA1**t)
            for i, name, arr in net.parameter_items():
                g = grads[(i, name)]
                key = (i, name)
                adam_m[key] = ADAM_BETA1 * adam_m[key] + (1 - ADAM_BETA1) * g
                adam_v[key] = ADAM_BETA2 * adam_v[key] + (1 - ADAM_BETA2) * g * g
                arr -= config.learning_rate * correction * adam_m[key] / (np.sqrt(adam_v[key]) + ADAM_EPS)
        report.losses.append(total_loss / n)
        report.accuracies.append(float(np.mean((forward(net, x) >= 0.5) == (y == 1.0))))

    if eval_fm is not None:
        _, acc = predict(net, eval_fm)
        report.final_accuracy = acc
    return report


def predict(net: Network, fm, threshold: float = 0.5):
    """Binary labels (probability >= threshold maps to 1) and the agreement
    with ground truth where labels exist (None when nothing is labeled)."""
    if isinstance(fm, FeatureMatrix):
        x = fm.rows
        have = fm.labeled
        truth = fm.labels
    else:
        x = np.asarray(fm, dtype=np.float64)
        have = None
        truth = None
    p = forward(net, x, mode="infer")
    labels = (p >= threshold).astype(np.int64)
    accuracy = None
    if have is not None and have.any():
        accuracy = float(np.mean(labels[have] == truth[have]))
    return labels, accuracy


def _features_and_labels(fm):
    if isinstance(fm, FeatureMatrix):
        sub = fm.labeled_only()
        return sub.rows, sub.labels.astype(np.float64)
    x, y = fm
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(net: Network, path: str | Path) -> None:
    """Write layers, parameters and running statistics as JSON."""
    state = []
    for spec, layer in zip(net.config.layers, net.layers):
        entry = {"kind": spec.kind, "units": spec.units, "rate": spec.rate}
        entry["params"] = {name: arr.tolist() for name, arr in layer.params().items()}
        if isinstance(layer, _BatchNorm):
            entry["running_mean"] = layer.running_mean.tolist()
            entry["running_var"] = layer.running_var.tolist()
        state.append(entry)
    obj = {
        "input_dim": net.config.input_dim,
        "epochs": net.config.epochs,
        "batch_size": net.config.batch_size,
        "learning_rate": net.config.learning_rate,
        "seed": net.config.seed,
        "preset": net.config.preset,
        "layers": state,
    }
    Path(path).write_text(json.dumps(obj) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> Network:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    specs = tuple(LayerSpec(e["kind"], units=e["units"], rate=e["rate"]) for e in obj["layers"])
    config = NetConfig(
        layers=specs,
        input_dim=obj["input_dim"],
        epochs=obj["epochs"],
        batch_size=obj["batch_size"],
        learning_rate=obj["learning_rate"],
        seed=obj["seed"],
        preset=obj.get("preset"),
    )
    net = build(config)
    for entry, layer in zip(obj["layers"], net.layers):
        for name, arr in layer.params().items():
            arr[...] = np.asarray(entry["params"][name], dtype=np.float64)
        if isinstance(layer, _BatchNorm):
            layer.running_mean = np.asarray(entry["running_mean"], dtype=np.float64)
            layer.running_var = np.asarray(entry["running_var"], dtype=np.float64)
    return net
