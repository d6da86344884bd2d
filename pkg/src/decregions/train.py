"""Toy datasets and a deterministic minibatch SGD trainer.

Networks are trained with softmax cross-entropy, classical momentum and a
step schedule that halves the learning rate every ``halving_period``
epochs. Everything is driven by ``numpy.random.default_rng(seed)``, so the
same dataset, config and seed give bit-identical weights.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from decregions.netmodel import Activation, Layer, LeakyReLU, Network, activation_value


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class Dataset:
    points: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) 1-based class labels
    name: str
    seed: int
    n_classes: int = 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels differ in length")
        if len(self.labels) and (self.labels.min() < 1 or self.labels.max() > self.n_classes):
            raise ValueError("labels must lie in 1..n_classes")

    def __len__(self) -> int:
        return len(self.labels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.points.shape[1]
        w.writerow([f"x{i + 1}" for i in range(d)] + ["label"])
        for p, l in zip(self.points, self.labels):
            w.writerow([repr(float(v)) for v in p] + [int(l)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"name": self.name, "seed": self.seed, "size": len(self),
                "n_classes": self.n_classes, "meta": self.meta,
                "points": self.points.tolist(), "labels": self.labels.tolist()}


BLUE, RED = 1, 2


def gen_strips(n_per_class: int, seed: int = 0) -> Dataset:
    """Blue uniform on ``([-2,-1] ∪ [1,2]) x [-1/2, 1/2]``, red uniform on
    ``[-1,1] x [-1/2,1/2]``; blue split evenly between its two strips."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be positive")
    rng = np.random.default_rng(seed)
    n_left = n_per_class // 2
    x1 = rng.uniform(1.0, 2.0, n_per_class)
    x1[:n_left] *= -1.0
    blue = np.c_[x1, rng.uniform(-0.5, 0.5, n_per_class)]
    red = np.c_[rng.uniform(-1.0, 1.0, n_per_class), rng.uniform(-0.5, 0.5, n_per_class)]
    pts = np.vstack([blue, red])
    labels = np.r_[np.full(n_per_class, BLUE), np.full(n_per_class, RED)]
    return Dataset(pts, labels, "strips", seed, meta={"n_per_class": n_per_class})


ISLAND_CENTERS = ((-2.5, -2.5), (2.5, 2.5))
ISLAND_HALF = 1.0
RED_HALO = 1.6


def gen_two_islands(n_per_class: int, seed: int = 0) -> Dataset:
    """Two blue squares near opposite corners of ``[-4,4]^2``; red fills the
    rest of the square outside an inf-norm halo of 1.6 around each island.

    The red points form a band through the middle that also wraps around
    the islands, so a 2-unit hidden layer cannot fold its way to a perfect
    fit; the Bayes-optimal blue region is disconnected.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be positive")
    rng = np.random.default_rng(seed)
    centers = np.array(ISLAND_CENTERS)
    n_a = n_per_class // 2
    blue = np.vstack([
        centers[0] + rng.uniform(-ISLAND_HALF, ISLAND_HALF, (n_a, 2)),
        centers[1] + rng.uniform(-ISLAND_HALF, ISLAND_HALF, (n_per_class - n_a, 2)),
    ])
    red = []
    while len(red) < n_per_class:
        # rejection sampling
        cand = rng.uniform(-4.0, 4.0, (4 * n_per_class, 2))
        dist = np.min([np.abs(cand - c).max(axis=1) for c in centers], axis=0)
        red.extend(cand[dist >= RED_HALO])
    red = np.array(red[:n_per_class])
    pts = np.vstack([blue, red])
    labels = np.r_[np.full(n_per_class, BLUE), np.full(n_per_class, RED)]
    return Dataset(pts, labels, "two_islands", seed,
                   meta={"n_per_class": n_per_class, "centers": centers.tolist(),
                         "island_half_width": ISLAND_HALF, "red_halo": RED_HALO})


GENERATORS = {"strips": gen_strips, "two_islands": gen_two_islands}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    learning_rate: float = 0.1
    halving_period: int = 50
    momentum: float = 0.9
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.learning_rate <= 0 or self.halving_period < 1 or self.batch_size < 1:
            raise ValueError("learning rate, halving period and batch size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")


@dataclass
class History:
    loss: list[float] = field(default_factory=list)
    errors: list[int] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,loss,errors"]
        lines += [f"{e},{l!r},{n}" for e, (l, n) in enumerate(zip(self.loss, self.errors))]
        return "\n".join(lines) + "\n"


def _act_grad(act: Activation, z: np.ndarray) -> np.ndarray:
    if act.kind == "leaky_relu":
        return np.where(z > 0, 1.0, act.alpha)
    if act.kind == "relu":
        return (z > 0).astype(float)
    if act.kind == "elu":
        return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))
    if act.kind == "sigmoid":
        s = activation_value(act, z)
        return s * (1.0 - s)
    return np.ones_like(z)


def _params(net: Network) -> list[np.ndarray]:
    out = []
    for l in net.layers:
        out += [np.array(l.weights), np.array(l.bias)]
    return out


def _rebuild(net: Network, params: list[np.ndarray]) -> Network:
    acts = [l.activation for l in net.hidden]
    hidden = [Layer(params[2 * k], params[2 * k + 1], a) for k, a in enumerate(acts)]
    return Network(net.input_dim, hidden, Layer(params[-2], params[-1]))


def loss_and_grad(params: list[np.ndarray], acts: list[Activation], X: np.ndarray,
                  y: np.ndarray, need_grad: bool = True):
    """Mean softmax cross-entropy and its gradient w.r.t. ``params``."""
    n_hidden = len(acts)
    pres, posts = [], [X]
    F = X
    for k in range(n_hidden):
        Z = F @ params[2 * k] + params[2 * k + 1]
        F = activation_value(acts[k], Z)
        pres.append(Z)
        posts.append(F)
    logits = F @ params[-2] + params[-1]
    shift = logits - logits.max(axis=1, keepdims=True)
    logp = shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))
    idx = y - 1
    loss = -float(np.mean(logp[np.arange(len(y)), idx]))
    if not need_grad:
        return loss, None, logits
    G = np.exp(logp)
    G[np.arange(len(y)), idx] -= 1.0
    G /= len(y)
    grads = [None] * len(params)
    grads[-2] = posts[-1].T @ G
    grads[-1] = G.sum(axis=0)
    back = G @ params[-2].T
    for k in range(n_hidden - 1, -1, -1):
        dZ = back * _act_grad(acts[k], pres[k])
        grads[2 * k] = posts[k].T @ dZ
        grads[2 * k + 1] = dZ.sum(axis=0)
        back = dZ @ params[2 * k].T
    return loss, grads, logits


def init_network(d: int, hidden_widths: list[int], n_classes: int, activation: Activation,
                 rng: np.random.Generator) -> Network:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` weights and biases."""
    widths = [d, *hidden_widths, n_classes]
    layers = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        s = 1.0 / math.sqrt(n_in)
        layers.append((rng.uniform(-s, s, (n_in, n_out)), rng.uniform(-s, s, n_out)))
    hidden = [Layer(W, b, activation) for W, b in layers[:-1]]
    return Network(d, hidden, Layer(*layers[-1]))


def train(dataset: Dataset, hidden_widths: list[int], activation: Activation | None = None,
          config: TrainConfig = TrainConfig()) -> tuple[Network, History]:
    if not hidden_widths:
        raise ValueError("hidden_widths must be nonempty")
    activation = activation or LeakyReLU(0.1)
    rng = np.random.default_rng(config.seed)
    X, y = dataset.points, dataset.labels
    net = init_network(X.shape[1], list(hidden_widths), dataset.n_classes, activation, rng)
    acts = [l.activation for l in net.hidden]
    params = _params(net)
    velocity = [np.zeros_like(p) for p in params]
    history = History()

    def record():
        loss, _, logits = loss_and_grad(params, acts, X, y, need_grad=False)
        history.loss.append(loss)
        history.errors.append(int((np.argmax(logits, axis=1) + 1 != y).sum()))

    record()
    for epoch in range(config.epochs):
        lr = config.learning_rate * 0.5 ** (epoch // config.halving_period)
        order = rng.permutation(len(y))
        # overflow shows up as a non-finite loss, reported below
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, len(y), config.batch_size):
                batch = order[start:start + config.batch_size]
                loss, grads, _ = loss_and_grad(params, acts, X[batch], y[batch])
                if not math.isfinite(loss):
                    raise TrainingDiverged(epoch)
                for p, v, g in zip(params, velocity, grads):
                    v *= config.momentum
                    v -= lr * g
                    p += v
            record()
        if not math.isfinite(history.loss[-1]):
            raise TrainingDiverged(epoch)
    return _rebuild(net, params), history


def gradient_check(net: Network, dataset: Dataset, eps_fd: float = 1e-6,
                   n_params: int = 20, seed: int = 0,
                   breakpoint_tol: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    Points with any pre-activation within ``breakpoint_tol`` of a kink are
    dropped first. The relative error uses ``max(|a|, |n|, 1e-6)`` as the
    denominator so vanishing gradients do not blow it up.
    """
    if not 1e-8 < eps_fd < 1e-3:
        raise ValueError("eps_fd must lie in (1e-8, 1e-3)")
    acts = [l.activation for l in net.hidden]
    params = _params(net)
    X, y = dataset.points, dataset.labels
    keep = np.ones(len(y), dtype=bool)
    F = X
    for k, a in enumerate(acts):
        Z = F @ params[2 * k] + params[2 * k + 1]
        if a.kind in ("leaky_relu", "relu"):
            keep &= (np.abs(Z) > breakpoint_tol).all(axis=1)
        F = activation_value(a, Z)
    X, y = X[keep], y[keep]
    _, grads, _ = loss_and_grad(params, acts, X, y)
    rng = np.random.default_rng(seed)
    sizes = np.array([p.size for p in params])
    picks = rng.choice(sizes.sum(), size=min(n_params, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(flat - offsets[k], params[k].shape)
        orig = params[k][idx]
        params[k][idx] = orig + eps_fd
        up = loss_and_grad(params, acts, X, y, need_grad=False)[0]
        params[k][idx] = orig - eps_fd
        down = loss_and_grad(params, acts, X, y, need_grad=False)[0]
        params[k][idx] = orig
        num = (up - down) / (2 * eps_fd)
        ana = float(grads[k][idx])
        worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-6))
    return worst


def config_to_json(config: TrainConfig) -> dict:
    return asdict(config)


def dataset_from_csv(text: str, name: str = "csv", seed: int = 0) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    body = [r for r in rows[1:] if r]
    pts = np.array([[float(v) for v in r[:-1]] for r in body])
    labels = np.array([int(r[-1]) for r in body])
    return Dataset(pts, labels, name, seed, n_classes=int(labels.max()) if len(labels) else 2)


def dataset_to_json_text(ds: Dataset) -> str:
    return json.dumps(ds.to_json(), indent=2) + "\n"
