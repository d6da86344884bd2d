"""Feedforward networks with a linear output layer.

Layer ``k`` computes ``f_k = act_k(W_k.T @ f_{k-1} + b_k)`` with ``W_k`` of
shape ``(n_{k-1}, n_k)``; the output layer has no activation. Class labels
are 1-based throughout the public API.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np


class NetworkError(ValueError):
    """Malformed network description."""

    def __init__(self, message: str, layer: int | None = None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


class ActivationError(ValueError):
    pass


@dataclass(frozen=True)
class Activation:
    kind: str  # "leaky_relu" | "relu" | "elu" | "sigmoid" | "identity"
    alpha: float | None = None

    KINDS = ("leaky_relu", "relu", "elu", "sigmoid", "identity")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ActivationError(f"unknown activation {self.kind!r}")
        if self.kind == "leaky_relu":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ActivationError(f"leaky ReLU alpha must lie in (0, 1), got {self.alpha}")
        elif self.alpha is not None:
            raise ActivationError(f"{self.kind} takes no alpha")

    @property
    def piecewise_linear(self) -> bool:
        return self.kind in ("leaky_relu", "relu", "identity")

    @property
    def strictly_increasing(self) -> bool:
        return self.kind != "relu"

    @property
    def surjective_onto_reals(self) -> bool:
        return self.kind in ("leaky_relu", "identity")

    @property
    def slopes(self) -> tuple[float, float]:
        """(lower-branch slope, upper-branch slope) for piecewise-linear kinds."""
        if self.kind == "leaky_relu":
            return (self.alpha, 1.0)
        if self.kind == "relu":
            return (0.0, 1.0)
        if self.kind == "identity":
            return (1.0, 1.0)
        raise ActivationError(f"{self.kind} is not piecewise linear")

    def __call__(self, t):
        return activation_value(self, t)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out


def LeakyReLU(alpha: float) -> Activation:
    return Activation("leaky_relu", float(alpha))


RELU = Activation("relu")
ELU = Activation("elu")
SIGMOID = Activation("sigmoid")
IDENTITY = Activation("identity")


def activation_value(kind: Activation, t):
    t = np.asarray(t, dtype=float)
    if kind.kind == "leaky_relu":
        return np.maximum(t, kind.alpha * t)
    if kind.kind == "relu":
        return np.maximum(t, 0.0)
    if kind.kind == "elu":
        return np.where(t < 0, np.expm1(np.minimum(t, 0.0)), t)
    if kind.kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * t))
    return t.copy()


def activation_inverse(kind: Activation, t):
    """Inverse on the image of the activation.

    ReLU is not invertible. ELU needs ``t > -1`` and sigmoid ``0 < t < 1``.
    """
    t = np.asarray(t, dtype=float)
    if not kind.strictly_increasing:
        raise ActivationError("relu is not invertible")
    if kind.kind == "leaky_relu":
        return np.where(t < 0, t / kind.alpha, t)
    if kind.kind == "elu":
        if np.any(t <= -1.0):
            raise ActivationError("ELU inverse needs t > -1")
        return np.where(t < 0, np.log1p(np.minimum(t, 0.0)), t)
    if kind.kind == "sigmoid":
        if np.any((t <= 0.0) | (t >= 1.0)):
            raise ActivationError("sigmoid inverse needs 0 < t < 1")
        return np.log(t) - np.log1p(-t)
    return t.copy()


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (n_in, n_out)
    bias: np.ndarray
    activation: Activation | None = None

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class EvalTrace:
    pre: list[np.ndarray]
    post: list[np.ndarray]
    logits: np.ndarray


@dataclass(frozen=True)
class Classification:
    label: int | None  # None marks a tie
    margin: float  # top logit minus runner-up

    @property
    def is_tie(self) -> bool:
        return self.label is None


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Network:
    """Hidden layers plus a linear output layer; immutable after creation."""

    def __init__(self, input_dim: int, hidden: Iterable[Layer], output: Layer):
        hidden = [Layer(_frozen(l.weights), _frozen(l.bias), l.activation) for l in hidden]
        output = Layer(_frozen(output.weights), _frozen(output.bias), None)
        if input_dim < 1:
            raise NetworkError("input_dim must be positive")
        width = input_dim
        for k, layer in enumerate([*hidden, output], start=1):
            if layer.weights.ndim != 2:
                raise NetworkError("weights must be a matrix", k)
            if layer.n_in != width:
                raise NetworkError(
                    f"weights have {layer.n_in} rows, expected {width} (previous width)", k)
            if layer.bias.shape != (layer.n_out,):
                raise NetworkError(
                    f"bias has length {layer.bias.size}, expected {layer.n_out}", k)
            if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
                raise NetworkError("non-finite parameters", k)
            if k <= len(hidden) and layer.activation is None:
                raise NetworkError("hidden layer needs an activation", k)
            width = layer.n_out
        self.input_dim = int(input_dim)
        self.hidden = tuple(hidden)
        self.output = output

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [l.n_out for l in self.hidden] + [self.output.n_out]

    @property
    def n_classes(self) -> int:
        return self.output.n_out

    @property
    def n_layers(self) -> int:
        """``L``: hidden layers plus the output layer."""
        return len(self.hidden) + 1

    @property
    def layers(self) -> tuple[Layer, ...]:
        return (*self.hidden, self.output)

    def to_json(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [
                {"weights": l.weights.tolist(), "bias": l.bias.tolist(),
                 "activation": l.activation.to_json()}
                for l in self.hidden
            ],
            "output": {"weights": self.output.weights.tolist(),
                       "bias": self.output.bias.tolist()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def __repr__(self) -> str:
        return f"Network(widths={self.widths})"


def _parse_activation(entry, k: int) -> Activation:
    if not isinstance(entry, dict) or "kind" not in entry:
        raise NetworkError("activation must be an object with a 'kind'", k)
    try:
        return Activation(entry["kind"], entry.get("alpha"))
    except ActivationError as e:
        raise NetworkError(str(e), k) from None


def _matrix(rows, k: int, what: str) -> np.ndarray:
    try:
        M = np.array(rows, dtype=float)
    except (TypeError, ValueError):
        raise NetworkError(f"{what} is not a rectangular numeric matrix", k) from None
    if M.ndim != 2:
        raise NetworkError(f"{what} must be a list of rows", k)
    return M


def network_from_json(data: dict) -> Network:
    try:
        d = int(data["input_dim"])
        layers = data.get("layers", [])
        out = data["output"]
    except (KeyError, TypeError):
        raise NetworkError("network JSON needs 'input_dim' and 'output'") from None
    hidden = []
    for k, entry in enumerate(layers, start=1):
        hidden.append(Layer(_matrix(entry["weights"], k, "weights"),
                            np.array(entry["bias"], dtype=float),
                            _parse_activation(entry.get("activation"), k)))
    k_out = len(layers) + 1
    if "activation" in out:
        raise NetworkError("the output layer is linear and takes no activation", k_out)
    output = Layer(_matrix(out["weights"], k_out, "weights"), np.array(out["bias"], dtype=float))
    return Network(d, hidden, output)


def load_network(source: IO | str | bytes) -> Network:
    """Read a network from a JSON stream, string or bytes."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source)
    except json.JSONDecodeError as e:
        raise NetworkError(f"invalid JSON: {e}") from None
    return network_from_json(data)


def forward(net: Network, x) -> EvalTrace:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.input_dim},)")
    pre, post = [], []
    f = x
    for layer in net.hidden:
        z = layer.weights.T @ f + layer.bias
        f = activation_value(layer.activation, z)
        pre.append(z)
        post.append(f)
    logits = net.output.weights.T @ f + net.output.bias
    return EvalTrace(pre, post, logits)


def logits_batch(net: Network, X) -> np.ndarray:
    """Logits for a batch of inputs (rows of ``X``)."""
    F = np.atleast_2d(np.asarray(X, dtype=float))
    for layer in net.hidden:
        F = activation_value(layer.activation, F @ layer.weights + layer.bias)
    return F @ net.output.weights + net.output.bias


def _classify_logits(z: np.ndarray, eps: float) -> Classification:
    if z.size == 1:
        return Classification(1, math.inf)
    order = np.argsort(-z, kind="stable")
    margin = float(z[order[0]] - z[order[1]])
    return Classification(int(order[0]) + 1 if margin > eps else None, margin)


def classify(net: Network, x, eps: float = 1e-9) -> Classification:
    """Label ``j`` iff logit ``j`` beats every other by more than ``eps``."""
    return _classify_logits(forward(net, x).logits, eps)


def margins_batch(net: Network, X) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (1-based argmax label, top-minus-runner-up margin)."""
    Z = logits_batch(net, X)
    if Z.shape[1] == 1:
        return np.ones(len(Z), dtype=int), np.full(len(Z), np.inf)
    part = np.sort(Z, axis=1)
    return np.argmax(Z, axis=1) + 1, part[:, -1] - part[:, -2]


def class_margin(net: Network, x, j: int) -> float:
    """``min_k (z_j - z_k)``; positive iff ``x`` lies in class ``j``'s region."""
    z = forward(net, x).logits
    if z.size == 1:
        return math.inf
    return float(z[j - 1] - np.delete(z, j - 1).max())


# ---------------------------------------------------------------- builtins

def _eq4() -> Network:
    act = LeakyReLU(0.5)
    return Network(
        2,
        [Layer(np.array([[1.0], [1.0]]), np.zeros(1), act),
         Layer(np.array([[1.0, -1.0]]), np.zeros(2), act)],
        Layer(np.array([[2.0, 1.0], [3.0, 2.0]]), np.array([0.0, 1.0])),
    )


def _eq5() -> Network:
    r = math.sqrt(2.0) / 2.0
    W2T = r * np.array([[1.0, 1.0], [-1.0, 1.0]])
    W3T = np.array([[-1.0, 0.0], [0.0, -3.0]])
    return Network(
        2,
        [Layer(np.eye(2), np.zeros(2), RELU),
         Layer(W2T.T, np.array([math.sqrt(2.0) - 1.0, -3.0]) / math.sqrt(2.0), RELU)],
        Layer(W3T.T, np.array([1.0, 0.0])),
    )


def _lowrank(alpha: float) -> Network:
    W1T = np.array([[1.0, 0.0], [-1.0, 0.0]])
    W2T = np.array([[1.0, 1.0], [0.0, 0.0]])
    return Network(
        2,
        [Layer(W1T.T, np.array([-1.0, -1.0]), LeakyReLU(alpha))],
        Layer(W2T.T, np.array([0.0, -2.0 * alpha])),
    )


def _tight(alpha: float) -> Network:
    W1T = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    W2 = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    return Network(
        2,
        [Layer(W1T.T, np.array([-2.0, -2.0, 0.0]), LeakyReLU(alpha))],
        Layer(W2, np.array([0.0, -3.0 * alpha])),
    )


_BUILTIN_RE = re.compile(r"^(?P<name>[a-z0-9-]+?)(?:\((?P<arg>[^()]*)\))?$")
_PARAMETRIC = {"lowrank-strips": _lowrank, "tight-2-3-2": _tight}
_FIXED = {"eq4-nonpyramidal": _eq4, "eq5-relu": _eq5}
BUILTIN_NAMES = ("eq4-nonpyramidal", "eq5-relu", "lowrank-strips(alpha)", "tight-2-3-2(alpha)")


def builtin(name: str) -> Network:
    """Analytic example networks.

    ``lowrank-strips(alpha)`` and ``tight-2-3-2(alpha)`` take the leaky ReLU
    slope in parentheses (default 0.1 when omitted).
    """
    m = _BUILTIN_RE.match(name.strip())
    if m:
        base, arg = m.group("name"), m.group("arg")
        if base in _FIXED and arg is None:
            return _FIXED[base]()
        if base in _PARAMETRIC:
            try:
                alpha = 0.1 if arg in (None, "") else float(arg.split("=")[-1])
            except ValueError:
                raise NetworkError(f"bad builtin parameter in {name!r}") from None
            try:
                return _PARAMETRIC[base](alpha)
            except ActivationError as e:
                raise NetworkError(str(e), 1) from None
    raise KeyError(f"unknown builtin network {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
