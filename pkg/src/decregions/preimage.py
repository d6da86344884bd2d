"""Backward construction of decision regions.

Starting from the class-dominance set in the last hidden feature space,
activation inverses and affine pre-images are applied layer by layer down
to the input space. Every stage is recorded so 2D stages can be drawn.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from decregions.geometry import (
    DEFAULT_BOX, EPS_FEAS, Polyhedron, affine_preimage, difference,
    feasible_interior, intersect, numerical_rank,
)
from decregions.netmodel import Activation, Network
from decregions.regions import UnsupportedActivation, box_bound_of

MAX_ORTHANT_DIM = 20


class PreimageSizeError(ValueError):
    pass


@dataclass
class PolyUnion:
    pieces: list[Polyhedron]
    dim: int

    def __post_init__(self):
        for p in self.pieces:
            if p.dim != self.dim:
                raise ValueError(f"piece of dim {p.dim} in a union of dim {self.dim}")

    def __len__(self) -> int:
        return len(self.pieces)

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return any(p.contains(x, tol) for p in self.pieces)

    def contains_many(self, X, tol: float = EPS_FEAS) -> np.ndarray:
        X = np.atleast_2d(X)
        hit = np.zeros(len(X), dtype=bool)
        for p in self.pieces:
            hit |= p.contains_many(X, tol)
        return hit

    def to_json(self) -> dict:
        return {"dim": self.dim, "pieces": [p.to_json() for p in self.pieces]}


@dataclass(frozen=True)
class Stage:
    label: str  # "V_j" | "sigma_inv" | "h_inv" | "range" | "box"
    layer: int | None
    union: PolyUnion

    @property
    def title(self) -> str:
        names = {"V_j": "V", "sigma_inv": "after sigma_{k}^-1", "h_inv": "after h_{k}^-1",
                 "range": "after range-intersection (layer {k})", "box": "clipped to box"}
        return names[self.label].format(k=self.layer)


@dataclass
class BackwardTrace:
    class_index: int
    stages: list[Stage] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"class_index": self.class_index,
                "stages": [{"label": s.label, "layer": s.layer, "title": s.title,
                            **s.union.to_json()} for s in self.stages]}


def _prune(pieces, eps, bound=DEFAULT_BOX):
    return [p for p in pieces if feasible_interior(p, bound, eps) is not None]


def canonicalize(pieces: list[Polyhedron], eps: float = EPS_FEAS,
                 bound: float = DEFAULT_BOX) -> list[Polyhedron]:
    """Split overlapping pieces so interiors are pairwise disjoint."""
    out: list[Polyhedron] = []
    for Q in _prune(pieces, eps, bound):
        frags = [Q]
        for P in out:
            nxt = []
            for F in frags:
                if feasible_interior(intersect(F, P), bound, eps) is None:
                    nxt.append(F)
                else:
                    nxt.extend(difference(F, P, bound, eps))
            frags = nxt
            if not frags:
                break
        out.extend(frags)
    return out


def target_set(net: Network, class_index: int) -> Polyhedron:
    """Dominance set of class ``class_index`` in the last hidden feature space."""
    m = net.n_classes
    if not 1 <= class_index <= m:
        raise ValueError(f"class index {class_index} out of range 1..{m}")
    W, b = net.output.weights, net.output.bias
    j = class_index - 1
    others = [k for k in range(m) if k != j]
    A = (W[:, others] - W[:, [j]]).T
    c = b[j] - b[others]
    return Polyhedron.from_rows(A, c, W.shape[0], np.ones(len(others), bool))


def _orthant_rows(bits, n):
    # bit 0: coordinate <= 0, bit 1: coordinate >= 0
    signs = np.where(np.array(bits, dtype=bool), -1.0, 1.0)
    return np.diag(signs), np.zeros(n)


def _check_size(n):
    if n > MAX_ORTHANT_DIM:
        raise PreimageSizeError(
            f"orthant enumeration over {n} coordinates exceeds the cap of {MAX_ORTHANT_DIM}")


def range_intersection(kind: Activation, U: PolyUnion) -> PolyUnion:
    """``U ∩ act(R^n)`` for ReLU (nonnegative orthant); identity otherwise."""
    if kind.kind != "relu":
        return U
    n = U.dim
    orth = Polyhedron(-np.eye(n), np.zeros(n), n)
    return PolyUnion([intersect(P, orth) for P in U.pieces], n)


def activation_preimage(kind: Activation, U: PolyUnion, eps: float = EPS_FEAS,
                        bound: float = DEFAULT_BOX) -> PolyUnion:
    """Exact pre-image of ``U`` under the componentwise activation."""
    if not kind.piecewise_linear:
        raise UnsupportedActivation(0, kind.kind)
    if kind.kind == "identity":
        return U
    n = U.dim
    _check_size(n)
    out = []
    for P in U.pieces:
        for bits in itertools.product((0, 1), repeat=n):
            if kind.kind == "leaky_relu":
                slopes = np.where(np.array(bits, dtype=bool), 1.0, kind.alpha)
            else:  # relu: coordinates on the lower branch are pinned at 0
                slopes = np.array(bits, dtype=float)
            OA, Oc = _orthant_rows(bits, n)
            sub = Polyhedron.from_rows(P.A * slopes[None, :], P.c, n, P.strict)
            out.append(intersect(sub, Polyhedron(OA, Oc, n)))
    return PolyUnion(_prune(out, eps, bound), n)


def layer_preimage(U: PolyUnion, W, b, eps: float = EPS_FEAS,
                   bound: float = DEFAULT_BOX) -> PolyUnion:
    """Pre-image of ``U`` under ``x -> W.T x + b`` (piece by piece)."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    pieces = _prune([affine_preimage(P, W, b) for P in U.pieces], eps, bound)
    # a non-surjective map can make interior-disjoint pieces overlap
    if numerical_rank(W)[0] < W.shape[1]:
        pieces = canonicalize(pieces, eps, bound)
    return PolyUnion(pieces, W.shape[0])


def decision_region_backward(net: Network, class_index: int, box: Polyhedron,
                             eps: float = EPS_FEAS) -> tuple[PolyUnion, BackwardTrace]:
    for k, layer in enumerate(net.hidden, start=1):
        if not layer.activation.piecewise_linear:
            raise UnsupportedActivation(k, layer.activation.kind)
    trace = BackwardTrace(class_index)
    V = target_set(net, class_index)
    U = PolyUnion(_prune([V], eps), V.dim)
    trace.stages.append(Stage("V_j", None, U))
    for k in range(len(net.hidden), 0, -1):
        layer = net.hidden[k - 1]
        if layer.activation.kind == "relu":
            U = range_intersection(layer.activation, U)
            U = PolyUnion(_prune(U.pieces, eps), U.dim)
            trace.stages.append(Stage("range", k, U))
        U = activation_preimage(layer.activation, U, eps)
        trace.stages.append(Stage("sigma_inv", k, U))
        U = layer_preimage(U, layer.weights, layer.bias, eps)
        trace.stages.append(Stage("h_inv", k, U))
    bound = box_bound_of(box)
    clipped = canonicalize([intersect(P, box) for P in U.pieces], eps, bound)
    result = PolyUnion(clipped, net.input_dim)
    trace.stages.append(Stage("box", None, result))
    return result, trace
