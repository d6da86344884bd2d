"""Hypothesis checker for the width conditions that force connected regions.

Two sufficient conditions are checked on the concrete weights:

* deep: ``d = n_0 >= n_1 >= ... >= n_{L-1}``, every hidden activation
  continuous, strictly increasing and onto R (class A), every hidden weight
  matrix of full rank;
* shallow: one hidden layer with ``d >= n_1``, a continuous strictly
  increasing activation (class A or B), full-rank ``W_1``.

The verdict is sound but not complete: ``NoGuarantee`` says nothing about
the actual regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from decregions.geometry import RANK_TOL, numerical_rank
from decregions.netmodel import Activation, Network

CLASS_A = "A"  # continuous, strictly increasing, onto R
CLASS_B = "B"  # continuous, strictly increasing, not onto R
CLASS_C = "C"  # not strictly increasing

THEOREM_DEEP = "deep-pyramidal"
THEOREM_SHALLOW = "one-hidden-layer"


def classify_activation(kind: Activation | str) -> str:
    name = kind if isinstance(kind, str) else kind.kind
    if name in ("leaky_relu", "identity"):
        return CLASS_A
    if name in ("elu", "sigmoid", "softplus"):
        return CLASS_B
    if name == "relu":
        return CLASS_C
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class Reason:
    code: str
    message: str
    layers: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message, "layers": list(self.layers)}


@dataclass(frozen=True)
class LayerRank:
    layer: int
    shape: tuple[int, int]
    rank: int
    spectrum_gap: float

    @property
    def full_rank(self) -> bool:
        return self.rank == min(self.shape)


@dataclass
class CertReport:
    widths: list[int]
    pyramidal_deep: bool
    pyramidal_shallow: bool
    ranks: list[LayerRank]
    activation_classes: list[str]
    rank_tol: float
    guaranteed: bool
    theorem: str | None = None
    reasons: list[Reason] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "GuaranteedConnected" if self.guaranteed else "NoGuarantee"

    def to_json(self) -> dict:
        return {
            "widths": self.widths,
            "pyramidal_deep": self.pyramidal_deep,
            "pyramidal_shallow": self.pyramidal_shallow,
            "ranks": [{"layer": r.layer, "shape": list(r.shape), "rank": r.rank,
                       "spectrum_gap": r.spectrum_gap, "full_rank": r.full_rank}
                      for r in self.ranks],
            "activation_classes": self.activation_classes,
            "rank_tol": self.rank_tol,
            "verdict": self.verdict,
            "theorem": self.theorem,
            "reasons": [r.to_json() for r in self.reasons],
        }


def _fmt_layers(layers) -> str:
    return ",".join(str(k) for k in layers)


def certify(net: Network, rank_tol: float = RANK_TOL) -> CertReport:
    widths = net.widths
    hidden = widths[1:-1]
    chain = widths[:-1]  # n_0 .. n_{L-1}
    deep = all(a >= b for a, b in zip(chain, chain[1:]))
    shallow = len(hidden) == 1 and widths[0] >= hidden[0]
    classes = [classify_activation(l.activation) for l in net.hidden]
    ranks = []
    for k, layer in enumerate(net.hidden, start=1):
        r, gap = numerical_rank(layer.weights, rank_tol)
        ranks.append(LayerRank(k, layer.weights.shape, r, gap))
    full = all(r.full_rank for r in ranks)

    reasons: list[Reason] = []
    for k, (a, b) in enumerate(zip(chain, chain[1:]), start=1):
        if a < b:
            reasons.append(Reason("non_pyramidal", f"non-pyramidal: n{k - 1}={a} < n{k}={b}", (k,)))
    for r in ranks:
        if not r.full_rank:
            reasons.append(Reason(
                "rank_deficient",
                f"rank(W{r.layer})={r.rank} < {min(r.shape)} (spectrum gap {r.spectrum_gap:.3g})",
                (r.layer,)))
    bad_c = [k for k, c in enumerate(classes, start=1) if c == CLASS_C]
    if bad_c:
        reasons.append(Reason("activation_class_c",
                              f"activation class C at layers {_fmt_layers(bad_c)}", tuple(bad_c)))
    with_b = [k for k, c in enumerate(classes, start=1) if c == CLASS_B]

    theorem = None
    if deep and full and all(c == CLASS_A for c in classes):
        theorem = THEOREM_DEEP
    elif shallow and full and classes[0] in (CLASS_A, CLASS_B):
        theorem = THEOREM_SHALLOW
    elif with_b and not bad_c:
        if len(hidden) > 1:
            reasons.append(Reason(
                "class_b_depth",
                f"non-surjective activation at layers {_fmt_layers(with_b)} with more than one "
                "hidden layer: no known guarantee (open problem)", tuple(with_b)))
    if theorem is None and not reasons:
        # only reachable for class-B single layers that are fine otherwise
        reasons.append(Reason("unsupported", "hypotheses not met"))
    return CertReport(widths, deep, shallow, ranks, classes, rank_tol,
                      theorem is not None, theorem, [] if theorem else reasons)
