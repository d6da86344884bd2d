"""Forward enumeration of activation cells of piecewise-linear networks.

Each cell carries the affine map ``x -> M x + v`` the network equals on it.
Cells are produced by splitting the analysis box neuron by neuron, layer
by layer, and pruning every child without an interior witness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from decregions.geometry import (
    EPS_FEAS, InteriorWitness, Polyhedron, feasible_interior,
)
from decregions.netmodel import Network


class UnsupportedActivation(ValueError):
    def __init__(self, layer: int, kind: str):
        super().__init__(f"layer {layer}: activation {kind!r} is not piecewise linear")
        self.layer = layer


@dataclass(frozen=True, eq=False)
class ActivationCell:
    pattern: tuple[int, ...]
    cell: Polyhedron
    M: np.ndarray  # (m, d)
    v: np.ndarray  # (m,)
    witness: InteriorWitness

    def to_json(self) -> dict:
        return {"pattern": list(self.pattern), "polyhedron": self.cell.to_json(),
                "M": self.M.tolist(), "v": self.v.tolist(),
                "witness": self.witness.point.tolist(), "slack": self.witness.slack}


@dataclass(frozen=True, eq=False)
class DecisionCell:
    class_index: int
    piece: Polyhedron
    source: int  # index into the cell list
    witness: InteriorWitness


def box_bound_of(box: Polyhedron) -> float:
    """Half-width of the tightest centered cube containing ``box``."""
    if box.n_rows == 0:
        raise ValueError("analysis box must be bounded")
    return float(np.abs(box.c).max()) * (1.0 + 1e-9) + 1.0


def _split(P: Polyhedron, w: InteriorWitness, a, q, strict: bool, eps, bound):
    """Children ``(P ∩ {a x + q <= 0}, P ∩ {a x + q >= 0})`` with witnesses.

    A child is ``None`` when it has no interior. ``a`` is not normalized.
    """
    norm = float(np.linalg.norm(a))
    lo_row = Polyhedron(np.vstack([P.A, a[None, :] / norm]),
                        np.concatenate([P.c, [-q / norm]]), P.dim,
                        np.concatenate([P.strict, [strict]]))
    hi_row = Polyhedron(np.vstack([P.A, -a[None, :] / norm]),
                        np.concatenate([P.c, [q / norm]]), P.dim,
                        np.concatenate([P.strict, [strict]]))
    dist = float(a @ w.point + q) / norm
    out = []
    for child, side in ((lo_row, -1.0), (hi_row, 1.0)):
        if side * dist > eps:
            # the parent's center already lies strictly on this side
            out.append(InteriorWitness(w.point, min(w.slack, abs(dist))))
        else:
            out.append(feasible_interior(child, bound, eps))
    return (lo_row, out[0]), (hi_row, out[1])


def enumerate_cells(net: Network, box: Polyhedron, eps: float = EPS_FEAS) -> list[ActivationCell]:
    """All activation cells of ``net`` inside ``box``, sorted by pattern."""
    for k, layer in enumerate(net.hidden, start=1):
        if not layer.activation.piecewise_linear:
            raise UnsupportedActivation(k, layer.activation.kind)
    if box.dim != net.input_dim:
        raise ValueError(f"box has dim {box.dim}, network input dim {net.input_dim}")
    bound = box_bound_of(box)
    root = feasible_interior(box, bound, eps)
    if root is None:
        return []
    d = net.input_dim
    frontier = [((), box, np.eye(d), np.zeros(d), root)]
    for layer in net.hidden:
        lo_slope, hi_slope = layer.activation.slopes
        nxt = []
        for pattern, P, M, v, w in frontier:
            Pm = layer.weights.T @ M
            qv = layer.weights.T @ v + layer.bias
            # depth-first over this layer's neurons
            stack = [((), P, w)]
            while stack:
                bits, Q, wq = stack.pop()
                i = len(bits)
                if i == layer.n_out:
                    slopes = np.where(np.array(bits, dtype=bool), hi_slope, lo_slope) \
                        if bits else np.zeros(0)
                    nxt.append((pattern + bits, Q, slopes[:, None] * Pm,
                                slopes * qv, wq))
                    continue
                a, q = Pm[i], qv[i]
                if lo_slope == hi_slope:
                    stack.append((bits + (1,), Q, wq))
                    continue
                if np.linalg.norm(a) <= 1e-12:
                    stack.append((bits + ((1,) if q > 0 else (0,)), Q, wq))
                    continue
                (lo, wl), (hi, wh) = _split(Q, wq, a, q, False, eps, bound)
                if wh is not None:
                    stack.append((bits + (1,), hi, wh))
                if wl is not None:
                    stack.append((bits + (0,), lo, wl))
        frontier = nxt
    out = net.output
    cells = [ActivationCell(p, P, out.weights.T @ M, out.weights.T @ v + out.bias, w)
             for p, P, M, v, w in frontier]
    cells.sort(key=lambda c: c.pattern)
    return cells


def count_regions(net: Network, box: Polyhedron, eps: float = EPS_FEAS) -> int:
    return len(enumerate_cells(net, box, eps))


def dominance_rows(M: np.ndarray, v: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``(M_k - M_j) x <= v_j - v_k`` for every ``k != j`` (``j`` 1-based)."""
    idx = j - 1
    others = [k for k in range(M.shape[0]) if k != idx]
    return M[others] - M[idx], v[idx] - v[others]


def decision_cells(cells: list[ActivationCell], class_index: int,
                   eps: float = EPS_FEAS) -> list[DecisionCell]:
    """Pieces of class ``class_index``'s region, one per cell at most."""
    out = []
    for n, cell in enumerate(cells):
        if class_index < 1 or class_index > cell.M.shape[0]:
            raise ValueError(f"class index {class_index} out of range")
        D, e = dominance_rows(cell.M, cell.v, class_index)
        P = cell.cell
        piece = Polyhedron.from_rows(np.vstack([P.A, D]), np.concatenate([P.c, e]), P.dim,
                                     np.concatenate([P.strict, np.ones(len(e), bool)]))
        if len(e) == 0:
            out.append(DecisionCell(class_index, piece, n, cell.witness))
            continue
        # fast path: the cell's own center may already be deep inside
        res = piece.residual(cell.witness.point)
        if res.min() > eps:
            w = InteriorWitness(cell.witness.point, float(res.min()))
        else:
            w = feasible_interior(piece, box_bound_of(P), eps)
        if w is not None:
            out.append(DecisionCell(class_index, piece, n, w))
    return out
