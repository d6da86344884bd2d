"""Connected components of a class region given as a union of polyhedra.

Two pieces are joined when they share a (d-1)-dimensional facet whose
relative-interior witness is classified as the class with positive margin.
Lower-dimensional contacts never join pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import networkx as nx

from decregions.geometry import (
    EPS_FEAS, Polyhedron, bounding_box, difference, feasible_interior,
    hyperplane_interior_point, intersect, maximize_over, remove_redundant,
)
from decregions.netmodel import Network, class_margin, logits_batch
from decregions.preimage import decision_region_backward
from decregions.regions import box_bound_of, decision_cells, enumerate_cells

ROW_MATCH_TOL = 1e-9


class PathPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    witness: np.ndarray
    margin: float


@dataclass
class AdjacencyGraph:
    class_index: int | None
    n_nodes: int
    edges: list[Edge]
    witnesses: list[np.ndarray]  # interior witness per piece
    bboxes: list[tuple[np.ndarray, np.ndarray]]

    def neighbors(self) -> dict[int, list[tuple[int, Edge]]]:
        adj: dict[int, list[tuple[int, Edge]]] = {n: [] for n in range(self.n_nodes)}
        for e in self.edges:
            adj[e.i].append((e.j, e))
            adj[e.j].append((e.i, e))
        return adj


@dataclass
class Component:
    pieces: list[int]
    representative: np.ndarray
    boundary_touch: bool
    hull: Polyhedron | None = None  # irredundant rows (box faces removed) when convex
    hull_exact: bool = False

    def to_json(self) -> dict:
        out = {"pieces": self.pieces, "representative": self.representative.tolist(),
               "boundary_touch": self.boundary_touch, "convex": self.hull_exact}
        if self.hull is not None and self.hull_exact:
            out["constraints"] = self.hull.to_json()
        return out


@dataclass
class ComponentReport:
    class_index: int
    components: list[Component]
    box_half_width: float
    n_pieces: int = 0
    box_history: list[tuple[float, int]] = field(default_factory=list)
    stabilized: bool = True

    @property
    def count(self) -> int:
        return len(self.components)

    def to_json(self) -> dict:
        return {"class_index": self.class_index, "count": self.count,
                "n_pieces": self.n_pieces, "box_half_width": self.box_half_width,
                "box_history": [{"half_width": b, "count": c} for b, c in self.box_history],
                "stabilized": self.stabilized,
                "components": [c.to_json() for c in self.components]}


@dataclass
class PathCertificate:
    polyline: np.ndarray
    min_margin: float
    samples_per_segment: int

    def to_json(self) -> dict:
        return {"kind": "path", "polyline": self.polyline.tolist(),
                "min_margin": self.min_margin, "samples_per_segment": self.samples_per_segment}


@dataclass
class DisconnectedWitness:
    components: tuple[int, int]
    witnesses: tuple[np.ndarray, np.ndarray]

    def to_json(self) -> dict:
        return {"kind": "disconnected", "components": list(self.components),
                "witnesses": [w.tolist() for w in self.witnesses]}


def _matching_rows(P: Polyhedron, Q: Polyhedron) -> list[int]:
    """Rows of ``P`` whose reversed copy appears in ``Q``."""
    if P.n_rows == 0 or Q.n_rows == 0:
        return []
    dA = np.abs(P.A[:, None, :] + Q.A[None, :, :]).max(axis=2)
    dc = np.abs(P.c[:, None] + Q.c[None, :])
    hit = (dA <= ROW_MATCH_TOL) & (dc <= ROW_MATCH_TOL * np.maximum(1.0, np.abs(P.c))[:, None])
    return [int(i) for i in np.nonzero(hit.any(axis=1))[0]]


def _boxes_meet(a, b, tol=1e-7) -> bool:
    return bool(np.all(a[0] <= b[1] + tol) and np.all(b[0] <= a[1] + tol))


def build_adjacency(pieces: list[Polyhedron], net: Network | None = None,
                    class_index: int | None = None, eps: float = EPS_FEAS,
                    box_bound: float | None = None) -> AdjacencyGraph:
    """Facet-adjacency graph over interior-disjoint pieces.

    Without ``net`` the graph is purely geometric (no margin check).
    """
    if box_bound is None:
        box_bound = max((box_bound_of(p) for p in pieces if p.n_rows), default=1e6)
    witnesses, bboxes = [], []
    for p in pieces:
        w = feasible_interior(p, box_bound, 0.0)
        if w is None:
            raise ValueError("piece without interior passed to build_adjacency")
        witnesses.append(w.point)
        bboxes.append(bounding_box(p, box_bound, start=w.point))
    edges = []
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            rows = _matching_rows(pieces[i], pieces[j])
            if not rows or not _boxes_meet(bboxes[i], bboxes[j]):
                continue
            P, Q = pieces[i], pieces[j]
            A = np.vstack([P.A, Q.A])
            c = np.concatenate([P.c, Q.c])
            for r in rows:
                hit = hyperplane_interior_point(A, c, P.A[r], P.c[r], P.dim, box_bound, eps)
                if hit is None:
                    continue
                x = hit[0]
                margin = math.inf if net is None else class_margin(net, x, class_index)
                if margin > eps:
                    edges.append(Edge(i, j, x, margin))
                    break
    return AdjacencyGraph(class_index, len(pieces), edges, witnesses, bboxes)


def connected_components(graph: AdjacencyGraph) -> list[list[int]]:
    """Components as sorted piece-id lists, ordered by smallest id."""
    G = nx.Graph()
    G.add_nodes_from(range(graph.n_nodes))
    G.add_edges_from((e.i, e.j) for e in graph.edges)
    comps = [sorted(c) for c in nx.connected_components(G)]
    return sorted(comps, key=lambda c: c[0])


def touches_box(graph: AdjacencyGraph, ids: list[int], half_width: float,
                tol: float = 1e-7) -> bool:
    for n in ids:
        lo, hi = graph.bboxes[n]
        if (hi >= half_width - tol).any() or (lo <= -half_width + tol).any():
            return True
    return False


def convex_merge(pieces: list[Polyhedron], box: Polyhedron | None = None,
                 eps: float = EPS_FEAS) -> tuple[Polyhedron, bool]:
    """Smallest polyhedron cut out by the pieces' own rows that contains
    every piece, and whether it equals their union.

    Rows coinciding with faces of ``box`` are dropped from the result.
    """
    dim = pieces[0].dim
    A = np.vstack([p.A for p in pieces])
    c = np.concatenate([p.c for p in pieces])
    bound = box_bound_of(box) if box is not None else max(box_bound_of(p) for p in pieces)
    ok = []
    for a, ci in zip(A, c):
        if all((top := maximize_over(p, a, bound)) is None or top <= ci + 1e-9 for p in pieces):
            ok.append(True)
        else:
            ok.append(False)
    ok = np.array(ok)
    H = remove_redundant(Polyhedron(A[ok], c[ok], dim), bound, eps)
    # exactness: nothing of H survives removing every piece
    rest = [H]
    for p in pieces:
        nxt = []
        for F in rest:
            if feasible_interior(intersect(F, p), bound, eps) is None:
                nxt.append(F)
            else:
                nxt.extend(difference(F, p, bound, eps))
        rest = nxt
    exact = not rest
    if box is not None and H.n_rows:
        is_box = np.zeros(H.n_rows, dtype=bool)
        for a, ci in zip(box.A, box.c):
            is_box |= (np.abs(H.A - a).max(axis=1) <= 1e-9) & (np.abs(H.c - ci) <= 1e-9)
        H = Polyhedron(H.A[~is_box], H.c[~is_box], dim)
    return H, exact


def component_report(pieces: list[Polyhedron], net: Network, class_index: int,
                     box: Polyhedron, eps: float = EPS_FEAS,
                     with_hulls: bool = True) -> tuple[ComponentReport, AdjacencyGraph]:
    half = float(np.abs(box.c).max())
    graph = build_adjacency(pieces, net, class_index, eps, box_bound_of(box))
    comps = []
    for ids in connected_components(graph):
        rep = max(ids, key=lambda n: class_margin(net, graph.witnesses[n], class_index))
        hull, exact = (convex_merge([pieces[n] for n in ids], box, eps)
                       if with_hulls else (None, False))
        comps.append(Component(ids, graph.witnesses[rep], touches_box(graph, ids, half),
                               hull, exact))
    report = ComponentReport(class_index, comps, half, len(pieces))
    return report, graph


def class_pieces(net: Network, class_index: int, box: Polyhedron, eps: float = EPS_FEAS,
                 engine: str = "forward", cells=None) -> list[Polyhedron]:
    if engine == "forward":
        cells = enumerate_cells(net, box, eps) if cells is None else cells
        return [dc.piece for dc in decision_cells(cells, class_index, eps)]
    if engine == "backward":
        return decision_region_backward(net, class_index, box, eps)[0].pieces
    raise ValueError(f"unknown engine {engine!r}")


def analyze(net: Network, box_half_width: float = 8.0, eps: float = EPS_FEAS,
            engine: str = "forward", max_doublings: int = 3,
            with_hulls: bool = True) -> dict[int, ComponentReport]:
    """Per-class component reports with adaptive box growth.

    While some class has several components and one of them touches the
    box boundary, the box is doubled (at most ``max_doublings`` times).
    """
    if box_half_width <= 0:
        raise ValueError("box half-width must be positive")
    half = float(box_half_width)
    history: dict[int, list[tuple[float, int]]] = {j: [] for j in range(1, net.n_classes + 1)}
    for attempt in range(max_doublings + 1):
        box = Polyhedron.box(net.input_dim, half)
        cells = enumerate_cells(net, box, eps) if engine == "forward" else None
        reports = {}
        for j in range(1, net.n_classes + 1):
            pieces = class_pieces(net, j, box, eps, engine, cells)
            rep, _ = component_report(pieces, net, j, box, eps, with_hulls)
            history[j].append((half, rep.count))
            reports[j] = rep
        grow = any(r.count > 1 and any(c.boundary_touch for c in r.components)
                   for r in reports.values())
        if not grow or attempt == max_doublings:
            break
        half *= 2.0
    for j, rep in reports.items():
        rep.box_history = history[j]
        counts = [c for _, c in history[j]]
        rep.stabilized = len(counts) < 2 or counts[-1] == counts[-2]
    return reports


def _locate(pieces: list[Polyhedron], x, tol=1e-9) -> int | None:
    best, best_res = None, -math.inf
    for n, p in enumerate(pieces):
        r = float(p.residual(x).min()) if p.n_rows else math.inf
        if r > best_res:
            best, best_res = n, r
    return best if best_res >= -tol else None


def validate_polyline(net: Network, class_index: int, polyline, samples_per_segment: int) -> float:
    """Minimum class margin over ``samples_per_segment`` points per segment."""
    pts = np.asarray(polyline, dtype=float)
    t = np.linspace(0.0, 1.0, samples_per_segment)[:, None]
    worst = math.inf
    for a, b in zip(pts[:-1], pts[1:]):
        S = a + t * (b - a)
        Z = logits_batch(net, S)
        if Z.shape[1] == 1:
            continue
        j = class_index - 1
        m = Z[:, j] - np.delete(Z, j, axis=1).max(axis=1)
        worst = min(worst, float(m.min()))
    return worst


def find_path(graph: AdjacencyGraph, pieces: list[Polyhedron], x, y, net: Network,
              class_index: int, samples_per_segment: int = 256,
              eps: float = EPS_FEAS) -> PathCertificate | DisconnectedWitness:
    x, y = np.asarray(x, float), np.asarray(y, float)
    for name, p in (("x", x), ("y", y)):
        if class_margin(net, p, class_index) <= eps:
            raise PathPreconditionError(f"{name} is not in class {class_index} (margin <= eps)")
    px, py = _locate(pieces, x), _locate(pieces, y)
    if px is None or py is None:
        raise PathPreconditionError("endpoint lies outside every piece (outside the box?)")
    if px == py:
        poly = np.array([x, y])
    else:
        adj = graph.neighbors()
        prev = {px: None}
        queue = [px]
        while queue and py not in prev:
            nxt = []
            for n in queue:
                for m, e in adj[n]:
                    if m not in prev:
                        prev[m] = (n, e)
                        nxt.append(m)
            queue = nxt
        if py not in prev:
            comps = connected_components(graph)
            cid = {n: k for k, ids in enumerate(comps) for n in ids}
            return DisconnectedWitness((cid[px], cid[py]),
                                       (graph.witnesses[px], graph.witnesses[py]))
        chain = []
        n = py
        while prev[n] is not None:
            m, e = prev[n]
            chain.append((m, e, n))
            n = m
        chain.reverse()
        pts = [x, graph.witnesses[px]]
        for _, e, n in chain:
            pts += [e.witness, graph.witnesses[n]]
        pts.append(y)
        poly = np.array(pts)
    return PathCertificate(poly, validate_polyline(net, class_index, poly, samples_per_segment),
                           samples_per_segment)
