"""H-representation polyhedra and the LP queries built on them.

A :class:`Polyhedron` stores closed rows ``A x <= c`` with unit Euclidean
row norms. Open sets are handled by asking for interior witnesses with
positive Chebyshev slack, so the closed/open distinction only matters when
a row degenerates to ``0 <= c`` after substitution. Rows therefore carry a
``strict`` flag that decides that case: a strict zero row survives only if
``c > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from decregions import lp

EPS_FEAS = 1e-9
RANK_TOL = 1e-8
DEFAULT_BOX = 1e6
ZERO_ROW = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class InteriorWitness:
    point: np.ndarray
    slack: float


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """``{x in R^dim : A x <= c}`` with normalized rows.

    Construct through :meth:`from_rows` (or the constructor, which
    normalizes too). Rows that vanish are dropped when trivially satisfied
    and rejected when trivially violated.
    """

    A: np.ndarray
    c: np.ndarray
    dim: int
    strict: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float).reshape(-1, self.dim)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if A.shape[0] != c.shape[0]:
            raise GeometryError(f"A has {A.shape[0]} rows but c has length {c.shape[0]}")
        if self.dim < 1:
            raise GeometryError("dimension must be positive")
        if not (np.isfinite(A).all() and np.isfinite(c).all()):
            raise GeometryError("non-finite constraint entries")
        strict = (np.zeros(len(c), dtype=bool) if self.strict is None
                  else np.asarray(self.strict, dtype=bool).reshape(-1))
        norms = np.linalg.norm(A, axis=1)
        zero = norms <= ZERO_ROW
        if zero.any():
            bad = zero & ((c < -ZERO_ROW) | (strict & (c <= ZERO_ROW)))
            if bad.any():
                raise GeometryError("trivially infeasible zero row; use Polyhedron.from_rows")
            keep = ~zero
            A, c, strict, norms = A[keep], c[keep], strict[keep], norms[keep]
        if len(c):
            # leave unit rows untouched so re-normalizing is exact
            norms = np.where(np.abs(norms - 1.0) <= 4e-16, 1.0, norms)
            A = A / norms[:, None]
            c = c / norms
        for name, val in (("A", A), ("c", c), ("strict", strict)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def from_rows(cls, A, c, dim: int, strict=None) -> "Polyhedron":
        """Like the constructor, but a violated zero row yields :meth:`empty`."""
        A = np.asarray(A, dtype=float).reshape(-1, dim)
        c = np.asarray(c, dtype=float).reshape(-1)
        strict = np.zeros(len(c), bool) if strict is None else np.asarray(strict, bool)
        zero = np.linalg.norm(A, axis=1) <= ZERO_ROW
        if (zero & ((c < -ZERO_ROW) | (strict & (c <= ZERO_ROW)))).any():
            return cls.empty(dim)
        return cls(A, c, dim, strict)

    @classmethod
    def full(cls, dim: int) -> "Polyhedron":
        return cls(np.zeros((0, dim)), np.zeros(0), dim)

    @classmethod
    def empty(cls, dim: int) -> "Polyhedron":
        A = np.zeros((2, dim))
        A[0, 0], A[1, 0] = 1.0, -1.0
        return cls(A, np.array([-1.0, -1.0]), dim)

    @classmethod
    def box(cls, dim: int, half_width: float) -> "Polyhedron":
        eye = np.eye(dim)
        return cls(np.vstack([eye, -eye]), np.full(2 * dim, float(half_width)), dim)

    @property
    def n_rows(self) -> int:
        return len(self.c)

    def residual(self, x) -> np.ndarray:
        """``c - A x`` (nonnegative entries mean the row is satisfied)."""
        return self.c - self.A @ np.asarray(x, dtype=float)

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return bool(self.n_rows == 0 or self.residual(x).min() >= -tol)

    def contains_many(self, X, tol: float = EPS_FEAS) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.n_rows == 0:
            return np.ones(len(X), dtype=bool)
        return ((self.c[None, :] - X @ self.A.T) >= -tol).all(axis=1)

    def to_json(self) -> dict:
        out = {"dim": self.dim, "A": self.A.tolist(), "c": self.c.tolist()}
        if self.strict.any():
            out["strict"] = self.strict.tolist()
        return out

    @classmethod
    def from_json(cls, data: dict, dim: int | None = None) -> "Polyhedron":
        A = np.asarray(data["A"], dtype=float)
        if dim is None:
            dim = A.shape[1] if A.ndim == 2 and A.size else int(data.get("dim", 0))
        return cls(A.reshape(-1, dim), data["c"], dim, data.get("strict"))

    def __repr__(self) -> str:
        return f"Polyhedron(dim={self.dim}, rows={self.n_rows})"


def _stack(*polys: Polyhedron) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dim = polys[0].dim
    A = np.vstack([p.A for p in polys]) if polys else np.zeros((0, dim))
    c = np.concatenate([p.c for p in polys])
    s = np.concatenate([p.strict for p in polys])
    return A, c, s


def _chebyshev(A, c, weights, box_bound, box_rows_slack=False):
    """Solve ``max s`` s.t. ``A x + s*weights <= c``, ``|x|_inf <= box_bound``.

    Free variables are split as ``x = xp - xm``; ``s`` is shifted by the
    worst row so the origin is feasible and no phase 1 is needed.
    Returns ``(x, s)`` or ``None`` if the box itself is violated.
    """
    r, n = A.shape
    s0 = min(0.0, float(np.min(c))) if r else 0.0
    s_cap = float(box_bound)
    # columns: xp (n), xm (n), t (1);  s = s0 + t
    rows = [np.hstack([A, -A, weights[:, None]])] if r else []
    rhs = [c - s0 * weights] if r else []
    eye = np.eye(n)
    rows.append(np.hstack([eye, -eye, np.zeros((n, 1))]))
    rows.append(np.hstack([-eye, eye, np.zeros((n, 1))]))
    rhs += [np.full(n, box_bound), np.full(n, box_bound)]
    cap_row = np.zeros((1, 2 * n + 1))
    cap_row[0, -1] = 1.0
    rows.append(cap_row)
    rhs.append(np.array([s_cap - s0]))
    G = np.vstack(rows)
    h = np.concatenate(rhs)
    h = np.maximum(h, 0.0)
    g = np.zeros(2 * n + 1)
    g[-1] = 1.0
    res = lp.maximize(g, G, h)
    z = res.z
    x = z[:n] - z[n:2 * n]
    return x, s0 + z[-1]


def feasible_interior(P: Polyhedron, box_bound: float = DEFAULT_BOX,
                      eps: float = EPS_FEAS) -> InteriorWitness | None:
    """Chebyshev-center witness of the open interior of ``P`` within the box.

    The reported slack is recomputed from the returned point, so
    ``A @ point + slack <= c`` holds exactly up to rounding.
    """
    if box_bound <= 0:
        raise GeometryError("box_bound must be positive")
    if P.n_rows == 0:
        return InteriorWitness(np.zeros(P.dim), float(box_bound))
    x, s = _chebyshev(P.A, P.c, np.ones(P.n_rows), box_bound)
    x = np.clip(x, -box_bound, box_bound)
    slack = min(float(s), float(P.residual(x).min()))
    if slack <= eps:
        return None
    return InteriorWitness(x, slack)


def intersect(P: Polyhedron, Q: Polyhedron) -> Polyhedron:
    if P.dim != Q.dim:
        raise GeometryError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    A, c, s = _stack(P, Q)
    return Polyhedron(A, c, P.dim, s)


def affine_preimage(P: Polyhedron, W, b) -> Polyhedron:
    """``{x : W.T @ x + b in P}`` by substitution.

    ``W`` has shape ``(m, n)`` with ``n == P.dim``; the result lives in
    ``R^m``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if W.shape[1] != P.dim or b.shape[0] != P.dim:
        raise GeometryError(
            f"shape mismatch: W is {W.shape}, b has {b.shape[0]}, polyhedron dim {P.dim}")
    return Polyhedron.from_rows(P.A @ W.T, P.c - P.A @ b, W.shape[0], P.strict)


def _coincident(A, c, a, ci, tol=1e-9):
    """Mask of rows lying on the hyperplane ``a x = ci`` (either orientation)."""
    same = (np.abs(A - a).max(axis=1) <= tol) & (np.abs(c - ci) <= tol)
    opp = (np.abs(A + a).max(axis=1) <= tol) & (np.abs(c + ci) <= tol)
    return same | opp


def hyperplane_interior_point(A, c, a, ci, dim, box_bound=DEFAULT_BOX, eps=EPS_FEAS):
    """Relative-interior point of ``{a x = ci} ∩ {A x <= c}`` with slack > eps.

    ``a`` must be a unit vector. Rows coincident with the hyperplane are
    ignored. Returns ``(point, slack)`` or ``None``.
    """
    a = np.asarray(a, dtype=float)
    if abs(ci) > box_bound:
        return None
    keep = ~_coincident(A, c, a, ci) if len(c) else np.zeros(0, bool)
    A, c = A[keep], c[keep]
    p0 = ci * a
    # orthonormal basis of the hyperplane's direction space
    _, _, vt = np.linalg.svd(a[None, :])
    N = vt[1:].T
    if dim == 1:
        if len(c) == 0:
            return p0, float(box_bound)
        res = c - A @ p0
        s = float(res.min())
        return (p0, s) if s > eps else None
    Ay = A @ N if len(c) else np.zeros((0, dim - 1))
    cy = c - A @ p0 if len(c) else np.zeros(0)
    # box |p0 + N y|_inf <= B, written as rows without slack
    Br = np.vstack([N, -N])
    bc = np.concatenate([box_bound - p0, box_bound + p0])
    r = len(cy)
    AA = np.vstack([Ay, Br])
    cc = np.concatenate([cy, bc])
    weights = np.concatenate([np.ones(r), np.zeros(2 * dim)])
    y, s = _chebyshev_weighted(AA, cc, weights, box_bound * np.sqrt(dim))
    x = p0 + N @ y
    slack = min(float(s), float((c - A @ x).min())) if r else float(s)
    if slack <= eps or np.abs(x).max() > box_bound * (1 + 1e-12):
        return None
    return x, slack


def _chebyshev_weighted(A, c, weights, bound):
    # like _chebyshev but the box is already part of (A, c); ``bound`` caps
    # the free variables to keep the LP bounded.
    r, n = A.shape
    s0 = min(0.0, float(np.min(c[weights > 0]))) if (weights > 0).any() else 0.0
    eye = np.eye(n)
    G = np.vstack([
        np.hstack([A, -A, weights[:, None]]),
        np.hstack([eye, -eye, np.zeros((n, 1))]),
        np.hstack([-eye, eye, np.zeros((n, 1))]),
        np.hstack([np.zeros((1, 2 * n)), np.ones((1, 1))]),
    ])
    h = np.concatenate([c - s0 * weights, np.full(2 * n, bound), [bound - s0]])
    if (h < -1e-12).any():
        # the origin violates a slack-free row: the hyperplane misses the box
        return np.zeros(n), -np.inf
    h = np.maximum(h, 0.0)
    g = np.zeros(2 * n + 1)
    g[-1] = 1.0
    z = lp.maximize(g, G, h).z
    return z[:n] - z[n:2 * n], s0 + z[-1]


def facet_interior_point(P: Polyhedron, row_index: int, box_bound: float = DEFAULT_BOX,
                         eps: float = EPS_FEAS) -> np.ndarray | None:
    """Point in the relative interior of facet ``row_index`` of ``P``."""
    if not 0 <= row_index < P.n_rows:
        raise GeometryError(f"row index {row_index} out of range")
    out = hyperplane_interior_point(P.A, P.c, P.A[row_index], P.c[row_index], P.dim,
                                    box_bound, eps)
    return None if out is None else out[0]


def maximize_over(P: Polyhedron, direction, box_bound: float = DEFAULT_BOX,
                  start: np.ndarray | None = None) -> float | None:
    """``max direction @ x`` over ``P`` within the box; ``None`` if empty.

    ``start`` is a feasible point; when omitted a Chebyshev point is used.
    """
    direction = np.asarray(direction, dtype=float)
    if start is None:
        if P.n_rows == 0:
            start = np.zeros(P.dim)
        else:
            x, s = _chebyshev(P.A, P.c, np.ones(P.n_rows), box_bound)
            if s < -EPS_FEAS:
                return None
            start = np.clip(x, -box_bound, box_bound)
    n = P.dim
    eye = np.eye(n)
    rows = [np.hstack([P.A, -P.A])] if P.n_rows else []
    rhs = [P.residual(start)] if P.n_rows else []
    rows += [np.hstack([eye, -eye]), np.hstack([-eye, eye])]
    rhs += [box_bound - start, box_bound + start]
    G = np.vstack(rows)
    h = np.maximum(np.concatenate(rhs), 0.0)
    res = lp.maximize(np.concatenate([direction, -direction]), G, h)
    return float(direction @ start + res.value)


def remove_redundant(P: Polyhedron, box_bound: float = DEFAULT_BOX,
                     eps: float = EPS_FEAS) -> Polyhedron:
    """Drop rows whose removal leaves ``P ∩ box`` unchanged.

    Rows are tested in order against the rows kept so far plus the
    untested remainder, so exact duplicates collapse to the first copy.
    Polyhedra without interior are returned unchanged.
    """
    w = feasible_interior(P, box_bound, eps)
    if w is None or P.n_rows == 0:
        return P
    keep = np.ones(P.n_rows, dtype=bool)
    for i in range(P.n_rows):
        keep[i] = False
        rest = Polyhedron(P.A[keep], P.c[keep], P.dim, P.strict[keep])
        top = maximize_over(rest, P.A[i], box_bound, start=w.point)
        if top is None or top > P.c[i] + eps:
            keep[i] = True
    return Polyhedron(P.A[keep], P.c[keep], P.dim, P.strict[keep])


def contains_polyhedron(outer: Polyhedron, inner: Polyhedron,
                        box_bound: float = DEFAULT_BOX, tol: float = 1e-7) -> bool:
    """Whether ``inner ∩ box ⊆ outer`` (LP per row of ``outer``)."""
    w = feasible_interior(inner, box_bound, 0.0)
    if w is None:
        return True
    for a, ci in zip(outer.A, outer.c):
        top = maximize_over(inner, a, box_bound, start=w.point)
        if top is not None and top > ci + tol:
            return False
    return True


def numerical_rank(W, rel_tol: float = RANK_TOL) -> tuple[int, float]:
    """Rank counting singular values above ``rel_tol * sigma_max``.

    Returns ``(rank, spectrum_gap)`` where the gap is the smallest counted
    singular value over the largest.
    """
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        raise GeometryError("empty matrix")
    if not 0 < rel_tol < 1:
        raise GeometryError("rel_tol must lie in (0, 1)")
    sv = np.linalg.svd(np.atleast_2d(W), compute_uv=False)
    if sv[0] == 0:
        return 0, 0.0
    counted = sv[sv > rel_tol * sv[0]]
    return int(len(counted)), float(counted[-1] / sv[0])


def bounding_box(P: Polyhedron, box_bound: float = DEFAULT_BOX,
                 start: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray] | None:
    lo, hi = np.empty(P.dim), np.empty(P.dim)
    for i in range(P.dim):
        e = np.zeros(P.dim)
        e[i] = 1.0
        top = maximize_over(P, e, box_bound, start)
        if top is None:
            return None
        hi[i] = top
        lo[i] = -maximize_over(P, -e, box_bound, start)
    return lo, hi


def difference(Q: Polyhedron, P: Polyhedron, box_bound: float = DEFAULT_BOX,
               eps: float = EPS_FEAS) -> list[Polyhedron]:
    """Interior-disjoint pieces covering ``Q \\ P`` (closures)."""
    pieces = []
    prefix_A, prefix_c = [], []
    for a, ci in zip(P.A, P.c):
        A = np.vstack([Q.A, *prefix_A, -a[None, :]]) if (Q.n_rows or prefix_A) else -a[None, :]
        c = np.concatenate([Q.c, prefix_c, [-ci]])
        strict = np.concatenate([Q.strict, np.zeros(len(prefix_c) + 1, bool)])
        cand = Polyhedron(A, c, Q.dim, strict)
        if feasible_interior(cand, box_bound, eps) is not None:
            pieces.append(cand)
        prefix_A.append(a[None, :])
        prefix_c.append(ci)
    return pieces


def polygon_vertices(P: Polyhedron, tol: float = 1e-9) -> np.ndarray:
    """Counter-clockwise vertices of a bounded 2D polyhedron."""
    if P.dim != 2:
        raise GeometryError("polygon_vertices needs a 2D polyhedron")
    pts = []
    for i in range(P.n_rows):
        for j in range(i + 1, P.n_rows):
            M = P.A[[i, j]]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, P.c[[i, j]])
            if P.contains(v, tol * max(1.0, np.abs(v).max())):
                pts.append(v)
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    # merge duplicates
    uniq = []
    for p in pts:
        if not any(np.abs(p - q).max() <= 1e-9 * max(1.0, np.abs(p).max()) for q in uniq):
            uniq.append(p)
    pts = np.array(uniq)
    ctr = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - ctr[1], pts[:, 0] - ctr[0])
    order = np.lexsort((pts[:, 1], pts[:, 0], np.round(ang, 12)))
    return pts[order]


def polygon_area(V: np.ndarray) -> float:
    if len(V) < 3:
        return 0.0
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(abs(x @ np.roll(y, -1) - y @ np.roll(x, -1)))
