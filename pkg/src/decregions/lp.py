"""Dense tableau simplex with Bland's anti-cycling rule.

Solves ``max g @ z  s.t.  G @ z <= h,  z >= 0``. Problems handled here are
tiny (a few hundred rows at most), so a dense tableau is the right tool.
When ``h >= 0`` the slack basis is feasible and phase 1 is skipped, which
is how every geometric query in this package is posed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11
COST_TOL = 1e-11


class LPError(RuntimeError):
    """Base class for LP failures."""


class LPIterationLimit(LPError):
    def __init__(self, cap: int):
        super().__init__(f"simplex iteration cap exceeded ({cap} pivots)")
        self.cap = cap


class LPUnbounded(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible"
    z: np.ndarray | None
    value: float
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])


def _run(T: np.ndarray, basis: list[int], ncols: int, cap: int, used: int) -> int:
    """Iterate phase-2 style pivots on ``T`` (objective in the last row,
    stored as reduced costs to *maximize*). Returns pivots used so far."""
    m = T.shape[0] - 1
    while True:
        cost = T[-1, :ncols]
        candidates = np.nonzero(cost > COST_TOL)[0]
        if candidates.size == 0:
            return used
        col = int(candidates[0])  # Bland: lowest index entering
        column = T[:m, col]
        mask = column > PIVOT_TOL
        if not mask.any():
            raise LPUnbounded("objective unbounded above")
        ratios = np.full(m, np.inf)
        ratios[mask] = T[:m, -1][mask] / column[mask]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-13 * max(1.0, abs(best)))[0]
        row = int(min(ties, key=lambda i: basis[i]))  # Bland: lowest basic index leaving
        if used >= cap:
            raise LPIterationLimit(cap)
        _pivot(T, row, col)
        basis[row] = col
        used += 1


def maximize(g, G, h, max_iter: int | None = None) -> LPResult:
    """Maximize ``g @ z`` over ``{z >= 0 : G z <= h}``.

    ``max_iter`` defaults to ``10 * (rows + cols)``. Raises
    :class:`LPIterationLimit` when exceeded and :class:`LPUnbounded` for an
    unbounded objective.
    """
    g = np.asarray(g, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    m, n = G.shape
    cap = max_iter if max_iter is not None else 10 * (m + n)

    neg = h < 0
    n_art = int(neg.sum())
    width = n + m + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = G
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = h
    T[:m][neg] *= -1.0
    basis = list(range(n, n + m))
    used = 0

    if n_art:
        art_rows = np.nonzero(neg)[0]
        for k, i in enumerate(art_rows):
            T[i, n + m + k] = 1.0
            basis[i] = n + m + k
        # phase 1: maximize -sum(artificials)
        T[-1, :] = T[art_rows].sum(axis=0)
        T[-1, n + m:width] = 0.0
        used = _run(T, basis, width, cap, used)
        if T[-1, -1] > 1e-9 * max(1.0, np.abs(h).max()):
            return LPResult("infeasible", None, float("nan"), used)
        # drive remaining artificials out of the basis
        for i, b in enumerate(basis):
            if b >= n + m:
                row = T[i, :n + m]
                nz = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
        T[:, n + m:width] = 0.0

    T[-1, :] = 0.0
    T[-1, :n] = g
    for i, b in enumerate(basis):
        if b < n + m and T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[i]
    used = _run(T, basis, n + m, cap, used)

    z = np.zeros(n + m + n_art)
    for i, b in enumerate(basis):
        z[b] = T[i, -1]
    x = z[:n]
    return LPResult("optimal", x, float(g @ x), used)
