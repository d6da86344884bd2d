from itertools import combinations

import numpy as np
import pytest

from decregions.geometry import Polyhedron
from decregions.netmodel import (
    IDENTITY, SIGMOID, Layer, LeakyReLU, Network, builtin, logits_batch, margins_batch,
)
from decregions.regions import (
    UnsupportedActivation, count_regions, decision_cells, dominance_rows, enumerate_cells,
)
from oracles import grid, hidden_patterns

BOX8 = Polyhedron.box(2, 8.0)
NETS = ["eq4-nonpyramidal", "eq5-relu", "lowrank-strips(0.1)", "tight-2-3-2(0.1)"]


def random_leaky(rng, widths, m=2):
    hidden = [Layer(rng.normal(size=(a, b)), rng.normal(size=b), LeakyReLU(0.2))
              for a, b in zip(widths, widths[1:])]
    return Network(widths[0], hidden, Layer(rng.normal(size=(widths[-1], m)), rng.normal(size=m)))


@pytest.mark.parametrize("name", NETS)
def test_partition_property(name):
    net = builtin(name)
    cells = enumerate_cells(net, BOX8)
    X = np.random.default_rng(1).uniform(-8, 8, size=(10_000, 2))
    closure = np.array([c.cell.contains_many(X, 1e-9) for c in cells])
    interior = np.array([c.cell.contains_many(X, -1e-9) for c in cells])
    assert (closure.sum(axis=0) >= 1).all()
    assert (interior.sum(axis=0) <= 1).all()


@pytest.mark.parametrize("name", NETS)
def test_affine_maps_and_patterns_agree(name):
    net = builtin(name)
    cells = enumerate_cells(net, BOX8)
    X = np.random.default_rng(2).uniform(-8, 8, size=(3000, 2))
    Z = logits_batch(net, X)
    pats = hidden_patterns(net, X)
    for c in cells:
        inside = c.cell.contains_many(X, -1e-7)
        assert np.allclose(X[inside] @ c.M.T + c.v, Z[inside], atol=1e-9)
        assert (pats[inside] == np.array(c.pattern)).all()


def test_eq5_grid_patterns_are_enumerated():
    net = builtin("eq5-relu")
    cells = enumerate_cells(net, Polyhedron.box(2, 6.0))
    seen = {tuple(p) for p in np.unique(hidden_patterns(net, grid(6.0, 2000)), axis=0)}
    found = {c.pattern for c in cells}
    assert seen <= found
    for c in cells:
        assert tuple(hidden_patterns(net, c.witness.point)[0]) == c.pattern


def test_cells_are_sorted_and_unique():
    cells = enumerate_cells(builtin("eq5-relu"), BOX8)
    pats = [c.pattern for c in cells]
    assert pats == sorted(pats) and len(set(pats)) == len(pats)


@pytest.mark.parametrize("seed", range(12))
def test_arrangement_bound_is_attained(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    net = random_leaky(rng, [2, n])
    W, b = net.hidden[0].weights, net.hidden[0].bias
    half = 4.0 * max(1.0, max(
        np.abs(np.linalg.solve(W[:, [i, j]].T, -b[[i, j]])).max() for i, j in combinations(range(n), 2)
    ) if n > 1 else 1.0) + 4.0 * np.abs(b).max()
    assert count_regions(net, Polyhedron.box(2, half)) == 1 + n + n * (n - 1) // 2


def test_affine_network_has_one_region():
    ident = Network(2, [Layer(np.eye(2), np.zeros(2), IDENTITY)], Layer(np.eye(2), np.zeros(2)))
    assert count_regions(ident, BOX8) == 1
    bare = Network(2, [], Layer(np.eye(2), np.zeros(2)))
    assert count_regions(bare, BOX8) == 1


def test_non_piecewise_linear_is_rejected():
    net = Network(2, [Layer(np.eye(2), np.zeros(2), SIGMOID)], Layer(np.eye(2), np.zeros(2)))
    with pytest.raises(UnsupportedActivation) as info:
        enumerate_cells(net, BOX8)
    assert info.value.layer == 1


def test_dominance_rows():
    M = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    D, e = dominance_rows(M, np.array([0.0, 1.0, 2.0]), 1)
    assert D.tolist() == [[-1.0, 1.0], [0.0, 1.0]] and e.tolist() == [-1.0, -2.0]


@pytest.mark.parametrize("name", NETS)
def test_decision_cells_cover_box(name):
    net = builtin(name)
    cells = enumerate_cells(net, BOX8)
    X = np.random.default_rng(3).uniform(-8, 8, size=(10_000, 2))
    hits = np.zeros(len(X), dtype=int)
    for j in range(1, net.n_classes + 1):
        for dc in decision_cells(cells, j):
            hits += dc.piece.contains_many(X, -1e-9)
            assert dc.piece.contains(dc.witness.point, -1e-12)
    _, margin = margins_batch(net, X)
    exactly_one = hits == 1
    assert (margin[~exactly_one] <= 1e-6).all()
    if name.startswith("lowrank"):
        # the strip |x1| < 1 is an exact tie of positive area
        tie = np.abs(X[:, 0]) < 1
        assert not exactly_one[tie].any() and exactly_one[~tie].mean() >= 0.999
    else:
        assert exactly_one.mean() >= 0.999


def test_random_deep_nets_cover_box():
    rng = np.random.default_rng(5)
    for _ in range(5):
        net = random_leaky(rng, [2, 3, 3], m=3)
        cells = enumerate_cells(net, BOX8)
        X = rng.uniform(-8, 8, size=(2000, 2))
        labels, margin = margins_batch(net, X)
        for j in (1, 2, 3):
            inside = np.zeros(len(X), dtype=bool)
            for dc in decision_cells(cells, j):
                inside |= dc.piece.contains_many(X, 1e-9)
            assert (inside[(labels == j) & (margin > 1e-6)]).all()
            assert not inside[(labels != j) & (margin > 1e-6)].any()
