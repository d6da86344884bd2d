"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from decregions.certify import THEOREM_DEEP, certify
from decregions.cli import main
from decregions.connectivity import (
    DisconnectedWitness, PathCertificate, analyze, class_pieces, component_report, find_path,
)
from decregions.geometry import Polyhedron, numerical_rank
from decregions.netmodel import RELU, Layer, LeakyReLU, Network, builtin, margins_batch
from decregions.preimage import decision_region_backward
from decregions.train import TrainConfig, gen_two_islands, gradient_check, init_network, train
from oracles import grid_components

BOX8 = Polyhedron.box(2, 8.0)
COEF_TOL = 1e-9
# (certified?, largest component count) from every suite, checked by criterion 7
SOUNDNESS: list[tuple[str, bool, int]] = []
# (label, net, class) whose components criterion 10 connects
PATH_CASES: list[tuple[str, Network, int]] = []


def log_soundness(label, net, reports):
    SOUNDNESS.append((label, certify(net).guaranteed, max(r.count for r in reports.values())))


def same_rows(H, rows, rhs):
    E = Polyhedron(rows, rhs, H.dim)
    if H.n_rows != E.n_rows:
        return False
    left = list(range(H.n_rows))
    for a, c in zip(E.A, E.c):
        hit = [i for i in left if np.abs(H.A[i] - a).max() <= COEF_TOL and abs(H.c[i] - c) <= COEF_TOL]
        if not hit:
            return False
        left.remove(hit[0])
    return True


def random_pyramidal(rng, floor):
    """Leaky ReLU net with d in {2,3}, 1-3 hidden layers, non-increasing widths,
    every hidden spectrum gap (sigma_min / sigma_max) at least ``floor``."""
    while True:
        d = int(rng.integers(2, 4))
        depth = int(rng.integers(1, 4))
        alpha = float(rng.uniform(0.05, 0.5))
        widths = [d]
        for _ in range(depth):
            widths.append(int(rng.integers(1, widths[-1] + 1)))
        m = int(rng.integers(2, 4))
        hidden = [Layer(rng.normal(size=(a, b)), rng.normal(size=b), LeakyReLU(alpha))
                  for a, b in zip(widths, widths[1:])]
        if all(numerical_rank(l.weights)[1] >= floor for l in hidden):
            return Network(d, hidden, Layer(rng.normal(size=(widths[-1], m)), rng.normal(size=m)))


@pytest.fixture(scope="module")
def pyramidal_suite():
    rng = np.random.default_rng(2024)
    nets = [random_pyramidal(rng, 0.1) for _ in range(200)]
    t0 = time.perf_counter()
    results, errors = [], []
    for net in nets:
        try:
            results.append((net, analyze(net, with_hulls=False), certify(net)))
        except Exception as e:  # criterion counts exceptions
            errors.append(repr(e))
    return results, errors, time.perf_counter() - t0


def test_ac1_eq5_golden(criterion, capsys):
    t0 = time.perf_counter()
    code = main(["connectivity", "--builtin", "eq5-relu", "--class", "1"])
    elapsed = time.perf_counter() - t0
    rep = json.loads(capsys.readouterr().out)["classes"][0]
    hulls = [Polyhedron.from_json(c["constraints"]) for c in rep["components"] if c["convex"]]
    ok = (code == 0 and rep["count"] == 2 and len(hulls) == 2
          and same_rows(hulls[0], [[1, 0], [0, 1], [1, 1]], [1, 1, 1])
          and same_rows(hulls[1], [[0, -1], [2, -1]], [-4, -4])
          and elapsed < 1.0)
    net = builtin("eq5-relu")
    log_soundness("eq5", net, analyze(net, with_hulls=False))
    PATH_CASES.extend(("eq5", net, j) for j in (1, 2))
    assert criterion(1, ok, f"eq5-relu class 1: {rep['count']} components, printed constraint "
                            f"lists matched at {COEF_TOL:g}, {elapsed:.2f}s (< 1s)")


def test_ac2_eq4_golden(criterion):
    net = builtin("eq4-nonpyramidal")
    t0 = time.perf_counter()
    reps = analyze(net, with_hulls=False)
    sums = sorted(float(c.representative.sum()) for c in reps[1].components)
    grid = grid_components(net, 1, 8.0, 2000)
    elapsed = time.perf_counter() - t0
    ok = (reps[1].count == 2 and sums[0] < -4 and sums[1] > 2 and grid == 2 and elapsed < 5)
    log_soundness("eq4", net, reps)
    PATH_CASES.extend(("eq4", net, j) for j in (1, 2))
    assert criterion(2, ok, f"eq4-nonpyramidal class 1: {reps[1].count} components, witness "
                            f"sums {sums[0]:.3g} < -4 and {sums[1]:.3g} > 2, grid oracle {grid}, "
                            f"{elapsed:.2f}s (< 5s)")


def test_ac3_lowrank_golden(criterion):
    net = builtin("lowrank-strips(0.1)")
    reps = analyze(net)
    blue = reps[1]
    cuts = []
    for c in blue.components:
        H = c.hull
        i = int(np.argmax(np.abs(H.A[:, 0])))
        cuts.append(H.c[i] / H.A[i, 0])
    cert = certify(net)
    ok = (blue.count == 2 and len(cuts) == 2
          and np.allclose(sorted(cuts), [-1.0, 1.0], atol=1e-9, rtol=0)
          and cert.verdict == "NoGuarantee"
          and [r.code for r in cert.reasons] == ["rank_deficient"]
          and cert.reasons[0].message.startswith("rank(W1)=1"))
    log_soundness("lowrank", net, reps)
    PATH_CASES.append(("lowrank", net, 1))
    assert criterion(3, ok, f"lowrank-strips(0.1) blue: {blue.count} components, x1 cuts "
                            f"{sorted(round(float(x), 12) for x in cuts)}, certify "
                            f"{cert.verdict} ({cert.reasons[0].message})")


def test_ac4_pyramidal_property(criterion, note, pyramidal_suite):
    results, errors, elapsed = pyramidal_suite
    worst = max((max(r.count for r in reps.values()) for _, reps, _ in results), default=0)
    certified = sum(c.guaranteed and c.theorem == THEOREM_DEEP for _, _, c in results)
    for net, reps, _ in results:
        log_soundness("pyramidal", net, reps)
    ok = not errors and len(results) == 200 and worst <= 1 and certified == 200 and elapsed < 120
    criterion(4, ok, f"200 random pyramidal full-rank leaky nets: max {worst} component(s) per "
                     f"class, {len(errors)} exceptions, {certified}/200 certified deep-pyramidal, "
                     f"{elapsed:.1f}s (< 120s)")
    note("hidden spectrum gaps >= 0.1 in this population; see the unconditioned diagnostic")
    assert ok


def test_ac4_unconditioned_diagnostic(note):
    # not a criterion: without the gap floor, boxed analysis can miss joins far away
    rng = np.random.default_rng(2024)
    far = []
    for _ in range(200):
        net = random_pyramidal(rng, 0.0)
        reps = analyze(net, with_hulls=False)
        if max(r.count for r in reps.values()) > 1:
            wide = analyze(net, with_hulls=False, max_doublings=14)
            gap = min(numerical_rank(l.weights)[1] for l in net.hidden)
            far.append((gap, max(r.count for r in wide.values()),
                        max(r.box_half_width for r in wide.values())))
    note(f"unconditioned sampling: {len(far)}/200 nets split at box 64; extended growth -> "
         + ", ".join(f"gap {g:.1e}: {c} component(s) at half-width {h:g}" for g, c, h in far))
    assert all(c == 1 for _, c, _ in far)


def test_ac5_tightness(criterion):
    alpha = 0.1
    net = builtin(f"tight-2-3-2({alpha})")
    reps = analyze(net)
    blue = reps[1]
    target = (2 - alpha) / (1 - alpha)
    cuts = []
    for c in blue.components:
        H = c.hull
        i = int(np.argmax(np.abs(H.A[:, 0])))
        cuts.append(abs(H.c[i] / H.A[i, 0]))
    rank_ok = numerical_rank(net.hidden[0].weights)[0] == 2
    ok = (blue.count == 2 and net.widths[1] == 3 and rank_ok
          and np.allclose(cuts, target, atol=1e-6, rtol=0))
    log_soundness("tight", net, reps)
    PATH_CASES.extend(("tight", net, j) for j in (1, 2))
    assert criterion(5, ok, f"tight-2-3-2(0.1): {blue.count} blue components, |x1| cuts "
                            f"{[round(float(x), 9) for x in cuts]} vs {target:.9f} (tol 1e-6)")


def random_pl_net(rng):
    widths = [2] + [int(rng.integers(1, 4)) for _ in range(int(rng.integers(1, 4)))]
    acts = [RELU if rng.random() < 0.4 else LeakyReLU(float(rng.uniform(0.05, 0.5)))
            for _ in widths[1:]]
    m = int(rng.integers(2, 4))
    hidden = [Layer(rng.normal(size=(a, b)), rng.normal(size=b), act)
              for a, b, act in zip(widths, widths[1:], acts)]
    return Network(2, hidden, Layer(rng.normal(size=(widths[-1], m)), rng.normal(size=m)))


def test_ac6_engine_equivalence(criterion):
    rng = np.random.default_rng(6)
    disagreements, checked = 0, 0
    for _ in range(20):
        net = random_pl_net(rng)
        X = rng.uniform(-8, 8, size=(10_000, 2))
        _, margin = margins_batch(net, X)
        sure = margin > 1e-6
        for j in range(1, net.n_classes + 1):
            fwd = np.zeros(len(X), dtype=bool)
            for P in class_pieces(net, j, BOX8):
                fwd |= P.contains_many(X)
            bwd = decision_region_backward(net, j, BOX8)[0].contains_many(X)
            disagreements += int((fwd[sure] != bwd[sure]).sum())
            checked += int(sure.sum())
    assert criterion(6, disagreements == 0,
                     f"20 random 2D piecewise-linear nets: {disagreements} disagreements "
                     f"over {checked} (point, class) checks at margin > 1e-6")


def test_ac8_trainer(criterion):
    rows, ok = [], True
    for seed in range(5):
        ds = gen_two_islands(100, seed)
        t0 = time.perf_counter()
        small, _ = train(ds, [2], config=TrainConfig(seed=seed))
        reps = analyze(small, with_hulls=False)
        wide, hist = train(ds, [50], config=TrainConfig(seed=seed))
        elapsed = time.perf_counter() - t0
        full = numerical_rank(small.hidden[0].weights)[0] == 2
        count = max(r.count for r in reps.values())
        log_soundness("trained-2", small, reps)
        ok &= full and count <= 1 and hist.errors[-1] <= 2 and elapsed < 60
        rows.append(f"seed {seed}: [2] {count} comp, [50] {hist.errors[-1]} err, {elapsed:.1f}s")
    assert criterion(8, ok, "two-islands, width [2] full rank and connected, width [50] <= 2 "
                            "errors; " + "; ".join(rows))


def test_ac9_gradient_check(criterion):
    rng = np.random.default_rng(9)
    ds = gen_two_islands(100, 0)
    net = init_network(2, [5, 4], 2, LeakyReLU(0.1), rng)
    err = gradient_check(net, ds, n_params=20, seed=9, breakpoint_tol=1e-6)
    assert criterion(9, err <= 1e-5, f"max relative error {err:.2e} on 20 parameters (<= 1e-5)")


def _interior_point(P, center, rng):
    """Random point within half the inscribed radius around ``center``."""
    slack = float(P.residual(center).min()) if P.n_rows else 1.0
    u = rng.normal(size=P.dim)
    return center + 0.5 * min(slack, 1.0) * u / np.linalg.norm(u)


def test_ac10_path_certificates(criterion, pyramidal_suite):
    rng = np.random.default_rng(10)
    cases = list(PATH_CASES) + [("pyramidal", net, j) for net, _, _ in pyramidal_suite[0]
                                for j in range(1, net.n_classes + 1)]
    n_paths, worst, bad = 0, math.inf, []
    for label, net, j in cases:
        box = Polyhedron.box(net.input_dim, 8.0)
        pieces = class_pieces(net, j, box)
        if not pieces:
            continue
        rep, graph = component_report(pieces, net, j, box, with_hulls=False)
        for comp in rep.components:
            a, b = rng.choice(comp.pieces, 2)
            x = _interior_point(pieces[a], graph.witnesses[a], rng)
            y = _interior_point(pieces[b], graph.witnesses[b], rng)
            out = find_path(graph, pieces, x, y, net, j, samples_per_segment=256)
            n_paths += 1
            if not isinstance(out, PathCertificate) or out.min_margin <= 0:
                bad.append(label)
            else:
                worst = min(worst, out.min_margin)
    net = builtin("eq5-relu")
    pieces = class_pieces(net, 1, BOX8)
    rep, graph = component_report(pieces, net, 1, BOX8, with_hulls=False)
    cross = find_path(graph, pieces, [0.0, 0.0], [-1.0, 5.0], net, 1)
    ok = not bad and isinstance(cross, DisconnectedWitness) and n_paths > 200
    assert criterion(10, ok, f"{n_paths} component paths, {len(bad)} failures, min margin "
                             f"{worst:.2e} at 256 samples/segment; eq5 cross-component -> "
                             f"{type(cross).__name__}")


def test_ac7_soundness(criterion):
    # runs last in file order and reads what the suites above recorded
    assert SOUNDNESS, "run the whole acceptance module"
    violations = [label for label, certified, count in SOUNDNESS if certified and count > 1]
    n_cert = sum(c for _, c, _ in SOUNDNESS)
    assert criterion(7, not violations,
                     f"{n_cert} certified nets across suites 1-5 and 8, {len(violations)} with a "
                     f"multi-component class")
