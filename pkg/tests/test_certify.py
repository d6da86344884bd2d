import numpy as np
import pytest

from decregions.certify import (
    THEOREM_DEEP, THEOREM_SHALLOW, certify, classify_activation,
)
from decregions.netmodel import ELU, RELU, SIGMOID, Layer, LeakyReLU, Network, builtin


def net_of(widths, act, rng=None, m=2):
    rng = rng or np.random.default_rng(0)
    hidden = [Layer(rng.normal(size=(a, b)), rng.normal(size=b), act)
              for a, b in zip(widths, widths[1:])]
    return Network(widths[0], hidden, Layer(rng.normal(size=(widths[-1], m)), rng.normal(size=m)))


def codes(rep):
    return [r.code for r in rep.reasons]


def test_activation_classes():
    assert classify_activation(LeakyReLU(0.1)) == "A"
    assert classify_activation("identity") == "A"
    assert classify_activation(ELU) == classify_activation(SIGMOID) == "B"
    assert classify_activation("softplus") == "B"
    assert classify_activation(RELU) == "C"
    with pytest.raises(ValueError):
        classify_activation("tanhshrink")


def test_builtins():
    rep = certify(builtin("eq4-nonpyramidal"))
    assert rep.verdict == "NoGuarantee" and codes(rep)[0] == "non_pyramidal"
    assert "n1=1 < n2=2" in rep.reasons[0].message
    rep = certify(builtin("eq5-relu"))
    assert codes(rep) == ["activation_class_c"]
    rep = certify(builtin("lowrank-strips(0.1)"))
    assert codes(rep) == ["rank_deficient"] and rep.reasons[0].message.startswith("rank(W1)=1")
    rep = certify(builtin("tight-2-3-2(0.1)"))
    assert codes(rep) == ["non_pyramidal"]


def test_deep_pyramidal_leaky():
    rep = certify(net_of([3, 3, 2, 2], LeakyReLU(0.2)))
    assert rep.guaranteed and rep.theorem == THEOREM_DEEP and rep.reasons == []


def test_one_hidden_layer_smooth():
    rep = certify(net_of([3, 2], SIGMOID))
    assert rep.guaranteed and rep.theorem == THEOREM_SHALLOW


def test_smooth_deep_is_open():
    rep = certify(net_of([3, 2, 2], ELU))
    assert not rep.guaranteed and codes(rep) == ["class_b_depth"]


def test_rank_tolerance_controls_verdict():
    W = np.array([[1.0, 0.0], [0.0, 1e-6]])
    net = Network(2, [Layer(W, np.zeros(2), LeakyReLU(0.5))], Layer(np.eye(2), np.zeros(2)))
    assert certify(net, rank_tol=1e-8).guaranteed
    loose = certify(net, rank_tol=1e-4)
    assert not loose.guaranteed and codes(loose) == ["rank_deficient"]
    assert loose.ranks[0].rank == 1


def test_report_json_fields():
    data = certify(builtin("eq5-relu")).to_json()
    assert data["verdict"] == "NoGuarantee" and data["theorem"] is None
    assert data["activation_classes"] == ["C", "C"]
    assert data["ranks"][0]["full_rank"]
