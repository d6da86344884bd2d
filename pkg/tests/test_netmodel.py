import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decregions.netmodel import (
    ELU, IDENTITY, RELU, SIGMOID, ActivationError, Activation, Layer, LeakyReLU, Network,
    NetworkError, activation_inverse, activation_value, builtin, class_margin, classify,
    forward, load_network, logits_batch, margins_batch, network_from_json,
)


def small_net():
    return Network(2, [Layer([[1.0, -1.0], [0.5, 2.0]], [0.0, 1.0], LeakyReLU(0.2))],
                   Layer([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]))


def test_activation_values():
    t = np.array([-2.0, 0.0, 3.0])
    assert activation_value(LeakyReLU(0.1), t).tolist() == [-0.2, 0.0, 3.0]
    assert activation_value(RELU, t).tolist() == [0.0, 0.0, 3.0]
    assert activation_value(ELU, -1.0) == pytest.approx(math.exp(-1) - 1)
    assert activation_value(SIGMOID, 0.0) == 0.5
    assert activation_value(IDENTITY, t).tolist() == t.tolist()


def test_activation_flags():
    assert LeakyReLU(0.3).piecewise_linear and LeakyReLU(0.3).surjective_onto_reals
    assert not RELU.strictly_increasing
    assert ELU.strictly_increasing and not ELU.surjective_onto_reals
    assert LeakyReLU(0.3).slopes == (0.3, 1.0)
    with pytest.raises(ActivationError):
        SIGMOID.slopes


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5, None])
def test_bad_alpha(alpha):
    with pytest.raises(ActivationError):
        Activation("leaky_relu", alpha)


def test_unknown_kind():
    with pytest.raises(ActivationError):
        Activation("swish")


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10))
def test_inverse_round_trip(t):
    for act in (SIGMOID, ELU, LeakyReLU(0.05), IDENTITY):
        back = activation_inverse(act, activation_value(act, t))
        assert abs(back - t) <= 1e-10 * max(1.0, abs(t)) + 1e-10


def test_inverse_domain_errors():
    with pytest.raises(ActivationError):
        activation_inverse(RELU, 1.0)
    with pytest.raises(ActivationError):
        activation_inverse(ELU, -1.0)
    with pytest.raises(ActivationError):
        activation_inverse(SIGMOID, 1.0)


def test_shape_errors_name_the_layer():
    with pytest.raises(NetworkError) as info:
        Network(2, [Layer(np.ones((3, 2)), np.zeros(2), RELU)], Layer(np.ones((2, 2)), np.zeros(2)))
    assert info.value.layer == 1
    with pytest.raises(NetworkError) as info:
        Network(2, [Layer(np.ones((2, 2)), np.zeros(2), RELU)], Layer(np.ones((2, 2)), np.zeros(3)))
    assert info.value.layer == 2
    with pytest.raises(NetworkError):
        Network(2, [Layer(np.ones((2, 2)), np.zeros(2), None)], Layer(np.ones((2, 2)), np.zeros(2)))


def test_forward_trace():
    tr = forward(small_net(), [1.0, 1.0])
    assert tr.pre[0].tolist() == [1.5, 2.0]
    assert tr.logits.tolist() == [1.5, 2.0]
    with pytest.raises(ValueError):
        forward(small_net(), [1.0, 1.0, 1.0])


def test_classify_and_ties():
    net = small_net()
    c = classify(net, [1.0, 1.0])
    assert c.label == 2 and c.margin == pytest.approx(0.5)
    tie = classify(Network(1, [], Layer([[1.0, 1.0]], [0.0, 0.0])), [3.0])
    assert tie.is_tie and tie.label is None
    assert class_margin(net, [1.0, 1.0], 1) == pytest.approx(-0.5)


def test_batch_matches_pointwise():
    net = builtin("eq5-relu")
    X = np.random.default_rng(0).normal(size=(50, 2)) * 3
    Z = logits_batch(net, X)
    for x, z in zip(X, Z):
        assert np.allclose(forward(net, x).logits, z)
    labels, margins = margins_batch(net, X)
    assert (labels == Z.argmax(axis=1) + 1).all() and (margins >= 0).all()


def test_builtin_eq5_logits():
    net = builtin("eq5-relu")
    assert forward(net, [0.0, 0.0]).logits == pytest.approx([math.sqrt(0.5), 0.0])
    assert classify(net, [0.0, 0.0]).label == 1


def test_builtin_parameters():
    net = builtin("lowrank-strips(0.1)")
    assert forward(net, [2.0, 0.0]).logits == pytest.approx([0.7, -0.2])
    assert builtin("lowrank-strips").to_json() == net.to_json()
    assert builtin("tight-2-3-2(alpha=0.2)").hidden[0].activation.alpha == 0.2
    assert builtin("eq4-nonpyramidal").widths == [2, 1, 2, 2]
    with pytest.raises(KeyError):
        builtin("eq6")
    with pytest.raises(NetworkError):
        builtin("tight-2-3-2(2)")


def test_json_round_trip_is_byte_stable():
    for name in ("eq4-nonpyramidal", "eq5-relu", "lowrank-strips(0.25)", "tight-2-3-2"):
        text = builtin(name).dumps()
        assert load_network(text).dumps() == text
        assert load_network(text.encode()).dumps() == text
        assert load_network(io.StringIO(text)).dumps() == text


def test_malformed_json():
    with pytest.raises(NetworkError):
        load_network("{not json")
    with pytest.raises(NetworkError):
        network_from_json({"layers": []})
    bad = json.loads(small_net().dumps())
    bad["layers"][0]["activation"] = {"kind": "leaky_relu", "alpha": 3}
    with pytest.raises(NetworkError) as info:
        network_from_json(bad)
    assert info.value.layer == 1
    bad = json.loads(small_net().dumps())
    bad["output"]["activation"] = {"kind": "relu"}
    with pytest.raises(NetworkError):
        network_from_json(bad)


def test_parameters_are_immutable():
    net = small_net()
    with pytest.raises(ValueError):
        net.hidden[0].weights[0, 0] = 5.0
