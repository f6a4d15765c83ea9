import json

import numpy as np
import pytest

from temporeach import fixtures
from temporeach.model import (
    EvaluationError,
    Layer,
    ModelError,
    NeuralNet,
    SystemSpec,
    closed_loop_step,
    eval_dynamics,
    eval_network,
    load_system,
    parse_network,
    parse_system,
    serialize_network,
    serialize_system,
    step_batch,
)
from temporeach.expressions import Scale, StateVar, Sum, Unary

from conftest import identity_system


def relu_net(*shapes, seed=0):
    rng = np.random.default_rng(seed)
    layers = []
    for i, (out, inp) in enumerate(shapes):
        act = "linear" if i == len(shapes) - 1 else "relu"
        layers.append(Layer(rng.normal(size=(out, inp)) * 0.5,
                            rng.normal(size=out) * 0.1, act))
    return NeuralNet(tuple(layers))


class TestNetwork:
    def test_identity_linear_layer(self):
        net = NeuralNet((Layer(np.eye(3), np.zeros(3), "linear"),))
        x = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(eval_network(net, x), x)

    def test_relu_clips(self):
        net = NeuralNet((Layer(np.eye(2), np.zeros(2), "relu"),))
        assert np.array_equal(eval_network(net, [-1.0, 2.0]), [0.0, 2.0])

    def test_fixture_net_matches_hand_evaluation(self, pendulum):
        # independent plain-Python forward pass over the stored weights
        net = pendulum.controller
        x = [0.37, -0.11]
        vals = list(x)
        for layer in net.layers:
            nxt = []
            for row, b in zip(layer.weights.tolist(), layer.bias.tolist()):
                acc = b + sum(w * v for w, v in zip(row, vals))
                nxt.append(max(acc, 0.0) if layer.activation == "relu" else acc)
            vals = nxt
        got = eval_network(net, x)
        assert np.allclose(got, vals, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        net = relu_net((4, 2), (1, 4))
        with pytest.raises(ValueError, match="dimension"):
            eval_network(net, [1.0, 2.0, 3.0])

    def test_parse_rejects_sigmoid(self):
        doc = {"layers": [{"weights": [[1.0]], "bias": [0.0],
                           "activation": "sigmoid"}]}
        with pytest.raises(ModelError, match="sigmoid"):
            parse_network(doc)

    def test_parse_rejects_ragged(self):
        doc = {"layers": [{"weights": [[1.0, 2.0], [1.0]], "bias": [0.0, 0.0],
                           "activation": "relu"}]}
        with pytest.raises(ModelError, match="ragged|matrix"):
            parse_network(doc)

    def test_parse_rejects_chain_break(self):
        doc = {"layers": [
            {"weights": [[1.0, 2.0]], "bias": [0.0], "activation": "relu"},
            {"weights": [[1.0, 1.0]], "bias": [0.0], "activation": "linear"},
        ]}
        with pytest.raises(ModelError, match="chain"):
            parse_network(doc)

    def test_s1_shaped_document(self, pendulum):
        # 2 hidden layers x 25 neurons controller: dims [d, 25, 25, m]
        net = pendulum.controller
        dims = [net.input_dim] + [l.out_dim for l in net.layers]
        assert dims == [2, 25, 25, 1]

    def test_round_trip(self):
        net = relu_net((5, 3), (2, 5), seed=3)
        assert parse_network(serialize_network(net)) == net


class TestSystemParsing:
    MINIMAL = {
        "name": "id1", "state_dim": 1, "control_dim": 0, "update": ["x0"],
    }

    def test_minimal_identity_document(self):
        sys = parse_system(json.dumps(self.MINIMAL))
        assert sys.state_dim == 1 and sys.control_dim == 0
        assert np.array_equal(closed_loop_step(sys, [3.25]), [3.25])

    def test_pendulum_fixture_round_trip(self, pendulum):
        doc = serialize_system(pendulum)
        again = parse_system(doc, base_dir=fixtures.path("pendulum").parent)
        assert again == pendulum

    def test_unknown_primitive_in_update(self):
        doc = dict(self.MINIMAL, update=["log(x0)"])
        with pytest.raises(Exception, match="unknown primitive"):
            parse_system(json.dumps(doc))

    def test_missing_controller_path(self):
        doc = dict(self.MINIMAL, control_dim=1, update=["x0 + u0"])
        with pytest.raises(ModelError, match="controller"):
            parse_system(json.dumps(doc))

    def test_dimension_inconsistency(self):
        doc = dict(self.MINIMAL, update=["x0", "x0"])
        with pytest.raises(ModelError, match="update"):
            parse_system(json.dumps(doc))

    def test_missing_field(self):
        with pytest.raises(ModelError, match="missing field"):
            parse_system(json.dumps({"name": "x"}))

    def test_fixture_files_parse(self):
        for name in fixtures.names():
            sys = fixtures.load(name)
            assert sys.initial_set is not None and sys.horizon is not None


class TestDynamics:
    def test_identity(self):
        sys = identity_system(3)
        x = np.array([1.0, -2.0, 0.25])
        assert np.array_equal(eval_dynamics(sys, x, []), x)

    def test_linear_scaling(self):
        sys = SystemSpec(name="s", state_dim=1, control_dim=0,
                         update=(Scale(0.5, StateVar(0)),), controller=None)
        assert eval_dynamics(sys, [2.0], [])[0] == 1.0

    def test_sin_at_zero(self):
        sys = SystemSpec(
            name="s", state_dim=1, control_dim=0,
            update=(Sum(StateVar(0), Scale(0.1, Unary("sin", StateVar(0)))),),
            controller=None)
        assert eval_dynamics(sys, [0.0], [])[0] == 0.0

    def test_scale_half_with_zero_controller(self):
        net = NeuralNet((Layer(np.zeros((1, 1)), np.zeros(1), "linear"),))
        sys = SystemSpec(name="s", state_dim=1, control_dim=1,
                         update=(Scale(0.5, StateVar(0)),), controller=net)
        assert closed_loop_step(sys, [4.0])[0] == 2.0

    def test_pendulum_step_matches_sampling_oracle(self, pendulum):
        # reference value via the independent batched path used by the oracle
        x = np.array([0.1, 0.0])
        via_batch = step_batch(pendulum, x.reshape(1, -1))[0]
        via_scalar = closed_loop_step(pendulum, x)
        assert np.allclose(via_scalar, via_batch, rtol=1e-14, atol=1e-14)

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_non_finite_reported(self):
        sys = SystemSpec(name="s", state_dim=1, control_dim=0,
                         update=(Unary("exp", StateVar(0)),), controller=None)
        with pytest.raises(EvaluationError, match="non-finite"):
            x = np.array([800.0])
            # exp(800) overflows to inf after one step
            eval_dynamics(sys, eval_dynamics(sys, x, []), [])

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            eval_dynamics(identity_system(2), [1.0], [])


class TestFixtureSanity:
    @pytest.mark.parametrize("name", fixtures.names())
    def test_thousand_random_steps_stay_finite(self, name):
        sys = fixtures.load(name)
        box = sys.initial_set
        rng = np.random.default_rng(123)
        X = rng.uniform(box.lo, box.hi, size=(1000, box.dim))
        out = step_batch(sys, X)
        assert np.all(np.isfinite(out))
