"""Closed-loop system models: expression-DAG dynamics plus a ReLU controller.

On-disk formats (both JSON):

* network file::

    {"layers": [{"weights": [[...], ...], "bias": [...],
                 "activation": "relu" | "linear"}, ...]}

  weights are row-major (out x in), layers ordered input -> output.

* system file::

    {"name": ..., "state_dim": d, "control_dim": m,
     "controller": "relative/path/to/network.json",   # omitted when m == 0
     "update": ["x0 + 0.05 * x1", ...],               # d expression strings
     "initial_set": {"lo": [...], "hi": [...]},
     "horizon": n}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .expressions import (
    Expr,
    eval_expr,
    expr_to_string,
    parse_expression,
    validate_expr,
)
from .geometry import Hyperrect

__all__ = [
    "Layer",
    "NeuralNet",
    "SystemSpec",
    "ModelError",
    "EvaluationError",
    "parse_network",
    "serialize_network",
    "load_network",
    "parse_system",
    "serialize_system",
    "load_system",
    "eval_network",
    "eval_dynamics",
    "closed_loop_step",
    "step_batch",
]

ACTIVATIONS = ("relu", "linear")


class ModelError(ValueError):
    """Malformed network/system document or inconsistent dimensions."""


class EvaluationError(RuntimeError):
    """Non-finite value produced while evaluating dynamics."""


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self) -> None:
        try:
            w = np.array(self.weights, dtype=float)
        except ValueError as exc:
            raise ModelError(f"ragged weight matrix: {exc}") from exc
        b = np.array(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise ModelError(f"weights must be a matrix, got ndim={w.ndim}")
        if w.shape[0] != b.size:
            raise ModelError(
                f"bias length {b.size} does not match {w.shape[0]} output rows")
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"unsupported activation {self.activation!r}")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Layer):
            return NotImplemented
        return (self.activation == other.activation
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.bias, other.bias))


@dataclass(frozen=True, eq=False)
class NeuralNet:
    layers: tuple[Layer, ...]

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        if not layers:
            raise ModelError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ModelError(
                    f"layer dimension chain breaks: {a.out_dim} -> {b.in_dim}")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NeuralNet):
            return NotImplemented
        return self.layers == other.layers


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """The closed loop: update expressions over (x, u) and the controller."""

    name: str
    state_dim: int
    control_dim: int
    update: tuple[Expr, ...]
    controller: Optional[NeuralNet]
    initial_set: Optional[Hyperrect] = None
    horizon: Optional[int] = None
    controller_path: Optional[str] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.state_dim < 1:
            raise ModelError("state_dim must be >= 1")
        if self.control_dim < 0:
            raise ModelError("control_dim must be >= 0")
        update = tuple(self.update)
        if len(update) != self.state_dim:
            raise ModelError(
                f"{len(update)} update expressions for state_dim={self.state_dim}")
        for expr in update:
            validate_expr(expr, self.state_dim, self.control_dim)
        if self.control_dim > 0:
            if self.controller is None:
                raise ModelError("control_dim > 0 but no controller given")
            if self.controller.input_dim != self.state_dim:
                raise ModelError(
                    f"controller input dim {self.controller.input_dim} != "
                    f"state_dim {self.state_dim}")
            if self.controller.output_dim != self.control_dim:
                raise ModelError(
                    f"controller output dim {self.controller.output_dim} != "
                    f"control_dim {self.control_dim}")
        elif self.controller is not None:
            raise ModelError("control_dim == 0 but a controller was given")
        if self.initial_set is not None and self.initial_set.dim != self.state_dim:
            raise ModelError("initial_set dimension does not match state_dim")
        if self.horizon is not None and self.horizon < 1:
            raise ModelError("horizon must be >= 1")
        object.__setattr__(self, "update", update)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return (self.name == other.name
                and self.state_dim == other.state_dim
                and self.control_dim == other.control_dim
                and self.update == other.update
                and self.controller == other.controller
                and self.initial_set == other.initial_set
                and self.horizon == other.horizon)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_network(net: NeuralNet, x: Sequence[float]) -> np.ndarray:
    """Affine-then-activation composition on a single input vector."""
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size != net.input_dim:
        raise ValueError(f"input dimension {v.size} != {net.input_dim}")
    return _net_batch(net, v.reshape(1, -1))[0]


def _net_batch(net: NeuralNet, X: np.ndarray) -> np.ndarray:
    out = X
    for layer in net.layers:
        out = out @ layer.weights.T + layer.bias
        if layer.activation == "relu":
            out = np.maximum(out, 0.0)
    return out


def eval_dynamics(sys: SystemSpec, x: Sequence[float],
                  u: Sequence[float]) -> np.ndarray:
    """One application of the update expressions; errors on non-finite output."""
    xv = np.asarray(x, dtype=float).reshape(-1)
    uv = np.asarray(u, dtype=float).reshape(-1)
    if xv.size != sys.state_dim:
        raise ValueError(f"state dimension {xv.size} != {sys.state_dim}")
    if uv.size != sys.control_dim:
        raise ValueError(f"control dimension {uv.size} != {sys.control_dim}")
    ub = uv.reshape(1, -1) if sys.control_dim else None
    out = np.array([eval_expr(e, xv.reshape(1, -1), ub)[0] for e in sys.update])
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.isfinite(out)))
        raise EvaluationError(f"non-finite value in update coordinate {bad}")
    return out


def closed_loop_step(sys: SystemSpec, x: Sequence[float]) -> np.ndarray:
    """x -> f(x, c(x)); with control_dim == 0 the controller is skipped."""
    xv = np.asarray(x, dtype=float).reshape(-1)
    u = eval_network(sys.controller, xv) if sys.control_dim else np.zeros(0)
    return eval_dynamics(sys, xv, u)


def step_batch(sys: SystemSpec, X: np.ndarray) -> np.ndarray:
    """Closed-loop step applied to (N, d) sample batches; raises on non-finite."""
    X = np.asarray(X, dtype=float)
    U = _net_batch(sys.controller, X) if sys.control_dim else None
    out = np.column_stack([eval_expr(e, X, U) for e in sys.update])
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.isfinite(out).all(axis=1)))
        raise EvaluationError(f"non-finite trajectory value for sample {bad}")
    return out


# ---------------------------------------------------------------------------
# parsing / serialization
# ---------------------------------------------------------------------------

def _as_document(text: Union[str, dict], what: str) -> dict:
    if isinstance(text, dict):
        return text
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid {what} document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelError(f"{what} document must be a JSON object")
    return doc


def parse_network(text: Union[str, dict]) -> NeuralNet:
    doc = _as_document(text, "network")
    if "layers" not in doc or not isinstance(doc["layers"], list):
        raise ModelError("network document needs a 'layers' array")
    layers = []
    for i, entry in enumerate(doc["layers"]):
        try:
            layers.append(Layer(entry["weights"], entry["bias"],
                                entry.get("activation", "relu")))
        except KeyError as exc:
            raise ModelError(f"layer {i} is missing field {exc}") from exc
        except ModelError as exc:
            raise ModelError(f"layer {i}: {exc}") from exc
    return NeuralNet(tuple(layers))


def serialize_network(net: NeuralNet) -> dict:
    return {
        "layers": [
            {"weights": l.weights.tolist(), "bias": l.bias.tolist(),
             "activation": l.activation}
            for l in net.layers
        ]
    }


def load_network(path: Union[str, Path]) -> NeuralNet:
    return parse_network(Path(path).read_text())


def parse_system(text: Union[str, dict],
                 base_dir: Optional[Union[str, Path]] = None) -> SystemSpec:
    """Parse a system document; ``base_dir`` resolves the controller path."""
    doc = _as_document(text, "system")
    for key in ("name", "state_dim", "control_dim", "update"):
        if key not in doc:
            raise ModelError(f"system document is missing field {key!r}")
    d = int(doc["state_dim"])
    m = int(doc["control_dim"])
    update_src = doc["update"]
    if not isinstance(update_src, list) or len(update_src) != d:
        raise ModelError(f"'update' must list exactly {d} expressions")
    update = tuple(parse_expression(s, d, m) for s in update_src)

    controller = None
    controller_path = None
    if m > 0:
        if "controller" not in doc:
            raise ModelError("control_dim > 0 but no 'controller' path given")
        ctrl = doc["controller"]
        if isinstance(ctrl, dict):
            controller = parse_network(ctrl)
        else:
            controller_path = str(ctrl)
            path = Path(controller_path)
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            if not path.exists():
                raise ModelError(f"controller file not found: {path}")
            controller = load_network(path)

    initial_set = None
    if "initial_set" in doc:
        box = doc["initial_set"]
        try:
            initial_set = Hyperrect(box["lo"], box["hi"])
        except (KeyError, ValueError) as exc:
            raise ModelError(f"bad initial_set: {exc}") from exc

    horizon = int(doc["horizon"]) if "horizon" in doc else None
    return SystemSpec(
        name=str(doc["name"]), state_dim=d, control_dim=m, update=update,
        controller=controller, initial_set=initial_set, horizon=horizon,
        controller_path=controller_path,
    )


def serialize_system(sys: SystemSpec) -> dict:
    doc: dict = {
        "name": sys.name,
        "state_dim": sys.state_dim,
        "control_dim": sys.control_dim,
        "update": [expr_to_string(e) for e in sys.update],
    }
    if sys.control_dim > 0:
        # embed the network so the serialized document is self-contained
        doc["controller"] = (sys.controller_path if sys.controller_path
                             else serialize_network(sys.controller))
    if sys.initial_set is not None:
        doc["initial_set"] = sys.initial_set.to_dict()
    if sys.horizon is not None:
        doc["horizon"] = sys.horizon
    return doc


def load_system(path: Union[str, Path]) -> SystemSpec:
    p = Path(path)
    return parse_system(p.read_text(), base_dir=p.parent)
