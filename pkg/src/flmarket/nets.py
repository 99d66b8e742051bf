"""Minimal feed-forward network kernel with exact manual gradients.

Everything the learning agents need and nothing more: fully-connected
layers with relu/tanh hidden activations, identity or sigmoid output,
Adam-style optimizer, Polyak averaging of target parameters, and a
versioned checkpoint format.  All arithmetic is float64 and every
operation is a pure function of its inputs (plus an explicit RNG).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

HiddenActivation = Literal["relu", "tanh"]
OutputActivation = Literal["identity", "sigmoid"]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Network shape: sizes of every layer, input and output included."""

    layer_sizes: tuple[int, ...]
    hidden_activation: HiddenActivation = "relu"
    output_activation: OutputActivation = "identity"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("MlpSpec needs at least an input and an output layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {self.layer_sizes}")
        if self.hidden_activation not in ("relu", "tanh"):
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("identity", "sigmoid"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class MlpParams:
    """Per-layer weight matrices (out, in) and bias vectors (out,)."""

    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "MlpParams":
        return MlpParams(self.spec, [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def check_shapes_match(self, other: "MlpParams") -> None:
        if len(self.weights) != len(other.weights):
            raise ValueError("layer count mismatch")
        for a, b in zip(self.arrays(), other.arrays()):
            if a.shape != b.shape:
                raise ValueError(f"parameter shape mismatch: {a.shape} vs {b.shape}")


def mlp_init(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Fan-in-scaled normal weights (fan-avg for tanh nets), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        if spec.hidden_activation == "tanh":
            std = np.sqrt(2.0 / (fan_in + fan_out))
        else:
            std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


@dataclass
class ForwardTape:
    """Activation record from a forward pass, consumed by mlp_backward."""

    spec: MlpSpec
    inputs: list[np.ndarray]  # input to each layer, shape (B, in)
    pre_acts: list[np.ndarray]  # pre-activation of each layer, shape (B, out)
    single: bool  # caller passed a 1-D vector


def _apply_hidden(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, ForwardTape]:
    """Evaluate the net on a vector or a (batch, features) matrix."""
    spec = params.spec
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != spec.input_size:
        raise ValueError(f"input size {h.shape[1]} != expected {spec.input_size}")
    inputs, pre_acts = [], []
    n = spec.n_layers
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre_acts.append(z)
        if i < n - 1:
            h = _apply_hidden(z, spec.hidden_activation)
        elif spec.output_activation == "sigmoid":
            h = 1.0 / (1.0 + np.exp(-z))
        else:
            h = z
    tape = ForwardTape(spec, inputs, pre_acts, single)
    return (h[0] if single else h), tape


def mlp_backward(
    params: MlpParams, tape: ForwardTape, output_gradient: np.ndarray
) -> tuple[MlpParams, np.ndarray]:
    """Exact gradients of sum(output * output_gradient).

    Parameter gradients are summed over the batch; the returned input
    gradient keeps the per-sample batch shape.
    """
    spec = params.spec
    if tape.spec != spec:
        raise ValueError("tape was produced by a different network spec")
    gy = np.asarray(output_gradient, dtype=float)
    g = gy[None, :] if tape.single else gy
    if g.shape != tape.pre_acts[-1].shape:
        raise ValueError(f"output gradient shape {g.shape} != {tape.pre_acts[-1].shape}")
    grads = params.zeros_like()
    n = spec.n_layers
    for i in range(n - 1, -1, -1):
        z = tape.pre_acts[i]
        if i == n - 1:
            if spec.output_activation == "sigmoid":
                s = 1.0 / (1.0 + np.exp(-z))
                dz = g * s * (1.0 - s)
            else:
                dz = g
        elif spec.hidden_activation == "relu":
            dz = g * (z > 0.0)
        else:
            dz = g * (1.0 - np.tanh(z) ** 2)
        grads.weights[i] = dz.T @ tape.inputs[i]
        grads.biases[i] = dz.sum(axis=0)
        g = dz @ params.weights[i]
    return grads, (g[0] if tape.single else g)


@dataclass
class OptimizerState:
    """Adam accumulator state for one parameter set."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: MlpParams | None = None
    v: MlpParams | None = None

    @classmethod
    def fresh(cls, params: MlpParams, lr: float, **kw) -> "OptimizerState":
        return cls(lr=lr, m=params.zeros_like(), v=params.zeros_like(), **kw)


def optimizer_step(
    params: MlpParams, gradients: MlpParams, state: OptimizerState
) -> tuple[MlpParams, OptimizerState]:
    """One bias-corrected Adam update; rejects non-finite gradients."""
    params.check_shapes_match(gradients)
    for g in gradients.arrays():
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient; update refused")
    t = state.step + 1
    new_params = params.zeros_like()
    new_m = params.zeros_like()
    new_v = params.zeros_like()
    for p, g, m, v, np_, nm, nv in zip(
        params.arrays(), gradients.arrays(), state.m.arrays(), state.v.arrays(),
        new_params.arrays(), new_m.arrays(), new_v.arrays(),
    ):
        nm[...] = state.beta1 * m + (1.0 - state.beta1) * g
        nv[...] = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = nm / (1.0 - state.beta1**t)
        v_hat = nv / (1.0 - state.beta2**t)
        np_[...] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = replace(state, step=t, m=new_m, v=new_v)
    return new_params, new_state


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Polyak average: tau * online + (1 - tau) * target, entrywise."""
    target.check_shapes_match(online)
    out = target.zeros_like()
    for t, o, r in zip(target.arrays(), online.arrays(), out.arrays()):
        r[...] = tau * o + (1.0 - tau) * t
    return out


def save_params(path, params: MlpParams) -> None:
    """Versioned .npz checkpoint: spec fields plus row-major layer arrays."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "layer_sizes": np.array(params.spec.layer_sizes),
        "hidden_activation": np.array(params.spec.hidden_activation),
        "output_activation": np.array(params.spec.output_activation),
    }
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        payload[f"w{i}"] = np.ascontiguousarray(w)
        payload[f"b{i}"] = np.ascontiguousarray(b)
    np.savez(path, **payload)


def load_params(path) -> MlpParams:
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        spec = MlpSpec(
            tuple(int(s) for s in data["layer_sizes"]),
            hidden_activation=str(data["hidden_activation"]),
            output_activation=str(data["output_activation"]),
        )
        weights = [data[f"w{i}"].astype(float) for i in range(spec.n_layers)]
        biases = [data[f"b{i}"].astype(float) for i in range(spec.n_layers)]
    return MlpParams(spec, weights, biases)
