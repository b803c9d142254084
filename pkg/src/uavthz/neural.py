"""Minimal dense feed-forward substrate: forward pass, exact backprop, Adam, Polyak.

Everything is float64 numpy; networks are plain dataclass values whose
parameters are mutated in place by the optimizer ops. Shapes follow
(batch, features); 1-D inputs are treated as a single sample.
"""

from dataclasses import dataclass, field

import numpy as np

from uavthz.errors import InvalidInputError, NumericFailureError

ACT_LINEAR = "linear"
ACT_TANH = "tanh"

CHECKPOINT_VERSION = 1


@dataclass
class DenseNet:
    """Fully connected ReLU network with a linear or scaled-tanh output layer."""

    layer_dims: tuple
    weights: list          # weights[l]: (layer_dims[l], layer_dims[l+1])
    biases: list           # biases[l]: (layer_dims[l+1],)
    output_activation: str = ACT_LINEAR
    output_scale: float = 1.0
    init_seed: int = 0

    def architecture(self):
        return (tuple(self.layer_dims), self.output_activation, self.output_scale)


@dataclass
class AdamState:
    """First/second moment accumulators and step counter for one network."""

    first_moment: list
    second_moment: list
    step_count: int = 0
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_net(layer_dims, seed: int, output_activation: str = ACT_LINEAR,
             output_scale: float = 1.0) -> DenseNet:
    """Seeded initialization, uniform in +-1/sqrt(fan_in) per layer."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidInputError(f"bad layer dims {dims}")
    if output_activation not in (ACT_LINEAR, ACT_TANH):
        raise InvalidInputError(f"unknown output activation {output_activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return DenseNet(dims, weights, biases, output_activation, output_scale, seed)


def init_adam(net: DenseNet, learning_rate: float) -> AdamState:
    m = [np.zeros_like(w) for w in net.weights] + [np.zeros_like(b) for b in net.biases]
    v = [np.zeros_like(w) for w in net.weights] + [np.zeros_like(b) for b in net.biases]
    return AdamState(m, v, 0, learning_rate)


def _check_input(net: DenseNet, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise InvalidInputError(
            f"input shape {x.shape} incompatible with input dim {net.layer_dims[0]}")
    return x, squeezed


def _forward_cached(net: DenseNet, x: np.ndarray):
    """Returns (output, activations, pre_output) with activations[l] = input of layer l."""
    acts = [x]
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    z = h @ net.weights[-1] + net.biases[-1]
    if net.output_activation == ACT_TANH:
        y = net.output_scale * np.tanh(z)
    else:
        y = z
    return y, acts, z


def forward(net: DenseNet, x):
    """Deterministic forward pass; 1-D input gives a 1-D output."""
    x2, squeezed = _check_input(net, x)
    y, _, _ = _forward_cached(net, x2)
    return y[0] if squeezed else y


def backward(net: DenseNet, x, output_grad):
    """Exact reverse-mode gradients of sum(output * output_grad).

    Returns (weight_grads, bias_grads, input_grad); gradients are summed over
    the batch, so any 1/batch factor belongs in output_grad.
    """
    x2, squeezed = _check_input(net, x)
    g = np.asarray(output_grad, dtype=float)
    if squeezed and g.ndim == 1:
        g = g[None, :]
    if g.shape != (x2.shape[0], net.layer_dims[-1]):
        raise InvalidInputError(
            f"output_grad shape {g.shape} incompatible with output dim {net.layer_dims[-1]}")
    y, acts, z = _forward_cached(net, x2)
    if net.output_activation == ACT_TANH:
        t = np.tanh(z)
        delta = g * net.output_scale * (1.0 - t * t)
    else:
        delta = g.copy()
    n_layers = len(net.weights)
    w_grads = [None] * n_layers
    b_grads = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        w_grads[l] = acts[l].T @ delta
        b_grads[l] = delta.sum(axis=0)
        delta = delta @ net.weights[l].T
        if l > 0:
            delta = delta * (acts[l] > 0)
    input_grad = delta[0] if squeezed else delta
    return w_grads, b_grads, input_grad


def adam_step(net: DenseNet, w_grads, b_grads, state: AdamState) -> None:
    """One bias-corrected Adam update in place; aborts loudly on non-finite gradients."""
    grads = list(w_grads) + list(b_grads)
    params = list(net.weights) + list(net.biases)
    if len(grads) != len(params):
        raise InvalidInputError("gradient list does not match parameter list")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericFailureError("non-finite gradient in Adam step")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise InvalidInputError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


def polyak_update(target: DenseNet, online: DenseNet, tau: float) -> DenseNet:
    """target <- tau*online + (1-tau)*target, elementwise, in place."""
    if target.architecture() != online.architecture():
        raise InvalidInputError("target and online network architectures differ")
    if not 0.0 <= tau <= 1.0:
        raise InvalidInputError(f"tau must lie in [0, 1], got {tau}")
    for tp, op in zip(target.weights + target.biases, online.weights + online.biases):
        tp *= 1.0 - tau
        tp += tau * op
    return target


def clone_net(net: DenseNet) -> DenseNet:
    return DenseNet(tuple(net.layer_dims), [w.copy() for w in net.weights],
                    [b.copy() for b in net.biases], net.output_activation,
                    net.output_scale, net.init_seed)


def save_net(path, net: DenseNet, adam: AdamState | None = None) -> None:
    """Checkpoint a network (and optionally its Adam state) to an .npz file.

    The dump holds a version tag, the layer sizes, the init seed and every
    parameter array in layer order; float64 payloads round-trip bit-exactly.
    """
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "layer_dims": np.array(net.layer_dims),
        "output_activation": np.array(net.output_activation),
        "output_scale": np.array(net.output_scale),
        "init_seed": np.array(net.init_seed),
        "n_layers": np.array(len(net.weights)),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    if adam is not None:
        payload["adam_step"] = np.array(adam.step_count)
        payload["adam_lr"] = np.array(adam.learning_rate)
        payload["adam_betas_eps"] = np.array([adam.beta1, adam.beta2, adam.epsilon])
        for i, (m, v) in enumerate(zip(adam.first_moment, adam.second_moment)):
            payload[f"adam_m{i}"] = m
            payload[f"adam_v{i}"] = v
    np.savez(path, **payload)


def load_net(path) -> tuple[DenseNet, AdamState | None]:
    """Restore a checkpointed network and, when present, its Adam state."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise InvalidInputError(f"unsupported checkpoint version {version}")
        dims = tuple(int(d) for d in data["layer_dims"])
        n_layers = int(data["n_layers"])
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
        net = DenseNet(dims, weights, biases, str(data["output_activation"]),
                       float(data["output_scale"]), int(data["init_seed"]))
        adam = None
        if "adam_step" in data:
            m = [data[f"adam_m{i}"] for i in range(2 * n_layers)]
            v = [data[f"adam_v{i}"] for i in range(2 * n_layers)]
            b1, b2, eps = (float(x) for x in data["adam_betas_eps"])
            adam = AdamState(m, v, int(data["adam_step"]), float(data["adam_lr"]),
                             b1, b2, eps)
    return net, adam
