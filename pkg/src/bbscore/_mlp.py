"""Small fully-connected network machinery shared by the bridge encoder and
the score classifier: initialization, forward/backward passes, and SGD with
classical momentum.  Hidden layers use ReLU; the output layer is linear.
All math is plain numpy on float64 arrays.
"""

from typing import List, Tuple

import numpy as np

from .errors import DataError

Layer = Tuple[np.ndarray, np.ndarray]  # (W: (fan_in, fan_out), b: (fan_out,))


def init_layers(dims, rng: np.random.Generator) -> List[Layer]:
    """Uniform init on ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` for weights and
    biases alike, one layer per consecutive pair in ``dims``."""
    if len(dims) < 2:
        raise DataError(f"need at least input and output sizes, got dims={list(dims)}")
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append((w, b))
    return layers


def forward(layers: List[Layer], x: np.ndarray):
    """Run ``x`` (``(B, d_in)``) through the network.

    Returns ``(out, caches)`` where ``caches`` holds, per layer, the layer's
    input and pre-activation — exactly what :func:`backward` needs.
    """
    caches = []
    h = x
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        pre = h @ w + b
        caches.append((h, pre))
        h = pre if k == last else np.maximum(pre, 0.0)
    return h, caches


def backward(layers: List[Layer], caches, d_out: np.ndarray):
    """Backpropagate ``d_out`` (gradient w.r.t. the network output).

    Returns ``(grads, d_x)``: per-layer ``(dW, db)`` in the same order as
    ``layers``, plus the gradient w.r.t. the network input.
    """
    grads: List[Layer] = [None] * len(layers)  # type: ignore[list-item]
    d_h = d_out
    last = len(layers) - 1
    for k in range(last, -1, -1):
        w, _ = layers[k]
        x_in, pre = caches[k]
        d_pre = d_h if k == last else d_h * (pre > 0.0)
        grads[k] = (x_in.T @ d_pre, d_pre.sum(axis=0))
        d_h = d_pre @ w.T
    return grads, d_h


def zero_velocity(layers: List[Layer]) -> List[Layer]:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in layers]


def sgd_momentum_step(layers, grads, velocity, lr: float, momentum: float):
    """Classical momentum update, in place on ``layers`` and ``velocity``:
    ``v <- momentum * v + g``; ``theta <- theta - lr * v``."""
    for (w, b), (gw, gb), (vw, vb) in zip(layers, grads, velocity):
        vw *= momentum
        vw += gw
        vb *= momentum
        vb += gb
        w -= lr * vw
        b -= lr * vb


def flatten_params(layers: List[Layer]) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in layers])


def unflatten_params(flat: np.ndarray, like: List[Layer]) -> List[Layer]:
    out = []
    pos = 0
    for w, b in like:
        nw, nb = w.size, b.size
        out.append((flat[pos:pos + nw].reshape(w.shape).copy(),
                    flat[pos + nw:pos + nw + nb].reshape(b.shape).copy()))
        pos += nw + nb
    return out
