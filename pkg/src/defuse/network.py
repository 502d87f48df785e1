"""Small dense ReLU regression network with an extra linear feature block.

The model is y_hat = W^L(relu(... relu(W^1 x + b^1) ...)) + b^L + <xi, beta>,
where x holds the raw candidate-parent columns and xi their residual
features. Backprop is hand-derived for this fixed architecture; training
uses Adam with a group penalty on first-layer input columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


@dataclass
class NetworkParams:
    """Weights W^l (shape h_l x h_{l-1}), biases b^l, and coefficients beta."""

    weights: list
    biases: list
    beta: np.ndarray

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            beta=self.beta.copy(),
        )

    def tensors(self) -> list:
        return [*self.weights, *self.biases, self.beta]

    def column_norms(self) -> np.ndarray:
        """Euclidean norm of each first-layer input column."""
        return np.linalg.norm(self.weights[0], axis=0)

    def theta_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(t * t)) for t in self.tensors())))

    def masked(self, keep) -> "NetworkParams":
        """Copy with every first-layer column outside ``keep`` set to zero."""
        out = self.copy()
        mask = np.zeros(self.n_inputs, dtype=bool)
        keep = np.asarray(list(keep), dtype=int)
        if keep.size:
            mask[keep] = True
        out.weights[0][:, ~mask] = 0.0
        return out

    def scale_in_place(self, factor: float):
        for t in self.tensors():
            t *= factor

    def to_json_dict(self, include_weights: bool = False) -> dict:
        doc = {
            "layers": self.n_layers,
            "hidden_width": int(self.weights[0].shape[0]) if self.n_layers > 1 else 1,
            "n_inputs": self.n_inputs,
            "beta": self.beta.tolist(),
        }
        if include_weights:
            doc["weights"] = [w.tolist() for w in self.weights]
            doc["biases"] = [b.tolist() for b in self.biases]
        return doc


def init_params(
    n_inputs: int,
    n_resid: int,
    hidden_width: int,
    hidden_layers: int,
    rng: np.random.Generator,
    out_bias: float = 0.0,
    beta: np.ndarray | None = None,
) -> NetworkParams:
    """He-style symmetric uniform weights scaled by fan-in; zero hidden biases."""
    dims = [n_inputs] + [hidden_width] * hidden_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / max(fan_in, 1))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    biases[-1][0] = out_bias
    if beta is None:
        beta = np.zeros(n_resid)
    return NetworkParams(weights=weights, biases=biases, beta=np.asarray(beta, dtype=float).copy())


def _forward(params: NetworkParams, x: np.ndarray, xi: np.ndarray):
    """Returns (y_hat, hidden activations including the input block)."""
    acts = [x]
    a = x
    last = params.n_layers - 1
    for l in range(last):
        a = np.maximum(a @ params.weights[l].T + params.biases[l], 0.0)
        acts.append(a)
    out = a @ params.weights[last].T + params.biases[last]
    y_hat = out[:, 0] + xi @ params.beta
    return y_hat, acts


def predict(params: NetworkParams, x, xi) -> np.ndarray:
    """Forward pass with shape validation."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.ndim != 2 or xi.ndim != 2:
        raise ShapeMismatch("x and xi must be 2-d")
    if x.shape[0] != xi.shape[0]:
        raise ShapeMismatch(f"row counts differ: {x.shape[0]} vs {xi.shape[0]}")
    if x.shape[1] != params.n_inputs:
        raise ShapeMismatch(f"expected {params.n_inputs} input columns, got {x.shape[1]}")
    if xi.shape[1] != params.beta.size:
        raise ShapeMismatch(f"expected {params.beta.size} residual columns, got {xi.shape[1]}")
    return _forward(params, x, xi)[0]


def regularizer_value(params: NetworkParams, tau: float) -> float:
    """Group penalty sum_k min(||W^1_k|| / tau, 1) over input columns."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return float(np.sum(np.minimum(params.column_norms() / tau, 1.0)))


def loss_and_grads(
    params: NetworkParams,
    x: np.ndarray,
    xi: np.ndarray,
    y: np.ndarray,
    lam: float = 0.0,
    tau: float = 0.05,
    beta_mask: np.ndarray | None = None,
    input_mask: np.ndarray | None = None,
):
    """Summed squared error plus the group penalty, with its (sub)gradients.

    The penalty contributes gradient only where 0 < ||W^1_k|| < tau; the
    plateau above tau and the origin both get zero, so inactive columns are
    not revived. ``beta_mask``/``input_mask`` freeze coefficients outside
    the stage-one support and columns excluded from selection.
    """
    y_hat, acts = _forward(params, x, xi)
    resid = y_hat - y
    loss = float(resid @ resid)

    grads_w = [None] * params.n_layers
    grads_b = [None] * params.n_layers
    delta = 2.0 * resid[:, None]
    last = params.n_layers - 1
    grads_w[last] = delta.T @ acts[last]
    grads_b[last] = delta.sum(axis=0)
    for l in range(last - 1, -1, -1):
        delta = (delta @ params.weights[l + 1]) * (acts[l + 1] > 0.0)
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)

    grad_beta = xi.T @ (2.0 * resid)
    if beta_mask is not None:
        grad_beta = np.where(beta_mask, grad_beta, 0.0)

    if lam > 0.0:
        norms = np.linalg.norm(params.weights[0], axis=0)
        loss += lam * float(np.sum(np.minimum(norms / tau, 1.0)))
        active = (norms > 0.0) & (norms < tau)
        if active.any():
            scale = np.zeros_like(norms)
            scale[active] = lam / (tau * norms[active])
            grads_w[0] = grads_w[0] + params.weights[0] * scale
    if input_mask is not None:
        grads_w[0][:, ~input_mask] = 0.0

    return loss, grads_w + grads_b + [grad_beta]


class Adam:
    """Adaptive-moment optimizer over a flat list of tensors."""

    def __init__(self, tensors, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(t) for t in tensors]
        self.v = [np.zeros_like(t) for t in tensors]

    def step(self, tensors, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for tensor, grad, m, v in zip(tensors, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            tensor -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
