"""Dense networks with manual reverse-mode gradients and Adam updates.

Everything is float64 numpy: the sizes involved are small enough that
exactness beats throughput, and it keeps finite-difference gradient checks
sharp.
"""

from __future__ import annotations

import numpy as np


class DenseNetwork:
    """Fully connected network, tanh hidden activations, linear output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator):
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (n_in + n_out))
            self.weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            self.biases.append(np.zeros(n_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray):
        """Returns (output, cache); input shape (batch, n_in)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} != layer width {self.sizes[0]}")
        activations = [x]
        h = x
        for layer in range(self.n_layers):
            z = h @ self.weights[layer] + self.biases[layer]
            h = np.tanh(z) if layer < self.n_layers - 1 else z
            activations.append(h)
        return h, activations

    def backward(self, cache: list[np.ndarray], grad_out: np.ndarray):
        """Exact reverse pass. Returns (grads, grad_input) where grads
        mirrors parameters() and grad_input has the input batch shape."""
        grad = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        for layer in range(self.n_layers - 1, -1, -1):
            h_out = cache[layer + 1]
            if layer < self.n_layers - 1:  # undo tanh
                grad = grad * (1.0 - h_out * h_out)
            h_in = cache[layer]
            grads_w[layer] = h_in.T @ grad
            grads_b[layer] = grad.sum(axis=0)
            grad = grad @ self.weights[layer].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return grads, grad

    def copy_from(self, other: "DenseNetwork") -> None:
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[...] = theirs

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}_sizes": np.array(self.sizes, dtype=np.int64)}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}_w{k}"] = w
            out[f"{prefix}_b{k}"] = b
        return out

    @classmethod
    def from_state(cls, data: dict[str, np.ndarray], prefix: str) -> "DenseNetwork":
        sizes = [int(v) for v in data[f"{prefix}_sizes"]]
        net = cls(sizes, np.random.default_rng(0))
        for k in range(net.n_layers):
            net.weights[k] = np.asarray(data[f"{prefix}_w{k}"], dtype=np.float64).reshape(
                sizes[k], sizes[k + 1]).copy()
            net.biases[k] = np.asarray(data[f"{prefix}_b{k}"], dtype=np.float64).reshape(
                sizes[k + 1]).copy()
        return net


class Adam:
    """Adam with the standard bias correction; descent direction by default
    (negate the gradient upstream for ascent objectives)."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / b1c
            v_hat = self.v[k] / b2c
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}_t": np.array([self.t], dtype=np.int64)}
        for k, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"{prefix}_m{k}"] = m
            out[f"{prefix}_v{k}"] = v
        return out

    def load_state(self, data: dict[str, np.ndarray], prefix: str) -> None:
        self.t = int(data[f"{prefix}_t"][0])
        for k in range(len(self.m)):
            self.m[k] = np.asarray(data[f"{prefix}_m{k}"], dtype=np.float64).reshape(self.m[k].shape).copy()
            self.v[k] = np.asarray(data[f"{prefix}_v{k}"], dtype=np.float64).reshape(self.v[k].shape).copy()
