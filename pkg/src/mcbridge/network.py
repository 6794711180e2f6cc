"""A small fully connected network modelling a drift field (t, q) -> R.

Layers: 2 inputs -> 4 units -> 10 units -> 1 output, with the swish
activation x * sigmoid(x) after the first two affine maps. Gradients with
respect to the parameters are accumulated by hand through the forward
graph; the spatial input derivative uses a forward-mode sweep.
"""

from __future__ import annotations

import numpy as np

from .core import RandomStream

LAYER_SIZES = (2, 4, 10, 1)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def swish(x):
    return x * _sigmoid(x)


def swish_deriv(x):
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


class DriftNetwork:
    """Feed-forward drift model with hand-written gradient passes."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @classmethod
    def initialize(cls, stream: RandomStream):
        """Glorot-normal inner layers, Glorot-uniform output, zero biases."""
        rng = stream.generator()
        weights = []
        biases = []
        pairs = list(zip(LAYER_SIZES[1:], LAYER_SIZES[:-1]))
        for k, (n_out, n_in) in enumerate(pairs):
            if k < len(pairs) - 1:
                std = np.sqrt(2.0 / (n_in + n_out))
                w = rng.normal(0.0, std, size=(n_out, n_in))
            else:
                lim = np.sqrt(6.0 / (n_in + n_out))
                w = rng.uniform(-lim, lim, size=(n_out, n_in))
            weights.append(w)
            biases.append(np.zeros(n_out))
        return cls(weights, biases)

    def _forward_memory(self, t, q):
        x = np.stack([np.asarray(t, dtype=float),
                      np.asarray(q, dtype=float)], axis=0)
        pre = []
        acts = [x]
        a = x
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = w @ a + b[:, None]
            pre.append(z)
            a = swish(z) if k < len(self.weights) - 1 else z
            acts.append(a)
        return pre, acts

    def forward(self, t, q):
        """Network output for batched scalar inputs t, q of shape (n,)."""
        _, acts = self._forward_memory(t, q)
        return acts[-1][0]

    def param_grad(self, t, q, target):
        """Gradient of the mean squared error against `target`.

        Returns (loss, weight gradients, bias gradients) with gradients
        shaped like the parameters.
        """
        pre, acts = self._forward_memory(t, q)
        out = acts[-1][0]
        n = out.size
        resid = out - np.asarray(target, dtype=float)
        loss = float(np.mean(resid ** 2))
        delta = (2.0 / n) * resid[None, :]
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            grad_w[k] = delta @ acts[k].T
            grad_b[k] = delta.sum(axis=1)
            if k > 0:
                delta = (self.weights[k].T @ delta) * swish_deriv(pre[k - 1])
        return loss, grad_w, grad_b

    def input_space_grad(self, t, q):
        """Derivative of the output with respect to q, batched."""
        pre, _ = self._forward_memory(t, q)
        n = np.asarray(q, dtype=float).size
        tangent = np.zeros((2, n))
        tangent[1] = 1.0
        for k, w in enumerate(self.weights):
            tangent = w @ tangent
            if k < len(self.weights) - 1:
                tangent = tangent * swish_deriv(pre[k])
        return tangent[0]

    def flatten(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_flat(self, theta):
        theta = np.asarray(theta, dtype=float)
        pos = 0
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[k] = theta[pos:pos + w.size].reshape(w.shape)
            pos += w.size
            self.biases[k] = theta[pos:pos + b.size].reshape(b.shape)
            pos += b.size
        if pos != theta.size:
            raise ValueError("flat parameter vector has wrong length")

    def copy(self):
        return DriftNetwork([w.copy() for w in self.weights],
                            [b.copy() for b in self.biases])


class SGD:
    """Plain stochastic gradient descent."""

    def __init__(self, rate):
        self.rate = rate

    def step(self, net: DriftNetwork, grad_w, grad_b):
        for k in range(len(net.weights)):
            net.weights[k] = net.weights[k] - self.rate * grad_w[k]
            net.biases[k] = net.biases[k] - self.rate * grad_b[k]


class Adam:
    """Adam optimizer with the usual bias-corrected moment estimates."""

    def __init__(self, rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.rate = rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = None
        self._v = None
        self._step = 0

    def step(self, net: DriftNetwork, grad_w, grad_b):
        grads = grad_w + grad_b
        if self._m is None:
            self._m = [np.zeros_like(g) for g in grads]
            self._v = [np.zeros_like(g) for g in grads]
        self._step += 1
        c1 = 1.0 - self.beta1 ** self._step
        c2 = 1.0 - self.beta2 ** self._step
        updates = []
        for j, g in enumerate(grads):
            self._m[j] = self.beta1 * self._m[j] + (1.0 - self.beta1) * g
            self._v[j] = self.beta2 * self._v[j] + (1.0 - self.beta2) * g * g
            updates.append((self._m[j] / c1) / (np.sqrt(self._v[j] / c2) + self.eps))
        n = len(net.weights)
        for k in range(n):
            net.weights[k] = net.weights[k] - self.rate * updates[k]
            net.biases[k] = net.biases[k] - self.rate * updates[n + k]
