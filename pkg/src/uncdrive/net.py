"""Two-hidden-layer tanh MLP with an action-mean head and a value head,
hand-rolled forward/backward in numpy (float64)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

PARAM_KEYS = ("W1", "b1", "W2", "b2", "Wm", "bm", "Wv", "bv")


@dataclass
class PolicyParams:
    """Weights of the policy/value network plus the shapes needed to rebuild it."""

    input_dim: int
    hidden_dim: int
    weights: dict = field(default_factory=dict)  # name -> np.ndarray (float64)

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, seed: int) -> "PolicyParams":
        rng = np.random.default_rng(seed)

        def layer(fan_in, fan_out, scale=1.0):
            w = rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out))
            return w.astype(np.float64)

        weights = {
            "W1": layer(input_dim, hidden_dim),
            "b1": np.zeros(hidden_dim),
            "W2": layer(hidden_dim, hidden_dim),
            "b2": np.zeros(hidden_dim),
            # Small action head so the initial policy is near-neutral.
            "Wm": layer(hidden_dim, 1, scale=0.01),
            "bm": np.zeros(1),
            "Wv": layer(hidden_dim, 1),
            "bv": np.zeros(1),
        }
        return cls(input_dim=input_dim, hidden_dim=hidden_dim, weights=weights)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            self.input_dim,
            self.hidden_dim,
            {k: v.copy() for k, v in self.weights.items()},
        )

    def check_finite(self) -> None:
        for name, w in self.weights.items():
            if not np.all(np.isfinite(w)):
                raise FloatingPointError(f"non-finite values in parameter {name}")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[k].reshape(-1) for k in PARAM_KEYS])

    def set_flat(self, vector: np.ndarray) -> None:
        offset = 0
        for key in PARAM_KEYS:
            w = self.weights[key]
            w[...] = vector[offset : offset + w.size].reshape(w.shape)
            offset += w.size


def forward(params: PolicyParams, X: np.ndarray):
    """Batched forward pass.

    Returns (mu, value, cache); mu is tanh-squashed to [-1, 1].
    X must already carry vision channels scaled to [0, 1].
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.input_dim:
        raise ContractViolation(
            f"observation length {X.shape[1]} does not match network input "
            f"{params.input_dim}"
        )
    w = params.weights
    h1 = np.tanh(X @ w["W1"] + w["b1"])
    h2 = np.tanh(h1 @ w["W2"] + w["b2"])
    zm = h2 @ w["Wm"] + w["bm"]
    mu = np.tanh(zm[:, 0])
    value = (h2 @ w["Wv"] + w["bv"])[:, 0]
    cache = (X, h1, h2, mu)
    return mu, value, cache


def backward(params: PolicyParams, cache, d_mu: np.ndarray, d_value: np.ndarray) -> dict:
    """Gradients of a scalar loss given dL/dmu and dL/dV per sample."""
    X, h1, h2, mu = cache
    w = params.weights
    d_zm = (d_mu * (1.0 - mu**2))[:, None]
    d_zv = d_value[:, None]
    grads = {
        "Wm": h2.T @ d_zm,
        "bm": d_zm.sum(axis=0),
        "Wv": h2.T @ d_zv,
        "bv": d_zv.sum(axis=0),
    }
    d_h2 = (d_zm @ w["Wm"].T + d_zv @ w["Wv"].T) * (1.0 - h2**2)
    grads["W2"] = h1.T @ d_h2
    grads["b2"] = d_h2.sum(axis=0)
    d_h1 = (d_h2 @ w["W2"].T) * (1.0 - h1**2)
    grads["W1"] = X.T @ d_h1
    grads["b1"] = d_h1.sum(axis=0)
    return grads


def flat_grads(grads: dict) -> np.ndarray:
    return np.concatenate([grads[k].reshape(-1) for k in PARAM_KEYS])
