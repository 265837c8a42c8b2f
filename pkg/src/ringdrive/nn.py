"""Minimal dense policy-value network and Adam optimizer, numpy only.

The network is a shared trunk: two rectified-linear hidden layers feed one
linear head of width L+1, slot 0 being the state value and slots 1..L the
Gaussian action means.  A single global log-width parameter is trained
alongside the weights.  Everything is float64 so gradients can be checked
against finite differences tightly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3", "log_sigma")


class PolicyValueNet:
    """Two hidden layers of `hidden` units, linear head of width actions+1."""

    def __init__(self, n_inputs: int, n_actions: int, hidden: int,
                 sigma_init: float = 0.5, rng: np.random.Generator | None = None):
        if n_inputs < 1 or n_actions < 1 or hidden < 1:
            raise ValueError("layer sizes must be positive")
        if sigma_init <= 0:
            raise ValueError(f"sigma_init must be positive, got {sigma_init}")
        rng = np.random.default_rng() if rng is None else rng
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.hidden = hidden
        # He initialization on the trunk, small head so early actions stay
        # near zero mean.
        self.params: dict[str, np.ndarray] = {
            "w1": rng.normal(0.0, np.sqrt(2.0 / n_inputs), (hidden, n_inputs)),
            "b1": np.zeros(hidden),
            "w2": rng.normal(0.0, np.sqrt(2.0 / hidden), (hidden, hidden)),
            "b2": np.zeros(hidden),
            "w3": rng.normal(0.0, 0.01, (n_actions + 1, hidden)),
            "b3": np.zeros(n_actions + 1),
            "log_sigma": np.array(np.log(sigma_init)),
        }

    @property
    def sigma(self) -> float:
        return float(np.exp(self.params["log_sigma"]))

    def forward(self, x: np.ndarray):
        """Values, action means, and the cache needed for backward.

        `x` is (batch, n_inputs); returns (values (batch,), means
        (batch, n_actions), cache).
        """
        p = self.params
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z1 = x @ p["w1"].T + p["b1"]
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ p["w2"].T + p["b2"]
        h2 = np.maximum(z2, 0.0)
        out = h2 @ p["w3"].T + p["b3"]
        cache = (x, z1, h1, z2, h2)
        return out[:, 0], out[:, 1:], cache

    def backward(self, cache, d_values: np.ndarray, d_means: np.ndarray):
        """Gradients of a scalar loss given dL/dV and dL/dmu.

        Returns a dict over PARAM_NAMES; `log_sigma` is zero here since the
        width enters the loss only through the densities, which the caller
        differentiates directly.
        """
        p = self.params
        x, z1, h1, z2, h2 = cache
        d_out = np.concatenate([d_values[:, None], d_means], axis=1)
        grads = {
            "w3": d_out.T @ h2,
            "b3": d_out.sum(axis=0),
        }
        d_h2 = (d_out @ p["w3"]) * (z2 > 0.0)
        grads["w2"] = d_h2.T @ h1
        grads["b2"] = d_h2.sum(axis=0)
        d_h1 = (d_h2 @ p["w2"]) * (z1 > 0.0)
        grads["w1"] = d_h1.T @ x
        grads["b1"] = d_h1.sum(axis=0)
        grads["log_sigma"] = np.array(0.0)
        return grads

    def clone(self) -> "PolicyValueNet":
        dup = object.__new__(PolicyValueNet)
        dup.n_inputs = self.n_inputs
        dup.n_actions = self.n_actions
        dup.hidden = self.hidden
        dup.params = {k: v.copy() for k, v in self.params.items()}
        return dup

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        for name in PARAM_NAMES:
            self.params[name] = np.array(params[name], dtype=float)


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
            t=0,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    alpha: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update with bias correction."""
    state.t += 1
    t = state.t
    for k, g in grads.items():
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        m_hat = state.m[k] / (1.0 - beta1**t)
        v_hat = state.v[k] / (1.0 - beta2**t)
        params[k] = params[k] - alpha * m_hat / (np.sqrt(v_hat) + eps)
