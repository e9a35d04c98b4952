"""From-scratch PPO: Gaussian policy over the 1-D action, clipped surrogate,
GAE, scheduled exploration sigma, SGD/Adam steps on hand-derived gradients."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import net
from .errors import ContractViolation, TrainingDiverged
from .net import PolicyParams

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PpoHyperParams:
    gamma: float = 0.999
    clip_eps: float = 0.2
    learning_rate: float = 1e-5
    value_loss_scale: float = 0.5
    entropy_scale: float = 0.01
    sigma_init: float = 0.1
    sigma_decrement: float = 0.025
    sigma_interval_steps: int = 500_000
    sigma_floor: float = 0.0
    rollout_length: int = 2048
    minibatch_size: int = 256
    epochs_per_update: int = 4
    gae_lambda: float = 0.95
    hidden_dim: int = 256
    optimizer: str = "sgd"  # "sgd" or "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.clip_eps < 1.0):
            raise ContractViolation("clip_eps must lie in (0, 1)")
        if not (0.0 < self.gamma <= 1.0):
            raise ContractViolation("gamma must lie in (0, 1]")
        if self.sigma_floor < 0.0:
            raise ContractViolation("sigma_floor must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ContractViolation(f"unknown optimizer {self.optimizer!r}")


def policy_forward(obs_vector: np.ndarray, params: PolicyParams):
    """Single-observation forward pass -> (mu in [-1, 1], state value)."""
    mu, value, _ = net.forward(params, obs_vector)
    return float(mu[0]), float(value[0])


def gaussian_logp(a: np.ndarray, mu: np.ndarray, sigma: float) -> np.ndarray:
    return -0.5 * ((a - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * LOG_2PI


def sample_action(mu: float, sigma: float, rng: np.random.Generator):
    """Draw from N(mu, sigma^2) and clamp to [-1, 1].  The log-probability is
    the unclamped Gaussian density at the returned action; clamping is treated
    as part of the environment."""
    if sigma < 0:
        raise ContractViolation("sigma must be non-negative")
    if sigma == 0.0:
        return float(mu), 0.0
    a = float(np.clip(rng.normal(mu, sigma), -1.0, 1.0))
    return a, float(gaussian_logp(a, mu, sigma))


def deterministic_action(mu: float) -> float:
    return float(mu)


def sigma_schedule(global_step: int, h: PpoHyperParams) -> float:
    """Linear staircase: one decrement per completed interval, floored."""
    if global_step < 0:
        raise ContractViolation("global_step must be non-negative")
    steps_down = global_step // h.sigma_interval_steps
    return max(h.sigma_floor, h.sigma_init - h.sigma_decrement * steps_down)


def gaussian_entropy(sigma: float) -> float:
    return 0.5 * (1.0 + LOG_2PI) + np.log(sigma)


@dataclass
class Rollout:
    """Fixed-size transition buffer filled during collection."""

    obs: np.ndarray
    actions: np.ndarray
    logps: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray  # 1.0 where the transition ended an episode
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @classmethod
    def allocate(cls, length: int, obs_dim: int) -> "Rollout":
        return cls(
            obs=np.zeros((length, obs_dim)),
            actions=np.zeros(length),
            logps=np.zeros(length),
            rewards=np.zeros(length),
            values=np.zeros(length),
            dones=np.zeros(length),
        )

    def __len__(self):
        return len(self.actions)


def compute_advantages(
    rollout: Rollout, h: PpoHyperParams, bootstrap_value: float, lam: float | None = None
) -> Rollout:
    """GAE over the rollout.  Episodes terminated inside the rollout bootstrap
    with zero; the (possibly truncated) tail bootstraps with `bootstrap_value`.
    Advantages are returned raw; normalization happens inside the update."""
    n = len(rollout)
    if n == 0:
        raise ContractViolation("empty rollout")
    lam = h.gae_lambda if lam is None else lam
    advantages = np.zeros(n)
    last_gae = 0.0
    next_value = bootstrap_value
    for i in range(n - 1, -1, -1):
        not_done = 1.0 - rollout.dones[i]
        delta = rollout.rewards[i] + h.gamma * next_value * not_done - rollout.values[i]
        last_gae = delta + h.gamma * lam * not_done * last_gae
        advantages[i] = last_gae
        next_value = rollout.values[i]
    rollout.advantages = advantages
    rollout.returns = advantages + rollout.values
    return rollout


def ppo_loss_and_grads(
    params: PolicyParams,
    obs: np.ndarray,
    actions: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    sigma: float,
    h: PpoHyperParams,
):
    """Clipped-surrogate loss and its analytic parameter gradients.

    loss = -surrogate + value_loss_scale * MSE(V, returns)
           - entropy_scale * H(sigma)
    The entropy term is constant in the parameters because sigma is driven by
    the external schedule.
    """
    if sigma <= 0.0:
        raise ContractViolation("ppo update requires sigma > 0")
    n = len(actions)
    mu, value, cache = net.forward(params, obs)
    logp_new = gaussian_logp(actions, mu, sigma)
    ratio = np.exp(logp_new - logp_old)
    clipped = np.clip(ratio, 1.0 - h.clip_eps, 1.0 + h.clip_eps)
    surr_unclipped = ratio * advantages
    surr_clipped = clipped * advantages
    surrogate = np.minimum(surr_unclipped, surr_clipped)
    policy_loss = -float(surrogate.mean())
    value_err = value - returns
    value_loss = float((value_err**2).mean())
    entropy = gaussian_entropy(sigma)
    loss = policy_loss + h.value_loss_scale * value_loss - h.entropy_scale * entropy

    # dL/dmu: only samples on the unclipped branch carry a policy gradient.
    active = surr_unclipped <= surr_clipped
    d_mu = np.where(
        active, -advantages * ratio * (actions - mu) / sigma**2, 0.0
    ) / n
    d_value = h.value_loss_scale * 2.0 * value_err / n
    grads = net.backward(params, cache, d_mu, d_value)
    stats = {
        "loss": loss,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float((~active).mean()),
    }
    return loss, grads, stats


class Optimizer:
    """SGD by default; Adam as an explicitly configured variant."""

    def __init__(self, h: PpoHyperParams):
        self.h = h
        self._m: dict | None = None
        self._v: dict | None = None
        self._t = 0

    def step(self, params: PolicyParams, grads: dict) -> None:
        lr = self.h.learning_rate
        if self.h.optimizer == "sgd":
            for key, w in params.weights.items():
                w -= lr * grads[key]
            return
        if self._m is None:
            self._m = {k: np.zeros_like(w) for k, w in params.weights.items()}
            self._v = {k: np.zeros_like(w) for k, w in params.weights.items()}
        self._t += 1
        b1, b2, eps = self.h.adam_beta1, self.h.adam_beta2, self.h.adam_eps
        for key, w in params.weights.items():
            g = grads[key]
            self._m[key] = b1 * self._m[key] + (1 - b1) * g
            self._v[key] = b2 * self._v[key] + (1 - b2) * g**2
            m_hat = self._m[key] / (1 - b1**self._t)
            v_hat = self._v[key] / (1 - b2**self._t)
            w -= lr * m_hat / (np.sqrt(v_hat) + eps)


def ppo_update(
    rollout: Rollout,
    params: PolicyParams,
    h: PpoHyperParams,
    sigma: float,
    rng: np.random.Generator,
    optimizer: Optimizer,
    normalize_advantages: bool = True,
) -> dict:
    """Epochs of shuffled minibatch gradient steps on the clipped objective.
    Mutates `params` in place; raises TrainingDiverged on NaN/Inf."""
    if rollout.advantages is None or rollout.returns is None:
        raise ContractViolation("advantages must be computed before the update")
    advantages = rollout.advantages
    if normalize_advantages:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    n = len(rollout)
    stats = {}
    for _ in range(h.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, h.minibatch_size):
            idx = order[start : start + h.minibatch_size]
            loss, grads, stats = ppo_loss_and_grads(
                params,
                rollout.obs[idx],
                rollout.actions[idx],
                rollout.logps[idx],
                advantages[idx],
                rollout.returns[idx],
                sigma,
                h,
            )
            if not np.isfinite(loss) or any(
                not np.all(np.isfinite(g)) for g in grads.values()
            ):
                raise TrainingDiverged(f"non-finite loss/gradients (loss={loss})")
            optimizer.step(params, grads)
    params.check_finite()
    return stats


CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path, params: PolicyParams, h: PpoHyperParams, global_step: int, meta: dict
) -> None:
    """Versioned binary checkpoint: parameter arrays plus a JSON metadata blob."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "global_step": global_step,
        "hyperparams": asdict(h),
        **meta,
    }
    arrays = {f"param_{k}": v for k, v in params.weights.items()}
    np.savez(path, meta=np.frombuffer(json.dumps(payload).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path: str | Path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ContractViolation(f"unsupported checkpoint version {meta.get('version')}")
        weights = {
            k[len("param_") :]: data[k].astype(np.float64)
            for k in data.files
            if k.startswith("param_")
        }
    params = PolicyParams(meta["input_dim"], meta["hidden_dim"], weights)
    h = PpoHyperParams(**meta["hyperparams"])
    return params, h, meta
