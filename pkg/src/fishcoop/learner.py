"""Independent PPO learners over (previous effort, previous reward, signal).

Each agent owns a two-hidden-layer tanh MLP (64 units each) with a
sigmoid-squashed action-mean head, a state-independent log-std, and a value
head sharing the trunk. Actions are Gaussian samples clipped to the effort
range; log-probabilities are taken on the unclipped sample. Training is the
clipped-surrogate PPO objective with a capped squared value loss, batch
advantage normalization, Adam, and a KL-based early stop of the epoch loop.

Everything is plain float64 NumPy with hand-written backpropagation, so
gradients can be validated against central finite differences and runs are
bit-reproducible from the seeds alone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

CHECKPOINT_MAGIC = b"FCKP"
CHECKPOINT_VERSION = 1


class UpdateDivergedError(RuntimeError):
    """Raised when a PPO update produces non-finite gradients."""


@dataclass
class PpoHyper:
    """PPO hyperparameters. The first seven match the training defaults the
    experiments inherit; the last three are the update cadence knobs."""

    learning_rate: float = 1e-4
    clip: float = 0.3
    vf_clip: float = 10.0
    kl_target: float = 0.01
    gamma: float = 0.99
    gae_lambda: float = 1.0
    vf_coeff: float = 1.0
    entropy_coeff: float = 0.0
    epochs_per_update: int = 30
    minibatch_size: int = 128
    steps_per_update: int = 4000


@dataclass
class PolicyParams:
    """Flat-serializable MLP weights. Layer sizes are (obs_dim, h1, h2)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_mean: np.ndarray
    b_mean: float
    w_value: np.ndarray
    b_value: float
    log_std: float

    @property
    def obs_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return (self.w1.shape[1], self.w1.shape[0], self.w2.shape[0])

    def to_flat(self) -> np.ndarray:
        return np.concatenate(
            [
                self.w1.ravel(),
                self.b1,
                self.w2.ravel(),
                self.b2,
                self.w_mean,
                [self.b_mean],
                self.w_value,
                [self.b_value],
                [self.log_std],
            ]
        )

    @classmethod
    def from_flat(cls, flat: np.ndarray, layer_sizes: tuple[int, int, int]) -> "PolicyParams":
        d, h1, h2 = layer_sizes
        sizes = [h1 * d, h1, h2 * h1, h2, h2, 1, h2, 1, 1]
        if flat.size != sum(sizes):
            raise ValueError(
                f"flat vector of size {flat.size} does not match layers {layer_sizes}"
            )
        chunks = np.split(np.asarray(flat, dtype=float), np.cumsum(sizes)[:-1])
        return cls(
            w1=chunks[0].reshape(h1, d),
            b1=chunks[1],
            w2=chunks[2].reshape(h2, h1),
            b2=chunks[3],
            w_mean=chunks[4],
            b_mean=float(chunks[5][0]),
            w_value=chunks[6],
            b_value=float(chunks[7][0]),
            log_std=float(chunks[8][0]),
        )

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_flat())))


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_policy_params(
    obs_dim: int, rng: np.random.Generator, hidden: tuple[int, int] = (64, 64)
) -> PolicyParams:
    """Glorot-uniform trunk; the mean head is scaled down so the initial
    action mean sits near the middle of the effort range for any input."""
    h1, h2 = hidden
    return PolicyParams(
        w1=_glorot(rng, h1, obs_dim),
        b1=np.zeros(h1),
        w2=_glorot(rng, h2, h1),
        b2=np.zeros(h2),
        w_mean=0.01 * _glorot(rng, 1, h2)[0],
        b_mean=0.0,
        w_value=_glorot(rng, 1, h2)[0],
        b_value=0.0,
        log_std=0.0,
    )


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward_batch(params: PolicyParams, obs: np.ndarray, e_max: float):
    """Vectorized forward pass with the activations needed for backprop."""
    h1 = np.tanh(obs @ params.w1.T + params.b1)
    h2 = np.tanh(h1 @ params.w2.T + params.b2)
    mean = e_max * _sigmoid(h2 @ params.w_mean + params.b_mean)
    value = h2 @ params.w_value + params.b_value
    return mean, value, h1, h2


def policy_forward(
    params: PolicyParams, obs: np.ndarray, e_max: float
) -> tuple[float, float, float]:
    """Single-observation forward pass -> (action mean, std, value estimate)."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (params.obs_dim,):
        raise ValueError(
            f"observation shape {obs.shape} does not match input width {params.obs_dim}"
        )
    mean, value, _, _ = _forward_batch(params, obs[None, :], e_max)
    return float(mean[0]), float(np.exp(params.log_std)), float(value[0])


def gaussian_log_prob(x, mean, std):
    return -0.5 * ((x - mean) / std) ** 2 - np.log(std) - 0.5 * LOG_2PI


def sample_action(
    mean: float, std: float, e_max: float, rng: np.random.Generator
) -> tuple[float, float, float]:
    """Draw a raw Gaussian action, clip it into the effort range, and return
    (raw, clipped, log-probability of the raw sample)."""
    if std <= 0:
        raise ValueError(f"std must be positive, got {std}")
    raw = float(rng.normal(mean, std))
    clipped = min(max(raw, 0.0), e_max)
    return raw, clipped, float(gaussian_log_prob(raw, mean, std))


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
    last_value: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets.

    Episode ends inside the batch reset the bootstrap to zero; a batch cut
    mid-episode bootstraps its tail from ``last_value``. With lam = 1 this
    reduces to the discounted Monte-Carlo return minus the value baseline.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    n = len(rewards)
    advantages = np.zeros(n)
    running = 0.0
    next_value = last_value
    for t in range(n - 1, -1, -1):
        alive = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * alive - values[t]
        running = delta + gamma * lam * alive * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


@dataclass
class Trajectory:
    """Per-step rollout storage for one agent."""

    obs: list = field(default_factory=list)
    raw_actions: list = field(default_factory=list)
    efforts: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    means: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)

    def append(self, obs, raw, effort, log_prob, value, mean, reward, done):
        self.obs.append(obs)
        self.raw_actions.append(raw)
        self.efforts.append(effort)
        self.log_probs.append(log_prob)
        self.values.append(value)
        self.means.append(mean)
        self.rewards.append(reward)
        self.dones.append(done)

    def __len__(self):
        return len(self.rewards)

    def to_batch(self, gamma: float, lam: float, std: float, last_value: float = 0.0) -> dict:
        advantages, returns = gae_advantages(
            self.rewards, self.values, self.dones, gamma, lam, last_value
        )
        return {
            "obs": np.asarray(self.obs, dtype=float),
            "raw_actions": np.asarray(self.raw_actions, dtype=float),
            "old_log_probs": np.asarray(self.log_probs, dtype=float),
            "old_means": np.asarray(self.means, dtype=float),
            "old_std": float(std),
            "advantages": advantages,
            "returns": returns,
        }


def ppo_loss_and_grads(
    params: PolicyParams,
    obs: np.ndarray,
    raw_actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    hyper: PpoHyper,
    e_max: float,
) -> tuple[float, PolicyParams, dict]:
    """Total PPO loss and its analytic gradient (as a PolicyParams of grads).

    Loss = -mean(min(ratio*A, clip(ratio)*A))
           + vf_coeff * mean(min((V - R)^2, vf_clip))
           - entropy_coeff * gaussian entropy.
    """
    n = len(obs)
    mean, value, h1, h2 = _forward_batch(params, obs, e_max)
    std = np.exp(params.log_std)

    log_probs = gaussian_log_prob(raw_actions, mean, std)
    ratio = np.exp(log_probs - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - hyper.clip, 1.0 + hyper.clip) * advantages
    surrogate = np.minimum(unclipped, clipped)
    policy_loss = -float(np.mean(surrogate))

    vf_err = value - returns
    vf_sq = vf_err**2
    vf_loss = float(np.mean(np.minimum(vf_sq, hyper.vf_clip)))

    entropy = params.log_std + 0.5 * (LOG_2PI + 1.0)
    loss = policy_loss + hyper.vf_coeff * vf_loss - hyper.entropy_coeff * entropy

    # --- backward ---
    take_unclipped = unclipped <= clipped
    d_log_probs = -(1.0 / n) * advantages * ratio * take_unclipped
    d_mean = d_log_probs * (raw_actions - mean) / std**2
    d_log_std = float(np.sum(d_log_probs * (((raw_actions - mean) / std) ** 2 - 1.0)))
    d_log_std -= hyper.entropy_coeff

    d_value = hyper.vf_coeff * (2.0 / n) * vf_err * (vf_sq < hyper.vf_clip)

    d_mean_raw = d_mean * mean * (1.0 - mean / e_max)  # sigmoid head chain rule
    g_w_mean = h2.T @ d_mean_raw
    g_b_mean = float(np.sum(d_mean_raw))
    g_w_value = h2.T @ d_value
    g_b_value = float(np.sum(d_value))

    d_h2 = np.outer(d_mean_raw, params.w_mean) + np.outer(d_value, params.w_value)
    d_z2 = d_h2 * (1.0 - h2**2)
    g_w2 = d_z2.T @ h1
    g_b2 = d_z2.sum(axis=0)
    d_h1 = d_z2 @ params.w2
    d_z1 = d_h1 * (1.0 - h1**2)
    g_w1 = d_z1.T @ obs
    g_b1 = d_z1.sum(axis=0)

    grads = PolicyParams(
        w1=g_w1,
        b1=g_b1,
        w2=g_w2,
        b2=g_b2,
        w_mean=g_w_mean,
        b_mean=g_b_mean,
        w_value=g_w_value,
        b_value=g_b_value,
        log_std=d_log_std,
    )
    clip_fraction = float(np.mean(~take_unclipped))
    stats = {
        "policy_loss": policy_loss,
        "vf_loss": vf_loss,
        "entropy": float(entropy),
        "clip_fraction": clip_fraction,
    }
    return float(loss), grads, stats


def _gaussian_kl(mean_old, std_old, mean_new, std_new) -> float:
    """Mean KL(old || new) of diagonal Gaussians over a batch."""
    var_ratio = (std_old / std_new) ** 2
    kl = (
        np.log(std_new / std_old)
        + (std_old**2 + (mean_old - mean_new) ** 2) / (2.0 * std_new**2)
        - 0.5
    )
    return float(np.mean(kl))


class AdamState:
    def __init__(self, template: np.ndarray):
        self.m = np.zeros_like(template)
        self.v = np.zeros_like(template)
        self.t = 0

    def step(self, flat: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        self.t += 1
        self.m = beta1 * self.m + (1.0 - beta1) * grad
        self.v = beta2 * self.v + (1.0 - beta2) * grad**2
        m_hat = self.m / (1.0 - beta1**self.t)
        v_hat = self.v / (1.0 - beta2**self.t)
        return flat - lr * m_hat / (np.sqrt(v_hat) + eps)


def ppo_update(
    params: PolicyParams,
    batch: dict,
    hyper: PpoHyper,
    e_max: float,
    rng: np.random.Generator,
    adam: AdamState | None = None,
) -> tuple[PolicyParams, AdamState, dict]:
    """One PPO update: Adam over shuffled minibatches for several epochs,
    early-stopping the epoch loop once the mean KL overshoots 1.5x the target.
    Advantages are normalized to zero mean / unit variance over the batch.
    """
    n = len(batch["obs"])
    if n == 0:
        raise ValueError("empty batch")
    adv = batch["advantages"]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    layer_sizes = params.layer_sizes
    flat = params.to_flat()
    if adam is None:
        adam = AdamState(flat)

    epochs_run = 0
    mean_kl = 0.0
    last_stats: dict = {}
    for _ in range(hyper.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, hyper.minibatch_size):
            idx = order[start : start + hyper.minibatch_size]
            loss, grads, last_stats = ppo_loss_and_grads(
                params,
                batch["obs"][idx],
                batch["raw_actions"][idx],
                batch["old_log_probs"][idx],
                adv[idx],
                batch["returns"][idx],
                hyper,
                e_max,
            )
            grad_flat = grads.to_flat()
            if not np.all(np.isfinite(grad_flat)):
                bad = int(np.sum(~np.isfinite(grad_flat)))
                raise UpdateDivergedError(
                    f"non-finite gradients in PPO update: {bad} entries, loss={loss}"
                )
            flat = adam.step(flat, grad_flat, hyper.learning_rate)
            params = PolicyParams.from_flat(flat, layer_sizes)
        epochs_run += 1
        new_mean, _, _, _ = _forward_batch(params, batch["obs"], e_max)
        mean_kl = _gaussian_kl(
            batch["old_means"], batch["old_std"], new_mean, np.exp(params.log_std)
        )
        if mean_kl > 1.5 * hyper.kl_target:
            break

    stats = dict(last_stats)
    stats.update({"mean_kl": mean_kl, "epochs_run": epochs_run})
    return params, adam, stats


class PpoAgent:
    """One independent learner. Holds its own parameters, optimizer state and
    random stream; never reads another agent's data."""

    def __init__(
        self,
        signal_cardinality: int,
        e_max: float,
        hyper: PpoHyper,
        rng: np.random.Generator,
        hidden: tuple[int, int] = (64, 64),
    ):
        self.g = signal_cardinality
        self.e_max = e_max
        self.hyper = hyper
        self.rng = rng
        self.params = init_policy_params(signal_cardinality + 2, rng, hidden)
        self.adam: AdamState | None = None

    @property
    def std(self) -> float:
        return float(np.exp(self.params.log_std))

    def observe(self, prev_effort: float, prev_reward: float, signal_vec: np.ndarray) -> np.ndarray:
        return np.concatenate(([prev_effort, prev_reward], signal_vec))

    def act(
        self,
        prev_effort: float,
        prev_reward: float,
        signal_vec: np.ndarray,
        deterministic: bool = False,
    ) -> tuple[float, dict]:
        obs = self.observe(prev_effort, prev_reward, signal_vec)
        mean, std, value = policy_forward(self.params, obs, self.e_max)
        if deterministic:
            effort = min(max(mean, 0.0), self.e_max)
            return effort, {
                "obs": obs,
                "raw": effort,
                "log_prob": float(gaussian_log_prob(effort, mean, std)),
                "value": value,
                "mean": mean,
            }
        raw, effort, log_prob = sample_action(mean, std, self.e_max, self.rng)
        return effort, {
            "obs": obs,
            "raw": raw,
            "log_prob": log_prob,
            "value": value,
            "mean": mean,
        }

    def sample_effort(self, obs: np.ndarray, rng: np.random.Generator | None = None) -> float:
        """Sample a clipped effort for an externally assembled observation."""
        mean, std, _ = policy_forward(self.params, np.asarray(obs, dtype=float), self.e_max)
        _, effort, _ = sample_action(mean, std, self.e_max, rng if rng is not None else self.rng)
        return effort

    def sample_efforts(
        self, obs: np.ndarray, n: int, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """Vectorized batch of clipped effort samples for one observation."""
        mean, std, _ = policy_forward(self.params, np.asarray(obs, dtype=float), self.e_max)
        draws = (rng if rng is not None else self.rng).normal(mean, std, size=n)
        return np.clip(draws, 0.0, self.e_max)

    def value_of(self, prev_effort: float, prev_reward: float, signal_vec: np.ndarray) -> float:
        obs = self.observe(prev_effort, prev_reward, signal_vec)
        _, _, value = policy_forward(self.params, obs, self.e_max)
        return value

    def update(self, traj: Trajectory, last_value: float = 0.0) -> dict:
        batch = traj.to_batch(self.hyper.gamma, self.hyper.gae_lambda, self.std, last_value)
        self.params, self.adam, stats = ppo_update(
            self.params, batch, self.hyper, self.e_max, self.rng, self.adam
        )
        return stats


def save_checkpoint(path, agents: list[PpoAgent]) -> None:
    """Write all agents' parameters as a versioned flat little-endian record."""
    if not agents:
        raise ValueError("no agents to save")
    g = agents[0].g
    layer_sizes = agents[0].params.layer_sizes
    for agent in agents:
        if agent.g != g or agent.params.layer_sizes != layer_sizes:
            raise ValueError("agents disagree on architecture")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IIII", CHECKPOINT_VERSION, g, len(agents), len(layer_sizes)))
        fh.write(struct.pack(f"<{len(layer_sizes)}I", *layer_sizes))
        for agent in agents:
            fh.write(agent.params.to_flat().astype("<f8").tobytes())


def load_checkpoint(
    path, e_max: float = 1.0, hyper: PpoHyper | None = None
) -> list[PpoAgent]:
    """Rebuild agents from a checkpoint (fresh optimizer state and RNGs)."""
    hyper = hyper if hyper is not None else PpoHyper()
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a policy checkpoint")
        version, g, n_agents, n_sizes = struct.unpack("<IIII", fh.read(16))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        layer_sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        d, h1, h2 = layer_sizes
        flat_len = h1 * d + h1 + h2 * h1 + h2 + h2 + 1 + h2 + 1 + 1
        agents = []
        for i in range(n_agents):
            raw = fh.read(8 * flat_len)
            if len(raw) != 8 * flat_len:
                raise ValueError(f"truncated checkpoint: agent {i}")
            flat = np.frombuffer(raw, dtype="<f8").astype(float)
            agent = PpoAgent(g, e_max, hyper, np.random.default_rng(0), hidden=(h1, h2))
            agent.params = PolicyParams.from_flat(flat, (d, h1, h2))
            agents.append(agent)
    return agents
