"""Evaluation metrics: welfare, fairness, signal influence, convergence.

The signal-influence score is the mutual information between the signal
value and a discretized action sampled from the policy, estimated over
random signal-free partial states (uniform signal prior, per-signal action
sampling, natural logarithm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from . import signals
from .env import DoneReason


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    length: int
    social_welfare: float
    per_agent_returns: np.ndarray
    done_reason: DoneReason


@dataclass(frozen=True)
class CicConfig:
    n_states: int = 100
    n_samples: int = 100
    n_bins: int = 10

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError(f"n_bins must be >= 2, got {self.n_bins}")
        if self.n_states < 1 or self.n_samples < 1:
            raise ValueError("n_states and n_samples must be positive")


def jain_index(x: np.ndarray) -> float:
    """Jain fairness (sum x)^2 / (N sum x^2); 1 iff the allocation is equal."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("allocations must be nonnegative")
    sq_sum = float(np.sum(x**2))
    if sq_sum == 0:
        raise ValueError("Jain index undefined for the all-zero allocation")
    return float(np.sum(x)) ** 2 / (len(x) * sq_sum)


def gini_coefficient(x: np.ndarray) -> float:
    """Gini inequality: mean absolute pairwise gap over twice the mean."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("allocations must be nonnegative")
    total = float(np.sum(x))
    if total == 0:
        raise ValueError("Gini coefficient undefined for zero total allocation")
    pairwise = np.abs(x[:, None] - x[None, :]).sum()
    return float(pairwise) / (2.0 * len(x) * total)


def uniform_partial_state(e_max: float, price: float = 1.0):
    """Default sampler of signal-free observation pieces: previous effort
    uniform on [0, e_max], previous reward uniform on [0, price * e_max]."""

    def sample(rng: np.random.Generator) -> tuple[float, float]:
        return float(rng.uniform(0.0, e_max)), float(rng.uniform(0.0, price * e_max))

    return sample


def cic(
    sample_efforts,
    sample_partial_state,
    config: CicConfig,
    g: int,
    e_max: float,
    rng: np.random.Generator,
) -> float:
    """Signal-action mutual information, in nats, averaged over random states.

    ``sample_efforts(obs, n, rng)`` must return n sampled actions for the
    observation ``[prev_effort, prev_reward, one_hot(signal)]``; actions are
    discretized into ``n_bins`` equal intervals over [0, e_max].
    """
    if g < 1:
        raise ValueError(f"signal cardinality must be >= 1, got {g}")
    p_signal = 1.0 / g
    source = signals.SignalSource(cardinality=g, episode_offset=0)
    total = 0.0
    for _ in range(config.n_states):
        prev_effort, prev_reward = sample_partial_state(rng)
        # rows: signal values, cols: action bins; joint p(a, g)
        joint = np.zeros((g, config.n_bins))
        for j in range(g):
            obs = np.concatenate(([prev_effort, prev_reward], signals.one_hot(j, source)))
            actions = np.asarray(sample_efforts(obs, config.n_samples, rng))
            bins = np.minimum(
                (actions / e_max * config.n_bins).astype(int), config.n_bins - 1
            )
            joint[j] = np.bincount(bins, minlength=config.n_bins)
        joint = joint / config.n_samples * p_signal
        p_action = joint.sum(axis=0)
        mi = 0.0
        for j in range(g):
            for i in range(config.n_bins):
                if joint[j, i] > 0 and p_action[i] > 0:
                    mi += joint[j, i] * math.log(joint[j, i] / (p_action[i] * p_signal))
        total += mi / config.n_states
    return total


def access_bins(mean_efforts: np.ndarray, e_max: float) -> tuple[int, int, int]:
    """Counts of (idle, moderate, active) agents at thresholds 0.33 and 0.66
    of the maximum effort; intervals [0, .33), [.33, .66), [.66, 1]."""
    fractions = np.asarray(mean_efforts, dtype=float) / e_max
    idle = int(np.sum(fractions < 0.33))
    moderate = int(np.sum((fractions >= 0.33) & (fractions < 0.66)))
    active = int(np.sum(fractions >= 0.66))
    return idle, moderate, active


def convergence_check(
    history: list[EpisodeRecord],
    t_max: int,
    window: int = 200,
    smooth: int | None = None,
    sw_tol: float = 0.05,
    min_length_frac: float = 0.95,
) -> bool:
    """Early-stopping test over the last ``window`` episodes: every episode
    ran at least 95% of the horizon, and the rolling-mean social welfare
    drifts by at most ``sw_tol`` of the window mean (max-min spread)."""
    if len(history) < window:
        return False
    recent = history[-window:]
    if any(rec.length < min_length_frac * t_max for rec in recent):
        return False
    sw = np.array([rec.social_welfare for rec in recent])
    if smooth is None:
        smooth = max(1, window // 10)
    kernel = np.ones(smooth) / smooth
    rolling = np.convolve(sw, kernel, mode="valid")
    window_mean = float(np.mean(sw))
    if window_mean == 0.0:
        return bool(np.max(rolling) == np.min(rolling))
    spread = float(np.max(rolling) - np.min(rolling))
    return spread / abs(window_mean) <= sw_tol


def student_t_test(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Equal-variance two-sample t statistic and two-sided p-value.

    The p-value comes from the Student-t CDF via the regularized incomplete
    beta identity p = I_{df/(df+t^2)}(df/2, 1/2).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("both samples need at least two observations")
    mean_gap = float(np.mean(a) - np.mean(b))
    df = na + nb - 2
    pooled_var = ((na - 1) * np.var(a, ddof=1) + (nb - 1) * np.var(b, ddof=1)) / df
    if pooled_var == 0.0:
        if mean_gap == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean_gap), 0.0
    t = mean_gap / math.sqrt(pooled_var * (1.0 / na + 1.0 / nb))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, p


def relative_difference(with_signal: float, without: float) -> float:
    """(a - b) / b, the signed change relative to the no-signal baseline."""
    if without == 0:
        raise ValueError("relative difference undefined for zero baseline")
    return (with_signal - without) / without


def per_signal_effort_profile(
    actions: np.ndarray, signal_indices: np.ndarray, g: int
) -> np.ndarray:
    """G x N matrix of each agent's mean effort at each signal value.

    ``actions`` is (steps, agents); rows for signal values never seen in the
    episode are NaN.
    """
    actions = np.asarray(actions, dtype=float)
    signal_indices = np.asarray(signal_indices, dtype=int)
    if len(actions) != len(signal_indices):
        raise ValueError("actions and signal indices must align")
    n_agents = actions.shape[1] if actions.ndim == 2 else 0
    profile = np.full((g, n_agents), np.nan)
    for j in range(g):
        mask = signal_indices == j
        if np.any(mask):
            profile[j] = actions[mask].mean(axis=0)
    return profile
