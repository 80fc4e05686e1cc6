"""Common-pool fishery simulator with signal-conditioned independent learners."""

from . import analytics, control, env, harness, learner, metrics, signals

__all__ = ["analytics", "control", "env", "harness", "learner", "metrics", "signals"]
