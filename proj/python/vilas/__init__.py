"""Python access to the vilas core: metrics, episodes, framing and local stacks."""

import json

from . import _core
from ._core import (
    FrameDecoder,
    Stack,
    VilasError,
    display_round,
    encode_frame,
    export_dataset,
    format_ms,
    forward_kinematics,
    multi_success,
)

__all__ = [
    "FrameDecoder",
    "Stack",
    "VilasError",
    "canonical_envelope",
    "display_round",
    "encode_frame",
    "export_dataset",
    "format_ms",
    "forward_kinematics",
    "latency_stats",
    "load_episode",
    "multi_success",
    "run_trial",
    "success_rates",
    "verify_corpus",
]


def canonical_envelope(env):
    """Compact sorted-key wire text of an envelope dict."""
    return _core.canonical_envelope(json.dumps(env))


def latency_stats(samples_ms, horizon):
    return json.loads(_core.latency_stats_json(list(samples_ms), horizon))


def success_rates(outcomes, aborted=(), any2=False):
    return json.loads(_core.success_rates_json([list(o) for o in outcomes], list(aborted), any2))


def load_episode(path, check_images=True):
    return json.loads(_core.load_episode_json(str(path), check_images))


def verify_corpus(root):
    return json.loads(_core.verify_corpus_json(str(root)))


def run_trial(policy="oracle", seed=7, protocol="ws", horizon=50, n_objects=10, attempts=3,
              latency_mean=0.0, latency_std=0.0):
    """One isolated trial on simulated time; returns the trial record."""
    return json.loads(_core.run_trial_json(policy, seed, protocol, horizon, n_objects, attempts,
                                           latency_mean, latency_std))
