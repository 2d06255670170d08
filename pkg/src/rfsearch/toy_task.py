"""Toy reach task and its derivative-free trainer.

A point mass on a line must climb a constant leftward slope and touch a
small window around the target; touching ends the episode as a success.
The policy is a table over discretized position-error bins, trained with a
cross-entropy method (mirrored noise, signal-gated exploration floor) that
uses the candidate program as the shaping reward. The reported task score
is the success rate of the policy mean on a fixed evaluation set, measured
by the success predicate alone; the candidate reward only influences which
policies the trainer keeps.

The full procedure (dynamics, bins, RNG streams, update rules) is written
out in docs/toy_task.md so external trainers can reproduce it without
importing this code.
"""

from __future__ import annotations

import numpy as np

from . import dsl
from ._kernels import (
    POLICY_DIM,
    STREAM_EVAL_START,
    STREAM_TRAIN_START,
    TARGET_X,
    rollout_batch,
    sample_noise,
    uniform_array,
)
from .evaluation import SNAPSHOT_COUNT, Series, TrainingFeedback

TASK_VARIABLES = ("dist", "vel_x", "prev_dist", "target_x", "action_mag")

POPULATION = 20
ELITE_COUNT = 5
SIGMA_INIT = 0.5
SIGMA_FLOOR = 0.15
# The exploration floor only applies when selection can actually rank the
# population; inflating noise under an uninformative reward would turn the
# search into a random walk.
SPREAD_EPS = 1e-9
EVAL_EPISODES = 25
START_LOW = -2.1
START_SPAN = 0.2


def _episode_starts(seed: int, stream: int, first: int, count: int) -> np.ndarray:
    return START_LOW + START_SPAN * uniform_array(seed, stream, first, count)


def success_rate(policy: np.ndarray, seed: int) -> float:
    """Success rate of a deterministic policy on the fixed evaluation set.

    Depends only on the task's success predicate, never on a reward program.
    """
    thetas = np.repeat(policy[None, :], EVAL_EPISODES, axis=0)
    x0 = _episode_starts(seed, STREAM_EVAL_START, 0, EVAL_EPISODES)
    _, _, _, _, _, success = rollout_batch(thetas, x0)
    return float(np.count_nonzero(success)) / EVAL_EPISODES


def _mirrored_population(seed: int, gen: int, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    pairs = POPULATION // 2
    eps = sample_noise(seed, gen, pairs, np.zeros(POLICY_DIM), np.ones(POLICY_DIM))
    thetas = np.empty((POPULATION, POLICY_DIM))
    thetas[0::2] = mu[None, :] + sigma[None, :] * eps
    thetas[1::2] = mu[None, :] - sigma[None, :] * eps
    return thetas


def _masked_traj(expr: dsl.RewardExpr, prev_dist, dist, vel, amag, lengths):
    """Per-episode returns and per-episode component means for one batch."""
    bindings = {
        "dist": dist,
        "vel_x": vel,
        "prev_dist": prev_dist,
        "target_x": np.float64(TARGET_X),
        "action_mag": amag,
    }
    total, components = dsl.evaluate(expr, bindings)
    mask = (np.arange(dist.shape[1])[None, :] < lengths[:, None]).astype(np.float64)
    total = np.broadcast_to(np.asarray(total, dtype=np.float64), mask.shape)
    returns = (total * mask).sum(axis=1)
    comp_means = {}
    for name, values in components.items():
        arr = np.broadcast_to(np.asarray(values, dtype=np.float64), mask.shape)
        comp_means[name] = (arr * mask).sum(axis=1) / lengths
    return returns, comp_means


def _train(expr: dsl.RewardExpr, seed: int, train_steps: int):
    generations = max(1, train_steps // POPULATION)
    comp_names = [name for name, _ in expr.components]

    mu = np.zeros(POLICY_DIM)
    sigma = np.full(POLICY_DIM, SIGMA_INIT)
    comp_history = {name: [] for name in comp_names}
    length_history: list[np.ndarray] = []
    checkpoint_gens = [min(generations - 1, (j * generations) // SNAPSHOT_COUNT) for j in range(SNAPSHOT_COUNT)]
    checkpoint_policies: dict[int, np.ndarray] = {}

    for gen in range(generations):
        thetas = _mirrored_population(seed, gen, mu, sigma)
        x0 = _episode_starts(seed, STREAM_TRAIN_START, gen * POPULATION, POPULATION)
        prev_dist, dist, vel, amag, lengths, _ = rollout_batch(thetas, x0)
        returns, comp_means = _masked_traj(expr, prev_dist, dist, vel, amag, lengths)

        # Elites: highest return first, ties broken by population index.
        order = sorted(range(POPULATION), key=lambda m: (-returns[m], m))
        elite = thetas[order[:ELITE_COUNT]]
        mu = elite.mean(axis=0)
        sigma = np.sqrt(((elite - mu[None, :]) ** 2).mean(axis=0))
        spread = float(returns.max() - returns.min())
        if spread > SPREAD_EPS * (1.0 + abs(float(returns.max()))):
            sigma = sigma + SIGMA_FLOOR

        for name in comp_names:
            comp_history[name].append(comp_means[name])
        length_history.append(lengths.astype(np.float64))
        if gen in checkpoint_gens:
            checkpoint_policies[gen] = mu.copy()

    scores_by_gen = {g: success_rate(policy, seed) for g, policy in checkpoint_policies.items()}
    task_values = [scores_by_gen[g] for g in checkpoint_gens]
    return comp_history, length_history, checkpoint_gens, task_values, checkpoint_policies


def toy_rl_train(expr: dsl.RewardExpr, seed: int, train_steps: int = 200) -> TrainingFeedback:
    """Train on the reach task with ``expr`` as the shaping reward."""
    comp_history, length_history, checkpoint_gens, task_values, _ = _train(expr, seed, train_steps)

    components = {}
    for name, per_gen in comp_history.items():
        snapshots = [float(per_gen[g].mean()) for g in checkpoint_gens]
        history = np.concatenate(per_gen)
        components[name] = Series.from_history(snapshots, history)

    length_snapshots = [float(length_history[g].mean()) for g in checkpoint_gens]
    lengths_all = np.concatenate(length_history)
    return TrainingFeedback(
        components=components,
        task_score=Series.from_values(task_values),
        episode_lengths=Series.from_history(length_snapshots, lengths_all),
        epoch_freq=train_steps // SNAPSHOT_COUNT,
        final_score=max(task_values),
    )
