"""Candidate evaluation: feedback model, landscape and trainer backends.

Every backend returns an :class:`EvalOutcome`; execution problems of any
kind (parse failures, bad genomes, subprocess crashes, timeouts) are
normalized into ``exec_error`` plus traceback text so the repair loop can
react uniformly.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsl
from .errors import DimensionMismatch

SNAPSHOT_COUNT = 10


# --- feedback model --------------------------------------------------------


@dataclass(frozen=True)
class Series:
    """Ten evenly spaced snapshots plus stats over the full underlying data.

    Stats can exceed the snapshot values: training tracks every epoch while
    the snapshots sample only ten of them.
    """

    values: tuple[float, ...]
    max: float
    mean: float
    min: float

    def __post_init__(self):
        if len(self.values) != SNAPSHOT_COUNT:
            raise ValueError(f"series must have {SNAPSHOT_COUNT} entries, got {len(self.values)}")

    @classmethod
    def from_values(cls, values) -> "Series":
        vals = tuple(float(v) for v in values)
        return cls(vals, max(vals), sum(vals) / len(vals), min(vals))

    @classmethod
    def from_history(cls, snapshots, history) -> "Series":
        hist = [float(v) for v in history]
        return cls(
            tuple(float(v) for v in snapshots),
            max(hist),
            sum(hist) / len(hist),
            min(hist),
        )

    def to_dict(self) -> dict:
        return {"values": list(self.values), "max": self.max, "mean": self.mean, "min": self.min}

    @classmethod
    def from_dict(cls, data: dict) -> "Series":
        return cls(tuple(data["values"]), data["max"], data["mean"], data["min"])


@dataclass(frozen=True)
class TrainingFeedback:
    components: dict[str, Series]
    task_score: Series
    episode_lengths: Series
    epoch_freq: int
    final_score: float

    def to_dict(self) -> dict:
        return {
            "components": {k: v.to_dict() for k, v in self.components.items()},
            "task_score": self.task_score.to_dict(),
            "episode_lengths": self.episode_lengths.to_dict(),
            "epoch_freq": self.epoch_freq,
            "final_score": self.final_score,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingFeedback":
        return cls(
            components={k: Series.from_dict(v) for k, v in data["components"].items()},
            task_score=Series.from_dict(data["task_score"]),
            episode_lengths=Series.from_dict(data["episode_lengths"]),
            epoch_freq=data["epoch_freq"],
            final_score=data["final_score"],
        )


@dataclass(frozen=True)
class EvalOutcome:
    status: str  # ok | exec_error
    feedback: TrainingFeedback | None = None
    traceback: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _fmt_series_line(name: str, series: Series) -> str:
    quoted = ", ".join(f"'{v:.2f}'" for v in series.values)
    return (
        f"{name}: [{quoted}], "
        f"Max: {series.max:.2f}, Mean: {series.mean:.2f}, Min: {series.min:.2f}"
    )


def format_feedback(fb: TrainingFeedback) -> str:
    """Render feedback in the tracked-variables layout prompts embed.

    One line per component in insertion order, then task_score, then
    episode_lengths; every number at exactly two decimals.
    """
    lines = [_fmt_series_line(name, s) for name, s in fb.components.items()]
    lines.append(_fmt_series_line("task_score", fb.task_score))
    lines.append(_fmt_series_line("episode_lengths", fb.episode_lengths))
    return "\n".join(lines)


# --- synthetic landscape -----------------------------------------------------


@dataclass(frozen=True)
class LandscapeConfig:
    """Deceptive bimodal landscape: per dimension, a wide mediocre basin
    competes with a narrow dominant peak."""

    dimension: int = 8
    basin_center: float = -1.0
    basin_height: float = 0.3
    basin_width: float = 0.6
    peak_center: float = 1.0
    peak_height: float = 1.0
    peak_width: float = 0.15


def bump_values(genome: np.ndarray, cfg: LandscapeConfig) -> np.ndarray:
    g = np.asarray(genome, dtype=np.float64)
    basin = cfg.basin_height * np.exp(-((g - cfg.basin_center) ** 2) / (2.0 * cfg.basin_width**2))
    peak = cfg.peak_height * np.exp(-((g - cfg.peak_center) ** 2) / (2.0 * cfg.peak_width**2))
    return basin + peak


def synthetic_score(genome, cfg: LandscapeConfig = LandscapeConfig()) -> TrainingFeedback:
    """Score a genome and dress it as feedback with synthetic learning curves.

    Each dimension contributes an independent bump value; its curve rises
    linearly from 10% to 100% of that value across the ten snapshots.
    """
    g = np.asarray(genome, dtype=np.float64)
    if g.shape != (cfg.dimension,):
        raise DimensionMismatch(
            f"genome has {g.size} entries, landscape dimension is {cfg.dimension}"
        )
    per_dim = bump_values(g, cfg)
    ramp = 0.1 + 0.1 * np.arange(SNAPSHOT_COUNT)
    components = {
        f"dim_{i}": Series.from_values(per_dim[i] * ramp) for i in range(cfg.dimension)
    }
    total = float(per_dim.sum())
    task = Series.from_values(total * ramp)
    lengths = Series.from_values([500.0] * SNAPSHOT_COUNT)
    return TrainingFeedback(
        components=components,
        task_score=task,
        episode_lengths=lengths,
        epoch_freq=10,
        final_score=total,
    )


def parse_genome(text: str, dimension: int) -> np.ndarray:
    """Parse raw genome text: comma/whitespace separated floats, with
    optional brackets or a 'genome:' prefix."""
    cleaned = text.strip()
    if cleaned.lower().startswith("genome"):
        cleaned = cleaned.split(":", 1)[-1] if ":" in cleaned else cleaned[len("genome"):]
    cleaned = cleaned.strip().strip("[]()")
    tokens = [t for t in cleaned.replace(",", " ").split() if t]
    if not tokens:
        raise ValueError("genome text contains no numbers")
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise ValueError(f"genome text contains a non-numeric token: {exc}") from None
    if len(values) != dimension:
        raise DimensionMismatch(f"genome has {len(values)} entries, landscape dimension is {dimension}")
    return np.asarray(values, dtype=np.float64)


# --- backends ----------------------------------------------------------------


class SyntheticEvaluator:
    """Deterministic landscape oracle over raw genome candidates."""

    kind = "synthetic"

    def __init__(self, cfg: LandscapeConfig = LandscapeConfig()):
        self.cfg = cfg
        self.epoch_freq = 10

    def evaluate(self, candidate, seed: int) -> EvalOutcome:
        try:
            genome = parse_genome(candidate.source_text, self.cfg.dimension)
        except (ValueError, DimensionMismatch) as exc:
            return EvalOutcome("exec_error", traceback=f"{type(exc).__name__}: {exc}")
        return EvalOutcome("ok", feedback=synthetic_score(genome, self.cfg))


class ToyTrainerEvaluator:
    """Built-in trainer: parses the reward DSL and trains on the reach task."""

    kind = "toy"

    def __init__(self, train_steps: int = 200):
        from .toy_task import TASK_VARIABLES

        self.train_steps = train_steps
        self.vocabulary = TASK_VARIABLES
        self.epoch_freq = train_steps // SNAPSHOT_COUNT

    def evaluate(self, candidate, seed: int) -> EvalOutcome:
        from .toy_task import toy_rl_train

        try:
            expr = dsl.parse(candidate.source_text, self.vocabulary)
        except Exception as exc:
            return EvalOutcome("exec_error", traceback=f"{type(exc).__name__}: {exc}")
        return EvalOutcome("ok", feedback=toy_rl_train(expr, seed, self.train_steps))


class SubprocessEvaluator:
    """Spawns an external trainer speaking the request/response file protocol."""

    kind = "subprocess"

    def __init__(
        self,
        trainer_cmd: list[str],
        run_root: str | Path,
        timeout_s: float = 120.0,
        train_steps: int = 200,
        extension: str = ".rfn",
    ):
        self.trainer_cmd = list(trainer_cmd)
        self.run_root = Path(run_root)
        self.timeout_s = timeout_s
        self.train_steps = train_steps
        self.extension = extension
        self.epoch_freq = train_steps // SNAPSHOT_COUNT

    def evaluate(self, candidate, seed: int) -> EvalOutcome:
        # Each evaluation gets its own directory; (seed, revision) is unique
        # per attempt, so concurrent evaluations never collide.
        run_dir = self.run_root / f"eval_{seed}_{candidate.revision}"
        run_dir.mkdir(parents=True, exist_ok=True)
        candidate_path = run_dir / f"candidate{self.extension}"
        candidate_path.write_text(candidate.source_text)
        request = {
            "candidate_path": str(candidate_path),
            "seed": int(seed),
            "train_steps": int(self.train_steps),
            "run_dir": str(run_dir),
        }
        request_path = run_dir / "request.json"
        request_path.write_text(json.dumps(request, indent=2))

        try:
            proc = subprocess.run(
                self.trainer_cmd + [str(request_path)],
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
        except subprocess.TimeoutExpired:
            return EvalOutcome("exec_error", traceback=f"timeout after {self.timeout_s:g} s")
        except OSError as exc:
            return EvalOutcome("exec_error", traceback=f"failed to spawn trainer: {exc}")
        if proc.returncode != 0:
            tb = proc.stderr.strip() or f"trainer exited with code {proc.returncode}"
            return EvalOutcome("exec_error", traceback=tb)

        response_path = run_dir / "response.json"
        try:
            response = json.loads(response_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            return EvalOutcome("exec_error", traceback=f"malformed trainer response: {exc}")
        return self._parse_response(response)

    def _parse_response(self, response: dict) -> EvalOutcome:
        status = response.get("status")
        if status == "error":
            return EvalOutcome("exec_error", traceback=response.get("traceback", "trainer reported an error"))
        if status != "ok":
            return EvalOutcome("exec_error", traceback=f"malformed trainer response: status={status!r}")
        try:
            components = {
                name: Series.from_values(vals)
                for name, vals in response["component_series"].items()
            }
            feedback = TrainingFeedback(
                components=components,
                task_score=Series.from_values(response["task_score_series"]),
                episode_lengths=Series.from_values(response["episode_lengths_series"]),
                epoch_freq=self.epoch_freq,
                final_score=float(response["final_score"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            return EvalOutcome("exec_error", traceback=f"malformed trainer response: {exc}")
        return EvalOutcome("ok", feedback=feedback)


def evaluate_candidate(candidate, backend, seed: int) -> EvalOutcome:
    """Dispatch to the configured backend, normalizing stray failures."""
    try:
        return backend.evaluate(candidate, seed)
    except Exception as exc:  # backends normalize their own errors; belt and braces
        return EvalOutcome("exec_error", traceback=f"{type(exc).__name__}: {exc}")
