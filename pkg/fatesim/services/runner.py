"""
Experiment runner: seeded single runs and the (variant x seed) run matrix,
optionally spread over worker processes.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from math import ceil
from typing import Any, Dict, List, Mapping, Optional, Tuple

from loguru import logger

from fatesim.agents.base import TransitionRecord
from fatesim.agents.factory import build_agent, resolve_config
from fatesim.config import settings
from fatesim.model.agent_model import SWEEP_GRIDS
from fatesim.model.app_model import AppModel
from fatesim.model.bench_model import ExperimentConfig, RunJob, RunRecord, Variant
from fatesim.model.env_model import RewardParams
from fatesim.services.fate_env import EPISODE_LENGTH, FateEnv
from fatesim.services.model_service import load_model_file, require_valid
from fatesim.services.synthetic_suite import generate, get_preset
from fatesim.utils.errors import ConfigError, FateError, ModelError, ModelValidationError, RunInvariantError


def run_experiment(
    model: AppModel,
    algorithm: str,
    overrides: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
    steps: int = settings.DEFAULT_STEPS,
    episode_length: int = EPISODE_LENGTH,
    reward_params: Optional[RewardParams] = None,
    label: Optional[str] = None,
    preset: str = "",
) -> RunRecord:
    """Drive one agent for exactly `steps` environment steps and record the per-step trace."""
    started = time.perf_counter()
    env = FateEnv(model, reward_params, episode_length)
    agent = build_agent(algorithm, env.spec, overrides, seed)

    coverage, rewards, episodes, nodes = [], [], [], []
    slots, string_indices, modes, crash_flags, crash_transitions = [], [], [], [], []
    crashes = set()

    observation = env.reset(seed)
    for _ in range(steps):
        action = agent.act(observation, explore=True)
        executed = env.decode_action(action) if agent.continuous else action
        episode = env.state.episode
        result = env.step(executed)
        agent.learn(TransitionRecord(
            observation=observation,
            action=action,
            executed=executed,
            reward=result.reward,
            next_observation=result.observation,
            terminal=result.crash is not None,
            episode_done=result.episode_done,
        ))

        if result.crash is not None:
            crashes.add(result.crash)
        coverage.append(env.coverage())
        rewards.append(result.reward)
        episodes.append(episode)
        nodes.append(env.state.node)
        slots.append(executed.slot)
        string_indices.append(executed.string_index)
        modes.append(executed.mode)
        crash_flags.append(result.crash is not None)
        crash_transitions.append(result.crash[1] if result.crash is not None else -1)

        observation = env.reset(seed) if result.episode_done else result.observation

    record = RunRecord(
        algorithm=label or algorithm,
        preset=preset,
        seed=seed,
        coverage=coverage,
        rewards=rewards,
        episodes=episodes,
        nodes=nodes,
        slots=slots,
        string_indices=string_indices,
        modes=modes,
        crash_flags=crash_flags,
        crash_transitions=crash_transitions,
        crashes=sorted(crashes),
        duration=time.perf_counter() - started,
    )
    check_run(record, episode_length)
    logger.debug(f"Run {record.run_id} finished: coverage {coverage[-1]:.1f}%, {len(crashes)} crash(es)")
    return record


def check_run(record: RunRecord, episode_length: int):
    if any(later < earlier for earlier, later in zip(record.coverage, record.coverage[1:])):
        raise RunInvariantError(f"Coverage decreased during run {record.run_id}")
    if not any(record.crash_flags):
        expected = ceil(record.steps / episode_length)
        if record.episodes[-1] != expected:
            raise RunInvariantError(
                f"Run {record.run_id} used {record.episodes[-1]} episodes, expected {expected}"
            )


# Run matrix

def load_source(preset: Optional[str], model_path: Optional[str]) -> AppModel:
    """Generate or read the model and reject it when validation finds errors."""
    model = generate(get_preset(preset).config) if preset is not None else load_model_file(model_path)
    return require_valid(model)


def check_source(config: ExperimentConfig):
    """Fail fast on an invalid model. Unreadable sources are left to the per-run failure report."""
    try:
        load_source(config.preset, config.model_path)
    except ModelValidationError:
        raise
    except ModelError as e:
        logger.warning(f"Model source {config.model_source} did not load: {e.message}")


def variants(config: ExperimentConfig) -> List[Variant]:
    """Labelled agent configurations: one per algorithm, or one per grid cell for sweeps."""
    if config.grid is not None:
        if config.grid not in SWEEP_GRIDS:
            raise ConfigError(f"Unknown grid '{config.grid}', expected one of {', '.join(SWEEP_GRIDS)}")
        base = config.overrides.get(config.grid, {})
        return [
            Variant(label=point.label, algorithm=point.algorithm, overrides={**base, **point.overrides})
            for point in SWEEP_GRIDS[config.grid]
        ]
    return [
        Variant(label=name, algorithm=name, overrides=config.overrides.get(name, {}))
        for name in config.algorithms
    ]


def plan_jobs(config: ExperimentConfig) -> List[RunJob]:
    return [
        RunJob(
            preset=config.preset,
            model_path=config.model_path,
            variant=variant,
            seed=seed,
            steps=config.steps,
            episode_length=config.episode_length,
            reward=config.reward,
        )
        for variant in variants(config)
        for seed in config.seeds()
    ]


def execute_job(job: RunJob) -> RunRecord:
    """Top-level so worker processes can unpickle it."""
    model = load_source(job.preset, job.model_path)
    return run_experiment(
        model,
        job.variant.algorithm,
        job.variant.overrides,
        seed=job.seed,
        steps=job.steps,
        episode_length=job.episode_length,
        reward_params=job.reward,
        label=job.variant.label,
        preset=job.preset or job.model_path,
    )


def _guarded(job: RunJob) -> Tuple[Optional[RunRecord], Optional[str]]:
    try:
        return execute_job(job), None
    except FateError as e:
        return None, e.message
    except Exception as e:  # noqa: BLE001
        logger.exception(f"Run {job.variant.label} seed {job.seed} raised")
        return None, f"{type(e).__name__}: {e}"


def run_matrix(config: ExperimentConfig) -> Tuple[List[RunRecord], Dict[str, str]]:
    """
    Execute every (variant, seed) job. Returns the successful records in job
    order and a map from failed run id to its error message.
    """
    jobs = plan_jobs(config)
    # Fail fast on bad knobs and invalid models before any worker starts.
    for variant in {job.variant.label: job.variant for job in jobs}.values():
        resolve_config(variant.algorithm, variant.overrides)
    check_source(config)

    logger.info(f"Running {len(jobs)} job(s) on {config.model_source} with {config.workers} worker(s)")
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_guarded, jobs))
    else:
        outcomes = [_guarded(job) for job in jobs]

    records, failures = [], {}
    for job, (record, error) in zip(jobs, outcomes):
        if record is not None:
            records.append(record)
        else:
            run_id = f"{job.variant.label}__seed{job.seed}"
            failures[run_id] = error
            logger.error(f"Run {run_id} failed: {error}")
    return records, failures
