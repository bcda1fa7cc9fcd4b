"""
Pydantic models for experiment configuration, run records and comparison reports.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator
from fatesim.config import settings
from fatesim.model.agent_model import ALGORITHMS
from fatesim.model.env_model import RewardParams

Magnitude = Literal["N", "S", "M", "L"]


class Variant(BaseModel):
    """One labelled agent configuration taking part in an experiment."""
    model_config = ConfigDict(frozen=True)

    label: str
    algorithm: str
    overrides: Dict[str, Any] = Field(default_factory=dict)


class ExperimentConfig(BaseModel):
    """Everything needed to re-execute an experiment; embedded in summary.json."""
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    model_path: Optional[str] = None
    algorithms: List[str] = Field(default_factory=lambda: list(ALGORITHMS))
    overrides: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    grid: Optional[str] = None
    steps: PositiveInt = settings.DEFAULT_STEPS
    episode_length: PositiveInt = settings.DEFAULT_EPISODE_LENGTH
    repetitions: PositiveInt = settings.DEFAULT_REPETITIONS
    base_seed: int = settings.BASE_SEED
    out_dir: Optional[str] = None
    workers: PositiveInt = settings.WORKERS
    alpha: float = Field(settings.ALPHA, gt=0.0, lt=1.0)
    reward: RewardParams = Field(default_factory=RewardParams)

    @model_validator(mode="after")
    def check_consistency(self):
        if (self.preset is None) == (self.model_path is None):
            raise ValueError("exactly one of preset and model_path must be given")
        if self.steps < self.episode_length:
            raise ValueError("steps must be at least the episode length")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm '{name}'")
        for name in self.overrides:
            if name not in ALGORITHMS:
                raise ValueError(f"overrides name unknown algorithm '{name}'")
        return self

    @property
    def model_source(self) -> str:
        return self.preset or self.model_path

    def seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.repetitions)]


class RunJob(BaseModel):
    """A single (variant, seed) run; picklable for worker processes."""
    model_config = ConfigDict(frozen=True)

    preset: Optional[str] = None
    model_path: Optional[str] = None
    variant: Variant
    seed: int
    steps: PositiveInt
    episode_length: PositiveInt
    reward: RewardParams


class RunRecord(BaseModel):
    """Per-step trace of one seeded run, stored column-wise."""
    algorithm: str
    preset: str
    seed: int
    coverage: List[float]
    rewards: List[float]
    episodes: List[int]
    nodes: List[str]
    slots: List[int]
    string_indices: List[int]
    modes: List[int]
    crash_flags: List[bool]
    crash_transitions: List[int]  # transition id on crash steps, -1 elsewhere
    crashes: List[Tuple[str, int]] = Field(default_factory=list)
    duration: float = 0.0

    @property
    def run_id(self) -> str:
        return f"{self.algorithm}__seed{self.seed}"

    @property
    def steps(self) -> int:
        return len(self.coverage)


class AlgorithmSummary(BaseModel):
    runs: int
    seeds: List[int]
    aucs: List[float]
    mean_auc: float
    std_auc: float
    mean_final_coverage: float
    mean_crashes: float


class PairwiseResult(BaseModel):
    """Winner against one other algorithm."""
    algorithm: str
    p_value: float
    reject: bool
    a12: Optional[float] = None
    magnitude: Optional[Magnitude] = None


class ComparisonReport(BaseModel):
    preset: str
    alpha: float
    winner: str
    algorithms: Dict[str, AlgorithmSummary]
    pairwise: List[PairwiseResult]

    @property
    def effect_sizes(self) -> str:
        """Significant effects as 'L(random), M(qlearn)'."""
        return ", ".join(f"{p.magnitude}({p.algorithm})" for p in self.pairwise if p.a12 is not None)
