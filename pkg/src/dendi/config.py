from __future__ import annotations

from dataclasses import asdict, dataclass

from .search import DEFAULT_GRID_SIZE, DEFAULT_MIN_NODE

MODIFIER_POLICIES = ("all", "step1-selected")
LOOCV_METHODS = ("auto", "fast", "naive")


@dataclass(frozen=True)
class DendiConfig:
    """Tuning of one DENDI run.

    ``se_multiplier = 1`` is the one-standard-error rule; ``0`` compares the
    mean predictive log-likelihoods directly. ``family`` is optional: when
    given it must agree with the family of the dataset being analyzed.
    """

    grid_size: int = DEFAULT_GRID_SIZE
    min_node: int = DEFAULT_MIN_NODE
    se_multiplier: float = 1.0
    family: str = None
    confounder_columns: tuple = ()
    candidate_modifiers: str = "all"
    workers: int = 1
    loocv_method: str = "auto"
    max_failed_share: float = 0.1

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.min_node < 2:
            raise ValueError("min_node must be >= 2")
        if not self.se_multiplier >= 0:
            raise ValueError("se_multiplier must be >= 0")
        if self.candidate_modifiers not in MODIFIER_POLICIES:
            raise ValueError(f"candidate_modifiers must be one of {MODIFIER_POLICIES}")
        if self.loocv_method not in LOOCV_METHODS:
            raise ValueError(f"loocv_method must be one of {LOOCV_METHODS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        object.__setattr__(self, "confounder_columns", tuple(self.confounder_columns))

    def to_dict(self) -> dict:
        return asdict(self)
