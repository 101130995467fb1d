"""Detection of nonlinearity, discontinuity and interactions in GLMs."""
__version__ = "0.1.0"

from .config import DendiConfig
from .data import Dataset
from .engine import DendiReport, StepOutcome, run_dendi, step1, step2
from .estimator import DendiRegressor
from .exceptions import (AllCandidatesDegenerate, DegenerateColumn, DendiError, EmptyGrid,
                         NonFiniteWeights, RankDeficient, TooManyFailedFolds)
from .forms import (AdditiveCombo, FormSpec, Linear, MultiplicativeCombo, Null,
                    PiecewiseConstant, Tree, build_design)
from .glm import FitResult, deviance_of, fit_irls, get_family, per_obs_loglik
from .loocv import LoocvResult, loocv_score, one_se_gate

__all__ = [
    "AdditiveCombo", "AllCandidatesDegenerate", "DegenerateColumn", "DendiConfig",
    "DendiError", "DendiRegressor", "DendiReport", "Dataset", "EmptyGrid", "FitResult",
    "FormSpec", "Linear", "LoocvResult", "MultiplicativeCombo", "NonFiniteWeights", "Null",
    "PiecewiseConstant", "RankDeficient", "StepOutcome", "TooManyFailedFolds", "Tree",
    "build_design", "deviance_of", "fit_irls", "get_family", "loocv_score", "one_se_gate",
    "per_obs_loglik", "run_dendi", "step1", "step2",
]
