"""Top-K ranking from discrete choice data.

Choice models and simulation, the choice-based Borda count, MNL maximum
likelihood and spectral rankers, exact theory quantities, ranking-corpus
ingestion and an experiment harness.
"""

from .choice_models import (
    NoiseFamily,
    ParametricChoiceModel,
    PartworthVector,
    TabularChoiceModel,
    mnl_model,
    sample_choices,
    tabular_from_matrix,
)
from .errors import (
    ChoiceRankError,
    ConvergenceError,
    DisconnectedError,
    DomainError,
    IntransitiveError,
    NumericalError,
    ParseError,
    ReducibleChainError,
    ValidationError,
)
from .kernels import BACKEND
from .rankers import borda_count, build_markov_chain, mle_fit, ranking, spectral_scores, stationary_distribution, top_k
from .sampling import ChoiceDataset, MenuCounts, SamplingConfig, enumerate_menus, simulate_dataset
from .theory import (
    BordaScoreVector,
    GapReport,
    borda_scores_exact,
    borda_scores_mc,
    exact_recovery_bound,
    gap_report,
)

__version__ = "0.1.0"
