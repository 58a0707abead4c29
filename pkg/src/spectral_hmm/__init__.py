"""Reduced-dimension spectral estimation of hidden Markov models."""

from .diagnostics import (
    DiagnosticsReport,
    EnumerationBudgetError,
    ErrorSummary,
    checkable_conditions,
    compute_J,
    diagnose,
    epsilon_for,
    eval_kl,
    eval_l1,
    eval_relative_error,
    evaluate,
    sample_complexity,
)
from .distributions import (
    JointDistributions,
    TrigramTable,
    empirical_joint_distributions,
    exact_joint_distributions,
)
from .hmm import (
    Hmm,
    TripleSample,
    conditional_prob,
    forward_prob,
    hmm_a,
    identity_hmm,
    joint_prob,
    log_joint_prob,
    observation_operator,
    random_hmm,
    sample_triples,
    sample_trigram_counts,
    validate,
)
from .model import (
    BeliefState,
    BoundWarning,
    Estimate,
    HsuModel,
    RankDeficiencyError,
    SpectralModel,
    UnstableConditionalError,
    WeightedModel,
    build_hsu_model,
    build_model,
    build_weighted_model,
    compute_projection,
    compute_weighted_projection,
    conditional_update,
    hsu_sequence_prob,
    initial_state,
    inverse_sqrt_weights,
    likelihood_ratio,
    rescale_projection,
    sequence_prob,
)
from .moments import (
    MomentSet,
    Projection,
    SingularMomentError,
    StructuralZeroWarning,
    empirical_moments,
    exact_moments,
    lambda_of,
    moments_from_distributions,
    range_residual,
    sigma_min,
)
from .ngram import NgramCounts, distributions_from_counts, lambda_curve, load_counts

__version__ = "0.1.0"
