"""Correlation-matrix rank scoring for candidate reasoning paths.

Scores candidates by the SVD-thresholded rank of the inner-product matrix
between solution- and problem-token representations (two template orders,
combined), reweights them for majority voting, and ships a synthetic
single-attention-layer oracle that numerically validates the rank theory.
"""

from .linalg import (
    CorrelationMatrix,
    RankEstimate,
    NORMALIZATION_MODES,
    RELATIVE_ZERO_CUTOFF,
    correlation_matrix,
    normalized_rank,
    numerical_rank,
    rank_with_gap,
    singular_values,
    thresholded_rank,
)
from .scoring import (
    CandidateScore,
    COMBINE_MODES,
    DEFAULT_DELTA,
    DEFAULT_LAYER,
    ORDER_AQ,
    ORDER_QA,
    TEMPLATE_ORDERS,
    build_template_text,
    combine_ranks,
    score_candidate,
    template_spans,
)
from .voting import (
    Candidate,
    DecisionAccuracy,
    EmptySubsetError,
    PairDecision,
    SolutionPair,
    VoteResult,
    assign_weights,
    decision_accuracy,
    pairwise_decision,
    rank_candidates,
    self_consistency_vote,
    weighted_majority_vote,
)
from .oracle import (
    DegenerateAttentionError,
    ExcessiveResamplingError,
    KrylovCheck,
    OracleConfig,
    OracleReport,
    TrialRecord,
    attention_step,
    generate_correct_solution,
    generate_incorrect_solution,
    krylov_rank_check,
    make_low_rank_w,
    predicted_incorrect_rank,
    run_trials,
    sample_problem_tokens,
    w_star,
)
from .bundleio import (
    AnswerExtractionError,
    BadMagicError,
    BundleFormatError,
    BundleHeader,
    CandidateEntry,
    CandidateManifest,
    ManifestError,
    NonFinitePayloadError,
    PairEntry,
    PairManifest,
    PairSide,
    RepresentationBundle,
    ScoreConfig,
    ScoreReport,
    TruncatedPayloadError,
    VersionMismatchError,
    candidates_from_manifest,
    load_candidate_manifest,
    load_pair_manifest,
    normalize_answer,
    read_bundle,
    read_bundle_header,
    read_scores,
    write_bundle,
    write_scores,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
