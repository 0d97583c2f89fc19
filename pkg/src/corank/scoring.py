"""Template rendering and per-candidate rank scores.

A candidate solution is scored from two representation bundles, one per
template order: ``QA`` renders "Question: {problem} Answer: {solution}" and
``AQ`` renders "Answer: {solution} Question: {problem}".  The template only
changes the forward-pass context that produced the representations; the
correlation matrix is always solution rows x problem columns.  Each bundle
yields a normalized thresholded rank, and the candidate's score combines the
two (sum by default, product as a variant).  Lower scores indicate simpler,
more problem-focused solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .linalg import correlation_matrix, normalized_rank

if TYPE_CHECKING:  # pragma: no cover
    from .bundleio import RepresentationBundle

ORDER_QA = "QA"
ORDER_AQ = "AQ"
TEMPLATE_ORDERS = (ORDER_QA, ORDER_AQ)
COMBINE_MODES = ("add", "mul")

DEFAULT_DELTA = 1.75
DEFAULT_LAYER = 26

_QA_PREFIX = "Question: "
_QA_MIDDLE = " Answer: "
_AQ_PREFIX = "Answer: "
_AQ_MIDDLE = " Question: "


def _check_order(order: str) -> str:
    if order not in TEMPLATE_ORDERS:
        raise ValueError(f"unknown template order {order!r}; expected one of {TEMPLATE_ORDERS}")
    return order


def build_template_text(problem: str, solution: str, order: str) -> str:
    """Render the exact template literal for one (problem, solution) pair."""
    _check_order(order)
    if not problem:
        raise ValueError("problem text must be non-empty")
    if not solution:
        raise ValueError("solution text must be non-empty")
    if order == ORDER_QA:
        return _QA_PREFIX + problem + _QA_MIDDLE + solution
    return _AQ_PREFIX + solution + _AQ_MIDDLE + problem


def template_spans(problem: str, solution: str, order: str) -> tuple[tuple[int, int], tuple[int, int]]:
    """Character spans ``(problem_span, solution_span)`` inside the rendered template.

    Spans are half-open ``(start, end)`` offsets into ``build_template_text``'s
    output; slicing the template with them reproduces the inputs exactly.
    """
    _check_order(order)
    if order == ORDER_QA:
        p_start = len(_QA_PREFIX)
        p_end = p_start + len(problem)
        s_start = p_end + len(_QA_MIDDLE)
        return (p_start, p_end), (s_start, s_start + len(solution))
    s_start = len(_AQ_PREFIX)
    s_end = s_start + len(solution)
    p_start = s_end + len(_AQ_MIDDLE)
    return (p_start, p_start + len(problem)), (s_start, s_end)


def combine_ranks(rank_qa: float, rank_aq: float, mode: str = "add") -> float:
    """Combine the two template ranks into one score (sum or product)."""
    if mode not in COMBINE_MODES:
        raise ValueError(f"unknown combine mode {mode!r}; expected one of {COMBINE_MODES}")
    if rank_qa < 0 or rank_aq < 0:
        raise ValueError(f"ranks must be >= 0, got {rank_qa} and {rank_aq}")
    if mode == "add":
        return rank_qa + rank_aq
    return rank_qa * rank_aq


@dataclass(frozen=True)
class CandidateScore:
    """Per-candidate record of the two normalized ranks and their combination."""

    candidate_id: str
    rank_qa: float
    rank_aq: float
    score: float
    combine_mode: str
    delta: float
    normalization_mode: str
    raw_rank_qa: int
    raw_rank_aq: int


def score_candidate(
    bundle_qa: "RepresentationBundle",
    bundle_aq: "RepresentationBundle",
    delta: float = DEFAULT_DELTA,
    combine: str = "add",
    mode: str = "raw",
) -> CandidateScore:
    """Score one candidate from its QA and AQ representation bundles.

    Both bundles must reference the same candidate and declare the same
    representation model (their dimensionalities may differ).  Each bundle's
    solution x problem correlation matrix is rank-thresholded at ``delta``
    under ``mode`` and normalized by its solution-token count.
    """
    if bundle_qa.candidate_id != bundle_aq.candidate_id:
        raise ValueError(
            "bundles reference different candidates: "
            f"{bundle_qa.candidate_id!r} vs {bundle_aq.candidate_id!r}"
        )
    if bundle_qa.representation_model != bundle_aq.representation_model:
        raise ValueError(
            "bundles declare different representation models: "
            f"{bundle_qa.representation_model!r} vs {bundle_aq.representation_model!r}"
        )
    if bundle_qa.template_order != ORDER_QA:
        raise ValueError(f"bundle_qa has template order {bundle_qa.template_order!r}, expected 'QA'")
    if bundle_aq.template_order != ORDER_AQ:
        raise ValueError(f"bundle_aq has template order {bundle_aq.template_order!r}, expected 'AQ'")

    est_qa = normalized_rank(
        correlation_matrix(bundle_qa.solution_reps, bundle_qa.problem_reps, mode), delta
    )
    est_aq = normalized_rank(
        correlation_matrix(bundle_aq.solution_reps, bundle_aq.problem_reps, mode), delta
    )
    return CandidateScore(
        candidate_id=bundle_qa.candidate_id,
        rank_qa=est_qa.normalized_rank,
        rank_aq=est_aq.normalized_rank,
        score=combine_ranks(est_qa.normalized_rank, est_aq.normalized_rank, combine),
        combine_mode=combine,
        delta=float(delta),
        normalization_mode=mode,
        raw_rank_qa=est_qa.raw_rank,
        raw_rank_aq=est_aq.raw_rank,
    )
