"""Candidate ranking, position weights, weighted majority voting, and pair evaluation.

Candidates are ordered by ascending score (lower = more trusted); candidate k
at 1-based position p among K receives weight ``1 + 0.5 * (K - p)``, and the
final answer is the weighted majority over canonical answer strings.  The
pairwise decision rule picks the lower-scoring member of a
(correct, incorrect) pair, and ``decision_accuracy`` evaluates it over a pair
set, optionally restricted to pairs whose token-length difference stays under
a bound.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from .scoring import CandidateScore


class EmptySubsetError(ValueError):
    """No pairs remain to evaluate after filtering."""


@dataclass(frozen=True)
class Candidate:
    """One candidate answer, optionally carrying its rank score."""

    candidate_id: str
    answer: str
    score: CandidateScore | None = None

    def __post_init__(self) -> None:
        if not self.candidate_id:
            raise ValueError("candidate_id must be non-empty")
        if not self.answer:
            raise ValueError(f"candidate {self.candidate_id!r} has an empty canonical answer")


@dataclass(frozen=True)
class VoteResult:
    winner: str
    tally: dict[str, float]
    positions: dict[str, int]
    weights: dict[str, float]


@dataclass(frozen=True)
class SolutionPair:
    """A problem's labelled (correct, incorrect) candidate pair with token lengths."""

    problem_id: str
    correct: Candidate
    incorrect: Candidate
    len_correct: int
    len_incorrect: int

    def __post_init__(self) -> None:
        if self.len_correct < 1 or self.len_incorrect < 1:
            raise ValueError(
                f"pair {self.problem_id!r}: token counts must be >= 1, "
                f"got {self.len_correct} and {self.len_incorrect}"
            )


class PairDecision(NamedTuple):
    choice: str  # "first" | "second"
    tie: bool


@dataclass(frozen=True)
class DecisionAccuracy:
    """Pairwise decision accuracy over a pair set, with tie and filter accounting."""

    accuracy: float
    n_used: int
    n_ties: int
    n_excluded: int
    n_total: int


def _score_value(score: CandidateScore, candidate_id: str) -> float:
    value = score.score
    if math.isnan(value):
        raise ValueError(f"candidate {candidate_id!r} has a NaN score")
    return value


def rank_candidates(scores: Sequence[CandidateScore]) -> dict[str, int]:
    """Map candidate_id to 1-based position in ascending score order.

    Ties are broken by position in the input sequence, so manifest order is
    the deterministic tie-break.
    """
    if len(scores) < 1:
        raise ValueError("need at least one score to rank")
    ids = [s.candidate_id for s in scores]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate candidate_id in scores")
    order = sorted(range(len(scores)), key=lambda i: (_score_value(scores[i], ids[i]), i))
    return {ids[i]: pos for pos, i in enumerate(order, start=1)}


def assign_weights(positions: Mapping[str, int], k: int) -> dict[str, float]:
    """Position weights ``w = 1 + 0.5 * (K - pos)``; the best candidate gets the most."""
    if k != len(positions) or sorted(positions.values()) != list(range(1, k + 1)):
        raise ValueError(f"positions must be a permutation of 1..{k}, got {dict(positions)}")
    return {cid: 1.0 + 0.5 * (k - pos) for cid, pos in positions.items()}


def _best_candidate_index(candidates: Sequence[Candidate]) -> int:
    # lowest score wins; with any candidate unscored, input order stands in
    if all(c.score is not None for c in candidates):
        return min(
            range(len(candidates)),
            key=lambda i: (_score_value(candidates[i].score, candidates[i].candidate_id), i),
        )
    return 0


def weighted_majority_vote(candidates: Sequence[Candidate], weights: Mapping[str, float]) -> VoteResult:
    """Accumulate weights per canonical answer and pick the heaviest.

    A tally tie goes to the answer containing the best (lowest-scored)
    candidate, then to the lexicographically smallest answer.
    """
    if len(candidates) < 1:
        raise ValueError("cannot vote over an empty candidate list")
    ids = [c.candidate_id for c in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate candidate_id in candidates")
    if set(weights) != set(ids):
        missing = set(ids) - set(weights)
        extra = set(weights) - set(ids)
        raise ValueError(f"weights do not match candidates (missing {missing or '{}'}, extra {extra or '{}'})")

    tally: dict[str, float] = {}
    for c in candidates:
        tally[c.answer] = tally.get(c.answer, 0.0) + float(weights[c.candidate_id])

    top = max(tally.values())
    leaders = {answer for answer, w in tally.items() if w == top}
    best_answer = candidates[_best_candidate_index(candidates)].answer
    winner = best_answer if best_answer in leaders else min(leaders)

    if all(c.score is not None for c in candidates):
        positions = rank_candidates([c.score for c in candidates])
    else:
        positions = {c.candidate_id: i + 1 for i, c in enumerate(candidates)}
    return VoteResult(
        winner=winner,
        tally=tally,
        positions=positions,
        weights={cid: float(weights[cid]) for cid in ids},
    )


def self_consistency_vote(candidates: Sequence[Candidate]) -> VoteResult:
    """Plain majority vote: every candidate weighs 1, same tie rules."""
    return weighted_majority_vote(candidates, {c.candidate_id: 1.0 for c in candidates})


def pairwise_decision(score_1: float, score_2: float) -> PairDecision:
    """Pick the candidate with the strictly lower score; exact ties go first, flagged."""
    if not (math.isfinite(score_1) and math.isfinite(score_2)):
        raise ValueError(f"scores must be finite, got {score_1} and {score_2}")
    if score_2 < score_1:
        return PairDecision("second", False)
    return PairDecision("first", score_1 == score_2)


def decision_accuracy(
    pairs: Sequence[SolutionPair],
    delta: float,
    combine: str,
    max_len_diff: int | float | None = None,
) -> DecisionAccuracy:
    """Fraction of pairs where the lower score lands on the correct member.

    Pairs with ``|len_correct - len_incorrect| >= max_len_diff`` are excluded
    when the filter is set.  Score ties are reported in ``n_ties`` and excluded
    from both the numerator and the denominator; ``n_used`` is the denominator.
    Every pair's scores must have been computed under the given ``delta`` and
    ``combine`` (and one shared normalization mode).
    """
    if len(pairs) == 0:
        raise EmptySubsetError("no pairs to evaluate")

    norm_modes = set()
    for pair in pairs:
        for label, cand in (("correct", pair.correct), ("incorrect", pair.incorrect)):
            if cand.score is None:
                raise ValueError(f"pair {pair.problem_id!r}: {label} candidate is unscored")
            if cand.score.delta != delta or cand.score.combine_mode != combine:
                raise ValueError(
                    f"pair {pair.problem_id!r}: {label} candidate scored under "
                    f"(delta={cand.score.delta}, combine={cand.score.combine_mode!r}), "
                    f"expected (delta={delta}, combine={combine!r})"
                )
            norm_modes.add(cand.score.normalization_mode)
    if len(norm_modes) > 1:
        raise ValueError(f"pairs scored under mixed normalization modes: {sorted(norm_modes)}")

    if max_len_diff is None:
        retained = list(pairs)
    else:
        retained = [p for p in pairs if abs(p.len_correct - p.len_incorrect) < max_len_diff]
    if not retained:
        raise EmptySubsetError(
            f"length filter {max_len_diff} excluded all {len(pairs)} pairs"
        )

    n_ties = 0
    n_correct = 0
    for pair in retained:
        decision = pairwise_decision(pair.correct.score.score, pair.incorrect.score.score)
        if decision.tie:
            n_ties += 1
        elif decision.choice == "first":
            n_correct += 1
    n_used = len(retained) - n_ties
    if n_used == 0:
        raise EmptySubsetError(f"all {len(retained)} retained pairs are score ties")
    return DecisionAccuracy(
        accuracy=n_correct / n_used,
        n_used=n_used,
        n_ties=n_ties,
        n_excluded=len(pairs) - len(retained),
        n_total=len(pairs),
    )
