import math

import numpy as np
import pytest

from corank.scoring import CandidateScore
from corank.voting import (
    Candidate,
    EmptySubsetError,
    SolutionPair,
    assign_weights,
    decision_accuracy,
    pairwise_decision,
    rank_candidates,
    self_consistency_vote,
    weighted_majority_vote,
)

from reference_impls import brute_force_vote_winner, selection_sort_positions


def make_score(cid, value, delta=1.75, combine="add", mode="raw"):
    return CandidateScore(
        candidate_id=cid,
        rank_qa=value / 2,
        rank_aq=value / 2,
        score=value,
        combine_mode=combine,
        delta=delta,
        normalization_mode=mode,
        raw_rank_qa=0,
        raw_rank_aq=0,
    )


def make_candidate(cid, answer, value=None, **kwargs):
    score = None if value is None else make_score(cid, value, **kwargs)
    return Candidate(candidate_id=cid, answer=answer, score=score)


class TestRankCandidates:
    def test_direct_sort(self):
        scores = [make_score("0", 0.9), make_score("1", 0.3), make_score("2", 0.6)]
        assert rank_candidates(scores) == {"1": 1, "2": 2, "0": 3}

    def test_tie_break_follows_input_order(self):
        scores = [make_score(str(i), 0.5) for i in range(5)]
        assert rank_candidates(scores) == {str(i): i + 1 for i in range(5)}

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            k = int(rng.integers(1, 8))
            values = np.round(rng.uniform(0, 1, size=k), 2)  # rounding forces ties
            scores = [make_score(str(i), float(v)) for i, v in enumerate(values)]
            got = rank_candidates(scores)
            want = selection_sort_positions(values)
            assert got == {str(i): pos for i, pos in want.items()}

    def test_nan_rejected_with_id(self):
        scores = [make_score("good", 0.1), make_score("bad", float("nan"))]
        with pytest.raises(ValueError, match="'bad'.*NaN"):
            rank_candidates(scores)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            rank_candidates([make_score("x", 0.1), make_score("x", 0.2)])


class TestAssignWeights:
    def test_k5_vector(self):
        positions = {f"c{i}": i + 1 for i in range(5)}
        weights = assign_weights(positions, 5)
        assert [weights[f"c{i}"] for i in range(5)] == [3.0, 2.5, 2.0, 1.5, 1.0]

    def test_k1_degenerate(self):
        assert assign_weights({"only": 1}, 1) == {"only": 1.0}

    def test_k2(self):
        assert assign_weights({"a": 1, "b": 2}, 2) == {"a": 1.5, "b": 1.0}

    def test_exact_formula_for_all_k(self):
        for k in range(1, 11):
            weights = assign_weights({str(i): i for i in range(1, k + 1)}, k)
            for pos in range(1, k + 1):
                assert weights[str(pos)] == 1 + 0.5 * (k - pos)

    def test_bad_positions_rejected(self):
        with pytest.raises(ValueError, match="permutation"):
            assign_weights({"a": 1, "b": 3}, 2)


class TestWeightedVote:
    def test_plain_majority(self):
        cands = [make_candidate(str(i), a) for i, a in enumerate("AAB")]
        result = weighted_majority_vote(cands, {str(i): 1.0 for i in range(3)})
        assert result.winner == "A"
        assert result.tally == {"A": 2.0, "B": 1.0}

    def test_weight_dominance(self):
        cands = [make_candidate(str(i), a, v) for i, (a, v) in enumerate(zip("ABB", [0.1, 0.2, 0.3]))]
        result = weighted_majority_vote(cands, {"0": 3.0, "1": 1.5, "2": 1.0})
        assert result.winner == "A"
        assert result.tally == {"A": 3.0, "B": 2.5}

    def test_tally_tie_prefers_best_candidate_answer(self):
        cands = [
            make_candidate("0", "B", 0.9),
            make_candidate("1", "A", 0.1),
            make_candidate("2", "B", 0.5),
        ]
        # A and B both tally 2.0; best candidate (id 1, score 0.1) answered A
        result = weighted_majority_vote(cands, {"0": 1.0, "1": 2.0, "2": 1.0})
        assert result.winner == "A"

    def test_tally_tie_falls_back_to_lexicographic(self):
        cands = [
            make_candidate("0", "C", 0.1),
            make_candidate("1", "B", 0.5),
            make_candidate("2", "A", 0.9),
        ]
        # best candidate answered C with 1.0; A and B tie at 2.0
        result = weighted_majority_vote(cands, {"0": 1.0, "1": 2.0, "2": 2.0})
        assert result.winner == "A"

    def test_single_shared_answer_always_wins(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            k = int(rng.integers(1, 6))
            cands = [make_candidate(str(i), "same", float(rng.uniform())) for i in range(k)]
            weights = {str(i): float(rng.uniform(0.1, 3.0)) for i in range(k)}
            assert weighted_majority_vote(cands, weights).winner == "same"

    def test_weights_must_match_candidates(self):
        cands = [make_candidate("0", "A")]
        with pytest.raises(ValueError, match="weights do not match"):
            weighted_majority_vote(cands, {"1": 1.0})

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            weighted_majority_vote([], {})

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(31)
        answers_pool = ["A", "B", "C"]
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            answers = [answers_pool[rng.integers(0, 3)] for _ in range(k)]
            values = [round(float(rng.uniform(0, 1)), 1) for _ in range(k)]
            cands = [make_candidate(str(i), a, v) for i, (a, v) in enumerate(zip(answers, values))]
            positions = rank_candidates([c.score for c in cands])
            weights = assign_weights(positions, k)
            got = weighted_majority_vote(cands, weights)
            best_index = min(range(k), key=lambda i: (values[i], i))
            want = brute_force_vote_winner(answers, [weights[str(i)] for i in range(k)], best_index)
            assert got.winner == want


class TestSelfConsistency:
    def test_plain_majority(self):
        cands = [make_candidate(str(i), a) for i, a in enumerate("AAB")]
        assert self_consistency_vote(cands).winner == "A"

    def test_two_way_tie_goes_to_lower_scored(self):
        cands = [make_candidate("0", "A", 0.8), make_candidate("1", "B", 0.2)]
        assert self_consistency_vote(cands).winner == "B"

    def test_unscored_tie_goes_to_first(self):
        cands = [make_candidate("0", "A"), make_candidate("1", "B")]
        assert self_consistency_vote(cands).winner == "A"

    def test_equals_weighted_vote_with_uniform_weights(self):
        rng = np.random.default_rng(37)
        for _ in range(300):
            k = int(rng.integers(1, 6))
            cands = [
                make_candidate(str(i), "AB"[rng.integers(0, 2)], float(rng.uniform()))
                for i in range(k)
            ]
            uniform = {str(i): 1.0 for i in range(k)}
            assert self_consistency_vote(cands) == weighted_majority_vote(cands, uniform)


class TestMonotoneTransformInvariance:
    def test_positions_weights_winner_invariant(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            answers = ["XY"[rng.integers(0, 2)] for _ in range(k)]
            values = [float(rng.uniform(0, 2)) for _ in range(k)]
            for transform in (lambda x: 3 * x + 1, math.exp, lambda x: x**3 + x):
                base = [make_candidate(str(i), a, v) for i, (a, v) in enumerate(zip(answers, values))]
                mapped = [
                    make_candidate(str(i), a, transform(v))
                    for i, (a, v) in enumerate(zip(answers, values))
                ]
                pos_base = rank_candidates([c.score for c in base])
                pos_mapped = rank_candidates([c.score for c in mapped])
                assert pos_base == pos_mapped
                weights = assign_weights(pos_base, k)
                assert weighted_majority_vote(base, weights).winner == \
                    weighted_majority_vote(mapped, weights).winner
                assert pairwise_decision(values[0], values[1]).choice == \
                    pairwise_decision(transform(values[0]), transform(values[1])).choice


class TestPairwiseDecision:
    def test_first_lower(self):
        assert pairwise_decision(0.4, 0.7) == ("first", False)

    def test_second_lower(self):
        assert pairwise_decision(0.7, 0.4) == ("second", False)

    def test_tie_flagged(self):
        assert pairwise_decision(0.5, 0.5) == ("first", True)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            pairwise_decision(float("nan"), 0.1)


def make_pair(pid, correct_value, incorrect_value, len_c=30, len_i=30, **kwargs):
    return SolutionPair(
        problem_id=pid,
        correct=make_candidate(f"{pid}-cor", "right", correct_value, **kwargs),
        incorrect=make_candidate(f"{pid}-inc", "wrong", incorrect_value, **kwargs),
        len_correct=len_c,
        len_incorrect=len_i,
    )


class TestDecisionAccuracy:
    def test_constructed_certainty(self):
        pairs = [make_pair(f"p{i}", 0.2 + i * 0.01, 0.8 + i * 0.01) for i in range(10)]
        report = decision_accuracy(pairs, 1.75, "add")
        assert report.accuracy == 1.0
        assert report.n_used == 10
        assert report.n_ties == 0
        assert report.n_excluded == 0

    def test_length_filter_excludes_wide_pairs(self):
        pairs = [
            make_pair("near", 0.2, 0.9, len_c=100, len_i=140),
            make_pair("far", 0.9, 0.2, len_c=100, len_i=160),
        ]
        unfiltered = decision_accuracy(pairs, 1.75, "add")
        assert unfiltered.accuracy == 0.5
        at50 = decision_accuracy(pairs, 1.75, "add", max_len_diff=50)
        assert at50.accuracy == 1.0 and at50.n_used == 1 and at50.n_excluded == 1

    def test_infinite_filter_equals_no_filter(self):
        pairs = [make_pair(f"p{i}", 0.1 * i, 0.05 + 0.1 * i, len_c=10 + i, len_i=90 - i) for i in range(8)]
        assert decision_accuracy(pairs, 1.75, "add", math.inf) == decision_accuracy(pairs, 1.75, "add")

    def test_boundary_is_exclusive(self):
        pairs = [make_pair("edge", 0.2, 0.9, len_c=100, len_i=150)]
        with pytest.raises(EmptySubsetError):
            decision_accuracy(pairs, 1.75, "add", max_len_diff=50)
        assert decision_accuracy(pairs, 1.75, "add", max_len_diff=51).n_used == 1

    def test_ties_reported_and_excluded(self):
        pairs = [make_pair("t", 0.5, 0.5), make_pair("ok", 0.2, 0.9)]
        report = decision_accuracy(pairs, 1.75, "add")
        assert report.n_ties == 1
        assert report.n_used == 1
        assert report.accuracy == 1.0

    def test_all_ties_raise_empty_subset(self):
        with pytest.raises(EmptySubsetError, match="ties"):
            decision_accuracy([make_pair("t", 0.5, 0.5)], 1.75, "add")

    def test_empty_filter_result_raises(self):
        pairs = [make_pair("p", 0.1, 0.9, len_c=1, len_i=500)]
        with pytest.raises(EmptySubsetError, match="excluded all"):
            decision_accuracy(pairs, 1.75, "add", max_len_diff=10)

    def test_config_mismatch_rejected(self):
        pairs = [make_pair("p", 0.1, 0.9, delta=1.0)]
        with pytest.raises(ValueError, match="scored under"):
            decision_accuracy(pairs, 1.75, "add")

    def test_unscored_pair_rejected(self):
        pair = SolutionPair(
            problem_id="p",
            correct=make_candidate("c", "right"),
            incorrect=make_candidate("i", "wrong", 0.5),
            len_correct=3,
            len_incorrect=3,
        )
        with pytest.raises(ValueError, match="unscored"):
            decision_accuracy([pair], 1.75, "add")

    def test_bad_lengths_rejected(self):
        with pytest.raises(ValueError, match="token counts"):
            make_pair("p", 0.1, 0.9, len_c=0)
