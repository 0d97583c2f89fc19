import numpy as np
import pytest
from hypothesis import given, strategies as st

from corank.bundleio import RepresentationBundle
from corank.fixtures import controlled_bundle
from corank.scoring import (
    build_template_text,
    combine_ranks,
    score_candidate,
    template_spans,
)

from reference_impls import dot_product_matrix, jacobi_singular_values


class TestTemplates:
    def test_qa_literal(self):
        assert build_template_text("2+2=?", "4", "QA") == "Question: 2+2=? Answer: 4"

    def test_aq_literal(self):
        assert build_template_text("2+2=?", "4", "AQ") == "Answer: 4 Question: 2+2=?"

    def test_empty_problem_rejected(self):
        with pytest.raises(ValueError, match="problem"):
            build_template_text("", "4", "QA")

    def test_empty_solution_rejected(self):
        with pytest.raises(ValueError, match="solution"):
            build_template_text("2+2=?", "", "AQ")

    def test_unknown_order_rejected(self):
        with pytest.raises(ValueError, match="template order"):
            build_template_text("p", "s", "QQ")

    @given(
        problem=st.text(min_size=1, max_size=60),
        solution=st.text(min_size=1, max_size=60),
        order=st.sampled_from(["QA", "AQ"]),
    )
    def test_spans_round_trip(self, problem, solution, order):
        text = build_template_text(problem, solution, order)
        (p0, p1), (s0, s1) = template_spans(problem, solution, order)
        assert text[p0:p1] == problem
        assert text[s0:s1] == solution


class TestCombineRanks:
    def test_zero_case(self):
        assert combine_ranks(0.0, 0.0, "add") == 0.0

    def test_multiplicative_identity(self):
        assert combine_ranks(1.0, 0.37, "mul") == 0.37

    def test_direct_sum(self):
        assert combine_ranks(0.2, 0.5, "add") == 0.7

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="combine mode"):
            combine_ranks(0.1, 0.2, "avg")

    def test_negative_rank_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            combine_ranks(-0.1, 0.2, "add")


def _bundle_pair(rank_qa=(3, 10), rank_aq=(2, 10), cid="cand", seed=11, **kwargs):
    qa = controlled_bundle(cid, "QA", *rank_qa, seed=seed, **kwargs)
    aq = controlled_bundle(cid, "AQ", *rank_aq, seed=seed, **kwargs)
    return qa, aq


class TestScoreCandidate:
    def test_add_formula(self):
        qa, aq = _bundle_pair(rank_qa=(3, 10), rank_aq=(9, 20))
        score = score_candidate(qa, aq, delta=1.75, combine="add")
        assert score.rank_qa == 0.3
        assert score.rank_aq == 0.45
        assert score.score == 0.75

    def test_mul_formula(self):
        qa, aq = _bundle_pair(rank_qa=(3, 10), rank_aq=(9, 20))
        score = score_candidate(qa, aq, delta=1.75, combine="mul")
        assert score.score == pytest.approx(0.135)

    def test_end_to_end_oracle_recomputation(self, golden_dir):
        from corank.bundleio import read_bundle

        qa = read_bundle(golden_dir / "c0_qa.sind")
        aq = read_bundle(golden_dir / "c0_aq.sind")
        got = score_candidate(qa, aq, delta=1.75, combine="add")

        expected = {}
        for label, bundle in (("qa", qa), ("aq", aq)):
            entries = dot_product_matrix(bundle.solution_reps, bundle.problem_reps)
            spectrum = jacobi_singular_values(entries)
            expected[label] = sum(1 for s in spectrum if s > 1.75) / bundle.m
        assert got.rank_qa == expected["qa"]
        assert got.rank_aq == expected["aq"]
        assert got.score == expected["qa"] + expected["aq"]

    def test_candidate_id_mismatch_rejected(self):
        qa = controlled_bundle("a", "QA", 1, 5)
        aq = controlled_bundle("b", "AQ", 1, 5)
        with pytest.raises(ValueError, match="different candidates"):
            score_candidate(qa, aq)

    def test_model_tag_mismatch_rejected(self):
        qa = controlled_bundle("a", "QA", 1, 5, model="m1")
        aq = controlled_bundle("a", "AQ", 1, 5, model="m2")
        with pytest.raises(ValueError, match="different representation models"):
            score_candidate(qa, aq)

    def test_swapped_orders_rejected(self):
        qa, aq = _bundle_pair()
        with pytest.raises(ValueError, match="template order"):
            score_candidate(aq, qa)

    def test_dimensionality_may_differ_between_bundles(self):
        qa = controlled_bundle("a", "QA", 2, 8, n=6, d=9)
        aq = controlled_bundle("a", "AQ", 1, 5, n=4, d=13)
        score = score_candidate(qa, aq, delta=1.75)
        assert score.rank_qa == 2 / 8
        assert score.rank_aq == 1 / 5

    def test_score_non_increasing_in_delta(self):
        rng = np.random.default_rng(21)
        prob = rng.standard_normal((6, 12))
        qa = RepresentationBundle("c", "QA", "m", 0, prob, rng.standard_normal((8, 12)))
        aq = RepresentationBundle("c", "AQ", "m", 0, prob, rng.standard_normal((7, 12)))
        deltas = np.sort(rng.uniform(0.0, 30.0, size=6))
        scores = [score_candidate(qa, aq, delta=d).score for d in deltas]
        assert all(a >= b for a, b in zip(scores, scores[1:]))

    def test_add_symmetric_in_components(self):
        assert combine_ranks(0.3, 0.7, "add") == combine_ranks(0.7, 0.3, "add")
        assert combine_ranks(0.3, 0.7, "mul") == combine_ranks(0.7, 0.3, "mul")
