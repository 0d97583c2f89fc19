#!/usr/bin/env python3
"""Score five candidate answers and watch the weighted vote overturn the majority.

Candidates are scored by the sum of two normalized thresholded ranks, one per
template order (the forward-pass context "Question: ... Answer: ..." and its
swap).  Lower scores earn higher vote weights: position p of K gets
1 + 0.5 * (K - p).
"""

import tempfile
from pathlib import Path

from corank import (
    assign_weights,
    build_template_text,
    load_candidate_manifest,
    rank_candidates,
    read_bundle,
    score_candidate,
    self_consistency_vote,
    weighted_majority_vote,
)
from corank.bundleio import candidates_from_manifest
from corank.fixtures import make_candidate_fixture
from corank.voting import Candidate

print("the two forward-pass templates:")
print(" ", repr(build_template_text("2+2=?", "4", "QA")))
print(" ", repr(build_template_text("2+2=?", "4", "AQ")))

workdir = Path(tempfile.mkdtemp(prefix="corank-demo-"))
manifest = load_candidate_manifest(make_candidate_fixture(workdir))
print(f"\nfixture problem: {manifest.problem_text[:60]}...")
print(f"ground truth: {manifest.ground_truth}, K = {manifest.k} candidates")

votable, _ = candidates_from_manifest(manifest)
answers = {c.candidate_id: c.answer for c in votable}
scored = []
for entry in manifest.candidates:
    score = score_candidate(
        read_bundle(entry.bundle_qa), read_bundle(entry.bundle_aq), delta=1.75
    )
    scored.append(Candidate(entry.candidate_id, answers[entry.candidate_id], score))

print(f"\n{'candidate':<10} {'rank_qa':>8} {'rank_aq':>8} {'score':>7}  answer")
for c in sorted(scored, key=lambda c: c.score.score):
    print(f"{c.candidate_id:<10} {c.score.rank_qa:>8.2f} {c.score.rank_aq:>8.2f} "
          f"{c.score.score:>7.2f}  {c.answer}")

positions = rank_candidates([c.score for c in scored])
weights = assign_weights(positions, len(scored))
weighted = weighted_majority_vote(scored, weights)
uniform = self_consistency_vote(scored)

print(f"\nweighted tally:  {weighted.tally}  ->  winner {weighted.winner}")
print(f"uniform tally:   {uniform.tally}  ->  winner {uniform.winner}")
print("\nthe two lowest-rank candidates both answered 363, so their positions")
print("carry enough weight (3.0 + 2.5) to beat the three-way 405 majority (4.5)")
