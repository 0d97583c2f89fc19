#!/usr/bin/env python3
"""Decision accuracy on synthetic (correct, incorrect) solution pairs.

Each pair comes from the attention oracle: the correct member's correlation
rank is pinned at rank(W_*), the incorrect member picks up extra rank from
its noise tokens.  The decision rule is simply "trust the lower score";
spectral normalization with a small threshold separates the two perfectly.
"""

import tempfile
from pathlib import Path

from corank import SolutionPair, decision_accuracy, load_pair_manifest, read_bundle, score_candidate
from corank.fixtures import make_oracle_pair_set
from corank.voting import Candidate

workdir = Path(tempfile.mkdtemp(prefix="corank-pairs-"))
manifest = load_pair_manifest(make_oracle_pair_set(workdir, n_pairs=60, seed=5))
print(f"built {len(manifest.pairs)} oracle pairs "
      f"(correct: 30 tokens, incorrect: 10 correct + 8 noise)")


def scored_pairs(delta, mode):
    pairs = []
    for entry in manifest.pairs:
        members = {}
        for label, side in (("correct", entry.correct), ("incorrect", entry.incorrect)):
            score = score_candidate(
                read_bundle(side.bundle_qa), read_bundle(side.bundle_aq),
                delta=delta, combine="add", mode=mode,
            )
            members[label] = Candidate(side.candidate_id, "n/a", score)
        pairs.append(SolutionPair(entry.problem_id, members["correct"], members["incorrect"],
                                  entry.len_correct, entry.len_incorrect))
    return pairs


print(f"\n{'delta':>8} {'mode':>9} {'accuracy':>9} {'ties':>5}")
for delta in (0.0, 1e-6, 1e-4, 1e-2):
    pairs = scored_pairs(delta, "spectral")
    result = decision_accuracy(pairs, delta, "add")
    print(f"{delta:>8g} {'spectral':>9} {result.accuracy:>9.3f} {result.n_ties:>5}")

# the @-style length filters keep only pairs whose token-length difference
# stays under the bound; every synthetic pair here differs by 30 - 18 = 12
from corank import EmptySubsetError

pairs = scored_pairs(0.0, "spectral")
for bound in (50, 13, None):
    result = decision_accuracy(pairs, 0.0, "add", max_len_diff=bound)
    label = f"@{bound}" if bound else "all"
    print(f"\nlength filter {label}: accuracy {result.accuracy:.3f} over "
          f"{result.n_used} pairs ({result.n_excluded} excluded)")

try:
    decision_accuracy(pairs, 0.0, "add", max_len_diff=12)
except EmptySubsetError as exc:
    print(f"\nlength filter @12 (the bound is exclusive): {exc}")
