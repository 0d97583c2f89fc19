"""Deterministic synthetic fixtures: controlled-spectrum manifests and oracle pair sets.

Bundles built here have correlation matrices with *prescribed* singular
values (margins kept well clear of the default threshold), so thresholded
ranks — and therefore scores, positions, and votes — are exact, platform-stable
integers and small rationals.  The pair-set builder runs the synthetic
attention oracle to produce (correct, incorrect) bundles whose rank gap is
guaranteed by construction.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bundleio import RepresentationBundle, write_bundle
from .oracle import (
    OracleConfig,
    generate_correct_solution,
    generate_incorrect_solution,
    make_low_rank_w,
    sample_problem_tokens,
)

FIXTURE_MODEL_TAG = "synthetic-ctrl-v1"
ORACLE_MODEL_TAG = "attention-sim-v1"


def controlled_spectrum(rank: int, size: int) -> np.ndarray:
    """``size`` singular values with exactly ``rank`` of them above 1.75.

    Kept values run 4.0 down to 2.25, dropped values 1.25 down to 0.25:
    every value sits at least 0.5 away from the 1.75 threshold, so float32
    bundle quantization (relative ~1e-7) cannot move a rank.
    """
    if not 0 <= rank <= size:
        raise ValueError(f"need 0 <= rank <= {size}, got {rank}")
    kept = np.linspace(4.0, 2.25, rank) if rank else np.empty(0)
    dropped = np.linspace(1.25, 0.25, size - rank) if size - rank else np.empty(0)
    return np.concatenate([kept, dropped])


def controlled_bundle(
    candidate_id: str,
    template_order: str,
    rank: int,
    m: int,
    n: int = 10,
    d: int = 14,
    seed: int = 0,
    model: str = FIXTURE_MODEL_TAG,
    layer: int = 0,
) -> RepresentationBundle:
    """A bundle whose correlation matrix has thresholded rank ``rank`` at delta 1.75.

    Problem rows are orthonormal, and solution rows are built as ``C @ P``
    with ``C = U diag(s) V^T``, so the correlation matrix ``(C P) P^T`` equals
    ``C`` and inherits the prescribed spectrum exactly.
    """
    if not (rank <= min(m, n) and n <= d):
        raise ValueError(f"need rank <= min(m, n) and n <= d, got rank={rank}, m={m}, n={n}, d={d}")
    rng = np.random.default_rng([seed, 0 if template_order == "QA" else 1])
    p, _ = np.linalg.qr(rng.standard_normal((d, n)))
    p = p.T  # n x d, orthonormal rows
    u, _ = np.linalg.qr(rng.standard_normal((m, m)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = controlled_spectrum(rank, min(m, n))
    c = u[:, : len(s)] @ np.diag(s) @ v[:, : len(s)].T
    return RepresentationBundle(
        candidate_id=candidate_id,
        template_order=template_order,
        representation_model=model,
        layer=layer,
        problem_reps=p,
        solution_reps=c @ p,
    )


def make_controlled_manifest(
    out_dir,
    problem_id: str,
    candidates: list[dict],
    problem_text: str = "synthetic fixture problem",
    ground_truth: str | None = None,
    seed: int = 0,
) -> Path:
    """Write bundles plus a candidate manifest for a list of candidate specs.

    Each spec is ``{"candidate_id", "answer_raw", "rank_qa": (rank, m),
    "rank_aq": (rank, m)}``; the resulting normalized ranks are exactly
    ``rank / m`` at delta 1.75 in raw mode.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, spec in enumerate(candidates):
        cid = spec["candidate_id"]
        paths = {}
        for order, key in (("QA", "rank_qa"), ("AQ", "rank_aq")):
            rank, m = spec[key]
            bundle = controlled_bundle(cid, order, rank, m, seed=seed * 1009 + i)
            fname = f"{cid}_{order.lower()}.sind"
            write_bundle(bundle, out_dir / fname)
            paths[order] = fname
        entries.append(
            {
                "candidate_id": cid,
                "answer_raw": spec["answer_raw"],
                "bundle_qa": paths["QA"],
                "bundle_aq": paths["AQ"],
            }
        )
    doc = {
        "schema": "corank-candidates-v1",
        "problem_id": problem_id,
        "problem_text": problem_text,
        "candidates": entries,
    }
    if ground_truth is not None:
        doc["ground_truth"] = ground_truth
    manifest_path = out_dir / f"{problem_id}.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def make_candidate_fixture(out_dir, seed: int = 0) -> Path:
    """The shipped five-candidate fixture.

    Scores at delta 1.75 come out as c2 (0.30) < c0 (0.35) < c1 (0.95) <
    c3 (1.10) < c4 (1.20), so the two "363" candidates take positions 1-2
    (weights 3.0 + 2.5 = 5.5) and outvote the three "405" candidates
    (2.0 + 1.5 + 1.0 = 4.5), while plain majority voting picks "405".
    """
    candidates = [
        {
            "candidate_id": "c0",
            "answer_raw": "At the end of five cycles $3+9+27+81+243=\\boxed{363}$ people have heard it.",
            "rank_qa": (2, 10),
            "rank_aq": (3, 20),
        },
        {
            "candidate_id": "c1",
            "answer_raw": "Adding the five rounds gives 405 listeners in total.",
            "rank_qa": (5, 10),
            "rank_aq": (9, 20),
        },
        {
            "candidate_id": "c2",
            "answer_raw": "So the final count is \\boxed{363}.",
            "rank_qa": (3, 10),
            "rank_aq": (0, 10),
        },
        {
            "candidate_id": "c3",
            "answer_raw": "The total comes to 405.",
            "rank_qa": (6, 10),
            "rank_aq": (5, 10),
        },
        {
            "candidate_id": "c4",
            "answer_raw": "Summing, it must be 405, so the answer is 405.",
            "rank_qa": (7, 10),
            "rank_aq": (5, 10),
        },
    ]
    return make_controlled_manifest(
        out_dir,
        problem_id="fixture-rumor",
        candidates=candidates,
        problem_text=(
            "A rumor spreads in rounds: one person tells three friends, and each new "
            "listener tells three more in the next round. After five rounds, how many "
            "people (not counting the originator) have heard it?"
        ),
        ground_truth="363",
        seed=seed,
    )


def make_sweep_fixture_set(out_dir, seed: int = 0) -> list[Path]:
    """Two-problem manifest set whose self-consistency accuracy never drops as K grows.

    Problem A answers: right at every prefix.  Problem B answers
    [wrong, right, right, right, right]: wrong at K=1, wrong at K=2 (tie broken
    toward the better-scored first candidate), right from K=3 on.  Candidate
    scores ascend in manifest order.
    """
    out_dir = Path(out_dir)
    ascending = [(1, 10), (2, 10), (3, 10), (4, 10), (5, 10)]

    def specs(answers):
        return [
            {
                "candidate_id": f"c{i}",
                "answer_raw": answers[i],
                "rank_qa": ascending[i],
                "rank_aq": ascending[i],
            }
            for i in range(5)
        ]

    path_a = make_controlled_manifest(
        out_dir / "problem-a",
        problem_id="sweep-a",
        candidates=specs(["7", "7", "7", "7", "7"]),
        ground_truth="7",
        seed=seed * 31 + 1,
    )
    path_b = make_controlled_manifest(
        out_dir / "problem-b",
        problem_id="sweep-b",
        candidates=specs(["12", "9", "9", "9", "9"]),
        ground_truth="9",
        seed=seed * 31 + 2,
    )
    return [path_a, path_b]


def make_oracle_pair_set(out_dir, n_pairs: int = 100, config: OracleConfig | None = None, seed: int = 2024) -> Path:
    """Oracle-generated pair manifest: correct solutions vs prefix-plus-noise ones.

    Each pair gets four bundles (candidate x template order); the QA and AQ
    passes are independent draws of the same construction.  The incorrect
    member's correlation rank exceeds the correct member's by construction,
    so its normalized rank (and score) is strictly larger.
    """
    if config is None:
        config = OracleConfig(trials=1, seed=seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = []
    for i in range(n_pairs):
        sides = {"cor": {}, "inc": {}}
        for j, order in enumerate(("QA", "AQ")):
            rng = np.random.default_rng([seed, i, j])
            problem = sample_problem_tokens(config.n, config.d, rng)
            w = make_low_rank_w(config.d, config.r, rng)
            correct = generate_correct_solution(
                problem, w, config.m, config.scalar_range, rng, config.context_mode
            )
            incorrect = generate_incorrect_solution(
                correct, config.eta, config.noise_len, config.d, rng
            )
            for label, solution in (("cor", correct), ("inc", incorrect)):
                cid = f"p{i}-{label}"
                bundle = RepresentationBundle(
                    candidate_id=cid,
                    template_order=order,
                    representation_model=ORACLE_MODEL_TAG,
                    layer=0,
                    problem_reps=problem,
                    solution_reps=solution,
                )
                fname = f"{cid}_{order.lower()}.sind"
                write_bundle(bundle, out_dir / fname)
                sides[label][order] = fname
        pairs.append(
            {
                "problem_id": f"p{i}",
                "correct": {
                    "candidate_id": f"p{i}-cor",
                    "bundle_qa": sides["cor"]["QA"],
                    "bundle_aq": sides["cor"]["AQ"],
                },
                "incorrect": {
                    "candidate_id": f"p{i}-inc",
                    "bundle_qa": sides["inc"]["QA"],
                    "bundle_aq": sides["inc"]["AQ"],
                },
                "len_correct": config.m,
                "len_incorrect": config.eta + config.noise_len,
            }
        )
    manifest_path = out_dir / "pairs.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump({"schema": "corank-pairs-v1", "pairs": pairs}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
