"""Command-line surface: scoring, voting, pair evaluation, oracle runs, sweeps.

Every command is deterministic given its flags and inputs; outputs are
machine-first (JSON reports, CSV tables with ``#`` config-echo comment lines)
with a human-readable rendering printed on top.  ``CORANK_OUT_DIR`` sets the
default output directory.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

from . import bundleio, oracle, scoring, voting

OUT_DIR_ENV = "CORANK_OUT_DIR"
DEFAULT_DELTA_GRID = (0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
DEFAULT_K = 5


def _out_path(args_out, default_name: str) -> Path:
    if args_out:
        return Path(args_out)
    base = os.environ.get(OUT_DIR_ENV)
    return (Path(base) if base else Path.cwd()) / default_name


def _parse_grid(text: str, cast=float) -> list:
    try:
        values = [cast(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValueError(f"could not parse grid {text!r} as comma-separated values") from None
    if not values:
        raise ValueError(f"empty grid {text!r}")
    return values


def _scored_candidates(manifest, args):
    """Score every votable candidate of a (possibly K-capped) manifest.

    Returns (scored candidates, excluded entries, common layer, common model tag).
    """
    entries = manifest.candidates[: args.k] if args.k else manifest.candidates
    capped = bundleio.CandidateManifest(
        problem_id=manifest.problem_id,
        problem_text=manifest.problem_text,
        candidates=entries,
        ground_truth=manifest.ground_truth,
    )
    votable, excluded = bundleio.candidates_from_manifest(capped)
    answers = {c.candidate_id: c.answer for c in votable}
    scored = []
    provenance = set()
    for entry in entries:
        if entry.candidate_id not in answers:
            continue
        bundle_qa = bundleio.read_bundle(entry.bundle_qa)
        bundle_aq = bundleio.read_bundle(entry.bundle_aq)
        provenance.add((bundle_qa.layer, bundle_qa.representation_model))
        provenance.add((bundle_aq.layer, bundle_aq.representation_model))
        score = scoring.score_candidate(
            bundle_qa, bundle_aq, delta=args.delta, combine=args.combine, mode=args.mode
        )
        scored.append(
            voting.Candidate(
                candidate_id=entry.candidate_id, answer=answers[entry.candidate_id], score=score
            )
        )
    if not scored:
        raise ValueError(f"manifest {manifest.problem_id!r} has no scorable candidates")
    if len(provenance) != 1:
        raise ValueError(
            f"bundles disagree on (layer, representation model): {sorted(provenance)}"
        )
    (layer, model), = provenance
    return scored, excluded, layer, model


def _build_report(manifest_path, args, with_vote: bool):
    started = time.perf_counter()
    manifest = bundleio.load_candidate_manifest(manifest_path)
    scored, excluded, layer, model = _scored_candidates(manifest, args)
    vote = None
    if with_vote:
        if getattr(args, "baseline", None) == "self-consistency":
            vote = voting.self_consistency_vote(scored)
        else:
            positions = voting.rank_candidates([c.score for c in scored])
            weights = voting.assign_weights(positions, len(scored))
            vote = voting.weighted_majority_vote(scored, weights)
    elapsed = time.perf_counter() - started
    config = bundleio.ScoreConfig(
        delta=args.delta,
        combine=args.combine,
        normalization_mode=args.mode,
        layer=layer,
        representation_model=model,
        k=args.k,
    )
    return bundleio.ScoreReport(
        config=config,
        problem_id=manifest.problem_id,
        candidates=tuple(scored),
        vote=vote,
        excluded=tuple(excluded),
        timing_seconds=elapsed if args.record_timing else None,
    )


def _print_scores(report: bundleio.ScoreReport) -> None:
    print(f"problem {report.problem_id}: K={len(report.candidates)}, "
          f"delta={report.config.delta}, combine={report.config.combine}, "
          f"mode={report.config.normalization_mode}")
    print(f"{'candidate':<12} {'rank_qa':>8} {'rank_aq':>8} {'score':>8}  answer")
    for c in sorted(report.candidates, key=lambda c: c.score.score):
        s = c.score
        print(f"{c.candidate_id:<12} {s.rank_qa:>8.4f} {s.rank_aq:>8.4f} {s.score:>8.4f}  {c.answer}")
    for entry in report.excluded:
        print(f"excluded {entry['candidate_id']}: {entry['reason']}")


def cmd_score(args) -> int:
    report = _build_report(args.manifest, args, with_vote=False)
    out = _out_path(args.out, "score_report.json")
    bundleio.write_scores(report, out)
    _print_scores(report)
    print(f"wrote {out}")
    return 0


def cmd_vote(args) -> int:
    report = _build_report(args.manifest, args, with_vote=True)
    out = _out_path(args.out, "vote_report.json")
    bundleio.write_scores(report, out)
    _print_scores(report)
    tally = ", ".join(f"{a}={w:g}" for a, w in sorted(report.vote.tally.items()))
    print(f"tally: {tally}")
    print(f"winner: {report.vote.winner}")
    print(f"wrote {out}")
    return 0


def _config_echo_lines(pairs: list[tuple[str, object]]) -> list[str]:
    return [f"# {key}={value}" for key, value in pairs]


def _write_csv(path: Path, echo: list[str], header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in echo:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _score_pair_set(pair_manifest: bundleio.PairManifest, delta, combine, mode):
    pairs = []
    for entry in pair_manifest.pairs:
        sides = {}
        for label, side in (("correct", entry.correct), ("incorrect", entry.incorrect)):
            score = scoring.score_candidate(
                bundleio.read_bundle(side.bundle_qa),
                bundleio.read_bundle(side.bundle_aq),
                delta=delta,
                combine=combine,
                mode=mode,
            )
            sides[label] = voting.Candidate(
                candidate_id=side.candidate_id, answer="unused", score=score
            )
        pairs.append(
            voting.SolutionPair(
                problem_id=entry.problem_id,
                correct=sides["correct"],
                incorrect=sides["incorrect"],
                len_correct=entry.len_correct,
                len_incorrect=entry.len_incorrect,
            )
        )
    return pairs


def cmd_eval_pairs(args) -> int:
    manifest = bundleio.load_pair_manifest(args.pair_manifest)
    grid = _parse_grid(args.delta_grid)
    filters: list[int | None] = [None] + [int(v) for v in _parse_grid(args.max_len_diff, int)] if args.max_len_diff else [None]
    header = ["delta", "max_len_diff", "accuracy", "n_used", "n_ties", "n_excluded", "note"]
    rows = []
    print(f"{'delta':>6} {'filter':>7} {'accuracy':>9} {'n_used':>7} {'n_ties':>7} {'n_excl':>7}")
    for delta in grid:
        pairs = _score_pair_set(manifest, delta, args.combine, args.mode)
        for max_len_diff in filters:
            label = "" if max_len_diff is None else max_len_diff
            try:
                result = voting.decision_accuracy(pairs, delta, args.combine, max_len_diff)
            except voting.EmptySubsetError as exc:
                rows.append([delta, label, "", 0, "", "", f"empty-subset: {exc}"])
                print(f"{delta:>6g} {str(label) or '-':>7} {'—':>9}   empty subset: {exc}")
                continue
            rows.append(
                [delta, label, result.accuracy, result.n_used, result.n_ties, result.n_excluded, ""]
            )
            print(
                f"{delta:>6g} {str(label) or '-':>7} {result.accuracy:>9.4f} "
                f"{result.n_used:>7} {result.n_ties:>7} {result.n_excluded:>7}"
            )
    out = _out_path(args.out, "pair_accuracy.csv")
    echo = _config_echo_lines(
        [
            ("command", "eval-pairs"),
            ("pair_manifest", args.pair_manifest),
            ("combine", args.combine),
            ("mode", args.mode),
            ("delta_grid", ",".join(str(v) for v in grid)),
            ("max_len_diff", args.max_len_diff or ""),
        ]
    )
    _write_csv(out, echo, header, rows)
    print(f"wrote {out}")
    return 0


def cmd_oracle(args) -> int:
    config = oracle.OracleConfig(
        n=args.n,
        d=args.d,
        r=args.r,
        m=args.m,
        eta=args.eta,
        noise_len=args.noise_len,
        scalar_range=tuple(_parse_grid(args.scalar_range)),
        trials=args.trials,
        seed=args.seed,
        context_mode=args.context_mode,
    )
    report = oracle.run_trials(config)
    out = _out_path(args.out, "oracle_report.json")
    bundleio.dump_json_document(report.to_dict(), out)
    print(
        f"config: n={config.n} d={config.d} r={config.r} m={config.m} eta={config.eta} "
        f"noise_len={config.noise_len} trials={config.trials} seed={config.seed} "
        f"context={config.context_mode}"
    )
    print(f"frac_correct_match   {report.frac_correct_match:.4f}")
    print(f"frac_incorrect_match {report.frac_incorrect_match:.4f}")
    print(f"frac_krylov_match    {report.frac_krylov_match:.4f}")
    print(f"mean_rank_gap        {report.mean_rank_gap:.4f}")
    print(f"total_resamples      {report.total_resamples}")
    counts: dict[tuple[int, int, int], int] = {}
    for rec in report.records:
        key = (rec.rank_correct, rec.rank_incorrect, rec.krylov_dim)
        counts[key] = counts.get(key, 0) + 1
    print(f"{'rank_correct':>12} {'rank_incorrect':>14} {'krylov_dim':>10} {'trials':>7}")
    for (rc, ri, kd), count in sorted(counts.items()):
        print(f"{rc:>12} {ri:>14} {kd:>10} {count:>7}")
    print(f"wrote {out}")
    return 0


def _vote_winner(manifest_path, args, k_override=None) -> tuple[str, str | None]:
    manifest = bundleio.load_candidate_manifest(manifest_path)
    if k_override is not None and k_override > manifest.k:
        raise ValueError(
            f"k={k_override} exceeds the {manifest.k} candidates of manifest {manifest_path}"
        )
    ns = argparse.Namespace(
        delta=args.delta,
        combine=args.combine,
        mode=args.mode,
        k=k_override if k_override is not None else getattr(args, "k", None),
        record_timing=False,
        baseline=getattr(args, "baseline", None),
    )
    report = _build_report(manifest_path, ns, with_vote=True)
    truth = manifest.ground_truth
    if truth is None:
        raise ValueError(f"manifest {manifest_path} lacks ground_truth; sweeps need it")
    return report.vote.winner, bundleio.normalize_answer(truth)


def cmd_sweep(args) -> int:
    method = "self-consistency" if args.baseline == "self-consistency" else "weighted"
    rows = []
    if args.delta_grid:
        grid = _parse_grid(args.delta_grid)
        header = ["delta", "accuracy", "n_problems", "method"]
        default_name = "delta_sweep.csv"
        print(f"{'delta':>6} {'accuracy':>9} {'n':>4}")
        for delta in grid:
            sub = argparse.Namespace(**{**vars(args), "delta": delta})
            correct = sum(
                winner == truth
                for winner, truth in (_vote_winner(m, sub) for m in args.manifests)
            )
            accuracy = correct / len(args.manifests)
            rows.append([delta, accuracy, len(args.manifests), method])
            print(f"{delta:>6g} {accuracy:>9.4f} {len(args.manifests):>4}")
        echo_param = ("delta_grid", args.delta_grid)
    else:
        grid = _parse_grid(args.k_grid, int)
        header = ["k", "accuracy", "n_problems", "method"]
        default_name = "k_sweep.csv"
        print(f"{'k':>4} {'accuracy':>9} {'n':>4}")
        for k in grid:
            correct = sum(
                winner == truth
                for winner, truth in (_vote_winner(m, args, k_override=k) for m in args.manifests)
            )
            accuracy = correct / len(args.manifests)
            rows.append([k, accuracy, len(args.manifests), method])
            print(f"{k:>4} {accuracy:>9.4f} {len(args.manifests):>4}")
        echo_param = ("k_grid", args.k_grid)
    out = _out_path(args.out, default_name)
    echo = _config_echo_lines(
        [
            ("command", "sweep"),
            ("manifests", ";".join(str(m) for m in args.manifests)),
            ("delta", args.delta),
            ("combine", args.combine),
            ("mode", args.mode),
            ("method", method),
            echo_param,
        ]
    )
    _write_csv(out, echo, header, rows)
    print(f"wrote {out}")
    return 0


def _add_scoring_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--delta", type=float, default=scoring.DEFAULT_DELTA,
                        help="singular-value threshold (default 1.75)")
    parser.add_argument("--combine", choices=scoring.COMBINE_MODES, default="add",
                        help="rank combination: add (default) or mul")
    parser.add_argument("--mode", choices=["raw", "unit-rows", "spectral"], default="raw",
                        help="normalization mode (default raw)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corank",
        description="Score candidate reasoning paths by correlation-matrix rank, "
                    "reweight majority votes, and validate the rank theory synthetically.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score a candidate manifest")
    p_score.add_argument("manifest")
    _add_scoring_flags(p_score)
    p_score.add_argument("--k", type=int, default=DEFAULT_K, help="cap on candidates (default 5; 0 = all)")
    p_score.add_argument("--out", help="output report path")
    p_score.add_argument("--record-timing", action="store_true",
                         help="embed wall-clock timing (breaks byte-reproducibility)")
    p_score.set_defaults(func=cmd_score)

    p_vote = sub.add_parser("vote", help="score a manifest and run the weighted vote")
    p_vote.add_argument("manifest")
    _add_scoring_flags(p_vote)
    p_vote.add_argument("--k", type=int, default=DEFAULT_K, help="cap on candidates (default 5; 0 = all)")
    p_vote.add_argument("--baseline", choices=["self-consistency"],
                        help="vote with uniform weights instead of position weights")
    p_vote.add_argument("--out", help="output report path")
    p_vote.add_argument("--record-timing", action="store_true",
                        help="embed wall-clock timing (breaks byte-reproducibility)")
    p_vote.set_defaults(func=cmd_vote)

    p_pairs = sub.add_parser("eval-pairs", help="pairwise decision accuracy over a delta grid")
    p_pairs.add_argument("pair_manifest")
    p_pairs.add_argument("--delta-grid", default=",".join(str(v) for v in DEFAULT_DELTA_GRID),
                         help="comma-separated deltas (default %(default)s)")
    p_pairs.add_argument("--max-len-diff",
                         help="comma-separated token-length-difference bounds (e.g. 50,75)")
    p_pairs.add_argument("--combine", choices=scoring.COMBINE_MODES, default="add")
    p_pairs.add_argument("--mode", choices=["raw", "unit-rows", "spectral"], default="raw")
    p_pairs.add_argument("--out", help="output CSV path")
    p_pairs.set_defaults(func=cmd_eval_pairs)

    p_oracle = sub.add_parser("oracle", help="run synthetic rank-theory trials")
    p_oracle.add_argument("--n", type=int, default=16, help="problem token count")
    p_oracle.add_argument("--d", type=int, default=64, help="representation dimension")
    p_oracle.add_argument("--r", type=int, default=6, help="rank of the attention weight matrix")
    p_oracle.add_argument("--m", type=int, default=30, help="correct solution length")
    p_oracle.add_argument("--eta", type=int, default=10, help="correct-prefix length of the incorrect solution")
    p_oracle.add_argument("--noise-len", type=int, default=8, help="noise tokens after the prefix")
    p_oracle.add_argument("--scalar-range", default="0.5,2.0", help="uniform range for row scalars")
    p_oracle.add_argument("--trials", type=int, default=200)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--context-mode", choices=oracle.SOLUTION_CONTEXT_MODES, default="problem",
                          help="attention context for solution rows (default problem)")
    p_oracle.add_argument("--out", help="output JSON path")
    p_oracle.set_defaults(func=cmd_oracle)

    p_sweep = sub.add_parser("sweep", help="accuracy-vs-parameter tables over manifest sets")
    p_sweep.add_argument("manifests", nargs="+")
    grid_group = p_sweep.add_mutually_exclusive_group(required=True)
    grid_group.add_argument("--delta-grid", help="comma-separated deltas")
    grid_group.add_argument("--k-grid", help="comma-separated candidate counts")
    _add_scoring_flags(p_sweep)
    p_sweep.add_argument("--k", type=int, default=DEFAULT_K, help="candidate cap for delta sweeps")
    p_sweep.add_argument("--baseline", choices=["self-consistency"],
                         help="sweep the uniform-weight baseline instead")
    p_sweep.add_argument("--out", help="output CSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "k", None) == 0:
        args.k = None
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
