"""Command-line surface for hidden-state extraction."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .extractor import ExtractionError, ExtractionJob, extract_batch, extract_representations


def cmd_single(args) -> int:
    job = ExtractionJob(
        model=args.model,
        problem=args.problem,
        solution=args.solution,
        template_order=args.order,
        candidate_id=args.candidate_id,
        output_path=Path(args.out),
        layer=args.layer,
        device=args.device,
    )
    result = extract_representations(job)
    print(
        f"wrote {result.output_path}: layer {result.layer}, "
        f"{result.n_problem} problem + {result.n_solution} solution + "
        f"{result.n_scaffolding} scaffolding = {result.n_total} tokens"
    )
    if result.straddled:
        print(f"warning: {result.straddled} tokens straddled a span boundary "
              "(assigned by majority character overlap)")
    return 0


def cmd_batch(args) -> int:
    outcome = extract_batch(
        args.jobs, out_dir=args.out_dir, skip_existing=args.skip_existing, device=args.device
    )
    for result in outcome.results:
        print(f"wrote {result.output_path} "
              f"(N={result.n_problem}, M={result.n_solution}, layer={result.layer})")
    for path in outcome.skipped:
        print(f"skipped existing {path}")
    if outcome.manifest_path:
        print(f"manifest: {outcome.manifest_path}")
    for failure in outcome.failures:
        print(f"FAILED {failure['candidate_id']}: {failure['error']}", file=sys.stderr)
    return 0 if outcome.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corank-extract",
        description="Run a causal transformer over the QA/AQ templates and write "
                    "layer hidden states as corank bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_single = sub.add_parser("single", help="extract one (problem, solution, order) bundle")
    p_single.add_argument("--model", required=True, help="Hugging Face model id or local path")
    p_single.add_argument("--problem", required=True)
    p_single.add_argument("--solution", required=True)
    p_single.add_argument("--order", choices=["QA", "AQ"], required=True)
    p_single.add_argument("--candidate-id", required=True)
    p_single.add_argument("--out", required=True, help="output bundle path")
    p_single.add_argument("--layer", type=int, default=None,
                          help="hidden-state layer (default 26, refused unless the model has 40 layers)")
    p_single.add_argument("--device", default="cpu")
    p_single.set_defaults(func=cmd_single)

    p_batch = sub.add_parser("batch", help="extract all bundles of a jobs manifest")
    p_batch.add_argument("jobs", help="jobs manifest (corank-extract-jobs-v1 JSON)")
    p_batch.add_argument("--out-dir", help="bundle output directory (default: manifest directory)")
    p_batch.add_argument("--skip-existing", action="store_true",
                         help="reuse bundles whose header already matches the job")
    p_batch.add_argument("--device", default="cpu")
    p_batch.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExtractionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
