"""Hidden-state extraction into corank representation bundles.

Runs a causal transformer over the rendered QA/AQ template, takes the hidden
states of one layer (the block's residual-stream output), partitions the
token rows into problem and solution sets by character-offset alignment
against the template spans, and writes the result through the corank bundle
format.  Scaffolding tokens ("Question:", "Answer:" and any specials) are
excluded from both sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from corank.bundleio import RepresentationBundle, read_bundle_header, write_bundle
from corank.scoring import TEMPLATE_ORDERS, build_template_text, template_spans

#: Calibrated default; only meaningful for the model depth it was picked on.
DEFAULT_LAYER = 26
DEFAULT_LAYER_DEPTH = 40

JOBS_SCHEMA = "corank-extract-jobs-v1"


class ExtractionError(ValueError):
    """Job-level configuration or alignment failure."""


@dataclass(frozen=True)
class ExtractionJob:
    """One (problem, solution, template order) forward pass to run and persist."""

    model: str
    problem: str
    solution: str
    template_order: str
    candidate_id: str
    output_path: Path
    layer: int | None = None  # None: use 26, refused unless the model has 40 layers
    device: str = "cpu"

    def __post_init__(self) -> None:
        if not self.problem or not self.solution:
            raise ExtractionError("problem and solution texts must be non-empty")
        if self.template_order not in TEMPLATE_ORDERS:
            raise ExtractionError(
                f"template_order must be one of {TEMPLATE_ORDERS}, got {self.template_order!r}"
            )
        if not self.candidate_id:
            raise ExtractionError("candidate_id must be non-empty")


@dataclass(frozen=True)
class TokenPartition:
    """Indices of problem / solution / scaffolding tokens, plus straddle count."""

    problem: tuple[int, ...]
    solution: tuple[int, ...]
    scaffolding: tuple[int, ...]
    straddled: int


def assign_token_spans(
    offsets,
    problem_span: tuple[int, int],
    solution_span: tuple[int, int],
) -> TokenPartition:
    """Partition token character offsets into problem/solution/scaffolding.

    Each token goes to the span holding the majority of its characters;
    tokens overlapping both spans are counted as straddled (ties go to the
    span that starts earlier in the template).  Tokens touching neither span
    (scaffolding literals, zero-width specials) are scaffolding.
    """

    def overlap(span, start, end):
        return max(0, min(span[1], end) - max(span[0], start))

    spans_in_order = sorted([("problem", problem_span), ("solution", solution_span)],
                            key=lambda item: item[1][0])
    problem_idx, solution_idx, scaffold_idx = [], [], []
    straddled = 0
    for i, (start, end) in enumerate(offsets):
        counts = {name: overlap(span, start, end) for name, span in spans_in_order}
        if counts["problem"] == 0 and counts["solution"] == 0:
            scaffold_idx.append(i)
            continue
        if counts["problem"] > 0 and counts["solution"] > 0:
            straddled += 1
        first, second = spans_in_order[0][0], spans_in_order[1][0]
        winner = first if counts[first] >= counts[second] else second
        (problem_idx if winner == "problem" else solution_idx).append(i)
    return TokenPartition(
        problem=tuple(problem_idx),
        solution=tuple(solution_idx),
        scaffolding=tuple(scaffold_idx),
        straddled=straddled,
    )


def resolve_layer(requested: int | None, depth: int, model: str) -> int:
    """Apply the default-layer policy: 26 is only a valid default at depth 40."""
    if requested is None:
        if depth != DEFAULT_LAYER_DEPTH:
            raise ExtractionError(
                f"model {model!r} has {depth} layers; the default layer "
                f"{DEFAULT_LAYER} is calibrated for {DEFAULT_LAYER_DEPTH}-layer models, "
                "pass an explicit layer"
            )
        return DEFAULT_LAYER
    if not 0 <= requested <= depth:
        raise ExtractionError(
            f"layer {requested} out of range for model {model!r} with {depth} layers "
            "(0 = embedding output)"
        )
    return requested


class ModelRunner:
    """Loaded tokenizer + model pair, reusable across jobs."""

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.model_id = model_id
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        if not self.tokenizer.is_fast:
            raise ExtractionError(
                f"tokenizer for {model_id!r} is not a fast tokenizer; "
                "character-offset alignment needs one"
            )
        self.model = AutoModelForCausalLM.from_pretrained(model_id)
        self.model.to(device)
        self.model.eval()
        self.device = device
        self.depth = int(self.model.config.num_hidden_layers)
        self._torch = torch

    def hidden_states(self, text: str, layer: int):
        """Token offsets and the (seq, d) hidden-state matrix of one layer."""
        enc = self.tokenizer(text, return_offsets_mapping=True, return_tensors="pt")
        offsets = [tuple(pair) for pair in enc.pop("offset_mapping")[0].tolist()]
        enc = {k: v.to(self.device) for k, v in enc.items()}
        with self._torch.no_grad():
            out = self.model(**enc, output_hidden_states=True)
        hidden = out.hidden_states[layer][0].to("cpu").numpy()
        return offsets, hidden


@dataclass(frozen=True)
class ExtractionResult:
    output_path: Path
    n_problem: int
    n_solution: int
    n_scaffolding: int
    n_total: int
    straddled: int
    layer: int
    model_tag: str


def extract_representations(job: ExtractionJob, runner: ModelRunner | None = None) -> ExtractionResult:
    """Run one forward pass and write the bundle; returns partition counts."""
    if runner is None:
        runner = ModelRunner(job.model, job.device)
    layer = resolve_layer(job.layer, runner.depth, job.model)
    text = build_template_text(job.problem, job.solution, job.template_order)
    problem_span, solution_span = template_spans(job.problem, job.solution, job.template_order)
    offsets, hidden = runner.hidden_states(text, layer)
    partition = assign_token_spans(offsets, problem_span, solution_span)
    if not partition.problem or not partition.solution:
        raise ExtractionError(
            f"alignment produced {len(partition.problem)} problem and "
            f"{len(partition.solution)} solution tokens for candidate {job.candidate_id!r}"
        )
    model_tag = f"{job.model}|block-output"
    bundle = RepresentationBundle(
        candidate_id=job.candidate_id,
        template_order=job.template_order,
        representation_model=model_tag,
        layer=layer,
        problem_reps=hidden[list(partition.problem)],
        solution_reps=hidden[list(partition.solution)],
    )
    job.output_path.parent.mkdir(parents=True, exist_ok=True)
    write_bundle(bundle, job.output_path)
    return ExtractionResult(
        output_path=job.output_path,
        n_problem=len(partition.problem),
        n_solution=len(partition.solution),
        n_scaffolding=len(partition.scaffolding),
        n_total=len(offsets),
        straddled=partition.straddled,
        layer=layer,
        model_tag=model_tag,
    )


# --- batch jobs -------------------------------------------------------------


@dataclass
class BatchOutcome:
    manifest_path: Path | None
    results: list[ExtractionResult] = field(default_factory=list)
    skipped: list[Path] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _bundle_reusable(path: Path, candidate_id: str, order: str, model_tag: str, layer: int) -> bool:
    if not path.is_file():
        return False
    try:
        header = read_bundle_header(path)
    except ValueError:
        return False
    return (
        header.candidate_id == candidate_id
        and header.template_order == order
        and header.representation_model == model_tag
        and header.layer == layer
    )


def load_jobs_document(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != JOBS_SCHEMA:
        raise ExtractionError(f"jobs manifest {path} has schema {doc.get('schema')!r}, "
                              f"expected {JOBS_SCHEMA!r}")
    for key in ("model", "problem_id", "problem_text", "candidates"):
        if key not in doc:
            raise ExtractionError(f"jobs manifest lacks {key!r}")
    if not doc["candidates"]:
        raise ExtractionError("jobs manifest has no candidates")
    for i, cand in enumerate(doc["candidates"]):
        for key in ("candidate_id", "solution", "answer_raw"):
            if key not in cand:
                raise ExtractionError(f"jobs manifest candidates[{i}] lacks {key!r}")
    return doc


def extract_batch(jobs_path, out_dir=None, skip_existing: bool = False, device: str = "cpu") -> BatchOutcome:
    """Extract QA and AQ bundles for every candidate and emit a candidate manifest.

    Per-candidate failures are collected (partial progress stays on disk);
    the candidate manifest only references candidates whose bundles all
    exist.  ``skip_existing`` reuses bundles whose header already matches the
    job (idempotent re-runs).
    """
    jobs_path = Path(jobs_path)
    doc = load_jobs_document(jobs_path)
    out_dir = Path(out_dir) if out_dir else jobs_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    runner = ModelRunner(doc["model"], device)
    layer = resolve_layer(doc.get("layer"), runner.depth, doc["model"])
    model_tag = f"{doc['model']}|block-output"

    outcome = BatchOutcome(manifest_path=None)
    entries = []
    for cand in doc["candidates"]:
        cid = cand["candidate_id"]
        paths = {}
        try:
            for order in TEMPLATE_ORDERS:
                path = out_dir / f"{cid}_{order.lower()}.sind"
                paths[order] = path
                if skip_existing and _bundle_reusable(path, cid, order, model_tag, layer):
                    outcome.skipped.append(path)
                    continue
                job = ExtractionJob(
                    model=doc["model"],
                    problem=doc["problem_text"],
                    solution=cand["solution"],
                    template_order=order,
                    candidate_id=cid,
                    output_path=path,
                    layer=layer,
                    device=device,
                )
                outcome.results.append(extract_representations(job, runner))
        except (ValueError, OSError) as exc:
            outcome.failures.append({"candidate_id": cid, "error": str(exc)})
            continue
        entries.append(
            {
                "candidate_id": cid,
                "answer_raw": cand["answer_raw"],
                "bundle_qa": paths["QA"].name,
                "bundle_aq": paths["AQ"].name,
            }
        )

    if entries:
        manifest = {
            "schema": "corank-candidates-v1",
            "problem_id": doc["problem_id"],
            "problem_text": doc["problem_text"],
            "candidates": entries,
        }
        if doc.get("ground_truth"):
            manifest["ground_truth"] = doc["ground_truth"]
        manifest_path = out_dir / f"{doc['problem_id']}.json"
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outcome.manifest_path = manifest_path
    return outcome
